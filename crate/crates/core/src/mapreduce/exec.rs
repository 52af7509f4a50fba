//! Sequential and in-memory-iterative backends, plus the ordered parallel
//! task helper shared with the batch backend.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::{
    sort_stage_output, Key, KeyValuePair, Partition, Reducer, StageReport, StageSpec, Value,
};
use crate::error::Result;
use crate::util::FnvHashMap;

/// Runs `task(0..n)` on up to `workers` scoped threads, returning results
/// in task order regardless of scheduling. Tasks are claimed off a shared
/// counter so uneven task costs balance out.
pub(crate) fn parallel_ordered<T, F>(n: usize, workers: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if n == 0 {
        return Vec::new();
    }
    let workers = workers.min(n).max(1);
    if workers == 1 {
        return (0..n).map(task).collect();
    }
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(n));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= n {
                    break;
                }
                let out = task(idx);
                done.lock().unwrap().push((idx, out));
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_unstable_by_key(|&(idx, _)| idx);
    done.into_iter().map(|(_, t)| t).collect()
}

/// Groups pairs by key. Buffers must be iterated in partition order so a
/// grouped reducer sees values deterministically.
pub(crate) fn group_buffers(buffers: Vec<Vec<KeyValuePair>>) -> FnvHashMap<Key, Vec<Value>> {
    let mut groups: FnvHashMap<Key, Vec<Value>> = FnvHashMap::default();
    for buffer in buffers {
        for pair in buffer {
            groups.entry(pair.key).or_default().push(pair.value);
        }
    }
    groups
}

/// Applies a reducer to complete per-key groups.
pub(crate) fn reduce_groups(
    groups: FnvHashMap<Key, Vec<Value>>,
    reducer: &Reducer,
) -> Vec<KeyValuePair> {
    let mut out = Vec::with_capacity(groups.len());
    match reducer {
        Reducer::Grouped(f) => {
            for (key, values) in groups {
                let value = f(&key, values);
                out.push(KeyValuePair { key, value });
            }
        }
        Reducer::Associative { combine, finish } => {
            for (key, values) in groups {
                let mut iter = values.into_iter();
                let first = iter.next().expect("groups are never empty");
                let mut acc = iter.fold(first, |acc, v| combine(acc, v));
                if let Some(fin) = finish {
                    acc = fin(&key, acc);
                }
                out.push(KeyValuePair { key, value: acc });
            }
        }
    }
    out
}

/// Folds pairs directly into per-key accumulators (no group
/// materialization); only valid for associative reducers.
pub(crate) fn fold_pairs(
    pairs: impl IntoIterator<Item = KeyValuePair>,
    acc: &mut FnvHashMap<Key, Value>,
    combine: &super::CombineFn,
) {
    for pair in pairs {
        match acc.entry(pair.key) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let prev = std::mem::replace(e.get_mut(), Value::Count(0));
                *e.get_mut() = combine(prev, pair.value);
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(pair.value);
            }
        }
    }
}

pub(crate) fn finish_folded(
    acc: FnvHashMap<Key, Value>,
    finish: &Option<super::FinishFn>,
) -> Vec<KeyValuePair> {
    acc.into_iter()
        .map(|(key, value)| {
            let value = match finish {
                Some(f) => f(&key, value),
                None => value,
            };
            KeyValuePair { key, value }
        })
        .collect()
}

/// One worker, no shuffle structures: map partitions in order, then reduce
/// — the reference semantics every other backend must reproduce.
pub(crate) struct SeqSession {
    partitions: Vec<Partition>,
}

impl SeqSession {
    pub(crate) fn new(partitions: Vec<Partition>) -> Self {
        SeqSession { partitions }
    }

    pub(crate) fn run_stage(
        &mut self,
        spec: &StageSpec,
    ) -> Result<(Vec<KeyValuePair>, StageReport)> {
        let mut report = StageReport::named(spec.name());
        if self.partitions.is_empty() {
            return Ok((Vec::new(), report));
        }
        let map_fn = spec.map_fn();

        let started = Instant::now();
        let buffers: Vec<Vec<KeyValuePair>> =
            self.partitions.iter().map(|p| map_fn(p)).collect();
        report.map_time = started.elapsed();

        let started = Instant::now();
        let mut output = match spec.reducer() {
            Reducer::Associative { combine, finish } => {
                let mut acc = FnvHashMap::default();
                for buffer in buffers {
                    fold_pairs(buffer, &mut acc, combine);
                }
                finish_folded(acc, finish)
            }
            grouped => reduce_groups(group_buffers(buffers), grouped),
        };
        sort_stage_output(&mut output);
        report.reduce_time = started.elapsed();
        Ok((output, report))
    }
}

/// Map tasks on a worker pool into in-memory buffers; the driver merges
/// complete per-key groups and reduces them. Partition data stays resident
/// across stages (the "cached" iterative profile).
pub(crate) struct MemSession {
    partitions: Vec<Partition>,
    workers: usize,
}

impl MemSession {
    pub(crate) fn new(partitions: Vec<Partition>, workers: usize) -> Self {
        MemSession {
            partitions,
            workers,
        }
    }

    pub(crate) fn run_stage(
        &mut self,
        spec: &StageSpec,
    ) -> Result<(Vec<KeyValuePair>, StageReport)> {
        let mut report = StageReport::named(spec.name());
        if self.partitions.is_empty() {
            return Ok((Vec::new(), report));
        }
        let map_fn = spec.map_fn();

        let started = Instant::now();
        let buffers = parallel_ordered(self.partitions.len(), self.workers, |idx| {
            map_fn(&self.partitions[idx])
        });
        report.map_time = started.elapsed();

        // Driver-side merge: complete groups are materialized even for
        // associative reducers — the point of this backend's cost profile.
        let started = Instant::now();
        let groups = group_buffers(buffers);
        report.shuffle_time = started.elapsed();

        let started = Instant::now();
        let mut output = reduce_groups(groups, spec.reducer());
        sort_stage_output(&mut output);
        report.reduce_time = started.elapsed();
        Ok((output, report))
    }
}
