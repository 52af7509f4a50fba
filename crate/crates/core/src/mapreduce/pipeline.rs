//! Pipelined backend: a persistent pool of mapper and reducer threads
//! connected by bounded queues. Mapped pairs stream to reducers while
//! mapping is still in progress, and reducers aggregate incrementally — so
//! no complete per-key group ever materializes, which is why this backend
//! only accepts associative reducers.
//!
//! Panic containment: a panicking task must never leave a peer blocked on a
//! queue. A panicking reducer closes its own queue (so mappers pushing to it
//! unblock and skip it); a panicking mapper still participates in the
//! last-mapper-closes-the-queues handshake. Either way the failure is
//! recorded and re-raised on the driver thread once the stage has fully
//! drained.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Instant;

use super::exec::{finish_folded, fold_pairs};
use super::queue::BoundedQueue;
use super::{
    bucket_of, sort_stage_output, CombineFn, FinishFn, KeyValuePair, Partition, Reducer,
    StageReport, StageSpec,
};
use crate::error::{FimError, Result};

/// Pairs move through queues in chunks to amortize locking; a chunk can
/// never exceed the queue capacity or a push could block forever.
const MAX_CHUNK: usize = 512;

/// Everything a stage's tasks share, handed to the pool behind an `Arc`.
struct StageRun {
    map_fn: super::MapFn,
    combine: CombineFn,
    finish: Option<FinishFn>,
    partitions: Vec<Partition>,
    num_mappers: usize,
    chunk: usize,
    /// One inbound queue per reducer.
    queues: Vec<Arc<BoundedQueue<KeyValuePair>>>,
    remaining_mappers: AtomicUsize,
    /// Set by the last mapper to finish, just before it closes the queues.
    map_done_at: Mutex<Option<Instant>>,
}

enum StageMsg {
    MapperDone {
        poisoned: bool,
    },
    ReducerDone {
        pairs: Vec<KeyValuePair>,
        high_water: usize,
        poisoned: bool,
    },
}

enum WorkerCmd {
    Map {
        run: Arc<StageRun>,
        mapper: usize,
        results: mpsc::Sender<StageMsg>,
    },
    Reduce {
        run: Arc<StageRun>,
        reducer: usize,
        results: mpsc::Sender<StageMsg>,
    },
    Shutdown,
}

/// Maps this mapper's strided share of the partitions, routing each pair to
/// its reducer queue. Returns true if the task poisoned the stage.
fn run_mapper(run: &StageRun, mapper: usize) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let reducers = run.queues.len();
        let mut buffers: Vec<Vec<KeyValuePair>> = vec![Vec::new(); reducers];
        // A closed queue here means its reducer died; skip it and let the
        // reducer's own report poison the stage.
        let mut dead = vec![false; reducers];
        let mut index = mapper;
        while index < run.partitions.len() {
            for pair in (run.map_fn)(&run.partitions[index]) {
                let r = bucket_of(&pair.key) % reducers;
                if dead[r] {
                    continue;
                }
                buffers[r].push(pair);
                if buffers[r].len() >= run.chunk
                    && !run.queues[r].push_batch(std::mem::take(&mut buffers[r]))
                {
                    dead[r] = true;
                }
            }
            index += run.num_mappers;
        }
        for (r, buffer) in buffers.into_iter().enumerate() {
            if !dead[r] {
                run.queues[r].push_batch(buffer);
            }
        }
    }));
    outcome.is_err()
}

/// Drains one queue, folding pairs as they arrive. Runs the finisher once
/// the queue is closed and empty.
fn run_reducer(run: &StageRun, reducer: usize) -> (Vec<KeyValuePair>, usize, bool) {
    let queue = &run.queues[reducer];
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let mut acc = crate::util::FnvHashMap::default();
        while let Some(batch) = queue.pop_batch(run.chunk) {
            fold_pairs(batch, &mut acc, &run.combine);
        }
        finish_folded(acc, &run.finish)
    }));
    match outcome {
        Ok(pairs) => (pairs, queue.high_water(), false),
        Err(_) => {
            // Unblock any mapper pushing to us before reporting the poison.
            queue.close();
            (Vec::new(), queue.high_water(), true)
        }
    }
}

fn worker_loop(commands: mpsc::Receiver<WorkerCmd>) {
    while let Ok(cmd) = commands.recv() {
        match cmd {
            WorkerCmd::Map {
                run,
                mapper,
                results,
            } => {
                let poisoned = run_mapper(&run, mapper);
                // The handshake below must run even after a panic, or the
                // reducers would wait on queues nobody will close.
                if run.remaining_mappers.fetch_sub(1, Ordering::AcqRel) == 1 {
                    *run.map_done_at.lock().unwrap() = Some(Instant::now());
                    for queue in &run.queues {
                        queue.close();
                    }
                }
                let _ = results.send(StageMsg::MapperDone { poisoned });
            }
            WorkerCmd::Reduce {
                run,
                reducer,
                results,
            } => {
                let (pairs, high_water, poisoned) = run_reducer(&run, reducer);
                let _ = results.send(StageMsg::ReducerDone {
                    pairs,
                    high_water,
                    poisoned,
                });
            }
            WorkerCmd::Shutdown => break,
        }
    }
}

pub(crate) struct PipeSession {
    partitions: Vec<Partition>,
    workers: usize,
    channel_capacity: usize,
    mapper_cmds: Vec<mpsc::Sender<WorkerCmd>>,
    reducer_cmds: Vec<mpsc::Sender<WorkerCmd>>,
    handles: Vec<thread::JoinHandle<()>>,
    last_high_water: usize,
}

impl PipeSession {
    pub(crate) fn new(
        partitions: Vec<Partition>,
        workers: usize,
        channel_capacity: usize,
    ) -> PipeSession {
        let mut mapper_cmds = Vec::with_capacity(workers);
        let mut reducer_cmds = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(2 * workers);
        for (role, cmds) in [("map", &mut mapper_cmds), ("reduce", &mut reducer_cmds)] {
            for i in 0..workers {
                let (tx, rx) = mpsc::channel();
                cmds.push(tx);
                handles.push(
                    thread::Builder::new()
                        .name(format!("fim-{role}-{i}"))
                        .spawn(move || worker_loop(rx))
                        .expect("spawn pipeline worker"),
                );
            }
        }
        PipeSession {
            partitions,
            workers,
            channel_capacity,
            mapper_cmds,
            reducer_cmds,
            handles,
            last_high_water: 0,
        }
    }

    pub(crate) fn last_high_water(&self) -> usize {
        self.last_high_water
    }

    pub(crate) fn run_stage(
        &mut self,
        spec: &StageSpec,
    ) -> Result<(Vec<KeyValuePair>, StageReport)> {
        let (combine, finish) = match spec.reducer() {
            Reducer::Associative { combine, finish } => (combine.clone(), finish.clone()),
            Reducer::Grouped(_) => {
                return Err(FimError::config(
                    "the pipelined backend streams pairs to reducers and never \
                     materializes complete groups; this stage needs an associative reducer",
                ))
            }
        };
        let mut report = StageReport::named(spec.name());
        if self.partitions.is_empty() {
            return Ok((Vec::new(), report));
        }

        let started = Instant::now();
        let chunk = MAX_CHUNK.min(self.channel_capacity);
        let queues: Vec<Arc<BoundedQueue<KeyValuePair>>> = (0..self.workers)
            .map(|_| Arc::new(BoundedQueue::new(self.channel_capacity)))
            .collect();
        let run = Arc::new(StageRun {
            map_fn: Arc::clone(spec.map_fn()),
            combine,
            finish,
            partitions: self.partitions.clone(),
            num_mappers: self.workers,
            chunk,
            queues,
            remaining_mappers: AtomicUsize::new(self.workers),
            map_done_at: Mutex::new(None),
        });

        let (results_tx, results_rx) = mpsc::channel();
        for (mapper, cmds) in self.mapper_cmds.iter().enumerate() {
            cmds.send(WorkerCmd::Map {
                run: Arc::clone(&run),
                mapper,
                results: results_tx.clone(),
            })
            .expect("pipeline mapper thread is alive");
        }
        for (reducer, cmds) in self.reducer_cmds.iter().enumerate() {
            cmds.send(WorkerCmd::Reduce {
                run: Arc::clone(&run),
                reducer,
                results: results_tx.clone(),
            })
            .expect("pipeline reducer thread is alive");
        }
        drop(results_tx);

        let mut output = Vec::new();
        let mut high_water = 0usize;
        let mut poisoned = false;
        // Exactly one message per task; the channel closes when all senders
        // handed out above have been consumed.
        for msg in results_rx {
            match msg {
                StageMsg::MapperDone { poisoned: p } => poisoned |= p,
                StageMsg::ReducerDone {
                    pairs,
                    high_water: hw,
                    poisoned: p,
                } => {
                    output.extend(pairs);
                    high_water = high_water.max(hw);
                    poisoned |= p;
                }
            }
        }
        let drained_at = Instant::now();
        if poisoned {
            panic!("a pipelined stage task panicked; see stderr for the worker backtrace");
        }

        let map_done = run
            .map_done_at
            .lock()
            .unwrap()
            .expect("all mappers reported done");
        report.map_time = map_done.saturating_duration_since(started);
        report.reduce_time = drained_at.saturating_duration_since(map_done);
        self.last_high_water = high_water;
        sort_stage_output(&mut output);
        Ok((output, report))
    }
}

impl Drop for PipeSession {
    fn drop(&mut self) {
        for cmds in self.mapper_cmds.drain(..).chain(self.reducer_cmds.drain(..)) {
            let _ = cmds.send(WorkerCmd::Shutdown);
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}
