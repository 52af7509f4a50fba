//! Batch-materialize backend: every stage writes its mapped pairs into
//! per-bucket spill files, fsyncs them (the durability barrier), reads them
//! back, and only then reduces. Input partitions are themselves spilled at
//! session start and re-read from disk on every stage — iterative drivers
//! pay the re-read each level, which is precisely the cost profile this
//! backend models.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{
    bucket_of, exec, sort_stage_output, KeyValuePair, Partition, StageReport, StageSpec, Value,
    SHUFFLE_BUCKETS,
};
use crate::datasets::{ItemId, Transaction};
use crate::error::{FimError, Result};

/// Spill record: `key_len(u32 LE) | key | tag(u8)` followed by either an
/// 8-byte little-endian count (tag 0) or `payload_len(u32 LE) | payload`
/// (tag 1).
pub(crate) fn encode_pair(buf: &mut Vec<u8>, pair: &KeyValuePair) {
    buf.extend_from_slice(&(pair.key.len() as u32).to_le_bytes());
    buf.extend_from_slice(&pair.key);
    match &pair.value {
        Value::Count(c) => {
            buf.push(0);
            buf.extend_from_slice(&c.to_le_bytes());
        }
        Value::Bytes(b) => {
            buf.push(1);
            buf.extend_from_slice(&(b.len() as u32).to_le_bytes());
            buf.extend_from_slice(b);
        }
    }
}

pub(crate) fn decode_pairs(bytes: &[u8]) -> Result<Vec<KeyValuePair>> {
    let corrupt = || FimError::input("corrupt spill record");
    let mut out = Vec::new();
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        let end = at.checked_add(n).ok_or_else(corrupt)?;
        let slice = bytes.get(*at..end).ok_or_else(corrupt)?;
        *at = end;
        Ok(slice)
    };
    while at < bytes.len() {
        let key_len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let key = take(&mut at, key_len)?.to_vec();
        let tag = take(&mut at, 1)?[0];
        let value = match tag {
            0 => Value::Count(i64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap())),
            1 => {
                let len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
                Value::Bytes(take(&mut at, len)?.to_vec())
            }
            _ => return Err(corrupt()),
        };
        out.push(KeyValuePair { key, value });
    }
    Ok(out)
}

pub(crate) fn encode_transactions(txns: &[Transaction]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&(txns.len() as u32).to_le_bytes());
    for txn in txns {
        buf.extend_from_slice(&(txn.len() as u32).to_le_bytes());
        for item in txn.items() {
            buf.extend_from_slice(&item.0.to_le_bytes());
        }
    }
    buf
}

pub(crate) fn decode_transactions(bytes: &[u8]) -> Result<Vec<Transaction>> {
    let corrupt = || FimError::input("corrupt spilled partition data");
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        let end = at.checked_add(n).ok_or_else(corrupt)?;
        let slice = bytes.get(*at..end).ok_or_else(corrupt)?;
        *at = end;
        Ok(slice)
    };
    let count = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let raw = take(&mut at, len * 4)?;
        let items: Vec<ItemId> = raw
            .chunks_exact(4)
            .map(|c| ItemId(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        out.push(Transaction::new(items));
    }
    if at != bytes.len() {
        return Err(corrupt());
    }
    Ok(out)
}

/// Spill directory lifecycle: deleted on clean session teardown, retained
/// with a warning after a failure so the files can be inspected.
struct SpillDir {
    path: PathBuf,
    managed: Option<tempfile::TempDir>,
    failed: bool,
}

impl SpillDir {
    fn create(base: Option<&Path>) -> Result<SpillDir> {
        match base {
            None => {
                let dir = tempfile::Builder::new().prefix("fim-spill-").tempdir()?;
                Ok(SpillDir {
                    path: dir.path().to_path_buf(),
                    managed: Some(dir),
                    failed: false,
                })
            }
            Some(base) => {
                fs::create_dir_all(base)?;
                let dir = tempfile::Builder::new()
                    .prefix("fim-spill-")
                    .tempdir_in(base)?;
                Ok(SpillDir {
                    path: dir.path().to_path_buf(),
                    managed: Some(dir),
                    failed: false,
                })
            }
        }
    }
}

impl Drop for SpillDir {
    fn drop(&mut self) {
        if self.failed {
            if let Some(dir) = self.managed.take() {
                // Disarm deletion so the files survive for debugging.
                let kept = dir.keep();
                eprintln!(
                    "warning: stage failed; spill files retained at {}",
                    kept.display()
                );
            }
        }
        // Otherwise TempDir's drop removes everything.
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(bytes)?;
    file.sync_all()?; // the durability barrier this backend exists to model
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub(crate) struct BatchSession {
    spill: SpillDir,
    /// (original partition index, spilled input file) in partition order.
    inputs: Vec<(usize, PathBuf)>,
    workers: usize,
    stage_seq: usize,
}

impl BatchSession {
    pub(crate) fn new(
        partitions: Vec<Partition>,
        spill_base: Option<&Path>,
        workers: usize,
    ) -> Result<BatchSession> {
        let spill = SpillDir::create(spill_base)?;
        let mut inputs = Vec::with_capacity(partitions.len());
        for part in &partitions {
            let path = spill.path.join(format!("input-part{:04}.dat", part.index()));
            write_synced(&path, &encode_transactions(part.transactions()))?;
            inputs.push((part.index(), path));
        }
        // The in-memory partitions drop here; stages re-read from disk.
        Ok(BatchSession {
            spill,
            inputs,
            workers,
            stage_seq: 0,
        })
    }

    pub(crate) fn run_stage(
        &mut self,
        spec: &StageSpec,
    ) -> Result<(Vec<KeyValuePair>, StageReport)> {
        let result = self.run_stage_inner(spec);
        if result.is_err() {
            self.spill.failed = true;
        }
        result
    }

    fn run_stage_inner(&mut self, spec: &StageSpec) -> Result<(Vec<KeyValuePair>, StageReport)> {
        let mut report = StageReport::named(spec.name());
        if self.inputs.is_empty() {
            return Ok((Vec::new(), report));
        }
        let map_fn = spec.map_fn();
        let stage_seq = self.stage_seq;
        self.stage_seq += 1;

        // Map phase: each task re-reads its partition from the spilled
        // input representation, then maps it.
        let started = std::time::Instant::now();
        let inputs = &self.inputs;
        let buffers: Vec<Result<Vec<KeyValuePair>>> =
            exec::parallel_ordered(inputs.len(), self.workers, |idx| {
                let (part_index, path) = &inputs[idx];
                let txns = decode_transactions(&read_file(path)?)?;
                let part = Partition::owned(*part_index, txns);
                Ok(map_fn(&part))
            });
        let buffers: Vec<Vec<KeyValuePair>> =
            buffers.into_iter().collect::<Result<_>>()?;
        report.map_time = started.elapsed();

        // Shuffle phase: serialize pairs into per-bucket files (partition
        // order within each bucket), fsync, read back, regroup.
        let started = std::time::Instant::now();
        let mut bucket_bufs: Vec<Vec<u8>> = vec![Vec::new(); SHUFFLE_BUCKETS];
        for buffer in &buffers {
            for pair in buffer {
                encode_pair(&mut bucket_bufs[bucket_of(&pair.key)], pair);
            }
        }
        drop(buffers);
        let mut bucket_files: Vec<(usize, PathBuf)> = Vec::new();
        for (bucket, bytes) in bucket_bufs.iter().enumerate() {
            if bytes.is_empty() {
                continue;
            }
            let path = self
                .spill
                .path
                .join(format!("stage{stage_seq:03}-bucket{bucket:02}.spill"));
            write_synced(&path, bytes)?;
            report.bytes_materialized += bytes.len() as u64;
            bucket_files.push((bucket, path));
        }
        drop(bucket_bufs);
        let mut grouped_buckets = Vec::with_capacity(bucket_files.len());
        for (_, path) in &bucket_files {
            let pairs = decode_pairs(&read_file(path)?)?;
            grouped_buckets.push(exec::group_buffers(vec![pairs]));
        }
        report.shuffle_time = started.elapsed();

        // Reduce phase, bucket by bucket.
        let started = std::time::Instant::now();
        let mut output = Vec::new();
        for groups in grouped_buckets {
            output.extend(exec::reduce_groups(groups, spec.reducer()));
        }
        sort_stage_output(&mut output);
        report.reduce_time = started.elapsed();

        // Stage spill files are dead now; keep the directory bounded.
        for (_, path) in bucket_files {
            let _ = fs::remove_file(path);
        }
        Ok((output, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_count(key: &[u8], c: i64) -> KeyValuePair {
        KeyValuePair::count(key.to_vec(), c)
    }

    fn pair_bytes(key: &[u8], b: &[u8]) -> KeyValuePair {
        KeyValuePair::bytes(key.to_vec(), b.to_vec())
    }

    #[test]
    fn pair_codec_round_trips_counts_and_payloads() {
        let pairs = vec![
            pair_count(b"alpha", -7),
            pair_bytes(b"", b"payload bytes"),
            pair_count(b"k", i64::MAX),
            pair_bytes(b"blob", b""),
        ];
        let mut buf = Vec::new();
        for p in &pairs {
            encode_pair(&mut buf, p);
        }
        assert_eq!(decode_pairs(&buf).unwrap(), pairs);
    }

    #[test]
    fn pair_codec_rejects_truncation() {
        let mut buf = Vec::new();
        encode_pair(&mut buf, &pair_count(b"key", 3));
        for cut in 1..buf.len() {
            assert!(
                decode_pairs(&buf[..cut]).is_err(),
                "truncation at {cut} must fail"
            );
        }
    }

    #[test]
    fn transaction_codec_round_trips() {
        let txns = vec![
            Transaction::new(vec![ItemId(0), ItemId(5), ItemId(2)]),
            Transaction::new(vec![]),
            Transaction::new(vec![ItemId(9)]),
        ];
        let encoded = encode_transactions(&txns);
        assert_eq!(decode_transactions(&encoded).unwrap(), txns);
        assert!(decode_transactions(&encoded[..encoded.len() - 1]).is_err());
    }
}
