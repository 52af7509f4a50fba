//! Benchmark grid configuration.
//!
//! The TOML schema mirrors `fim_core::bench::BenchConfig`:
//!
//! ```toml
//! minsups = [0.005, 0.001]
//! algorithms = ["mr-apriori", "pfp"]     # default: all four
//! backends = ["batch", "inmemory", "pipelined"]
//! workers = 4                            # default: FIM_WORKERS or hardware
//! partitions = 8                         # default: workers
//! groups = 8                             # default: 2 x workers
//! trials = 3
//! verify = true
//! warmup = false
//!
//! [[datasets]]
//! name = "retail"
//! file = "retail.txt"                    # relative to this config file
//!
//! [[datasets]]
//! name = "synth-100k"
//! [datasets.synthetic]                   # SyntheticParams field names
//! num_transactions = 100000
//! seed = 7
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fim_core::bench::{BenchConfig, DatasetSpec};
use fim_core::datasets::SyntheticParams;
use fim_core::itemset::Algorithm;
use fim_core::mapreduce::BackendKind;
use fim_core::FimError;
use serde::Deserialize;

use crate::commands::resolve_workers;
use crate::BenchArgs;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    datasets: Vec<DatasetEntry>,
    #[serde(default)]
    minsups: Vec<f64>,
    #[serde(default)]
    algorithms: Vec<String>,
    #[serde(default)]
    backends: Vec<String>,
    partitions: Option<usize>,
    workers: Option<usize>,
    groups: Option<usize>,
    trials: Option<usize>,
    verify: Option<bool>,
    warmup: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetEntry {
    name: Option<String>,
    file: Option<PathBuf>,
    synthetic: Option<SyntheticEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SyntheticEntry {
    num_transactions: usize,
    num_items: usize,
    avg_transaction_len: usize,
    avg_pattern_len: usize,
    num_patterns: usize,
    seed: u64,
}

impl Default for SyntheticEntry {
    fn default() -> Self {
        let p = SyntheticParams::default();
        SyntheticEntry {
            num_transactions: p.num_transactions,
            num_items: p.num_items,
            avg_transaction_len: p.avg_transaction_len,
            avg_pattern_len: p.avg_pattern_len,
            num_patterns: p.num_patterns,
            seed: p.seed,
        }
    }
}

impl SyntheticEntry {
    fn into_params(self) -> SyntheticParams {
        SyntheticParams {
            num_transactions: self.num_transactions,
            num_items: self.num_items,
            avg_transaction_len: self.avg_transaction_len,
            avg_pattern_len: self.avg_pattern_len,
            num_patterns: self.num_patterns,
            seed: self.seed,
        }
    }
}

fn all_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::Apriori,
        Algorithm::FpGrowth,
        Algorithm::MrApriori,
        Algorithm::Pfp,
    ]
}

fn stem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads and validates a TOML grid config. Relative dataset paths resolve
/// against the config file's directory.
pub fn load_bench_config(path: &Path) -> anyhow::Result<BenchConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: FileConfig = toml::from_str(&text)
        .map_err(|e| FimError::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    build(file, base)
}

fn build(file: FileConfig, base: &Path) -> anyhow::Result<BenchConfig> {
    let mut datasets = Vec::with_capacity(file.datasets.len());
    for (i, entry) in file.datasets.into_iter().enumerate() {
        match (entry.file, entry.synthetic) {
            (Some(rel), None) => {
                let resolved = if rel.is_absolute() { rel } else { base.join(rel) };
                let name = entry.name.unwrap_or_else(|| stem_name(&resolved));
                datasets.push(DatasetSpec::file(name, resolved));
            }
            (None, Some(synth)) => {
                let name = entry
                    .name
                    .unwrap_or_else(|| format!("synthetic-{}", synth.num_transactions));
                datasets.push(DatasetSpec::synthetic(name, synth.into_params()));
            }
            (Some(_), Some(_)) => {
                return Err(FimError::config(format!(
                    "dataset #{}: set either file or synthetic, not both",
                    i + 1
                ))
                .into());
            }
            (None, None) => {
                return Err(FimError::config(format!(
                    "dataset #{}: needs a file path or synthetic params",
                    i + 1
                ))
                .into());
            }
        }
    }

    let algorithms = if file.algorithms.is_empty() {
        all_algorithms()
    } else {
        file.algorithms
            .iter()
            .map(|s| {
                Algorithm::from_name(s)
                    .ok_or_else(|| FimError::config(format!("unknown algorithm {s:?}")))
            })
            .collect::<Result<_, _>>()?
    };
    let backends = if file.backends.is_empty() {
        BackendKind::all().to_vec()
    } else {
        file.backends
            .iter()
            .map(|s| {
                BackendKind::from_name(s)
                    .ok_or_else(|| FimError::config(format!("unknown backend {s:?}")))
            })
            .collect::<Result<_, _>>()?
    };

    let workers = match file.workers {
        Some(w) => w,
        None => resolve_workers(None)?,
    };
    let mut config = BenchConfig {
        datasets,
        minsups: file.minsups,
        algorithms,
        backends,
        partitions: file.partitions.unwrap_or(workers),
        workers,
        groups: file.groups,
        ..BenchConfig::default()
    };
    if let Some(t) = file.trials {
        config.trials = t;
    }
    if let Some(v) = file.verify {
        config.verify = v;
    }
    if let Some(w) = file.warmup {
        config.warmup = w;
    }
    Ok(config)
}

/// Builds a grid config from the inline bench flags.
pub fn inline_bench_config(args: &BenchArgs) -> anyhow::Result<BenchConfig> {
    if args.inputs.is_empty() && args.synthetic.is_empty() {
        return Err(FimError::config(
            "bench needs --config or at least one --input/--synthetic dataset",
        )
        .into());
    }

    let mut datasets = Vec::new();
    for path in &args.inputs {
        datasets.push(DatasetSpec::file(stem_name(path), path.clone()));
    }
    for &n in &args.synthetic {
        let params = SyntheticParams {
            num_transactions: n,
            seed: args.seed.unwrap_or(1),
            ..SyntheticParams::default()
        };
        datasets.push(DatasetSpec::synthetic(format!("synthetic-{n}"), params));
    }

    let algorithms = if args.algos.is_empty() {
        all_algorithms()
    } else {
        args.algos.iter().map(|a| a.to_core()).collect()
    };
    let backends = if args.backends.is_empty() {
        BackendKind::all().to_vec()
    } else {
        args.backends.iter().map(|b| b.to_core()).collect()
    };

    let workers = resolve_workers(args.workers)?;
    let mut config = BenchConfig {
        datasets,
        minsups: args.minsups.clone(),
        algorithms,
        backends,
        partitions: args.partitions.unwrap_or(workers),
        workers,
        groups: args.groups,
        verify: !args.no_verify,
        warmup: args.warmup,
        ..BenchConfig::default()
    };
    if let Some(t) = args.trials {
        config.trials = t;
    }
    Ok(config)
}
