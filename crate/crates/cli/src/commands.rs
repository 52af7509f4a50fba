//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use fim_core::apriori::apriori_mine;
use fim_core::bench;
use fim_core::datasets::{
    absolute_minsup, generate_synthetic, parse_spmf, write_spmf, SyntheticParams,
    TransactionDatabase,
};
use fim_core::fpgrowth::fpgrowth_mine;
use fim_core::itemset::MiningResult;
use fim_core::mapreduce::{default_workers, Backend};
use fim_core::parallel::{mr_apriori, pfp_mine};
use fim_core::FimError;

use crate::{config, AlgoArg, BenchArgs, FormatArg, GenArgs, InspectArgs, MineArgs};

/// Resolves the worker count: an explicit flag wins, then the FIM_WORKERS
/// environment variable, then the hardware thread count.
pub(crate) fn resolve_workers(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(FimError::config("--workers must be at least 1").into());
        }
        return Ok(w);
    }
    match std::env::var("FIM_WORKERS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(FimError::config(format!(
                "FIM_WORKERS must be a positive integer, got {raw:?}"
            ))
            .into()),
        },
        Err(_) => Ok(default_workers()),
    }
}

fn positive(value: usize, what: &str) -> anyhow::Result<usize> {
    if value == 0 {
        return Err(FimError::config(format!("{what} must be at least 1")).into());
    }
    Ok(value)
}

/// Writes to `output` when given, stdout otherwise.
fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_database(path: &Path) -> anyhow::Result<TransactionDatabase> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(parse_spmf(&text)?.with_name(name))
}

pub fn cmd_mine(args: &MineArgs) -> anyhow::Result<()> {
    // Validate every knob before touching the filesystem.
    if !args.minsup.is_finite() || args.minsup <= 0.0 || args.minsup > 1.0 {
        return Err(FimError::config(format!(
            "--minsup must be in (0, 1], got {}",
            args.minsup
        ))
        .into());
    }
    let workers = resolve_workers(args.workers)?;
    let partitions = positive(args.partitions.unwrap_or(workers), "--partitions")?;
    let groups = positive(args.groups.unwrap_or(2 * workers), "--groups")?;

    let db = read_database(&args.input)?;
    let minsup_abs = absolute_minsup(args.minsup, db.len())?;
    let backend = Backend::new(args.backend.to_core()).with_workers(workers);
    let result = match args.algo {
        AlgoArg::Apriori => apriori_mine(&db, minsup_abs),
        AlgoArg::Fpgrowth => fpgrowth_mine(&db, minsup_abs),
        AlgoArg::MrApriori => mr_apriori(&db, minsup_abs, &backend, partitions)?,
        AlgoArg::Pfp => pfp_mine(&db, minsup_abs, &backend, partitions, groups)?,
    };

    let rendered = match args.format {
        FormatArg::Text => render_text(&result, &db),
        FormatArg::Csv => render_csv(&result, &db),
        FormatArg::JsonLines => render_json_lines(&result, &db),
    };
    emit(&rendered, args.output.as_deref())
}

/// One itemset per line in canonical order: `tokens... #SUP: count`.
fn render_text(result: &MiningResult, db: &TransactionDatabase) -> String {
    let mut out = String::new();
    for (set, support) in &result.frequent {
        let _ = writeln!(out, "{} #SUP: {}", set.display_with(db), support);
    }
    out
}

fn render_csv(result: &MiningResult, db: &TransactionDatabase) -> String {
    let mut out = String::from("items,support\n");
    for (set, support) in &result.frequent {
        let _ = writeln!(out, "{},{}", set.display_with(db), support);
    }
    out
}

fn render_json_lines(result: &MiningResult, db: &TransactionDatabase) -> String {
    let mut out = String::new();
    for (set, support) in &result.frequent {
        // Item tokens are validated as unsigned integers at parse time.
        let items: Vec<u64> = set
            .items()
            .iter()
            .map(|&id| {
                db.dictionary()
                    .token_of(id)
                    .parse()
                    .expect("item tokens are numeric")
            })
            .collect();
        let line = serde_json::json!({ "items": items, "support": support });
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let config = match &args.config {
        Some(path) => config::load_bench_config(path)?,
        None => config::inline_bench_config(args)?,
    };

    let report = bench::run_benchmark(&config)?;
    for err in &report.dataset_errors {
        eprintln!("warning: dataset {}: {}", err.dataset, err.message);
    }

    let csv = bench::emit_csv(&report.records);
    emit(&csv, args.csv_out.as_deref())?;

    if let Some(svg_path) = &args.svg_out {
        let svg = bench::emit_svg_chart(&report.records, args.chart_by.to_core())?;
        fs::write(svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))?;
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let defaults = SyntheticParams::default();
    let params = SyntheticParams {
        num_transactions: args.transactions.unwrap_or(defaults.num_transactions),
        num_items: args.items.unwrap_or(defaults.num_items),
        avg_transaction_len: args.avg_len.unwrap_or(defaults.avg_transaction_len),
        avg_pattern_len: args.avg_pattern_len.unwrap_or(defaults.avg_pattern_len),
        num_patterns: args.patterns.unwrap_or(defaults.num_patterns),
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let db = generate_synthetic(&params)?;
    emit(&write_spmf(&db), args.output.as_deref())
}

pub fn cmd_inspect(args: &InspectArgs) -> anyhow::Result<()> {
    let db = read_database(&args.input)?;
    println!("{}", summarize(&db));
    Ok(())
}

fn summarize(db: &TransactionDatabase) -> String {
    if db.is_empty() {
        return "0 transactions, 0 items".to_string();
    }
    let mut min = usize::MAX;
    let mut max = 0usize;
    let mut total = 0usize;
    for txn in db.transactions() {
        let len = txn.items().len();
        min = min.min(len);
        max = max.max(len);
        total += len;
    }
    let mean = total as f64 / db.len() as f64;
    format!(
        "{} transactions, {} items, len min {} mean {} max {}",
        db.len(),
        db.num_items(),
        min,
        trim2(mean),
        max
    )
}

/// Rounds to two decimals and renders without trailing zeros (2.25 stays
/// "2.25", 2.0 becomes "2").
fn trim2(value: f64) -> String {
    format!("{}", (value * 100.0).round() / 100.0)
}
