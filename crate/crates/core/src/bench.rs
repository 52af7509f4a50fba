//! Benchmark harness: runs algorithm × backend × dataset × minsup grids
//! with repeated trials, verifies results against a brute-force oracle on
//! small inputs, and renders the aggregates as CSV and SVG bar charts.
//!
//! Grid cells execute strictly sequentially — concurrent cells would
//! contaminate each other's timings; parallelism belongs to the backend
//! under measurement. Timings cover the mining call only; datasets are
//! loaded (or generated) once up front.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::apriori::apriori_mine;
use crate::datasets::{
    absolute_minsup, generate_synthetic, parse_spmf, ItemId, SyntheticParams, TransactionDatabase,
};
use crate::error::{FimError, Result};
use crate::fpgrowth::fpgrowth_mine;
use crate::itemset::{Algorithm, Itemset, MiningResult};
use crate::mapreduce::{default_workers, Backend, BackendKind};
use crate::parallel::{mr_apriori, pfp_mine};

/// Exhaustive enumeration explodes as 2^items; refuse beyond this.
pub const ORACLE_ITEM_LIMIT: usize = 20;

/// Ground truth by exhaustion: enumerate every non-empty itemset over the
/// items actually present and count it with a full subset scan. Only for
/// small inputs — the item limit guards the exponential blow-up.
pub fn brute_force_oracle(db: &TransactionDatabase, minsup_abs: u64) -> Result<MiningResult> {
    let minsup = minsup_abs.max(1);
    let started = Instant::now();
    let present: BTreeSet<ItemId> = db
        .transactions()
        .iter()
        .flat_map(|t| t.items().iter().copied())
        .collect();
    if present.len() > ORACLE_ITEM_LIMIT {
        return Err(FimError::input(format!(
            "brute-force oracle refused: {} distinct items exceed the limit of {}",
            present.len(),
            ORACLE_ITEM_LIMIT
        )));
    }
    let present: Vec<ItemId> = present.into_iter().collect();
    let bit_of = |item: ItemId| present.binary_search(&item).unwrap();
    let masks: Vec<u32> = db
        .transactions()
        .iter()
        .map(|t| {
            t.items()
                .iter()
                .fold(0u32, |m, &item| m | 1 << bit_of(item))
        })
        .collect();

    let mut frequent = BTreeMap::new();
    for subset in 1u32..(1u32 << present.len()) {
        let count = masks.iter().filter(|&&m| m & subset == subset).count() as u64;
        if count >= minsup {
            let items = present
                .iter()
                .enumerate()
                .filter(|&(bit, _)| subset & (1 << bit) != 0)
                .map(|(_, &item)| item)
                .collect();
            frequent.insert(Itemset::from_sorted(items), count);
        }
    }

    Ok(MiningResult {
        frequent,
        minsup_abs: minsup,
        algorithm: Algorithm::BruteForce,
        backend: BackendKind::Sequential,
        elapsed: started.elapsed(),
        level_timings: Vec::new(),
        level_candidate_counts: Vec::new(),
    })
}

/// Where a benchmark dataset comes from.
#[derive(Clone, Debug)]
pub enum DatasetSource {
    /// An SPMF-format file on disk.
    File(PathBuf),
    Synthetic(SyntheticParams),
}

#[derive(Clone, Debug)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DatasetSource,
}

impl DatasetSpec {
    pub fn file(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            name: name.into(),
            source: DatasetSource::File(path.into()),
        }
    }

    pub fn synthetic(name: impl Into<String>, params: SyntheticParams) -> Self {
        DatasetSpec {
            name: name.into(),
            source: DatasetSource::Synthetic(params),
        }
    }
}

/// One benchmark grid: every dataset × minsup × algorithm × backend cell
/// runs `trials` timed mining calls.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSpec>,
    /// Relative minimum supports, each in (0, 1].
    pub minsups: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub backends: Vec<BackendKind>,
    pub partitions: usize,
    pub workers: usize,
    /// PFP group count; defaults to 2 × workers when unset.
    pub groups: Option<usize>,
    pub trials: usize,
    /// Check results against the brute-force oracle on oracle-sized
    /// datasets; result mismatches abort the whole run.
    pub verify: bool,
    /// Run one untimed mining call per cell before the timed trials.
    pub warmup: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            datasets: Vec::new(),
            minsups: Vec::new(),
            algorithms: Vec::new(),
            backends: Vec::new(),
            partitions: default_workers(),
            workers: default_workers(),
            groups: None,
            trials: 3,
            verify: true,
            warmup: false,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(FimError::config("benchmark needs at least one dataset"));
        }
        if self.minsups.is_empty() {
            return Err(FimError::config("benchmark needs at least one minsup"));
        }
        if self.algorithms.is_empty() {
            return Err(FimError::config("benchmark needs at least one algorithm"));
        }
        if self.backends.is_empty() {
            return Err(FimError::config("benchmark needs at least one backend"));
        }
        if self.algorithms.contains(&Algorithm::BruteForce) {
            return Err(FimError::config(
                "brute-force is the verification oracle, not a benchmark algorithm",
            ));
        }
        if self.trials == 0 {
            return Err(FimError::config("trials must be at least 1"));
        }
        if self.partitions == 0 || self.workers == 0 {
            return Err(FimError::config(
                "partitions and workers must be at least 1",
            ));
        }
        for &m in &self.minsups {
            if !m.is_finite() || m <= 0.0 || m > 1.0 {
                return Err(FimError::config(format!(
                    "relative minimum support must be in (0, 1], got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// Aggregated timings for one grid cell.
#[derive(Clone, Debug)]
pub struct BenchmarkRecord {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub backend: BackendKind,
    pub minsup_rel: f64,
    pub minsup_abs: u64,
    pub trial_times: Vec<Duration>,
    pub mean_time: Duration,
    pub num_frequent: usize,
    /// True only when the cell's result was actually checked against the
    /// oracle and matched; false when verification was off or the dataset
    /// was too large for exhaustion.
    pub verified: bool,
}

impl BenchmarkRecord {
    pub fn mean_ms(&self) -> f64 {
        self.mean_time.as_secs_f64() * 1e3
    }
}

/// A dataset that could not be loaded; the run continues without it.
#[derive(Clone, Debug)]
pub struct DatasetError {
    pub dataset: String,
    pub message: String,
}

/// Everything a benchmark run produced.
#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub records: Vec<BenchmarkRecord>,
    pub dataset_errors: Vec<DatasetError>,
}

fn load_dataset(spec: &DatasetSpec) -> Result<TransactionDatabase> {
    let db = match &spec.source {
        DatasetSource::File(path) => parse_spmf(&std::fs::read_to_string(path)?)?,
        DatasetSource::Synthetic(params) => generate_synthetic(params)?,
    };
    Ok(db.with_name(spec.name.clone()))
}

fn distinct_item_count(db: &TransactionDatabase) -> usize {
    let mut seen = vec![false; db.num_items()];
    let mut n = 0usize;
    for txn in db.transactions() {
        for item in txn.items() {
            if !seen[item.index()] {
                seen[item.index()] = true;
                n += 1;
            }
        }
    }
    n
}

fn run_cell(
    db: &TransactionDatabase,
    minsup_abs: u64,
    algorithm: Algorithm,
    backend: &Backend,
    partitions: usize,
    groups: usize,
) -> Result<MiningResult> {
    match algorithm {
        Algorithm::Apriori => Ok(apriori_mine(db, minsup_abs)),
        Algorithm::FpGrowth => Ok(fpgrowth_mine(db, minsup_abs)),
        Algorithm::MrApriori => mr_apriori(db, minsup_abs, backend, partitions),
        Algorithm::Pfp => pfp_mine(db, minsup_abs, backend, partitions, groups),
        Algorithm::BruteForce => brute_force_oracle(db, minsup_abs),
    }
}

fn record_sort_key(r: &BenchmarkRecord) -> (String, &'static str, &'static str) {
    (r.dataset.clone(), r.algorithm.as_str(), r.backend.as_str())
}

fn sort_records(records: &mut [BenchmarkRecord]) {
    records.sort_by(|a, b| {
        record_sort_key(a)
            .cmp(&record_sort_key(b))
            .then(a.minsup_rel.total_cmp(&b.minsup_rel))
    });
}

/// Runs the whole grid. Cells run sequentially; per cell, `trials` timed
/// mining calls are recorded (wall time of the mining call only). With
/// `verify` on, oracle-sized datasets are checked for exact result equality
/// — any mismatch, or any disagreement on the number of frequent itemsets
/// between cells sharing (dataset, minsup), aborts the run.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let groups = config.groups.unwrap_or(2 * config.workers).max(1);
    let mut report = BenchReport::default();

    for spec in &config.datasets {
        let db = match load_dataset(spec) {
            Ok(db) => db,
            Err(err) => {
                report.dataset_errors.push(DatasetError {
                    dataset: spec.name.clone(),
                    message: err.to_string(),
                });
                continue;
            }
        };
        let oracle_sized = distinct_item_count(&db) <= ORACLE_ITEM_LIMIT;

        for &minsup_rel in &config.minsups {
            let minsup_abs = absolute_minsup(minsup_rel, db.len())?;
            let oracle = if config.verify && oracle_sized {
                Some(brute_force_oracle(&db, minsup_abs)?.frequent)
            } else {
                None
            };
            let mut expected_num: Option<usize> = None;

            for &algorithm in &config.algorithms {
                for &kind in &config.backends {
                    let backend = Backend::new(kind).with_workers(config.workers);
                    let cell = || {
                        run_cell(&db, minsup_abs, algorithm, &backend, config.partitions, groups)
                    };
                    if config.warmup {
                        cell()?;
                    }
                    let mut trial_times = Vec::with_capacity(config.trials);
                    let mut result = None;
                    for _ in 0..config.trials {
                        let t0 = Instant::now();
                        result = Some(cell()?);
                        trial_times.push(t0.elapsed());
                    }
                    let result = result.expect("trials >= 1");
                    let cell_id = format!(
                        "{}/{}/{} at minsup {}",
                        spec.name,
                        algorithm.as_str(),
                        kind.as_str(),
                        minsup_rel
                    );

                    let num_frequent = result.num_frequent();
                    match expected_num {
                        None => expected_num = Some(num_frequent),
                        Some(expected) if expected != num_frequent => {
                            return Err(FimError::verification(format!(
                                "cell {cell_id} found {num_frequent} frequent itemsets \
                                 where earlier cells found {expected}"
                            )));
                        }
                        Some(_) => {}
                    }
                    let verified = match &oracle {
                        Some(truth) => {
                            if &result.frequent != truth {
                                return Err(FimError::verification(format!(
                                    "cell {cell_id} disagrees with the brute-force oracle"
                                )));
                            }
                            true
                        }
                        None => false,
                    };

                    let total: Duration = trial_times.iter().sum();
                    report.records.push(BenchmarkRecord {
                        dataset: spec.name.clone(),
                        algorithm,
                        backend: kind,
                        minsup_rel,
                        minsup_abs,
                        mean_time: total / config.trials as u32,
                        trial_times,
                        num_frequent,
                        verified,
                    });
                }
            }
        }
    }
    sort_records(&mut report.records);
    Ok(report)
}

fn ms3(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

/// Renders records as CSV: a fixed header, one row per record, durations in
/// milliseconds with three decimals, rows ordered by (dataset, algorithm,
/// backend, minsup). The trial column count follows the widest record
/// (trial1..trialN); records with fewer trials leave the extras empty.
pub fn emit_csv(records: &[BenchmarkRecord]) -> String {
    let trial_cols = records
        .iter()
        .map(|r| r.trial_times.len())
        .max()
        .unwrap_or(3);
    let mut out = String::from("dataset,algorithm,backend,minsup_rel,minsup_abs");
    for i in 1..=trial_cols {
        let _ = write!(out, ",trial{i}");
    }
    out.push_str(",mean_ms,num_frequent,verified\n");

    let mut sorted: Vec<&BenchmarkRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        record_sort_key(a)
            .cmp(&record_sort_key(b))
            .then(a.minsup_rel.total_cmp(&b.minsup_rel))
    });
    for r in sorted {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.dataset,
            r.algorithm.as_str(),
            r.backend.as_str(),
            r.minsup_rel,
            r.minsup_abs
        );
        for i in 0..trial_cols {
            match r.trial_times.get(i) {
                Some(&t) => {
                    let _ = write!(out, ",{}", ms3(t));
                }
                None => out.push(','),
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            ms3(r.mean_time),
            r.num_frequent,
            r.verified
        );
    }
    out
}

/// Which record field becomes the bars within each (dataset, minsup) group.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ChartDimension {
    Backend,
    Algorithm,
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// "0.001 → 0.1", "0.5 → 50": percent value trimmed to at most three
/// decimals with trailing zeros dropped.
fn percent_label(rel: f64) -> String {
    let pct = (rel * 100.0 * 1000.0).round() / 1000.0;
    format!("{pct}")
}

/// Rounds a value up to a "nice" axis ceiling: 1, 2, or 5 times a power of
/// ten.
fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if v <= mag * mult {
            return mag * mult;
        }
    }
    mag * 10.0
}

const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1",
];

/// Renders a grouped bar chart: one group per (dataset, minsup), one bar
/// per value of `group_by` (backend or algorithm), bar height proportional
/// to the mean time. Self-contained SVG 1.1, no external references.
pub fn emit_svg_chart(records: &[BenchmarkRecord], group_by: ChartDimension) -> Result<String> {
    if records.is_empty() {
        return Err(FimError::input("cannot chart an empty record set"));
    }

    // Bar groups keyed by (dataset, minsup), in deterministic order.
    let mut groups: Vec<(String, f64)> = Vec::new();
    for r in records {
        let key = (r.dataset.clone(), r.minsup_rel);
        if !groups
            .iter()
            .any(|(d, m)| *d == key.0 && m.total_cmp(&key.1).is_eq())
        {
            groups.push(key);
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Bars within a group: dimension values present anywhere, in canonical
    // order so colors stay stable.
    let dims: Vec<&'static str> = match group_by {
        ChartDimension::Backend => BackendKind::all()
            .iter()
            .map(|k| k.as_str())
            .filter(|name| records.iter().any(|r| r.backend.as_str() == *name))
            .collect(),
        ChartDimension::Algorithm => [
            Algorithm::Apriori,
            Algorithm::FpGrowth,
            Algorithm::MrApriori,
            Algorithm::Pfp,
            Algorithm::BruteForce,
        ]
        .iter()
        .map(|a| a.as_str())
        .filter(|name| records.iter().any(|r| r.algorithm.as_str() == *name))
        .collect(),
    };
    let dim_of = |r: &BenchmarkRecord| match group_by {
        ChartDimension::Backend => r.backend.as_str(),
        ChartDimension::Algorithm => r.algorithm.as_str(),
    };

    // Bar value: mean of mean_ms over the records in (group, dim).
    let bar_value = |group: &(String, f64), dim: &str| -> Option<f64> {
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| {
                r.dataset == group.0 && r.minsup_rel.total_cmp(&group.1).is_eq() && dim_of(r) == dim
            })
            .map(|r| r.mean_ms())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };

    let max_value = groups
        .iter()
        .flat_map(|g| dims.iter().filter_map(move |d| bar_value(g, d)))
        .fold(0.0f64, f64::max);
    let y_max = nice_ceiling(max_value);

    // Layout constants (pixels).
    let (bar_w, bar_gap, group_gap) = (34.0, 8.0, 28.0);
    let (margin_l, margin_r, margin_top, margin_bottom) = (64.0, 24.0, 48.0, 56.0);
    let plot_h = 260.0;
    let group_w = dims.len() as f64 * (bar_w + bar_gap) - bar_gap;
    let width = margin_l + groups.len() as f64 * (group_w + group_gap) - group_gap + margin_r;
    let legend_h = 18.0 * dims.len() as f64;
    let height = margin_top + plot_h + margin_bottom + legend_h;
    let base_y = margin_top + plot_h;

    let title = if groups.len() == 1 {
        format!("{} @ {}%", groups[0].0, percent_label(groups[0].1))
    } else {
        "mean mining time by dataset and minimum support".to_string()
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, "  <title>{}</title>", xml_escape(&title));
    let _ = writeln!(
        svg,
        r#"  <rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{:.1}" y="24" text-anchor="middle" font-size="15" font-weight="bold">{}</text>"#,
        width / 2.0,
        xml_escape(&title)
    );

    // Y axis: line, ticks, gridlines, unit label.
    let _ = writeln!(
        svg,
        r#"  <line x1="{margin_l:.1}" y1="{:.1}" x2="{margin_l:.1}" y2="{base_y:.1}" stroke="black"/>"#,
        margin_top
    );
    let ticks = 5usize;
    for t in 0..=ticks {
        let v = y_max * t as f64 / ticks as f64;
        let y = base_y - plot_h * t as f64 / ticks as f64;
        let _ = writeln!(
            svg,
            r##"  <line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#cccccc"/>"##,
            margin_l,
            width - margin_r
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            margin_l - 6.0,
            y + 4.0,
            (v * 100.0).round() / 100.0
        );
    }
    let _ = writeln!(
        svg,
        r#"  <text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">time (ms)</text>"#,
        margin_top + plot_h / 2.0,
        margin_top + plot_h / 2.0
    );
    // X axis baseline.
    let _ = writeln!(
        svg,
        r#"  <line x1="{margin_l:.1}" y1="{base_y:.1}" x2="{:.1}" y2="{base_y:.1}" stroke="black"/>"#,
        width - margin_r
    );

    // Bars and group labels.
    let mut x = margin_l;
    for group in &groups {
        for (d, dim) in dims.iter().enumerate() {
            if let Some(v) = bar_value(group, dim) {
                let h = if y_max > 0.0 { v / y_max * plot_h } else { 0.0 };
                let color = PALETTE[d % PALETTE.len()];
                let bx = x + d as f64 * (bar_w + bar_gap);
                let _ = writeln!(
                    svg,
                    r#"  <rect class="bar" x="{bx:.1}" y="{:.2}" width="{bar_w:.1}" height="{h:.2}" fill="{color}"><title>{}: {:.3} ms</title></rect>"#,
                    base_y - h,
                    xml_escape(dim),
                    v
                );
            }
        }
        let label = format!("{} @ {}%", group.0, percent_label(group.1));
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + group_w / 2.0,
            base_y + 18.0,
            xml_escape(&label)
        );
        x += group_w + group_gap;
    }

    // Legend, one swatch per dimension value.
    for (d, dim) in dims.iter().enumerate() {
        let y = margin_top + plot_h + 40.0 + d as f64 * 18.0;
        let color = PALETTE[d % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"  <rect x="{margin_l:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#,
            y - 10.0
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{y:.1}">{}</text>"#,
            margin_l + 18.0,
            xml_escape(dim)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db1() -> TransactionDatabase {
        parse_spmf("0 1 2\n0 1\n0 2\n1 2\n").unwrap()
    }

    fn canonical_db1_result() -> BTreeMap<Itemset, u64> {
        let set = |items: &[u32]| Itemset::new(items.iter().map(|&i| ItemId(i)).collect());
        [
            (set(&[0]), 3),
            (set(&[1]), 3),
            (set(&[2]), 3),
            (set(&[0, 1]), 2),
            (set(&[0, 2]), 2),
            (set(&[1, 2]), 2),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn oracle_matches_hand_computed_db1() {
        let result = brute_force_oracle(&db1(), 2).unwrap();
        assert_eq!(result.frequent, canonical_db1_result());
    }

    #[test]
    fn oracle_empty_db_and_singleton() {
        let empty = parse_spmf("").unwrap();
        assert_eq!(brute_force_oracle(&empty, 1).unwrap().num_frequent(), 0);
        let one = parse_spmf("0\n").unwrap();
        let result = brute_force_oracle(&one, 1).unwrap();
        assert_eq!(result.num_frequent(), 1);
        assert_eq!(
            result.support(&Itemset::new(vec![ItemId(0)])),
            Some(1)
        );
    }

    #[test]
    fn oracle_refuses_wide_databases() {
        let line: Vec<String> = (0..21).map(|i| i.to_string()).collect();
        let db = parse_spmf(&line.join(" ")).unwrap();
        let err = brute_force_oracle(&db, 1).unwrap_err();
        assert!(matches!(err, FimError::Input(_)));
    }

    fn tiny_config(path: &std::path::Path) -> BenchConfig {
        BenchConfig {
            datasets: vec![DatasetSpec::file("db1", path)],
            minsups: vec![0.5],
            algorithms: vec![Algorithm::Apriori, Algorithm::FpGrowth],
            backends: vec![BackendKind::Sequential, BackendKind::Pipelined],
            partitions: 2,
            workers: 2,
            trials: 3,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn grid_cardinality_and_verification() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db1.txt");
        std::fs::write(&path, "0 1 2\n0 1\n0 2\n1 2\n").unwrap();
        let report = run_benchmark(&tiny_config(&path)).unwrap();
        assert_eq!(report.records.len(), 4);
        assert!(report.dataset_errors.is_empty());
        for r in &report.records {
            assert_eq!(r.trial_times.len(), 3);
            assert!(r.verified, "DB1 is oracle-sized and verify defaults on");
            assert_eq!(r.num_frequent, 6);
            assert!(r.trial_times.iter().all(|t| *t > Duration::ZERO));
            let min = r.trial_times.iter().min().unwrap();
            let max = r.trial_times.iter().max().unwrap();
            assert!(r.mean_time >= *min && r.mean_time <= *max);
        }
    }

    #[test]
    fn missing_dataset_becomes_error_entry() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("db1.txt");
        std::fs::write(&good, "0 1 2\n0 1\n0 2\n1 2\n").unwrap();
        let mut config = tiny_config(&good);
        config
            .datasets
            .push(DatasetSpec::file("ghost", dir.path().join("missing.txt")));
        let report = run_benchmark(&config).unwrap();
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.dataset_errors.len(), 1);
        assert_eq!(report.dataset_errors[0].dataset, "ghost");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let empty = BenchConfig::default();
        assert!(matches!(
            run_benchmark(&empty),
            Err(FimError::Config(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db1.txt");
        std::fs::write(&path, "0 1\n").unwrap();
        let mut bad_minsup = tiny_config(&path);
        bad_minsup.minsups = vec![1.5];
        assert!(matches!(
            run_benchmark(&bad_minsup),
            Err(FimError::Config(_))
        ));
        let mut no_trials = tiny_config(&path);
        no_trials.trials = 0;
        assert!(matches!(
            run_benchmark(&no_trials),
            Err(FimError::Config(_))
        ));
    }

    fn sample_record(ms: &[u64]) -> BenchmarkRecord {
        let trial_times: Vec<Duration> = ms.iter().map(|&m| Duration::from_millis(m)).collect();
        let total: Duration = trial_times.iter().sum();
        BenchmarkRecord {
            dataset: "db1".into(),
            algorithm: Algorithm::Apriori,
            backend: BackendKind::Sequential,
            minsup_rel: 0.5,
            minsup_abs: 2,
            mean_time: total / trial_times.len() as u32,
            trial_times,
            num_frequent: 6,
            verified: true,
        }
    }

    #[test]
    fn csv_header_only_when_empty() {
        let csv = emit_csv(&[]);
        assert_eq!(
            csv,
            "dataset,algorithm,backend,minsup_rel,minsup_abs,trial1,trial2,trial3,mean_ms,num_frequent,verified\n"
        );
    }

    #[test]
    fn csv_single_record_round_trips() {
        let rec = sample_record(&[10, 20, 30]);
        let csv = emit_csv(&[rec]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(
            fields,
            vec![
                "db1", "apriori", "sequential", "0.5", "2", "10.000", "20.000", "30.000",
                "20.000", "6", "true"
            ]
        );
    }

    #[test]
    fn csv_rows_sorted_and_deterministic() {
        let mut a = sample_record(&[1, 1, 1]);
        a.backend = BackendKind::Pipelined;
        let b = sample_record(&[2, 2, 2]);
        let mut c = sample_record(&[3, 3, 3]);
        c.minsup_rel = 0.25;
        let csv1 = emit_csv(&[a.clone(), b.clone(), c.clone()]);
        let csv2 = emit_csv(&[c, b, a]);
        assert_eq!(csv1, csv2, "row order must not depend on input order");
        let lines: Vec<&str> = csv1.lines().collect();
        // backends sort by name ("pipelined" < "sequential"); minsups
        // ascend within a key
        assert!(lines[1].contains("pipelined,0.5"));
        assert!(lines[2].contains("sequential,0.25"));
        assert!(lines[3].contains("sequential,0.5"));
    }

    #[test]
    fn svg_requires_records() {
        assert!(emit_svg_chart(&[], ChartDimension::Backend).is_err());
    }

    #[test]
    fn svg_has_one_bar_per_backend_and_exact_title() {
        let mut records = Vec::new();
        for (i, kind) in [
            BackendKind::BatchMaterialize,
            BackendKind::InMemoryIterative,
            BackendKind::Pipelined,
        ]
        .into_iter()
        .enumerate()
        {
            let mut r = sample_record(&[10 * (i as u64 + 1); 3]);
            r.dataset = "Food Mart".into();
            r.minsup_rel = 0.001;
            r.backend = kind;
            records.push(r);
        }
        let svg = emit_svg_chart(&records, ChartDimension::Backend).unwrap();
        assert_eq!(svg.matches(r#"<rect class="bar""#).count(), 3);
        assert!(svg.contains("<title>Food Mart @ 0.1%</title>"));
        assert!(svg.contains("time (ms)"));
    }

    #[test]
    fn svg_bar_heights_follow_means() {
        let mut slow = sample_record(&[40, 40, 40]);
        slow.backend = BackendKind::BatchMaterialize;
        let fast = sample_record(&[10, 10, 10]);
        let svg = emit_svg_chart(&[slow, fast], ChartDimension::Backend).unwrap();
        let heights: Vec<f64> = svg
            .lines()
            .filter(|l| l.contains(r#"class="bar""#))
            .map(|l| {
                let at = l.find("height=\"").unwrap() + 8;
                l[at..].split('"').next().unwrap().parse().unwrap()
            })
            .collect();
        assert_eq!(heights.len(), 2);
        // canonical dimension order puts sequential before batch
        assert!(heights[1] > heights[0]);
        assert!((heights[1] / heights[0] - 4.0).abs() < 0.05);
    }

    #[test]
    fn svg_escapes_dataset_names() {
        let mut r = sample_record(&[5, 5, 5]);
        r.dataset = "a<b&c>\"d\"".into();
        let svg = emit_svg_chart(&[r], ChartDimension::Backend).unwrap();
        assert!(svg.contains("a&lt;b&amp;c&gt;&quot;d&quot;"));
        assert!(!svg.contains("a<b&c>"));
    }

    #[test]
    fn percent_labels_trim_cleanly() {
        assert_eq!(percent_label(0.001), "0.1");
        assert_eq!(percent_label(0.003), "0.3");
        assert_eq!(percent_label(0.005), "0.5");
        assert_eq!(percent_label(0.5), "50");
        assert_eq!(percent_label(1.0), "100");
    }

    #[test]
    fn nice_ceiling_picks_round_numbers() {
        assert_eq!(nice_ceiling(0.7), 1.0);
        assert_eq!(nice_ceiling(1.0), 1.0);
        assert_eq!(nice_ceiling(3.2), 5.0);
        assert_eq!(nice_ceiling(7.9), 10.0);
        assert_eq!(nice_ceiling(130.0), 200.0);
    }
}
