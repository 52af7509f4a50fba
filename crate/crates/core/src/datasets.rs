//! Transaction database ingestion, synthesis, and serialization.
//!
//! Databases hold transactions over *dense* item ids (`0..num_items`), with a
//! dictionary mapping ids back to the original tokens. Dense ids keep the
//! miners' per-item tables flat and let algorithms index arrays by item.
//!
//! Ids are assigned in first-appearance order while reading input, so parsing
//! the same text always yields the same database — a property the
//! determinism guarantees elsewhere in the crate lean on.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Poisson};

use crate::error::{FimError, Result};

/// Dense identifier of a distinct item within one database.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for ItemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Two-way mapping between input tokens and dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemDictionary {
    token_to_id: HashMap<String, ItemId>,
    id_to_token: Vec<String>,
}

impl ItemDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Returns the id for `token`, registering it if unseen.
    pub fn intern(&mut self, token: &str) -> ItemId {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = ItemId(self.id_to_token.len() as u32);
        self.id_to_token.push(token.to_owned());
        self.token_to_id.insert(token.to_owned(), id);
        id
    }

    pub fn id_of(&self, token: &str) -> Option<ItemId> {
        self.token_to_id.get(token).copied()
    }

    /// Panics if `id` was not issued by this dictionary.
    pub fn token_of(&self, id: ItemId) -> &str {
        &self.id_to_token[id.index()]
    }
}

/// One transaction: a sorted, duplicate-free list of item ids.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Transaction {
    items: Vec<ItemId>,
}

impl Transaction {
    /// Sorts and deduplicates `items`.
    pub fn new(mut items: Vec<ItemId>) -> Self {
        items.sort_unstable();
        items.dedup();
        Transaction { items }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// True when every id in `others` (sorted ascending) occurs here.
    /// Linear merge over the two sorted lists.
    pub fn contains_all(&self, others: &[ItemId]) -> bool {
        let mut mine = self.items.iter();
        'outer: for want in others {
            for have in mine.by_ref() {
                match have.cmp(want) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }
}

/// An immutable transaction database with a scan counter.
///
/// `scan()` hands out an iterator over all transactions and bumps the
/// counter; it is the access path algorithms use for full passes, so tests
/// can assert how many passes an algorithm makes (FP-Growth's two-scan
/// guarantee, for instance). `transactions()` grants direct slice access
/// without counting and is meant for bookkeeping, not mining passes.
#[derive(Debug)]
pub struct TransactionDatabase {
    name: String,
    transactions: Arc<Vec<Transaction>>,
    dictionary: ItemDictionary,
    scans: AtomicU64,
}

impl Clone for TransactionDatabase {
    fn clone(&self) -> Self {
        TransactionDatabase {
            name: self.name.clone(),
            transactions: Arc::clone(&self.transactions),
            dictionary: self.dictionary.clone(),
            scans: AtomicU64::new(self.scans.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for TransactionDatabase {
    /// Equality covers content (transactions and dictionary), not the name
    /// label or the scan counter.
    fn eq(&self, other: &Self) -> bool {
        self.transactions == other.transactions && self.dictionary == other.dictionary
    }
}

impl Eq for TransactionDatabase {}

impl TransactionDatabase {
    /// Builds a database from raw integer item lists, deduplicating within
    /// each list and assigning dense ids in first-appearance order. Tokens
    /// are the decimal renderings of the raw values.
    pub fn from_item_lists(name: impl Into<String>, lists: &[Vec<u64>]) -> Self {
        let mut dictionary = ItemDictionary::new();
        let mut raw_to_id: HashMap<u64, ItemId> = HashMap::new();
        let mut transactions = Vec::with_capacity(lists.len());
        for list in lists {
            let mut items = Vec::with_capacity(list.len());
            for &raw in list {
                let id = *raw_to_id
                    .entry(raw)
                    .or_insert_with(|| dictionary.intern(&raw.to_string()));
                items.push(id);
            }
            transactions.push(Transaction::new(items));
        }
        TransactionDatabase {
            name: name.into(),
            transactions: Arc::new(transactions),
            dictionary,
            scans: AtomicU64::new(0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Number of distinct items (dense ids run `0..num_items`).
    pub fn num_items(&self) -> usize {
        self.dictionary.len()
    }

    pub fn dictionary(&self) -> &ItemDictionary {
        &self.dictionary
    }

    /// Direct access that does *not* count as a database scan.
    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub(crate) fn shared_transactions(&self) -> Arc<Vec<Transaction>> {
        Arc::clone(&self.transactions)
    }

    /// One full pass over the database; increments the scan counter.
    pub fn scan(&self) -> impl Iterator<Item = &Transaction> + '_ {
        self.scans.fetch_add(1, Ordering::Relaxed);
        self.transactions.iter()
    }

    /// Records a logical full pass made through `transactions()`.
    pub(crate) fn note_scan(&self) {
        self.scans.fetch_add(1, Ordering::Relaxed);
    }

    /// How many full scans have been taken so far.
    pub fn scans(&self) -> u64 {
        self.scans.load(Ordering::Relaxed)
    }
}

/// Parses transaction text: one transaction per line, whitespace-separated
/// non-negative integer tokens. Blank (or all-whitespace) lines are skipped;
/// duplicate items within a line are dropped. The database name is left
/// empty — attach one with [`TransactionDatabase::with_name`].
pub fn parse_spmf(text: &str) -> Result<TransactionDatabase> {
    let mut lists: Vec<Vec<u64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut items = Vec::new();
        for token in line.split_whitespace() {
            let value = match token.parse::<i64>() {
                Ok(v) if v < 0 => {
                    return Err(FimError::parse(
                        lineno,
                        format!("negative item value `{token}`"),
                    ))
                }
                Ok(v) => v as u64,
                Err(_) => {
                    return Err(FimError::parse(
                        lineno,
                        format!("token `{token}` is not a non-negative integer"),
                    ))
                }
            };
            items.push(value);
        }
        if !items.is_empty() {
            lists.push(items);
        }
    }
    Ok(TransactionDatabase::from_item_lists("", &lists))
}

/// Renders a database back to transaction text: original tokens separated by
/// single spaces, one transaction per line, each line newline-terminated.
/// `parse_spmf(&write_spmf(&db))` reproduces `db` exactly (content-wise).
pub fn write_spmf(db: &TransactionDatabase) -> String {
    let mut out = String::new();
    for txn in db.transactions() {
        let mut first = true;
        for &item in txn.items() {
            if !first {
                out.push(' ');
            }
            out.push_str(db.dictionary().token_of(item));
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parameters for the Quest-style synthetic market-basket generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub num_transactions: usize,
    /// Size of the item universe transactions draw from.
    pub num_items: usize,
    /// Mean transaction length (Poisson), clamped to `1..=num_items`.
    pub avg_transaction_len: usize,
    /// Mean length of the latent frequent patterns (Poisson).
    pub avg_pattern_len: usize,
    /// Number of latent patterns transactions are assembled from.
    pub num_patterns: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    /// Defaults in the spirit of the classic `T10.I4` retail workloads:
    /// average transaction length 10, average pattern length 4, an 870-item
    /// universe.
    fn default() -> Self {
        SyntheticParams {
            num_transactions: 100_000,
            num_items: 870,
            avg_transaction_len: 10,
            avg_pattern_len: 4,
            num_patterns: 100,
            seed: 1,
        }
    }
}

impl SyntheticParams {
    fn validate(&self) -> Result<()> {
        if self.num_transactions == 0 {
            return Ok(()); // empty output is legal regardless of the rest
        }
        if self.num_items == 0 {
            return Err(FimError::config(
                "synthetic generator needs num_items >= 1",
            ));
        }
        if self.avg_transaction_len == 0 || self.avg_pattern_len == 0 {
            return Err(FimError::config(
                "synthetic generator needs positive average lengths",
            ));
        }
        if self.avg_pattern_len > self.avg_transaction_len {
            return Err(FimError::config(format!(
                "avg_pattern_len ({}) must not exceed avg_transaction_len ({})",
                self.avg_pattern_len, self.avg_transaction_len
            )));
        }
        if self.avg_transaction_len > self.num_items {
            return Err(FimError::config(format!(
                "avg_transaction_len ({}) must not exceed num_items ({})",
                self.avg_transaction_len, self.num_items
            )));
        }
        Ok(())
    }
}

/// Probability that a transaction slot is filled with uniform noise instead
/// of the next pattern.
const NOISE_ITEM_PROB: f64 = 0.1;
/// Per-item retention probability when copying a pattern into a transaction
/// (mild corruption keeps pattern supports realistic rather than exact).
const PATTERN_KEEP_PROB: f64 = 0.9;

/// Generates a synthetic database: a pool of latent patterns with
/// exponentially distributed weights, transactions assembled by sampling
/// weighted patterns (with per-item corruption) plus uniform noise.
/// Deterministic for a given parameter set — the RNG is a fixed-algorithm
/// seeded stream, so identical params yield byte-identical databases.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<TransactionDatabase> {
    params.validate()?;
    let name = "synthetic";
    if params.num_transactions == 0 {
        return Ok(TransactionDatabase::from_item_lists(name, &[]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let universe = params.num_items as u64;

    // Latent patterns: distinct-item sets with Poisson lengths.
    let pattern_len_dist = Poisson::new(params.avg_pattern_len as f64)
        .map_err(|e| FimError::config(format!("pattern length distribution: {e}")))?;
    let mut patterns: Vec<Vec<u64>> = Vec::with_capacity(params.num_patterns);
    for _ in 0..params.num_patterns {
        let len = (pattern_len_dist.sample(&mut rng) as usize).clamp(1, params.num_items);
        let picks = rand::seq::index::sample(&mut rng, params.num_items, len);
        patterns.push(picks.iter().map(|i| i as u64).collect());
    }
    // Exponential weights skew usage towards a few dominant patterns.
    let weights: Vec<f64> = (0..patterns.len())
        .map(|_| {
            let w: f64 = rng.sample(Exp1);
            w + 1e-9
        })
        .collect();
    let pattern_picker = if patterns.is_empty() {
        None
    } else {
        Some(
            WeightedIndex::new(&weights)
                .map_err(|e| FimError::config(format!("pattern weights: {e}")))?,
        )
    };

    let txn_len_dist = Poisson::new(params.avg_transaction_len as f64)
        .map_err(|e| FimError::config(format!("transaction length distribution: {e}")))?;

    let mut lists: Vec<Vec<u64>> = Vec::with_capacity(params.num_transactions);
    let mut member = vec![false; params.num_items];
    for _ in 0..params.num_transactions {
        let target = (txn_len_dist.sample(&mut rng) as usize).clamp(1, params.num_items);
        let mut items: Vec<u64> = Vec::with_capacity(target);
        let mut attempts = 0usize;
        let attempt_cap = 20 * target + 100;
        while items.len() < target && attempts < attempt_cap {
            attempts += 1;
            let use_noise =
                pattern_picker.is_none() || rng.gen_bool(NOISE_ITEM_PROB);
            if use_noise {
                let raw = rng.gen_range(0..universe);
                if !member[raw as usize] {
                    member[raw as usize] = true;
                    items.push(raw);
                }
            } else {
                let pat = &patterns[pattern_picker.as_ref().unwrap().sample(&mut rng)];
                for &raw in pat {
                    if items.len() >= target {
                        break;
                    }
                    if !member[raw as usize] && rng.gen_bool(PATTERN_KEEP_PROB) {
                        member[raw as usize] = true;
                        items.push(raw);
                    }
                }
            }
        }
        // Degenerate corner (tiny universe, unlucky draws): top up
        // deterministically so the transaction reaches its target length.
        if items.len() < target {
            for raw in 0..universe {
                if items.len() >= target {
                    break;
                }
                if !member[raw as usize] {
                    member[raw as usize] = true;
                    items.push(raw);
                }
            }
        }
        for &raw in &items {
            member[raw as usize] = false;
        }
        lists.push(items);
    }

    Ok(TransactionDatabase::from_item_lists(name, &lists))
}

/// Converts a relative minimum support into an absolute transaction count:
/// `ceil(ratio * db_size)`, never below 1.
///
/// The multiplication runs in floating point, where products like
/// `0.003 * 100000` land a hair above their true value; a tiny relative
/// backoff before the ceiling keeps exact multiples from rounding up one
/// transaction too far.
pub fn absolute_minsup(ratio: f64, db_size: usize) -> Result<u64> {
    if !ratio.is_finite() || ratio <= 0.0 || ratio > 1.0 {
        return Err(FimError::config(format!(
            "relative minimum support must be in (0, 1], got {ratio}"
        )));
    }
    let target = ratio * db_size as f64;
    let adjusted = target - target * 1e-12;
    Ok((adjusted.ceil() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_assigns_dense_ids_in_first_appearance_order() {
        let db = parse_spmf("1 2 3\n1 2\n").unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.num_items(), 3);
        let t0: Vec<u32> = db.transactions()[0].items().iter().map(|i| i.0).collect();
        let t1: Vec<u32> = db.transactions()[1].items().iter().map(|i| i.0).collect();
        assert_eq!(t0, vec![0, 1, 2]);
        assert_eq!(t1, vec![0, 1]);
        assert_eq!(db.dictionary().token_of(ItemId(0)), "1");
        assert_eq!(db.dictionary().token_of(ItemId(2)), "3");
    }

    #[test]
    fn parse_empty_input_yields_empty_database() {
        let db = parse_spmf("").unwrap();
        assert_eq!(db.len(), 0);
        assert_eq!(db.num_items(), 0);
    }

    #[test]
    fn parse_skips_blank_lines_and_dedupes_within_line() {
        let db = parse_spmf("5 5 7\n\n   \n7\n").unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(db.num_items(), 2);
        assert_eq!(db.transactions()[0].len(), 2);
        assert_eq!(db.transactions()[1].items(), &[ItemId(1)]);
    }

    #[test]
    fn parse_rejects_non_integer_with_line_number() {
        let err = parse_spmf("1 2\nx 3\n").unwrap_err();
        match err {
            FimError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains('x'), "message should cite the token: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_negative_values() {
        let err = parse_spmf("1 -3\n").unwrap_err();
        match err {
            FimError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_then_parse_round_trips() {
        let text = "10 20 30\n20 10\n40\n";
        let db = parse_spmf(text).unwrap();
        let written = write_spmf(&db);
        assert_eq!(written, "10 20 30\n10 20\n40\n");
        let reparsed = parse_spmf(&written).unwrap();
        assert_eq!(reparsed, db);
    }

    #[test]
    fn write_empty_database_is_empty_string() {
        let db = parse_spmf("").unwrap();
        assert_eq!(write_spmf(&db), "");
    }

    #[test]
    fn scan_counts_passes_but_direct_access_does_not() {
        let db = parse_spmf("1 2\n3\n").unwrap();
        assert_eq!(db.scans(), 0);
        let n: usize = db.scan().count();
        assert_eq!(n, 2);
        assert_eq!(db.scans(), 1);
        let _ = db.transactions();
        assert_eq!(db.scans(), 1);
        db.scan().for_each(drop);
        assert_eq!(db.scans(), 2);
    }

    #[test]
    fn contains_all_checks_sorted_subsets() {
        let t = Transaction::new(vec![ItemId(4), ItemId(1), ItemId(9)]);
        assert!(t.contains_all(&[ItemId(1), ItemId(9)]));
        assert!(t.contains_all(&[]));
        assert!(!t.contains_all(&[ItemId(2)]));
        assert!(!t.contains_all(&[ItemId(1), ItemId(10)]));
    }

    #[test]
    fn minsup_examples() {
        assert_eq!(absolute_minsup(0.001, 4141).unwrap(), 5);
        assert_eq!(absolute_minsup(1.0, 10).unwrap(), 10);
        assert_eq!(absolute_minsup(0.003, 100_000).unwrap(), 300);
        assert_eq!(absolute_minsup(0.5, 3).unwrap(), 2);
        // floor of 1 even when the product is tiny
        assert_eq!(absolute_minsup(0.0001, 5).unwrap(), 1);
    }

    #[test]
    fn minsup_rejects_out_of_range_ratios() {
        assert!(absolute_minsup(0.0, 100).is_err());
        assert!(absolute_minsup(-0.1, 100).is_err());
        assert!(absolute_minsup(1.5, 100).is_err());
        assert!(absolute_minsup(f64::NAN, 100).is_err());
    }

    #[test]
    fn generator_is_deterministic_and_respects_size() {
        let params = SyntheticParams {
            num_transactions: 500,
            num_items: 60,
            avg_transaction_len: 8,
            avg_pattern_len: 3,
            num_patterns: 12,
            seed: 42,
        };
        let a = generate_synthetic(&params).unwrap();
        let b = generate_synthetic(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert!(a.num_items() <= 60);
        assert!(write_spmf(&a) == write_spmf(&b));

        let other = generate_synthetic(&SyntheticParams {
            seed: 43,
            ..params
        })
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn generator_mean_length_lands_near_target() {
        let params = SyntheticParams {
            num_transactions: 2_000,
            num_items: 200,
            avg_transaction_len: 10,
            avg_pattern_len: 4,
            num_patterns: 30,
            seed: 7,
        };
        let db = generate_synthetic(&params).unwrap();
        let total: usize = db.transactions().iter().map(|t| t.len()).sum();
        let mean = total as f64 / db.len() as f64;
        assert!(
            (mean - 10.0).abs() < 2.0,
            "mean transaction length {mean} strayed from target 10"
        );
    }

    #[test]
    fn generator_rejects_inconsistent_params() {
        let bad = SyntheticParams {
            num_transactions: 10,
            num_items: 5,
            avg_transaction_len: 8,
            avg_pattern_len: 3,
            num_patterns: 2,
            seed: 0,
        };
        assert!(generate_synthetic(&bad).is_err());
        let zero = SyntheticParams {
            num_transactions: 0,
            num_items: 0,
            avg_transaction_len: 0,
            avg_pattern_len: 0,
            num_patterns: 0,
            seed: 0,
        };
        let db = generate_synthetic(&zero).unwrap();
        assert!(db.is_empty());
    }
}
