//! Itemsets, mining results, and the canonical ordering shared by every
//! algorithm/backend combination.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::time::Duration;

use crate::datasets::{ItemId, TransactionDatabase};
use crate::mapreduce::BackendKind;
use crate::util::FnvHashMap;

/// A sorted, duplicate-free set of item ids.
///
/// Ordering is canonical presentation order: shorter sets first, equal
/// lengths lexicographic. A `BTreeMap<Itemset, _>` therefore iterates in
/// the exact order results are printed and compared in.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Itemset {
    items: Vec<ItemId>,
}

impl Itemset {
    /// Sorts and deduplicates.
    pub fn new(mut items: Vec<ItemId>) -> Self {
        items.sort_unstable();
        items.dedup();
        Itemset { items }
    }

    /// Wraps an already strictly-ascending list without re-sorting.
    pub fn from_sorted(items: Vec<ItemId>) -> Self {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        Itemset { items }
    }

    pub fn single(item: ItemId) -> Self {
        Itemset { items: vec![item] }
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

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    /// The subset with the element at `idx` removed.
    pub fn without(&self, idx: usize) -> Itemset {
        let mut items = Vec::with_capacity(self.items.len() - 1);
        items.extend_from_slice(&self.items[..idx]);
        items.extend_from_slice(&self.items[idx + 1..]);
        Itemset { items }
    }

    /// Renders with the database's original tokens, space-separated.
    pub fn display_with(&self, db: &TransactionDatabase) -> String {
        let mut out = String::new();
        for (i, &item) in self.items.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(db.dictionary().token_of(item));
        }
        out
    }
}

impl Ord for Itemset {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.items
            .len()
            .cmp(&other.items.len())
            .then_with(|| self.items.cmp(&other.items))
    }
}

impl PartialOrd for Itemset {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Lets hash maps keyed by `Itemset` be probed with a bare id slice,
/// sparing the hot counting loops an allocation per lookup.
impl Borrow<[ItemId]> for Itemset {
    fn borrow(&self) -> &[ItemId] {
        &self.items
    }
}

/// The frequent k-itemsets of one Apriori level, with their supports.
#[derive(Clone, Debug)]
pub struct FrequentLevel {
    k: usize,
    entries: FnvHashMap<Itemset, u64>,
}

impl FrequentLevel {
    /// Panics (debug) if any entry's length differs from `k`.
    pub fn new(k: usize, entries: impl IntoIterator<Item = (Itemset, u64)>) -> Self {
        let entries: FnvHashMap<Itemset, u64> = entries.into_iter().collect();
        debug_assert!(entries.keys().all(|s| s.len() == k));
        FrequentLevel { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, items: &[ItemId]) -> bool {
        self.entries.contains_key(items)
    }

    pub fn support(&self, items: &[ItemId]) -> Option<u64> {
        self.entries.get(items).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Itemset, u64)> {
        self.entries.iter().map(|(s, &c)| (s, c))
    }
}

/// Which mining algorithm produced a result.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Algorithm {
    Apriori,
    FpGrowth,
    MrApriori,
    Pfp,
    /// Exhaustive enumeration; only ever produced by the verification oracle.
    BruteForce,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Apriori => "apriori",
            Algorithm::FpGrowth => "fpgrowth",
            Algorithm::MrApriori => "mr-apriori",
            Algorithm::Pfp => "pfp",
            Algorithm::BruteForce => "brute-force",
        }
    }

    /// Parses the CLI/config spelling of a minable algorithm (the oracle is
    /// not selectable).
    pub fn from_name(name: &str) -> Option<Algorithm> {
        match name {
            "apriori" => Some(Algorithm::Apriori),
            "fpgrowth" | "fp-growth" => Some(Algorithm::FpGrowth),
            "mr-apriori" | "mr_apriori" => Some(Algorithm::MrApriori),
            "pfp" => Some(Algorithm::Pfp),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The outcome of one mining run.
///
/// `frequent` maps every frequent itemset to its exact support, in canonical
/// order. Two results from different algorithms or backends agree exactly
/// when their `frequent` maps are `==`.
#[derive(Clone, Debug)]
pub struct MiningResult {
    pub frequent: BTreeMap<Itemset, u64>,
    pub minsup_abs: u64,
    pub algorithm: Algorithm,
    pub backend: BackendKind,
    pub elapsed: Duration,
    /// Per-level wall time for level-wise algorithms; empty for FP-Growth
    /// style miners.
    pub level_timings: Vec<Duration>,
    /// How many candidates each level evaluated (level-wise algorithms
    /// only); useful for spotting candidate blow-up without reproducing it.
    pub level_candidate_counts: Vec<usize>,
}

impl MiningResult {
    pub fn num_frequent(&self) -> usize {
        self.frequent.len()
    }

    pub fn support(&self, set: &Itemset) -> Option<u64> {
        self.frequent.get(set).copied()
    }

    /// True when both runs found the same itemsets with the same supports.
    pub fn same_frequent(&self, other: &MiningResult) -> bool {
        self.frequent == other.frequent
    }

    /// Longest frequent itemset size (0 when nothing is frequent).
    pub fn max_len(&self) -> usize {
        self.frequent.keys().map(Itemset::len).max().unwrap_or(0)
    }
}
