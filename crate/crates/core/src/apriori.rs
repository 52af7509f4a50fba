//! Level-wise Apriori mining: prefix-join candidate generation,
//! downward-closure pruning, and exact support counting.

use std::collections::HashMap;
use std::time::Instant;

use crate::datasets::{ItemId, Transaction, TransactionDatabase};
use crate::error::{FimError, Result};
use crate::itemset::{Algorithm, FrequentLevel, Itemset, MiningResult};
use crate::mapreduce::BackendKind;
use crate::util::FnvHashMap;

/// Exact supports for a uniform-length candidate list.
///
/// Counting picks between two strategies per call, whichever the cost
/// estimate favors:
/// * *subset enumeration* — walk each transaction's k-subsets and probe a
///   candidate hash (cheap when transactions are short relative to k);
/// * *candidate iteration* — test each candidate against each transaction
///   with a sorted-merge containment check (cheap when candidates are few).
pub(crate) struct CandidateCounter {
    k: usize,
    candidates: Vec<Itemset>,
    index: FnvHashMap<Itemset, u32>,
    max_item: Option<ItemId>,
}

impl CandidateCounter {
    /// `candidates` must share one length k ≥ 1.
    pub(crate) fn new(candidates: Vec<Itemset>) -> Result<Self> {
        let k = candidates.first().map_or(0, Itemset::len);
        if !candidates.is_empty() && k == 0 {
            return Err(FimError::input("cannot count empty candidate itemsets"));
        }
        if candidates.iter().any(|c| c.len() != k) {
            return Err(FimError::input(
                "candidate itemsets must all have the same length",
            ));
        }
        let mut index = FnvHashMap::default();
        for (i, c) in candidates.iter().enumerate() {
            index.insert(c.clone(), i as u32);
        }
        let max_item = candidates
            .iter()
            .filter_map(|c| c.items().last())
            .max()
            .copied();
        Ok(CandidateCounter {
            k,
            candidates,
            index,
            max_item,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.candidates.len()
    }

    pub(crate) fn candidates(&self) -> &[Itemset] {
        &self.candidates
    }

    pub(crate) fn check_ids(&self, num_items: usize) -> Result<()> {
        if let Some(max) = self.max_item {
            if max.index() >= num_items {
                return Err(FimError::input(format!(
                    "candidate references item id {max} but the database has only {num_items} items"
                )));
            }
        }
        Ok(())
    }

    /// Supports aligned with the candidate list.
    pub(crate) fn count(&self, txns: &[Transaction]) -> Vec<u64> {
        if self.candidates.is_empty() || txns.is_empty() {
            return vec![0; self.candidates.len()];
        }
        let enum_units: u128 = txns
            .iter()
            .map(|t| binomial(t.len(), self.k).saturating_mul(self.k as u128))
            .fold(0u128, u128::saturating_add);
        let scan_units: u128 = (self.candidates.len() as u128)
            .saturating_mul(txns.iter().map(|t| t.len() as u128 + self.k as u128).sum());
        if enum_units <= scan_units {
            self.count_by_enumeration(txns)
        } else {
            self.count_by_candidate_scan(txns)
        }
    }

    pub(crate) fn count_by_enumeration(&self, txns: &[Transaction]) -> Vec<u64> {
        let k = self.k;
        let mut counts = vec![0u64; self.candidates.len()];
        let mut scratch: Vec<ItemId> = vec![ItemId(0); k];
        let mut idx: Vec<usize> = vec![0; k];
        for txn in txns {
            let items = txn.items();
            let n = items.len();
            if n < k {
                continue;
            }
            for (p, slot) in idx.iter_mut().enumerate() {
                *slot = p;
            }
            'combos: loop {
                for (s, &i) in scratch.iter_mut().zip(idx.iter()) {
                    *s = items[i];
                }
                if let Some(&c) = self.index.get(scratch.as_slice()) {
                    counts[c as usize] += 1;
                }
                // advance the combination odometer
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break 'combos;
                    }
                    pos -= 1;
                    if idx[pos] != pos + n - k {
                        idx[pos] += 1;
                        for j in pos + 1..k {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
        counts
    }

    pub(crate) fn count_by_candidate_scan(&self, txns: &[Transaction]) -> Vec<u64> {
        let mut counts = vec![0u64; self.candidates.len()];
        for (i, cand) in self.candidates.iter().enumerate() {
            let want = cand.items();
            counts[i] = txns.iter().filter(|t| t.contains_all(want)).count() as u64;
        }
        counts
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Dense single-item occurrence counts (index = item id).
pub(crate) fn count_singletons(txns: &[Transaction], num_items: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_items];
    for txn in txns {
        for item in txn.items() {
            counts[item.index()] += 1;
        }
    }
    counts
}

/// Exact support of each candidate: the number of transactions containing
/// it. Zero-support candidates appear in the map with count 0. All
/// candidates must share one length k ≥ 1.
pub fn count_supports(
    db: &TransactionDatabase,
    candidates: &[Itemset],
) -> Result<HashMap<Itemset, u64>> {
    let counter = CandidateCounter::new(candidates.to_vec())?;
    if !db.is_empty() {
        counter.check_ids(db.num_items())?;
    }
    let counts = counter.count(db.transactions());
    db.note_scan();
    Ok(counter
        .candidates()
        .iter()
        .cloned()
        .zip(counts)
        .collect())
}

/// Joins frequent k-itemsets sharing their first k−1 items into (k+1)-item
/// candidates, then prunes by downward closure. Output is duplicate-free
/// and sorted lexicographically.
pub fn generate_candidates(level: &FrequentLevel) -> Vec<Itemset> {
    let joined = join_level(level);
    prune_by_apriori(joined, level)
}

fn join_level(level: &FrequentLevel) -> Vec<Itemset> {
    let mut keys: Vec<&Itemset> = level.iter().map(|(s, _)| s).collect();
    keys.sort_unstable_by(|a, b| a.items().cmp(b.items()));
    let k = level.k();
    let mut out = Vec::new();
    for i in 0..keys.len() {
        let a = keys[i].items();
        for b in keys[i + 1..].iter().map(|s| s.items()) {
            if a[..k - 1] != b[..k - 1] {
                break; // lexicographic sort keeps shared prefixes contiguous
            }
            let mut items = Vec::with_capacity(k + 1);
            items.extend_from_slice(a);
            items.push(b[k - 1]);
            out.push(Itemset::from_sorted(items));
        }
    }
    out
}

/// Retains exactly the candidates all of whose k-subsets are frequent.
pub fn prune_by_apriori(candidates: Vec<Itemset>, level: &FrequentLevel) -> Vec<Itemset> {
    debug_assert!(candidates.iter().all(|c| c.len() == level.k() + 1));
    candidates
        .into_iter()
        .filter(|cand| (0..cand.len()).all(|i| level.contains(cand.without(i).items())))
        .collect()
}

/// Mines all frequent itemsets level by level: L1 from a dense item-count
/// pass, then candidate generation → counting → filtering until a level
/// comes up empty. `level_timings` records one wall-time entry per level
/// counted; `level_candidate_counts` records how many candidates each level
/// evaluated.
pub fn apriori_mine(db: &TransactionDatabase, minsup_abs: u64) -> MiningResult {
    let minsup = minsup_abs.max(1);
    let started = Instant::now();
    let mut frequent = std::collections::BTreeMap::new();
    let mut level_timings = Vec::new();
    let mut level_candidate_counts = Vec::new();

    // Level 1: single array-indexed pass.
    let level_started = Instant::now();
    let mut counts = vec![0u64; db.num_items()];
    for txn in db.scan() {
        for item in txn.items() {
            counts[item.index()] += 1;
        }
    }
    let entries: Vec<(Itemset, u64)> = counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c >= minsup)
        .map(|(i, &c)| (Itemset::single(ItemId(i as u32)), c))
        .collect();
    level_timings.push(level_started.elapsed());
    level_candidate_counts.push(db.num_items());
    frequent.extend(entries.iter().cloned());
    let mut level = FrequentLevel::new(1, entries);

    while !level.is_empty() {
        let candidates = generate_candidates(&level);
        if candidates.is_empty() {
            break;
        }
        let level_started = Instant::now();
        let k = level.k() + 1;
        let counter = CandidateCounter::new(candidates)
            .expect("generated candidates are uniform by construction");
        level_candidate_counts.push(counter.len());
        let counts = counter.count(db.transactions());
        db.note_scan();
        let entries: Vec<(Itemset, u64)> = counter
            .candidates()
            .iter()
            .zip(&counts)
            .filter(|&(_, &c)| c >= minsup)
            .map(|(s, &c)| (s.clone(), c))
            .collect();
        level_timings.push(level_started.elapsed());
        frequent.extend(entries.iter().cloned());
        level = FrequentLevel::new(k, entries);
    }

    MiningResult {
        frequent,
        minsup_abs: minsup,
        algorithm: Algorithm::Apriori,
        backend: BackendKind::Sequential,
        elapsed: started.elapsed(),
        level_timings,
        level_candidate_counts,
    }
}
