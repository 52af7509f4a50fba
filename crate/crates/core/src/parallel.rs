//! Parallel mining algorithms expressed as map/reduce stages.
//!
//! [`mr_apriori`] runs one counting stage per level: every map task counts
//! the broadcast candidate set against its partition, the reduce sums the
//! partial counts, and the driver filters and generates the next level's
//! candidates. [`pfp_mine`] is parallel FP-Growth: a counting stage builds
//! the frequency list, a sharding stage routes group-dependent transaction
//! prefixes to per-group reducers, and each reducer grows a local tree and
//! mines only the items its group owns, so the per-group pattern sets are
//! disjoint and their union is the full result.
//!
//! Both run on any [`Backend`] and return the same itemset→support map as
//! their sequential counterparts.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use crate::apriori::{self, generate_candidates, CandidateCounter};
use crate::datasets::{ItemId, Transaction, TransactionDatabase};
use crate::error::Result;
use crate::fpgrowth::{mine_tree_anchored, FList, FPTree};
use crate::itemset::{Algorithm, FrequentLevel, Itemset, MiningResult};
use crate::mapreduce::{
    partition, Backend, KeyValuePair, LoopStep, Partition, Reducer, StageSpec, Value,
};

/// Assigns every frequency-list item to one of `num_groups` groups,
/// round-robin in rank order so the most expensive (most frequent) items
/// spread across groups.
#[derive(Clone, Debug)]
pub struct ItemGrouping {
    num_groups: usize,
    /// Group index per rank position, aligned with the frequency list.
    by_rank: Vec<usize>,
}

impl ItemGrouping {
    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    /// The group owning the item at `rank`.
    pub fn group_of_rank(&self, rank: usize) -> usize {
        self.by_rank[rank]
    }

    /// The group owning `item`, `None` when the item is not frequent.
    pub fn group_of(&self, flist: &FList, item: ItemId) -> Option<usize> {
        flist.rank(item).map(|r| self.by_rank[r])
    }

    /// Ranks owned by `group`, ascending.
    pub fn ranks_of_group(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_rank
            .iter()
            .enumerate()
            .filter(move |&(_, &g)| g == group)
            .map(|(rank, _)| rank)
    }
}

/// Groups frequency-list items round-robin by rank: the item of rank `r`
/// goes to group `r mod g`. With `g` larger than the list some groups stay
/// empty.
pub fn pfp_group_items(flist: &FList, g: usize) -> ItemGrouping {
    let g = g.max(1);
    ItemGrouping {
        num_groups: g,
        by_rank: (0..flist.len()).map(|r| r % g).collect(),
    }
}

/// One group's slice of the sharded database: rank-ordered item sequences
/// with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupShard {
    pub group: usize,
    /// Rank-ordered item sequences; the last item of each belongs to
    /// `group`.
    pub transactions: Vec<(Vec<ItemId>, u64)>,
}

/// Rank sequence of a transaction: keep frequent items, order by rank
/// ascending (most frequent first).
fn rank_sequence(txn: &Transaction, flist: &FList) -> Vec<u32> {
    let mut ranks: Vec<u32> = txn
        .items()
        .iter()
        .filter_map(|&item| flist.rank(item).map(|r| r as u32))
        .collect();
    ranks.sort_unstable();
    ranks
}

/// Shards one transaction: scan its rank-ordered frequent items right to
/// left and, for each group at its first encounter, emit the prefix ending
/// there. Each group gets at most one shard, and a group's shard contains
/// every item of that group the transaction holds.
pub fn pfp_shard_transaction(
    txn: &Transaction,
    flist: &FList,
    grouping: &ItemGrouping,
) -> Vec<GroupShard> {
    let ranks = rank_sequence(txn, flist);
    let mut out: Vec<GroupShard> = Vec::new();
    let mut seen = vec![false; grouping.num_groups()];
    for j in (0..ranks.len()).rev() {
        let group = grouping.group_of_rank(ranks[j] as usize);
        if seen[group] {
            continue;
        }
        seen[group] = true;
        let prefix = ranks[..=j]
            .iter()
            .map(|&r| flist.item_at(r as usize))
            .collect();
        out.push(GroupShard {
            group,
            transactions: vec![(prefix, 1)],
        });
    }
    out
}

fn itemset_key(items: &[ItemId]) -> Vec<u8> {
    let mut key = Vec::with_capacity(items.len() * 4);
    for item in items {
        key.extend_from_slice(&item.0.to_le_bytes());
    }
    key
}

fn decode_itemset_key(key: &[u8]) -> Itemset {
    assert!(key.len().is_multiple_of(4), "malformed itemset key");
    Itemset::from_sorted(
        key.chunks_exact(4)
            .map(|c| ItemId(u32::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    )
}

/// Stage mapping each partition to dense per-item counts (only items that
/// actually occur are emitted).
fn item_count_stage(num_items: usize) -> StageSpec {
    StageSpec::new(
        "item-count",
        move |part: &Partition| {
            let counts = apriori::count_singletons(part.transactions(), num_items);
            counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(item, &c)| {
                    KeyValuePair::count(itemset_key(&[ItemId(item as u32)]), c as i64)
                })
                .collect()
        },
        Reducer::sum_counts(),
    )
}

/// Stage counting a broadcast candidate set within each partition. Only
/// nonzero partial counts are emitted; a candidate missing from the output
/// had zero global support.
fn candidate_count_stage(k: usize, counter: Arc<CandidateCounter>) -> StageSpec {
    StageSpec::new(
        format!("count-level-{k}"),
        move |part: &Partition| {
            let counts = counter.count(part.transactions());
            counter
                .candidates()
                .iter()
                .zip(counts)
                .filter(|&(_, c)| c > 0)
                .map(|(cand, c)| KeyValuePair::count(itemset_key(cand.items()), c as i64))
                .collect()
        },
        Reducer::sum_counts(),
    )
}

fn decode_count_pairs(pairs: &[KeyValuePair]) -> impl Iterator<Item = (Itemset, u64)> + '_ {
    pairs
        .iter()
        .map(|p| (decode_itemset_key(&p.key), p.value.count() as u64))
}

/// Level-wise parallel Apriori. Each level runs one map/reduce stage: map
/// tasks count the broadcast candidates against their partition, the reduce
/// sums partial counts, and the driver filters by support and generates the
/// next level's candidates from the surviving sets.
pub fn mr_apriori(
    db: &TransactionDatabase,
    minsup_abs: u64,
    backend: &Backend,
    partitions: usize,
) -> Result<MiningResult> {
    let minsup = minsup_abs.max(1);
    let started = Instant::now();
    let parts = partition(db, partitions)?;
    let num_items = db.num_items();

    let mut frequent: BTreeMap<Itemset, u64> = BTreeMap::new();
    let mut level_candidate_counts: Vec<usize> = Vec::new();
    // Pending candidate counter for the stage the driver is about to run;
    // `None` once the loop should stop.
    let mut next_stage: Option<StageSpec> = Some(item_count_stage(num_items));
    level_candidate_counts.push(num_items);

    let (_, reports) = crate::mapreduce::iterate(backend, parts, |k, prior| {
        if let Some(pairs) = prior {
            // Output of the stage that counted level-k candidates.
            let level: Vec<(Itemset, u64)> = decode_count_pairs(pairs)
                .filter(|&(_, c)| c >= minsup)
                .collect();
            if level.is_empty() {
                next_stage = None;
            } else {
                frequent.extend(level.iter().cloned());
                let level = FrequentLevel::new(k, level);
                let candidates = generate_candidates(&level);
                if candidates.is_empty() {
                    next_stage = None;
                } else {
                    level_candidate_counts.push(candidates.len());
                    let counter = Arc::new(CandidateCounter::new(candidates)?);
                    counter.check_ids(num_items)?;
                    next_stage = Some(candidate_count_stage(k + 1, counter));
                }
            }
        }
        match next_stage.take() {
            Some(stage) => {
                db.note_scan();
                Ok(LoopStep::Run(stage))
            }
            None => Ok(LoopStep::Done),
        }
    })?;

    // A trailing entry for a level that never ran cannot exist: the counter
    // is pushed only together with its stage.
    debug_assert_eq!(level_candidate_counts.len(), reports.len().max(1));
    level_candidate_counts.truncate(reports.len());

    Ok(MiningResult {
        frequent,
        minsup_abs: minsup,
        algorithm: Algorithm::MrApriori,
        backend: backend.kind,
        elapsed: started.elapsed(),
        level_timings: reports.iter().map(|r| r.total()).collect(),
        level_candidate_counts,
    })
}

/// Frame a rank sequence for the shard stage's byte payload.
fn encode_rank_frame(buf: &mut Vec<u8>, ranks: &[u32]) {
    buf.extend_from_slice(&(ranks.len() as u32).to_le_bytes());
    for &r in ranks {
        buf.extend_from_slice(&r.to_le_bytes());
    }
}

fn decode_rank_frames(bytes: &[u8]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut at = 0usize;
    while at < bytes.len() {
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        at += 4;
        let ranks = bytes[at..at + 4 * len]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        at += 4 * len;
        out.push(ranks);
    }
    out
}

/// Encoded pattern set: count-prefixed list of (items, support).
fn encode_patterns(patterns: &BTreeMap<Itemset, u64>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&(patterns.len() as u32).to_le_bytes());
    for (set, &support) in patterns {
        buf.extend_from_slice(&(set.len() as u32).to_le_bytes());
        for item in set.items() {
            buf.extend_from_slice(&item.0.to_le_bytes());
        }
        buf.extend_from_slice(&support.to_le_bytes());
    }
    buf
}

fn decode_patterns(bytes: &[u8], out: &mut BTreeMap<Itemset, u64>) {
    let mut at = 0usize;
    let count = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    at += 4;
    for _ in 0..count {
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        at += 4;
        let items: Vec<ItemId> = bytes[at..at + 4 * len]
            .chunks_exact(4)
            .map(|c| ItemId(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        at += 4 * len;
        let support = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        at += 8;
        let prev = out.insert(Itemset::from_sorted(items), support);
        debug_assert!(prev.is_none(), "groups must report disjoint pattern sets");
    }
}

/// The sharding+mining stage. Map emits, per group, the concatenated rank
/// frames of this partition's shards; the reduce concatenates partitions'
/// frames (a multiset union — frame order never affects the mined output)
/// and finishes by building the group's local tree and mining the ranks the
/// group owns.
fn group_mine_stage(
    flist: Arc<FList>,
    grouping: Arc<ItemGrouping>,
    minsup: u64,
) -> StageSpec {
    let map_flist = Arc::clone(&flist);
    let map_grouping = Arc::clone(&grouping);
    StageSpec::new(
        "group-shards",
        move |part: &Partition| {
            let num_groups = map_grouping.num_groups();
            let mut per_group: Vec<Vec<u8>> = vec![Vec::new(); num_groups];
            let mut seen: Vec<bool> = vec![false; num_groups];
            for txn in part.transactions() {
                let ranks = rank_sequence(txn, &map_flist);
                seen.iter_mut().for_each(|s| *s = false);
                for j in (0..ranks.len()).rev() {
                    let group = map_grouping.group_of_rank(ranks[j] as usize);
                    if seen[group] {
                        continue;
                    }
                    seen[group] = true;
                    encode_rank_frame(&mut per_group[group], &ranks[..=j]);
                }
            }
            per_group
                .into_iter()
                .enumerate()
                .filter(|(_, frames)| !frames.is_empty())
                .map(|(group, frames)| {
                    KeyValuePair::bytes((group as u32).to_le_bytes().to_vec(), frames)
                })
                .collect()
        },
        Reducer::associative_with_finish(
            |a, b| {
                let mut merged = match a {
                    Value::Bytes(bytes) => bytes,
                    Value::Count(_) => unreachable!("shard values are byte frames"),
                };
                merged.extend_from_slice(b.bytes());
                Value::Bytes(merged)
            },
            move |key, combined| {
                let group = u32::from_le_bytes(key.try_into().unwrap()) as usize;
                let mut tree = FPTree::with_items(flist.items_by_rank());
                for ranks in decode_rank_frames(combined.bytes()) {
                    tree.insert_path(&ranks, 1);
                }
                let mut patterns = BTreeMap::new();
                mine_tree_anchored(&tree, minsup, grouping.ranks_of_group(group), &mut patterns);
                Value::Bytes(encode_patterns(&patterns))
            },
        ),
    )
}

/// Parallel FP-Growth. Stage one counts items to build the frequency list;
/// stage two shards each transaction into group-dependent prefixes and lets
/// each group's reducer grow a local tree and mine its owned items; the
/// driver unions the disjoint per-group pattern sets.
pub fn pfp_mine(
    db: &TransactionDatabase,
    minsup_abs: u64,
    backend: &Backend,
    partitions: usize,
    g: usize,
) -> Result<MiningResult> {
    let minsup = minsup_abs.max(1);
    let g = g.max(1);
    let started = Instant::now();
    let parts = partition(db, partitions)?;
    let mut session = backend.session(parts)?;
    let mut level_timings = Vec::new();

    db.note_scan();
    let (count_pairs, report) = session.run_stage(&item_count_stage(db.num_items()))?;
    level_timings.push(report.total());
    let mut counts = vec![0u64; db.num_items()];
    for (set, c) in decode_count_pairs(&count_pairs) {
        counts[set.items()[0].index()] = c;
    }
    let flist = Arc::new(FList::from_counts(&counts, minsup));

    let mut frequent: BTreeMap<Itemset, u64> = BTreeMap::new();
    if !flist.is_empty() {
        let grouping = Arc::new(pfp_group_items(&flist, g));
        db.note_scan();
        let (pattern_pairs, report) =
            session.run_stage(&group_mine_stage(Arc::clone(&flist), grouping, minsup))?;
        level_timings.push(report.total());
        for pair in &pattern_pairs {
            decode_patterns(pair.value.bytes(), &mut frequent);
        }
    }

    Ok(MiningResult {
        frequent,
        minsup_abs: minsup,
        algorithm: Algorithm::Pfp,
        backend: backend.kind,
        elapsed: started.elapsed(),
        level_timings,
        level_candidate_counts: Vec::new(),
    })
}
