//! FP-Growth: two-scan FP-tree construction and recursive
//! conditional-pattern-base mining.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::datasets::{ItemId, TransactionDatabase};
use crate::error::{FimError, Result};
use crate::itemset::{Algorithm, Itemset, MiningResult};
use crate::mapreduce::BackendKind;

/// Frequent items ordered by support descending, ties broken by id
/// ascending. An item's *rank* is its position in this order; rank 0 is the
/// most frequent item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FList {
    entries: Vec<(ItemId, u64)>,
    rank_of: Vec<u32>, // indexed by item id; NO_RANK when infrequent
}

const NO_RANK: u32 = u32::MAX;
const NO_NODE: u32 = u32::MAX;

impl FList {
    /// Builds from dense per-item counts (index = item id).
    pub(crate) fn from_counts(counts: &[u64], minsup_abs: u64) -> FList {
        let minsup = minsup_abs.max(1);
        let mut entries: Vec<(ItemId, u64)> = counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c >= minsup)
            .map(|(i, &c)| (ItemId(i as u32), c))
            .collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut rank_of = vec![NO_RANK; counts.len()];
        for (rank, &(item, _)) in entries.iter().enumerate() {
            rank_of[item.index()] = rank as u32;
        }
        FList { entries, rank_of }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank(&self, item: ItemId) -> Option<usize> {
        match self.rank_of.get(item.index()) {
            Some(&r) if r != NO_RANK => Some(r as usize),
            _ => None,
        }
    }

    pub fn item_at(&self, rank: usize) -> ItemId {
        self.entries[rank].0
    }

    pub fn support_at(&self, rank: usize) -> u64 {
        self.entries[rank].1
    }

    /// Entries in rank order (support descending, id ascending on ties).
    pub fn iter(&self) -> impl Iterator<Item = (ItemId, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub(crate) fn items_by_rank(&self) -> Vec<ItemId> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }
}

/// First database scan: aggregate per-item supports, keep those meeting
/// minsup, order descending (ties by id ascending).
pub fn build_flist(db: &TransactionDatabase, minsup_abs: u64) -> FList {
    let mut counts = vec![0u64; db.num_items()];
    for txn in db.scan() {
        for item in txn.items() {
            counts[item.index()] += 1;
        }
    }
    FList::from_counts(&counts, minsup_abs)
}

#[derive(Clone, Debug)]
struct Node {
    rank: u32, // NO_RANK marks the root
    count: u64,
    parent: u32,
    link: u32,
    /// (child rank, node index), sorted by rank for binary-search descent.
    children: Vec<(u32, u32)>,
}

#[derive(Clone, Copy, Debug)]
struct Header {
    total: u64,
    head: u32,
    tail: u32,
}

/// Stable integer handle to one FP-tree node; valid for the tree's
/// lifetime.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeHandle(u32);

/// Prefix tree over rank-filtered, rank-ordered transactions. Nodes live in
/// an index-addressed arena; per-rank header entries carry the total
/// support and the head of the node-link chain threading all nodes of that
/// rank.
#[derive(Clone, Debug)]
pub struct FPTree {
    nodes: Vec<Node>,
    headers: Vec<Header>,
    items: Vec<ItemId>, // rank → item id
}

impl FPTree {
    pub(crate) fn with_items(items: Vec<ItemId>) -> FPTree {
        let headers = vec![
            Header {
                total: 0,
                head: NO_NODE,
                tail: NO_NODE,
            };
            items.len()
        ];
        FPTree {
            nodes: vec![Node {
                rank: NO_RANK,
                count: 0,
                parent: NO_NODE,
                link: NO_NODE,
                children: Vec::new(),
            }],
            headers,
            items,
        }
    }

    /// Inserts one rank path (strictly ascending) with the given count,
    /// merging shared prefixes.
    pub(crate) fn insert_path(&mut self, ranks: &[u32], count: u64) {
        debug_assert!(ranks.windows(2).all(|w| w[0] < w[1]));
        let mut cur = 0u32;
        for &rank in ranks {
            self.headers[rank as usize].total += count;
            let pos = self.nodes[cur as usize]
                .children
                .binary_search_by_key(&rank, |&(r, _)| r);
            cur = match pos {
                Ok(i) => {
                    let child = self.nodes[cur as usize].children[i].1;
                    self.nodes[child as usize].count += count;
                    child
                }
                Err(i) => {
                    let idx = self.nodes.len() as u32;
                    self.nodes.push(Node {
                        rank,
                        count,
                        parent: cur,
                        link: NO_NODE,
                        children: Vec::new(),
                    });
                    self.nodes[cur as usize].children.insert(i, (rank, idx));
                    let header = &mut self.headers[rank as usize];
                    if header.head == NO_NODE {
                        header.head = idx;
                    } else {
                        self.nodes[header.tail as usize].link = idx;
                    }
                    header.tail = idx;
                    idx
                }
            };
        }
    }

    /// Total node count, root included.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct ranks (header slots).
    pub fn num_ranks(&self) -> usize {
        self.headers.len()
    }

    pub fn root(&self) -> NodeHandle {
        NodeHandle(0)
    }

    /// The item at a node, `None` for the root.
    pub fn item(&self, node: NodeHandle) -> Option<ItemId> {
        let rank = self.nodes[node.0 as usize].rank;
        (rank != NO_RANK).then(|| self.items[rank as usize])
    }

    pub fn count(&self, node: NodeHandle) -> u64 {
        self.nodes[node.0 as usize].count
    }

    pub fn parent(&self, node: NodeHandle) -> Option<NodeHandle> {
        let p = self.nodes[node.0 as usize].parent;
        (p != NO_NODE).then_some(NodeHandle(p))
    }

    pub fn children(&self, node: NodeHandle) -> impl Iterator<Item = NodeHandle> + '_ {
        self.nodes[node.0 as usize]
            .children
            .iter()
            .map(|&(_, idx)| NodeHandle(idx))
    }

    /// Item id at a rank position.
    pub fn item_at(&self, rank: usize) -> ItemId {
        self.items[rank]
    }

    /// Total support accumulated for a rank across its node-link chain.
    pub fn header_total(&self, rank: usize) -> u64 {
        self.headers[rank].total
    }

    pub(crate) fn rank_of_item(&self, item: ItemId) -> Option<usize> {
        self.items.iter().position(|&i| i == item)
    }

    /// All nodes carrying `rank`, in node-link (insertion) order.
    pub fn rank_nodes(&self, rank: usize) -> impl Iterator<Item = NodeHandle> + '_ {
        let mut cur = self.headers[rank].head;
        std::iter::from_fn(move || {
            if cur == NO_NODE {
                return None;
            }
            let out = NodeHandle(cur);
            cur = self.nodes[cur as usize].link;
            Some(out)
        })
    }

    /// Prefix paths (in ranks, ascending) above each node of `rank`, with
    /// that node's count.
    fn rank_paths(&self, rank: usize) -> Vec<(Vec<u32>, u64)> {
        let mut out = Vec::new();
        for node in self.rank_nodes(rank) {
            let count = self.count(node);
            let mut path = Vec::new();
            let mut cur = self.nodes[node.0 as usize].parent;
            while cur != NO_NODE {
                let n = &self.nodes[cur as usize];
                if n.rank != NO_RANK {
                    path.push(n.rank);
                }
                cur = n.parent;
            }
            path.reverse();
            out.push((path, count));
        }
        out
    }

    /// When every node has at most one child, the single chain as
    /// (rank, count) pairs from the root down; `None` otherwise.
    fn single_path(&self) -> Option<Vec<(u32, u64)>> {
        let mut chain = Vec::new();
        let mut cur = &self.nodes[0];
        loop {
            match cur.children.len() {
                0 => return Some(chain),
                1 => {
                    let child = &self.nodes[cur.children[0].1 as usize];
                    chain.push((child.rank, child.count));
                    cur = child;
                }
                _ => return None,
            }
        }
    }
}

/// Second database scan: filter each transaction to FList items, order by
/// rank, and insert into the tree with shared-prefix merging.
pub fn build_fptree(db: &TransactionDatabase, flist: &FList) -> FPTree {
    let mut tree = FPTree::with_items(flist.items_by_rank());
    let mut ranks: Vec<u32> = Vec::new();
    for txn in db.scan() {
        ranks.clear();
        ranks.extend(
            txn.items()
                .iter()
                .filter_map(|&item| flist.rank(item).map(|r| r as u32)),
        );
        ranks.sort_unstable();
        if !ranks.is_empty() {
            tree.insert_path(&ranks, 1);
        }
    }
    tree
}

/// Prefix paths with counts for every node of `item`: one entry per node on
/// the item's node-link chain, listing its ancestors (root and the item
/// itself excluded) in rank order.
pub fn conditional_pattern_base(
    tree: &FPTree,
    item: ItemId,
) -> Result<Vec<(Vec<ItemId>, u64)>> {
    let rank = tree
        .rank_of_item(item)
        .ok_or_else(|| FimError::input(format!("item {item} is not in the tree header")))?;
    Ok(tree
        .rank_paths(rank)
        .into_iter()
        .map(|(path, count)| {
            (
                path.iter().map(|&r| tree.item_at(r as usize)).collect(),
                count,
            )
        })
        .collect())
}

/// Mines the patterns anchored at `rank`: every emitted itemset contains
/// the rank's item as its least-frequent member. `suffix` carries the items
/// accumulated from enclosing trees.
fn mine_anchor(
    tree: &FPTree,
    rank: usize,
    minsup: u64,
    suffix: &mut Vec<ItemId>,
    out: &mut BTreeMap<Itemset, u64>,
) {
    let support = tree.header_total(rank);
    debug_assert!(support >= minsup);
    suffix.push(tree.item_at(rank));
    out.insert(Itemset::new(suffix.clone()), support);

    let base = tree.rank_paths(rank);
    // Conditional frequencies; only ranks below the anchor can appear.
    let mut cond_counts = vec![0u64; rank];
    for (path, count) in &base {
        for &r in path {
            cond_counts[r as usize] += count;
        }
    }
    // Remap surviving ranks, preserving relative order (so remapped paths
    // stay strictly ascending).
    let mut remap = vec![NO_RANK; rank];
    let mut kept_items = Vec::new();
    for (r, &c) in cond_counts.iter().enumerate() {
        if c >= minsup {
            remap[r] = kept_items.len() as u32;
            kept_items.push(tree.item_at(r));
        }
    }
    if !kept_items.is_empty() {
        let mut cond = FPTree::with_items(kept_items);
        let mut buf: Vec<u32> = Vec::new();
        for (path, count) in &base {
            buf.clear();
            buf.extend(
                path.iter()
                    .map(|&r| remap[r as usize])
                    .filter(|&r| r != NO_RANK),
            );
            if !buf.is_empty() {
                cond.insert_path(&buf, *count);
            }
        }
        mine_rec(&cond, minsup, suffix, out);
    }
    suffix.pop();
}

fn mine_rec(
    tree: &FPTree,
    minsup: u64,
    suffix: &mut Vec<ItemId>,
    out: &mut BTreeMap<Itemset, u64>,
) {
    // Single-path shortcut: all patterns are combinations of the chain.
    if let Some(chain) = tree.single_path() {
        if chain.is_empty() {
            return;
        }
        let m = chain.len();
        if m <= 48 {
            for mask in 1u64..(1u64 << m) {
                let deepest = 63 - mask.leading_zeros() as usize;
                let support = chain[deepest].1;
                debug_assert!(support >= minsup);
                let mut items = suffix.clone();
                items.extend(
                    chain
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| mask & (1 << i) != 0)
                        .map(|(_, &(r, _))| tree.item_at(r as usize)),
                );
                out.insert(Itemset::new(items), support);
            }
            return;
        }
        // chains longer than the mask width fall through to recursion
    }
    for rank in (0..tree.num_ranks()).rev() {
        if tree.header_total(rank) == 0 {
            continue;
        }
        mine_anchor(tree, rank, minsup, suffix, out);
    }
}

/// Runs FP-Growth over a prebuilt tree, restricted to the given anchor
/// ranks: only patterns whose least-frequent member is one of the anchors
/// are emitted. Used by the parallel miner, whose groups own disjoint
/// anchor sets.
pub(crate) fn mine_tree_anchored(
    tree: &FPTree,
    minsup: u64,
    anchors: impl IntoIterator<Item = usize>,
    out: &mut BTreeMap<Itemset, u64>,
) {
    let mut suffix = Vec::new();
    for rank in anchors {
        if tree.header_total(rank) == 0 {
            continue;
        }
        mine_anchor(tree, rank, minsup, &mut suffix, out);
    }
}

/// Mines all frequent itemsets with two database scans: one to build the
/// FList, one to build the FP-tree; recursion then works from conditional
/// pattern bases only. Header items are processed rank-ascending (least
/// frequent first).
pub fn fpgrowth_mine(db: &TransactionDatabase, minsup_abs: u64) -> MiningResult {
    let minsup = minsup_abs.max(1);
    let started = Instant::now();
    let flist = build_flist(db, minsup);
    let tree = build_fptree(db, &flist);
    let mut frequent = BTreeMap::new();
    mine_tree_anchored(&tree, minsup, (0..tree.num_ranks()).rev(), &mut frequent);
    MiningResult {
        frequent,
        minsup_abs: minsup,
        algorithm: Algorithm::FpGrowth,
        backend: BackendKind::Sequential,
        elapsed: started.elapsed(),
        level_timings: Vec::new(),
        level_candidate_counts: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apriori::apriori_mine;
    use crate::datasets::parse_spmf;

    fn db1() -> TransactionDatabase {
        parse_spmf("0 1 2\n0 1\n0 2\n1 2\n").unwrap()
    }

    #[test]
    fn flist_db1_ties_broken_by_id() {
        let flist = build_flist(&db1(), 2);
        let entries: Vec<(u32, u64)> = flist.iter().map(|(i, c)| (i.0, c)).collect();
        assert_eq!(entries, vec![(0, 3), (1, 3), (2, 3)]);
    }

    #[test]
    fn flist_empty_db_is_empty() {
        let db = parse_spmf("").unwrap();
        assert!(build_flist(&db, 1).is_empty());
    }

    #[test]
    fn flist_drops_infrequent_items() {
        let db = parse_spmf("0\n0\n1\n").unwrap();
        let flist = build_flist(&db, 2);
        let entries: Vec<(u32, u64)> = flist.iter().map(|(i, c)| (i.0, c)).collect();
        assert_eq!(entries, vec![(0, 2)]);
        assert_eq!(flist.rank(ItemId(0)), Some(0));
        assert_eq!(flist.rank(ItemId(1)), None);
    }

    #[test]
    fn fptree_merges_shared_prefixes() {
        let db = parse_spmf("0 1\n0 1\n").unwrap();
        let flist = build_flist(&db, 1);
        let tree = build_fptree(&db, &flist);
        // root + two nodes on a single path, both with count 2
        assert_eq!(tree.num_nodes(), 3);
        let chain = tree.single_path().unwrap();
        assert_eq!(chain.len(), 2);
        assert!(chain.iter().all(|&(_, c)| c == 2));
    }

    #[test]
    fn fptree_empty_db_is_root_only() {
        let db = parse_spmf("").unwrap();
        let flist = build_flist(&db, 1);
        let tree = build_fptree(&db, &flist);
        assert_eq!(tree.num_nodes(), 1);
        assert_eq!(tree.num_ranks(), 0);
    }

    #[test]
    fn fptree_db1_header_totals_match_supports() {
        let db = db1();
        let flist = build_flist(&db, 2);
        let tree = build_fptree(&db, &flist);
        for (rank, (item, support)) in flist.iter().enumerate() {
            assert_eq!(tree.header_total(rank), support, "item {item}");
            let chain_sum: u64 = tree.rank_nodes(rank).map(|n| tree.count(n)).sum();
            assert_eq!(chain_sum, support);
        }
    }

    #[test]
    fn conditional_base_single_path() {
        let db = parse_spmf("0 1\n0 1\n").unwrap();
        let flist = build_flist(&db, 1);
        let tree = build_fptree(&db, &flist);
        // item 1 is rank 1 (support tie broken by id): one node, prefix [0]
        let base = conditional_pattern_base(&tree, ItemId(1)).unwrap();
        assert_eq!(base, vec![(vec![ItemId(0)], 2)]);
    }

    #[test]
    fn conditional_base_depth_one_items_have_empty_prefixes() {
        let db = parse_spmf("0\n0\n").unwrap();
        let flist = build_flist(&db, 1);
        let tree = build_fptree(&db, &flist);
        let base = conditional_pattern_base(&tree, ItemId(0)).unwrap();
        assert_eq!(base, vec![(vec![], 2)]);
    }

    #[test]
    fn conditional_base_counts_sum_to_support() {
        let db = db1();
        let flist = build_flist(&db, 2);
        let tree = build_fptree(&db, &flist);
        let base = conditional_pattern_base(&tree, ItemId(2)).unwrap();
        let total: u64 = base.iter().map(|&(_, c)| c).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn conditional_base_unknown_item_errors() {
        let db = db1();
        let flist = build_flist(&db, 2);
        let tree = build_fptree(&db, &flist);
        assert!(conditional_pattern_base(&tree, ItemId(9)).is_err());
    }

    #[test]
    fn fpgrowth_matches_apriori_on_db1() {
        let db = db1();
        let fp = fpgrowth_mine(&db, 2);
        let ap = apriori_mine(&db, 2);
        assert_eq!(fp.frequent, ap.frequent);
        assert_eq!(fp.num_frequent(), 6);
        assert!(fp.level_timings.is_empty());
    }

    #[test]
    fn fpgrowth_minsup_above_db_size_is_empty() {
        let result = fpgrowth_mine(&db1(), 9);
        assert!(result.frequent.is_empty());
    }

    #[test]
    fn fpgrowth_single_path_combination_enumeration() {
        let db = parse_spmf("0 1 2\n0 1 2\n0 1 2\n0 1 2\n").unwrap();
        let result = fpgrowth_mine(&db, 4);
        assert_eq!(result.num_frequent(), 7);
        assert!(result.frequent.values().all(|&c| c == 4));
    }

    #[test]
    fn fpgrowth_uses_exactly_two_scans() {
        let db = db1();
        assert_eq!(db.scans(), 0);
        let _ = fpgrowth_mine(&db, 2);
        assert_eq!(db.scans(), 2);
    }
}
