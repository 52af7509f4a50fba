//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fim_core::datasets::{parse_spmf, TransactionDatabase};
use fim_core::itemset::MiningResult;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small random database: up to `max_items` distinct items, up to
/// `max_txns` transactions of 1..=universe items each.
pub fn random_db(rng: &mut ChaCha8Rng, max_items: usize, max_txns: usize) -> TransactionDatabase {
    let universe = rng.gen_range(1..=max_items);
    let txns = rng.gen_range(0..=max_txns);
    let mut text = String::new();
    for _ in 0..txns {
        let len = rng.gen_range(1..=universe);
        let mut items: Vec<usize> = (0..universe).collect();
        items.shuffle(rng);
        items.truncate(len);
        items.sort_unstable();
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let _ = write!(text, "{item}");
        }
        text.push('\n');
    }
    parse_spmf(&text).expect("generated text is valid")
}

/// A random absolute minsup in 1..=len (1 for empty databases).
pub fn random_minsup(rng: &mut ChaCha8Rng, db: &TransactionDatabase) -> u64 {
    rng.gen_range(1..=db.len().max(1) as u64)
}

/// Asserts two mining results found exactly the same itemset→support map.
pub fn assert_same_frequent(context: &str, got: &MiningResult, want: &MiningResult) {
    if got.frequent == want.frequent {
        return;
    }
    let got_only: BTreeMap<_, _> = got
        .frequent
        .iter()
        .filter(|(k, v)| want.frequent.get(*k) != Some(*v))
        .collect();
    let want_only: BTreeMap<_, _> = want
        .frequent
        .iter()
        .filter(|(k, v)| got.frequent.get(*k) != Some(*v))
        .collect();
    panic!(
        "{context}: results differ\n  unexpected or wrong-count: {got_only:?}\n  missing or wrong-count: {want_only:?}"
    );
}
