//! Property tests for parsing, serialization, synthetic generation, the
//! support-threshold conversion, and database partitioning.

use std::collections::BTreeSet;

use fim_core::datasets::{
    absolute_minsup, generate_synthetic, parse_spmf, write_spmf, SyntheticParams,
};
use fim_core::mapreduce::partition;
use fim_core::FimError;
use proptest::prelude::*;

/// Raw transaction rows: nonempty token lists, possibly with duplicates.
fn rows() -> impl Strategy<Value = Vec<Vec<u64>>> {
    prop::collection::vec(prop::collection::vec(1u64..300, 1..12), 0..40)
}

fn render(rows: &[Vec<u64>]) -> String {
    let mut text = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|t| t.to_string()).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    text
}

proptest! {
    #[test]
    fn serialization_round_trips(rows in rows()) {
        let db = parse_spmf(&render(&rows)).unwrap();
        let normalized = write_spmf(&db);
        let db2 = parse_spmf(&normalized).unwrap();
        prop_assert_eq!(db.transactions(), db2.transactions());
        prop_assert_eq!(db.dictionary(), db2.dictionary());
        prop_assert_eq!(write_spmf(&db2), normalized, "normalization is idempotent");
    }

    #[test]
    fn parsing_preserves_token_sets(rows in rows()) {
        let db = parse_spmf(&render(&rows)).unwrap();
        prop_assert_eq!(db.len(), rows.len());
        for (txn, row) in db.transactions().iter().zip(&rows) {
            let got: BTreeSet<String> = txn
                .items()
                .iter()
                .map(|&id| db.dictionary().token_of(id).to_string())
                .collect();
            let want: BTreeSet<String> = row.iter().map(|t| t.to_string()).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn item_ids_are_dense_and_sorted_within_transactions(rows in rows()) {
        let db = parse_spmf(&render(&rows)).unwrap();
        let distinct: BTreeSet<u64> = rows.iter().flatten().copied().collect();
        prop_assert_eq!(db.num_items(), distinct.len());
        for txn in db.transactions() {
            let ids = txn.items();
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]), "sorted, duplicate-free");
            prop_assert!(ids.iter().all(|id| (id.0 as usize) < db.num_items()));
        }
    }

    #[test]
    fn absolute_minsup_stays_in_range(ratio in 0.0001f64..=1.0, n in 0usize..100_000) {
        let abs = absolute_minsup(ratio, n).unwrap();
        prop_assert!(abs >= 1);
        prop_assert!(abs <= n.max(1) as u64);
    }

    #[test]
    fn absolute_minsup_is_monotone_in_the_ratio(
        a in 0.0001f64..=1.0,
        b in 0.0001f64..=1.0,
        n in 0usize..100_000,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(absolute_minsup(lo, n).unwrap() <= absolute_minsup(hi, n).unwrap());
    }

    #[test]
    fn partitions_cover_the_database_evenly(rows in rows(), p in 1usize..20) {
        let db = parse_spmf(&render(&rows)).unwrap();
        let parts = partition(&db, p).unwrap();
        prop_assert!(parts.len() <= p);
        prop_assert!(parts.len() <= db.len().max(1));
        let total: usize = parts.iter().map(|part| part.len()).sum();
        prop_assert_eq!(total, db.len());
        if !parts.is_empty() {
            let sizes: Vec<usize> = parts.iter().map(|part| part.len()).collect();
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            prop_assert!(max - min <= 1, "balanced split, got sizes {:?}", sizes);
        }
        for (i, part) in parts.iter().enumerate() {
            prop_assert_eq!(part.index(), i);
        }
        let stitched: Vec<_> = parts
            .iter()
            .flat_map(|part| part.transactions().iter().cloned())
            .collect();
        prop_assert_eq!(stitched.as_slice(), db.transactions(), "order is preserved");
    }

    #[test]
    fn synthetic_generation_is_deterministic(
        txns in 0usize..150,
        items in 1usize..40,
        seed in any::<u64>(),
    ) {
        let params = SyntheticParams {
            num_transactions: txns,
            num_items: items,
            avg_transaction_len: (items / 2).max(1),
            avg_pattern_len: (items / 4).max(1),
            num_patterns: 10,
            seed,
        };
        let a = generate_synthetic(&params).unwrap();
        let b = generate_synthetic(&params).unwrap();
        prop_assert_eq!(write_spmf(&a), write_spmf(&b));
        prop_assert_eq!(a.len(), txns);
        prop_assert!(a.num_items() <= items);
        prop_assert!(a.transactions().iter().all(|t| !t.items().is_empty()));
    }
}

#[test]
fn absolute_minsup_known_values() {
    assert_eq!(absolute_minsup(0.003, 100_000).unwrap(), 300);
    assert_eq!(absolute_minsup(0.01, 4_000).unwrap(), 40);
    assert_eq!(absolute_minsup(0.5, 4).unwrap(), 2);
    assert_eq!(absolute_minsup(1.0, 7).unwrap(), 7);
    assert_eq!(absolute_minsup(0.001, 10).unwrap(), 1, "floors at one transaction");
    assert_eq!(absolute_minsup(0.25, 0).unwrap(), 1, "empty database floors too");
}

#[test]
fn absolute_minsup_rejects_out_of_range_ratios() {
    for bad in [0.0, -0.25, 1.0001, f64::NAN, f64::INFINITY] {
        assert!(
            matches!(absolute_minsup(bad, 100), Err(FimError::Config(_))),
            "ratio {bad} must be rejected"
        );
    }
}

#[test]
fn zero_partitions_is_a_configuration_error() {
    let db = parse_spmf("1 2\n").unwrap();
    assert!(matches!(partition(&db, 0), Err(FimError::Config(_))));
}

#[test]
fn empty_database_partitions_to_nothing() {
    let db = parse_spmf("").unwrap();
    assert!(partition(&db, 4).unwrap().is_empty());
}

#[test]
fn different_seeds_usually_differ() {
    let base = SyntheticParams {
        num_transactions: 50,
        num_items: 30,
        avg_transaction_len: 8,
        avg_pattern_len: 3,
        num_patterns: 10,
        seed: 1,
    };
    let other = SyntheticParams { seed: 2, ..base.clone() };
    let a = generate_synthetic(&base).unwrap();
    let b = generate_synthetic(&other).unwrap();
    assert_ne!(write_spmf(&a), write_spmf(&b));
}

#[test]
fn synthetic_parameter_validation() {
    let bad_universe = SyntheticParams {
        num_items: 0,
        ..SyntheticParams::default()
    };
    assert!(matches!(
        generate_synthetic(&bad_universe),
        Err(FimError::Config(_))
    ));

    let pattern_longer_than_txn = SyntheticParams {
        avg_transaction_len: 3,
        avg_pattern_len: 5,
        ..SyntheticParams::default()
    };
    assert!(matches!(
        generate_synthetic(&pattern_longer_than_txn),
        Err(FimError::Config(_))
    ));

    // Zero transactions sidesteps the other checks entirely.
    let empty = SyntheticParams {
        num_transactions: 0,
        num_items: 0,
        ..SyntheticParams::default()
    };
    assert!(generate_synthetic(&empty).unwrap().is_empty());
}

#[test]
fn parser_reports_line_numbers_and_skips_blanks() {
    let db = parse_spmf("1 2\n\n3\n").unwrap();
    assert_eq!(db.len(), 2, "blank lines are not transactions");

    match parse_spmf("1 2\nnot-a-number\n") {
        Err(FimError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error with a line number, got {other:?}"),
    }
}
