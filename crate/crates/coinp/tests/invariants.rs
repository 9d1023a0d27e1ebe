//! Property tests for the structural invariants of the data machinery.

use proptest::prelude::*;

use coinp::data::{
    load_csv, permute_columns, split, write_csv, Dataset, EncodingSpec, FeatureSet, Permutation,
};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// A dataset with 2..=24 rows, 1..=5 features, and tame finite values.
fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..=24, 1usize..=5).prop_flat_map(|(n, p)| {
        (
            proptest::collection::vec(
                proptest::collection::vec(-1.0e6..1.0e6f64, p),
                n,
            ),
            proptest::collection::vec(-1.0e6..1.0e6f64, n),
        )
            .prop_map(move |(rows, labels)| {
                let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
                Dataset::from_rows(rows, labels, names).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn permutation_preserves_multisets_and_non_s_columns(
        d in dataset_strategy(),
        s_mask in proptest::collection::vec(any::<bool>(), 5),
        seed in any::<u64>(),
    ) {
        let s_indices: Vec<usize> = (0..d.n_features()).filter(|&j| s_mask[j]).collect();
        prop_assume!(!s_indices.is_empty());
        let s = FeatureSet::new(s_indices.clone()).unwrap();
        let perm = Permutation::sample(d.n_rows(), seed).unwrap();
        let out = permute_columns(&d, &s, &perm).unwrap();

        for j in 0..d.n_features() {
            if s_indices.contains(&j) {
                prop_assert_eq!(sorted(out.column(j)), sorted(d.column(j)));
            } else {
                prop_assert_eq!(out.column(j), d.column(j));
            }
        }
        prop_assert_eq!(out.labels(), d.labels());
    }

    #[test]
    fn permuting_with_the_inverse_is_the_identity(
        d in dataset_strategy(),
        seed in any::<u64>(),
    ) {
        let s = FeatureSet::new(0..d.n_features()).unwrap();
        let perm = Permutation::sample(d.n_rows(), seed).unwrap();
        let there = permute_columns(&d, &s, &perm).unwrap();
        let back = permute_columns(&there, &s, &perm.inverse()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn split_partitions_every_row_exactly_once(
        d in dataset_strategy(),
        fraction in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        prop_assume!(d.n_rows() >= 4);
        let n_holdout = (d.n_rows() as f64 * fraction).round() as usize;
        prop_assume!(n_holdout >= 2 && d.n_rows() - n_holdout >= 2);
        let (train, holdout) = split(&d, fraction, seed).unwrap();
        prop_assert_eq!(train.n_rows() + holdout.n_rows(), d.n_rows());
        prop_assert_eq!(holdout.n_rows(), n_holdout);
        // row multisets (features + label serialized) match exactly
        let serialize = |ds: &Dataset| {
            let mut rows: Vec<Vec<u64>> = (0..ds.n_rows())
                .map(|i| {
                    ds.row(i)
                        .iter()
                        .chain(std::iter::once(&ds.label(i)))
                        .map(|v| v.to_bits())
                        .collect()
                })
                .collect();
            rows.sort();
            rows
        };
        let mut got = serialize(&train);
        got.extend(serialize(&holdout));
        got.sort();
        prop_assert_eq!(got, serialize(&d));
    }

    #[test]
    fn rank_pvalue_granularity(
        observed in -1.0e3..1.0e3f64,
        permuted in proptest::collection::vec(-1.0e3..1.0e3f64, 1..60),
    ) {
        let p = coinp::cit::rank_pvalue(observed, &permuted).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let steps = p * permuted.len() as f64;
        prop_assert!((steps - steps.round()).abs() < 1e-9);
    }

    #[test]
    fn csv_write_read_round_trip(d in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&d, "label", &path).unwrap();
        let back = load_csv(&path, "label", &EncodingSpec::new()).unwrap();
        prop_assert_eq!(back, d);
    }
}
