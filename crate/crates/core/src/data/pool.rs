//! Balanced pooling, stratified splitting and subsampling.

use super::dataset::{Domain, ReprDataset};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Draws `total / 2` rows from each source without replacement, labels them
/// clean (0) and augmented (1), and shuffles the union.
///
/// Draw order: clean indices, augmented indices, then the shuffle.
pub fn balanced_pool(clean: &ReprDataset, aug: &ReprDataset, total: usize, rng: &mut SeededRng) -> Result<ReprDataset> {
    if !total.is_multiple_of(2) {
        return Err(Error::param(format!("pool size must be even, got {total}")));
    }
    if clean.dims() != aug.dims() {
        return Err(Error::dim(format!(
            "clean has {} dims, augmented has {}",
            clean.dims(),
            aug.dims()
        )));
    }
    let half = total / 2;
    for (ds, name) in [(clean, "clean pool"), (aug, "augmented pool")] {
        if ds.len() < half {
            return Err(Error::Capacity {
                what: name.into(),
                needed: half,
                available: ds.len(),
            });
        }
    }
    let ci = rng.sample_indices(clean.len(), half);
    let ai = rng.sample_indices(aug.len(), half);
    let pooled = clean
        .select(&ci)
        .with_domain(Domain::Clean)
        .concat(&aug.select(&ai).with_domain(Domain::Aug))?;
    let mut order: Vec<usize> = (0..total).collect();
    rng.shuffle(&mut order);
    Ok(pooled.select(&order))
}

/// Disjoint train/test partition stratified by domain id.
///
/// The test side has `round(n * test_fraction)` rows. Each domain contributes
/// its proportional share (rounded), so per-domain proportions agree within
/// one row. Both outputs keep the input's row order.
pub fn split_train_test(
    data: &ReprDataset,
    test_fraction: f64,
    rng: &mut SeededRng,
) -> Result<(ReprDataset, ReprDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Capacity {
            what: "train/test split".into(),
            needed: 1,
            available: 0,
        });
    }
    let n = data.len();
    let test_total = (n as f64 * test_fraction).round() as usize;
    let clean_idx = data.domain_indices(Domain::Clean);
    let aug_idx = data.domain_indices(Domain::Aug);

    let mut clean_test = ((clean_idx.len() as f64 * test_fraction).round() as usize)
        .min(clean_idx.len())
        .min(test_total);
    let mut aug_test = test_total - clean_test;
    if aug_test > aug_idx.len() {
        aug_test = aug_idx.len();
        clean_test = test_total - aug_test;
    }

    let mut is_test = vec![false; n];
    for (idx, k) in [(&clean_idx, clean_test), (&aug_idx, aug_test)] {
        for j in rng.sample_indices(idx.len(), k) {
            is_test[idx[j]] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    Ok((data.select(&train), data.select(&test)))
}

/// `count` rows drawn without replacement, in draw order.
pub fn subsample(data: &ReprDataset, count: usize, rng: &mut SeededRng) -> Result<ReprDataset> {
    if data.len() < count {
        return Err(Error::Capacity {
            what: "subsample".into(),
            needed: count,
            available: data.len(),
        });
    }
    Ok(data.select(&rng.sample_indices(data.len(), count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LayerTag;
    use crate::numerics::RealMatrix;
    use proptest::prelude::*;

    /// Rows carry their own id in column 0 so partitions can be checked by identity.
    fn tagged(n: usize, offset: usize, domain: Domain) -> ReprDataset {
        let data = (0..n).flat_map(|i| [(offset + i) as f64, 1.0]).collect();
        ReprDataset::single_domain(
            RealMatrix::new(n, 2, data).unwrap(),
            vec![0; n],
            1,
            domain,
            LayerTag::Penultimate,
        )
        .unwrap()
    }

    fn ids(ds: &ReprDataset) -> Vec<usize> {
        ds.features().row_iter().map(|r| r[0] as usize).collect()
    }

    #[test]
    fn exhaustive_pool_takes_every_row() {
        let mut rng = SeededRng::new(1);
        let pool = balanced_pool(&tagged(2, 0, Domain::Clean), &tagged(2, 100, Domain::Aug), 4, &mut rng).unwrap();
        let mut got = ids(&pool);
        got.sort_unstable();
        assert_eq!(got, vec![0, 1, 100, 101]);
        assert_eq!(pool.count_domain(Domain::Clean), 2);
        assert_eq!(pool.count_domain(Domain::Aug), 2);
    }

    #[test]
    fn large_pool_is_balanced_and_deterministic() {
        let clean = tagged(50_000, 0, Domain::Clean);
        let aug = tagged(50_000, 1_000_000, Domain::Aug);
        let a = balanced_pool(&clean, &aug, 40_000, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a.count_domain(Domain::Clean), 20_000);
        assert_eq!(a.count_domain(Domain::Aug), 20_000);
        let b = balanced_pool(&clean, &aug, 40_000, &mut SeededRng::new(9)).unwrap();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn pool_capacity_and_parity_errors() {
        let mut rng = SeededRng::new(2);
        let small = tagged(3, 0, Domain::Clean);
        assert!(matches!(
            balanced_pool(&small, &small, 8, &mut rng),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            balanced_pool(&small, &small, 3, &mut rng),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn stratified_split_arithmetic() {
        let data = tagged(50, 0, Domain::Clean)
            .concat(&tagged(50, 50, Domain::Aug))
            .unwrap();
        let (train, test) = split_train_test(&data, 0.2, &mut SeededRng::new(3)).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert!((test.count_domain(Domain::Clean) as i64 - 10).abs() <= 1);
        assert!((train.count_domain(Domain::Aug) as i64 - 40).abs() <= 1);
    }

    #[test]
    fn degenerate_two_row_split() {
        let data = tagged(1, 0, Domain::Clean).concat(&tagged(1, 1, Domain::Aug)).unwrap();
        let (train, test) = split_train_test(&data, 0.5, &mut SeededRng::new(4)).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = tagged(4, 0, Domain::Clean);
        let mut rng = SeededRng::new(5);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split_train_test(&data, f, &mut rng), Err(Error::Parameter(_))));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            n_clean in 0usize..40,
            n_aug in 0usize..40,
            frac in 0.01f64..0.99,
            seed in any::<u64>(),
        ) {
            prop_assume!(n_clean + n_aug > 0);
            let data = tagged(n_clean, 0, Domain::Clean).concat(&tagged(n_aug, 1000, Domain::Aug)).unwrap();
            let (train, test) = split_train_test(&data, frac, &mut SeededRng::new(seed)).unwrap();
            let n = n_clean + n_aug;
            prop_assert_eq!(test.len(), (n as f64 * frac).round() as usize);
            let mut all = ids(&train);
            all.extend(ids(&test));
            all.sort_unstable();
            let mut expected = ids(&data);
            expected.sort_unstable();
            prop_assert_eq!(all, expected);
            // stratification within one row
            let want = n_clean as f64 * frac;
            prop_assert!((test.count_domain(Domain::Clean) as f64 - want).abs() <= 1.0 + 1e-9);
        }

        #[test]
        fn pool_is_always_balanced(half in 0usize..30, extra in 0usize..10, seed in any::<u64>()) {
            let clean = tagged(half + extra, 0, Domain::Clean);
            let aug = tagged(half + extra, 500, Domain::Aug);
            let pool = balanced_pool(&clean, &aug, 2 * half, &mut SeededRng::new(seed)).unwrap();
            prop_assert_eq!(pool.count_domain(Domain::Clean), half);
            prop_assert_eq!(pool.count_domain(Domain::Aug), half);
            let mut got = ids(&pool);
            got.sort_unstable();
            got.dedup();
            prop_assert_eq!(got.len(), 2 * half);
        }
    }
}
