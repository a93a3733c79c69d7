use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, ImageRecord};
use crate::error::{Error, Result};

/// Fractions for (train1, train2, test).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train1: f64,
    pub train2: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train1: f64, train2: f64, test: f64) -> Result<Self> {
        let all = [train1, train2, test];
        if all.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::validation(format!(
                "split fractions must be non-negative, got {all:?}"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(Self {
            train1,
            train2,
            test,
        })
    }
}

/// Partitions `dataset` into (train1, train2, test).
///
/// Ids are sorted and then shuffled with a generator seeded by `seed`, so the
/// result depends only on the id set and the seed. The first two splits get
/// `round(N * f)` images; the test split takes the remainder.
pub fn split(
    dataset: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let fractions = SplitFractions::new(fractions.train1, fractions.train2, fractions.test)?;
    let mut records: Vec<&ImageRecord> = dataset.sorted_by_id();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);

    let n = records.len();
    let n1 = ((n as f64 * fractions.train1).round() as usize).min(n);
    let n2 = ((n as f64 * fractions.train2).round() as usize).min(n - n1);

    let take = |rs: &[&ImageRecord]| Dataset::new(rs.iter().map(|r| (*r).clone()).collect());
    Ok((
        take(&records[..n1])?,
        take(&records[n1..n1 + n2])?,
        take(&records[n1 + n2..])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| ImageRecord::new(format!("img{i:03}"), 8, 8, vec![]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn ids(d: &Dataset) -> BTreeSet<String> {
        d.ids().map(str::to_string).collect()
    }

    #[test]
    fn ten_images_forty_thirty_thirty() {
        let d = dataset(10);
        let f = SplitFractions::new(0.4, 0.3, 0.3).unwrap();
        let (a, b, c) = split(&d, f, 42).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (4, 3, 3));
        let (sa, sb, sc) = (ids(&a), ids(&b), ids(&c));
        assert!(sa.is_disjoint(&sb) && sb.is_disjoint(&sc) && sa.is_disjoint(&sc));
        let all: BTreeSet<_> = sa.union(&sb).chain(sc.iter()).cloned().collect();
        assert_eq!(all, ids(&d));
        let again = split(&d, f, 42).unwrap();
        assert_eq!((ids(&again.0), ids(&again.1), ids(&again.2)), (sa, sb, sc));
    }

    #[test]
    fn all_in_first() {
        let d = dataset(7);
        let (a, b, c) = split(&d, SplitFractions::new(1.0, 0.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (7, 0, 0));
    }

    #[test]
    fn bad_sum() {
        assert!(SplitFractions::new(0.5, 0.3, 0.3).is_err());
        assert!(SplitFractions::new(-0.1, 0.8, 0.3).is_err());
    }

    #[test]
    fn input_order_does_not_matter() {
        let d = dataset(12);
        let mut rev: Vec<_> = d.records().to_vec();
        rev.reverse();
        let r = Dataset::new(rev).unwrap();
        let f = SplitFractions::new(0.5, 0.25, 0.25).unwrap();
        let (a1, _, _) = split(&d, f, 9).unwrap();
        let (a2, _, _) = split(&r, f, 9).unwrap();
        assert_eq!(ids(&a1), ids(&a2));
    }

    proptest! {
        #[test]
        fn partition_law(n in 0usize..40, seed: u64, f1 in 0.0..1.0f64, share in 0.0..1.0f64) {
            let f2 = (1.0 - f1) * share;
            let f3 = 1.0 - f1 - f2;
            let d = dataset(n);
            let (a, b, c) = split(&d, SplitFractions::new(f1, f2, f3).unwrap(), seed).unwrap();
            prop_assert_eq!(a.len() + b.len() + c.len(), n);
            let mut all = ids(&a);
            all.extend(ids(&b));
            all.extend(ids(&c));
            prop_assert_eq!(all, ids(&d));
        }
    }
}
