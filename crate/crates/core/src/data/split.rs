//! Leak-free dataset partitioning: one split for training the generative
//! stack, one for training the audited model, one held out for accuracy and
//! anchor selection.

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub gan_train: Vec<usize>,
    pub target_train: Vec<usize>,
    pub target_holdout: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// Check pairwise disjointness and, if `n` is given, full coverage.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, set) in [
            ("gan_train", &self.gan_train),
            ("target_train", &self.target_train),
            ("target_holdout", &self.target_holdout),
        ] {
            for &i in set {
                if !seen.insert(i) {
                    return Err(Error::Leakage(format!(
                        "index {i} appears in {name} and another split"
                    )));
                }
            }
        }
        if let Some(n) = n {
            if seen.len() != n {
                return Err(Error::Leakage(format!(
                    "splits cover {} of {} instances",
                    seen.len(),
                    n
                )));
            }
        }
        Ok(())
    }
}

/// Seeded shuffle-then-partition of `n` indices into the three splits.
/// Fractions must be positive and sum to 1.
pub fn make_split(n: usize, fractions: [f64; 3], seed: u64) -> Result<SplitPlan> {
    if fractions.iter().any(|&f| f <= 0.0) {
        return Err(Error::contract(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }

    let b1 = (fractions[0] * n as f64).round() as usize;
    let b2 = ((fractions[0] + fractions[1]) * n as f64).round() as usize;
    let b1 = b1.min(n);
    let b2 = b2.clamp(b1, n);
    Ok(SplitPlan {
        gan_train: indices[0..b1].to_vec(),
        target_train: indices[b1..b2].to_vec(),
        target_holdout: indices[b2..].to_vec(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_follow_fractions() {
        let plan = make_split(100, [0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!(plan.gan_train.len(), 60);
        assert_eq!(plan.target_train.len(), 20);
        assert_eq!(plan.target_holdout.len(), 20);
        plan.validate(Some(100)).unwrap();
    }

    #[test]
    fn same_seed_same_plan() {
        let a = make_split(57, [0.5, 0.3, 0.2], 9).unwrap();
        let b = make_split(57, [0.5, 0.3, 0.2], 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_fractions_are_rejected() {
        assert!(make_split(10, [0.5, 0.3, 0.3], 0).is_err());
        assert!(make_split(10, [0.5, 0.5, 0.0], 0).is_err());
    }

    #[test]
    fn overlap_is_reported_as_leakage() {
        let mut plan = make_split(20, [0.5, 0.25, 0.25], 3).unwrap();
        plan.target_train[0] = plan.gan_train[0];
        assert!(matches!(
            plan.validate(None),
            Err(Error::Leakage(_))
        ));
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_and_cover(
            n in 3usize..400,
            f1 in 0.05f64..0.9,
            f2 in 0.05f64..0.9,
            seed in 0u64..1000,
        ) {
            let rest = 1.0 - f1 - f2;
            prop_assume!(rest > 0.05);
            let plan = make_split(n, [f1, f2, rest], seed).unwrap();
            plan.validate(Some(n)).unwrap();
        }
    }
}
