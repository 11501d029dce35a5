//! Two-parameter Chinese-restaurant-process machinery.
//!
//! A random partition of n elements is built sequentially: element i+1 joins
//! an existing block of size m with probability (m - discount)/(concentration + i)
//! and opens a new block with probability
//! (concentration + discount * K)/(concentration + i), K being the current
//! number of blocks. The induced partition law depends only on block sizes;
//! [`eppf_log_prob`] evaluates it in closed form, and the small analytic
//! probabilities below (pairwise co-clustering, triple patterns) are the
//! building blocks for the prior network summaries in [`crate::analytics`].

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Discount/concentration pair governing a partition prior.
///
/// The discount lies in [0, 1) and the concentration must be strictly
/// positive. This is a deliberately narrower box than the weakest condition
/// the process admits; it matches the hyperprior support used by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitmanYorParams {
    discount: f64,
    concentration: f64,
}

impl PitmanYorParams {
    pub fn new(discount: f64, concentration: f64) -> Result<Self> {
        let p = PitmanYorParams {
            discount,
            concentration,
        };
        p.validate()?;
        Ok(p)
    }

    /// Re-checks the invariants; needed after deserializing from config files.
    pub fn validate(&self) -> Result<()> {
        if !self.discount.is_finite() || !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if !self.concentration.is_finite() || self.concentration <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        Ok(())
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }
}

/// Seating probabilities for the next element given current block sizes.
///
/// Returns K+1 weights: one per existing block in label order, then the
/// new-block weight last. They sum to one.
pub fn predictive_weights(sizes: &[usize], params: &PitmanYorParams) -> Result<Vec<f64>> {
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "block sizes must be positive".into(),
        ));
    }
    let n: usize = sizes.iter().sum();
    let a = params.discount();
    let b = params.concentration();
    let denom = b + n as f64;
    let k = sizes.len() as f64;
    let mut w: Vec<f64> = sizes.iter().map(|&m| (m as f64 - a) / denom).collect();
    w.push((b + a * k) / denom);
    Ok(w)
}

/// Log probability of a partition under the two-parameter prior.
///
/// Depends on the block sizes only, hence is invariant under any relabeling
/// or permutation of the elements. Evaluated entirely through log-Gamma.
pub fn eppf_log_prob(partition: &Partition, params: &PitmanYorParams) -> f64 {
    let a = params.discount();
    let b = params.concentration();
    let n = partition.len() as f64;
    let k = partition.num_blocks();
    let mut lp = ln_gamma(b + 1.0) - ln_gamma(b + n) - (b + k as f64 * a).ln();
    for l in 1..=k {
        lp += (b + l as f64 * a).ln();
    }
    let lg1a = ln_gamma(1.0 - a);
    for &m in partition.sizes() {
        lp += ln_gamma(m as f64 - a) - lg1a;
    }
    lp
}

/// Draws a partition of n elements by sequential seating.
pub fn sample_partition(n: usize, params: &PitmanYorParams, rng: &mut impl Rng) -> Partition {
    Partition::from_labels(&sample_labels(n, params, rng))
}

/// Draws block occupancy counts for n elements (the label vector is not kept).
pub fn sample_faction_sizes(n: usize, params: &PitmanYorParams, rng: &mut impl Rng) -> Vec<usize> {
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        let choice = seat_next(&sizes, i, params, rng);
        if choice == sizes.len() {
            sizes.push(1);
        } else {
            sizes[choice] += 1;
        }
    }
    sizes
}

fn sample_labels(n: usize, params: &PitmanYorParams, rng: &mut impl Rng) -> Vec<usize> {
    let mut labels = Vec::with_capacity(n);
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        let choice = seat_next(&sizes, i, params, rng);
        if choice == sizes.len() {
            sizes.push(1);
        } else {
            sizes[choice] += 1;
        }
        labels.push(choice);
    }
    labels
}

// One seating draw given current occupancies; `seated` must equal sizes.sum().
// Inverse-CDF over blocks in label order with the new block last, so a fixed
// RNG stream yields a fixed choice sequence.
fn seat_next(sizes: &[usize], seated: usize, params: &PitmanYorParams, rng: &mut impl Rng) -> usize {
    let a = params.discount();
    let b = params.concentration();
    let total = b + seated as f64;
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &m) in sizes.iter().enumerate() {
        acc += m as f64 - a;
        if u < acc {
            return k;
        }
    }
    sizes.len()
}

/// Prior probability that two given elements share a block.
pub fn co_cluster_prob(params: &PitmanYorParams) -> f64 {
    (1.0 - params.discount()) / (params.concentration() + 1.0)
}

/// Prior pattern probabilities for three given elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriplePatternProbs {
    /// All three in one block.
    pub all_same: f64,
    /// Probability of one specific two-and-one pattern; there are three such
    /// labeled patterns, all equally likely.
    pub one_pair: f64,
    /// All three in distinct blocks.
    pub all_distinct: f64,
}

pub fn triple_pattern_probs(params: &PitmanYorParams) -> TriplePatternProbs {
    let a = params.discount();
    let b = params.concentration();
    let d = (b + 1.0) * (b + 2.0);
    TriplePatternProbs {
        all_same: (1.0 - a) * (2.0 - a) / d,
        one_pair: (1.0 - a) * (b + a) / d,
        all_distinct: (b + a) * (b + 2.0 * a) / d,
    }
}

/// Monte Carlo estimate of the expected number of blocks among n elements.
pub fn expected_num_clusters(
    n: usize,
    params: &PitmanYorParams,
    n_samples: usize,
    rng: &mut impl Rng,
) -> f64 {
    assert!(n_samples > 0, "need at least one sample");
    let mut total = 0usize;
    for _ in 0..n_samples {
        total += sample_faction_sizes(n, params, rng).len();
    }
    total as f64 / n_samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// All partitions of n elements as canonical label vectors
    /// (restricted-growth strings).
    pub(crate) fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = vec![0usize; n];
        fn rec(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
            if pos == current.len() {
                out.push(current.clone());
                return;
            }
            for l in 0..=max_used + 1 {
                current[pos] = l;
                rec(current, pos + 1, max_used.max(l), out);
            }
        }
        if n == 0 {
            return vec![Vec::new()];
        }
        current[0] = 0;
        rec(&mut current, 1, 0, &mut out);
        out
    }

    fn params(a: f64, b: f64) -> PitmanYorParams {
        PitmanYorParams::new(a, b).unwrap()
    }

    #[test]
    fn parameter_box_is_enforced() {
        assert!(PitmanYorParams::new(-0.1, 1.0).is_err());
        assert!(PitmanYorParams::new(1.0, 1.0).is_err());
        assert!(PitmanYorParams::new(0.0, 0.0).is_err());
        assert!(PitmanYorParams::new(0.0, -2.0).is_err());
        assert!(PitmanYorParams::new(f64::NAN, 1.0).is_err());
        assert!(PitmanYorParams::new(0.99, 0.01).is_ok());
    }

    #[test]
    fn predictive_weights_match_hand_values() {
        // Occupancies (4,3,1), no discount: existing weights m/(b+8), new b/(b+8).
        let b = 2.5;
        let w = predictive_weights(&[4, 3, 1], &params(0.0, b)).unwrap();
        let denom = b + 8.0;
        assert_abs_diff_eq!(w[0], 4.0 / denom, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 3.0 / denom, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 1.0 / denom, epsilon = 1e-15);
        assert_abs_diff_eq!(w[3], b / denom, epsilon = 1e-15);

        // Occupancies (2,1) with discount 0.5, concentration 1.
        let w = predictive_weights(&[2, 1], &params(0.5, 1.0)).unwrap();
        assert_abs_diff_eq!(w[0], 1.5 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.5 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[2], 2.0 / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_table_forces_first_block() {
        let w = predictive_weights(&[], &params(0.3, 0.7)).unwrap();
        assert_eq!(w.len(), 1);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn predictive_weights_sum_to_one() {
        let cases: &[(&[usize], f64, f64)] = &[
            (&[1], 0.0, 0.5),
            (&[4, 3, 1], 0.5, 2.0),
            (&[10, 10, 10, 10], 0.8, 0.5),
            (&[7], 0.2, 5.0),
        ];
        for &(sizes, a, b) in cases {
            let w = predictive_weights(sizes, &params(a, b)).unwrap();
            let sum: f64 = w.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn predictive_weights_reject_empty_blocks() {
        assert!(predictive_weights(&[2, 0, 1], &params(0.0, 1.0)).is_err());
    }

    #[test]
    fn eppf_two_and_three_element_values() {
        // Two elements in one block, no discount, concentration 1: prob 1/2.
        let p = Partition::single_block(2);
        assert_abs_diff_eq!(
            eppf_log_prob(&p, &params(0.0, 1.0)),
            0.5f64.ln(),
            epsilon = 1e-12
        );
        // Three singletons, same parameters: prob b^2/((b+1)(b+2)) = 1/6.
        let p = Partition::singletons(3);
        assert_abs_diff_eq!(
            eppf_log_prob(&p, &params(0.0, 1.0)),
            (1.0f64 / 6.0).ln(),
            epsilon = 1e-12
        );
        // Two in one block with discount: (1-a)/(b+1).
        let p = Partition::single_block(2);
        assert_abs_diff_eq!(
            eppf_log_prob(&p, &params(0.5, 1.0)),
            0.25f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn eppf_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pars = params(0.4, 1.7);
        for _ in 0..50 {
            let p = sample_partition(7, &pars, &mut rng);
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..7).collect();
            perm.shuffle(&mut rng);
            let q = p.permuted(&perm);
            assert_abs_diff_eq!(
                eppf_log_prob(&p, &pars),
                eppf_log_prob(&q, &pars),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn eppf_normalizes_over_all_partitions() {
        for &(a, b) in &[(0.0, 1.0), (0.5, 0.5), (0.8, 2.0), (0.0, 0.1)] {
            let pars = params(a, b);
            for n in 1..=8 {
                let total: f64 = all_partitions(n)
                    .iter()
                    .map(|ls| eppf_log_prob(&Partition::from_labels(ls), &pars).exp())
                    .sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
            }
        }
    }

    /// Log probability of seating a given partition along a given insertion
    /// order, accumulated from predictive_weights. Independent of
    /// eppf_log_prob's Gamma-function route.
    pub(crate) fn seating_path_log_prob(
        partition: &Partition,
        order: &[usize],
        params: &PitmanYorParams,
    ) -> f64 {
        let mut lp = 0.0;
        let mut block_to_seat: HashMap<usize, usize> = HashMap::new();
        let mut sizes: Vec<usize> = Vec::new();
        for &el in order {
            let w = predictive_weights(&sizes, params).unwrap();
            let target = partition.block_of(el);
            match block_to_seat.get(&target) {
                Some(&k) => {
                    lp += w[k].ln();
                    sizes[k] += 1;
                }
                None => {
                    lp += w[sizes.len()].ln();
                    block_to_seat.insert(target, sizes.len());
                    sizes.push(1);
                }
            }
        }
        lp
    }

    #[test]
    fn seating_path_product_equals_eppf() {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let a = rng.random::<f64>() * 0.9;
            let b = rng.random::<f64>() * 4.0 + 0.05;
            let pars = params(a, b);
            let n = rng.random_range(1..=8);
            let p = sample_partition(n, &pars, &mut rng);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let lp = seating_path_log_prob(&p, &order, &pars);
            assert_abs_diff_eq!(lp, eppf_log_prob(&p, &pars), epsilon = 1e-10);
        }
    }

    #[test]
    fn sampled_partition_frequencies_match_eppf() {
        // n=4, discount 0.5, concentration 1: compare against the 15 exact
        // probabilities with a 4-sigma binomial allowance per partition.
        let pars = params(0.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 200_000usize;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..reps {
            let p = sample_partition(4, &pars, &mut rng);
            *counts.entry(p.labels().to_vec()).or_insert(0) += 1;
        }
        for ls in all_partitions(4) {
            let p = Partition::from_labels(&ls);
            let prob = eppf_log_prob(&p, &pars).exp();
            let freq = *counts.get(&ls).unwrap_or(&0) as f64 / reps as f64;
            let se = (prob * (1.0 - prob) / reps as f64).sqrt();
            assert!(
                (freq - prob).abs() <= 4.0 * se,
                "partition {ls:?}: freq {freq} vs prob {prob} (se {se})"
            );
        }
    }

    #[test]
    fn single_element_partition_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_partition(1, &params(0.3, 2.0), &mut rng);
        assert_eq!(p.labels(), &[0]);
        assert_eq!(sample_faction_sizes(1, &params(0.3, 2.0), &mut rng), vec![1]);
    }

    #[test]
    fn co_cluster_prob_values() {
        assert_abs_diff_eq!(co_cluster_prob(&params(0.0, 1.0)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            co_cluster_prob(&params(0.5, 0.5)),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        // Discount near 1 kills ties.
        assert!(co_cluster_prob(&params(0.999, 1.0)) < 1e-3);
    }

    #[test]
    fn triple_patterns_sum_to_one_and_match_hand_values() {
        for &(a, b) in &[(0.0, 1.0), (0.5, 0.5), (0.8, 3.0), (0.2, 0.1)] {
            let t = triple_pattern_probs(&params(a, b));
            assert_abs_diff_eq!(
                t.all_same + 3.0 * t.one_pair + t.all_distinct,
                1.0,
                epsilon = 1e-12
            );
        }
        let t = triple_pattern_probs(&params(0.0, 1.0));
        assert_abs_diff_eq!(t.all_same, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.one_pair, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.all_distinct, 1.0 / 6.0, epsilon = 1e-15);
        // Tiny concentration, no discount: everything lands in one block.
        let t = triple_pattern_probs(&params(0.0, 1e-9));
        assert!(t.all_same > 0.999_999);
    }

    #[test]
    fn triple_patterns_match_sampled_frequencies() {
        let pars = params(0.3, 1.2);
        let t = triple_pattern_probs(&pars);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let reps = 100_000usize;
        let (mut same, mut pair01, mut distinct) = (0usize, 0usize, 0usize);
        for _ in 0..reps {
            let p = sample_partition(3, &pars, &mut rng);
            match p.num_blocks() {
                1 => same += 1,
                3 => distinct += 1,
                _ => {
                    if p.same_block(0, 1) {
                        pair01 += 1;
                    }
                }
            }
        }
        let check = |count: usize, prob: f64, what: &str| {
            let freq = count as f64 / reps as f64;
            let se = (prob * (1.0 - prob) / reps as f64).sqrt();
            assert!(
                (freq - prob).abs() <= 4.0 * se,
                "{what}: freq {freq} vs prob {prob}"
            );
        };
        check(same, t.all_same, "all same");
        check(pair01, t.one_pair, "pair {0,1} only");
        check(distinct, t.all_distinct, "all distinct");
    }

    #[test]
    fn occupancy_second_moment_identity() {
        // (1/n) E[sum m_l^2] = 1 + (n-1)(1-a)/(b+1).
        let pars = params(0.2, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for &n in &[3usize, 10, 25] {
            let reps = 40_000usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..reps {
                let sizes = sample_faction_sizes(n, &pars, &mut rng);
                let v: f64 =
                    sizes.iter().map(|&m| (m * m) as f64).sum::<f64>() / n as f64;
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / reps as f64;
            let var = (sumsq / reps as f64 - mean * mean).max(0.0);
            let se = (var / reps as f64).sqrt();
            let expected = 1.0 + (n as f64 - 1.0) * (1.0 - 0.2) / (0.5 + 1.0);
            assert!(
                (mean - expected).abs() <= 4.0 * se.max(1e-12),
                "n={n}: mean {mean} vs expected {expected} (se {se})"
            );
        }
    }

    #[test]
    fn expected_cluster_count_small_case_and_asymptotic() {
        // n=3, no discount, concentration 2: exact E(K) = sum over the five
        // partitions, which telescopes to 2/2 + 2/3 + 2/4 = 13/6.
        let pars = params(0.0, 2.0);
        let exact: f64 = all_partitions(3)
            .iter()
            .map(|ls| {
                let p = Partition::from_labels(ls);
                p.num_blocks() as f64 * eppf_log_prob(&p, &pars).exp()
            })
            .sum();
        assert_abs_diff_eq!(exact, 13.0 / 6.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = expected_num_clusters(3, &pars, 60_000, &mut rng);
        assert!((est - exact).abs() < 0.02, "estimate {est} vs exact {exact}");

        // Large n, no discount: exactly sum_{i<n} b/(b+i), and roughly
        // b*log((b+n)/b) (the log form sits about Euler-Mascheroni*b low).
        let pars = params(0.0, 1.0);
        let est = expected_num_clusters(100, &pars, 20_000, &mut rng);
        let exact: f64 = (0..100).map(|i| 1.0 / (1.0 + i as f64)).sum();
        assert!((est - exact).abs() < 0.05, "estimate {est} vs exact {exact}");
        let coarse = 1.0 * (101.0f64 / 1.0).ln();
        assert!((exact - coarse).abs() < 0.6);
    }
}
