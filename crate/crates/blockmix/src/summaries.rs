//! Posterior summaries computed from traces: co-clustering incidence
//! matrices, a loss-based point estimate for partitions, and per-sample
//! assortativity of the sampled kernel hyperparameters.

use crate::analytics::{assortativity_index, BlockDist};
use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::network::NetworkCollection;
use crate::partition::Partition;
use crate::trace::Trace;

/// Symmetric matrix of pairwise co-clustering probabilities with a unit
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl IncidenceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("incidence matrix has no rows".into()));
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "incidence row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let m = IncidenceMatrix { n, values };
        for i in 0..n {
            if m.get(i, i) != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "incidence diagonal entry ({i}, {i}) is {}, expected 1",
                    m.get(i, i)
                )));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "incidence entry ({i}, {j}) is {v}, outside [0, 1]"
                    )));
                }
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::InvalidParameter(format!(
                        "incidence entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Average the co-membership indicators of `parts` (one partition per
    /// retained sample).
    fn from_partitions<'a>(parts: impl Iterator<Item = &'a [usize]>, n: usize) -> Result<Self> {
        let mut counts = vec![0u64; n * n];
        let mut total = 0u64;
        for labels in parts {
            if labels.len() != n {
                return Err(Error::InvalidStats(format!(
                    "sample partition covers {} items, expected {n}",
                    labels.len()
                )));
            }
            total += 1;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] == labels[j] {
                        counts[i * n + j] += 1;
                    }
                }
            }
        }
        if total == 0 {
            return Err(Error::EmptyInput("trace has no samples".into()));
        }
        let values = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(IncidenceMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Fraction of retained samples in which each pair of networks shares a
/// cluster.
pub fn network_incidence(trace: &Trace) -> Result<IncidenceMatrix> {
    let n = trace
        .samples
        .first()
        .ok_or_else(|| Error::EmptyInput("trace has no samples".into()))?
        .zeta
        .len();
    IncidenceMatrix::from_partitions(trace.samples.iter().map(|s| s.zeta.as_slice()), n)
}

/// Fraction of retained samples in which each pair of actors shares a
/// faction, as seen by network `j`: each sample contributes the faction
/// partition of the cluster that network belongs to in that sample.
pub fn actor_incidence(trace: &Trace, j: usize) -> Result<IncidenceMatrix> {
    let first = trace
        .samples
        .first()
        .ok_or_else(|| Error::EmptyInput("trace has no samples".into()))?;
    if j >= first.zeta.len() {
        return Err(Error::InvalidParameter(format!(
            "network index {j} out of range for {} networks",
            first.zeta.len()
        )));
    }
    let n = first.xi[first.zeta[j]].len();
    IncidenceMatrix::from_partitions(
        trace.samples.iter().map(|s| s.xi[s.zeta[j]].as_slice()),
        n,
    )
}

fn score(incidence: &IncidenceMatrix, part: &Partition, threshold: f64) -> f64 {
    let mut u = 0.0;
    for i in 0..part.len() {
        for j in (i + 1)..part.len() {
            if part.same_block(i, j) {
                u += incidence.get(i, j) - threshold;
            }
        }
    }
    u
}

/// Agglomerative path from singletons to one cluster, always taking the
/// merge with the largest score gain. Every intermediate partition is a
/// candidate; the caller scores them all, so even locally greedy steps
/// cannot lock in a bad estimate.
fn greedy_merge_path(incidence: &IncidenceMatrix, threshold: f64) -> Vec<Partition> {
    let n = incidence.n();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut path = Vec::new();
    while clusters.len() > 1 {
        let mut best = (0usize, 1usize, f64::NEG_INFINITY);
        for x in 0..clusters.len() {
            for y in (x + 1)..clusters.len() {
                let mut gain = 0.0;
                for &i in &clusters[x] {
                    for &j in &clusters[y] {
                        gain += incidence.get(i, j) - threshold;
                    }
                }
                if gain > best.2 {
                    best = (x, y, gain);
                }
            }
        }
        let absorbed = clusters.swap_remove(best.1);
        clusters[best.0].extend(absorbed);
        let mut labels = vec![0usize; n];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        path.push(Partition::from_labels(&labels));
    }
    path
}

/// Point estimate of a partition from its incidence matrix: the candidate
/// maximizing the pairwise score sum(P_ij - b/(a+b)) over co-clustered
/// pairs. Candidates are the singleton and one-cluster partitions, the
/// greedy merge path, and any extras supplied by the caller (typically
/// distinct sampled partitions). Score ties go to fewer blocks, then to
/// the lexicographically smallest canonical labels. Returns the winner and
/// its attained score.
pub fn point_estimate(
    incidence: &IncidenceMatrix,
    a: f64,
    b: f64,
    extra_candidates: &[Partition],
) -> Result<(Partition, f64)> {
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 || a + b <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "loss weights must be nonnegative with a positive sum, got a={a}, b={b}"
        )));
    }
    let n = incidence.n();
    let threshold = b / (a + b);
    // Degenerate weights admit closed-form winners: with no penalty for
    // false joins everything merges, with no reward nothing does.
    if b == 0.0 {
        let part = Partition::single_block(n);
        let u = score(incidence, &part, threshold);
        return Ok((part, u));
    }
    if a == 0.0 {
        return Ok((Partition::singletons(n), 0.0));
    }

    let mut candidates = vec![Partition::singletons(n), Partition::single_block(n)];
    candidates.extend(greedy_merge_path(incidence, threshold));
    for cand in extra_candidates {
        if cand.len() != n {
            return Err(Error::PartitionMismatch(format!(
                "candidate covers {} items, incidence covers {n}",
                cand.len()
            )));
        }
        candidates.push(cand.clone());
    }
    candidates.sort_unstable();
    candidates.dedup();

    let mut best: Option<(Partition, f64)> = None;
    for cand in candidates {
        let u = score(incidence, &cand, threshold);
        let take = match &best {
            None => true,
            Some((bp, bu)) => {
                if u > bu + 1e-9 {
                    true
                } else if u < bu - 1e-9 {
                    false
                } else {
                    (cand.num_blocks(), cand.labels()) < (bp.num_blocks(), bp.labels())
                }
            }
        };
        if take {
            best = Some((cand, u));
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// Assortativity of network `j` in every retained sample: the log ratio of
/// the within-faction to between-faction prior mean under that sample's
/// kernel hyperparameters.
pub fn posterior_assortativity(
    trace: &Trace,
    collection: &NetworkCollection,
    j: usize,
) -> Result<Vec<f64>> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyInput("trace has no samples".into()));
    }
    if j >= collection.n_networks() {
        return Err(Error::InvalidParameter(format!(
            "network index {j} out of range for {} networks",
            collection.n_networks()
        )));
    }
    let family = collection.kernel(j).family;
    trace
        .samples
        .iter()
        .map(|s| {
            let get = |key: String| {
                s.hyper.get(&key).copied().ok_or_else(|| {
                    Error::InvalidStats(format!(
                        "trace sample {} lacks hyper record {key}",
                        s.iter
                    ))
                })
            };
            let dist = |a: f64, b: f64| match family {
                KernelFamily::BernoulliBeta => BlockDist::Beta { a, b },
                KernelFamily::PoissonGamma => BlockDist::Gamma { shape: a, rate: b },
            };
            let diag = dist(get(format!("net{j}.diag.a"))?, get(format!("net{j}.diag.b"))?);
            let off = dist(get(format!("net{j}.off.a"))?, get(format!("net{j}.off.b"))?);
            Ok(assortativity_index(&diag, &off))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{TraceMeta, TraceSample};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn meta() -> TraceMeta {
        TraceMeta {
            seed: 0,
            config_digest: "d".into(),
            tool_version: "v".into(),
            chain: 0,
        }
    }

    fn sample(iter: u64, zeta: Vec<usize>, xi: Vec<Vec<usize>>) -> TraceSample {
        TraceSample {
            iter,
            zeta,
            xi,
            hyper: BTreeMap::new(),
            log_post: 0.0,
        }
    }

    #[test]
    fn incidence_matrix_validation() {
        assert!(IncidenceMatrix::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).is_ok());
        assert!(IncidenceMatrix::new(vec![]).is_err());
        assert!(IncidenceMatrix::new(vec![vec![1.0, 0.5]]).is_err());
        assert!(IncidenceMatrix::new(vec![vec![0.9, 0.5], vec![0.5, 1.0]]).is_err());
        assert!(IncidenceMatrix::new(vec![vec![1.0, 1.5], vec![1.5, 1.0]]).is_err());
        assert!(IncidenceMatrix::new(vec![vec![1.0, 0.4], vec![0.5, 1.0]]).is_err());
    }

    #[test]
    fn network_incidence_counts_shared_clusters() {
        let trace = Trace {
            meta: meta(),
            samples: vec![
                sample(1, vec![0, 0, 1], vec![vec![0], vec![0]]),
                sample(2, vec![0, 1, 1], vec![vec![0], vec![0]]),
                sample(3, vec![0, 0, 0], vec![vec![0]]),
                sample(4, vec![0, 1, 2], vec![vec![0], vec![0], vec![0]]),
            ],
        };
        let inc = network_incidence(&trace).unwrap();
        assert_eq!(inc.n(), 3);
        assert_abs_diff_eq!(inc.get(0, 1), 0.5);
        assert_abs_diff_eq!(inc.get(1, 2), 0.5);
        assert_abs_diff_eq!(inc.get(0, 2), 0.25);
        assert_abs_diff_eq!(inc.get(2, 2), 1.0);
        assert_abs_diff_eq!(inc.get(1, 0), inc.get(0, 1));

        let empty = Trace { meta: meta(), samples: vec![] };
        assert!(network_incidence(&empty).is_err());
    }

    #[test]
    fn actor_incidence_follows_the_network_cluster() {
        // Network 1 moves between clusters whose faction partitions
        // disagree, so its actor incidence mixes the two.
        let trace = Trace {
            meta: meta(),
            samples: vec![
                sample(1, vec![0, 0], vec![vec![0, 0, 1]]),
                sample(2, vec![0, 1], vec![vec![0, 0, 1], vec![0, 1, 1]]),
            ],
        };
        let inc = actor_incidence(&trace, 1).unwrap();
        assert_abs_diff_eq!(inc.get(0, 1), 0.5);
        assert_abs_diff_eq!(inc.get(1, 2), 0.5);
        assert_abs_diff_eq!(inc.get(0, 2), 0.0);
        assert!(actor_incidence(&trace, 2).is_err());
    }

    fn two_block_incidence() -> IncidenceMatrix {
        let mut rows = vec![vec![0.1; 4]; 4];
        for i in 0..4 {
            rows[i][i] = 1.0;
        }
        for (i, j) in [(0, 1), (2, 3)] {
            rows[i][j] = 0.9;
            rows[j][i] = 0.9;
        }
        IncidenceMatrix::new(rows).unwrap()
    }

    fn all_partitions(n: usize) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut labels = vec![0usize; n];
        loop {
            out.push(Partition::from_labels(&labels));
            let mut i = n;
            loop {
                if i == 1 {
                    return out;
                }
                i -= 1;
                let cap = labels[..i].iter().copied().max().unwrap() + 1;
                if labels[i] < cap {
                    labels[i] += 1;
                    for l in labels.iter_mut().skip(i + 1) {
                        *l = 0;
                    }
                    break;
                }
                labels[i] = 0;
            }
        }
    }

    #[test]
    fn point_estimate_matches_exhaustive_search() {
        let inc = two_block_incidence();
        let (part, u) = point_estimate(&inc, 1.0, 1.0, &[]).unwrap();
        assert_eq!(part, Partition::from_labels(&[0, 0, 1, 1]));
        // Two pairs at 0.9 against threshold 0.5.
        assert_abs_diff_eq!(u, 0.8, epsilon = 1e-12);

        // The greedy path alone already beats or ties every partition.
        let best_u = all_partitions(4)
            .iter()
            .map(|p| score(&inc, p, 0.5))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(u, best_u, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_weights_take_their_closed_forms() {
        let inc = two_block_incidence();
        let (single, _) = point_estimate(&inc, 1.0, 0.0, &[]).unwrap();
        assert_eq!(single, Partition::single_block(4));
        let (loners, u) = point_estimate(&inc, 0.0, 1.0, &[]).unwrap();
        assert_eq!(loners, Partition::singletons(4));
        assert_abs_diff_eq!(u, 0.0);
        assert!(point_estimate(&inc, 0.0, 0.0, &[]).is_err());
        assert!(point_estimate(&inc, -1.0, 2.0, &[]).is_err());
    }

    #[test]
    fn certain_incidence_with_cheap_joins_merges_everyone() {
        let rows = vec![vec![1.0; 3]; 3];
        let inc = IncidenceMatrix::new(rows).unwrap();
        // b < a, so the join threshold is below 1 and every pair is worth
        // joining.
        let (part, u) = point_estimate(&inc, 1.0, 0.5, &[]).unwrap();
        assert_eq!(part, Partition::single_block(3));
        assert_abs_diff_eq!(u, 3.0 * (1.0 - 1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn exact_ties_prefer_fewer_blocks() {
        // Every off-diagonal entry sits exactly at the threshold, so all
        // partitions score zero and the single cluster (fewest blocks)
        // must win.
        let mut rows = vec![vec![0.5; 3]; 3];
        for i in 0..3 {
            rows[i][i] = 1.0;
        }
        let inc = IncidenceMatrix::new(rows).unwrap();
        let (part, u) = point_estimate(&inc, 1.0, 1.0, &[]).unwrap();
        assert_eq!(part, Partition::single_block(3));
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn candidate_labeling_does_not_matter() {
        let inc = two_block_incidence();
        let relabeled = Partition::from_labels(&[1, 1, 0, 0]);
        let (with_extra, u1) = point_estimate(&inc, 1.0, 1.0, &[relabeled]).unwrap();
        let (without, u2) = point_estimate(&inc, 1.0, 1.0, &[]).unwrap();
        assert_eq!(with_extra, without);
        assert_abs_diff_eq!(u1, u2);
    }

    #[test]
    fn assortativity_reads_sampled_kernels() {
        use crate::kernels::KernelSpec;
        use crate::network::{Family, Network};

        let net = Network::new(vec![vec![0, 0], vec![0, 0]], false, true, Family::Binary)
            .unwrap();
        let collection = NetworkCollection::new(
            vec![net],
            vec![KernelSpec::default_for(Family::Binary)],
            None,
        )
        .unwrap();

        let mut hyper = BTreeMap::new();
        hyper.insert("net0.diag.a".to_string(), 4.0);
        hyper.insert("net0.diag.b".to_string(), 1.0);
        hyper.insert("net0.off.a".to_string(), 1.0);
        hyper.insert("net0.off.b".to_string(), 4.0);
        let mut s = sample(1, vec![0], vec![vec![0, 0]]);
        s.hyper = hyper.clone();
        let trace = Trace { meta: meta(), samples: vec![s] };
        let ups = posterior_assortativity(&trace, &collection, 0).unwrap();
        assert_abs_diff_eq!(ups[0], 4.0f64.ln(), epsilon = 1e-12);

        // Matching pairs give exactly zero.
        hyper.insert("net0.off.a".to_string(), 4.0);
        hyper.insert("net0.off.b".to_string(), 1.0);
        let mut s = sample(1, vec![0], vec![vec![0, 0]]);
        s.hyper = hyper.clone();
        let trace = Trace { meta: meta(), samples: vec![s] };
        assert_eq!(posterior_assortativity(&trace, &collection, 0).unwrap()[0], 0.0);

        // A missing record is an error, as is an out-of-range network.
        hyper.remove("net0.diag.a");
        let mut s = sample(1, vec![0], vec![vec![0, 0]]);
        s.hyper = hyper;
        let trace_bad = Trace { meta: meta(), samples: vec![s] };
        assert!(posterior_assortativity(&trace_bad, &collection, 0).is_err());
        assert!(posterior_assortativity(&trace, &collection, 1).is_err());
    }
}
