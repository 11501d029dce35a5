//! Prior analytics and simulation.
//!
//! Closed-form network summaries induced by the faction prior together with
//! the block kernels: marginal link probability, degree mean and variance,
//! in/out-degree correlation, transitivity, assortativity, and a Monte Carlo
//! degree moment generating function. Also the prior-predictive network
//! simulator and the replicated property studies built on it.
//!
//! These functions work with [`BlockDist`], which covers the conjugate Beta
//! and Gamma priors plus degenerate point masses. Point masses have no
//! conjugate-inference counterpart but are essential for study designs where
//! the block parameters are pinned.

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, ThetaMatrix};
use crate::network::{clustering_coefficient, degree_sequence, DegreeSequence, Family, Network};
use crate::partition::Partition;
use crate::pyp::{self, PitmanYorParams};
use crate::rng::stream_rng;

/// Prior on a single block parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum BlockDist {
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, rate: f64 },
    Point { value: f64 },
}

impl BlockDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BlockDist::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            BlockDist::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            BlockDist::Point { value } => value >= 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid block distribution {self:?}"
            )))
        }
    }

    /// Raw moment E[theta^order]; order 0 is rejected rather than returning
    /// the trivial 1 so callers cannot mask an off-by-one.
    pub fn moment(&self, order: u32) -> Result<f64> {
        if order == 0 {
            return Err(Error::InvalidParameter("unsupported moment order 0".into()));
        }
        self.validate()?;
        Ok(match *self {
            BlockDist::Beta { a, b } => (0..order)
                .map(|r| (a + r as f64) / (a + b + r as f64))
                .product(),
            BlockDist::Gamma { shape, rate } => {
                (0..order).map(|r| (shape + r as f64) / rate).product()
            }
            BlockDist::Point { value } => value.powi(order as i32),
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BlockDist::Beta { a, b } => a / (a + b),
            BlockDist::Gamma { shape, rate } => shape / rate,
            BlockDist::Point { value } => value,
        }
    }

    /// Whether draws are guaranteed to lie in [0,1] and can parameterize a
    /// Bernoulli dyad.
    pub fn binary_compatible(&self) -> bool {
        match *self {
            BlockDist::Beta { .. } => true,
            BlockDist::Gamma { .. } => false,
            BlockDist::Point { value } => (0.0..=1.0).contains(&value),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            BlockDist::Beta { a, b } => rand_distr::Beta::new(a, b)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng),
            BlockDist::Gamma { shape, rate } => rand_distr::Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng),
            BlockDist::Point { value } => value,
        })
    }
}

/// Block-parameter priors for one network: a distribution for within-faction
/// blocks and one for between-faction blocks, plus the dyad family they
/// parameterize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeKernel {
    pub family: Family,
    pub diag: BlockDist,
    pub offdiag: BlockDist,
}

impl GenerativeKernel {
    pub fn new(family: Family, diag: BlockDist, offdiag: BlockDist) -> Result<Self> {
        let k = GenerativeKernel {
            family,
            diag,
            offdiag,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        self.diag.validate()?;
        self.offdiag.validate()?;
        if self.family == Family::Binary
            && !(self.diag.binary_compatible() && self.offdiag.binary_compatible())
        {
            return Err(Error::FamilyMismatch(
                "binary dyads need block parameters confined to [0,1]".into(),
            ));
        }
        Ok(())
    }

    fn require_binary(&self) -> Result<()> {
        if self.family != Family::Binary {
            return Err(Error::FamilyMismatch(
                "this summary is a probability statement and needs a binary kernel".into(),
            ));
        }
        Ok(())
    }

    pub fn dist_for(&self, diagonal: bool) -> &BlockDist {
        if diagonal {
            &self.diag
        } else {
            &self.offdiag
        }
    }
}

impl From<&KernelSpec> for GenerativeKernel {
    fn from(spec: &KernelSpec) -> Self {
        let conv = |p: &crate::kernels::HyperPair| match spec.family {
            KernelFamily::BernoulliBeta => BlockDist::Beta { a: p.a, b: p.b },
            KernelFamily::PoissonGamma => BlockDist::Gamma {
                shape: p.a,
                rate: p.b,
            },
        };
        GenerativeKernel {
            family: match spec.family {
                KernelFamily::BernoulliBeta => Family::Binary,
                KernelFamily::PoissonGamma => Family::Count,
            },
            diag: conv(&spec.diag),
            offdiag: conv(&spec.offdiag),
        }
    }
}

/// Probability that two distinct actors share a faction a priori.
fn co_faction_prob(params: &PitmanYorParams) -> f64 {
    pyp::co_cluster_prob(params)
}

/// Marginal probability of a link between two distinct actors, mixing the
/// within- and between-faction means over whether the pair shares a faction.
pub fn marginal_link_prob(params: &PitmanYorParams, kernel: &GenerativeKernel) -> Result<f64> {
    kernel.require_binary()?;
    let c = co_faction_prob(params);
    Ok(c * kernel.diag.moment(1)? + (1.0 - c) * kernel.offdiag.moment(1)?)
}

/// Mean and variance of one actor's degree in a binary undirected network
/// with `n_actors` actors.
///
/// The variance decomposes over the actor's dyads: (I-1) identical per-dyad
/// variances plus (I-1)(I-2) identical covariances between dyads sharing the
/// actor, each assembled from faction triple patterns and block moments.
pub fn degree_moments(
    n_actors: usize,
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
) -> Result<(f64, f64)> {
    kernel.require_binary()?;
    if n_actors == 0 {
        return Err(Error::InvalidParameter(
            "degree moments need at least one actor".into(),
        ));
    }
    let theta_bar = marginal_link_prob(params, kernel)?;
    let i = n_actors as f64;
    let rho_bar = (i - 1.0) * theta_bar;
    let x = shared_actor_two_edge_prob(params, kernel)?;
    let kappa_bar = (i - 1.0) * theta_bar * (1.0 - theta_bar)
        + (i - 1.0) * (i - 2.0) * (x - theta_bar * theta_bar);
    Ok((rho_bar, kappa_bar))
}

/// Pr(y_ij = 1 and y_ih = 1) for three distinct actors: the two dyads share
/// actor i, so their block parameters are coupled through the faction
/// pattern of the triple.
fn shared_actor_two_edge_prob(
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
) -> Result<f64> {
    let pat = pyp::triple_pattern_probs(params);
    let d1 = kernel.diag.moment(1)?;
    let d2 = kernel.diag.moment(2)?;
    let o1 = kernel.offdiag.moment(1)?;
    let o2 = kernel.offdiag.moment(2)?;
    // All three actors together: both dyads sit in the same diagonal block.
    // If only j and h pair up, both dyads sit in the same off-diagonal
    // block; if i pairs with one of them, the blocks differ and the
    // parameters are independent. All distinct: independent off-diagonal.
    Ok(pat.all_same * d2
        + pat.one_pair * (o2 + 2.0 * d1 * o1)
        + pat.all_distinct * o1 * o1)
}

/// Correlation between the reciprocal dyads (y_ij, y_ji) of a binary
/// directed network, which equals the correlation between one actor's
/// in- and out-degrees.
pub fn inout_degree_correlation(
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
) -> Result<f64> {
    kernel.require_binary()?;
    let theta_bar = marginal_link_prob(params, kernel)?;
    let c = co_faction_prob(params);
    // Co-factioned pairs put both ordered dyads in the same diagonal block;
    // otherwise the two ordered blocks carry independent parameters.
    let both = c * kernel.diag.moment(2)?
        + (1.0 - c) * kernel.offdiag.moment(1)?.powi(2);
    let numer = both - theta_bar * theta_bar;
    let denom = theta_bar * (1.0 - theta_bar);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(numer / denom)
}

/// Prior probability that a triangle closes given that its other two edges
/// are present, in a binary undirected network.
pub fn transitivity_index(params: &PitmanYorParams, kernel: &GenerativeKernel) -> Result<f64> {
    kernel.require_binary()?;
    let pat = pyp::triple_pattern_probs(params);
    let d1 = kernel.diag.moment(1)?;
    let d3 = kernel.diag.moment(3)?;
    let o1 = kernel.offdiag.moment(1)?;
    let o2 = kernel.offdiag.moment(2)?;
    // All-same: the three dyads share one diagonal block. One pair: the
    // within-pair dyad is diagonal while the two cross dyads share a single
    // off-diagonal block, whichever actor sits apart. All-distinct: three
    // independent off-diagonal blocks.
    let numer = pat.all_same * d3
        + 3.0 * pat.one_pair * d1 * o2
        + pat.all_distinct * o1.powi(3);
    let denom = shared_actor_two_edge_prob(params, kernel)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(numer / denom)
}

/// Log-ratio of within- to between-faction mean interaction rates. Positive
/// values mean assortative mixing, negative disassortative.
pub fn assortativity_index(diag: &BlockDist, offdiag: &BlockDist) -> f64 {
    diag.mean().ln() - offdiag.mean().ln()
}

/// All closed-form prior summaries in one bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSummary {
    pub theta_bar: f64,
    pub rho_bar: f64,
    pub kappa_bar: f64,
    pub delta_bar: Option<f64>,
    pub chi_bar: f64,
    pub upsilon: f64,
}

pub fn prior_summary(
    n_actors: usize,
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
    directed: bool,
) -> Result<PriorSummary> {
    let theta_bar = marginal_link_prob(params, kernel)?;
    let (rho_bar, kappa_bar) = degree_moments(n_actors, params, kernel)?;
    let delta_bar = if directed {
        Some(inout_degree_correlation(params, kernel)?)
    } else {
        None
    };
    Ok(PriorSummary {
        theta_bar,
        rho_bar,
        kappa_bar,
        delta_bar,
        chi_bar: transitivity_index(params, kernel)?,
        upsilon: assortativity_index(&kernel.diag, &kernel.offdiag),
    })
}

/// Monte Carlo estimate (value, standard error) of E[exp(t * D_1)], the
/// moment generating function of a single actor's degree in a binary
/// undirected network.
///
/// Conditional on the faction sizes, the dyads of actor 1 group into one
/// diagonal block shared with its faction mates and one off-diagonal block
/// per other faction, so the conditional MGF is a product of polynomial
/// moments E[(1 + x*theta)^m] with x = e^t - 1. Those are evaluated exactly
/// with a recursive term ratio; only the faction sizes are sampled.
pub fn degree_mgf(
    t: f64,
    n_actors: usize,
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    kernel.require_binary()?;
    if n_actors == 0 || n_samples == 0 {
        return Err(Error::InvalidParameter(
            "degree MGF needs actors and a positive sample count".into(),
        ));
    }
    let x = t.exp() - 1.0;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n_samples {
        let sizes = pyp::sample_faction_sizes(n_actors, params, rng);
        // Actor 1 sits in the first faction in appearance order.
        let mut val = binomial_mixture_moment(sizes[0] - 1, x, &kernel.diag)?;
        for &m in &sizes[1..] {
            val *= binomial_mixture_moment(m, x, &kernel.offdiag)?;
        }
        sum += val;
        sumsq += val * val;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// E[(1 + x*theta)^m] under the given block distribution, expanded as
/// sum_s C(m,s) x^s E[theta^s] with successive terms built from the moment
/// ratio E[theta^s]/E[theta^(s-1)].
fn binomial_mixture_moment(m: usize, x: f64, dist: &BlockDist) -> Result<f64> {
    dist.validate()?;
    let mut total = 1.0;
    let mut term = 1.0;
    for s in 1..=m {
        let ratio = match *dist {
            BlockDist::Beta { a, b } => (a + s as f64 - 1.0) / (a + b + s as f64 - 1.0),
            BlockDist::Gamma { shape, rate } => (shape + s as f64 - 1.0) / rate,
            BlockDist::Point { value } => value,
        };
        term *= (m - s + 1) as f64 / s as f64 * x * ratio;
        total += term;
    }
    Ok(total)
}

/// Draw one network from the prior predictive: a faction partition, block
/// parameters, then dyads. Self-ties are structurally zero.
pub fn simulate_network(
    n_actors: usize,
    params: &PitmanYorParams,
    kernel: &GenerativeKernel,
    directed: bool,
    rng: &mut impl Rng,
) -> Result<(Network, Partition, ThetaMatrix)> {
    if n_actors == 0 {
        return Err(Error::InvalidParameter(
            "cannot simulate a network with no actors".into(),
        ));
    }
    let xi = pyp::sample_partition(n_actors, params, rng);
    let (net, theta) = simulate_network_given(&xi, kernel, directed, rng)?;
    Ok((net, xi, theta))
}

/// Like [`simulate_network`] but with the faction partition supplied, which
/// also serves grouped designs where several networks share a planted
/// partition.
pub fn simulate_network_given(
    xi: &Partition,
    kernel: &GenerativeKernel,
    directed: bool,
    rng: &mut impl Rng,
) -> Result<(Network, ThetaMatrix)> {
    kernel.validate()?;
    let n = xi.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cannot simulate a network with no actors".into(),
        ));
    }
    let blocks = xi.num_blocks();
    let mut draw_err = None;
    let theta = ThetaMatrix::from_fn(blocks, !directed, |k, l| {
        match kernel.dist_for(k == l).sample(rng) {
            Ok(v) => v,
            Err(e) => {
                draw_err.get_or_insert(e);
                0.0
            }
        }
    });
    if let Some(e) = draw_err {
        return Err(e);
    }

    let mut rows = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let th = theta.get(xi.block_of(i), xi.block_of(j));
            rows[i][j] = sample_dyad(kernel.family, th, rng)?;
            rows[j][i] = if directed {
                let back = theta.get(xi.block_of(j), xi.block_of(i));
                sample_dyad(kernel.family, back, rng)?
            } else {
                rows[i][j]
            };
        }
    }
    let net = Network::new(rows, directed, true, kernel.family)?;
    Ok((net, theta))
}

fn sample_dyad(family: Family, theta: f64, rng: &mut impl Rng) -> Result<u64> {
    match family {
        Family::Binary => {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::InvalidParameter(format!(
                    "binary dyad probability {theta} outside [0,1]"
                )));
            }
            Ok(u64::from(rng.random_bool(theta)))
        }
        Family::Count => {
            if theta == 0.0 {
                return Ok(0);
            }
            let d = rand_distr::Poisson::new(theta)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(d.sample(rng) as u64)
        }
    }
}

/// One cell of a replicated prior-predictive study: binary undirected
/// networks simulated under the given prior, plus a single-faction baseline
/// sharing the diagonal block distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyCell {
    pub label: String,
    pub params: PitmanYorParams,
    pub kernel: GenerativeKernel,
    pub n_actors: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub degree: u64,
    pub prob: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub n_actors: usize,
    pub replicates: usize,
    pub mean_degree: f64,
    pub mean_degree_se: f64,
    pub mean_clustering: f64,
    pub mean_clustering_se: f64,
    pub baseline_clustering: f64,
    pub baseline_clustering_se: f64,
    /// Pr(D >= k) for k = 0..n_actors-1, pooled over actors.
    pub survival: Vec<SurvivalPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub cells: Vec<CellSummary>,
}

struct Replicate {
    mean_degree: f64,
    survival: Vec<f64>,
    clustering: f64,
    baseline_clustering: f64,
}

/// Run every study cell, replicating independently with per-replicate RNG
/// streams derived from (seed, cell index, replicate index). Cells and
/// replicates execute in parallel but merge by index, so the report is a
/// pure function of its inputs.
pub fn property_study(cells: &[StudyCell], seed: u64) -> Result<StudyReport> {
    if cells.is_empty() {
        return Err(Error::InvalidConfig("property study needs cells".into()));
    }
    let summaries = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| run_cell(idx, cell, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport { cells: summaries })
}

fn run_cell(idx: usize, cell: &StudyCell, seed: u64) -> Result<CellSummary> {
    cell.kernel.validate()?;
    if cell.kernel.family != Family::Binary {
        return Err(Error::FamilyMismatch(
            "property studies are defined for binary undirected networks".into(),
        ));
    }
    if cell.replicates == 0 {
        return Err(Error::InvalidConfig(format!(
            "cell {:?} has zero replicates",
            cell.label
        )));
    }
    if cell.n_actors < 2 {
        return Err(Error::InvalidConfig(format!(
            "cell {:?} needs at least two actors",
            cell.label
        )));
    }

    let reps = (0..cell.replicates)
        .into_par_iter()
        .map(|r| -> Result<Replicate> {
            let mut rng = stream_rng(seed, &[idx as u64, r as u64]);
            let (net, _, _) =
                simulate_network(cell.n_actors, &cell.params, &cell.kernel, false, &mut rng)?;
            let degrees = match degree_sequence(&net) {
                DegreeSequence::Undirected(d) => d,
                DegreeSequence::Directed { .. } => unreachable!("simulated undirected"),
            };
            let i = cell.n_actors as f64;
            let mean_degree = degrees.iter().sum::<u64>() as f64 / i;
            let survival = (0..cell.n_actors as u64)
                .map(|k| degrees.iter().filter(|&&d| d >= k).count() as f64 / i)
                .collect();
            let clustering = clustering_coefficient(&net)?;

            let mut brng = stream_rng(seed, &[idx as u64, r as u64, 1]);
            let single = Partition::single_block(cell.n_actors);
            let (bnet, _) = simulate_network_given(&single, &cell.kernel, false, &mut brng)?;
            let baseline_clustering = clustering_coefficient(&bnet)?;
            Ok(Replicate {
                mean_degree,
                survival,
                clustering,
                baseline_clustering,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (mean_degree, mean_degree_se) = mean_se(reps.iter().map(|r| r.mean_degree));
    let (mean_clustering, mean_clustering_se) = mean_se(reps.iter().map(|r| r.clustering));
    let (baseline_clustering, baseline_clustering_se) =
        mean_se(reps.iter().map(|r| r.baseline_clustering));
    let survival = (0..cell.n_actors)
        .map(|k| {
            let (prob, se) = mean_se(reps.iter().map(|r| r.survival[k]));
            SurvivalPoint {
                degree: k as u64,
                prob,
                se,
            }
        })
        .collect();

    Ok(CellSummary {
        label: cell.label.clone(),
        n_actors: cell.n_actors,
        replicates: cell.replicates,
        mean_degree,
        mean_degree_se,
        mean_clustering,
        mean_clustering_se,
        baseline_clustering,
        baseline_clustering_se,
        survival,
    })
}

fn mean_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = values.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
