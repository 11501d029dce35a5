//! Conjugate observation kernels and collapsed block likelihoods.
//!
//! Binary dyads use a Bernoulli likelihood with a Beta prior on the block
//! probability; count dyads use a Poisson likelihood with a Gamma prior on
//! the block rate (rate parameterization: prior mean a/b). Both integrate in
//! closed form, so the marginal likelihood of a block of dyads, the
//! predictive of new dyads given old ones, and the posterior over the block
//! parameter are all exact. Every Beta/Gamma function is evaluated through
//! log-Gamma so blocks with thousands of dyads stay stable.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::network::{block_sufficient_stats, BlockObs, BlockStats, Family, Network};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    BernoulliBeta,
    PoissonGamma,
}

impl KernelFamily {
    pub fn matches(self, family: Family) -> bool {
        matches!(
            (self, family),
            (KernelFamily::BernoulliBeta, Family::Binary)
                | (KernelFamily::PoissonGamma, Family::Count)
        )
    }
}

/// A positive hyperparameter pair (a, b): Beta(a, b) for binary blocks,
/// Gamma(shape a, rate b) for count blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPair {
    pub a: f64,
    pub b: f64,
}

impl HyperPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = HyperPair { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.b.is_finite() || self.a <= 0.0 || self.b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hyperparameters must be positive and finite, got ({}, {})",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Kernel configuration for one network: the family plus separate
/// hyperparameter pairs for diagonal (within-faction) and off-diagonal
/// (between-faction) blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub diag: HyperPair,
    pub offdiag: HyperPair,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, diag: HyperPair, offdiag: HyperPair) -> Result<Self> {
        diag.validate()?;
        offdiag.validate()?;
        Ok(KernelSpec {
            family,
            diag,
            offdiag,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.diag.validate()?;
        self.offdiag.validate()
    }

    /// Uninformative default for a given data family: Beta(1,1) or
    /// Gamma(1, rate 1) on both block types.
    pub fn default_for(family: Family) -> Self {
        let pair = HyperPair { a: 1.0, b: 1.0 };
        KernelSpec {
            family: match family {
                Family::Binary => KernelFamily::BernoulliBeta,
                Family::Count => KernelFamily::PoissonGamma,
            },
            diag: pair,
            offdiag: pair,
        }
    }

    pub fn pair_for(&self, diagonal: bool) -> &HyperPair {
        if diagonal {
            &self.diag
        } else {
            &self.offdiag
        }
    }
}

/// Raw prior moment E[theta^s] of a block parameter, for any order s >= 1.
///
/// Beta(a, b): product over r < s of (a+r)/(a+b+r).
/// Gamma(a, rate b): product over r < s of (a+r)/b.
pub fn prior_moment(pair: &HyperPair, family: KernelFamily, order: u32) -> Result<f64> {
    if order == 0 {
        return Err(Error::InvalidParameter("unsupported moment order 0".into()));
    }
    pair.validate()?;
    let mut m = 1.0;
    for r in 0..order {
        let r = r as f64;
        m *= match family {
            KernelFamily::BernoulliBeta => (pair.a + r) / (pair.a + pair.b + r),
            KernelFamily::PoissonGamma => (pair.a + r) / pair.b,
        };
    }
    Ok(m)
}

/// Log marginal likelihood of one block of dyads with the parameter
/// integrated out. The empty block has marginal 1.
pub fn block_log_marginal(obs: &BlockObs, pair: &HyperPair, family: KernelFamily) -> Result<f64> {
    match family {
        KernelFamily::BernoulliBeta => {
            if obs.sum > obs.n {
                return Err(Error::InvalidStats(format!(
                    "binary block has sum {} > dyad count {}",
                    obs.sum, obs.n
                )));
            }
            let (n, s) = (obs.n as f64, obs.sum as f64);
            Ok(ln_beta(pair.a + s, pair.b + n - s) - ln_beta(pair.a, pair.b))
        }
        KernelFamily::PoissonGamma => {
            let (n, s) = (obs.n as f64, obs.sum as f64);
            Ok(ln_gamma(pair.a + s) - ln_gamma(pair.a) + pair.a * pair.b.ln()
                - (pair.a + s) * (pair.b + n).ln()
                - obs.log_fact)
        }
    }
}

/// Log predictive of new dyads given old dyads in the same block; by
/// definition the marginal of the union minus the marginal of the old.
pub fn block_log_predictive(
    new: &BlockObs,
    old: &BlockObs,
    pair: &HyperPair,
    family: KernelFamily,
) -> Result<f64> {
    let both = BlockObs::merged(*new, *old);
    Ok(block_log_marginal(&both, pair, family)? - block_log_marginal(old, pair, family)?)
}

/// Log marginal likelihood of a whole network given a faction partition:
/// the sum of block marginals, diagonal blocks under the diagonal
/// hyperparameters and off-diagonal blocks under the off-diagonal ones.
pub fn network_log_marginal(net: &Network, partition: &Partition, spec: &KernelSpec) -> Result<f64> {
    if !spec.family.matches(net.family()) {
        return Err(Error::FamilyMismatch(format!(
            "network family {} does not match kernel {:?}",
            net.family(),
            spec.family
        )));
    }
    let stats = block_sufficient_stats(net, partition)?;
    network_log_marginal_from_stats(&stats, spec)
}

/// Same as [`network_log_marginal`] but over precomputed block statistics.
pub fn network_log_marginal_from_stats(stats: &BlockStats, spec: &KernelSpec) -> Result<f64> {
    let mut total = 0.0;
    for (k, l, obs) in stats.blocks() {
        if obs.is_empty() {
            continue;
        }
        total += block_log_marginal(&obs, spec.pair_for(k == l), spec.family)?;
    }
    Ok(total)
}

/// Posterior draw of a block parameter given its dyad statistics:
/// Beta(a+s, b+n-s) or Gamma(a+s, rate b+n).
pub fn sample_theta_posterior(
    obs: &BlockObs,
    pair: &HyperPair,
    family: KernelFamily,
    rng: &mut impl Rng,
) -> Result<f64> {
    let (n, s) = (obs.n as f64, obs.sum as f64);
    match family {
        KernelFamily::BernoulliBeta => {
            if obs.sum > obs.n {
                return Err(Error::InvalidStats(format!(
                    "binary block has sum {} > dyad count {}",
                    obs.sum, obs.n
                )));
            }
            let d = rand_distr::Beta::new(pair.a + s, pair.b + n - s)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(d.sample(rng))
        }
        KernelFamily::PoissonGamma => {
            let d = rand_distr::Gamma::new(pair.a + s, 1.0 / (pair.b + n))
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(d.sample(rng))
        }
    }
}

/// Block parameter matrix for one network: K x K rates or probabilities,
/// symmetric when the network is undirected.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    num_blocks: usize,
    values: Vec<f64>,
}

impl ThetaMatrix {
    pub fn from_fn(num_blocks: usize, symmetric: bool, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; num_blocks * num_blocks];
        for k in 0..num_blocks {
            let start = if symmetric { k } else { 0 };
            for l in start..num_blocks {
                let v = f(k, l);
                values[k * num_blocks + l] = v;
                if symmetric {
                    values[l * num_blocks + k] = v;
                }
            }
        }
        ThetaMatrix { num_blocks, values }
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.num_blocks + l]
    }

    pub fn is_symmetric(&self) -> bool {
        for k in 0..self.num_blocks {
            for l in (k + 1)..self.num_blocks {
                if self.get(k, l) != self.get(l, k) {
                    return false;
                }
            }
        }
        true
    }
}
