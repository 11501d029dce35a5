//! Posterior sampler for the two-level clustering model.
//!
//! The chain state is a clustering of networks, one faction partition and
//! one partition-prior pair per cluster, and one kernel spec per network.
//! Block parameters are integrated out everywhere, so the likelihood only
//! enters through cached per-network log marginals. Updates are:
//!
//! * collapsed Gibbs on the network clustering, with proposed faction
//!   partitions for the "new cluster" option priced by their sequential
//!   allocation probability,
//! * a split-merge move on the clustering, accepted by Metropolis-Hastings
//!   with both directions priced through forced allocation replays,
//! * collapsed Gibbs on each cluster's faction partition,
//! * random-walk Metropolis on every hyperparameter marked as sampled.

mod seqalloc;
mod splitmerge;

pub use self::seqalloc::sequential_allocation;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    network_log_marginal, network_log_marginal_from_stats, sample_theta_posterior, KernelSpec,
    ThetaMatrix,
};
use crate::network::{block_sufficient_stats, BlockStats, NetworkCollection, UNSEATED};
use crate::partition::Partition;
use crate::pyp::{eppf_log_prob, PitmanYorParams};
use crate::rng::stream_rng;
use crate::trace::{Trace, TraceMeta, TraceSample};

use self::seqalloc::{
    allocate_with_permutation, forced_allocation_log_prob, sample_index, seat_weights,
};

/// Initial values for one partition-prior pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PypInit {
    pub discount: f64,
    pub concentration: f64,
}

impl Default for PypInit {
    fn default() -> Self {
        PypInit { discount: 0.0, concentration: 1.0 }
    }
}

impl PypInit {
    fn params(&self) -> Result<PitmanYorParams> {
        PitmanYorParams::new(self.discount, self.concentration)
    }
}

/// Which hyperparameters the chain treats as unknown. Anything switched
/// off stays at its initial value for the whole run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleFlags {
    pub clustering_discount: bool,
    pub clustering_concentration: bool,
    pub faction_discount: bool,
    pub faction_concentration: bool,
    pub kernels: bool,
}

impl Default for SampleFlags {
    fn default() -> Self {
        SampleFlags {
            clustering_discount: true,
            clustering_concentration: true,
            faction_discount: true,
            faction_concentration: true,
            kernels: true,
        }
    }
}

/// Random-walk step sizes. Discounts move on the raw scale, everything
/// else on the log scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSizes {
    pub discount: f64,
    pub concentration: f64,
    pub kernel: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes { discount: 0.1, concentration: 0.5, kernel: 0.5 }
    }
}

/// Hyperprior settings: discounts are uniform on [0, discount_max),
/// concentrations and kernel shape parameters get gamma priors with the
/// given shape and rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperPriors {
    pub discount_max: f64,
    pub concentration_shape: f64,
    pub concentration_rate: f64,
    pub kernel_shape: f64,
    pub kernel_rate: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        HyperPriors {
            discount_max: 0.95,
            concentration_shape: 1.0,
            concentration_rate: 0.5,
            kernel_shape: 1.0,
            kernel_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub zeta_scans: u32,
    pub xi_scans: u32,
    pub split_merge_attempts: u32,
    pub scan_sweeps: u32,
    pub init_clustering: PypInit,
    pub init_factions: PypInit,
    pub sample: SampleFlags,
    pub steps: StepSizes,
    pub hyperpriors: HyperPriors,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 2000,
            burn_in: 1000,
            thinning: 1,
            seed: 0,
            zeta_scans: 1,
            xi_scans: 1,
            split_merge_attempts: 1,
            scan_sweeps: 0,
            init_clustering: PypInit::default(),
            init_factions: PypInit::default(),
            sample: SampleFlags::default(),
            steps: StepSizes::default(),
            hyperpriors: HyperPriors::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidConfig(
                "burn_in must be smaller than iterations".into(),
            ));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        self.init_clustering.params()?;
        self.init_factions.params()?;
        let h = &self.hyperpriors;
        if !(h.discount_max > 0.0 && h.discount_max <= 1.0) {
            return Err(Error::InvalidConfig(
                "discount_max must lie in (0, 1]".into(),
            ));
        }
        for (name, v) in [
            ("concentration_shape", h.concentration_shape),
            ("concentration_rate", h.concentration_rate),
            ("kernel_shape", h.kernel_shape),
            ("kernel_rate", h.kernel_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let s = &self.steps;
        for (name, v) in [
            ("discount", s.discount),
            ("concentration", s.concentration),
            ("kernel", s.kernel),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "step size {name} must be positive"
                )));
            }
        }
        if self.sample.clustering_discount && self.init_clustering.discount >= h.discount_max {
            return Err(Error::InvalidConfig(
                "initial clustering discount lies outside its hyperprior support".into(),
            ));
        }
        if self.sample.faction_discount && self.init_factions.discount >= h.discount_max {
            return Err(Error::InvalidConfig(
                "initial faction discount lies outside its hyperprior support".into(),
            ));
        }
        Ok(())
    }
}

/// One cluster of networks: the faction partition its members share and
/// the partition-prior pair attached to it.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub factions: Partition,
    pub prior: PitmanYorParams,
}

#[derive(Debug, Clone)]
struct NetCache {
    stats: BlockStats,
    log_marg: f64,
}

/// Full sampler state. Fields stay private so every mutation goes through
/// updates that keep the caches consistent.
#[derive(Debug, Clone)]
pub struct McmcState {
    clustering: Partition,
    clusters: Vec<ClusterState>,
    clustering_prior: PitmanYorParams,
    kernels: Vec<KernelSpec>,
    nets: Vec<NetCache>,
    faction_init: PitmanYorParams,
    flags: SampleFlags,
    steps: StepSizes,
    priors: HyperPriors,
    scan_sweeps: u32,
}

fn gamma_lpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * x.ln()
        - rate * x
}

fn uniform_lpdf(x: f64, max: f64) -> f64 {
    if (0.0..max).contains(&x) {
        -max.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn mh_accept(log_ratio: f64, rng: &mut impl Rng) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp()
}

impl McmcState {
    pub fn init(collection: &NetworkCollection, config: &McmcConfig) -> Result<Self> {
        config.validate()?;
        let n_nets = collection.n_networks();
        let factions = Partition::single_block(collection.n_actors());
        let clusters = vec![ClusterState {
            factions: factions.clone(),
            prior: config.init_factions.params()?,
        }];
        let kernels: Vec<KernelSpec> =
            (0..n_nets).map(|j| *collection.kernel(j)).collect();
        let nets = (0..n_nets)
            .map(|j| {
                let stats = block_sufficient_stats(collection.network(j), &factions)?;
                let log_marg = network_log_marginal_from_stats(&stats, &kernels[j])?;
                Ok(NetCache { stats, log_marg })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(McmcState {
            clustering: Partition::single_block(n_nets),
            clusters,
            clustering_prior: config.init_clustering.params()?,
            kernels,
            nets,
            faction_init: config.init_factions.params()?,
            flags: config.sample,
            steps: config.steps,
            priors: config.hyperpriors,
            scan_sweeps: config.scan_sweeps,
        })
    }

    pub fn clustering(&self) -> &Partition {
        &self.clustering
    }

    pub fn clusters(&self) -> &[ClusterState] {
        &self.clusters
    }

    pub fn clustering_prior(&self) -> &PitmanYorParams {
        &self.clustering_prior
    }

    pub fn kernel(&self, j: usize) -> &KernelSpec {
        &self.kernels[j]
    }

    pub fn log_marginal(&self, j: usize) -> f64 {
        self.nets[j].log_marg
    }

    /// Joint log density of the current state up to the normalizing
    /// constant: partition priors, integrated likelihoods, and hyperprior
    /// terms for whichever hyperparameters are being sampled.
    pub fn log_unnormalized_posterior(&self) -> f64 {
        let h = &self.priors;
        let mut lp = eppf_log_prob(&self.clustering, &self.clustering_prior);
        if self.flags.clustering_discount {
            lp += uniform_lpdf(self.clustering_prior.discount(), h.discount_max);
        }
        if self.flags.clustering_concentration {
            lp += gamma_lpdf(
                self.clustering_prior.concentration(),
                h.concentration_shape,
                h.concentration_rate,
            );
        }
        for cluster in &self.clusters {
            lp += eppf_log_prob(&cluster.factions, &cluster.prior);
            if self.flags.faction_discount {
                lp += uniform_lpdf(cluster.prior.discount(), h.discount_max);
            }
            if self.flags.faction_concentration {
                lp += gamma_lpdf(
                    cluster.prior.concentration(),
                    h.concentration_shape,
                    h.concentration_rate,
                );
            }
        }
        for (j, cache) in self.nets.iter().enumerate() {
            lp += cache.log_marg;
            if self.flags.kernels {
                let spec = &self.kernels[j];
                for pair in [&spec.diag, &spec.offdiag] {
                    lp += gamma_lpdf(pair.a, h.kernel_shape, h.kernel_rate);
                    lp += gamma_lpdf(pair.b, h.kernel_shape, h.kernel_rate);
                }
            }
        }
        lp
    }

    /// Draw a partition-prior pair for a fresh cluster: sampled components
    /// come from their hyperprior, fixed ones stay at the initial value.
    fn draw_faction_prior(&self, rng: &mut ChaCha8Rng) -> Result<PitmanYorParams> {
        let discount = if self.flags.faction_discount {
            rng.random::<f64>() * self.priors.discount_max
        } else {
            self.faction_init.discount()
        };
        let concentration = if self.flags.faction_concentration {
            let g = rand_distr::Gamma::new(
                self.priors.concentration_shape,
                1.0 / self.priors.concentration_rate,
            )
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            rng.sample(g)
        } else {
            self.faction_init.concentration()
        };
        PitmanYorParams::new(discount, concentration)
    }

    /// Install a new clustering given per-slot states and raw labels, then
    /// rebuild every per-network cache under the canonical labeling.
    fn set_clustering(
        &mut self,
        labels: &[usize],
        mut slot_states: Vec<Option<ClusterState>>,
        collection: &NetworkCollection,
    ) -> Result<()> {
        let clustering = Partition::from_labels(labels);
        let mut ordered: Vec<ClusterState> = Vec::with_capacity(clustering.num_blocks());
        let mut seen: Vec<bool> = vec![false; slot_states.len()];
        for &slot in labels {
            if !seen[slot] {
                seen[slot] = true;
                ordered.push(slot_states[slot].take().ok_or_else(|| {
                    Error::InvalidStats("cluster slot missing its state".into())
                })?);
            }
        }
        self.clustering = clustering;
        self.clusters = ordered;
        self.rebuild_caches(collection)
    }

    fn rebuild_caches(&mut self, collection: &NetworkCollection) -> Result<()> {
        for j in 0..collection.n_networks() {
            let factions = &self.clusters[self.clustering.block_of(j)].factions;
            let stats = block_sufficient_stats(collection.network(j), factions)?;
            let log_marg = network_log_marginal_from_stats(&stats, &self.kernels[j])?;
            self.nets[j] = NetCache { stats, log_marg };
        }
        Ok(())
    }

    /// One full Gibbs scan over network cluster assignments. Every network
    /// is visited in random order and reassigned among the occupied
    /// clusters plus one freshly proposed cluster whose faction partition
    /// is priced by its allocation probability.
    pub fn gibbs_update_zeta(
        &mut self,
        collection: &NetworkCollection,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let n_nets = collection.n_networks();
        if n_nets <= 1 {
            return Ok(());
        }
        let n_actors = collection.n_actors();
        let mut order: Vec<usize> = (0..n_nets).collect();
        order.shuffle(rng);

        let mut labels: Vec<usize> = self.clustering.labels().to_vec();
        let mut slots: Vec<Option<ClusterState>> =
            self.clusters.drain(..).map(Some).collect();
        let mut sizes: Vec<usize> = vec![0; slots.len()];
        for &l in &labels {
            sizes[l] += 1;
        }

        for &j in &order {
            let net = collection.network(j);
            let spec = self.kernels[j];
            let current = labels[j];
            sizes[current] -= 1;
            let was_singleton = sizes[current] == 0;

            let mut perm: Vec<usize> = (0..n_actors).collect();
            perm.shuffle(rng);
            // Candidate state for the "new cluster" option together with
            // the log probability of proposing exactly that state. For a
            // singleton the candidate is its own current cluster, replayed;
            // otherwise it is drawn fresh.
            let (cand, log_q) = if was_singleton {
                let cand = slots[current].take().expect("occupied slot");
                let q = forced_allocation_log_prob(
                    n_actors,
                    &[net],
                    &[&spec],
                    &cand.prior,
                    &perm,
                    self.scan_sweeps,
                    &cand.factions,
                )?;
                (cand, q)
            } else {
                let prior = self.draw_faction_prior(rng)?;
                let (factions, q) = allocate_with_permutation(
                    n_actors,
                    &[net],
                    &[&spec],
                    &prior,
                    &perm,
                    self.scan_sweeps,
                    None,
                    rng,
                )?;
                (ClusterState { factions, prior }, q)
            };

            let occupied: Vec<usize> = (0..slots.len())
                .filter(|&k| sizes[k] > 0 && slots[k].is_some())
                .collect();
            let discount = self.clustering_prior.discount();
            let mut logw = Vec::with_capacity(occupied.len() + 1);
            for &k in &occupied {
                let cluster = slots[k].as_ref().expect("occupied slot");
                let w = (sizes[k] as f64 - discount).ln()
                    + network_log_marginal(net, &cluster.factions, &spec)?;
                logw.push(w);
            }
            let new_weight = (self.clustering_prior.concentration()
                + discount * occupied.len() as f64)
                .ln()
                + eppf_log_prob(&cand.factions, &cand.prior)
                + network_log_marginal(net, &cand.factions, &spec)?
                - log_q;
            logw.push(new_weight);

            let choice = sample_index(&logw, rng)?;
            if choice == occupied.len() {
                // Open a cluster for the candidate, reusing a dead slot when
                // one exists so labels stay small.
                let slot = if was_singleton {
                    current
                } else if let Some(dead) = slots.iter().position(|s| s.is_none()) {
                    dead
                } else {
                    slots.push(None);
                    sizes.push(0);
                    slots.len() - 1
                };
                slots[slot] = Some(cand);
                labels[j] = slot;
                sizes[slot] += 1;
            } else {
                let k = occupied[choice];
                labels[j] = k;
                sizes[k] += 1;
            }
        }

        self.set_clustering(&labels, slots, collection)
    }

    /// One Gibbs scan over the faction assignment of every actor within
    /// cluster `k`, visiting actors in random order.
    pub fn gibbs_update_xi(
        &mut self,
        k: usize,
        collection: &NetworkCollection,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let members: Vec<usize> = (0..collection.n_networks())
            .filter(|&j| self.clustering.block_of(j) == k)
            .collect();
        let nets: Vec<&crate::network::Network> =
            members.iter().map(|&j| collection.network(j)).collect();
        let specs: Vec<&KernelSpec> = members.iter().map(|&j| &self.kernels[j]).collect();
        let prior = self.clusters[k].prior;

        let mut labels = self.clusters[k].factions.labels().to_vec();
        let mut sizes = self.clusters[k].factions.sizes().to_vec();
        let mut stats: Vec<BlockStats> =
            members.iter().map(|&j| self.nets[j].stats.clone()).collect();

        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(rng);
        for &actor in &order {
            let old = labels[actor];
            for (s, net) in stats.iter_mut().zip(&nets) {
                s.remove_actor(net, &labels, actor);
            }
            labels[actor] = UNSEATED;
            sizes[old] -= 1;
            let new_slot = sizes.iter().position(|&s| s == 0).unwrap_or(sizes.len());
            let logw = seat_weights(
                actor, &labels, &sizes, &stats, &nets, &specs, &prior, new_slot,
            )?;
            let choice = sample_index(&logw, rng)?;
            if choice == sizes.len() {
                sizes.push(0);
                for s in &mut stats {
                    s.grow_to(choice + 1);
                }
            }
            for (s, net) in stats.iter_mut().zip(&nets) {
                s.add_actor(net, &labels, actor, choice);
            }
            labels[actor] = choice;
            sizes[choice] += 1;
        }

        let factions = Partition::from_labels(&labels);
        for &j in &members {
            let stats = block_sufficient_stats(collection.network(j), &factions)?;
            let log_marg = network_log_marginal_from_stats(&stats, &self.kernels[j])?;
            self.nets[j] = NetCache { stats, log_marg };
        }
        self.clusters[k].factions = factions;
        Ok(())
    }

    /// Random-walk Metropolis pass over every sampled hyperparameter.
    /// Returns (attempts, accepts).
    pub fn update_hyperparams(&mut self, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
        let mut attempts = 0;
        let mut accepts = 0;
        let h = self.priors;
        let steps = self.steps;

        if self.flags.clustering_discount {
            attempts += 1;
            let z: f64 = rng.sample(StandardNormal);
            let cur = self.clustering_prior;
            let prop = cur.discount() + steps.discount * z;
            if (0.0..h.discount_max).contains(&prop) {
                let cand = PitmanYorParams::new(prop, cur.concentration())?;
                let delta = eppf_log_prob(&self.clustering, &cand)
                    - eppf_log_prob(&self.clustering, &cur);
                if mh_accept(delta, rng) {
                    self.clustering_prior = cand;
                    accepts += 1;
                }
            }
        }
        if self.flags.clustering_concentration {
            attempts += 1;
            let z: f64 = rng.sample(StandardNormal);
            let cur = self.clustering_prior;
            let prop = cur.concentration() * (steps.concentration * z).exp();
            if prop.is_finite() && prop > 0.0 {
                let cand = PitmanYorParams::new(cur.discount(), prop)?;
                let delta = eppf_log_prob(&self.clustering, &cand)
                    - eppf_log_prob(&self.clustering, &cur)
                    + gamma_lpdf(prop, h.concentration_shape, h.concentration_rate)
                    - gamma_lpdf(
                        cur.concentration(),
                        h.concentration_shape,
                        h.concentration_rate,
                    )
                    + prop.ln()
                    - cur.concentration().ln();
                if mh_accept(delta, rng) {
                    self.clustering_prior = cand;
                    accepts += 1;
                }
            }
        }

        for k in 0..self.clusters.len() {
            if self.flags.faction_discount {
                attempts += 1;
                let z: f64 = rng.sample(StandardNormal);
                let cur = self.clusters[k].prior;
                let prop = cur.discount() + steps.discount * z;
                if (0.0..h.discount_max).contains(&prop) {
                    let cand = PitmanYorParams::new(prop, cur.concentration())?;
                    let delta = eppf_log_prob(&self.clusters[k].factions, &cand)
                        - eppf_log_prob(&self.clusters[k].factions, &cur);
                    if mh_accept(delta, rng) {
                        self.clusters[k].prior = cand;
                        accepts += 1;
                    }
                }
            }
            if self.flags.faction_concentration {
                attempts += 1;
                let z: f64 = rng.sample(StandardNormal);
                let cur = self.clusters[k].prior;
                let prop = cur.concentration() * (steps.concentration * z).exp();
                if prop.is_finite() && prop > 0.0 {
                    let cand = PitmanYorParams::new(cur.discount(), prop)?;
                    let delta = eppf_log_prob(&self.clusters[k].factions, &cand)
                        - eppf_log_prob(&self.clusters[k].factions, &cur)
                        + gamma_lpdf(prop, h.concentration_shape, h.concentration_rate)
                        - gamma_lpdf(
                            cur.concentration(),
                            h.concentration_shape,
                            h.concentration_rate,
                        )
                        + prop.ln()
                        - cur.concentration().ln();
                    if mh_accept(delta, rng) {
                        self.clusters[k].prior = cand;
                        accepts += 1;
                    }
                }
            }
        }

        if self.flags.kernels {
            for j in 0..self.kernels.len() {
                for comp in 0..4 {
                    attempts += 1;
                    let z: f64 = rng.sample(StandardNormal);
                    let spec = self.kernels[j];
                    let cur = match comp {
                        0 => spec.diag.a,
                        1 => spec.diag.b,
                        2 => spec.offdiag.a,
                        _ => spec.offdiag.b,
                    };
                    let prop = cur * (steps.kernel * z).exp();
                    if !(prop.is_finite() && prop > 0.0) {
                        continue;
                    }
                    let mut cand = spec;
                    match comp {
                        0 => cand.diag.a = prop,
                        1 => cand.diag.b = prop,
                        2 => cand.offdiag.a = prop,
                        _ => cand.offdiag.b = prop,
                    }
                    let new_marg =
                        network_log_marginal_from_stats(&self.nets[j].stats, &cand)?;
                    let delta = new_marg - self.nets[j].log_marg
                        + gamma_lpdf(prop, h.kernel_shape, h.kernel_rate)
                        - gamma_lpdf(cur, h.kernel_shape, h.kernel_rate)
                        + prop.ln()
                        - cur.ln();
                    if mh_accept(delta, rng) {
                        self.kernels[j] = cand;
                        self.nets[j].log_marg = new_marg;
                        accepts += 1;
                    }
                }
            }
        }

        Ok((attempts, accepts))
    }

    /// Draw the block parameter matrix of every network from its posterior
    /// given the current partitions and kernel specs.
    pub fn sample_theta(
        &self,
        collection: &NetworkCollection,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<ThetaMatrix>> {
        (0..collection.n_networks())
            .map(|j| {
                let spec = &self.kernels[j];
                let stats = &self.nets[j].stats;
                let symmetric = !collection.network(j).directed();
                let mut draw_err = None;
                let m = ThetaMatrix::from_fn(stats.num_blocks(), symmetric, |k, l| {
                    match sample_theta_posterior(
                        &stats.obs(k, l),
                        spec.pair_for(k == l),
                        spec.family,
                        rng,
                    ) {
                        Ok(v) => v,
                        Err(e) => {
                            draw_err.get_or_insert(e);
                            f64::NAN
                        }
                    }
                });
                match draw_err {
                    Some(e) => Err(e),
                    None => Ok(m),
                }
            })
            .collect()
    }

    /// Recompute every cache from scratch and compare against the stored
    /// values; any drift is a bug in the incremental bookkeeping.
    pub fn audit(&self, collection: &NetworkCollection) -> Result<()> {
        if self.clusters.len() != self.clustering.num_blocks() {
            return Err(Error::InvalidStats(
                "cluster list does not match the clustering".into(),
            ));
        }
        if self.clustering.len() != collection.n_networks() {
            return Err(Error::InvalidStats(
                "clustering does not cover the collection".into(),
            ));
        }
        for (j, cache) in self.nets.iter().enumerate() {
            let cluster = &self.clusters[self.clustering.block_of(j)];
            if cluster.factions.len() != collection.n_actors() {
                return Err(Error::InvalidStats(
                    "faction partition does not cover the actor set".into(),
                ));
            }
            let fresh = block_sufficient_stats(collection.network(j), &cluster.factions)?;
            if fresh.num_blocks() != cache.stats.num_blocks() {
                return Err(Error::InvalidStats(format!(
                    "cached block count for network {j} drifted"
                )));
            }
            for (k, l, obs) in fresh.blocks() {
                let cached = cache.stats.obs(k, l);
                if obs.n != cached.n
                    || obs.sum != cached.sum
                    || (obs.log_fact - cached.log_fact).abs() > 1e-8
                {
                    return Err(Error::InvalidStats(format!(
                        "cached block ({k}, {l}) of network {j} drifted"
                    )));
                }
            }
            let marg = network_log_marginal_from_stats(&cache.stats, &self.kernels[j])?;
            if (marg - cache.log_marg).abs() > 1e-8 {
                return Err(Error::InvalidStats(format!(
                    "cached log marginal for network {j} drifted by {}",
                    (marg - cache.log_marg).abs()
                )));
            }
        }
        Ok(())
    }

    fn hyper_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert(
            "clustering.discount".to_string(),
            self.clustering_prior.discount(),
        );
        m.insert(
            "clustering.concentration".to_string(),
            self.clustering_prior.concentration(),
        );
        for (k, cluster) in self.clusters.iter().enumerate() {
            m.insert(format!("cluster{k}.discount"), cluster.prior.discount());
            m.insert(
                format!("cluster{k}.concentration"),
                cluster.prior.concentration(),
            );
        }
        for (j, spec) in self.kernels.iter().enumerate() {
            m.insert(format!("net{j}.diag.a"), spec.diag.a);
            m.insert(format!("net{j}.diag.b"), spec.diag.b);
            m.insert(format!("net{j}.off.a"), spec.offdiag.a);
            m.insert(format!("net{j}.off.b"), spec.offdiag.b);
        }
        m
    }

    fn sample_record(&self, iter: u64) -> TraceSample {
        TraceSample {
            iter,
            zeta: self.clustering.labels().to_vec(),
            xi: self
                .clusters
                .iter()
                .map(|c| c.factions.labels().to_vec())
                .collect(),
            hyper: self.hyper_map(),
            log_post: self.log_unnormalized_posterior(),
        }
    }
}

/// Progress snapshot passed to the caller's callback during a run.
#[derive(Debug, Clone, Copy)]
pub struct ProgressEvent {
    pub iter: u64,
    pub iterations: u64,
    pub log_post: f64,
    pub n_clusters: usize,
    pub split_accept_rate: f64,
    pub hyper_accept_rate: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub notices: Vec<String>,
    pub split_attempts: u64,
    pub split_accepts: u64,
    pub hyper_attempts: u64,
    pub hyper_accepts: u64,
}

pub fn run_chain(
    collection: &NetworkCollection,
    config: &McmcConfig,
    meta: TraceMeta,
) -> Result<RunResult> {
    run_chain_with(collection, config, meta, |_| {})
}

/// Run one chain, invoking `progress` periodically. The RNG stream is
/// derived from the config seed and the chain index in `meta`, so chains
/// of one run differ while reruns reproduce byte-identical traces.
pub fn run_chain_with(
    collection: &NetworkCollection,
    config: &McmcConfig,
    meta: TraceMeta,
    mut progress: impl FnMut(&ProgressEvent),
) -> Result<RunResult> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, &[meta.chain as u64]);
    let mut state = McmcState::init(collection, config)?;
    let mut notices = Vec::new();
    let pinned = collection.n_networks() == 1;
    if pinned {
        notices.push(
            "collection holds a single network: the clustering is pinned, so \
             clustering scans and split-merge moves are skipped"
                .to_string(),
        );
    }

    let mut samples = Vec::new();
    let mut split_attempts = 0u64;
    let mut split_accepts = 0u64;
    let mut hyper_attempts = 0u64;
    let mut hyper_accepts = 0u64;
    let report_every = (config.iterations / 50).max(1);

    for iter in 1..=config.iterations {
        if !pinned {
            for _ in 0..config.zeta_scans {
                state.gibbs_update_zeta(collection, &mut rng)?;
            }
            for _ in 0..config.split_merge_attempts {
                split_attempts += 1;
                if state.split_merge_step(collection, &mut rng)? {
                    split_accepts += 1;
                }
            }
        }
        for _ in 0..config.xi_scans {
            for k in 0..state.clusters.len() {
                state.gibbs_update_xi(k, collection, &mut rng)?;
            }
        }
        let (att, acc) = state.update_hyperparams(&mut rng)?;
        hyper_attempts += att;
        hyper_accepts += acc;

        if iter % 100 == 0 || iter == config.iterations {
            state.audit(collection)?;
        }
        if iter > config.burn_in && (iter - config.burn_in) % config.thinning == 0 {
            samples.push(state.sample_record(iter));
        }
        if iter % report_every == 0 || iter == config.iterations {
            progress(&ProgressEvent {
                iter,
                iterations: config.iterations,
                log_post: state.log_unnormalized_posterior(),
                n_clusters: state.clusters.len(),
                split_accept_rate: if split_attempts == 0 {
                    0.0
                } else {
                    split_accepts as f64 / split_attempts as f64
                },
                hyper_accept_rate: if hyper_attempts == 0 {
                    0.0
                } else {
                    hyper_accepts as f64 / hyper_attempts as f64
                },
            });
        }
    }

    Ok(RunResult {
        trace: Trace { meta, samples },
        notices,
        split_attempts,
        split_accepts,
        hyper_attempts,
        hyper_accepts,
    })
}
