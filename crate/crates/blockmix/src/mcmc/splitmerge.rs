//! Split-merge Metropolis-Hastings move on the network clustering.
//!
//! A uniformly chosen pair of networks either splits its shared cluster in
//! two or merges its two clusters into one. Proposed faction partitions
//! come from sequential allocation; the reverse direction is priced by
//! replaying the existing partitions as forced allocations. Permutation
//! densities cancel because both directions draw all of theirs fresh, and
//! hyperprior densities cancel because the pair for a freshly opened
//! cluster is drawn straight from the hyperprior.

use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kernels::{network_log_marginal, KernelSpec};
use crate::network::{Network, NetworkCollection};
use crate::partition::Partition;
use crate::pyp::eppf_log_prob;

use super::seqalloc::forced_allocation_log_prob;
use super::{mh_accept, sequential_allocation, ClusterState, McmcState};

fn views<'a>(
    collection: &'a NetworkCollection,
    kernels: &'a [KernelSpec],
    members: &[usize],
) -> (Vec<&'a Network>, Vec<&'a KernelSpec>) {
    (
        members.iter().map(|&j| collection.network(j)).collect(),
        members.iter().map(|&j| &kernels[j]).collect(),
    )
}

impl McmcState {
    /// One split-merge attempt. Returns whether the proposal was accepted.
    pub fn split_merge_step(
        &mut self,
        collection: &NetworkCollection,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool> {
        let n_nets = collection.n_networks();
        if n_nets < 2 {
            return Ok(false);
        }
        let a = rng.random_range(0..n_nets);
        let mut b = rng.random_range(0..n_nets - 1);
        if b >= a {
            b += 1;
        }
        if self.clustering.block_of(a) == self.clustering.block_of(b) {
            self.attempt_split(collection, a, b, rng)
        } else {
            self.attempt_merge(collection, a, b, rng)
        }
    }

    fn attempt_split(
        &mut self,
        collection: &NetworkCollection,
        a: usize,
        b: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool> {
        let n_actors = collection.n_actors();
        let c = self.clustering.block_of(a);
        let members: Vec<usize> = (0..collection.n_networks())
            .filter(|&j| self.clustering.block_of(j) == c)
            .collect();
        let n_ab = members.len();

        let mut in_a = vec![a];
        let mut in_b = vec![b];
        for &j in &members {
            if j != a && j != b {
                if rng.random::<f64>() < 0.5 {
                    in_a.push(j);
                } else {
                    in_b.push(j);
                }
            }
        }

        // The cluster keeping network `a` inherits the parent's pair; the
        // new cluster's pair is a fresh hyperprior draw.
        let prior_a = self.clusters[c].prior;
        let prior_b = self.draw_faction_prior(rng)?;

        let (nets_a, specs_a) = views(collection, &self.kernels, &in_a);
        let (fac_a, q_a) =
            sequential_allocation(n_actors, &nets_a, &specs_a, &prior_a, self.scan_sweeps, rng)?;
        let (nets_b, specs_b) = views(collection, &self.kernels, &in_b);
        let (fac_b, q_b) =
            sequential_allocation(n_actors, &nets_b, &specs_b, &prior_b, self.scan_sweeps, rng)?;

        // Reverse move: a merge would re-propose the current partition for
        // the whole cluster under the pair kept by network a's side.
        let (nets_all, specs_all) = views(collection, &self.kernels, &members);
        let mut perm_ab: Vec<usize> = (0..n_actors).collect();
        perm_ab.shuffle(rng);
        let q_ab = forced_allocation_log_prob(
            n_actors,
            &nets_all,
            &specs_all,
            &prior_a,
            &perm_ab,
            self.scan_sweeps,
            &self.clusters[c].factions,
        )?;

        let eppf_old = eppf_log_prob(&self.clusters[c].factions, &self.clusters[c].prior);
        let eppf_new = eppf_log_prob(&fac_a, &prior_a) + eppf_log_prob(&fac_b, &prior_b);

        let marg_old: f64 = members.iter().map(|&j| self.nets[j].log_marg).sum();
        let mut marg_new = 0.0;
        for &j in &in_a {
            marg_new += network_log_marginal(collection.network(j), &fac_a, &self.kernels[j])?;
        }
        for &j in &in_b {
            marg_new += network_log_marginal(collection.network(j), &fac_b, &self.kernels[j])?;
        }

        let mut labels = self.clustering.labels().to_vec();
        let fresh_label = self.clustering.num_blocks();
        for &j in &in_b {
            labels[j] = fresh_label;
        }
        let split_clustering = Partition::from_labels(&labels);
        let d_clustering = eppf_log_prob(&split_clustering, &self.clustering_prior)
            - eppf_log_prob(&self.clustering, &self.clustering_prior);

        let delta = d_clustering + eppf_new - eppf_old + marg_new - marg_old
            + (n_ab as f64 - 2.0) * LN_2
            + q_ab
            - q_a
            - q_b;

        if !mh_accept(delta, rng) {
            return Ok(false);
        }

        let mut slot_states: Vec<Option<ClusterState>> =
            self.clusters.drain(..).map(Some).collect();
        slot_states[c] = Some(ClusterState { factions: fac_a, prior: prior_a });
        slot_states.push(Some(ClusterState { factions: fac_b, prior: prior_b }));
        self.set_clustering(&labels, slot_states, collection)?;
        Ok(true)
    }

    fn attempt_merge(
        &mut self,
        collection: &NetworkCollection,
        a: usize,
        b: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<bool> {
        let n_actors = collection.n_actors();
        let ca = self.clustering.block_of(a);
        let cb = self.clustering.block_of(b);
        let members_a: Vec<usize> = (0..collection.n_networks())
            .filter(|&j| self.clustering.block_of(j) == ca)
            .collect();
        let members_b: Vec<usize> = (0..collection.n_networks())
            .filter(|&j| self.clustering.block_of(j) == cb)
            .collect();
        let mut all = members_a.clone();
        all.extend_from_slice(&members_b);
        all.sort_unstable();
        let n_ab = all.len();

        // The merged cluster keeps the pair of the cluster containing a,
        // mirroring how a split hands the parent's pair to a's side.
        let prior_merged = self.clusters[ca].prior;
        let (nets_all, specs_all) = views(collection, &self.kernels, &all);
        let (fac_m, q_ab) = sequential_allocation(
            n_actors,
            &nets_all,
            &specs_all,
            &prior_merged,
            self.scan_sweeps,
            rng,
        )?;

        // Reverse move: a split would have to re-propose both current
        // faction partitions under their current pairs.
        let (nets_a, specs_a) = views(collection, &self.kernels, &members_a);
        let mut perm_a: Vec<usize> = (0..n_actors).collect();
        perm_a.shuffle(rng);
        let q_a = forced_allocation_log_prob(
            n_actors,
            &nets_a,
            &specs_a,
            &self.clusters[ca].prior,
            &perm_a,
            self.scan_sweeps,
            &self.clusters[ca].factions,
        )?;
        let (nets_b, specs_b) = views(collection, &self.kernels, &members_b);
        let mut perm_b: Vec<usize> = (0..n_actors).collect();
        perm_b.shuffle(rng);
        let q_b = forced_allocation_log_prob(
            n_actors,
            &nets_b,
            &specs_b,
            &self.clusters[cb].prior,
            &perm_b,
            self.scan_sweeps,
            &self.clusters[cb].factions,
        )?;

        let eppf_old = eppf_log_prob(&self.clusters[ca].factions, &self.clusters[ca].prior)
            + eppf_log_prob(&self.clusters[cb].factions, &self.clusters[cb].prior);
        let eppf_new = eppf_log_prob(&fac_m, &prior_merged);

        let marg_old: f64 = all.iter().map(|&j| self.nets[j].log_marg).sum();
        let mut marg_new = 0.0;
        for &j in &all {
            marg_new += network_log_marginal(collection.network(j), &fac_m, &self.kernels[j])?;
        }

        let mut labels = self.clustering.labels().to_vec();
        for &j in &members_b {
            labels[j] = ca;
        }
        let merged_clustering = Partition::from_labels(&labels);
        let d_clustering = eppf_log_prob(&merged_clustering, &self.clustering_prior)
            - eppf_log_prob(&self.clustering, &self.clustering_prior);

        let delta = d_clustering + eppf_new - eppf_old + marg_new - marg_old
            - (n_ab as f64 - 2.0) * LN_2
            + q_a
            + q_b
            - q_ab;

        if !mh_accept(delta, rng) {
            return Ok(false);
        }

        let mut slot_states: Vec<Option<ClusterState>> =
            self.clusters.drain(..).map(Some).collect();
        slot_states[ca] = Some(ClusterState { factions: fac_m, prior: prior_merged });
        self.set_clustering(&labels, slot_states, collection)?;
        Ok(true)
    }
}
