//! Network data model, validation, and block sufficient statistics.
//!
//! A network is a dense I x I matrix of non-negative integer dyad values
//! (binary relations use {0,1}, count relations any non-negative integer)
//! plus three pieces of metadata: directedness, whether self-ties are
//! structurally absent, and the value family. Given a partition of the
//! actors into factions, every modeled dyad belongs to exactly one block
//! (ordered faction pair when directed, unordered when undirected);
//! [`block_sufficient_stats`] aggregates the per-block dyad counts, value
//! sums, and log-factorial terms that the conjugate kernels consume.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Value family of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Binary,
    Count,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Binary => write!(f, "binary"),
            Family::Count => write!(f, "count"),
        }
    }
}

/// One relation over I actors.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n_actors: usize,
    values: Vec<u64>, // row-major
    directed: bool,
    acyclic: bool,
    family: Family,
}

impl Network {
    /// Validates a raw matrix against the declared metadata.
    ///
    /// Rejects non-square input, asymmetry under the undirected flag,
    /// nonzero diagonal entries under the acyclic flag, and values outside
    /// {0,1} for the binary family.
    pub fn new(rows: Vec<Vec<u64>>, directed: bool, acyclic: bool, family: Family) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("matrix has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidNetwork(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        let mut values = Vec::with_capacity(n * n);
        for row in &rows {
            values.extend_from_slice(row);
        }
        let net = Network {
            n_actors: n,
            values,
            directed,
            acyclic,
            family,
        };
        net.check_invariants()?;
        Ok(net)
    }

    fn check_invariants(&self) -> Result<()> {
        let n = self.n_actors;
        if self.family == Family::Binary {
            if let Some(pos) = self.values.iter().position(|&v| v > 1) {
                return Err(Error::InvalidNetwork(format!(
                    "binary family violated: value {} at ({}, {})",
                    self.values[pos],
                    pos / n,
                    pos % n
                )));
            }
        }
        if self.acyclic {
            for i in 0..n {
                if self.values[i * n + i] != 0 {
                    return Err(Error::InvalidNetwork(format!(
                        "structural zero violated: diagonal entry ({i}, {i}) is {}",
                        self.values[i * n + i]
                    )));
                }
            }
        }
        if !self.directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    if self.values[i * n + j] != self.values[j * n + i] {
                        return Err(Error::InvalidNetwork(format!(
                            "symmetry violated at ({i}, {j}): {} vs {}",
                            self.values[i * n + j],
                            self.values[j * n + i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn value(&self, i: usize, j: usize) -> u64 {
        self.values[i * self.n_actors + j]
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn acyclic(&self) -> bool {
        self.acyclic
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Serializes the matrix as headerless CSV, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_actors {
            for j in 0..self.n_actors {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&self.value(i, j).to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a headerless CSV matrix of non-negative integers.
///
/// Strict by design: every cell must be a plain decimal integer (surrounding
/// ASCII whitespace tolerated), rows must all have the same length, and the
/// matrix must be square. No coercion of floats, signs, or empty cells.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<u64>>> {
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "blank line inside matrix".into(),
            });
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let token = cell.trim();
            let v: u64 = token.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("expected a non-negative integer, got {token:?}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("matrix CSV has no rows".into()));
    }
    let n = rows.len();
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("row has {} entries, expected {n} (square matrix)", row.len()),
            });
        }
    }
    Ok(rows)
}

/// J networks over a shared actor set, each with its own kernel spec.
#[derive(Debug, Clone)]
pub struct NetworkCollection {
    networks: Vec<Network>,
    kernel_specs: Vec<crate::kernels::KernelSpec>,
    actor_names: Option<Vec<String>>,
}

impl NetworkCollection {
    pub fn new(
        networks: Vec<Network>,
        kernel_specs: Vec<crate::kernels::KernelSpec>,
        actor_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if networks.is_empty() {
            return Err(Error::EmptyInput("collection has no networks".into()));
        }
        let n = networks[0].n_actors();
        for (j, net) in networks.iter().enumerate() {
            if net.n_actors() != n {
                return Err(Error::InvalidNetwork(format!(
                    "network {j} has {} actors, expected {n}",
                    net.n_actors()
                )));
            }
        }
        if kernel_specs.len() != networks.len() {
            return Err(Error::InvalidConfig(format!(
                "{} kernel specs for {} networks",
                kernel_specs.len(),
                networks.len()
            )));
        }
        for (j, (net, spec)) in networks.iter().zip(&kernel_specs).enumerate() {
            if !spec.family.matches(net.family()) {
                return Err(Error::FamilyMismatch(format!(
                    "network {j} is {} but its kernel is {:?}",
                    net.family(),
                    spec.family
                )));
            }
        }
        if let Some(names) = &actor_names {
            if names.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{} actor names for {n} actors",
                    names.len()
                )));
            }
        }
        Ok(NetworkCollection {
            networks,
            kernel_specs,
            actor_names,
        })
    }

    pub fn n_networks(&self) -> usize {
        self.networks.len()
    }

    pub fn n_actors(&self) -> usize {
        self.networks[0].n_actors()
    }

    pub fn network(&self, j: usize) -> &Network {
        &self.networks[j]
    }

    pub fn networks(&self) -> &[Network] {
        &self.networks
    }

    pub fn kernel(&self, j: usize) -> &crate::kernels::KernelSpec {
        &self.kernel_specs[j]
    }

    pub fn kernels(&self) -> &[crate::kernels::KernelSpec] {
        &self.kernel_specs
    }

    pub fn actor_names(&self) -> Option<&[String]> {
        self.actor_names.as_deref()
    }
}

/// Sufficient statistics of one block's dyads: how many dyads, their value
/// sum, and the accumulated log-factorial of the values (zero for binary
/// data; needed so count marginals are exact probabilities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockObs {
    pub n: u64,
    pub sum: u64,
    pub log_fact: f64,
}

impl BlockObs {
    pub fn single(value: u64) -> Self {
        BlockObs {
            n: 1,
            sum: value,
            log_fact: ln_gamma(value as f64 + 1.0),
        }
    }

    pub fn merged(a: BlockObs, b: BlockObs) -> Self {
        BlockObs {
            n: a.n + b.n,
            sum: a.sum + b.sum,
            log_fact: a.log_fact + b.log_fact,
        }
    }

    fn add(&mut self, value: u64) {
        self.n += 1;
        self.sum += value;
        self.log_fact += ln_gamma(value as f64 + 1.0);
    }

    fn remove(&mut self, value: u64) {
        debug_assert!(self.n >= 1 && self.sum >= value);
        self.n -= 1;
        self.sum -= value;
        self.log_fact -= ln_gamma(value as f64 + 1.0);
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Sentinel label for actors not currently seated in a working partition.
pub(crate) const UNSEATED: usize = usize::MAX;

/// Per-block dyad statistics for one network under one faction partition.
///
/// Directed networks keep (k, l) and (l, k) as separate blocks; undirected
/// networks pool each unordered pair into the cell with k <= l. Self-ties
/// (only present when the network is not acyclic) land in the diagonal
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    num_blocks: usize,
    directed: bool,
    cells: Vec<BlockObs>, // num_blocks x num_blocks row-major
}

impl BlockStats {
    pub fn empty(num_blocks: usize, directed: bool) -> Self {
        BlockStats {
            num_blocks,
            directed,
            cells: vec![BlockObs::default(); num_blocks * num_blocks],
        }
    }

    fn idx(&self, k: usize, l: usize) -> usize {
        let (k, l) = if !self.directed && k > l { (l, k) } else { (k, l) };
        k * self.num_blocks + l
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    /// Stats for block (k, l); undirected lookups are order-insensitive.
    pub fn obs(&self, k: usize, l: usize) -> BlockObs {
        self.cells[self.idx(k, l)]
    }

    /// Iterates over stored blocks as (row faction, column faction, stats).
    /// Directed: all ordered pairs. Undirected: unordered pairs with k <= l.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize, BlockObs)> + '_ {
        let kmax = self.num_blocks;
        let directed = self.directed;
        (0..kmax).flat_map(move |k| {
            let start = if directed { 0 } else { k };
            (start..kmax).map(move |l| (k, l, self.obs(k, l)))
        })
    }

    /// Total modeled dyad count across all blocks.
    pub fn total_dyads(&self) -> u64 {
        self.blocks().map(|(_, _, o)| o.n).sum()
    }

    /// Total of all block value sums.
    pub fn total_sum(&self) -> u64 {
        self.blocks().map(|(_, _, o)| o.sum).sum()
    }

    /// Grows the block grid, preserving existing cells.
    pub(crate) fn grow_to(&mut self, num_blocks: usize) {
        if num_blocks <= self.num_blocks {
            return;
        }
        let mut bigger = BlockStats::empty(num_blocks, self.directed);
        for k in 0..self.num_blocks {
            for l in 0..self.num_blocks {
                bigger.cells[k * num_blocks + l] = self.cells[k * self.num_blocks + l];
            }
        }
        *self = bigger;
    }

    /// Adds actor `i`'s dyads against all seated actors, treating `i` as a
    /// member of `faction`. `labels[u]` must be the faction of seated actor
    /// u and [`UNSEATED`] otherwise; `labels[i]` itself is ignored.
    pub(crate) fn add_actor(&mut self, net: &Network, labels: &[usize], i: usize, faction: usize) {
        debug_assert!(faction < self.num_blocks);
        for (u, &lu) in labels.iter().enumerate() {
            if u == i || lu == UNSEATED {
                continue;
            }
            let out = self.idx(faction, lu);
            self.cells[out].add(net.value(i, u));
            if net.directed() {
                let inc = self.idx(lu, faction);
                self.cells[inc].add(net.value(u, i));
            }
        }
        if !net.acyclic() {
            let d = self.idx(faction, faction);
            self.cells[d].add(net.value(i, i));
        }
    }

    /// Removes actor `i`'s dyads; `labels[i]` must still hold its faction.
    pub(crate) fn remove_actor(&mut self, net: &Network, labels: &[usize], i: usize) {
        let faction = labels[i];
        debug_assert!(faction != UNSEATED);
        for (u, &lu) in labels.iter().enumerate() {
            if u == i || lu == UNSEATED {
                continue;
            }
            let out = self.idx(faction, lu);
            self.cells[out].remove(net.value(i, u));
            if net.directed() {
                let inc = self.idx(lu, faction);
                self.cells[inc].remove(net.value(u, i));
            }
        }
        if !net.acyclic() {
            let d = self.idx(faction, faction);
            self.cells[d].remove(net.value(i, i));
        }
    }
}

/// Aggregates block sufficient statistics for a network under a partition.
pub fn block_sufficient_stats(net: &Network, partition: &Partition) -> Result<BlockStats> {
    if partition.len() != net.n_actors() {
        return Err(Error::PartitionMismatch(format!(
            "partition over {} elements, network has {} actors",
            partition.len(),
            net.n_actors()
        )));
    }
    let labels = partition.labels();
    let mut stats = BlockStats::empty(partition.num_blocks(), net.directed());
    let n = net.n_actors();
    for i in 0..n {
        if net.directed() {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let c = stats.idx(labels[i], labels[j]);
                stats.cells[c].add(net.value(i, j));
            }
        } else {
            for j in (i + 1)..n {
                let c = stats.idx(labels[i], labels[j]);
                stats.cells[c].add(net.value(i, j));
            }
        }
        if !net.acyclic() {
            let c = stats.idx(labels[i], labels[i]);
            stats.cells[c].add(net.value(i, i));
        }
    }
    Ok(stats)
}

/// Grouped dyad statistics of one actor against each faction of the seated
/// actors: what that actor would contribute to blocks (faction, f) and
/// (f, faction) upon joining some faction. Used by the collapsed Gibbs scans
/// and the sequential allocation proposals.
#[derive(Debug, Clone)]
pub(crate) struct ActorTally {
    /// Dyads i -> members of faction f (all dyads i ~ f when undirected).
    pub out: Vec<BlockObs>,
    /// Dyads members of faction f -> i; only populated when directed.
    pub incoming: Vec<BlockObs>,
    /// The self-tie, when the network is not acyclic.
    pub self_tie: Option<BlockObs>,
}

impl ActorTally {
    /// `num_factions` bounds the faction labels appearing among seated actors.
    pub fn compute(net: &Network, labels: &[usize], i: usize, num_factions: usize) -> Self {
        let mut out = vec![BlockObs::default(); num_factions];
        let mut incoming = if net.directed() {
            vec![BlockObs::default(); num_factions]
        } else {
            Vec::new()
        };
        for (u, &lu) in labels.iter().enumerate() {
            if u == i || lu == UNSEATED {
                continue;
            }
            out[lu].add(net.value(i, u));
            if net.directed() {
                incoming[lu].add(net.value(u, i));
            }
        }
        let self_tie = if net.acyclic() {
            None
        } else {
            Some(BlockObs::single(net.value(i, i)))
        };
        ActorTally {
            out,
            incoming,
            self_tie,
        }
    }
}

/// Per-actor degrees.
#[derive(Debug, Clone, PartialEq)]
pub enum DegreeSequence {
    /// D_i = sum over j != i of the dyad value.
    Undirected(Vec<u64>),
    /// In- and out-degrees for directed relations.
    Directed { incoming: Vec<u64>, outgoing: Vec<u64> },
}

impl DegreeSequence {
    /// The plain degree vector: undirected degrees, or out-degrees.
    pub fn primary(&self) -> &[u64] {
        match self {
            DegreeSequence::Undirected(d) => d,
            DegreeSequence::Directed { outgoing, .. } => outgoing,
        }
    }
}

/// Degrees of every actor, excluding self-ties.
pub fn degree_sequence(net: &Network) -> DegreeSequence {
    let n = net.n_actors();
    if net.directed() {
        let mut inc = vec![0u64; n];
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                out[i] += net.value(i, j);
                inc[j] += net.value(i, j);
            }
        }
        DegreeSequence::Directed {
            incoming: inc,
            outgoing: out,
        }
    } else {
        let mut deg = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    deg[i] += net.value(i, j);
                }
            }
        }
        DegreeSequence::Undirected(deg)
    }
}

/// Global clustering coefficient of an undirected binary network:
/// 3 * (number of triangles) / (number of connected triples).
///
/// Returns 0 for graphs with no connected triples so degenerate draws cannot
/// poison Monte Carlo averages.
pub fn clustering_coefficient(net: &Network) -> Result<f64> {
    if net.directed() {
        return Err(Error::InvalidNetwork(
            "clustering coefficient requires an undirected network".into(),
        ));
    }
    if net.family() != Family::Binary {
        return Err(Error::FamilyMismatch(
            "clustering coefficient requires a binary network".into(),
        ));
    }
    let n = net.n_actors();
    let words = n.div_ceil(64);
    // Bit-rows of the adjacency matrix (diagonal cleared) make the common
    // neighbor counts a handful of AND+popcount passes.
    let mut rows = vec![vec![0u64; words]; n];
    let mut degree = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && net.value(i, j) == 1 {
                rows[i][j / 64] |= 1 << (j % 64);
                degree[i] += 1;
            }
        }
    }
    let mut triples = 0u64;
    for &d in &degree {
        triples += d * d.saturating_sub(1) / 2;
    }
    if triples == 0 {
        return Ok(0.0);
    }
    // Each triangle is counted once per edge in this sum of common-neighbor
    // counts, i.e. three times in total.
    let mut closed = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            if net.value(i, j) == 1 {
                closed += rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum::<u64>();
            }
        }
    }
    Ok(closed as f64 / triples as f64)
}
