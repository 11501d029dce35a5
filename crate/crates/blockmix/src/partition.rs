//! Partitions in first-appearance canonical form.
//!
//! A partition of `n` elements is stored as a label vector where the first
//! element always gets label 0 and every new block gets the smallest unused
//! label. Canonical form removes label-switching ambiguity: two label
//! vectors describe the same partition exactly when their canonical forms
//! are equal, so `PartialEq`/`Hash`/`Ord` on [`Partition`] compare partitions,
//! not labelings. The same type serves actor factions within a network
//! cluster and the clustering of networks themselves.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Builds a partition from an arbitrary label vector, relabeling blocks
    /// in first-appearance order.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut sizes: Vec<usize> = Vec::new();
        for &r in raw {
            let next = map.len();
            let l = *map.entry(r).or_insert(next);
            if l == sizes.len() {
                sizes.push(0);
            }
            sizes[l] += 1;
            labels.push(l);
        }
        Partition { labels, sizes }
    }

    /// The partition with every element in its own block.
    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    /// The partition with all elements in one block.
    pub fn single_block(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            sizes: if n == 0 { Vec::new() } else { vec![n] },
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Canonical labels, one per element.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Block occupancy counts in canonical label order.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_of(&self, element: usize) -> usize {
        self.labels[element]
    }

    pub fn same_block(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    /// Element indices grouped by block, in canonical label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Applies a permutation of element indices (`perm[i]` is the new index
    /// of element `i`) and re-canonicalizes.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len(), "permutation length mismatch");
        let mut raw = vec![0usize; self.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            raw[perm[i]] = l;
        }
        Partition::from_labels(&raw)
    }
}
