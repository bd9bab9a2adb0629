use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClusterParams;

/// Cluster labels for `N` items with contiguous, nonempty clusters `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Validates 0-based labels: every label in `0..K` must be used.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPartition("no items".into()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("cluster {empty} is empty")));
        }
        Ok(Self { labels, sizes })
    }

    /// Relabels arbitrary labels by order of first appearance.
    pub fn canonical<T: PartialEq + Copy>(labels: &[T]) -> Self {
        let mut seen: Vec<T> = Vec::new();
        let labels = labels
            .iter()
            .map(|l| match seen.iter().position(|s| s == l) {
                Some(p) => p,
                None => {
                    seen.push(*l);
                    seen.len() - 1
                }
            })
            .collect();
        Self::from_labels(labels).expect("first-appearance labels are contiguous")
    }

    pub fn single_cluster(n: usize) -> Self {
        Self { labels: vec![0; n], sizes: vec![n] }
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, item: usize) -> usize {
        self.labels[item]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, cluster: usize) -> usize {
        self.sizes[cluster]
    }

    pub fn is_singleton(&self, item: usize) -> bool {
        self.sizes[self.labels[item]] == 1
    }

    /// Members of each cluster, in item order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// The same grouping with labels renumbered by first appearance.
    pub fn canonicalized(&self) -> Self {
        Self::canonical(&self.labels)
    }

    /// Moves `item` into `target`, where `target == k()` opens a new cluster.
    /// If the move empties the item's old cluster, the last cluster takes
    /// over the vacated label. Returns the vacated label, if any.
    pub(crate) fn move_item(&mut self, item: usize, target: usize) -> Option<usize> {
        let from = self.labels[item];
        debug_assert!(target <= self.k() && target != from);
        if target == self.k() {
            self.sizes.push(0);
        }
        self.sizes[target] += 1;
        self.sizes[from] -= 1;
        self.labels[item] = target;
        if self.sizes[from] > 0 {
            return None;
        }
        let last = self.k() - 1;
        if from != last {
            for l in self.labels.iter_mut() {
                if *l == last {
                    *l = from;
                }
            }
        }
        self.sizes.swap_remove(from);
        Some(from)
    }

    /// Removes `item` and renumbers remaining clusters by first appearance.
    pub fn without_item(&self, item: usize) -> Option<Self> {
        if self.n_items() <= 1 {
            return None;
        }
        let rest: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != item)
            .map(|(_, &l)| l)
            .collect();
        Some(Self::canonical(&rest))
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::from_labels(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// A partition with one parameter value per cluster and a concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState<P> {
    pub partition: Partition,
    pub params: Vec<P>,
    pub alpha: f64,
}

impl<P> MixtureState<P> {
    pub fn new(partition: Partition, params: Vec<P>, alpha: f64) -> Result<Self> {
        if params.len() != partition.k() {
            return Err(Error::Dimension(format!(
                "{} parameter sets for {} clusters",
                params.len(),
                partition.k()
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { partition, params, alpha })
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Checks partition/parameter consistency after an update.
    pub fn is_consistent(&self) -> bool {
        let p = &self.partition;
        self.params.len() == p.k()
            && p.sizes().iter().all(|&s| s > 0)
            && p.sizes().iter().sum::<usize>() == p.n_items()
            && p.labels().iter().all(|&l| l < p.k())
    }
}

/// The full state of one chain of the random-effects mixture.
pub type ChainState = MixtureState<ClusterParams>;
