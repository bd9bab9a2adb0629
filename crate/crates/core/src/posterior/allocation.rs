use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::log_likelihood_unchecked;
use crate::partition::ChainState;

/// Row-sum tolerance of allocation matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// `N x K` matrix of allocation probabilities, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    n: usize,
    k: usize,
    probs: Vec<f64>,
}

impl AllocationMatrix {
    /// Validates row-major probabilities: nonnegative rows summing to one.
    pub fn new(n: usize, k: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n * k {
            return Err(Error::Dimension(format!("{} entries for a {n} x {k} matrix", probs.len())));
        }
        for (i, row) in probs.chunks(k.max(1)).enumerate().take(n) {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Numeric(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Numeric(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { n, k, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    pub(crate) fn from_parts_unchecked(n: usize, k: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), n * k);
        Self { n, k, probs }
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn n_columns(&self) -> usize {
        self.k
    }

    pub fn get(&self, item: usize, column: usize) -> f64 {
        self.probs[item * self.k + column]
    }

    pub fn row(&self, item: usize) -> &[f64] {
        &self.probs[item * self.k..(item + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.rows().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Zero-fills extra columns up to `k`.
    pub fn padded(&self, k: usize) -> Self {
        assert!(k >= self.k, "cannot pad {} columns down to {k}", self.k);
        let mut probs = vec![0.0; self.n * k];
        for (i, row) in self.rows().enumerate() {
            probs[i * k..i * k + self.k].copy_from_slice(row);
        }
        Self { n: self.n, k, probs }
    }

    /// Moves column `c` to column `perm[c]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k);
        let mut probs = vec![0.0; self.probs.len()];
        for (i, row) in self.rows().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                probs[i * self.k + perm[c]] = p;
            }
        }
        Self { n: self.n, k: self.k, probs }
    }

    /// Index of the largest entry of each row, ties to the lower column.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows()
            .map(|r| {
                let mut best = 0;
                for (c, &p) in r.iter().enumerate() {
                    if p > r[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// How the symmetric Dirichlet weights of a snapshot are parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletWeights {
    /// `Dirichlet(alpha, ..., alpha)`.
    #[default]
    Literal,
    /// `Dirichlet(alpha / K, ..., alpha / K)`.
    Scaled,
    /// `Dirichlet(N_1 + alpha / K, ..., N_K + alpha / K)`.
    SizeAugmented,
}

impl DirichletWeights {
    pub fn shapes(self, state: &ChainState) -> Vec<f64> {
        let k = state.k() as f64;
        let a = state.alpha;
        match self {
            DirichletWeights::Literal => vec![a; state.k()],
            DirichletWeights::Scaled => vec![a / k; state.k()],
            DirichletWeights::SizeAugmented => {
                state.partition.sizes().iter().map(|&s| s as f64 + a / k).collect()
            }
        }
    }
}

/// Mixing proportions on the simplex, kept alongside their logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    log_w: Vec<f64>,
}

impl WeightVector {
    /// Draws from a Dirichlet distribution in log space so small shapes do
    /// not underflow: for shape `a < 1`, `log G = log G' + log(U) / a` with
    /// `G' ~ Gamma(a + 1)`.
    pub fn sample<R: Rng + ?Sized>(shapes: &[f64], rng: &mut R) -> Self {
        let mut log_g: Vec<f64> = shapes
            .iter()
            .map(|&a| {
                if !(a > 0.0) {
                    f64::NEG_INFINITY
                } else if a >= 1.0 {
                    Gamma::new(a, 1.0).expect("positive shape").sample(rng).ln()
                } else {
                    let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                    g.ln() + rng.random::<f64>().ln() / a
                }
            })
            .collect();
        if log_g.iter().all(|l| *l == f64::NEG_INFINITY) {
            log_g.iter_mut().for_each(|l| *l = 0.0);
        }
        let norm = log_sum_exp(&log_g);
        Self { log_w: log_g.iter().map(|l| l - norm).collect() }
    }

    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if w.iter().any(|x| !(*x >= 0.0)) || (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidParameter("weights must lie on the simplex".into()));
        }
        Ok(Self { log_w: w.iter().map(|x| x.ln()).collect() })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|l| l.exp()).collect()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Allocation probabilities of every item under one snapshot for given
/// mixing weights.
pub fn allocation_given_weights(snapshot: &ChainState, data: &Dataset, weights: &WeightVector) -> Result<AllocationMatrix> {
    let k = snapshot.k();
    if weights.log_w.len() != k {
        return Err(Error::Dimension(format!("{} weights for {k} clusters", weights.log_w.len())));
    }
    check_dims(snapshot, data)?;
    let r = data.n_replicates();
    let mut probs = Vec::with_capacity(data.n_items() * k);
    let mut row = vec![0.0; k];
    for i in 0..data.n_items() {
        let m = data.item(i);
        for (c, (p, lw)) in snapshot.params.iter().zip(&weights.log_w).enumerate() {
            row[c] = log_likelihood_unchecked(m, p, r) + lw;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric(format!("item {} has no finite allocation weight", data.items()[i])));
        }
        let total: f64 = row.iter().map(|x| (x - max).exp()).sum();
        probs.extend(row.iter().map(|x| (x - max).exp() / total));
    }
    Ok(AllocationMatrix::from_parts_unchecked(data.n_items(), k, probs))
}

fn check_dims(snapshot: &ChainState, data: &Dataset) -> Result<()> {
    if snapshot.partition.n_items() != data.n_items() {
        return Err(Error::Dimension(format!(
            "snapshot covers {} items, data has {}",
            snapshot.partition.n_items(),
            data.n_items()
        )));
    }
    if let Some(p) = snapshot.params.iter().find(|p| p.n_times() != data.n_times()) {
        return Err(Error::Dimension(format!(
            "cluster mean of length {} for {} time points",
            p.n_times(),
            data.n_times()
        )));
    }
    if snapshot.params.iter().any(|p| p.spectrum(data.n_replicates()).is_singular()) {
        return Err(Error::Numeric("snapshot has a singular cluster covariance".into()));
    }
    Ok(())
}

/// Draws mixing weights for a snapshot and returns the implied allocation
/// probabilities.
pub fn resample_allocation<R: Rng + ?Sized>(
    snapshot: &ChainState,
    data: &Dataset,
    mode: DirichletWeights,
    rng: &mut R,
) -> Result<AllocationMatrix> {
    let w = WeightVector::sample(&mode.shapes(snapshot), rng);
    allocation_given_weights(snapshot, data, &w)
}
