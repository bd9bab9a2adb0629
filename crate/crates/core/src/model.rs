//! Cluster parameters and the structured Gaussian likelihood of one item.
//!
//! Given membership in a cluster with mean profile `theta` and variance
//! components `(var_within, var_cond, var_resid)`, an item's flattened vector
//! is Gaussian with mean `theta` repeated per replicate and covariance
//!
//! ```text
//! Cov(M_jr, M_j'r') = var_within + var_cond * [j == j'] + var_resid * [j == j' && r == r']
//! ```
//!
//! The covariance is `var_resid * I + R var_cond * B + JR var_within * U`
//! with `B` the projector onto replicate-constant vectors and `U` the
//! projector onto the constant vector, so it has three eigenspaces:
//!
//! | eigenvalue                                   | multiplicity |
//! |----------------------------------------------|--------------|
//! | `var_resid`                                  | `J (R - 1)`  |
//! | `var_resid + R var_cond`                     | `J - 1`      |
//! | `var_resid + R var_cond + J R var_within`    | `1`          |
//!
//! and the log density costs `O(JR)` without any factorization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest residual variance the sampler will ever hold.
pub const MIN_RESID_VAR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean profile and variance components of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub theta: Vec<f64>,
    /// Within-cluster (item-level) variance.
    pub var_within: f64,
    /// Cross-condition (item-by-time) variance.
    pub var_cond: f64,
    /// Residual (replicate) variance.
    pub var_resid: f64,
}

impl ClusterParams {
    pub fn new(theta: Vec<f64>, var_within: f64, var_cond: f64, var_resid: f64) -> Result<Self> {
        let p = Self { theta, var_within, var_cond, var_resid };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("var_within", self.var_within),
            ("var_cond", self.var_cond),
            ("var_resid", self.var_resid),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.theta.is_empty() {
            return Err(Error::InvalidParameter("theta must be nonempty".into()));
        }
        if let Some(t) = self.theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite theta entry {t}")));
        }
        Ok(())
    }

    pub fn n_times(&self) -> usize {
        self.theta.len()
    }

    /// Standard deviations `(sd_within, sd_cond, sd_resid)`.
    pub fn sds(&self) -> [f64; 3] {
        [self.var_within.sqrt(), self.var_cond.sqrt(), self.var_resid.sqrt()]
    }

    pub fn spectrum(&self, n_replicates: usize) -> Spectrum {
        Spectrum::new(self, n_replicates)
    }
}

/// `theta` repeated once per replicate at each time point (replicate fastest).
pub fn aggregate_mean(theta: &[f64], n_replicates: usize) -> Vec<f64> {
    theta
        .iter()
        .flat_map(|&t| std::iter::repeat_n(t, n_replicates))
        .collect()
}

/// Dense `JR x JR` covariance of one item's flattened vector.
pub fn build_covariance(p: &ClusterParams, n_replicates: usize) -> Result<DMatrix<f64>> {
    p.validate()?;
    let r = n_replicates;
    let n = p.n_times() * r;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        let (ja, ra) = (a / r, a % r);
        let (jb, rb) = (b / r, b % r);
        let mut v = p.var_within;
        if ja == jb {
            v += p.var_cond;
            if ra == rb {
                v += p.var_resid;
            }
        }
        v
    }))
}

/// Squared lengths of a residual vector's projections onto the three
/// covariance eigenspaces.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Deviation {
    /// Spread of replicates around their per-time mean.
    pub within: f64,
    /// Spread of per-time means around the overall mean, scaled by `R`.
    pub between: f64,
    /// Overall mean squared, scaled by `JR`.
    pub grand: f64,
}

impl Deviation {
    /// Decomposes `m - aggregate_mean(theta)`.
    pub fn of(m: &[f64], theta: &[f64], n_replicates: usize) -> Self {
        let r = n_replicates;
        let j = theta.len();
        debug_assert_eq!(m.len(), j * r);
        let time_means = m.chunks_exact(r).map(|c| c.iter().sum::<f64>() / r as f64);
        let g = time_means.clone().zip(theta).map(|(b, t)| b - t).sum::<f64>() / j as f64;
        let mut within = 0.0;
        let mut between = 0.0;
        for ((chunk, mean), t) in m.chunks_exact(r).zip(time_means).zip(theta) {
            within += chunk.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            between += (mean - t - g).powi(2);
        }
        Self { within, between: r as f64 * between, grand: (j * r) as f64 * g * g }
    }
}

impl std::ops::AddAssign for Deviation {
    fn add_assign(&mut self, rhs: Self) {
        self.within += rhs.within;
        self.between += rhs.between;
        self.grand += rhs.grand;
    }
}

/// Closed-form eigenstructure of the structured covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub resid: f64,
    pub cond: f64,
    pub total: f64,
    pub n_times: usize,
    pub n_replicates: usize,
}

impl Spectrum {
    pub fn new(p: &ClusterParams, n_replicates: usize) -> Self {
        Self::from_components(p.var_within, p.var_cond, p.var_resid, p.n_times(), n_replicates)
    }

    pub fn from_components(
        var_within: f64,
        var_cond: f64,
        var_resid: f64,
        n_times: usize,
        n_replicates: usize,
    ) -> Self {
        let (j, r) = (n_times as f64, n_replicates as f64);
        let cond = var_resid + r * var_cond;
        Self { resid: var_resid, cond, total: cond + j * r * var_within, n_times, n_replicates }
    }

    /// `(eigenvalue, multiplicity)` pairs, omitting empty eigenspaces.
    pub fn eigenvalues(&self) -> Vec<(f64, usize)> {
        let (j, r) = (self.n_times, self.n_replicates);
        [(self.resid, j * (r - 1)), (self.cond, j - 1), (self.total, 1)]
            .into_iter()
            .filter(|&(_, m)| m > 0)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n_times * self.n_replicates
    }

    pub fn is_singular(&self) -> bool {
        !(self.total > 0.0)
            || (self.n_times > 1 && !(self.cond > 0.0))
            || (self.n_replicates > 1 && !(self.resid > 0.0))
    }

    pub fn log_det(&self) -> f64 {
        let (j, r) = (self.n_times, self.n_replicates);
        let mut ld = self.total.ln();
        if j > 1 {
            ld += (j - 1) as f64 * self.cond.ln();
        }
        if r > 1 {
            ld += (j * (r - 1)) as f64 * self.resid.ln();
        }
        ld
    }

    /// Mahalanobis form of a decomposed deviation.
    pub fn quad(&self, d: &Deviation) -> f64 {
        let mut q = d.grand / self.total;
        if self.n_times > 1 {
            q += d.between / self.cond;
        }
        if self.n_replicates > 1 {
            q += d.within / self.resid;
        }
        q
    }

    /// Log density summed over `count` items whose deviations add up to `d`.
    pub fn log_density_sum(&self, d: &Deviation, count: usize) -> f64 {
        -0.5 * (count as f64 * (self.dim() as f64 * LN_2PI + self.log_det()) + self.quad(d))
    }
}

/// Exact multivariate normal log density of one flattened item vector.
pub fn log_likelihood(m: &[f64], p: &ClusterParams, n_replicates: usize) -> Result<f64> {
    if n_replicates == 0 || m.len() != p.n_times() * n_replicates {
        return Err(Error::Dimension(format!(
            "item vector has length {}, expected {} x {}",
            m.len(),
            p.n_times(),
            n_replicates
        )));
    }
    p.validate()?;
    let s = p.spectrum(n_replicates);
    if s.is_singular() {
        return Err(Error::Numeric(format!(
            "singular covariance (var_within={}, var_cond={}, var_resid={})",
            p.var_within, p.var_cond, p.var_resid
        )));
    }
    Ok(s.log_density_sum(&Deviation::of(m, &p.theta, n_replicates), 1))
}

/// Log density without validation, for the sampler's inner loop.
#[inline]
pub(crate) fn log_likelihood_unchecked(m: &[f64], p: &ClusterParams, n_replicates: usize) -> f64 {
    p.spectrum(n_replicates)
        .log_density_sum(&Deviation::of(m, &p.theta, n_replicates), 1)
}
