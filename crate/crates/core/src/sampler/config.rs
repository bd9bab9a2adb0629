use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dp::AlphaPrior;
use crate::error::{Error, Result};
use crate::simulate::{BrownianParams, OuParams};

/// Proposal scheme for single-item membership moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipKernel {
    /// Uniform over all other labels plus a new cluster.
    #[default]
    Uniform,
    /// Proposal from the prior conditional of the label (Neal's scheme).
    Neal,
}

/// Prior family for cluster mean profiles. Every option is Gaussian with
/// covariance `mean_prior_sd^2 I`; the process options fix its mean path to
/// one realization drawn when the chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanPrior {
    #[default]
    Zero,
    Ou(OuParams),
    Brownian(BrownianParams),
}

/// Settings of one MCMC run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    /// Fraction of `iterations` discarded before recording.
    pub burn_in: f64,
    pub thin: usize,
    pub seed: u64,
    pub alpha_prior: AlphaPrior,
    /// Random-walk sd for alpha under a uniform prior; default `0.1 * upper`.
    pub alpha_step: Option<f64>,
    /// Upper bound of the uniform prior on each variance; default is the
    /// pooled variance of the data.
    pub lambda_upper: Option<f64>,
    /// Log-scale random-walk sd for variance updates.
    pub lambda_step: f64,
    pub mean_prior: MeanPrior,
    /// Prior sd of mean profiles; default is the pooled sd of the data.
    pub mean_prior_sd: Option<f64>,
    /// Number of clusters in the random initial partition.
    pub init_clusters: usize,
    pub kernel: MembershipKernel,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_800,
            burn_in: 0.2,
            thin: 54,
            seed: 0,
            alpha_prior: AlphaPrior::default(),
            alpha_step: None,
            lambda_upper: None,
            lambda_step: 0.3,
            mean_prior: MeanPrior::Zero,
            mean_prior_sd: None,
            init_clusters: 10,
            kernel: MembershipKernel::Uniform,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn-in fraction must lie in [0, 1), got {}", self.burn_in));
        }
        if let Some(u) = self.lambda_upper {
            if !(u > 0.0 && u.is_finite()) {
                return bad(format!("lambda upper bound must be positive, got {u}"));
            }
        }
        if let Some(s) = self.mean_prior_sd {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("mean prior sd must be positive, got {s}"));
            }
        }
        if !(self.lambda_step >= 0.0) {
            return bad("lambda step must be nonnegative".into());
        }
        if self.init_clusters == 0 {
            return bad("init_clusters must be at least 1".into());
        }
        match self.mean_prior {
            MeanPrior::Ou(p) => p.validate()?,
            MeanPrior::Brownian(p) => p.validate()?,
            MeanPrior::Zero => {}
        }
        self.alpha_prior.validate()
    }

    /// Number of discarded iterations.
    pub fn burn_in_iterations(&self) -> usize {
        (self.burn_in * self.iterations as f64).round() as usize
    }

    /// Number of snapshots a run records.
    pub fn recorded_snapshots(&self) -> usize {
        (self.iterations - self.burn_in_iterations().min(self.iterations)) / self.thin
    }

    /// Whether iteration `t` (1-based) is recorded.
    pub fn records(&self, t: usize) -> bool {
        let burn = self.burn_in_iterations();
        t > burn && (t - burn) % self.thin == 0
    }

    pub fn resolved_lambda_upper(&self, data: &Dataset) -> f64 {
        self.lambda_upper.unwrap_or_else(|| {
            let v = data.pooled_variance();
            if v > 0.0 { v } else { 1.0 }
        })
    }

    pub fn resolved_mean_prior_sd(&self, data: &Dataset) -> f64 {
        self.mean_prior_sd.unwrap_or_else(|| {
            let v = data.pooled_variance().sqrt();
            if v > 0.0 { v } else { 1.0 }
        })
    }
}
