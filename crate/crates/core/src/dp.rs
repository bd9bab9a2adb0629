//! Dirichlet-process partition prior and concentration updates.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Prior on the concentration parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaPrior {
    /// Gamma(shape, rate), updated exactly by the auxiliary-variable Gibbs step.
    Gamma { shape: f64, rate: f64 },
    /// Uniform on `[0, upper]`, updated by reflected random-walk MH.
    Uniform { upper: f64 },
}

impl Default for AlphaPrior {
    fn default() -> Self {
        AlphaPrior::Gamma { shape: 1.0, rate: 1.0 }
    }
}

impl AlphaPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaPrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            AlphaPrior::Uniform { upper } => upper > 0.0 && upper.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid alpha prior {self:?}")))
        }
    }

    /// One update of alpha given the current partition. `step` is the MH
    /// proposal sd for the uniform prior; `None` means `0.1 * upper`.
    pub fn update<R: Rng + ?Sized>(
        &self,
        current: f64,
        partition: &Partition,
        step: Option<f64>,
        rng: &mut R,
    ) -> f64 {
        let (k, n) = (partition.k(), partition.n_items());
        match *self {
            AlphaPrior::Gamma { shape, rate } => sample_alpha_gibbs(k, n, shape, rate, current, rng),
            AlphaPrior::Uniform { upper } => {
                sample_alpha_mh(current, k, n, upper, step.unwrap_or(0.1 * upper), rng)
            }
        }
    }

    /// A starting value inside the support.
    pub fn initial_value(&self) -> f64 {
        match *self {
            AlphaPrior::Gamma { shape, rate } => shape / rate,
            AlphaPrior::Uniform { upper } => 0.5 * upper,
        }
    }
}

/// Predictive distribution of the next item's cluster under the Chinese
/// restaurant process: existing clusters first, then a new cluster.
pub fn crp_predictive(sizes: &[usize], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("at least one existing cluster is required".into()));
    }
    let denom = sizes.iter().sum::<usize>() as f64 + alpha;
    Ok(sizes
        .iter()
        .map(|&s| s as f64 / denom)
        .chain(std::iter::once(alpha / denom))
        .collect())
}

/// Log prior probability of a partition given cluster sizes.
pub fn log_prior_from_sizes(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    if alpha == 0.0 {
        return if k == 1 { 0.0 } else { f64::NEG_INFINITY };
    }
    let blocks: f64 = sizes.iter().map(|&s| ln_gamma(s as f64)).sum();
    ln_gamma(alpha) - ln_gamma(alpha + n as f64) + k as f64 * alpha.ln() + blocks
}

/// Log of `Gamma(a) / Gamma(a + N) * a^K * prod (N_l - 1)!`.
pub fn partition_log_prior(partition: &Partition, alpha: f64) -> f64 {
    log_prior_from_sizes(partition.sizes(), alpha)
}

/// Prior probability of item `i`'s current cluster given all other labels.
pub fn conditional_membership_prob(partition: &Partition, item: usize, alpha: f64) -> f64 {
    let n = partition.n_items();
    if n == 1 {
        return 1.0;
    }
    let denom = (n - 1) as f64 + alpha;
    if partition.is_singleton(item) {
        alpha / denom
    } else {
        (partition.size(partition.label(item)) - 1) as f64 / denom
    }
}

/// Log of the alpha-dependent part of the partition likelihood,
/// `alpha^K Gamma(alpha) / Gamma(alpha + n)`, finite at zero when `K = 1`.
pub fn log_alpha_likelihood(alpha: f64, k: usize, n: usize) -> f64 {
    if alpha < 0.0 {
        return f64::NEG_INFINITY;
    }
    let power = if k > 1 { (k - 1) as f64 * alpha.ln() } else { 0.0 };
    power + ln_gamma(alpha + 1.0) - ln_gamma(alpha + n as f64)
}

/// Exact draw of alpha from its full conditional under a Gamma(shape, rate)
/// prior, using the auxiliary `eta ~ Beta(alpha + 1, n)` augmentation.
pub fn sample_alpha_gibbs<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    shape: f64,
    rate: f64,
    current: f64,
    rng: &mut R,
) -> f64 {
    let eta: f64 = Beta::new(current.max(0.0) + 1.0, n as f64)
        .expect("valid beta parameters")
        .sample(rng);
    let rate_post = rate - eta.ln();
    let odds = (shape + k as f64 - 1.0) / (n as f64 * rate_post);
    let weight = odds / (1.0 + odds);
    let post_shape = if rng.random::<f64>() < weight {
        shape + k as f64
    } else {
        shape + k as f64 - 1.0
    };
    if post_shape <= 0.0 {
        // shape < 1 with k = 1 can put weight on a degenerate component
        return 0.0;
    }
    Gamma::new(post_shape, 1.0 / rate_post)
        .expect("valid gamma parameters")
        .sample(rng)
}

/// Folds `x` back into `[0, upper]` by reflection at both ends.
pub fn reflect(x: f64, upper: f64) -> f64 {
    let y = x.rem_euclid(2.0 * upper);
    if y > upper {
        2.0 * upper - y
    } else {
        y
    }
}

/// One reflected Gaussian random-walk MH step for alpha under a uniform
/// prior on `[0, upper]`.
pub fn sample_alpha_mh<R: Rng + ?Sized>(
    current: f64,
    k: usize,
    n: usize,
    upper: f64,
    step: f64,
    rng: &mut R,
) -> f64 {
    if step == 0.0 {
        return current;
    }
    let z: f64 = StandardNormal.sample(rng);
    let proposal = reflect(current + step * z, upper);
    let log_ratio = log_alpha_likelihood(proposal, k, n) - log_alpha_likelihood(current, k, n);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        proposal
    } else {
        current
    }
}
