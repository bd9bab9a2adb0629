//! Cluster parameter updates for the random-effects mixture.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::model::{log_likelihood_unchecked, ClusterParams, Deviation, Spectrum, MIN_RESID_VAR};
use crate::partition::ChainState;
use crate::sampler::membership::ComponentLikelihood;

/// Base measure of cluster parameters: `theta ~ N(prior_mean, prior_sd^2 I)`
/// and each variance uniform on `[0, lambda_upper]` (the residual variance
/// floored at [`MIN_RESID_VAR`]).
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMeasure {
    pub prior_mean: Vec<f64>,
    pub prior_sd: f64,
    pub lambda_upper: f64,
}

impl BaseMeasure {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterParams {
        let theta = self
            .prior_mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.prior_sd * z
            })
            .collect();
        let u = self.lambda_upper;
        ClusterParams {
            theta,
            var_within: rng.random::<f64>() * u,
            var_cond: rng.random::<f64>() * u,
            var_resid: (rng.random::<f64>() * u).max(MIN_RESID_VAR),
        }
    }
}

/// The structured Gaussian likelihood of a dataset with a [`BaseMeasure`].
#[derive(Debug, Clone)]
pub struct StructuredLikelihood<'a> {
    pub data: &'a Dataset,
    pub base: BaseMeasure,
}

impl ComponentLikelihood for StructuredLikelihood<'_> {
    type Params = ClusterParams;

    fn n_items(&self) -> usize {
        self.data.n_items()
    }

    fn log_density(&self, item: usize, params: &ClusterParams) -> f64 {
        log_likelihood_unchecked(self.data.item(item), params, self.data.n_replicates())
    }

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterParams {
        self.base.draw(rng)
    }
}

/// Draws `theta` from its Gaussian full conditional given the members'
/// data and the cluster's variance components.
///
/// Both the prior precision and `A' Sigma^-1 A` (with `A` replicating theta
/// across replicates) are diagonal in the split "constant vector" plus
/// "centered vectors", so the conditional is sampled in `O(J)` after an
/// `O(nJR)` pass over the members.
pub fn sample_theta<R: Rng + ?Sized>(
    data: &Dataset,
    members: &[usize],
    params: &ClusterParams,
    base: &BaseMeasure,
    rng: &mut R,
) -> Vec<f64> {
    let (j, r) = (data.n_times(), data.n_replicates());
    let s = params.spectrum(r);
    let (mean, c_centered, c_const) = theta_conditional(data, members, &s, base);
    let z: Vec<f64> = (0..j).map(|_| StandardNormal.sample(rng)).collect();
    let z_bar = z.iter().sum::<f64>() / j as f64;
    mean.iter()
        .zip(&z)
        .map(|(m, zi)| m + (zi - z_bar) / c_centered.sqrt() + z_bar / c_const.sqrt())
        .collect()
}

/// Mean and the two precision eigenvalues (centered, constant) of the
/// theta full conditional.
pub fn theta_conditional(
    data: &Dataset,
    members: &[usize],
    s: &Spectrum,
    base: &BaseMeasure,
) -> (Vec<f64>, f64, f64) {
    let (j, r) = (data.n_times(), data.n_replicates());
    let n = members.len() as f64;
    let mut sum_b = vec![0.0; j];
    for &i in members {
        for (acc, chunk) in sum_b.iter_mut().zip(data.item(i).chunks_exact(r)) {
            *acc += chunk.iter().sum::<f64>() / r as f64;
        }
    }
    let g = sum_b.iter().sum::<f64>() / j as f64;
    let prior_prec = 1.0 / (base.prior_sd * base.prior_sd);
    let rf = r as f64;
    let v: Vec<f64> = sum_b
        .iter()
        .zip(&base.prior_mean)
        .map(|(b, m0)| m0 * prior_prec + rf * ((b - g) / s.cond + g / s.total))
        .collect();
    let c_centered = prior_prec + n * rf / s.cond;
    let c_const = prior_prec + n * rf / s.total;
    let v_bar = v.iter().sum::<f64>() / j as f64;
    let mean = v.iter().map(|vi| (vi - v_bar) / c_centered + v_bar / c_const).collect();
    (mean, c_centered, c_const)
}

#[derive(Clone, Copy)]
enum Component {
    Within,
    Cond,
    Resid,
}

/// Log-scale random-walk MH on one variance component against the
/// cluster's likelihood, under a uniform prior on `[0, upper]`.
fn update_variance<R: Rng + ?Sized>(
    params: &mut ClusterParams,
    which: Component,
    dev: &Deviation,
    count: usize,
    n_replicates: usize,
    upper: f64,
    step: f64,
    rng: &mut R,
) -> bool {
    if step == 0.0 {
        return false;
    }
    let current = match which {
        Component::Within => params.var_within,
        Component::Cond => params.var_cond,
        Component::Resid => params.var_resid,
    };
    if current <= 0.0 {
        // a variance drawn as exactly zero cannot move on the log scale
        return false;
    }
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current * (step * z).exp();
    let floor = if matches!(which, Component::Resid) { MIN_RESID_VAR } else { 0.0 };
    if proposal > upper || proposal < floor {
        return false;
    }
    let mut cand = params.clone();
    match which {
        Component::Within => cand.var_within = proposal,
        Component::Cond => cand.var_cond = proposal,
        Component::Resid => cand.var_resid = proposal,
    }
    let old = params.spectrum(n_replicates).log_density_sum(dev, count);
    let new = cand.spectrum(n_replicates).log_density_sum(dev, count);
    // (proposal / current) is the Jacobian of the log-scale walk
    let log_ratio = new - old + (proposal / current).ln();
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        *params = cand;
        true
    } else {
        false
    }
}

/// Acceptance counts of the variance updates in one call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VarianceStats {
    pub proposed: usize,
    pub accepted: usize,
}

/// Updates the parameters of one cluster: theta by Gibbs, then each
/// variance component by one MH step.
pub fn update_cluster<R: Rng + ?Sized>(
    params: &mut ClusterParams,
    data: &Dataset,
    members: &[usize],
    base: &BaseMeasure,
    lambda_step: f64,
    rng: &mut R,
) -> VarianceStats {
    let r = data.n_replicates();
    params.theta = sample_theta(data, members, params, base, rng);
    let mut dev = Deviation::default();
    for &i in members {
        dev += Deviation::of(data.item(i), &params.theta, r);
    }
    let mut stats = VarianceStats::default();
    for which in [Component::Within, Component::Cond, Component::Resid] {
        stats.proposed += 1;
        if update_variance(params, which, &dev, members.len(), r, base.lambda_upper, lambda_step, rng) {
            stats.accepted += 1;
        }
    }
    stats
}

/// Step 2 of an iteration: every cluster's parameters given the partition.
/// The concentration update is left to the caller.
pub fn update_parameters<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    base: &BaseMeasure,
    lambda_step: f64,
    rng: &mut R,
) -> VarianceStats {
    let members = state.partition.members();
    let mut stats = VarianceStats::default();
    for (params, m) in state.params.iter_mut().zip(&members) {
        let s = update_cluster(params, data, m, base, lambda_step, rng);
        stats.proposed += s.proposed;
        stats.accepted += s.accepted;
    }
    stats
}
