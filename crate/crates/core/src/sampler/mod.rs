//! The two-step MCMC engine: membership moves, then parameter updates.

mod config;
mod membership;
mod parameters;
mod trace;

pub use config::{ChainConfig, MeanPrior, MembershipKernel};
pub use membership::{
    hastings_ratio, log_hastings_ratio, propose_membership, update_memberships, ComponentLikelihood, MoveCase,
    SweepStats,
};
pub use parameters::{
    sample_theta, theta_conditional, update_cluster, update_parameters, BaseMeasure, StructuredLikelihood,
    VarianceStats,
};
pub use trace::{Snapshot, Trace};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::partition::{ChainState, Partition};
use crate::simulate::{bm_mean_path, ou_mean_path};

/// A running chain over one dataset.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    lik: StructuredLikelihood<'a>,
    cfg: ChainConfig,
    state: ChainState,
    rng: ChaCha8Rng,
    iteration: usize,
    membership_stats: SweepStats,
    variance_stats: VarianceStats,
}

impl<'a> Chain<'a> {
    /// Starts from a random partition into `init_clusters` groups with
    /// parameters drawn from the base measure and then updated once.
    pub fn new(data: &'a Dataset, cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let base = base_measure(data, &cfg, &mut rng);
        let k0 = cfg.init_clusters.min(data.n_items());
        let labels: Vec<usize> = (0..data.n_items()).map(|_| rng.random_range(0..k0)).collect();
        let partition = Partition::canonical(&labels);
        let params = (0..partition.k()).map(|_| base.draw(&mut rng)).collect();
        let alpha = cfg.alpha_prior.initial_value();
        let mut state = ChainState::new(partition, params, alpha)?;
        update_parameters(&mut state, data, &base, cfg.lambda_step, &mut rng);
        Ok(Self::assemble(data, cfg, base, state, rng))
    }

    /// Starts from a given state; the base measure is still derived from
    /// `cfg` and the data.
    pub fn with_state(data: &'a Dataset, cfg: ChainConfig, state: ChainState) -> Result<Self> {
        cfg.validate()?;
        if state.partition.n_items() != data.n_items() {
            return Err(crate::error::Error::Dimension(format!(
                "state covers {} items, data has {}",
                state.partition.n_items(),
                data.n_items()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let base = base_measure(data, &cfg, &mut rng);
        Ok(Self::assemble(data, cfg, base, state, rng))
    }

    fn assemble(data: &'a Dataset, cfg: ChainConfig, base: BaseMeasure, state: ChainState, rng: ChaCha8Rng) -> Self {
        Self {
            lik: StructuredLikelihood { data, base },
            cfg,
            state,
            rng,
            iteration: 0,
            membership_stats: SweepStats::default(),
            variance_stats: VarianceStats::default(),
        }
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.lik.base
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn membership_stats(&self) -> &SweepStats {
        &self.membership_stats
    }

    pub fn variance_stats(&self) -> &VarianceStats {
        &self.variance_stats
    }

    /// One full iteration: membership sweep, parameter updates, alpha.
    pub fn step(&mut self) {
        let s = update_memberships(&mut self.state, &self.lik, self.cfg.kernel, &mut self.rng);
        self.membership_stats.merge(&s);
        self.step_parameters();
    }

    /// Parameter and alpha updates with the partition held fixed.
    pub fn step_parameters(&mut self) {
        let v = update_parameters(&mut self.state, self.lik.data, &self.lik.base, self.cfg.lambda_step, &mut self.rng);
        self.variance_stats.proposed += v.proposed;
        self.variance_stats.accepted += v.accepted;
        self.state.alpha =
            self.cfg.alpha_prior.update(self.state.alpha, &self.state.partition, self.cfg.alpha_step, &mut self.rng);
        self.iteration += 1;
    }

    /// Runs the configured number of iterations, recording thinned
    /// post-burn-in snapshots.
    pub fn run(mut self) -> Trace {
        let mut trace = Trace { snapshots: Vec::with_capacity(self.cfg.recorded_snapshots()) };
        for t in 1..=self.cfg.iterations {
            self.step();
            if self.cfg.records(t) {
                trace.snapshots.push(Snapshot { iteration: t, state: self.state.clone() });
            }
        }
        trace
    }
}

fn base_measure<R: Rng + ?Sized>(data: &Dataset, cfg: &ChainConfig, rng: &mut R) -> BaseMeasure {
    let grid = data.grid();
    let prior_mean = match cfg.mean_prior {
        MeanPrior::Zero => vec![0.0; grid.len()],
        MeanPrior::Ou(p) => ou_mean_path(&p, grid, rng),
        MeanPrior::Brownian(p) => bm_mean_path(&p, grid, rng),
    };
    BaseMeasure {
        prior_mean,
        prior_sd: cfg.resolved_mean_prior_sd(data),
        lambda_upper: cfg.resolved_lambda_upper(data),
    }
}

/// Runs one chain to completion. Identical inputs give identical traces.
pub fn run_chain(data: &Dataset, cfg: &ChainConfig) -> Result<Trace> {
    Ok(Chain::new(data, cfg.clone())?.run())
}

/// Integrated autocorrelation time of a scalar series, with Sokal's
/// adaptive window (`c = 5`).
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n {
        let c = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>()
            / (n as f64 * var);
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0 / n as f64)
}
