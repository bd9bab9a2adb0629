//! Synthetic replicated time-course data with known clustering.
//!
//! Cluster mean profiles come from an Ornstein-Uhlenbeck process (or a
//! Brownian motion with drift) sampled exactly on the time grid; members are
//! then generated through the random-effects decomposition
//! `M_ijr = theta_j + phi_i + tau_ij + eps_ijr`, which has exactly the
//! structured covariance of [`crate::model::build_covariance`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeGrid};
use crate::error::{Error, Result};
use crate::model::ClusterParams;
use crate::partition::Partition;

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

/// Ornstein-Uhlenbeck path parameters. The process mean itself is drawn
/// from `N(mean, mean_sd^2)` once per path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub start_mean: f64,
    pub start_sd: f64,
    pub mean: f64,
    #[serde(default)]
    pub mean_sd: f64,
    /// Diffusion coefficient.
    pub sd: f64,
    /// Mean-reverting rate per time unit.
    pub rate: f64,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        let sds = [self.start_sd, self.mean_sd, self.sd];
        if sds.iter().any(|s| !(*s >= 0.0)) || !(self.rate > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid OU parameters {self:?}")));
        }
        Ok(())
    }

    /// Stationary marginal standard deviation `sd / sqrt(2 rate)`.
    pub fn stationary_sd(&self) -> f64 {
        self.sd / (2.0 * self.rate).sqrt()
    }
}

impl Default for OuParams {
    fn default() -> Self {
        Self { start_mean: 0.0, start_sd: 0.5, mean: 0.0, mean_sd: 0.5, sd: 0.3, rate: 0.05 }
    }
}

/// Brownian motion with drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianParams {
    pub start_mean: f64,
    pub start_sd: f64,
    pub drift: f64,
    pub sd: f64,
}

impl BrownianParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_sd >= 0.0) || !(self.sd >= 0.0) || !self.drift.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid Brownian parameters {self:?}")));
        }
        Ok(())
    }
}

/// Exact discretization of an OU process on `grid`.
pub fn ou_mean_path<R: Rng + ?Sized>(p: &OuParams, grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let mu = normal(rng, p.mean, p.mean_sd);
    let mut x = normal(rng, p.start_mean, p.start_sd);
    let mut path = Vec::with_capacity(grid.len());
    path.push(x);
    for dt in grid.steps() {
        let decay = (-p.rate * dt).exp();
        let var = p.sd * p.sd * (1.0 - decay * decay) / (2.0 * p.rate);
        x = mu + (x - mu) * decay + normal(rng, 0.0, var.sqrt());
        path.push(x);
    }
    path
}

/// Brownian motion with drift sampled on `grid`.
pub fn bm_mean_path<R: Rng + ?Sized>(p: &BrownianParams, grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let mut x = normal(rng, p.start_mean, p.start_sd);
    let mut path = Vec::with_capacity(grid.len());
    path.push(x);
    for dt in grid.steps() {
        x += p.drift * dt + normal(rng, 0.0, p.sd * dt.sqrt());
        path.push(x);
    }
    path
}

/// How a cluster's mean profile is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanProcess {
    Ou(OuParams),
    Brownian(BrownianParams),
    Fixed { theta: Vec<f64> },
}

impl MeanProcess {
    pub fn sample<R: Rng + ?Sized>(&self, grid: &TimeGrid, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            MeanProcess::Ou(p) => {
                p.validate()?;
                Ok(ou_mean_path(p, grid, rng))
            }
            MeanProcess::Brownian(p) => {
                p.validate()?;
                Ok(bm_mean_path(p, grid, rng))
            }
            MeanProcess::Fixed { theta } => {
                if theta.len() != grid.len() {
                    return Err(Error::Dimension(format!(
                        "fixed mean of length {} on a grid of {} points",
                        theta.len(),
                        grid.len()
                    )));
                }
                Ok(theta.clone())
            }
        }
    }
}

impl Default for MeanProcess {
    fn default() -> Self {
        MeanProcess::Ou(OuParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub size: usize,
    pub sd_within: f64,
    pub sd_cond: f64,
    pub sd_resid: f64,
    #[serde(default)]
    pub mean: MeanProcess,
}

impl ClusterSpec {
    fn ou(size: usize, sd_within: f64, sd_cond: f64, sd_resid: f64) -> Self {
        Self { size, sd_within, sd_cond, sd_resid, mean: MeanProcess::default() }
    }
}

/// A full simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub clusters: Vec<ClusterSpec>,
    #[serde(default = "TimeGrid::notch")]
    pub grid: TimeGrid,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
}

fn default_replicates() -> usize {
    4
}

/// Identifiers of the built-in scenarios.
pub const BUILTIN_SCENARIOS: [&str; 4] = ["sim1", "sim2", "sim3", "sim4"];

impl Scenario {
    /// One of the four built-in six-cluster designs (18 time points, 4 replicates).
    pub fn builtin(id: &str) -> Result<Self> {
        // (sd_within, sd_cond, sd_resid, size)
        let rows: &[(f64, f64, f64, usize)] = match id {
            "sim1" => &[
                (0.05, 0.01, 0.2, 80),
                (0.1, 0.05, 0.2, 20),
                (0.1, 0.05, 0.2, 10),
                (0.1, 0.05, 0.1, 10),
                (0.2, 0.1, 0.2, 70),
                (0.5, 0.1, 0.6, 10),
            ],
            "sim2" => &[
                (0.01, 0.5, 0.5, 20),
                (0.1, 0.5, 0.5, 20),
                (0.1, 0.5, 0.5, 20),
                (0.5, 0.5, 0.5, 20),
                (0.5, 0.5, 0.5, 20),
                (1.0, 0.5, 0.5, 20),
            ],
            "sim3" => &[
                (0.0, 0.0, 0.26, 80),
                (0.0, 0.0, 0.35, 20),
                (0.0, 0.0, 0.35, 10),
                (0.0, 0.0, 0.25, 10),
                (0.0, 0.0, 0.50, 70),
                (0.0, 0.0, 1.20, 10),
            ],
            "sim4" => &[
                (0.0, 0.0, 1.01, 20),
                (0.0, 0.0, 1.1, 20),
                (0.0, 0.0, 1.1, 20),
                (0.0, 0.0, 1.5, 20),
                (0.0, 0.0, 1.5, 20),
                (0.0, 0.0, 2.0, 20),
            ],
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        Ok(Self {
            name: id.to_string(),
            clusters: rows.iter().map(|&(w, c, r, n)| ClusterSpec::ou(n, w, c, r)).collect(),
            grid: TimeGrid::notch(),
            n_replicates: 4,
        })
    }

    pub fn n_items(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidParameter("scenario has no clusters".into()));
        }
        if self.n_replicates == 0 {
            return Err(Error::InvalidParameter("scenario needs at least one replicate".into()));
        }
        for (k, c) in self.clusters.iter().enumerate() {
            if c.size == 0 {
                return Err(Error::InvalidParameter(format!("cluster {} has size 0", k + 1)));
            }
            if [c.sd_within, c.sd_cond, c.sd_resid].iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::InvalidParameter(format!("cluster {} has a negative sd", k + 1)));
            }
        }
        Ok(())
    }
}

/// A simulated dataset with its generating clustering.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub truth: Partition,
    pub params: Vec<ClusterParams>,
}

/// Draws one dataset from `scenario`. Each cluster uses its own rng stream
/// split off `rng`, so cluster `k`'s draws do not depend on earlier sizes.
pub fn generate_dataset<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Simulated> {
    scenario.validate()?;
    let grid = &scenario.grid;
    let (j, r) = (grid.len(), scenario.n_replicates);
    let seeds: Vec<u64> = scenario.clusters.iter().map(|_| rng.random()).collect();
    let mut values = Vec::with_capacity(scenario.n_items() * j * r);
    let mut labels = Vec::with_capacity(scenario.n_items());
    let mut params = Vec::with_capacity(scenario.clusters.len());
    for (k, (spec, seed)) in scenario.clusters.iter().zip(seeds).enumerate() {
        let mut crng = ChaCha8Rng::seed_from_u64(seed);
        let theta = spec.mean.sample(grid, &mut crng)?;
        for _ in 0..spec.size {
            let phi = normal(&mut crng, 0.0, spec.sd_within);
            for &t in &theta {
                let tau = normal(&mut crng, 0.0, spec.sd_cond);
                for _ in 0..r {
                    values.push(t + phi + tau + normal(&mut crng, 0.0, spec.sd_resid));
                }
            }
            labels.push(k);
        }
        params.push(ClusterParams::new(
            theta,
            spec.sd_within.powi(2),
            spec.sd_cond.powi(2),
            spec.sd_resid.powi(2),
        )?);
    }
    let n = labels.len();
    let width = n.to_string().len();
    let items = (1..=n).map(|i| format!("item{i:0width$}")).collect();
    let reps = (1..=r).map(|x| x.to_string()).collect();
    Ok(Simulated {
        data: Dataset::new(items, reps, grid.clone(), values)?,
        truth: Partition::from_labels(labels)?,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn noiseless_ou_fixed_point() {
        let p = OuParams { start_mean: 1.5, start_sd: 0.0, mean: 1.5, mean_sd: 0.0, sd: 0.0, rate: 0.2 };
        let path = ou_mean_path(&p, &TimeGrid::notch(), &mut rng(0));
        assert!(path.iter().all(|&x| x == 1.5));
    }

    #[test]
    fn noiseless_ou_decays_geometrically() {
        let p = OuParams { start_mean: 2.0, start_sd: 0.0, mean: 0.5, mean_sd: 0.0, sd: 0.0, rate: 0.1 };
        let grid = TimeGrid::notch();
        let path = ou_mean_path(&p, &grid, &mut rng(0));
        for (w, dt) in path.windows(2).zip(grid.steps()) {
            assert_relative_eq!(w[1] - 0.5, (w[0] - 0.5) * (-0.1 * dt).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_brownian_is_a_line() {
        let p = BrownianParams { start_mean: -1.0, start_sd: 0.0, drift: 0.02, sd: 0.0 };
        let grid = TimeGrid::notch();
        let path = bm_mean_path(&p, &grid, &mut rng(0));
        for (x, t) in path.iter().zip(grid.times()) {
            assert_relative_eq!(*x, -1.0 + 0.02 * t, epsilon = 1e-12);
        }
    }

    #[test]
    fn repeated_times_rejected() {
        assert!(TimeGrid::new(vec![0.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn builtin_sizes() {
        let s = Scenario::builtin("sim1").unwrap();
        let sizes: Vec<usize> = s.clusters.iter().map(|c| c.size).collect();
        assert_eq!(sizes, vec![80, 20, 10, 10, 70, 10]);
        assert_eq!(s.n_items(), 200);
        assert_eq!(Scenario::builtin("sim2").unwrap().n_items(), 120);
        assert_eq!(Scenario::builtin("sim3").unwrap().n_items(), 200);
        assert_eq!(Scenario::builtin("sim4").unwrap().n_items(), 120);
        assert!(matches!(Scenario::builtin("sim9"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn generated_shapes_and_truth() {
        let s = Scenario::builtin("sim1").unwrap();
        let sim = generate_dataset(&s, &mut rng(7)).unwrap();
        assert_eq!(sim.data.n_items(), 200);
        assert_eq!(sim.data.n_times(), 18);
        assert_eq!(sim.data.n_replicates(), 4);
        assert_eq!(sim.truth.sizes(), &[80, 20, 10, 10, 70, 10]);
        assert_relative_eq!(sim.params[0].var_resid, 0.04, epsilon = 1e-15);
        let sim3 = generate_dataset(&Scenario::builtin("sim3").unwrap(), &mut rng(1)).unwrap();
        assert!(sim3.params.iter().all(|p| p.var_within == 0.0 && p.var_cond == 0.0));
    }

    #[test]
    fn seeded_determinism() {
        let s = Scenario::builtin("sim2").unwrap();
        let a = generate_dataset(&s, &mut rng(5)).unwrap();
        let b = generate_dataset(&s, &mut rng(5)).unwrap();
        assert_eq!(a.data, b.data);
        let c = generate_dataset(&s, &mut rng(6)).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario::builtin("sim4").unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), s);
        let minimal = r#"{"name":"x","clusters":[{"size":3,"sd_within":0,"sd_cond":0,"sd_resid":1}]}"#;
        let m: Scenario = serde_json::from_str(minimal).unwrap();
        assert_eq!(m.grid.len(), 18);
        assert_eq!(m.n_replicates, 4);
    }
}
