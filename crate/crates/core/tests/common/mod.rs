//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use direct_core::dp::{partition_log_prior, AlphaPrior};
use direct_core::metrics::{enumerate_partitions, exact_partition_posterior, total_variation};
use direct_core::model::{build_covariance, ClusterParams};
use direct_core::partition::{MixtureState, Partition};
use direct_core::posterior::AllocationMatrix;
use direct_core::sampler::{integrated_autocorr_time, update_memberships, ComponentLikelihood, MembershipKernel};
use nalgebra::{Cholesky, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

pub fn dense_log_density(m: &[f64], p: &ClusterParams, r: usize) -> f64 {
    let sigma = build_covariance(p, r).unwrap();
    let d = m.len();
    let chol = Cholesky::new(sigma).expect("positive definite");
    let mean = DVector::from_iterator(d, p.theta.iter().flat_map(|&t| std::iter::repeat_n(t, r)));
    let x = DVector::from_column_slice(m) - mean;
    let z = chol.l().solve_lower_triangular(&x).unwrap();
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

/// Random structured parameters spanning three decades of scale, with
/// random effects switched off in some draws.
pub fn random_params(rng: &mut ChaCha8Rng, j: usize) -> ClusterParams {
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    let theta = (0..j).map(|_| rng.random_range(-2.0..2.0)).collect();
    let within = if rng.random_bool(0.2) { 0.0 } else { scale * rng.random::<f64>() };
    let cond = if rng.random_bool(0.2) { 0.0 } else { scale * rng.random::<f64>() };
    let resid = scale * rng.random_range(0.01..1.0);
    ClusterParams::new(theta, within, cond, resid).unwrap()
}

/// Largest |closed form - dense| over `count` random configurations with
/// J, R <= 6.
pub fn likelihood_max_error(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let j = rng.random_range(1..=6);
        let r = rng.random_range(1..=6);
        let p = random_params(&mut rng, j);
        let m: Vec<f64> = (0..j * r).map(|_| rng.random_range(-3.0..3.0)).collect();
        let closed = direct_core::log_likelihood(&m, &p, r).unwrap();
        worst = worst.max((closed - dense_log_density(&m, &p, r)).abs());
    }
    worst
}

/// |1 - sum of the prior over all partitions of n items|.
pub fn prior_normalization_error(n: usize, alpha: f64) -> f64 {
    let total: f64 = enumerate_partitions(n).unwrap().map(|p| partition_log_prior(&p, alpha).exp()).sum();
    (total - 1.0).abs()
}

/// Minimum assignment cost by enumerating every permutation.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn rec(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                rec(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    if cost.is_empty() {
        0.0
    } else {
        best
    }
}

pub fn random_cost(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()).collect()
}

/// Counts of `draws` that disagree with brute force over random `n x n`
/// matrices.
pub fn hungarian_mismatches(count: usize, n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter(|_| {
            let c = random_cost(&mut rng, n);
            let perm = direct_core::posterior::solve_assignment(&c);
            let mut seen = vec![false; n];
            let valid = perm.iter().all(|&j| j < n && !std::mem::replace(&mut seen[j], true));
            let got = direct_core::posterior::assignment_cost(&c, &perm);
            let want = brute_force_assignment(&c);
            !valid || (got - want).abs() > 1e-9 * want.abs().max(1.0)
        })
        .count()
}

/// Grid over `[0, upper]` with the normalized CDF of the concentration
/// conditional `alpha^(a-1) e^(-b alpha) alpha^k Gamma(alpha) / Gamma(alpha + n)`.
pub fn alpha_conditional_cdf(k: usize, n: usize, shape: f64, rate: f64, upper: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let grid: Vec<f64> = (0..=m).map(|i| upper * i as f64 / m as f64).collect();
    let log_f = |a: f64| {
        if a == 0.0 {
            return if shape + k as f64 - 2.0 == 0.0 { -ln_gamma(n as f64) } else { f64::NEG_INFINITY };
        }
        (shape + k as f64 - 2.0) * a.ln() - rate * a + ln_gamma(a + 1.0) - ln_gamma(a + n as f64)
    };
    let lf: Vec<f64> = grid.iter().map(|&a| log_f(a)).collect();
    let max = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = lf.iter().map(|l| (l - max).exp()).collect();
    let mut cdf = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|c| *c /= total);
    (grid, cdf)
}

pub fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return values[0];
    }
    if x >= *grid.last().unwrap() {
        return *values.last().unwrap();
    }
    let h = grid[1] - grid[0];
    let i = ((x - grid[0]) / h).floor() as usize;
    let t = (x - grid[i]) / h;
    values[i] + t * (values[i + 1] - values[i])
}

pub fn ks_statistic(draws: &mut [f64], grid: &[f64], cdf: &[f64]) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = interpolate(grid, cdf, x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS distance between `draws` successive Gibbs updates of alpha at fixed
/// `(k, n)` and the quadrature CDF.
pub fn alpha_gibbs_ks(k: usize, n: usize, shape: f64, rate: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { 0 }).collect();
    let partition = Partition::from_labels(labels).unwrap();
    let prior = AlphaPrior::Gamma { shape, rate };
    let mut alpha = prior.initial_value();
    for _ in 0..1000 {
        alpha = prior.update(alpha, &partition, None, &mut rng);
    }
    let mut xs: Vec<f64> = (0..draws)
        .map(|_| {
            alpha = prior.update(alpha, &partition, None, &mut rng);
            alpha
        })
        .collect();
    let (grid, cdf) = alpha_conditional_cdf(k, n, shape, rate, 60.0, 600_000);
    ks_statistic(&mut xs, &grid, &cdf)
}

/// Discrete-type likelihood for kernel tests: each cluster carries a type
/// `t` drawn from `g0`, and item `i` has log score `scores[i][t]`.
pub struct TypedScores {
    pub scores: Vec<Vec<f64>>,
    pub g0: Vec<f64>,
}

impl ComponentLikelihood for TypedScores {
    type Params = usize;

    fn n_items(&self) -> usize {
        self.scores.len()
    }

    fn log_density(&self, item: usize, t: &usize) -> f64 {
        self.scores[item][*t]
    }

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        categorical(&self.g0, rng)
    }
}

fn categorical<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

impl TypedScores {
    pub fn random(n: usize, types: usize, spread: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = (0..n).map(|_| (0..types).map(|_| rng.random_range(-spread..spread)).collect()).collect();
        let raw: Vec<f64> = (0..types).map(|_| rng.random_range(0.5..1.5)).collect();
        let s: f64 = raw.iter().sum();
        Self { scores, g0: raw.iter().map(|x| x / s).collect() }
    }

    /// Log marginal weight of a block with its type integrated out.
    pub fn block_log_weight(&self, block: &[usize]) -> f64 {
        let terms: Vec<f64> = self
            .g0
            .iter()
            .enumerate()
            .map(|(t, g)| g.ln() + block.iter().map(|&i| self.scores[i][t]).sum::<f64>())
            .collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    /// Gibbs update of every cluster's type given its members.
    pub fn update_types<R: Rng + ?Sized>(&self, state: &mut MixtureState<usize>, rng: &mut R) {
        for (t, members) in state.params.iter_mut().zip(state.partition.members()) {
            let logw: Vec<f64> = self
                .g0
                .iter()
                .enumerate()
                .map(|(ty, g)| g.ln() + members.iter().map(|&i| self.scores[i][ty]).sum::<f64>())
                .collect();
            let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logw.iter().map(|x| (x - m).exp()).collect();
            *t = categorical(&w, rng);
        }
    }
}

pub struct ExactnessReport {
    pub tv: f64,
    /// Integrated autocorrelation time of the cluster count.
    pub tau_k: f64,
    /// Integrated autocorrelation time of "items 0 and 1 share a cluster".
    pub tau_pair: f64,
    pub acceptance: f64,
}

/// Runs `sweeps` membership sweeps (each followed by a type update) on an
/// enumerable `n`-item target and compares partition frequencies with the
/// exact posterior.
pub fn kernel_exactness(kernel: MembershipKernel, n: usize, alpha: f64, sweeps: usize, seed: u64) -> ExactnessReport {
    let lik = TypedScores::random(n, 3, 1.5, 17);
    let exact = exact_partition_posterior(n, alpha, |b| lik.block_log_weight(b)).unwrap();
    let index: HashMap<Vec<usize>, usize> =
        exact.iter().enumerate().map(|(i, (p, _))| (p.labels().to_vec(), i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = MixtureState::new(Partition::single_cluster(n), vec![0usize], alpha).unwrap();
    let mut counts = vec![0usize; exact.len()];
    let mut ks = Vec::with_capacity(sweeps);
    let mut pair = Vec::with_capacity(sweeps);
    let mut proposed = 0;
    let mut accepted = 0;
    for _ in 0..sweeps {
        let s = update_memberships(&mut state, &lik, kernel, &mut rng);
        proposed += s.proposed.iter().sum::<usize>();
        accepted += s.accepted.iter().sum::<usize>();
        lik.update_types(&mut state, &mut rng);
        let canon = state.partition.canonicalized();
        counts[index[canon.labels()]] += 1;
        ks.push(state.k() as f64);
        pair.push(f64::from(u8::from(canon.label(0) == canon.label(1))));
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / sweeps as f64).collect();
    let target: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
    ExactnessReport {
        tv: total_variation(&empirical, &target),
        tau_k: integrated_autocorr_time(&ks),
        tau_pair: integrated_autocorr_time(&pair),
        acceptance: accepted as f64 / proposed.max(1) as f64,
    }
}

/// Synthetic relabeling problem: a ground-truth `n x k` allocation matrix
/// and `h` draws, each a Dirichlet perturbation of the truth (mean equal
/// to the truth, concentration `conc`) with its columns randomly permuted.
pub fn permuted_draws(n: usize, k: usize, h: usize, conc: f64, seed: u64) -> (AllocationMatrix, Vec<AllocationMatrix>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirichlet = |shapes: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        let g: Vec<f64> = shapes.iter().map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng)).collect();
        let s: f64 = g.iter().sum();
        g.iter().map(|x| x / s).collect()
    };
    let truth_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let shapes: Vec<f64> = (0..k).map(|c| if c == i % k { 6.0 } else { 1.0 }).collect();
            dirichlet(&shapes, &mut rng)
        })
        .collect();
    let truth = AllocationMatrix::from_rows(&truth_rows).unwrap();
    let draws = (0..h)
        .map(|_| {
            let rows: Vec<Vec<f64>> = truth_rows
                .iter()
                .map(|row| {
                    let shapes: Vec<f64> = row.iter().map(|p| conc * p + 1e-3).collect();
                    dirichlet(&shapes, &mut rng)
                })
                .collect();
            let mut perm: Vec<usize> = (0..k).collect();
            for a in (1..k).rev() {
                perm.swap(a, rng.random_range(0..=a));
            }
            AllocationMatrix::from_rows(&rows).unwrap().permuted(&perm)
        })
        .collect();
    (truth, draws)
}

/// Mean absolute entry error between `a` and `b`, minimized over column
/// permutations of `a`.
pub fn mae_up_to_permutation(a: &AllocationMatrix, b: &AllocationMatrix) -> f64 {
    let k = a.n_columns();
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..k).collect();
    permutations(&mut perm, 0, &mut |p| {
        let pa = a.permuted(p);
        let e = pa.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum::<f64>()
            / pa.as_slice().len() as f64;
        best = best.min(e);
    });
    best
}

fn permutations(v: &mut Vec<usize>, start: usize, f: &mut dyn FnMut(&[usize])) {
    if start == v.len() {
        f(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permutations(v, start + 1, f);
        v.swap(start, i);
    }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Method-of-moments variance components of one cluster's items given
/// as `J x R` blocks: returns (within, cond, resid).
pub fn moment_estimates(items: &[&[f64]], j: usize, r: usize) -> (f64, f64, f64) {
    let n = items.len() as f64;
    let (jf, rf) = (j as f64, r as f64);
    // residual: pooled replicate variance within (item, time)
    let mut ss_rep = 0.0;
    let mut cell_means = vec![vec![0.0; j]; items.len()];
    for (i, m) in items.iter().enumerate() {
        for t in 0..j {
            let cell = &m[t * r..(t + 1) * r];
            let cm = cell.iter().sum::<f64>() / rf;
            cell_means[i][t] = cm;
            ss_rep += cell.iter().map(|x| (x - cm).powi(2)).sum::<f64>();
        }
    }
    let resid = ss_rep / (n * jf * (rf - 1.0));
    // cell means: mu_t + phi_i + tau_it + noise; two-way interaction term
    let time_means: Vec<f64> = (0..j).map(|t| cell_means.iter().map(|c| c[t]).sum::<f64>() / n).collect();
    let item_means: Vec<f64> = cell_means.iter().map(|c| c.iter().sum::<f64>() / jf).collect();
    let grand = item_means.iter().sum::<f64>() / n;
    let mut ss_inter = 0.0;
    for (i, c) in cell_means.iter().enumerate() {
        for t in 0..j {
            ss_inter += (c[t] - item_means[i] - time_means[t] + grand).powi(2);
        }
    }
    let inter_ms = ss_inter / ((n - 1.0) * (jf - 1.0));
    let cond = inter_ms - resid / rf;
    let item_ms = item_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1.0);
    let within = item_ms - (cond + resid / rf) / jf;
    (within, cond, resid)
}
