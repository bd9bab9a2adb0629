//! Stephens-style relabeling of per-draw allocation matrices.

use crate::posterior::allocation::AllocationMatrix;
use crate::posterior::assignment::{assignment_cost, solve_assignment};

/// Floor applied to probabilities inside logarithms.
pub const LOG_FLOOR: f64 = 1e-10;
pub const MAX_ROUNDS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Relabeling {
    /// Mean of the permuted, padded draws.
    pub p: AllocationMatrix,
    /// `permutations[h][c]` is the column of `p` that column `c` of draw
    /// `h` was mapped to.
    pub permutations: Vec<Vec<usize>>,
    /// Total KL objective at initialization and after every round.
    pub objective: Vec<f64>,
}

impl Relabeling {
    pub fn rounds(&self) -> usize {
        self.objective.len() - 1
    }
}

fn flog(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// `cost[c][l]`: KL cost of sending draw column `c` to column `l` of `p`.
fn kl_cost(q: &AllocationMatrix, log_p: &[f64], q_log_q: &[f64]) -> Vec<Vec<f64>> {
    let k = q.n_columns();
    let mut cost = vec![vec![0.0; k]; k];
    for (i, row) in q.rows().enumerate() {
        let lp = &log_p[i * k..(i + 1) * k];
        for (c, &qc) in row.iter().enumerate() {
            if qc == 0.0 {
                continue;
            }
            let base = q_log_q[i * k + c];
            for (cost_cl, lpl) in cost[c].iter_mut().zip(lp) {
                *cost_cl += base - qc * lpl;
            }
        }
    }
    cost
}

fn mean_of(draws: &[AllocationMatrix], perms: &[Vec<usize>]) -> AllocationMatrix {
    let (n, k) = (draws[0].n_items(), draws[0].n_columns());
    let mut acc = vec![0.0; n * k];
    let h = draws.len() as f64;
    for (q, perm) in draws.iter().zip(perms) {
        for (i, row) in q.rows().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                acc[i * k + perm[c]] += x / h;
            }
        }
    }
    AllocationMatrix::from_parts_unchecked(n, k, acc)
}

/// Aligns the columns of every draw by alternating a mean update with an
/// optimal per-draw column assignment under the KL cost. Draws are first
/// zero-padded to the widest one. A draw keeps its current permutation
/// unless the assignment solve strictly lowers its cost.
///
/// The alternation starts from identity permutations and the unpermuted
/// mean. That start is a stationary point whenever the draws are exact
/// label swaps of each other (the mean is then flat), so a second run
/// starts with the first draw as the reference, and the run with the
/// lower final objective is returned (ties keep the mean start).
///
/// # Panics
///
/// If `draws` is empty, draws disagree on the item count, or the
/// objective increases between rounds.
pub fn relabel(draws: &[AllocationMatrix]) -> Relabeling {
    assert!(!draws.is_empty(), "relabel needs at least one draw");
    let n = draws[0].n_items();
    assert!(draws.iter().all(|q| q.n_items() == n), "draws disagree on the item count");
    let k_max = draws.iter().map(AllocationMatrix::n_columns).max().unwrap_or(0);
    let padded: Vec<AllocationMatrix> = draws.iter().map(|q| q.padded(k_max)).collect();
    let q_log_q: Vec<Vec<f64>> = padded
        .iter()
        .map(|q| q.as_slice().iter().map(|&x| if x == 0.0 { 0.0 } else { x * flog(x) }).collect())
        .collect();
    let identity: Vec<Vec<usize>> = vec![(0..k_max).collect(); padded.len()];
    let from_mean = alternate(&padded, &q_log_q, identity.clone(), mean_of(&padded, &identity));
    if padded.len() == 1 {
        return from_mean;
    }
    let from_pivot = alternate(&padded, &q_log_q, identity, padded[0].clone());
    let last = |r: &Relabeling| *r.objective.last().expect("nonempty");
    if last(&from_pivot) < last(&from_mean) - CONVERGENCE_TOL {
        from_pivot
    } else {
        from_mean
    }
}

fn alternate(
    padded: &[AllocationMatrix],
    q_log_q: &[Vec<f64>],
    mut perms: Vec<Vec<usize>>,
    mut p: AllocationMatrix,
) -> Relabeling {
    let total = |p: &AllocationMatrix, perms: &[Vec<usize>]| -> f64 {
        let log_p: Vec<f64> = p.as_slice().iter().map(|&x| flog(x)).collect();
        padded
            .iter()
            .zip(q_log_q)
            .zip(perms)
            .map(|((q, qlq), perm)| assignment_cost(&kl_cost(q, &log_p, qlq), perm))
            .sum()
    };
    // Flooring p inside the logarithm makes the mean step only an
    // approximate minimizer; each floored entry can move the objective by
    // at most about h * LOG_FLOOR.
    let slack = (padded.len() * padded[0].as_slice().len()) as f64 * LOG_FLOOR;
    let mut objective = vec![total(&p, &perms)];
    for _ in 0..MAX_ROUNDS {
        let log_p: Vec<f64> = p.as_slice().iter().map(|&x| flog(x)).collect();
        for ((q, qlq), perm) in padded.iter().zip(q_log_q).zip(perms.iter_mut()) {
            let cost = kl_cost(q, &log_p, qlq);
            let candidate = solve_assignment(&cost);
            if assignment_cost(&cost, &candidate) < assignment_cost(&cost, perm) {
                *perm = candidate;
            }
        }
        p = mean_of(padded, &perms);
        let obj = total(&p, &perms);
        let prev = *objective.last().expect("initialized");
        assert!(
            obj <= prev + 1e-9 * prev.abs().max(1.0) + slack,
            "relabeling objective increased from {prev} to {obj}"
        );
        objective.push(obj);
        if prev - obj < CONVERGENCE_TOL {
            break;
        }
    }
    Relabeling { p, permutations: perms, objective }
}
