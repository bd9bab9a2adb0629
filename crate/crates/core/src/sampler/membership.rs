//! Single-item membership moves under the Dirichlet-process prior.
//!
//! The uniform kernel proposes, for an item currently in cluster `z` out of
//! `k` clusters, one of the `k` labels other than `z`, where label `k`
//! means "open a new cluster" with parameters drawn from the base measure.
//! Its Hastings ratio depends on whether the item is a singleton and whether
//! the proposal is an existing cluster:
//!
//! | case | singleton | existing | change in K | ratio                                   |
//! |------|-----------|----------|-------------|-----------------------------------------|
//! | 1    | yes       | yes      | -1          | `L * n_target / alpha * k / (k - 1)`    |
//! | 2    | yes       | no       | 0           | `L`                                     |
//! | 3    | no        | yes      | 0           | `L * n_target / (n_current - 1)`        |
//! | 4    | no        | no       | +1          | `L * alpha / (n_current - 1) * k / (k + 1)` |
//!
//! with `L` the likelihood ratio of the item under the proposed and current
//! cluster parameters.

use rand::Rng;

use crate::partition::MixtureState;
use crate::sampler::config::MembershipKernel;

/// Per-item likelihood under cluster parameters, plus draws from the base
/// measure of those parameters.
pub trait ComponentLikelihood {
    type Params: Clone;

    fn n_items(&self) -> usize;

    fn log_density(&self, item: usize, params: &Self::Params) -> f64;

    fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Params;
}

/// The four kinds of membership move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveCase {
    SingletonToExisting,
    SingletonToNew,
    ToExisting,
    ToNew,
}

impl MoveCase {
    pub const ALL: [MoveCase; 4] =
        [MoveCase::SingletonToExisting, MoveCase::SingletonToNew, MoveCase::ToExisting, MoveCase::ToNew];

    pub fn classify(current_is_singleton: bool, proposal_is_new: bool) -> Self {
        match (current_is_singleton, proposal_is_new) {
            (true, false) => MoveCase::SingletonToExisting,
            (true, true) => MoveCase::SingletonToNew,
            (false, false) => MoveCase::ToExisting,
            (false, true) => MoveCase::ToNew,
        }
    }

    /// Change in the number of clusters when the move is accepted.
    pub fn k_change(self) -> isize {
        match self {
            MoveCase::SingletonToExisting => -1,
            MoveCase::SingletonToNew | MoveCase::ToExisting => 0,
            MoveCase::ToNew => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Proposes a label uniformly among the `k` values in `0..=k` other than
/// `current`. The value `k` stands for a new cluster.
pub fn propose_membership<R: Rng + ?Sized>(current: usize, k: usize, rng: &mut R) -> usize {
    debug_assert!(current < k);
    let u = rng.random_range(0..k);
    if u >= current {
        u + 1
    } else {
        u
    }
}

/// Log Hastings ratio of a uniform-kernel move.
///
/// `n_target` is the size of the proposed cluster (ignored for new-cluster
/// proposals) and `n_current` the size of the item's current cluster,
/// both counting the item where it currently sits.
///
/// # Panics
///
/// If a singleton is proposed to move to an existing cluster while it is
/// the only cluster (`k == 1`), which the proposal can never produce.
pub fn log_hastings_ratio(
    case: MoveCase,
    log_lik_ratio: f64,
    n_target: usize,
    n_current: usize,
    k: usize,
    alpha: f64,
) -> f64 {
    let (kf, a) = (k as f64, alpha);
    match case {
        MoveCase::SingletonToExisting => {
            assert!(k > 1, "a lone singleton has no other existing cluster to join");
            log_lik_ratio + (n_target as f64).ln() - a.ln() + kf.ln() - (kf - 1.0).ln()
        }
        MoveCase::SingletonToNew => log_lik_ratio,
        MoveCase::ToExisting => log_lik_ratio + (n_target as f64).ln() - ((n_current - 1) as f64).ln(),
        MoveCase::ToNew => log_lik_ratio + a.ln() - ((n_current - 1) as f64).ln() + kf.ln() - (kf + 1.0).ln(),
    }
}

/// Hastings ratio on the natural scale; see [`log_hastings_ratio`].
pub fn hastings_ratio(
    case: MoveCase,
    lik_ratio: f64,
    n_target: usize,
    n_current: usize,
    k: usize,
    alpha: f64,
) -> f64 {
    log_hastings_ratio(case, lik_ratio.ln(), n_target, n_current, k, alpha).exp()
}

/// Proposal and acceptance counts of one or more sweeps, indexed by [`MoveCase`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub proposed: [usize; 4],
    pub accepted: [usize; 4],
}

impl SweepStats {
    pub fn merge(&mut self, other: &SweepStats) {
        for c in 0..4 {
            self.proposed[c] += other.proposed[c];
            self.accepted[c] += other.accepted[c];
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        let p: usize = self.proposed.iter().sum();
        if p == 0 {
            0.0
        } else {
            self.accepted.iter().sum::<usize>() as f64 / p as f64
        }
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Applies an accepted move, keeping labels contiguous and parameters aligned.
fn apply_move<P>(state: &mut MixtureState<P>, item: usize, target: usize, case: MoveCase, fresh: Option<P>) {
    let k_before = state.k();
    let current = state.partition.label(item);
    match case {
        MoveCase::SingletonToNew => {
            state.params[current] = fresh.expect("new-cluster move carries parameters");
        }
        MoveCase::ToNew => {
            state.params.push(fresh.expect("new-cluster move carries parameters"));
            state.partition.move_item(item, k_before);
        }
        MoveCase::ToExisting => {
            let vacated = state.partition.move_item(item, target);
            debug_assert!(vacated.is_none());
        }
        MoveCase::SingletonToExisting => {
            let vacated = state.partition.move_item(item, target);
            debug_assert_eq!(vacated, Some(current));
            state.params.swap_remove(current);
        }
    }
    debug_assert_eq!(state.k() as isize - k_before as isize, case.k_change());
}

/// One sweep of membership updates over all items in order.
pub fn update_memberships<L, R>(
    state: &mut MixtureState<L::Params>,
    lik: &L,
    kernel: MembershipKernel,
    rng: &mut R,
) -> SweepStats
where
    L: ComponentLikelihood,
    R: Rng + ?Sized,
{
    let mut stats = SweepStats::default();
    for item in 0..state.partition.n_items() {
        match kernel {
            MembershipKernel::Uniform => uniform_move(state, lik, item, &mut stats, rng),
            MembershipKernel::Neal => neal_move(state, lik, item, &mut stats, rng),
        }
        debug_assert!(state.is_consistent());
    }
    stats
}

fn uniform_move<L, R>(state: &mut MixtureState<L::Params>, lik: &L, item: usize, stats: &mut SweepStats, rng: &mut R)
where
    L: ComponentLikelihood,
    R: Rng + ?Sized,
{
    let k = state.k();
    let current = state.partition.label(item);
    let n_current = state.partition.size(current);
    let target = propose_membership(current, k, rng);
    let is_new = target == k;
    let case = MoveCase::classify(n_current == 1, is_new);
    stats.proposed[case.index()] += 1;

    let fresh = is_new.then(|| lik.draw_base(rng));
    let proposed_params = fresh.as_ref().unwrap_or_else(|| &state.params[target]);
    let llr = lik.log_density(item, proposed_params) - lik.log_density(item, &state.params[current]);
    let n_target = if is_new { 0 } else { state.partition.size(target) };
    let log_h = log_hastings_ratio(case, llr, n_target, n_current, k, state.alpha);
    if accept(log_h, rng) {
        stats.accepted[case.index()] += 1;
        apply_move(state, item, target, case, fresh);
    }
}

/// Proposal from the prior conditional of the label given all the others;
/// the Hastings ratio reduces to the likelihood ratio.
fn neal_move<L, R>(state: &mut MixtureState<L::Params>, lik: &L, item: usize, stats: &mut SweepStats, rng: &mut R)
where
    L: ComponentLikelihood,
    R: Rng + ?Sized,
{
    let k = state.k();
    let current = state.partition.label(item);
    let n_current = state.partition.size(current);
    let total = (state.partition.n_items() - 1) as f64 + state.alpha;
    let mut u = rng.random::<f64>() * total;
    let mut target = k;
    for (c, &size) in state.partition.sizes().iter().enumerate() {
        let w = (size - usize::from(c == current)) as f64;
        if u < w {
            target = c;
            break;
        }
        u -= w;
    }
    if target == current {
        return;
    }
    let is_new = target == k;
    let case = MoveCase::classify(n_current == 1, is_new);
    stats.proposed[case.index()] += 1;
    let fresh = is_new.then(|| lik.draw_base(rng));
    let proposed_params = fresh.as_ref().unwrap_or_else(|| &state.params[target]);
    let llr = lik.log_density(item, proposed_params) - lik.log_density(item, &state.params[current]);
    if accept(llr, rng) {
        stats.accepted[case.index()] += 1;
        apply_move(state, item, target, case, fresh);
    }
}
