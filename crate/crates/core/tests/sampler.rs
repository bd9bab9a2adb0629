use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use direct_core::metrics::count_clusters;
use direct_core::partition::ChainState;
use direct_core::sampler::{run_chain, Chain, ChainConfig, Trace};
use direct_core::simulate::{generate_dataset, Scenario, Simulated};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Held by every test so the timing test never shares the CPU.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn sim(id: &str, seed: u64) -> Simulated {
    generate_dataset(&Scenario::builtin(id).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Empirical quantile of sorted draws.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorted posterior draws of the three sds per cluster with the partition
/// held at the truth.
fn frozen_partition_draws(s: &Simulated, seed: u64) -> Vec<[Vec<f64>; 3]> {
    let state = ChainState::new(s.truth.clone(), s.params.clone(), 1.0).unwrap();
    let cfg = ChainConfig { seed, ..Default::default() };
    let mut chain = Chain::with_state(&s.data, cfg, state).unwrap();
    let (burn, keep) = (500, 3000);
    for _ in 0..burn {
        chain.step_parameters();
    }
    let k = s.params.len();
    let mut draws = vec![[Vec::new(), Vec::new(), Vec::new()]; k];
    for _ in 0..keep {
        chain.step_parameters();
        assert_eq!(chain.state().partition, s.truth);
        for (c, p) in chain.state().params.iter().enumerate() {
            for (d, v) in p.sds().into_iter().enumerate() {
                draws[c][d].push(v);
            }
        }
    }
    for d in draws.iter_mut().flatten() {
        d.sort_by(f64::total_cmp);
    }
    draws
}

#[test]
fn frozen_partition_recovers_large_cluster_sds() {
    let _guard = serial();
    let s = sim("sim1", 3);
    let draws = frozen_partition_draws(&s, 9);
    for (c, truth) in s.params.iter().enumerate() {
        let med: Vec<f64> = draws[c].iter().map(|d| quantile(d, 0.5)).collect();
        println!("cluster {} (size {}): medians {med:.4?}, truth {:?}", c + 1, s.truth.size(c), truth.sds());
    }
    for (c, truth) in s.params.iter().enumerate().filter(|&(c, _)| s.truth.size(c) >= 70) {
        for (d, want) in truth.sds().into_iter().enumerate() {
            let sorted = &draws[c][d];
            if want >= 0.05 {
                let got = quantile(sorted, 0.5);
                assert!((got - want).abs() < 0.2 * want, "cluster {} sd {d}: median {got} vs {want}", c + 1);
            } else {
                // too small to resolve with 80 items; the truth must still be
                // a plausible posterior value
                let (lo, hi) = (quantile(sorted, 0.025), quantile(sorted, 0.975));
                assert!(lo <= want && want <= hi, "cluster {} sd {d}: {want} outside [{lo}, {hi}]", c + 1);
            }
        }
    }
}

#[test]
fn same_seed_gives_identical_trace() {
    let _guard = serial();
    let s = sim("sim1", 1);
    let cfg = ChainConfig { iterations: 60, thin: 3, seed: 5, ..Default::default() };
    let a = run_chain(&s.data, &cfg).unwrap();
    let b = run_chain(&s.data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.recorded_snapshots());
    let c = run_chain(&s.data, &ChainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn trace_file_round_trip() {
    let _guard = serial();
    let s = sim("sim3", 2);
    let cfg = ChainConfig { iterations: 50, thin: 5, seed: 1, ..Default::default() };
    let trace = run_chain(&s.data, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    trace.save(&path).unwrap();
    assert_eq!(Trace::load(&path).unwrap(), trace);
}

#[test]
fn snapshots_are_consistent() {
    let _guard = serial();
    let s = sim("sim4", 4);
    let cfg = ChainConfig { iterations: 200, thin: 2, seed: 3, ..Default::default() };
    let trace = run_chain(&s.data, &cfg).unwrap();
    for snap in &trace.snapshots {
        let st = &snap.state;
        assert!(st.is_consistent());
        assert_eq!(st.partition.sizes().iter().sum::<usize>(), s.data.n_items());
        assert!(st.alpha > 0.0);
        for p in &st.params {
            assert!(p.var_resid > 0.0);
        }
    }
}

#[test]
fn sim1_trace_mode_has_six_nonsingleton_clusters() {
    let _guard = serial();
    let s = sim("sim1", 0);
    let cfg = ChainConfig { iterations: 2000, thin: 10, seed: 0, ..Default::default() };
    let trace = run_chain(&s.data, &cfg).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for snap in &trace.snapshots {
        *counts.entry(count_clusters(snap.state.partition.labels()).0).or_insert(0) += 1;
    }
    let mode = counts.iter().max_by_key(|&(_, c)| *c).map(|(ns, _)| *ns).unwrap();
    println!("nonsingleton counts over snapshots: {counts:?}");
    assert!((5..=7).contains(&mode), "mode {mode}");
}

fn best_time(f: impl Fn()) -> Duration {
    (0..3)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

/// Runtime ratio over a 4x increase in iterations and a 4x increase in
/// items; linear scaling gives 4, and the check allows a factor 2 either way.
#[test]
fn runtime_is_roughly_linear() {
    let _guard = serial();
    let small = sim("sim1", 7);
    let base = Scenario::builtin("sim1").unwrap();
    let mut big_scenario = base.clone();
    big_scenario.clusters.iter_mut().for_each(|c| c.size *= 4);
    let big = generate_dataset(&big_scenario, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let cfg = |iterations| ChainConfig { iterations, thin: 1, seed: 2, init_clusters: 6, ..Default::default() };

    let t1 = best_time(|| {
        run_chain(&small.data, &cfg(100)).unwrap();
    });
    let t4 = best_time(|| {
        run_chain(&small.data, &cfg(400)).unwrap();
    });
    let s_ratio = t4.as_secs_f64() / t1.as_secs_f64();

    let n4 = best_time(|| {
        run_chain(&big.data, &cfg(100)).unwrap();
    });
    let n_ratio = n4.as_secs_f64() / t1.as_secs_f64();
    println!("iterations x4: time x{s_ratio:.2}; items x4: time x{n_ratio:.2}");
    assert!((2.0..=8.0).contains(&s_ratio), "iteration scaling {s_ratio}");
    assert!((2.0..=8.0).contains(&n_ratio), "item scaling {n_ratio}");
}
