mod common;

use common::{dense_log_density, likelihood_max_error, random_params};
use direct_core::model::{build_covariance, log_likelihood, ClusterParams, Spectrum};
use nalgebra::{Cholesky, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn closed_form_matches_dense_cholesky() {
    let worst = likelihood_max_error(1000, 2024);
    assert!(worst < 1e-8, "largest discrepancy {worst:e}");
}

#[test]
fn dense_spectrum_has_closed_form_multiplicities() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for j in 1..=6 {
        for r in 1..=6 {
            let p = random_params(&mut rng, j);
            let eig = SymmetricEigen::new(build_covariance(&p, r).unwrap());
            let mut dense: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            dense.sort_by(f64::total_cmp);
            let mut closed: Vec<f64> = Spectrum::new(&p, r)
                .eigenvalues()
                .into_iter()
                .flat_map(|(v, m)| std::iter::repeat_n(v, m))
                .collect();
            closed.sort_by(f64::total_cmp);
            assert_eq!(dense.len(), closed.len());
            for (a, b) in dense.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "J={j} R={r}: {dense:?} vs {closed:?}");
            }
        }
    }
}

#[test]
fn covariance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (j, r) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let s = build_covariance(&random_params(&mut rng, j), r).unwrap();
        assert_eq!(s, s.transpose());
    }
}

#[test]
fn mean_log_density_of_own_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (j, r) = (4, 3);
    let p = ClusterParams::new(vec![0.5, -0.2, 0.1, 1.0], 0.3, 0.2, 0.1).unwrap();
    let sigma = build_covariance(&p, r).unwrap();
    let l = Cholesky::new(sigma).unwrap().l();
    let d = j * r;
    let n = 20_000;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = &l * z;
            let m: Vec<f64> = (0..d).map(|k| x[k] + p.theta[k / r]).collect();
            log_likelihood(&m, &p, r).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let log_det = Spectrum::new(&p, r).log_det();
    let expected = -0.5 * (d as f64 + d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}, se {se}");
}

fn dims_and_params() -> impl Strategy<Value = (usize, usize, ClusterParams, Vec<f64>)> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(j, r)| {
        (
            Just(j),
            Just(r),
            (prop::collection::vec(-2.0..2.0f64, j), 0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64)
                .prop_map(|(t, a, b, e)| ClusterParams::new(t, a, b, e).unwrap()),
            prop::collection::vec(-3.0..3.0f64, j * r),
        )
    })
}

proptest! {
    #[test]
    fn shifting_data_and_mean_together_is_invariant(
        (_j, r, p, m) in dims_and_params(),
        shift in -5.0..5.0f64,
    ) {
        let base = log_likelihood(&m, &p, r).unwrap();
        let moved: Vec<f64> = m.iter().map(|x| x + shift).collect();
        let mut q = p.clone();
        q.theta.iter_mut().for_each(|t| *t += shift);
        prop_assert!((log_likelihood(&moved, &q, r).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn replicate_order_within_a_time_point_is_irrelevant(
        (j, r, p, m) in dims_and_params(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = m.clone();
        for t in 0..j {
            let block = &mut shuffled[t * r..(t + 1) * r];
            for a in (1..block.len()).rev() {
                block.swap(a, rng.random_range(0..=a));
            }
        }
        let a = log_likelihood(&m, &p, r).unwrap();
        let b = log_likelihood(&shuffled, &p, r).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn matches_dense_oracle((_j, r, p, m) in dims_and_params()) {
        let a = log_likelihood(&m, &p, r).unwrap();
        prop_assert!((a - dense_log_density(&m, &p, r)).abs() < 1e-8);
    }
}
