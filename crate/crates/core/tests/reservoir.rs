use approx::assert_relative_eq;
use esnq_core::data::{gen_henon, normalize, HenonParams, Split};
use esnq_core::linalg::{eigenvalues, spectral_radius, Matrix};
use esnq_core::reservoir::{init_reservoir, train_readout, Activation, Architecture, Hyperparams};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hp(sr: f64, ncrl: usize, seed: u64) -> Hyperparams {
    Hyperparams { spectral_radius: sr, leaking_rate: 1.0, ncrl, ridge: 1e-8, seed }
}

fn arch(n: usize, activation: Activation) -> Architecture {
    Architecture { n, d_in: 1, activation }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Roots of a monic cubic by Durand–Kerner iteration.
fn cubic_roots(c2: f64, c1: f64, c0: f64) -> Vec<(f64, f64)> {
    type C = (f64, f64);
    let mul = |a: C, b: C| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let sub = |a: C, b: C| (a.0 - b.0, a.1 - b.1);
    let div = |a: C, b: C| {
        let d = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
    };
    let p = |z: C| {
        let z2 = mul(z, z);
        let z3 = mul(z2, z);
        (z3.0 + c2 * z2.0 + c1 * z.0 + c0, z3.1 + c2 * z2.1 + c1 * z.1)
    };
    let mut r: Vec<C> = vec![(0.4, 0.9), (-0.65, 0.72), (0.81, -0.59)];
    for _ in 0..500 {
        for i in 0..3 {
            let mut den = (1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den = mul(den, sub(r[i], r[j]));
                }
            }
            r[i] = sub(r[i], div(p(r[i]), den));
        }
    }
    r
}

#[test]
fn three_by_three_radius_matches_characteristic_polynomial() {
    for (seed, ncrl) in [(1u64, 2usize), (1, 5), (4, 7), (11, 9)] {
        let m = init_reservoir(&hp(0.8, ncrl, seed), &arch(3, Activation::Tanh)).unwrap();
        let a = m.w_r.to_dense();
        let e = |i: usize, j: usize| a[(i, j)];
        // λ³ − tr·λ² + (sum of principal 2×2 minors)·λ − det
        let tr = e(0, 0) + e(1, 1) + e(2, 2);
        let minors = e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0) + e(0, 0) * e(2, 2) - e(0, 2) * e(2, 0) + e(1, 1) * e(2, 2)
            - e(1, 2) * e(2, 1);
        let det = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
        let roots = cubic_roots(-tr, minors, -det);
        let rho = roots.iter().map(|r| r.0.hypot(r.1)).fold(0.0, f64::max);
        if m.spectral_fallback {
            // nilpotent pattern: every eigenvalue is zero
            assert!(rho < 1e-4, "seed {seed}: {rho}");
        } else {
            assert_relative_eq!(rho, 0.8, epsilon = 1e-6);
            assert_relative_eq!(spectral_radius(&a).unwrap(), 0.8, epsilon = 1e-9);
        }
    }
}

#[test]
fn reference_size_reservoir_has_the_requested_radius() {
    let m = init_reservoir(&hp(0.9, 250, 7), &arch(50, Activation::Tanh)).unwrap();
    assert_eq!(m.w_r.nnz(), 250);
    assert!(!m.spectral_fallback);
    let na = to_na(&m.w_r.to_dense());
    let rho = na.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!((rho - 0.9).abs() <= 1e-6, "{rho}");
}

#[test]
fn eigenvalues_agree_with_nalgebra_on_random_dense_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2usize, 5, 12, 30] {
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = Matrix::from_vec(n, n, data).unwrap();
        let mut ours: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|&(re, im)| re.hypot(im)).collect();
        let mut theirs: Vec<f64> = to_na(&a).complex_eigenvalues().iter().map(|z| z.norm()).collect();
        ours.sort_by(f64::total_cmp);
        theirs.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&theirs) {
            assert_relative_eq!(x, y, epsilon = 1e-8);
        }
    }
}

#[test]
fn single_neuron_reservoir_is_its_radius() {
    for seed in 0..4 {
        let m = init_reservoir(&hp(0.5, 1, seed), &arch(1, Activation::Tanh)).unwrap();
        assert_relative_eq!(m.w_r.entries()[0].value.abs(), 0.5, epsilon = 1e-15);
    }
}

#[test]
fn ridge_matches_a_direct_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = Matrix::from_vec(10, 4, (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let y = Matrix::from_vec(10, 2, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let w = train_readout(&x, &y, 1e-8).unwrap();
    let (xn, yn) = (to_na(&x), to_na(&y));
    let lhs = xn.transpose() * &xn + DMatrix::identity(4, 4) * 1e-8;
    let expected = lhs.lu().solve(&(xn.transpose() * yn)).unwrap().transpose();
    for o in 0..2 {
        for i in 0..4 {
            assert_relative_eq!(w[(o, i)], expected[(o, i)], max_relative = 1e-6);
        }
    }
}

#[test]
fn henon_readout_fits_and_generalises() {
    let ds = normalize(&gen_henon(5000, &HenonParams::default()).unwrap()).unwrap();
    let mut m = init_reservoir(&hp(0.9, 250, 0), &arch(50, Activation::Tanh)).unwrap();
    m.fit(&ds.view(Split::Train).unwrap()).unwrap();
    let test = ds.view(Split::Test).unwrap();
    assert!(m.evaluate(&test).unwrap().value < 0.05);
    let pred = m.predict(&ds_test_inputs(&test)).unwrap();
    assert_eq!(pred.cols(), 1);
}

fn ds_test_inputs(set: &esnq_core::data::EvalSet) -> Matrix {
    match set {
        esnq_core::data::EvalSet::Series(w) => w.inputs.clone(),
        _ => unreachable!(),
    }
}

fn ridge_objective(x: &Matrix, y: &Matrix, w: &Matrix, ridge: f64) -> f64 {
    let mut j = 0.0;
    for t in 0..x.rows() {
        for o in 0..y.cols() {
            let p: f64 = (0..x.cols()).map(|i| w[(o, i)] * x[(t, i)]).sum();
            j += (p - y[(t, o)]).powi(2);
        }
    }
    j + ridge * w.as_slice().iter().map(|v| v * v).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ridge_solution_is_a_local_minimum(seed in 0u64..10_000, ridge in 1e-6f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(30, 5, (0..150).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = Matrix::from_vec(30, 2, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let w = train_readout(&x, &y, ridge).unwrap();
        let best = ridge_objective(&x, &y, &w, ridge);
        for k in 0..w.as_slice().len() {
            for step in [-1e-3, 1e-3] {
                let mut v = w.clone();
                v[(k / 5, k % 5)] += step;
                prop_assert!(ridge_objective(&x, &y, &v, ridge) > best);
            }
        }
    }

    #[test]
    fn run_equals_chained_updates(seed in 0u64..10_000, n in 1usize..8, steps in 1usize..12) {
        let m = init_reservoir(&hp(0.9, n, seed), &arch(n, Activation::Tanh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let u = Matrix::from_vec(steps, 1, (0..steps).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let trace = m.run(&u).unwrap();
        let mut s = vec![0.0; n];
        for t in 0..steps {
            s = m.update_state(u.row(t), &s).unwrap();
            prop_assert_eq!(trace.states.row(t), &s[..]);
        }
    }

    #[test]
    fn contractive_reservoirs_forget_their_initial_state(seed in 0u64..10_000, n in 2usize..20) {
        // spectral radius 0.5 with tanh: trajectories from different
        // initial states merge under a common input
        let ncrl = (2 * n).min(n * n);
        let m = init_reservoir(&hp(0.5, ncrl, seed), &arch(n, Activation::Tanh)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Matrix::from_vec(300, 1, (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let s0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = m.run(&u).unwrap();
        let b = m.run_from(&u, &s0).unwrap();
        let gap = a.states.row(299).iter().zip(b.states.row(299)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-6, "gap {}", gap);
    }

    #[test]
    fn initialisation_is_bit_deterministic(seed in 0u64..10_000, n in 1usize..10) {
        let h = hp(0.9, n, seed);
        let a = init_reservoir(&h, &arch(n, Activation::Tanh)).unwrap();
        let b = init_reservoir(&h, &arch(n, Activation::Tanh)).unwrap();
        prop_assert_eq!(a, b);
    }
}
