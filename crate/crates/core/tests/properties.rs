//! Property tests for the solver and metric invariants.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satprecode::linalg::frob_sqr;
use satprecode::metrics::{sinr_from_effective, smse};
use satprecode::obbf::{bfn_adaptive, bfn_nulling, bfn_prefixed, precoder_tm, random_semi_unitary};
use satprecode::ogbf::{find_multiplier, phi, QuadraticSubproblem};
use satprecode::regularization::{gamma_closed_form, solve_gamma, RegularizationInputs};
use satprecode::scenario::{build_scenario, sample_channel, ScenarioConfig};
use satprecode::{C64, CMat};

fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

proptest! {
    // phi is strictly decreasing on nu > 0 whenever X is nonzero.
    #[test]
    fn phi_strictly_decreasing(
        seed in 0u64..1000,
        nu1 in 1e-6f64..10.0,
        gap in 1e-6f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed % 4) as usize;
        let eigvals: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let xt = random_cmat(&mut rng, n, 2);
        let nu2 = nu1 + gap;
        let a = phi(nu1, &eigvals, &xt);
        let b = phi(nu2, &eigvals, &xt);
        prop_assert!(a > b, "phi({nu1}) = {a} not > phi({nu2}) = {b}");
    }

    // The regularization root stays in its bracket and moves up, but never
    // below, when leakage grows uniformly; a uniform shift moves it by
    // exactly the shift.
    #[test]
    fn gamma_bracket_and_monotonicity(
        seed in 0u64..1000,
        p_m in 0.1f64..10.0,
        delta in 1e-3f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 2 + (seed % 3) as usize;
        let mut lambda: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>() * 4.0).collect();
        lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let sigma: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0).collect();
        let base = k as f64 / p_m;
        let max_sigma = sigma.iter().cloned().fold(0.0, f64::max);

        let inp = RegularizationInputs::new(lambda.clone(), sigma.clone(), k, p_m).unwrap();
        let gamma = solve_gamma(&inp);
        prop_assert!(gamma >= base && gamma <= base + max_sigma);

        let shifted: Vec<f64> = sigma.iter().map(|s| s + delta).collect();
        let inp2 = RegularizationInputs::new(lambda.clone(), shifted, k, p_m).unwrap();
        let gamma2 = solve_gamma(&inp2);
        prop_assert!(gamma2 > gamma, "shift by {delta} did not increase gamma");

        // Uniform leakage: the root is k/P + s exactly, so the shift is
        // passed through one-for-one.
        let uniform = RegularizationInputs::new(lambda.clone(), vec![0.4; k], k, p_m).unwrap();
        let uniform2 = RegularizationInputs::new(lambda, vec![0.4 + delta; k], k, p_m).unwrap();
        let diff = solve_gamma(&uniform2) - solve_gamma(&uniform);
        prop_assert!((diff - delta).abs() <= 1e-12 * (1.0 + delta));
    }

    // Closed form is bounded below by k/P and agrees with the numerical
    // root when the leakage diagonal is uniform.
    #[test]
    fn closed_form_floor_and_uniform_agreement(
        seed in 0u64..500,
        p_m in 0.1f64..10.0,
        s in 0.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 2;
        let n = 4;
        let b = random_semi_unitary(&mut rng, n, k);
        let sigma_any = {
            let m = random_cmat(&mut rng, n, n);
            m.adjoint() * m
        };
        let cf = gamma_closed_form(&b, &sigma_any, k, p_m);
        prop_assert!(cf >= k as f64 / p_m - 1e-12);

        let iso = CMat::identity(n, n) * C64::new(s, 0.0);
        let cf_iso = gamma_closed_form(&b, &iso, k, p_m);
        let mut lambda: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
        lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let root = solve_gamma(&RegularizationInputs::new(lambda, vec![s; k], k, p_m).unwrap());
        prop_assert!((cf_iso - root).abs() <= 1e-10 * (1.0 + root));
    }

    // SINR is invariant under a unit-modulus phase applied to any column
    // of the effective matrix.
    #[test]
    fn sinr_phase_invariance(seed in 0u64..500, theta in 0.0f64..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = 3 + (seed % 3) as usize;
        let w = random_cmat(&mut rng, users, users);
        let base = sinr_from_effective(&w);
        let col = (seed as usize) % users;
        let mut rotated = w;
        let phase = C64::new(theta.cos(), theta.sin());
        for c in rotated.column_mut(col).iter_mut() {
            *c *= phase;
        }
        let got = sinr_from_effective(&rotated);
        for (a, b) in base.iter().zip(&got) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }
    }
}

// The multiplier returns nu = 0 exactly when the unconstrained solution is
// feasible, and meets the power budget otherwise.
#[test]
fn multiplier_feasibility_dichotomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = 3 + (rng.random::<f64>() * 4.0) as usize;
        let k = 1 + (rng.random::<f64>() * 3.0) as usize;
        let h = random_cmat(&mut rng, n, n);
        let a = h.adjoint() * h;
        let x = random_cmat(&mut rng, n, k);
        let power = 0.05 + rng.random::<f64>() * 5.0;
        let sub = QuadraticSubproblem { a: a.clone(), x: x.clone(), power };
        let (nu, f) = find_multiplier(&sub).unwrap();
        let unconstrained = a.clone().lu().solve(&x).unwrap();
        let feasible = frob_sqr(&unconstrained) <= power * (1.0 + 1e-12);
        assert_eq!(nu == 0.0, feasible);
        if nu > 0.0 {
            assert!((frob_sqr(&f) - power).abs() <= 1e-9 * power);
        }
    }
}

// Every beamformer constructor returns semi-unitary output, and the
// precoder power equality holds across designs.
#[test]
fn beamformers_are_semi_unitary_and_precoders_meet_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let k = 2;
        let n = 5;
        let h = random_cmat(&mut rng, k, n);
        let adaptive = bfn_adaptive(&h).unwrap();
        let h_bar = random_cmat(&mut rng, 2, n);
        let nulling = bfn_nulling(&h, &h_bar).unwrap().b;
        let raw = random_cmat(&mut rng, n, k);
        let prefixed = bfn_prefixed(&raw).unwrap();
        for b in [&adaptive, &nulling, &prefixed] {
            let dev = (b.adjoint() * b - CMat::identity(k, k)).norm();
            assert!(dev <= 1e-10, "semi-unitarity deviation {dev}");
            let p_m = 0.5 + rng.random::<f64>() * 3.0;
            let gamma = rng.random::<f64>();
            let (t_mat, _) = precoder_tm(b, &h, gamma, p_m).unwrap();
            assert!((frob_sqr(&t_mat) - p_m).abs() <= 1e-9 * p_m);
        }
    }
}

// With common receiver gains 1/sqrt(t_m), the SMSE never drops below the
// irreducible noise floor sum_m k/t_m.
#[test]
fn smse_noise_floor() {
    let sc = build_scenario(&ScenarioConfig::new(12, 2, 2, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..20 {
        let ch = sample_channel(&sc, seed);
        let k = 2;
        let t: Vec<f64> = (0..2).map(|_| 0.2 + rng.random::<f64>() * 5.0).collect();
        let f: Vec<CMat> = (0..2).map(|_| random_cmat(&mut rng, 4, k)).collect();
        let d: Vec<Vec<f64>> = t.iter().map(|&tm| vec![1.0 / tm.sqrt(); k]).collect();
        let (total, _) = smse(&ch, &f, &d);
        let floor: f64 = t.iter().map(|&tm| k as f64 / tm).sum();
        assert!(total >= floor - 1e-12 * floor.abs());
    }
}
