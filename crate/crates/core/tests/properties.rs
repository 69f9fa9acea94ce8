mod common;

use std::f64::consts::PI;

use common::*;
use ddae_core::asymptotic::{gamma0, robust_difference_abscissa};
use ddae_core::sensitivity::{abscissa_gradient, cd_gradient, gamma0_gradient};
use ddae_core::spectrum::discretize;
use ddae_core::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn retarded(a: f64, b: f64, tau: f64) -> DdaeSystem {
    DdaeSystem::from_terms(
        s(1.0),
        [
            DelayTerm {
                delay: 0.0,
                matrix: s(a),
            },
            DelayTerm {
                delay: tau,
                matrix: s(b),
            },
        ],
    )
    .unwrap()
}

fn scalar_neutral(g: f64, a: f64, b: f64, tau: f64) -> DdaeSystem {
    let h = DelayedTerms::new(vec![s(a), s(b)], vec![0.0, tau]).unwrap();
    neutral_to_ddae(&DelayedTerms::single(s(g), tau), &h).unwrap()
}

/// Zeros of `det Δ` inside a rectangle, by the winding number along its boundary.
fn argument_principle(sys: &DdaeSystem, re: (f64, f64), im: (f64, f64), step: f64) -> Option<i64> {
    let corners = [
        Complex64::new(re.0, im.0),
        Complex64::new(re.1, im.0),
        Complex64::new(re.1, im.1),
        Complex64::new(re.0, im.1),
    ];
    let mut winding = 0.0;
    let mut prev = sys.char_matrix(corners[0]).determinant();
    for k in 0..4 {
        let (from, to) = (corners[k], corners[(k + 1) % 4]);
        let m = ((to - from).norm() / step).ceil() as usize;
        for j in 1..=m {
            let z = from + (to - from) * (j as f64 / m as f64);
            let d = sys.char_matrix(z).determinant();
            let turn = (d / prev).arg();
            if turn.abs() > PI / 4.0 {
                return None;
            }
            winding += turn;
            prev = d;
        }
    }
    Some((winding / (2.0 * PI)).round() as i64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn f_strictly_decreases(seed in any::<u64>(), m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delays: Vec<f64> = (0..m).map(|k| 0.5 + k as f64 + 0.7 * (seed % 7) as f64 / 7.0).collect();
        let sys = random_neutral(&mut rng, 2, &delays, 0.8);
        let zetas: Vec<f64> = (0..20).map(|k| -2.0 + 0.2 * k as f64).collect();
        prop_assert!(check_f_monotone(&sys, &zetas).is_ok());
    }

    #[test]
    fn scalar_cd_is_log_gain_over_delay(g in 0.05f64..3.0, neg in any::<bool>(), tau in 0.1f64..4.0) {
        let g = if neg { -g } else { g };
        let rep = strong_stability(&scalar_neutral(g, -1.0, 0.0, tau), &AnalysisOptions::default()).unwrap();
        prop_assert!((rep.c_d - g.abs().ln() / tau).abs() <= 1e-8);
        prop_assert!((rep.gamma0 - g.abs()).abs() <= 1e-12);
    }

    #[test]
    fn cd_ignores_the_sign_of_the_difference_part(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g1 = random_matrix(&mut rng, 2, 0.7);
        let g2 = random_matrix(&mut rng, 2, 0.7);
        let h = DelayedTerms::single(-DMatrix::identity(2, 2), 0.0);
        let build = |sign: f64| {
            let g = DelayedTerms::new(vec![&g1 * sign, &g2 * sign], vec![1.0, 2.3]).unwrap();
            strong_stability(&neutral_to_ddae(&g, &h).unwrap(), &AnalysisOptions::default()).unwrap()
        };
        let (plus, minus) = (build(1.0), build(-1.0));
        prop_assert!((plus.c_d - minus.c_d).abs() <= 1e-10);
        prop_assert!((plus.gamma0 - minus.gamma0).abs() <= 1e-10);
    }

    #[test]
    fn nullspace_basis_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_neutral(&mut rng, 2, &[1.0, 1.7], 0.6);
        let dec = decompose(&sys, 1e-10).unwrap();
        let q1 = random_matrix(&mut rng, dec.nullity(), 1.0).qr().q();
        let q2 = random_matrix(&mut rng, dec.nullity(), 1.0).qr().q();
        let other = Decomposition::from_bases(&sys, dec.u() * q1, dec.v() * q2, 1e-10).unwrap();
        let grid = ThetaGrid::default();
        prop_assert!((gamma0(&dec, &grid) - gamma0(&other, &grid)).abs() <= 1e-10);
        let (a, b) = (
            robust_difference_abscissa(&dec, &grid, 1e-12),
            robust_difference_abscissa(&other, &grid, 1e-12),
        );
        prop_assert!((a - b).abs() <= 1e-8);
    }

    #[test]
    fn theta_grid_refinement_is_converged(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_neutral(&mut rng, 2, &[1.0, 1.6, 2.9], 0.5);
        let dec = decompose(&sys, 1e-10).unwrap();
        let coarse = gamma0(&dec, &ThetaGrid::with_points(64));
        let fine = gamma0(&dec, &ThetaGrid::with_points(128));
        prop_assert!((coarse - fine).abs() <= 1e-6, "{} vs {}", coarse, fine);
    }

    #[test]
    fn roots_are_closed_under_conjugation(a in -1.0f64..1.0, b in -1.0f64..1.0, tau in 0.2f64..2.0) {
        let opts = RootOptions::default().with_minimal_real_part(-2.0);
        let rs = compute_roots(&retarded(a, b, tau), &opts).unwrap();
        for r in &rs.corrected {
            let conj = rs.corrected.iter().any(|q| (q.value - r.value.conj()).norm() <= 1e-8);
            prop_assert!(conj, "{} has no conjugate", r.value);
        }
    }

    #[test]
    fn robust_abscissa_is_the_larger_part(k1 in -0.05f64..0.05, k2 in -0.05f64..0.05, k3 in -0.05f64..0.05) {
        let p = [PRINTED_MAX_GAIN[0] + k1, PRINTED_MAX_GAIN[1] + k2, PRINTED_MAX_GAIN[2] + k3];
        let sys = static_family().assemble(&p).unwrap();
        prop_assert!(check_robust_identity(&sys).is_ok());
    }

    #[test]
    fn verdict_matches_the_theorem(seed in any::<u64>(), k in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sys, expected) = labelled_instance(&mut rng, k);
        let check = check_strong_stability(&sys, expected);
        prop_assert!(check.is_ok(), "{:?}", check);
    }

    #[test]
    fn collocation_converges_spectrally(a in -1.0f64..0.5, b in -1.5f64..-0.2, tau in 0.5f64..1.5) {
        let sys = retarded(a, b, tau);
        let exact = compute_roots(&sys, &RootOptions::default()).unwrap().corrected[0].value;
        let error = |n: usize| {
            discretize(&sys, n).unwrap().eigenvalues().unwrap()
                .iter().map(|z| (z - exact).norm()).fold(f64::INFINITY, f64::min)
        };
        let (e10, e20) = (error(10), error(20));
        prop_assert!(e20 <= (0.1 * e10).max(1e-11), "{} then {}", e10, e20);
    }

    #[test]
    fn roots_right_of_cd_are_stable_under_doubling(g in 0.2f64..0.8, a in -1.0f64..0.0, b in -0.5f64..0.5) {
        let sys = scalar_neutral(g, a, b, 1.0);
        let cd = g.ln();
        let opts = RootOptions { n_max: 1000, ..RootOptions::default() }.with_minimal_real_part(cd + 0.3);
        let n1 = compute_roots(&sys, &opts.clone().with_n_points(60)).unwrap().corrected.len();
        let n2 = compute_roots(&sys, &opts.with_n_points(120)).unwrap().corrected.len();
        prop_assert_eq!(n1, n2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn neutral_root_count_matches_the_argument_principle(
        g in 0.2f64..0.7,
        neg in any::<bool>(),
        a in -1.0f64..0.5,
        b in -0.5f64..0.5,
    ) {
        let g = if neg { -g } else { g };
        let sys = scalar_neutral(g, a, b, 1.0);
        let (re, im) = ((g.abs().ln() - 0.3, 4.0), (-20.0, 20.0));
        let Some(winding) = argument_principle(&sys, re, im, 2e-3) else {
            return Ok(());
        };
        let opts = RootOptions { n_max: 1000, ..RootOptions::default() }
            .with_n_points(200)
            .with_minimal_real_part(re.0);
        let found = compute_roots(&sys, &opts).unwrap().corrected.iter()
            .filter(|r| r.value.re <= re.1 && r.value.im.abs() <= im.1)
            .count() as i64;
        prop_assert_eq!(found, winding);
    }

    #[test]
    fn flagged_gradients_match_central_differences(k1 in -0.1f64..0.1, k2 in -0.1f64..0.1, k3 in -0.1f64..0.1) {
        let p = [PRINTED_BARRIER_GAIN[0] + k1, PRINTED_BARRIER_GAIN[1] + k2, PRINTED_BARRIER_GAIN[2] + k3];
        let fam = static_family();
        let family = fam.family();
        let opts = AnalysisOptions::default();
        let c = check_gradient(|q| abscissa_gradient(family, q, &opts.roots).unwrap(), &p, 1e-6, 1e-4);
        prop_assert!(c.is_ok(), "{:?}", c);
        let g = check_gradient(|q| gamma0_gradient(family, q, &opts.grid).unwrap(), &p, 1e-6, 1e-4);
        prop_assert!(g.is_ok(), "{:?}", g);
        let d = check_gradient(|q| cd_gradient(family, q, &opts.grid, 1e-12).unwrap(), &p, 1e-6, 1e-4);
        prop_assert!(d.is_ok(), "{:?}", d);
    }
}

#[test]
fn retarded_scalar_rightmost_root_is_lambert_w() {
    let rs = compute_roots(&retarded(0.0, -1.0, 1.0), &RootOptions::default()).unwrap();
    let z = rs.corrected[0].value;
    assert!((Complex64::new(z.re, z.im.abs()) - lambert_w_minus_one()).norm() < 1e-10);
}
