#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::path::PathBuf;
use std::result::Result;

use ddae_core::asymptotic::{f_eval, gamma0, robust_difference_abscissa};
use ddae_core::model::AffineFamily;
use ddae_core::sensitivity::GradientSample;
use ddae_core::*;
use nalgebra::{dmatrix, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub const PRINTED_MAX_GAIN: [f64; 3] = [0.0409, 0.0612, 0.3837];
pub const PRINTED_BARRIER_GAIN: [f64; 3] = [0.0249, 0.1076, 0.3173];
/// Half width of the box of values that print as the four-decimal gains.
pub const ROUNDING_HALF_WIDTH: f64 = 5e-5;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn load(name: &str) -> SystemDocument {
    let text = std::fs::read_to_string(data_path(name)).unwrap();
    SystemDocument::parse(&text).unwrap()
}

/// `ż = Az + Bu(t−5)`, `y = z`; with the delayed output terms `y = z + (3,4,1)ᵀu(t−2.5) + (0.4,−0.4,−0.4)ᵀu(t−5)`
/// when `feedthrough` is set.
pub fn example_plant(feedthrough: bool) -> PlantIo {
    let a = dmatrix![-0.08, -0.03, 0.2; 0.2, -0.04, -0.005; -0.06, 0.2, -0.07];
    let b = dmatrix![-0.1; -0.2; 0.1];
    let d = feedthrough
        .then(|| DelayedTerms::new(vec![dmatrix![3.0; 4.0; 1.0], dmatrix![0.4; -0.4; -0.4]], vec![2.5, 5.0]).unwrap());
    create_plant(
        DelayedTerms::single(a, 0.0),
        DelayedTerms::single(b, 5.0),
        DelayedTerms::single(DMatrix::identity(3, 3), 0.0),
        d,
        None,
    )
    .unwrap()
}

pub fn static_gain(k: &[f64]) -> ControllerIo {
    IoSystem::static_gain(DMatrix::from_row_slice(1, k.len(), k))
}

/// Taylor coefficients `a_0..a_{K−1}` of `det Δ` at a real point, from the
/// trapezoidal rule on a circle of radius `r`.
pub fn det_taylor(sys: &DdaeSystem, at: f64, r: f64, count: usize) -> Vec<f64> {
    let m = 64;
    let mut out = vec![0.0; count];
    for j in 0..m {
        let w = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
        let d = sys.char_matrix(Complex64::new(at, 0.0) + r * w).determinant();
        for (k, o) in out.iter_mut().enumerate() {
            *o += (d * w.powi(-(k as i32))).re / (m as f64 * r.powi(k as i32));
        }
    }
    out
}

/// Gains near `start` at which the closed loop has a real triple root `λ`,
/// with `λ = C_D` appended when `pin_cd` is set. Newton (minimum norm steps
/// when underdetermined) on `(p, λ)` with a central difference Jacobian.
pub fn triple_root_gains(plant: &PlantIo, start: &[f64], lambda0: f64, pin_cd: bool) -> (Vec<f64>, f64) {
    let opts = AnalysisOptions::default();
    let np = start.len();
    let residual = |x: &[f64]| -> Vec<f64> {
        let sys = interconnect(plant, &static_gain(&x[..np])).unwrap();
        let mut f = det_taylor(&sys, x[np], 0.05, 3);
        if pin_cd {
            f.push(x[np] - strong_stability(&sys, &opts).unwrap().c_d);
        }
        f
    };
    let mut x: Vec<f64> = start.iter().copied().chain([lambda0]).collect();
    for _ in 0..30 {
        let f0 = residual(&x);
        let mut jac = DMatrix::zeros(f0.len(), x.len());
        for k in 0..x.len() {
            let h = 1e-7;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (residual(&xp), residual(&xm));
            for i in 0..f0.len() {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let step = jac.svd(true, true).solve(&DVector::from_vec(f0), 1e-14).unwrap();
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        if step.norm() < 1e-14 {
            break;
        }
    }
    (x[..np].to_vec(), x[np])
}

/// Rightmost root of `λ + e^{−λ} = 0` (that is `W₀(−1)`), by Newton on `λe^λ + 1`.
pub fn lambert_w_minus_one() -> Complex64 {
    let mut w = Complex64::new(-0.3, 1.3);
    for _ in 0..50 {
        let e = w.exp();
        w -= (w * e + 1.0) / (e * (w + 1.0));
    }
    w
}

/// Spectral radius of a complex 2×2 matrix in closed form.
pub fn radius_2x2(m: [[Complex64; 2]; 2]) -> f64 {
    let t = m[0][0] + m[1][1];
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let s = (t * t - 4.0 * d).sqrt();
    ((t + s) * 0.5).norm().max(((t - s) * 0.5).norm())
}

/// `max_θ ρ(G₁ + G₂e^{jθ})` over `points` equally spaced angles.
pub fn brute_force_gamma0(g1: &DMatrix<f64>, g2: &DMatrix<f64>, points: usize) -> f64 {
    let mut best = 0.0f64;
    for k in 0..points {
        let w = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / points as f64);
        let m = |i: usize, j: usize| Complex64::new(g1[(i, j)], 0.0) + w * g2[(i, j)];
        best = best.max(radius_2x2([[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]]));
    }
    best
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0))
}

/// `d/dt (z + Σ G_k z(t−τ_k)) = Az` with random `A` and difference matrices.
pub fn random_neutral<R: Rng>(rng: &mut R, n: usize, delays: &[f64], scale: f64) -> DdaeSystem {
    let g = DelayedTerms::new(
        delays.iter().map(|_| random_matrix(rng, n, scale)).collect(),
        delays.to_vec(),
    )
    .unwrap();
    let h = DelayedTerms::single(random_matrix(rng, n, 1.0), 0.0);
    neutral_to_ddae(&g, &h).unwrap()
}

/// `f` strictly decreases along `zetas` (sorted ascending) unless identically zero.
pub fn check_f_monotone(sys: &DdaeSystem, zetas: &[f64]) -> Result<(), String> {
    let dec = decompose(sys, 1e-10).map_err(|e| e.to_string())?;
    let grid = ThetaGrid::default();
    let values: Vec<f64> = zetas.iter().map(|&z| f_eval(&dec, z, &grid)).collect();
    for (w, z) in values.windows(2).zip(zetas.windows(2)) {
        if !(w[1] < w[0]) {
            return Err(format!("f({}) = {} not below f({}) = {}", z[1], w[1], z[0], w[0]));
        }
    }
    Ok(())
}

/// `C` equals the maximum of `c` and `C_D` computed separately.
pub fn check_robust_identity(sys: &DdaeSystem) -> Result<(), String> {
    let opts = AnalysisOptions::default();
    let c = spectral_abscissa(sys, &opts.roots).map_err(|e| e.to_string())?;
    let dec = decompose(sys, opts.rank_tol).map_err(|e| e.to_string())?;
    let cd = robust_difference_abscissa(&dec, &opts.grid, opts.cd_tol);
    let big_c = ddae_core::asymptotic::robust_spectral_abscissa(sys, &opts).map_err(|e| e.to_string())?;
    if (big_c - c.max(cd)).abs() > 1e-10 {
        return Err(format!("C = {big_c}, max(c, C_D) = {}", c.max(cd)));
    }
    Ok(())
}

/// The report's verdict agrees with `c < 0 ∧ γ₀ < 1` and with `expected`.
pub fn check_strong_stability(sys: &DdaeSystem, expected: bool) -> Result<(), String> {
    let opts = AnalysisOptions::default();
    let rep = strong_stability(sys, &opts).map_err(|e| e.to_string())?;
    let c = spectral_abscissa(sys, &opts.roots).map_err(|e| e.to_string())?;
    let dec = decompose(sys, opts.rank_tol).map_err(|e| e.to_string())?;
    let g0 = gamma0(&dec, &opts.grid);
    let verdict = c < 0.0 && g0 < 1.0;
    if rep.strongly_stable != verdict || verdict != expected {
        return Err(format!(
            "report {} (c = {c}, γ₀ = {g0}), expected {expected}",
            rep.strongly_stable
        ));
    }
    Ok(())
}

/// `ż = az + bz(t−τ)` for all delays stable when `a < −|b|`, unstable when `a > |b|`;
/// `d/dt (z + gz(t−τ)) = az` is not strongly stable when `|g| > 1`.
pub fn labelled_instance<R: Rng>(rng: &mut R, k: usize) -> (DdaeSystem, bool) {
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    let tau = 0.2 + 2.0 * rng.random::<f64>();
    let b = 2.0 * rng.random::<f64>() - 1.0;
    let margin = 0.05 + rng.random::<f64>();
    match k % 4 {
        0 => {
            let a = -(b.abs() + margin);
            let sys = DdaeSystem::from_terms(
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
            .unwrap();
            (sys, true)
        }
        1 => {
            let a = b.abs() + margin;
            let sys = DdaeSystem::from_terms(
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
            .unwrap();
            (sys, false)
        }
        2 => {
            let g = (1.0 + margin) * if b < 0.0 { -1.0 } else { 1.0 };
            let sys = neutral_to_ddae(&DelayedTerms::single(s(g), tau), &DelayedTerms::single(s(-1.0), 0.0)).unwrap();
            (sys, false)
        }
        _ => {
            let sys = DdaeSystem::from_terms(
                s(1.0),
                [DelayTerm {
                    delay: 0.0,
                    matrix: s(-margin),
                }],
            )
            .unwrap();
            (sys, true)
        }
    }
}

/// Differentiable-flagged gradients agree with central differences to `rel`.
pub fn check_gradient<F>(mut eval: F, p: &[f64], h: f64, rel: f64) -> Result<bool, String>
where
    F: FnMut(&[f64]) -> GradientSample,
{
    let s = eval(p);
    if !s.differentiable || !s.value.is_finite() {
        return Ok(false);
    }
    let mut fd = vec![0.0; p.len()];
    for j in 0..p.len() {
        let (mut pp, mut pm) = (p.to_vec(), p.to_vec());
        pp[j] += h;
        pm[j] -= h;
        fd[j] = (eval(&pp).value - eval(&pm).value) / (2.0 * h);
    }
    let diff = s
        .gradient
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = s.gradient.iter().map(|a| a * a).sum::<f64>().sqrt();
    if diff > rel * norm.max(1e-3) {
        return Err(format!("at {p:?}: gradient {:?}, differences {fd:?}", s.gradient));
    }
    Ok(true)
}

pub fn static_family() -> ControllerFamily {
    make_controller_family(&example_plant(true), 0, None).unwrap()
}

pub fn family_of(fam: &ControllerFamily) -> &AffineFamily {
    fam.family()
}
