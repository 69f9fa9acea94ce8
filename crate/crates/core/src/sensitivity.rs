//! Parameter derivatives of the spectral abscissa `c`, of `γ₀` and of `C_D`
//! along an affine family, valid where the active eigenvalue is simple.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::asymptotic::{difference_abscissa, dominant_triplet, DifferencePart, ThetaGrid};
use crate::error::Result;
use crate::linalg::{smallest_singular_triplet, CMatrix};
use crate::model::{decompose, AffineFamily, DdaeSystem, Decomposition, DEFAULT_RANK_TOL};
use crate::spectrum::{default_n_points, rightmost_roots, Root, RootOptions};

/// `σ₂/σ₁` of `Δ(λ)` above which a root counts as simple.
pub const SIMPLICITY_RATIO: f64 = 1e3;

/// What attains the value of a [`GradientSample`].
#[derive(Clone, Debug, PartialEq)]
pub enum Active {
    /// Constant objective (no roots, or no difference part).
    None,
    /// The rightmost characteristic root (upper half plane representative).
    Root(Complex64),
    /// Maximizing angles of the spectral radius at `ζ`, one per delay.
    Angles { zeta: f64, theta: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientSample {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub active: Active,
    /// False when the active eigenvalue is multiple or the maximum is attained
    /// more than once; the gradient is then only indicative.
    pub differentiable: bool,
}

impl GradientSample {
    pub fn constant(value: f64, n_params: usize) -> Self {
        Self {
            value,
            gradient: vec![0.0; n_params],
            active: Active::None,
            differentiable: true,
        }
    }
}

/// Derivatives `∂λ/∂p_j` of a characteristic root.
#[derive(Clone, Debug)]
pub struct RootDerivative {
    pub gradient: Vec<Complex64>,
    pub simple: bool,
}

/// `∂λ/∂p_j = −uᴴ(∂Δ/∂p_j)v / uᴴΔ'(λ)v` with `u`, `v` the singular vectors of
/// `Δ(λ)` for its smallest singular value.
pub fn root_derivative(family: &AffineFamily, p: &[f64], lambda: Complex64) -> Result<RootDerivative> {
    let system = family.assemble(p)?;
    Ok(root_derivative_of(family, &system, lambda))
}

fn root_derivative_of(family: &AffineFamily, system: &DdaeSystem, lambda: Complex64) -> RootDerivative {
    let np = family.n_params();
    let t = smallest_singular_triplet(&system.char_matrix(lambda));
    let mut simple = t.sigma_next > 0.0 && t.sigma_next > SIMPLICITY_RATIO * t.sigma_min;
    let denom = t.left.dotc(&(system.char_matrix_derivative(lambda) * &t.right));
    let scale = {
        let (ne, na) = system.norms();
        ne + na
    };
    if denom.norm() <= 1e-12 * scale.max(1.0) {
        simple = false;
    }
    let exps: Vec<Complex64> = family.delays().iter().map(|&tau| (-lambda * tau).exp()).collect();
    let gradient = (0..np)
        .map(|j| {
            let mut dd = CMatrix::zeros(system.dim(), system.dim());
            for (slot, &w) in exps.iter().enumerate() {
                dd.zip_apply(family.coeff(j, slot), |o, x| *o += w * x);
            }
            // ∂Δ/∂p_j = −dd
            t.left.dotc(&(dd * &t.right)) / denom
        })
        .collect();
    RootDerivative { gradient, simple }
}

/// Value and gradient of the spectral abscissa from precomputed rightmost roots
/// (sorted by decreasing real part, conjugate pairs included).
pub fn abscissa_sample(family: &AffineFamily, system: &DdaeSystem, roots: &[Root], dedup_tol: f64) -> GradientSample {
    let np = family.n_params();
    let Some(first) = roots.first() else {
        return GradientSample::constant(f64::NEG_INFINITY, np);
    };
    let c = first.value.re;
    let lead = if first.value.im < 0.0 {
        first.value.conj()
    } else {
        first.value
    };
    // another root (other than the conjugate partner) attaining c within dedup_tol
    let tie = roots[1..].iter().any(|r| {
        (r.value.re - c).abs() <= dedup_tol
            && (r.value - lead.conj()).norm() > dedup_tol
            && (r.value - lead).norm() > dedup_tol
    });
    let d = root_derivative_of(family, system, lead);
    GradientSample {
        value: c,
        gradient: d.gradient.iter().map(|g| g.re).collect(),
        active: Active::Root(lead),
        differentiable: d.simple && !tie,
    }
}

/// Gradient of the spectral abscissa `c(p)`.
pub fn abscissa_gradient(family: &AffineFamily, p: &[f64], opts: &RootOptions) -> Result<GradientSample> {
    opts.validate()?;
    let system = family.assemble(p)?;
    let n = opts.n_points.unwrap_or_else(|| default_n_points(&system, opts.n_max));
    let roots = rightmost_roots(&system, n, opts)?;
    Ok(abscissa_sample(family, &system, &roots, opts.dedup_tol))
}

/// Spectral radius of the difference part at `ζ`, maximized over the angles,
/// with its parameter gradient and `∂f/∂ζ` at the maximizer.
struct DifferenceSample {
    value: f64,
    gradient: Vec<f64>,
    d_zeta: f64,
    theta: Vec<f64>,
    differentiable: bool,
}

fn difference_sample(
    family: &AffineFamily,
    dec: &Decomposition,
    part: &DifferencePart,
    zeta: f64,
    grid: &ThetaGrid,
) -> DifferenceSample {
    let np = family.n_params();
    let delays = dec.delays();
    let m = delays.len();
    let best = part.maximize(zeta, grid);
    let mut theta = vec![0.0; m];
    for (&k, &th) in part.active.iter().zip(&best.theta) {
        theta[k] = th;
    }
    let weights: Vec<Complex64> = delays
        .iter()
        .zip(&theta)
        .map(|(&tau, &th)| Complex64::from_polar((-zeta * tau).exp(), th))
        .collect();
    let mats = dec.difference_matrices();
    let nu = dec.nullity();
    let mut s = CMatrix::zeros(nu, nu);
    for (mk, &w) in mats.iter().zip(&weights) {
        s.zip_apply(mk, |o, x| *o += w * x);
    }
    let mut differentiable = best.ties.is_empty();

    // M_k = A22_0⁻¹ A22_k with A22_k = Uᵀ A_k V; E, U and V do not depend on p
    let (u, v) = (dec.u(), dec.v());
    let lu = dec.blocks()[0].a22.clone().lu();
    let scale = mats.iter().map(|mk| mk.amax()).fold(0.0, f64::max);
    let d_mats: Vec<Vec<DMatrix<f64>>> = (0..np)
        .map(|j| {
            let d0 = u.transpose() * family.coeff(j, 0) * v;
            mats.iter()
                .enumerate()
                .map(|(k, mk)| {
                    let dk = u.transpose() * family.coeff(j, k + 1) * v - &d0 * mk;
                    lu.solve(&dk).unwrap_or_else(|| DMatrix::zeros(nu, nu))
                })
                .collect()
        })
        .collect();
    // a vanishing term that a parameter switches on has a free phase
    let switched_on = d_mats.iter().any(|dj| {
        dj.iter()
            .enumerate()
            .any(|(k, dm)| !part.active.contains(&k) && dm.amax() > 1e-12 * scale.max(1e-300))
    });
    if switched_on {
        differentiable = false;
    }

    let triplet = dominant_triplet(&s)
        .filter(|(mu, left, right)| mu.norm() > 0.0 && left.dotc(right).norm() > 1e-10 * left.norm() * right.norm());
    let Some((mu, left, right)) = triplet else {
        return DifferenceSample {
            value: best.value,
            gradient: vec![0.0; np],
            d_zeta: 0.0,
            theta,
            differentiable: differentiable && best.value == 0.0 && !switched_on,
        };
    };
    let rho = mu.norm();
    let denom = left.dotc(&right);
    let d_rho = |ds: &CMatrix| -> f64 {
        let dmu = left.dotc(&(ds * &right)) / denom;
        (mu.conj() * dmu).re / rho
    };

    let mut dz = CMatrix::zeros(nu, nu);
    for ((mk, &w), &tau) in mats.iter().zip(&weights).zip(delays) {
        dz.zip_apply(mk, |o, x| *o -= w * tau * x);
    }
    let d_zeta = d_rho(&dz);

    let gradient = d_mats
        .iter()
        .map(|dj| {
            let mut ds = CMatrix::zeros(nu, nu);
            for (dm, &w) in dj.iter().zip(&weights) {
                ds.zip_apply(dm, |o, x| *o += w * x);
            }
            d_rho(&ds)
        })
        .collect();
    DifferenceSample {
        value: best.value,
        gradient,
        d_zeta,
        theta,
        differentiable,
    }
}

fn decompose_at(family: &AffineFamily, p: &[f64]) -> Result<Decomposition> {
    decompose(&family.assemble(p)?, DEFAULT_RANK_TOL)
}

/// Gradient of `γ₀(p)` at the maximizing angles (envelope theorem).
pub fn gamma0_gradient(family: &AffineFamily, p: &[f64], grid: &ThetaGrid) -> Result<GradientSample> {
    let dec = decompose_at(family, p)?;
    Ok(gamma0_sample(family, &dec, grid))
}

pub(crate) fn gamma0_sample(family: &AffineFamily, dec: &Decomposition, grid: &ThetaGrid) -> GradientSample {
    let part = DifferencePart::from_decomposition(dec);
    if dec.nullity() == 0 || dec.difference_matrices().is_empty() {
        return GradientSample::constant(0.0, family.n_params());
    }
    let ds = difference_sample(family, dec, &part, 0.0, grid);
    GradientSample {
        value: ds.value,
        gradient: ds.gradient,
        active: Active::Angles {
            zeta: 0.0,
            theta: ds.theta,
        },
        differentiable: ds.differentiable,
    }
}

/// Gradient of `C_D(p)` by implicit differentiation of `f(C_D; p) = 1`.
pub fn cd_gradient(family: &AffineFamily, p: &[f64], grid: &ThetaGrid, tol: f64) -> Result<GradientSample> {
    let dec = decompose_at(family, p)?;
    Ok(cd_sample(family, &dec, grid, tol))
}

pub(crate) fn cd_sample(family: &AffineFamily, dec: &Decomposition, grid: &ThetaGrid, tol: f64) -> GradientSample {
    let np = family.n_params();
    let part = DifferencePart::from_decomposition(dec);
    if part.is_trivial() {
        let mut s = GradientSample::constant(f64::NEG_INFINITY, np);
        // a parameter may switch the difference part on
        if dec.nullity() > 0 && !dec.difference_matrices().is_empty() {
            s.differentiable = difference_sample(family, dec, &part, 0.0, grid).differentiable;
        }
        return s;
    }
    let cd = difference_abscissa(&part, grid, tol);
    let ds = difference_sample(family, dec, &part, cd, grid);
    let mut differentiable = ds.differentiable && ds.d_zeta < 0.0;
    let gradient = if ds.d_zeta < 0.0 {
        ds.gradient.iter().map(|g| -g / ds.d_zeta).collect()
    } else {
        differentiable = false;
        vec![0.0; np]
    };
    GradientSample {
        value: cd,
        gradient,
        active: Active::Angles {
            zeta: cd,
            theta: ds.theta,
        },
        differentiable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_controller_family, neutral_to_ddae, DelayedTerms};
    use nalgebra::dmatrix;

    fn scalar_family(delays: Vec<f64>, base: Vec<f64>, coeffs: Vec<Vec<f64>>) -> AffineFamily {
        let s = |x: f64| DMatrix::from_element(1, 1, x);
        AffineFamily::new(
            s(1.0),
            delays,
            base.into_iter().map(s).collect(),
            coeffs.into_iter().map(|c| c.into_iter().map(s).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn undelayed_scalar_root_moves_with_parameter() {
        let fam = scalar_family(vec![0.0], vec![0.0], vec![vec![1.0]]);
        let d = root_derivative(&fam, &[0.3], Complex64::new(0.3, 0.0)).unwrap();
        assert!(d.simple);
        assert!((d.gradient[0] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn delayed_scalar_matches_implicit_derivative() {
        // λ = −1 + p e^{−λ}: at p = 0, ∂λ/∂p = e^{−λ}/(1 + p e^{−λ}) = e
        let fam = scalar_family(vec![0.0, 1.0], vec![-1.0, 0.0], vec![vec![0.0, 1.0]]);
        let d = root_derivative(&fam, &[0.0], Complex64::new(-1.0, 0.0)).unwrap();
        assert!((d.gradient[0] - std::f64::consts::E).norm() < 1e-10);
    }

    #[test]
    fn double_root_is_not_simple() {
        // ẋ = [[0,1],[0,0]]x has a Jordan block at 0; p shifts the diagonal
        let fam = AffineFamily::new(
            DMatrix::identity(2, 2),
            vec![0.0],
            vec![dmatrix![0.0, 1.0; 0.0, 0.0]],
            vec![vec![DMatrix::identity(2, 2)]],
        )
        .unwrap();
        let d = root_derivative(&fam, &[0.0], Complex64::new(0.0, 0.0)).unwrap();
        assert!(!d.simple);
    }

    #[test]
    fn ties_and_repeated_roots_are_not_differentiable() {
        // ẋ = −x in two decoupled copies: a semisimple double root at −1
        let fam = AffineFamily::new(
            DMatrix::identity(2, 2),
            vec![0.0],
            vec![dmatrix![-1.0, 0.0; 0.0, -1.0]],
            vec![vec![dmatrix![1.0, 0.0; 0.0, 0.0]]],
        )
        .unwrap();
        let sys = fam.assemble(&[0.0]).unwrap();
        let roots = [
            Root {
                value: Complex64::new(-1.0, 0.0),
                residual: 0.0,
            },
            Root {
                value: Complex64::new(-1.0 + 1e-9, 1.0),
                residual: 0.0,
            },
        ];
        assert!(!abscissa_sample(&fam, &sys, &roots, 1e-6).differentiable);
        let s = abscissa_gradient(&fam, &[0.0], &RootOptions::default()).unwrap();
        assert_eq!(s.value, -1.0);
        assert!(!s.differentiable);
    }

    #[test]
    fn scalar_difference_gradients() {
        // neutral z(t) + a z(t−2) = v: γ₀ = |a| and C_D = ln|a|/2
        let a = -0.4;
        let sys = neutral_to_ddae(
            &DelayedTerms::single(DMatrix::from_element(1, 1, a), 2.0),
            &DelayedTerms::single(DMatrix::from_element(1, 1, -1.0), 0.0),
        )
        .unwrap();
        let mut c1 = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)];
        c1[1][(1, 1)] = 1.0;
        let base: Vec<_> = sys.terms().iter().map(|t| t.matrix.clone()).collect();
        let fam = AffineFamily::new(sys.e().clone(), vec![0.0, 2.0], base, vec![c1]).unwrap();
        let grid = ThetaGrid::default();
        let g = gamma0_gradient(&fam, &[0.0], &grid).unwrap();
        assert!((g.value - 0.4).abs() < 1e-12);
        assert!(g.differentiable);
        // the slot enters as z(t−2)·(a + p) on the constraint row
        let fd = (gamma0_gradient(&fam, &[1e-6], &grid).unwrap().value
            - gamma0_gradient(&fam, &[-1e-6], &grid).unwrap().value)
            / 2e-6;
        assert!((g.gradient[0] - fd).abs() < 1e-6);
        assert!((g.gradient[0].abs() - 1.0).abs() < 1e-9);
        let cd = cd_gradient(&fam, &[0.0], &grid, 1e-12).unwrap();
        assert!((cd.value - 0.4f64.ln() / 2.0).abs() < 1e-9);
        assert!((cd.gradient[0].abs() - 1.0 / (0.4 * 2.0)).abs() < 1e-6);
        assert_eq!(cd.gradient[0].signum(), g.gradient[0].signum());
    }

    #[test]
    fn nonsingular_descriptor_gives_zero_gamma0_gradient() {
        let fam = scalar_family(vec![0.0, 1.0], vec![-1.0, 0.5], vec![vec![0.0, 1.0]]);
        let g = gamma0_gradient(&fam, &[0.2], &ThetaGrid::default()).unwrap();
        assert_eq!(g, GradientSample::constant(0.0, 1));
        let cd = cd_gradient(&fam, &[0.2], &ThetaGrid::default(), 1e-8).unwrap();
        assert_eq!(cd.value, f64::NEG_INFINITY);
    }

    #[test]
    fn strictly_proper_controller_family_has_no_difference_part() {
        let a = dmatrix![-0.08, -0.03, 0.2; 0.2, -0.04, -0.005; -0.06, 0.2, -0.07];
        let plant = crate::model::create_plant(
            DelayedTerms::single(a, 0.0),
            DelayedTerms::single(dmatrix![-0.1; -0.2; 0.1], 5.0),
            DelayedTerms::single(DMatrix::identity(3, 3), 0.0),
            None,
            None,
        )
        .unwrap();
        let fam = make_controller_family(&plant, 0, None).unwrap();
        let p = [0.1, -0.2, 0.3];
        let g = gamma0_gradient(fam.family(), &p, &ThetaGrid::default()).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.gradient.iter().all(|&x| x == 0.0));
    }
}
