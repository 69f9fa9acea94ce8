use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{sigma_min, smallest_singular_triplet, CMatrix};
use crate::model::DdaeSystem;

/// A characteristic root refined by Newton's method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectedRoot {
    pub value: Complex64,
    /// `σ_min(Δ(λ))`
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NewtonFailure {
    /// The bordered Jacobian could not be factored.
    SingularJacobian,
    /// Iteration budget exhausted without meeting the residual tolerance.
    NotConverged {
        last: Complex64,
        residual: f64,
    },
    NonFinite,
}

/// Residual scale `max(1, |λ|‖E‖ + Σ‖A_i‖)`.
pub(crate) fn residual_scale(lambda: Complex64, norm_e: f64, norm_a: f64) -> f64 {
    (lambda.norm() * norm_e + norm_a).max(1.0)
}

/// Newton iteration on `Δ(λ) v = 0`, `cᴴ v = 1` in the unknowns `(v, λ)`, with
/// `c` the right singular vector of `Δ(λ₀)` belonging to `σ_min`.
pub(crate) fn newton_correct_scaled(
    system: &DdaeSystem,
    start: Complex64,
    tol: f64,
    max_iter: usize,
    (norm_e, norm_a): (f64, f64),
) -> Result<CorrectedRoot, NewtonFailure> {
    let n = system.dim();
    let triplet = smallest_singular_triplet(&system.char_matrix(start));
    let c = triplet.right;
    let mut v = c.clone();
    let mut lambda = start;
    let mut iterations = 0;
    let mut singular = false;
    for it in 0..max_iter {
        iterations = it + 1;
        let delta = system.char_matrix(lambda);
        let dv = system.char_matrix_derivative(lambda) * &v;
        let mut jac = CMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&delta);
        jac.view_mut((0, n), (n, 1)).copy_from(&dv);
        for j in 0..n {
            jac[(n, j)] = c[j].conj();
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-(&delta * &v)));
        rhs[n] = Complex64::new(1.0, 0.0) - c.dotc(&v);
        // a semisimple multiple root makes the bordering singular; the
        // residual test below decides whether λ is already a root
        let Some(step) = jac.lu().solve(&rhs) else {
            singular = true;
            break;
        };
        v += step.rows(0, n);
        let dl = step[n];
        lambda += dl;
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(NewtonFailure::NonFinite);
        }
        if dl.norm() <= 1e-14 * (1.0 + lambda.norm()) {
            break;
        }
    }
    let residual = sigma_min(&system.char_matrix(lambda));
    if residual <= tol * residual_scale(lambda, norm_e, norm_a) {
        Ok(CorrectedRoot {
            value: lambda,
            residual,
            iterations,
        })
    } else if singular {
        Err(NewtonFailure::SingularJacobian)
    } else {
        Err(NewtonFailure::NotConverged { last: lambda, residual })
    }
}

/// Refines an approximate characteristic root.
pub fn newton_correct(
    system: &DdaeSystem,
    start: Complex64,
    opts: &super::RootOptions,
) -> Result<CorrectedRoot, NewtonFailure> {
    newton_correct_scaled(system, start, opts.newton_tol, opts.newton_max_iter, system.norms())
}
