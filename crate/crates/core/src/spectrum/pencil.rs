use nalgebra::DMatrix;
use num_complex::Complex64;

use super::cheb;
use crate::error::{Error, Result};
use crate::linalg::real_eigenvalues;
use crate::model::DdaeSystem;

/// Pencil eigenvalues with modulus above this are treated as infinite.
pub const INFINITE_EIGENVALUE: f64 = 1e8;

/// Generalized eigenvalue problem `A v = λ B v` approximating the
/// characteristic roots.
///
/// Unknowns are `x(0)` followed by the delayed components of `x` at the
/// collocation nodes `θ_1..θ_N`; undelayed components carry no history.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub n_points: usize,
    pub n_delayed: usize,
}

impl Pencil {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Finite eigenvalues, via the shift-and-invert matrix `(A − σB)⁻¹B`.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let dim = self.dim();
        if dim == 0 {
            return Ok(Vec::new());
        }
        for &sigma in &[0.0137, -0.311, 0.527, -1.13, 2.71] {
            let lu = (&self.a - &self.b * sigma).lu();
            let diag = lu.u().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
                (lo.min(d.abs()), hi.max(d.abs()))
            });
            if hi == 0.0 || lo <= 1e-13 * hi {
                continue;
            }
            let Some(m) = lu.solve(&self.b) else { continue };
            let mu = match real_eigenvalues(&m) {
                Ok(mu) => mu,
                Err(_) => continue,
            };
            return Ok(mu
                .into_iter()
                .filter(|z| z.norm() > 0.0)
                .map(|z| Complex64::new(sigma, 0.0) + z.inv())
                .filter(|l| l.re.is_finite() && l.im.is_finite() && l.norm() <= INFINITE_EIGENVALUE)
                .collect());
        }
        Err(Error::Eigen(format!("no usable shift for the {dim}x{dim} pencil")))
    }
}

/// Spectral discretization with `n_points` Chebyshev intervals on `[−τ_m, 0]`.
///
/// The node at 0 carries `λ E x(0) = A₀ x(0) + Σ A_i x(−τ_i)` with the delayed
/// values interpolated; the remaining nodes carry the differentiation rows.
/// A delay-free system gives the pencil `(A₀, E)`.
pub fn discretize(system: &DdaeSystem, n_points: usize) -> Result<Pencil> {
    let n = system.dim();
    let cols = system.delayed_columns();
    let nd = cols.len();
    if system.terms().len() == 1 || nd == 0 {
        let mut a = system.a0().clone();
        for t in &system.terms()[1..] {
            a += &t.matrix;
        }
        return Ok(Pencil {
            a,
            b: system.e().clone(),
            n_points: 0,
            n_delayed: 0,
        });
    }
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 collocation intervals are needed, got {n_points}"
        )));
    }
    let big_n = n_points;
    let tau = system.max_delay();
    let dim = n + nd * big_n;
    let d = cheb::diff_matrix(big_n, tau);

    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, dim);
    b.view_mut((0, 0), (n, n)).copy_from(system.e());
    for i in n..dim {
        b[(i, i)] = 1.0;
    }

    a.view_mut((0, 0), (n, n)).copy_from(system.a0());
    for term in &system.terms()[1..] {
        let weights = cheb::interpolation_row(big_n, tau, -term.delay);
        for (ci, &col) in cols.iter().enumerate() {
            for row in 0..n {
                let coef = term.matrix[(row, col)];
                if coef == 0.0 {
                    continue;
                }
                a[(row, col)] += coef * weights[0];
                for k in 1..=big_n {
                    a[(row, n + (k - 1) * nd + ci)] += coef * weights[k];
                }
            }
        }
    }

    for r in 1..=big_n {
        let row0 = n + (r - 1) * nd;
        for (ci, &col) in cols.iter().enumerate() {
            a[(row0 + ci, col)] = d[(r, 0)];
            for k in 1..=big_n {
                a[(row0 + ci, n + (k - 1) * nd + ci)] = d[(r, k)];
            }
        }
    }
    Ok(Pencil {
        a,
        b,
        n_points: big_n,
        n_delayed: nd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DelayTerm;

    fn scalar(terms: &[(f64, f64)]) -> DdaeSystem {
        DdaeSystem::from_terms(
            DMatrix::from_element(1, 1, 1.0),
            terms.iter().map(|&(delay, a)| DelayTerm {
                delay,
                matrix: DMatrix::from_element(1, 1, a),
            }),
        )
        .unwrap()
    }

    #[test]
    fn ode_pencil_has_exact_eigenvalue() {
        let p = discretize(&scalar(&[(0.0, -1.0)]), 10).unwrap();
        assert_eq!(p.dim(), 1);
        let ev = p.eigenvalues().unwrap();
        assert!((ev[0] + 1.0).norm() < 1e-10);
    }

    #[test]
    fn pencil_size_counts_only_delayed_columns() {
        let e = DMatrix::identity(2, 2);
        let a1 = nalgebra::dmatrix![0.0, 1.0; 0.0, 0.0];
        let sys = DdaeSystem::from_terms(
            e,
            [
                DelayTerm {
                    delay: 0.0,
                    matrix: -DMatrix::identity(2, 2),
                },
                DelayTerm { delay: 1.0, matrix: a1 },
            ],
        )
        .unwrap();
        let p = discretize(&sys, 12).unwrap();
        assert_eq!((p.dim(), p.n_delayed), (2 + 12, 1));
        // triangular structure: only the eigenvalue −1 (twice) is finite and
        // the delay coupling does not create further roots
        let mut ev = p.eigenvalues().unwrap();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re));
        assert!(ev.iter().filter(|z| (*z + 1.0).norm() < 1e-8).count() >= 2);
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(discretize(&scalar(&[(0.0, 0.0), (1.0, -1.0)]), 1).is_err());
    }
}
