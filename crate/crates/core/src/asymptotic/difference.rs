use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::linalg::{complex_eigenvalues, orthonormal_range, smallest_singular_triplet, CMatrix};
use crate::model::Decomposition;

/// Discretization of the angle torus used to maximize the spectral radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrid {
    /// Grid points per angle.
    pub points: usize,
    /// Local ascent from the best grid points.
    pub refine: bool,
    /// Step length below which the local ascent stops.
    pub step_tol: f64,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self {
            points: 64,
            refine: true,
            step_tol: 1e-12,
        }
    }
}

impl ThetaGrid {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }
}

const MAX_GRID_TOTAL: usize = 1_000_000;
const RANDOM_RESTARTS: usize = 10;

/// Maximizer of `ρ(Σ_k M_k e^{−ζτ_k} e^{jθ_k})` over the angles.
#[derive(Clone, Debug)]
pub struct Maximizer {
    pub value: f64,
    /// One angle per active term; the first is pinned to 0.
    pub theta: Vec<f64>,
    /// Other maximizers found with (numerically) the same value.
    pub ties: Vec<Vec<f64>>,
}

/// The delay-difference part `Σ M_k z(t − τ_k)`, restricted to the joint range of
/// the `M_k` and with vanishing terms dropped.
///
/// The restriction keeps every nonzero eigenvalue of `Σ M_k w_k`: with `Q` an
/// orthonormal basis of that range, `Σ M_k w_k = Q Qᵀ Σ M_k w_k`, whose nonzero
/// spectrum equals that of `Qᵀ (Σ M_k w_k) Q`.
#[derive(Clone, Debug)]
pub struct DifferencePart {
    /// Indices (into the decomposition's delays) of the active terms.
    pub active: Vec<usize>,
    pub delays: Vec<f64>,
    pub reduced: Vec<DMatrix<f64>>,
}

impl DifferencePart {
    pub fn from_decomposition(dec: &Decomposition) -> Self {
        Self::from_matrices(dec.delays(), dec.difference_matrices())
    }

    pub fn from_matrices(delays: &[f64], mats: &[DMatrix<f64>]) -> Self {
        let scale: f64 = mats.iter().map(|m| m.amax()).fold(0.0, f64::max);
        let active: Vec<usize> = mats
            .iter()
            .enumerate()
            .filter(|(_, m)| scale > 0.0 && m.amax() > 1e-14 * scale)
            .map(|(k, _)| k)
            .collect();
        if active.is_empty() {
            return Self {
                active,
                delays: Vec::new(),
                reduced: Vec::new(),
            };
        }
        let nu = mats[active[0]].nrows();
        let mut stacked = DMatrix::zeros(nu, nu * active.len());
        for (i, &k) in active.iter().enumerate() {
            stacked.view_mut((0, i * nu), (nu, nu)).copy_from(&mats[k]);
        }
        let q = orthonormal_range(&stacked, 1e-13);
        let reduced = active.iter().map(|&k| q.transpose() * &mats[k] * &q).collect();
        Self {
            delays: active.iter().map(|&k| delays[k]).collect(),
            active,
            reduced,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.active.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.reduced.first().map_or(0, |m| m.nrows())
    }

    fn weights(&self, zeta: f64, theta: &[f64]) -> Vec<Complex64> {
        self.delays
            .iter()
            .zip(theta)
            .map(|(&tau, &th)| Complex64::from_polar((-zeta * tau).exp(), th))
            .collect()
    }

    /// `Σ_k M_k e^{−ζτ_k} e^{jθ_k}` in reduced coordinates.
    pub fn combination(&self, zeta: f64, theta: &[f64]) -> CMatrix {
        let r = self.dim();
        let mut s = CMatrix::zeros(r, r);
        for (m, w) in self.reduced.iter().zip(self.weights(zeta, theta)) {
            s.zip_apply(m, |o, x| *o += w * x);
        }
        s
    }

    pub fn spectral_radius(&self, zeta: f64, theta: &[f64]) -> f64 {
        dominant(&self.combination(zeta, theta)).map_or(0.0, |d| d.norm())
    }

    /// Value and gradient in the free angles `θ_2..θ_m`, `None` when the
    /// dominant eigenvalue is zero or defective.
    fn value_and_gradient(&self, zeta: f64, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let s = self.combination(zeta, theta);
        let (mu, left, right) = dominant_triplet(&s)?;
        let denom = left.dotc(&right);
        let rho = mu.norm();
        if rho == 0.0 || denom.norm() <= 1e-10 * left.norm() * right.norm() {
            return None;
        }
        let w = self.weights(zeta, theta);
        let grad = (1..self.reduced.len())
            .map(|k| {
                let dk = crate::linalg::to_complex(&self.reduced[k]) * (Complex64::i() * w[k]);
                let dmu = left.dotc(&(dk * &right)) / denom;
                (mu.conj() * dmu).re / rho
            })
            .collect();
        Some((rho, grad))
    }

    /// `f(ζ) = max_θ ρ(Σ M_k e^{−ζτ_k} e^{jθ_k})`.
    pub fn maximize(&self, zeta: f64, grid: &ThetaGrid) -> Maximizer {
        let m = self.reduced.len();
        if m == 0 {
            return Maximizer {
                value: 0.0,
                theta: Vec::new(),
                ties: Vec::new(),
            };
        }
        if self.dim() == 1 {
            return self.maximize_scalar(zeta);
        }
        if m == 1 {
            return Maximizer {
                value: self.spectral_radius(zeta, &[0.0]),
                theta: vec![0.0],
                ties: Vec::new(),
            };
        }
        let free = m - 1;
        let mut per_dim = grid.points.max(1);
        while free > 1 && per_dim.saturating_pow(free as u32) > MAX_GRID_TOTAL {
            per_dim -= 1;
        }
        let total = per_dim.pow(free as u32);
        let step = 2.0 * PI / per_dim as f64;

        let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total);
        let mut theta = vec![0.0; m];
        for idx in 0..total {
            let mut rem = idx;
            for d in 0..free {
                theta[d + 1] = (rem % per_dim) as f64 * step;
                rem /= per_dim;
            }
            samples.push((self.spectral_radius(zeta, &theta), theta.clone()));
        }
        samples.sort_by(|a, b| b.0.total_cmp(&a.0));
        samples.truncate(if grid.refine { 4 } else { 1 });
        if m >= 3 {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..RANDOM_RESTARTS {
                let mut th = vec![0.0; m];
                for t in th.iter_mut().skip(1) {
                    *t = rng.random::<f64>() * 2.0 * PI;
                }
                samples.push((self.spectral_radius(zeta, &th), th));
            }
        }

        let mut found: Vec<(f64, Vec<f64>)> = samples
            .into_iter()
            .map(|(v, th)| {
                if grid.refine {
                    self.refine(zeta, th, v, step, grid.step_tol)
                } else {
                    (v, th)
                }
            })
            .collect();
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (value, theta) = found[0].clone();
        let ties = found[1..]
            .iter()
            .filter(|(v, th)| (value - v).abs() <= 1e-9 * value.max(1e-300) && angle_distance(th, &theta) > 1e-4)
            .map(|(_, th)| th.clone())
            .collect();
        Maximizer { value, theta, ties }
    }

    /// With a single reduced dimension the maximum aligns all phases:
    /// `f(ζ) = Σ |m_k| e^{−ζτ_k}`.
    fn maximize_scalar(&self, zeta: f64) -> Maximizer {
        let coefs: Vec<f64> = self.reduced.iter().map(|m| m[(0, 0)]).collect();
        let value = coefs
            .iter()
            .zip(&self.delays)
            .map(|(c, &tau)| c.abs() * (-zeta * tau).exp())
            .sum();
        let sign0 = coefs[0].signum();
        let theta = coefs
            .iter()
            .map(|c| if c.signum() == sign0 { 0.0 } else { PI })
            .collect();
        Maximizer {
            value,
            theta,
            ties: Vec::new(),
        }
    }

    fn refine(&self, zeta: f64, theta: Vec<f64>, value: f64, h0: f64, step_tol: f64) -> (f64, Vec<f64>) {
        let free = theta.len() - 1;
        let Some((mut val, mut grad)) = self.value_and_gradient(zeta, &theta) else {
            return (value, theta);
        };
        let mut th = theta;
        for _ in 0..60 {
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }
            let dir = self
                .newton_direction(zeta, &th, &grad)
                .unwrap_or_else(|| grad.iter().map(|g| g * (0.5 * h0 / gnorm)).collect());
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-12 {
                let mut trial = th.clone();
                for d in 0..free {
                    trial[d + 1] += t * dir[d];
                }
                if let Some((v, g)) = self.value_and_gradient(zeta, &trial) {
                    if v > val {
                        accepted = Some((v, g, trial));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((v, g, trial)) = accepted else { break };
            let moved = t * dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            val = v;
            grad = g;
            th = trial;
            if moved < step_tol {
                break;
            }
        }
        for t in th.iter_mut() {
            *t = t.rem_euclid(2.0 * PI);
        }
        (val.max(value), th)
    }

    /// Newton step from a finite-difference Hessian, `None` unless the Hessian
    /// is negative definite.
    fn newton_direction(&self, zeta: f64, theta: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
        let free = grad.len();
        let h = 1e-6;
        let mut hess = DMatrix::zeros(free, free);
        for d in 0..free {
            let mut plus = theta.to_vec();
            let mut minus = theta.to_vec();
            plus[d + 1] += h;
            minus[d + 1] -= h;
            let (_, gp) = self.value_and_gradient(zeta, &plus)?;
            let (_, gm) = self.value_and_gradient(zeta, &minus)?;
            for e in 0..free {
                hess[(e, d)] = (gp[e] - gm[e]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let chol = (-hess).cholesky()?;
        let step = chol.solve(&DVector::from_column_slice(grad));
        Some(step.iter().copied().collect())
    }
}

fn angle_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        })
        .fold(0.0, f64::max)
}

/// Eigenvalue of largest modulus.
pub(crate) fn dominant(s: &CMatrix) -> Option<Complex64> {
    complex_eigenvalues(s)
        .ok()?
        .into_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
}

/// Dominant eigenvalue with left and right eigenvectors.
pub(crate) fn dominant_triplet(s: &CMatrix) -> Option<(Complex64, crate::linalg::CVector, crate::linalg::CVector)> {
    let mu = dominant(s)?;
    let r = s.nrows();
    if r == 1 {
        let one = crate::linalg::CVector::from_element(1, Complex64::new(1.0, 0.0));
        return Some((s[(0, 0)], one.clone(), one));
    }
    let shifted = s - CMatrix::identity(r, r) * mu;
    let t = smallest_singular_triplet(&shifted);
    Some((mu, t.left, t.right))
}
