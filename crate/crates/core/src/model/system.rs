use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, CMatrix};

/// Delays closer than this are the same delay.
pub const DELAY_MERGE_TOL: f64 = 1e-12;

/// One `A_i x(t - τ_i)` term.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub matrix: DMatrix<f64>,
}

/// `E ẋ(t) = A₀ x(t) + Σ A_i x(t - τ_i)` with a possibly singular `E`.
///
/// The first term always carries delay 0 and delays are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct DdaeSystem {
    e: DMatrix<f64>,
    terms: Vec<DelayTerm>,
}

impl DdaeSystem {
    /// Builds a system from terms already in canonical order.
    pub fn new(e: DMatrix<f64>, terms: Vec<DelayTerm>) -> Result<Self> {
        let n = e.nrows();
        if n == 0 || e.ncols() != n {
            return Err(Error::Dimension(format!(
                "E must be a nonempty square matrix, got {}x{}",
                e.nrows(),
                e.ncols()
            )));
        }
        if terms.is_empty() || terms[0].delay != 0.0 {
            return Err(Error::Delay("the first term must carry delay 0".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.matrix.nrows() != n || t.matrix.ncols() != n {
                return Err(Error::Dimension(format!(
                    "term {i} is {}x{}, expected {n}x{n}",
                    t.matrix.nrows(),
                    t.matrix.ncols()
                )));
            }
            if !t.delay.is_finite() || t.delay < 0.0 {
                return Err(Error::Delay(format!("term {i} has delay {}", t.delay)));
            }
            if i > 0 && t.delay <= terms[i - 1].delay {
                return Err(Error::Delay(format!(
                    "delays must be strictly increasing (term {i}: {} after {})",
                    t.delay,
                    terms[i - 1].delay
                )));
            }
        }
        Ok(Self { e, terms })
    }

    /// Builds a system from terms in any order: delays within
    /// [`DELAY_MERGE_TOL`] are merged by summing their matrices and a zero `A₀`
    /// is inserted when no undelayed term is present.
    pub fn from_terms(e: DMatrix<f64>, terms: impl IntoIterator<Item = DelayTerm>) -> Result<Self> {
        let n = e.nrows();
        let mut merged = merge_terms(terms)?;
        if merged.first().is_none_or(|t| t.delay != 0.0) {
            merged.insert(
                0,
                DelayTerm {
                    delay: 0.0,
                    matrix: DMatrix::zeros(n, n),
                },
            );
        }
        Self::new(e, merged)
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.terms[0].matrix
    }

    /// Nonzero delays `τ_1 < ... < τ_m`.
    pub fn delays(&self) -> Vec<f64> {
        self.terms[1..].iter().map(|t| t.delay).collect()
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.delay)
    }

    /// Smallest strictly positive delay, if any.
    pub fn min_delay(&self) -> Option<f64> {
        self.terms.get(1).map(|t| t.delay)
    }

    /// Same matrices with the nonzero delays replaced.
    pub fn with_delays(&self, delays: &[f64]) -> Result<Self> {
        if delays.len() + 1 != self.terms.len() {
            return Err(Error::Dimension(format!(
                "expected {} delays, got {}",
                self.terms.len() - 1,
                delays.len()
            )));
        }
        let terms = self.terms.iter().enumerate().map(|(i, t)| DelayTerm {
            delay: if i == 0 { 0.0 } else { delays[i - 1] },
            matrix: t.matrix.clone(),
        });
        Self::from_terms(self.e.clone(), terms)
    }

    /// Columns of `x` that appear with a nonzero delay somewhere.
    pub fn delayed_columns(&self) -> Vec<usize> {
        let n = self.dim();
        (0..n)
            .filter(|&j| {
                self.terms[1..]
                    .iter()
                    .any(|t| t.matrix.column(j).iter().any(|&x| x != 0.0))
            })
            .collect()
    }

    /// `‖E‖`, `Σ ‖A_i‖` (spectral norms), used to scale residual tolerances.
    pub fn norms(&self) -> (f64, f64) {
        let e = spectral_norm(&self.e);
        let a = self.terms.iter().map(|t| spectral_norm(&t.matrix)).sum();
        (e, a)
    }

    /// `Δ(λ) = λE − A₀ − Σ A_i e^{−λτ_i}`.
    pub fn char_matrix(&self, lambda: Complex64) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::from_fn(n, n, |i, j| lambda * self.e[(i, j)]);
        for t in &self.terms {
            let w = (-lambda * t.delay).exp();
            out.zip_apply(&t.matrix, |o, a| *o -= w * a);
        }
        out
    }

    /// `Δ'(λ) = E + Σ τ_i A_i e^{−λτ_i}`.
    pub fn char_matrix_derivative(&self, lambda: Complex64) -> CMatrix {
        let mut out = self.e.map(|x| Complex64::new(x, 0.0));
        for t in &self.terms[1..] {
            let w = (-lambda * t.delay).exp() * t.delay;
            out.zip_apply(&t.matrix, |o, a| *o += w * a);
        }
        out
    }
}

/// Sorts terms by delay and merges delays closer than [`DELAY_MERGE_TOL`].
pub(crate) fn merge_terms(terms: impl IntoIterator<Item = DelayTerm>) -> Result<Vec<DelayTerm>> {
    let mut terms: Vec<DelayTerm> = terms.into_iter().collect();
    for t in &terms {
        if !t.delay.is_finite() || t.delay < 0.0 {
            return Err(Error::Delay(format!("negative or non-finite delay {}", t.delay)));
        }
    }
    terms.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    let mut out: Vec<DelayTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if (t.delay - last.delay).abs() <= DELAY_MERGE_TOL => {
                if last.matrix.shape() != t.matrix.shape() {
                    return Err(Error::Dimension("merged terms differ in shape".into()));
                }
                last.matrix += &t.matrix;
            }
            _ => out.push(t),
        }
    }
    if let Some(first) = out.first_mut() {
        if first.delay <= DELAY_MERGE_TOL {
            first.delay = 0.0;
        }
    }
    Ok(out)
}
