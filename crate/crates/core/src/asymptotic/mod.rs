//! Difference-part quantities `γ₀`, `f(ζ)`, `C_D`, the robust spectral
//! abscissa `C = max(c, C_D)` and the strong stability verdict.

mod difference;

use serde::{Deserialize, Serialize};

pub(crate) use difference::dominant_triplet;
pub use difference::{DifferencePart, Maximizer, ThetaGrid};

use crate::error::Result;
use crate::model::{decompose, DdaeSystem, Decomposition, DEFAULT_RANK_TOL};
use crate::spectrum::{spectral_abscissa, RootOptions};

/// `f(ζ) = max_θ ρ(Σ_k M_k e^{−ζτ_k} e^{jθ_k})`; 0 without a difference part.
pub fn f_eval(dec: &Decomposition, zeta: f64, grid: &ThetaGrid) -> f64 {
    DifferencePart::from_decomposition(dec).maximize(zeta, grid).value
}

/// `γ₀ = f(0)`; 0 when `E` is nonsingular.
pub fn gamma0(dec: &Decomposition, grid: &ThetaGrid) -> f64 {
    f_eval(dec, 0.0, grid)
}

/// Unique zero of the strictly decreasing `ζ ↦ f(ζ) − 1`, or `−∞` when the
/// difference part is absent (or nilpotent for every angle).
pub fn robust_difference_abscissa(dec: &Decomposition, grid: &ThetaGrid, tol: f64) -> f64 {
    let part = DifferencePart::from_decomposition(dec);
    difference_abscissa(&part, grid, tol)
}

pub(crate) fn difference_abscissa(part: &DifferencePart, grid: &ThetaGrid, tol: f64) -> f64 {
    if part.is_trivial() {
        return f64::NEG_INFINITY;
    }
    let f = |z: f64| part.maximize(z, grid).value;
    let tau_min = part.delays.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_max = part.delays.iter().copied().fold(0.0, f64::max);

    let f0 = f(0.0);
    if f0 == 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    if f0 > 1.0 {
        lo = 0.0;
        f_lo = f0;
        let bound: f64 = part.reduced.iter().map(|m| m.norm()).sum();
        let mut z = (bound.max(1.0 + 1e-12).ln() / tau_min).max(1.0 / tau_max);
        let mut fz = f(z);
        let mut guard = 0;
        while fz >= 1.0 && guard < 200 {
            lo = z;
            f_lo = fz;
            z *= 2.0;
            fz = f(z);
            guard += 1;
        }
        hi = z;
        f_hi = fz;
    } else {
        hi = 0.0;
        f_hi = f0;
        let mut z = -1.0 / tau_max;
        let mut fz = f(z);
        let mut guard = 0;
        while fz <= 1.0 {
            if guard >= 60 || !fz.is_finite() {
                return f64::NEG_INFINITY;
            }
            hi = z;
            f_hi = fz;
            z *= 2.0;
            fz = f(z);
            guard += 1;
        }
        lo = z;
        f_lo = fz;
    }

    for (z, fz) in [(hi, f_hi), (lo, f_lo)] {
        if (fz - 1.0).abs() <= tol {
            return z;
        }
    }
    // Illinois iteration on ln f, which is linear in ζ for a single scalar term.
    let g = |v: f64| if v > 0.0 { v.ln() } else { -745.0 };
    let (mut g_lo, mut g_hi) = (g(f_lo), g(f_hi));
    let mut side = 0i8;
    for _ in 0..200 {
        let mut z = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        if !z.is_finite() || z <= lo || z >= hi {
            z = 0.5 * (lo + hi);
        }
        let fz = f(z);
        if (fz - 1.0).abs() <= tol || hi - lo <= 1e-15 * (1.0 + z.abs()) {
            return z;
        }
        let gz = g(fz);
        if fz > 1.0 {
            lo = z;
            g_lo = gz;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = z;
            g_hi = gz;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

/// Options shared by the combined stability analyses.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub roots: RootOptions,
    pub grid: ThetaGrid,
    pub rank_tol: f64,
    /// Tolerance on `|f(C_D) − 1|`.
    pub cd_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            roots: RootOptions::default(),
            grid: ThetaGrid::default(),
            rank_tol: DEFAULT_RANK_TOL,
            cd_tol: 1e-8,
        }
    }
}

/// `C = max(c, C_D)`.
pub fn robust_spectral_abscissa(system: &DdaeSystem, opts: &AnalysisOptions) -> Result<f64> {
    Ok(strong_stability(system, opts)?.c_robust)
}

/// Summary of the strong stability analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongStabilityReport {
    #[serde(with = "crate::document::extended_float")]
    pub c: f64,
    #[serde(rename = "C_D", with = "crate::document::extended_float")]
    pub c_d: f64,
    #[serde(rename = "C", with = "crate::document::extended_float")]
    pub c_robust: f64,
    pub gamma0: f64,
    pub strongly_stable: bool,
    /// Sign of `C_D` (−1 when the difference part is absent).
    #[serde(rename = "Xi")]
    pub xi: i8,
}

impl StrongStabilityReport {
    pub fn from_parts(c: f64, c_d: f64, gamma0: f64) -> Self {
        let c_robust = c.max(c_d);
        let xi = if c_d < 0.0 {
            -1
        } else if c_d > 0.0 {
            1
        } else {
            0
        };
        Self {
            c,
            c_d,
            c_robust,
            gamma0,
            strongly_stable: c_robust < 0.0,
            xi,
        }
    }
}

/// Spectral abscissa, `C_D`, `γ₀` and the verdict `C < 0`.
pub fn strong_stability(system: &DdaeSystem, opts: &AnalysisOptions) -> Result<StrongStabilityReport> {
    let dec = decompose(system, opts.rank_tol)?;
    let c = spectral_abscissa(system, &opts.roots)?;
    let part = DifferencePart::from_decomposition(&dec);
    let g0 = part.maximize(0.0, &opts.grid).value;
    let c_d = difference_abscissa(&part, &opts.grid, opts.cd_tol);
    Ok(StrongStabilityReport::from_parts(c, c_d, g0))
}
