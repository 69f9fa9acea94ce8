use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use super::newton::{newton_correct_scaled, CorrectedRoot};
use super::pencil::{discretize, INFINITE_EIGENVALUE};
use crate::asymptotic::{robust_difference_abscissa, ThetaGrid};
use crate::error::{Error, Result};
use crate::model::{decompose, DdaeSystem, DEFAULT_RANK_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct RootOptions {
    /// Only roots with at least this real part are reported. When set and
    /// `n_points` is not, the discretization is refined until the number of
    /// roots in the half plane is stable under doubling.
    pub minimal_real_part: Option<f64>,
    /// Fixed number of collocation intervals (overrides the heuristic).
    pub n_points: Option<usize>,
    pub n_max: usize,
    /// Pencil dimension above which `N` is lowered.
    pub max_pencil_dim: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dedup_tol: f64,
    /// Margin within which `C_D` and `c` count as equal for the warning.
    pub warning_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            minimal_real_part: None,
            n_points: None,
            n_max: 400,
            max_pencil_dim: 3000,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            dedup_tol: 1e-6,
            warning_tol: 1e-4,
        }
    }
}

impl RootOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 5 {
            return Err(Error::InvalidArgument(format!("n_max = {} < 5", self.n_max)));
        }
        if !(self.newton_tol > 0.0 && self.dedup_tol > 0.0 && self.warning_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn with_n_points(mut self, n: usize) -> Self {
        self.n_points = Some(n);
        self
    }

    pub fn with_minimal_real_part(mut self, r: f64) -> Self {
        self.minimal_real_part = Some(r);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub residual: f64,
}

/// Characteristic roots found by discretization and Newton correction.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSet {
    /// Newton-corrected roots, sorted by decreasing real part.
    pub corrected: Vec<Root>,
    /// Uncorrected pencil eigenvalues.
    pub raw: Vec<Complex64>,
    pub n_used: usize,
    /// Robust spectral abscissa of the difference part (`−∞` when absent).
    pub c_d: f64,
    /// Set when `C_D ≥ c` up to `warning_tol`: the rightmost behaviour is governed by the
    /// high-frequency difference part.
    pub cd_warning: bool,
    /// Set when `N` was lowered to respect the pencil size budget.
    pub size_limited: bool,
}

impl RootSet {
    /// Largest real part of the corrected roots, `−∞` if there are none.
    pub fn abscissa(&self) -> f64 {
        self.corrected.first().map_or(f64::NEG_INFINITY, |r| r.value.re)
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.corrected.iter().map(|r| r.value).collect()
    }

    /// CSV with columns `re,im,residual,corrected`; raw approximations carry an
    /// empty residual and `corrected = 0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im,residual,corrected")?;
        for r in &self.corrected {
            writeln!(w, "{:.16e},{:.16e},{:.6e},1", r.value.re, r.value.im, r.residual)?;
        }
        for z in &self.raw {
            writeln!(w, "{:.16e},{:.16e},,0", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Default number of collocation intervals:
/// `max(15, ⌈4 + 2 τ_m ω / π⌉)` with `ω = 20/τ_1`, capped by `n_max`.
pub fn default_n_points(system: &DdaeSystem, n_max: usize) -> usize {
    let Some(tau1) = system.min_delay() else {
        return 15.min(n_max);
    };
    let omega = 20.0 / tau1;
    let n = (4.0 + 2.0 * system.max_delay() * omega / PI).ceil() as usize;
    n.max(15).min(n_max)
}

/// Lowers `n` until the pencil fits the size budget. Returns `(n, lowered)`.
fn fit_budget(system: &DdaeSystem, n: usize, max_dim: usize) -> (usize, bool) {
    let nd = system.delayed_columns().len();
    if nd == 0 {
        return (n, false);
    }
    let fits = |k: usize| system.dim() + nd * k <= max_dim;
    if fits(n) {
        return (n, false);
    }
    let mut k = n;
    while k > 2 && !fits(k) {
        k -= 1;
    }
    log::warn!("spectral discretization lowered from N = {n} to N = {k} (pencil size budget {max_dim})");
    (k, true)
}

pub(crate) struct Discretized {
    pub corrected: Vec<Root>,
    pub raw: Vec<Complex64>,
    pub n_used: usize,
    pub size_limited: bool,
}

/// Discretize with `n` intervals and Newton-correct the pencil eigenvalues.
///
/// With `rightmost_only`, only candidates within reach of the rightmost one are
/// corrected.
pub(crate) fn roots_with_n(
    system: &DdaeSystem,
    n: usize,
    opts: &RootOptions,
    rightmost_only: bool,
) -> Result<Discretized> {
    let (n, size_limited) = fit_budget(system, n, opts.max_pencil_dim);
    let pencil = discretize(system, n)?;
    let raw = pencil.eigenvalues()?;
    let norms = system.norms();

    let mut candidates: Vec<Complex64> = raw
        .iter()
        .copied()
        .filter(|z| z.im >= 0.0)
        .filter(|z| opts.minimal_real_part.is_none_or(|r| z.re >= r - 0.1 * (1.0 + r.abs())))
        .collect();
    candidates.sort_by(|a, b| b.re.total_cmp(&a.re));
    if rightmost_only {
        if let Some(first) = candidates.first().copied() {
            let reach = 0.1 * (1.0 + first.re.abs());
            let keep = candidates
                .iter()
                .take_while(|z| z.re >= first.re - reach)
                .count()
                .max(6.min(candidates.len()));
            candidates.truncate(keep);
        }
    }

    let mut upper: Vec<Root> = Vec::new();
    for z in candidates {
        let Ok(CorrectedRoot { value, residual, .. }) =
            newton_correct_scaled(system, z, opts.newton_tol, opts.newton_max_iter, norms)
        else {
            continue;
        };
        // divergence towards infinity passes the relative residual test
        if value.norm() > INFINITE_EIGENVALUE || (value - z).norm() > z.norm().max(1.0) {
            continue;
        }
        let mut value = value;
        if value.im.abs() <= 1e-12 * (1.0 + value.norm()) {
            value.im = 0.0;
        }
        // keep the representative in the closed upper half plane
        if value.im < 0.0 {
            value = value.conj();
        }
        match upper.iter_mut().find(|r| (r.value - value).norm() <= opts.dedup_tol) {
            Some(existing) => {
                if residual < existing.residual {
                    *existing = Root { value, residual };
                }
            }
            None => upper.push(Root { value, residual }),
        }
    }

    let mut corrected = Vec::with_capacity(2 * upper.len());
    for r in upper {
        corrected.push(r);
        if r.value.im > 0.0 {
            corrected.push(Root {
                value: r.value.conj(),
                residual: r.residual,
            });
        }
    }
    if let Some(r) = opts.minimal_real_part {
        corrected.retain(|root| root.value.re >= r);
    }
    corrected.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    Ok(Discretized {
        corrected,
        raw,
        n_used: n,
        size_limited,
    })
}

fn choose_and_solve(system: &DdaeSystem, opts: &RootOptions) -> Result<Discretized> {
    opts.validate()?;
    if let Some(n) = opts.n_points {
        return roots_with_n(system, n, opts, false);
    }
    let n0 = default_n_points(system, opts.n_max);
    if opts.minimal_real_part.is_none() || system.delayed_columns().is_empty() {
        return roots_with_n(system, n0, opts, false);
    }
    let mut current = roots_with_n(system, n0, opts, false)?;
    loop {
        let next_n = (2 * current.n_used).min(opts.n_max);
        if next_n <= current.n_used {
            return Ok(current);
        }
        let next = roots_with_n(system, next_n, opts, false)?;
        let stable = next.corrected.len() == current.corrected.len();
        let limited = next.size_limited || next.n_used <= current.n_used;
        current = next;
        if stable || limited {
            return Ok(current);
        }
    }
}

/// Characteristic roots of the DDAE.
///
/// Pencil eigenvalues (filtered by `minimal_real_part` when set) are
/// Newton-corrected, deduplicated, completed under conjugation and sorted by
/// decreasing real part.
pub fn compute_roots(system: &DdaeSystem, opts: &RootOptions) -> Result<RootSet> {
    let found = choose_and_solve(system, opts)?;
    let dec = decompose(system, DEFAULT_RANK_TOL)?;
    let c_d = robust_difference_abscissa(&dec, &ThetaGrid::default(), 1e-8);
    let c = found.corrected.first().map_or(f64::NEG_INFINITY, |r| r.value.re);
    let cd_warning = c_d.is_finite() && c_d >= c - opts.warning_tol;
    if cd_warning {
        log::warn!("case C_D >= c (C_D = {c_d:.6}, c = {c:.6})");
    }
    Ok(RootSet {
        corrected: found.corrected,
        raw: found.raw,
        n_used: found.n_used,
        c_d,
        cd_warning,
        size_limited: found.size_limited,
    })
}

/// Largest real part of the characteristic roots, `−∞` when there are none.
pub fn spectral_abscissa(system: &DdaeSystem, opts: &RootOptions) -> Result<f64> {
    opts.validate()?;
    let n = opts.n_points.unwrap_or_else(|| default_n_points(system, opts.n_max));
    let found = roots_with_n(system, n, opts, true)?;
    Ok(found.corrected.first().map_or(f64::NEG_INFINITY, |r| r.value.re))
}

/// Roots near the rightmost one, for repeated evaluation inside optimizers.
pub fn rightmost_roots(system: &DdaeSystem, n_points: usize, opts: &RootOptions) -> Result<Vec<Root>> {
    Ok(roots_with_n(system, n_points, opts, true)?.corrected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DelayTerm;
    use nalgebra::DMatrix;

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
    fn ode_has_single_root() {
        let rs = compute_roots(&scalar(&[(0.0, -1.0)]), &RootOptions::default()).unwrap();
        assert_eq!(rs.corrected.len(), 1);
        assert!((rs.corrected[0].value + 1.0).norm() < 1e-12);
        assert_eq!(rs.c_d, f64::NEG_INFINITY);
        assert!(!rs.cd_warning);
    }

    #[test]
    fn roots_are_sorted_conjugate_closed_and_accurate() {
        let sys = scalar(&[(0.0, -0.5), (1.0, -2.0)]);
        let opts = RootOptions::default().with_minimal_real_part(-3.0);
        let rs = compute_roots(&sys, &opts).unwrap();
        assert!(rs.corrected.len() >= 4);
        for w in rs.corrected.windows(2) {
            assert!(w[0].value.re >= w[1].value.re);
        }
        let (ne, na) = sys.norms();
        for r in &rs.corrected {
            assert!(r.value.re >= -3.0);
            assert!(r.residual <= opts.newton_tol * (r.value.norm() * ne + na).max(1.0));
            let conj = rs
                .corrected
                .iter()
                .any(|s| (s.value - r.value.conj()).norm() <= opts.dedup_tol);
            assert!(conj);
        }
        for (i, a) in rs.corrected.iter().enumerate() {
            for b in &rs.corrected[i + 1..] {
                assert!((a.value - b.value).norm() > opts.dedup_tol);
            }
        }
    }

    #[test]
    fn abscissa_of_empty_spectrum_is_minus_infinity() {
        let sys = DdaeSystem::from_terms(
            DMatrix::zeros(1, 1),
            [DelayTerm {
                delay: 0.0,
                matrix: DMatrix::from_element(1, 1, -1.0),
            }],
        )
        .unwrap();
        assert_eq!(
            spectral_abscissa(&sys, &RootOptions::default()).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn size_budget_lowers_n() {
        let sys = scalar(&[(0.0, 0.0), (1.0, -1.0)]);
        let opts = RootOptions {
            max_pencil_dim: 11,
            ..RootOptions::default()
        }
        .with_n_points(40);
        let rs = compute_roots(&sys, &opts).unwrap();
        assert!(rs.size_limited);
        assert_eq!(rs.n_used, 10);
    }

    #[test]
    fn csv_layout() {
        let rs = compute_roots(&scalar(&[(0.0, -1.0)]), &RootOptions::default()).unwrap();
        let mut buf = Vec::new();
        rs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("re,im,residual,corrected"));
        assert!(lines.next().unwrap().ends_with(",1"));
        assert!(lines.next().unwrap().ends_with(",,0"));
    }
}
