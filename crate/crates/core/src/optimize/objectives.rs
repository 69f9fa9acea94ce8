use crate::asymptotic::AnalysisOptions;
use crate::model::{decompose, AffineFamily, DdaeSystem, Decomposition};
use crate::sensitivity::{abscissa_sample, cd_sample, gamma0_sample, GradientSample};
use crate::spectrum::{default_n_points, rightmost_roots};

use super::minimize::Objective;

/// Which eigenvalue function of the closed loop is minimized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Criterion {
    /// Spectral abscissa `c`.
    Abscissa,
    /// Robust spectral abscissa `C = max(c, C_D)`.
    Robust,
    /// `γ₀`, for the feasibility phase.
    Gamma0,
    /// `c − r log(γ − γ₀)`, `+∞` outside `γ₀ < γ`.
    Barrier { r: f64, gamma: f64 },
}

/// Eigenvalue objective on an affine family. Points where the family violates
/// the nullspace nonsingularity assumption, or where the roots cannot be
/// computed, evaluate to `+∞`.
pub struct SpectralObjective<'a> {
    family: &'a AffineFamily,
    criterion: Criterion,
    opts: AnalysisOptions,
    n_points: Option<usize>,
    target: Option<f64>,
    /// `γ₀` at every accepted iterate (barrier criterion only).
    pub accepted_gamma0: Vec<f64>,
}

impl<'a> SpectralObjective<'a> {
    pub fn new(family: &'a AffineFamily, criterion: Criterion, opts: &AnalysisOptions) -> Self {
        Self {
            family,
            criterion,
            opts: opts.clone(),
            n_points: opts.roots.n_points,
            target: None,
            accepted_gamma0: Vec::new(),
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    /// Discretization size currently used for the spectral abscissa.
    pub fn n_points(&self) -> Option<usize> {
        self.n_points
    }

    fn needs_roots(&self) -> bool {
        !matches!(self.criterion, Criterion::Gamma0)
    }

    fn n_for(&mut self, system: &DdaeSystem) -> usize {
        *self
            .n_points
            .get_or_insert_with(|| default_n_points(system, self.opts.roots.n_max))
    }

    fn abscissa(&mut self, system: &DdaeSystem, n: usize) -> Option<GradientSample> {
        let roots = rightmost_roots(system, n, &self.opts.roots).ok()?;
        Some(abscissa_sample(self.family, system, &roots, self.opts.roots.dedup_tol))
    }

    fn setup(&self, p: &[f64]) -> Option<(DdaeSystem, Decomposition)> {
        let system = self.family.assemble(p).ok()?;
        let dec = decompose(&system, self.opts.rank_tol).ok()?;
        Some((system, dec))
    }

    fn try_evaluate(&mut self, p: &[f64]) -> Option<GradientSample> {
        let (system, dec) = self.setup(p)?;
        let np = self.family.n_params();
        match self.criterion {
            Criterion::Gamma0 => Some(gamma0_sample(self.family, &dec, &self.opts.grid)),
            Criterion::Abscissa => {
                let n = self.n_for(&system);
                self.abscissa(&system, n)
            }
            Criterion::Robust => {
                let n = self.n_for(&system);
                let c = self.abscissa(&system, n)?;
                let cd = cd_sample(self.family, &dec, &self.opts.grid, self.opts.cd_tol);
                Some(robust_max(c, cd))
            }
            Criterion::Barrier { r, gamma } => {
                let g0 = gamma0_sample(self.family, &dec, &self.opts.grid);
                if !(g0.value < gamma) {
                    return Some(GradientSample::constant(f64::INFINITY, np));
                }
                let n = self.n_for(&system);
                let c = self.abscissa(&system, n)?;
                let slack = gamma - g0.value;
                Some(GradientSample {
                    value: c.value - r * slack.ln(),
                    gradient: c
                        .gradient
                        .iter()
                        .zip(&g0.gradient)
                        .map(|(gc, gg)| gc + r * gg / slack)
                        .collect(),
                    active: c.active,
                    differentiable: c.differentiable && g0.differentiable,
                })
            }
        }
    }
}

/// `max(c, C_D)` with the gradient of the larger branch; a (numerical) tie
/// is a kink.
pub(crate) fn robust_max(c: GradientSample, cd: GradientSample) -> GradientSample {
    let tie = (c.value - cd.value).abs() <= 1e-9 * (1.0 + c.value.abs());
    let mut out = if c.value >= cd.value { c } else { cd };
    if tie {
        out.differentiable = false;
    }
    out
}

impl Objective for SpectralObjective<'_> {
    fn n_params(&self) -> usize {
        self.family.n_params()
    }

    fn evaluate(&mut self, p: &[f64]) -> GradientSample {
        self.try_evaluate(p)
            .unwrap_or_else(|| GradientSample::constant(f64::INFINITY, self.family.n_params()))
    }

    /// Doubles the discretization when it misses the rightmost root.
    fn on_accept(&mut self, p: &[f64], _sample: &GradientSample) -> bool {
        if let Criterion::Barrier { gamma, .. } = self.criterion {
            if let Some((_, dec)) = self.setup(p) {
                let g0 = gamma0_sample(self.family, &dec, &self.opts.grid).value;
                assert!(g0 < gamma, "barrier iterate left the feasible set: γ₀ = {g0}");
                self.accepted_gamma0.push(g0);
            }
        }
        if !self.needs_roots() {
            return false;
        }
        let Some((system, _)) = self.setup(p) else {
            return false;
        };
        let n = self.n_for(&system);
        let n2 = (2 * n).min(self.opts.roots.n_max);
        if n2 <= n {
            return false;
        }
        let (Some(a), Some(b)) = (self.abscissa(&system, n), self.abscissa(&system, n2)) else {
            return false;
        };
        if (b.value - a.value).abs() > 1e-6 * (1.0 + a.value.abs()) {
            log::debug!("rightmost root missed with N = {n}; using N = {n2}");
            self.n_points = Some(n2);
            return true;
        }
        false
    }

    fn target(&self) -> Option<f64> {
        self.target
    }
}
