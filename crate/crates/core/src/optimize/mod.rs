//! Nonsmooth minimization of eigenvalue objectives and fixed-order controller
//! synthesis.

mod minimize;
mod minnorm;
mod objectives;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use minimize::{nonsmooth_minimize, FnObjective, Minimum, Objective, Status};
pub use minnorm::min_norm_point;
pub use objectives::{Criterion, SpectralObjective};

use crate::asymptotic::{strong_stability, AnalysisOptions, StrongStabilityReport};
use crate::error::{Error, Result};
use crate::model::{make_controller_family, ControllerFamily, ControllerIo, PlantIo};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub starts: usize,
    pub seed: u64,
    pub bfgs_max_iter: usize,
    /// Gradient norm at which the BFGS phase stops.
    pub bfgs_grad_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Gradients sampled per iteration; `None` means `2 n_p`.
    pub gs_samples: Option<usize>,
    /// Sampling radii relative to `max(1, ‖p‖_∞)`, strictly decreasing.
    pub gs_radii: Vec<f64>,
    /// Gradient sampling iterations per radius.
    pub gs_max_iter: usize,
    pub stop_tol: f64,
    /// Barrier weight of the first round; divided by 10 in each further round.
    pub barrier_r: f64,
    pub barrier_rounds: usize,
    pub gamma: f64,
    pub analysis: AnalysisOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 1,
            bfgs_max_iter: 400,
            bfgs_grad_tol: 1e-10,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.5,
            gs_samples: None,
            gs_radii: vec![1e-1, 1e-2, 1e-3],
            gs_max_iter: 100,
            stop_tol: 1e-5,
            barrier_r: 1e-3,
            barrier_rounds: 3,
            gamma: 1.0 - 1e-3,
            analysis: AnalysisOptions::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return bad("Wolfe constants must satisfy 0 < c1 < c2 < 1");
        }
        if self.gs_radii.is_empty()
            || self.gs_radii.iter().any(|&r| !(r > 0.0))
            || self.gs_radii.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("sampling radii must be positive and strictly decreasing");
        }
        if !(self.gamma <= 1.0) {
            return bad("gamma must not exceed 1");
        }
        if !(self.barrier_r > 0.0) || self.barrier_rounds == 0 {
            return bad("the barrier schedule needs r > 0 and at least one round");
        }
        if self.starts == 0 {
            return bad("at least one start is needed");
        }
        if !(self.stop_tol > 0.0) {
            return bad("stop_tol must be positive");
        }
        self.analysis.roots.validate()
    }

    fn for_start(&self, k: usize) -> Self {
        Self {
            seed: self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub controller: ControllerIo,
    pub params: Vec<f64>,
    /// `C` for [`stabilization_max`], `c` for [`stabilization_barrier`].
    pub objective: f64,
    pub report: StrongStabilityReport,
    /// Objective at every accepted iterate of the best start.
    pub trace: Vec<f64>,
    /// `γ₀` at every accepted barrier iterate of the best start.
    pub gamma0_trace: Vec<f64>,
    pub status: Status,
}

impl SynthesisResult {
    pub fn is_stabilizing(&self) -> bool {
        self.report.strongly_stable
    }
}

fn initial_points(family: &ControllerFamily, opts: &SolveOptions) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.starts).map(|_| family.initial_point(&mut rng)).collect()
}

fn finish(
    family: &ControllerFamily,
    best: Minimum,
    objective: f64,
    gamma0_trace: Vec<f64>,
    opts: &SolveOptions,
) -> Result<SynthesisResult> {
    let system = family.assemble(&best.p)?;
    let report = strong_stability(&system, &opts.analysis)?;
    Ok(SynthesisResult {
        controller: family.controller(&best.p),
        params: best.p,
        objective,
        report,
        trace: best.trace,
        gamma0_trace,
        status: best.status,
    })
}

/// Minimizes the robust spectral abscissa `C` over controllers of order `n_c`.
pub fn stabilization_max(plant: &PlantIo, n_c: usize, opts: &SolveOptions) -> Result<SynthesisResult> {
    stabilize_family_max(&make_controller_family(plant, n_c, None)?, opts)
}

/// [`stabilization_max`] for a given (possibly partially fixed) controller structure.
pub fn stabilize_family_max(family: &ControllerFamily, opts: &SolveOptions) -> Result<SynthesisResult> {
    opts.validate()?;
    let mut best: Option<Minimum> = None;
    for (k, p0) in initial_points(family, opts).into_iter().enumerate() {
        let mut obj = SpectralObjective::new(family.family(), Criterion::Robust, &opts.analysis);
        let run = nonsmooth_minimize(&mut obj, &p0, &opts.for_start(k));
        log::info!(
            "start {k}: C = {:.6} ({:?}, {} evaluations)",
            run.value,
            run.status,
            run.evaluations
        );
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::Infeasible(
            "no start point satisfies the nullspace nonsingularity assumption".into(),
        ));
    }
    let value = best.value;
    finish(family, best, value, Vec::new(), opts)
}

/// Finds `p` with `γ₀(p) < γ` by minimizing `γ₀` from the multi-start points.
pub fn feasibility_phase(family: &ControllerFamily, opts: &SolveOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    let mut lowest = f64::INFINITY;
    for (k, p0) in initial_points(family, opts).into_iter().enumerate() {
        let mut obj =
            SpectralObjective::new(family.family(), Criterion::Gamma0, &opts.analysis).with_target(opts.gamma);
        let start = obj.evaluate(&p0);
        if start.value < opts.gamma {
            return Ok(p0);
        }
        let run = nonsmooth_minimize(&mut obj, &p0, &opts.for_start(k));
        if run.value < opts.gamma {
            return Ok(run.p);
        }
        lowest = lowest.min(run.value);
    }
    Err(Error::Infeasible(format!(
        "no controller with γ₀ < {} found (lowest γ₀ = {lowest:.6})",
        opts.gamma
    )))
}

/// Minimizes `c` subject to `γ₀ < γ` through the barrier `c − r log(γ − γ₀)`
/// for a decreasing sequence of `r`, each round warm-started from the last.
pub fn stabilization_barrier(plant: &PlantIo, n_c: usize, opts: &SolveOptions) -> Result<SynthesisResult> {
    stabilize_family_barrier(&make_controller_family(plant, n_c, None)?, opts)
}

/// [`stabilization_barrier`] for a given controller structure.
pub fn stabilize_family_barrier(family: &ControllerFamily, opts: &SolveOptions) -> Result<SynthesisResult> {
    opts.validate()?;
    let mut best: Option<(Minimum, f64, Vec<f64>)> = None;
    let mut feasible_found = false;
    let mut last_err = None;
    for k in 0..opts.starts {
        let start_opts = SolveOptions {
            starts: 1,
            ..opts.for_start(k)
        };
        let p0 = match feasibility_phase(family, &start_opts) {
            Ok(p) => p,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        feasible_found = true;
        let mut p = p0;
        let mut trace = Vec::new();
        let mut gamma0_trace = Vec::new();
        let mut run = None;
        for round in 0..opts.barrier_rounds {
            let r = opts.barrier_r / 10f64.powi(round as i32);
            let criterion = Criterion::Barrier { r, gamma: opts.gamma };
            let mut obj = SpectralObjective::new(family.family(), criterion, &opts.analysis);
            let m = nonsmooth_minimize(&mut obj, &p, &start_opts.for_start(round));
            gamma0_trace.extend_from_slice(&obj.accepted_gamma0);
            trace.extend_from_slice(&m.trace);
            p = m.p.clone();
            run = Some(m);
        }
        let mut run = run.expect("at least one barrier round");
        run.trace = trace;
        let mut c_obj = SpectralObjective::new(family.family(), Criterion::Abscissa, &opts.analysis);
        let c = c_obj.evaluate(&run.p).value;
        log::info!("start {k}: c = {c:.6} ({:?})", run.status);
        if best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((run, c, gamma0_trace));
        }
    }
    if !feasible_found {
        return Err(last_err.unwrap_or_else(|| Error::Infeasible("no feasible start".into())));
    }
    let (run, c, gamma0_trace) = best.expect("a feasible start");
    finish(family, run, c, gamma0_trace, opts)
}
