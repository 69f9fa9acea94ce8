use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::minnorm::min_norm_point;
use super::SolveOptions;
use crate::sensitivity::GradientSample;

/// A function to minimize, evaluated with its gradient where it has one.
pub trait Objective {
    fn n_params(&self) -> usize;

    /// Total: infeasible points return `+∞`.
    fn evaluate(&mut self, p: &[f64]) -> GradientSample;

    /// Called at every accepted iterate. Returns true when the objective was
    /// refined (for instance a finer discretization) so that cached values
    /// must be recomputed.
    fn on_accept(&mut self, _p: &[f64], _sample: &GradientSample) -> bool {
        false
    }

    /// Stop as soon as the value drops below this.
    fn target(&self) -> Option<f64> {
        None
    }
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    n_params: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> GradientSample> FnObjective<F> {
    pub fn new(n_params: usize, f: F) -> Self {
        Self { n_params, f }
    }
}

impl<F: FnMut(&[f64]) -> GradientSample> Objective for FnObjective<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn evaluate(&mut self, p: &[f64]) -> GradientSample {
        (self.f)(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Sampled stationarity measure below `stop_tol` at the smallest radius.
    Stationary,
    /// The objective target was reached.
    TargetReached,
    /// Iteration budget exhausted; best point returned.
    MaxIterations,
    /// The starting point is infeasible (`+∞`).
    InfeasibleStart,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub p: Vec<f64>,
    pub value: f64,
    pub status: Status,
    /// Objective value at every accepted iterate, starting with `p₀`.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    differentiable: bool,
}

struct Run<'a, O: Objective> {
    obj: &'a mut O,
    opts: &'a SolveOptions,
    rng: ChaCha8Rng,
    trace: Vec<f64>,
    evaluations: usize,
}

impl<O: Objective> Run<'_, O> {
    fn eval(&mut self, x: &DVector<f64>) -> Point {
        self.evaluations += 1;
        let s = self.obj.evaluate(x.as_slice());
        let finite = s.value.is_finite() && s.gradient.iter().all(|g| g.is_finite());
        Point {
            x: x.clone(),
            f: if s.value.is_nan() { f64::INFINITY } else { s.value },
            g: DVector::from_vec(s.gradient),
            differentiable: s.differentiable && finite,
        }
    }

    /// Records an accepted iterate; re-evaluates when the objective changed.
    fn accept(&mut self, pt: Point) -> Point {
        let sample = GradientSample {
            value: pt.f,
            gradient: pt.g.as_slice().to_vec(),
            active: crate::sensitivity::Active::None,
            differentiable: pt.differentiable,
        };
        let pt = if self.obj.on_accept(pt.x.as_slice(), &sample) {
            self.eval(&pt.x)
        } else {
            pt
        };
        self.trace.push(pt.f);
        pt
    }

    fn reached(&self, f: f64) -> bool {
        self.obj.target().is_some_and(|t| f < t)
    }

    /// Weak Wolfe line search along `d`. On failure returns the best point with
    /// sufficient decrease, if any.
    fn wolfe(&mut self, cur: &Point, d: &DVector<f64>) -> (Option<Point>, bool) {
        let (c1, c2) = (self.opts.wolfe_c1, self.opts.wolfe_c2);
        let slope = cur.g.dot(d);
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut t = 1.0;
        let mut best: Option<Point> = None;
        for _ in 0..60 {
            let trial = self.eval(&(&cur.x + d * t));
            if !(trial.f <= cur.f + c1 * t * slope) {
                hi = t;
            } else if trial.g.dot(d) < c2 * slope {
                lo = t;
                if best.as_ref().is_none_or(|b| trial.f < b.f) {
                    best = Some(trial);
                }
            } else {
                return (Some(trial), true);
            }
            t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
            if hi.is_finite() && hi - lo <= 1e-12 * hi.max(1e-12) {
                break;
            }
            if t * d.norm() <= 1e-15 * (1.0 + cur.x.norm()) || t > 1e10 {
                break;
            }
        }
        (best, false)
    }

    fn nudge(&mut self, cur: &Point, scale: f64) -> Point {
        let n = cur.x.len();
        let dir = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal));
        let step = dir.normalize() * (1e-10 * scale);
        self.eval(&(&cur.x + step))
    }

    fn bfgs(&mut self, mut cur: Point) -> Point {
        let n = cur.x.len();
        let mut h = DMatrix::<f64>::identity(n, n);
        for _ in 0..self.opts.bfgs_max_iter {
            if self.reached(cur.f) {
                break;
            }
            if !cur.differentiable {
                let scale = cur.x.amax().max(1.0);
                let moved = self.nudge(&cur, scale);
                if !moved.differentiable || !moved.f.is_finite() {
                    break;
                }
                cur = moved;
            }
            if cur.g.norm() <= self.opts.bfgs_grad_tol {
                break;
            }
            let mut d = -(&h * &cur.g);
            if cur.g.dot(&d) >= 0.0 {
                h = DMatrix::identity(n, n);
                d = -cur.g.clone();
            }
            let (next, ok) = self.wolfe(&cur, &d);
            let Some(next) = next else { break };
            let s = &next.x - &cur.x;
            let y = &next.g - &cur.g;
            let sy = s.dot(&y);
            if sy > 0.0 && next.differentiable {
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                    - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            }
            let decrease = cur.f - next.f;
            cur = self.accept(next);
            if !ok || decrease <= 1e-14 * cur.f.abs().max(1e-10) {
                break;
            }
        }
        cur
    }

    fn sample_ball(&mut self, center: &DVector<f64>, radius: f64) -> DVector<f64> {
        let n = center.len();
        let dir = DVector::from_fn(n, |_, _| self.rng.sample::<f64, _>(StandardNormal)).normalize();
        let u: f64 = self.rng.random();
        center + dir * (radius * u.powf(1.0 / n as f64))
    }

    fn gradient_sampling(&mut self, mut cur: Point) -> (Point, bool) {
        let n = cur.x.len();
        let m = self.opts.gs_samples.unwrap_or(2 * n).max(1);
        let scale = cur.x.amax().max(1.0);
        let radii: Vec<f64> = self.opts.gs_radii.iter().map(|r| r * scale).collect();
        let mut stationary = false;
        for (k, &radius) in radii.iter().enumerate() {
            let last = k + 1 == radii.len();
            for _ in 0..self.opts.gs_max_iter {
                if self.reached(cur.f) {
                    return (cur, false);
                }
                let mut grads = Vec::with_capacity(m + 1);
                if cur.g.iter().all(|v| v.is_finite()) {
                    grads.push(cur.g.clone());
                }
                for _ in 0..m {
                    let y = self.sample_ball(&cur.x, radius);
                    let pt = self.eval(&y);
                    if pt.f.is_finite() && pt.g.iter().all(|v| v.is_finite()) {
                        grads.push(pt.g);
                    }
                }
                if grads.is_empty() {
                    break;
                }
                let (d, _) = min_norm_point(&grads);
                let dn = d.norm();
                if dn <= self.opts.stop_tol {
                    stationary = last;
                    break;
                }
                // Armijo backtracking along −d
                let mut t = 1.0;
                let mut moved = None;
                while t * dn > 1e-3 * radius {
                    let trial = self.eval(&(&cur.x - &d * t));
                    if trial.f < cur.f - self.opts.wolfe_c1 * t * dn * dn {
                        moved = Some(trial);
                        break;
                    }
                    t *= 0.5;
                }
                match moved {
                    Some(pt) => cur = self.accept(pt),
                    None => break,
                }
            }
        }
        (cur, stationary)
    }
}

/// Minimizes `obj` from `p0`: BFGS with a weak Wolfe line search, then
/// gradient sampling with shrinking radii.
pub fn nonsmooth_minimize<O: Objective>(obj: &mut O, p0: &[f64], opts: &SolveOptions) -> Minimum {
    let mut run = Run {
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        obj,
        opts,
        trace: Vec::new(),
        evaluations: 0,
    };
    let start = run.eval(&DVector::from_column_slice(p0));
    if !start.f.is_finite() {
        return Minimum {
            p: p0.to_vec(),
            value: start.f,
            status: Status::InfeasibleStart,
            trace: vec![start.f],
            evaluations: run.evaluations,
        };
    }
    let start = run.accept(start);
    let status;
    let end = if p0.is_empty() {
        status = Status::Stationary;
        start
    } else {
        let after_bfgs = run.bfgs(start);
        if run.reached(after_bfgs.f) {
            status = Status::TargetReached;
            after_bfgs
        } else {
            let (pt, stationary) = run.gradient_sampling(after_bfgs);
            status = if run.reached(pt.f) {
                Status::TargetReached
            } else if stationary {
                Status::Stationary
            } else {
                Status::MaxIterations
            };
            pt
        }
    };
    Minimum {
        p: end.x.as_slice().to_vec(),
        value: end.f,
        status,
        trace: run.trace,
        evaluations: run.evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> impl FnMut(&[f64]) -> GradientSample {
        // (x−1)ᵀ Q (x−1) with Q = diag(1, 10, 100) plus a coupling
        |p: &[f64]| {
            let d = [p[0] - 1.0, p[1] + 2.0, p[2] - 0.5];
            let q = [[1.0, 0.5, 0.0], [0.5, 10.0, 0.0], [0.0, 0.0, 100.0]];
            let qd: Vec<f64> = (0..3).map(|i| (0..3).map(|j| q[i][j] * d[j]).sum()).collect();
            GradientSample {
                value: (0..3).map(|i| d[i] * qd[i]).sum(),
                gradient: qd.iter().map(|v| 2.0 * v).collect(),
                active: crate::sensitivity::Active::None,
                differentiable: true,
            }
        }
    }

    fn abs_sum(p: &[f64]) -> GradientSample {
        GradientSample {
            value: p[0].abs() + 2.0 * p[1].abs(),
            gradient: vec![p[0].signum(), 2.0 * p[1].signum()],
            active: crate::sensitivity::Active::None,
            differentiable: p[0] != 0.0 && p[1] != 0.0,
        }
    }

    #[test]
    fn smooth_quadratic_is_solved_by_bfgs() {
        let mut obj = FnObjective::new(3, quadratic());
        let res = nonsmooth_minimize(&mut obj, &[5.0, 5.0, 5.0], &SolveOptions::default());
        assert!((res.p[0] - 1.0).abs() < 1e-8);
        assert!((res.p[1] + 2.0).abs() < 1e-8);
        assert!((res.p[2] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn weighted_l1_norm_reaches_zero() {
        for (i, start) in [[1.3, -0.7], [-2.0, 0.4], [0.01, 3.0]].iter().enumerate() {
            let opts = SolveOptions {
                seed: i as u64,
                ..SolveOptions::default()
            };
            let mut obj = FnObjective::new(2, abs_sum);
            let res = nonsmooth_minimize(&mut obj, start, &opts);
            assert!(res.value < 1e-5, "start {start:?}: {}", res.value);
        }
    }

    #[test]
    fn trace_is_monotone_and_deterministic() {
        let run = || {
            let mut obj = FnObjective::new(2, abs_sum);
            nonsmooth_minimize(&mut obj, &[1.3, -0.7], &SolveOptions::default())
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trace, b.trace);
        for w in a.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn infeasible_start_is_reported() {
        let mut obj = FnObjective::new(1, |_: &[f64]| GradientSample::constant(f64::INFINITY, 1));
        let res = nonsmooth_minimize(&mut obj, &[0.0], &SolveOptions::default());
        assert_eq!(res.status, Status::InfeasibleStart);
    }

    #[test]
    fn infinite_region_is_avoided() {
        // |x − 2| restricted to x < 1.5
        let mut obj = FnObjective::new(1, |p: &[f64]| {
            if p[0] >= 1.5 {
                GradientSample::constant(f64::INFINITY, 1)
            } else {
                GradientSample {
                    value: (p[0] - 2.0).abs(),
                    gradient: vec![-1.0],
                    active: crate::sensitivity::Active::None,
                    differentiable: true,
                }
            }
        });
        let res = nonsmooth_minimize(&mut obj, &[0.0], &SolveOptions::default());
        assert!(res.p[0] < 1.5 && res.value < 0.5 + 1e-3);
    }

    #[test]
    fn target_stops_early() {
        struct WithTarget;
        impl Objective for WithTarget {
            fn n_params(&self) -> usize {
                2
            }
            fn evaluate(&mut self, p: &[f64]) -> GradientSample {
                abs_sum(p)
            }
            fn target(&self) -> Option<f64> {
                Some(1.0)
            }
        }
        let res = nonsmooth_minimize(&mut WithTarget, &[3.0, 3.0], &SolveOptions::default());
        assert_eq!(res.status, Status::TargetReached);
        assert!(res.value < 1.0);
    }
}
