//! Limited-memory quasi-Newton minimization of the mesh cost with a
//! log-barrier continuation schedule.

use std::collections::VecDeque;
use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::mesh::SubdividedMesh;
use crate::metric::MetricField;
use crate::objective::{BarrierParams, CostBreakdown, Objective, TargetSpec};
use crate::sparse::ProfileCholesky;
use crate::{Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationCriteria {
    /// Stop when `|E_k - E_{k+1}| / E_k` falls below this.
    pub rel_cost_decrease_tol: f64,
    /// Stop when the largest gradient component falls below this.
    pub grad_maxnorm_tol: f64,
    /// Stop when `|dx| < tol * (|x| + tol)`.
    pub step_norm_tol: f64,
    pub max_iters: usize,
}

impl Default for TerminationCriteria {
    fn default() -> Self {
        Self {
            rel_cost_decrease_tol: 1e-6,
            grad_maxnorm_tol: 1e-10,
            step_norm_tol: 1e-8,
            max_iters: 5000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsParams {
    pub history: usize,
    pub line_search: LineSearch,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant of the Wolfe search.
    pub c2: f64,
    /// Cost evaluations allowed per line search.
    pub max_backtracks: usize,
    pub preconditioner: Preconditioner,
    /// Iterations between preconditioner rebuilds; 0 keeps the first one.
    pub refresh_every: usize,
    /// Diagonal shift of the preconditioner relative to its mean diagonal.
    pub regularization: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Scalar initial Hessian from the latest curvature pair.
    None,
    /// Sparse Gauss-Newton approximation of the cost Hessian.
    #[default]
    GaussNewton,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearch {
    /// Backtracking by halving until sufficient decrease.
    Armijo,
    /// Bracketing and zoom until the strong Wolfe conditions hold.
    #[default]
    Wolfe,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            history: 10,
            line_search: LineSearch::default(),
            c1: 1e-4,
            c2: 0.9,
            preconditioner: Preconditioner::default(),
            refresh_every: 10,
            regularization: 1e-8,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GradientTolerance,
    FunctionTolerance,
    ParameterTolerance,
    MaxIterations,
    LineSearchFailure,
    /// The starting point already violates the barrier.
    Infeasible,
}

impl TerminationReason {
    pub fn is_failure(self) -> bool {
        matches!(
            self,
            TerminationReason::LineSearchFailure | TerminationReason::Infeasible
        )
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminationReason::GradientTolerance => "gradient_tolerance",
            TerminationReason::FunctionTolerance => "function_tolerance",
            TerminationReason::ParameterTolerance => "parameter_tolerance",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::LineSearchFailure => "line_search_failure",
            TerminationReason::Infeasible => "infeasible",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub epsilon: f64,
    pub iterations: usize,
    pub e_initial: f64,
    pub e_final: f64,
    pub reason: TerminationReason,
    pub min_area_ratio: f64,
    pub grad_max_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub stages: Vec<StageStats>,
    #[serde(default)]
    pub wall_time_s: f64,
}

impl RunStats {
    pub fn e_initial(&self) -> f64 {
        self.stages.first().map_or(f64::NAN, |s| s.e_initial)
    }

    pub fn e_final(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.e_final)
    }

    pub fn failed(&self) -> bool {
        self.stages.iter().any(|s| s.reason.is_failure())
    }
}

/// Continuation schedule: one stage at `epsilon = 0`, then `moves` barrier updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSchedule {
    pub moves: usize,
    pub factor: f64,
    pub cap: f64,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            moves: 5,
            factor: 0.99,
            cap: 0.99,
        }
    }
}

impl ContinuationSchedule {
    pub fn n_stages(&self) -> usize {
        self.moves + 1
    }

    /// `min(cap, factor * min_ratio)`, never below the current epsilon.
    pub fn next_epsilon(&self, current: f64, min_ratio: f64) -> f64 {
        let proposed = (self.factor * min_ratio).min(self.cap);
        if proposed.is_finite() {
            proposed.max(current)
        } else {
            current
        }
    }
}

fn dot(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.dot(v)).sum()
}

fn norm(a: &[Point]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[Point], y: &mut [Point]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct History {
    pairs: VecDeque<(Vec<Point>, Vec<Point>, f64)>,
    capacity: usize,
}

impl History {
    fn push(&mut self, s: Vec<Point>, y: Vec<Point>) {
        let sy = dot(&s, &y);
        if !(sy > 1e-16 * norm(&s) * norm(&y)) {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: `-H g`, seeded with the preconditioner's inverse
    /// when present and the usual scalar scaling otherwise.
    fn direction(&self, g: &[Point], precond: Option<&ProfileCholesky>) -> Vec<Point> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some(p) = precond {
            q = apply_inverse(p, &q);
        } else if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

fn apply_inverse(p: &ProfileCholesky, v: &[Point]) -> Vec<Point> {
    let flat: Vec<f64> = v.iter().flat_map(|q| [q.x, q.y]).collect();
    p.solve(&flat)
        .chunks(2)
        .map(|c| Point::new(c[0], c[1]))
        .collect()
}

fn build_preconditioner(
    objective: &Objective<'_>,
    x: &[Point],
    params: &LbfgsParams,
) -> Option<ProfileCholesky> {
    if params.preconditioner != Preconditioner::GaussNewton {
        return None;
    }
    let h = objective.gauss_newton(x, params.regularization).ok()?;
    ProfileCholesky::factor(&h).ok()
}

/// Runs one L-BFGS minimization of `objective` from `x`, updating `x` in place.
pub fn minimize_stage(
    objective: &Objective<'_>,
    x: &mut Vec<Point>,
    criteria: &TerminationCriteria,
    params: &LbfgsParams,
) -> StageStats {
    let epsilon = objective.barrier.epsilon;
    let (mut cost, mut g) = match objective.cost_and_gradient(x) {
        Ok(v) => v,
        Err(_) => {
            let c = objective.cost(x);
            return StageStats {
                epsilon,
                iterations: 0,
                e_initial: c.total,
                e_final: c.total,
                reason: TerminationReason::Infeasible,
                min_area_ratio: c.min_area_ratio,
                grad_max_norm: f64::NAN,
            };
        }
    };
    let e_initial = cost.total;
    let mut history = History {
        pairs: VecDeque::new(),
        capacity: params.history,
    };
    let mut iterations = 0;
    let mut precond = build_preconditioner(objective, x, params);
    // A stall right after a restart is taken as convergence.
    let mut restarted = false;
    let reason = loop {
        let gmax = cost.grad_max_norm.unwrap_or(f64::INFINITY);
        if gmax <= criteria.grad_maxnorm_tol {
            break TerminationReason::GradientTolerance;
        }
        if iterations >= criteria.max_iters {
            break TerminationReason::MaxIterations;
        }
        let Some(Accepted {
            step,
            cost: new_cost,
            grad: g_new,
        }) = line_search(
            objective,
            x,
            &g,
            &cost,
            &mut history,
            precond.as_ref(),
            params,
        )
        else {
            break TerminationReason::LineSearchFailure;
        };
        let mut x_new = x.clone();
        axpy(1.0, &step, &mut x_new);
        iterations += 1;
        let y: Vec<Point> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step_norm = norm(&step);
        let x_norm = norm(x);
        let rel_decrease = (cost.total - new_cost.total) / cost.total;
        history.push(step, y);
        *x = x_new;
        g = g_new;
        if params.refresh_every > 0 && iterations % params.refresh_every == 0 && precond.is_some() {
            precond = build_preconditioner(objective, x, params);
        }
        let prev = cost.total;
        cost = new_cost;
        if iterations % 100 == 0 {
            debug!(
                "iter {iterations:5}  E = {:.6e}  |grad|_inf = {:.3e}  eps = {epsilon:.4}",
                cost.total,
                cost.grad_max_norm.unwrap_or(f64::NAN)
            );
        }
        if cost.grad_max_norm.unwrap_or(f64::INFINITY) <= criteria.grad_maxnorm_tol {
            break TerminationReason::GradientTolerance;
        }
        let stalled_cost = prev > 0.0 && rel_decrease.abs() < criteria.rel_cost_decrease_tol;
        let stalled_step = step_norm < criteria.step_norm_tol * (x_norm + criteria.step_norm_tol);
        if stalled_cost || stalled_step {
            if restarted || history.pairs.is_empty() {
                break if stalled_cost {
                    TerminationReason::FunctionTolerance
                } else {
                    TerminationReason::ParameterTolerance
                };
            }
            // The curvature pairs or the preconditioner may be stale.
            history.pairs.clear();
            if precond.is_some() {
                precond = build_preconditioner(objective, x, params);
            }
            restarted = true;
        } else {
            restarted = false;
        }
    };
    info!(
        "stage eps = {epsilon:.4}: {iterations} iterations, E {e_initial:.4e} -> {:.4e} ({reason})",
        cost.total
    );
    StageStats {
        epsilon,
        iterations,
        e_initial,
        e_final: cost.total,
        reason,
        min_area_ratio: cost.min_area_ratio,
        grad_max_norm: cost.grad_max_norm.unwrap_or(f64::NAN),
    }
}

/// Accepted line-search step with the cost and gradient at its end point.
struct Accepted {
    step: Vec<Point>,
    cost: CostBreakdown,
    grad: Vec<Point>,
}

/// Search direction: quasi-Newton when history exists and it descends,
/// steepest descent otherwise. Constrained components are zeroed.
fn search_direction(
    objective: &Objective<'_>,
    g: &[Point],
    history: &mut History,
    precond: Option<&ProfileCholesky>,
    steepest: bool,
) -> (Vec<Point>, f64) {
    let mut d: Vec<Point> = if steepest {
        g.iter().map(|v| -v).collect()
    } else {
        history.direction(g, precond)
    };
    for (di, c) in d.iter_mut().zip(&objective.mesh.constraints) {
        c.project(di);
    }
    let slope = dot(g, &d);
    if slope < 0.0 {
        return (d, slope);
    }
    history.pairs.clear();
    let d: Vec<Point> = g.iter().map(|v| -v).collect();
    let slope = dot(g, &d);
    (d, slope)
}

fn initial_step(history: &History, d: &[Point], preconditioned: bool) -> f64 {
    if history.pairs.is_empty() && !preconditioned {
        // Unscaled steepest descent: start from a unit-length step.
        1.0 / norm(d)
    } else {
        1.0
    }
}

/// Tries the quasi-Newton direction, then steepest descent once.
fn line_search(
    objective: &Objective<'_>,
    x: &[Point],
    g: &[Point],
    cost: &CostBreakdown,
    history: &mut History,
    precond: Option<&ProfileCholesky>,
    params: &LbfgsParams,
) -> Option<Accepted> {
    for attempt in 0..2 {
        let steepest = attempt == 1;
        let (d, slope) = search_direction(objective, g, history, precond, steepest);
        let alpha = initial_step(history, &d, precond.is_some() && !steepest);
        let found = match params.line_search {
            LineSearch::Armijo => armijo(objective, x, &d, slope, alpha, cost, params),
            LineSearch::Wolfe => wolfe(objective, x, &d, slope, alpha, cost, params),
        };
        if found.is_some() {
            return found;
        }
        history.pairs.clear();
    }
    None
}

fn trial_point(x: &[Point], d: &[Point], alpha: f64) -> Vec<Point> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

fn accept(objective: &Objective<'_>, x: &[Point], d: &[Point], alpha: f64) -> Option<Accepted> {
    let (cost, grad) = objective
        .cost_and_gradient(&trial_point(x, d, alpha))
        .ok()?;
    Some(Accepted {
        step: d.iter().map(|v| alpha * v).collect(),
        cost,
        grad,
    })
}

/// Backtracking with halving until sufficient decrease; non-finite trial
/// costs count as rejections.
fn armijo(
    objective: &Objective<'_>,
    x: &[Point],
    d: &[Point],
    slope: f64,
    mut alpha: f64,
    cost: &CostBreakdown,
    params: &LbfgsParams,
) -> Option<Accepted> {
    for _ in 0..=params.max_backtracks {
        let c = objective.cost(&trial_point(x, d, alpha)).total;
        if c.is_finite() && c <= cost.total + params.c1 * alpha * slope {
            return accept(objective, x, d, alpha);
        }
        alpha *= 0.5;
    }
    None
}

/// One-dimensional sample of the cost along the search direction.
#[derive(Clone, Copy)]
struct Sample {
    alpha: f64,
    phi: f64,
    dphi: f64,
}

/// Strong Wolfe search by bracketing and zooming with safeguarded quadratic
/// interpolation. Points where the cost is not finite shrink the bracket.
fn wolfe(
    objective: &Objective<'_>,
    x: &[Point],
    d: &[Point],
    slope: f64,
    alpha: f64,
    cost: &CostBreakdown,
    params: &LbfgsParams,
) -> Option<Accepted> {
    let phi0 = cost.total;
    let sufficient = |s: &Sample| s.phi <= phi0 + params.c1 * s.alpha * slope;
    let curvature = |s: &Sample| s.dphi.abs() <= -params.c2 * slope;
    let mut evals = 0;
    let sample = |alpha: f64, evals: &mut usize| -> Option<(Sample, Accepted)> {
        *evals += 1;
        let a = accept(objective, x, d, alpha)?;
        let s = Sample {
            alpha,
            phi: a.cost.total,
            dphi: dot(&a.grad, d),
        };
        Some((s, a))
    };

    let zero = Sample {
        alpha: 0.0,
        phi: phi0,
        dphi: slope,
    };
    let mut prev = zero;
    let mut best: Option<Accepted> = None;
    let mut alpha = alpha;
    let (mut lo, mut hi);
    loop {
        if evals > params.max_backtracks {
            return best;
        }
        match sample(alpha, &mut evals) {
            None => {
                lo = prev;
                hi = Sample {
                    alpha,
                    phi: f64::INFINITY,
                    dphi: f64::NAN,
                };
                break;
            }
            Some((s, a)) => {
                if !sufficient(&s) || (prev.alpha > 0.0 && s.phi >= prev.phi) {
                    lo = prev;
                    hi = s;
                    break;
                }
                if curvature(&s) {
                    return Some(a);
                }
                best = Some(a);
                if s.dphi >= 0.0 {
                    lo = s;
                    hi = prev;
                    break;
                }
                prev = s;
                alpha *= 2.0;
            }
        }
    }

    // Zoom: `lo` satisfies sufficient decrease and has the lowest cost seen.
    loop {
        if evals > params.max_backtracks {
            return best;
        }
        let width = hi.alpha - lo.alpha;
        let mut trial = lo.alpha + 0.5 * width;
        if hi.phi.is_finite() {
            let denom = 2.0 * (hi.phi - lo.phi - lo.dphi * width);
            if denom > 0.0 {
                trial = lo.alpha - lo.dphi * width * width / denom;
            }
        }
        let (a_min, a_max) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let guard = 0.1 * (a_max - a_min);
        let trial = trial.clamp(a_min + guard, a_max - guard);
        if !(guard > 0.0) || guard < 1e-16 * a_max {
            return best;
        }
        match sample(trial, &mut evals) {
            None => {
                hi = Sample {
                    alpha: trial,
                    phi: f64::INFINITY,
                    dphi: f64::NAN,
                };
            }
            Some((s, a)) => {
                if !sufficient(&s) || s.phi >= lo.phi {
                    hi = s;
                } else {
                    if curvature(&s) {
                        return Some(a);
                    }
                    best = Some(a);
                    if s.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                        hi = lo;
                    }
                    lo = s;
                }
            }
        }
    }
}

/// Runs the full continuation schedule on `mesh` in place.
/// Seconds since the call; always zero on targets without a clock.
#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> f64 {
    || 0.0
}

pub fn continuation_run(
    mesh: &mut SubdividedMesh,
    field: &MetricField,
    targets: TargetSpec,
    criteria: &TerminationCriteria,
    params: &LbfgsParams,
    schedule: &ContinuationSchedule,
) -> Result<RunStats> {
    let elapsed = stopwatch();
    let mut stats = RunStats::default();
    let mut epsilon = 0.0;
    let mut x = mesh.vertices.clone();
    for stage in 0..schedule.n_stages() {
        let barrier = BarrierParams::new(epsilon)?;
        let st = {
            let objective = Objective::new(mesh, field, targets, barrier);
            minimize_stage(&objective, &mut x, criteria, params)
        };
        mesh.vertices.clone_from(&x);
        let min_ratio = st.min_area_ratio;
        stats.stages.push(st);
        if stage + 1 < schedule.n_stages() {
            epsilon = schedule.next_epsilon(epsilon, min_ratio);
        }
    }
    stats.wall_time_s = elapsed();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MacroMesh, Tiling};
    use crate::metric::Rect;

    #[test]
    fn epsilon_updates() {
        let s = ContinuationSchedule::default();
        assert!((s.next_epsilon(0.0, 0.7) - 0.693).abs() < 1e-15);
        assert_eq!(s.next_epsilon(0.0, 1.3), 0.99);
        assert_eq!(s.next_epsilon(0.5, 0.501), 0.5);
        assert_eq!(s.n_stages(), 6);
    }

    #[test]
    fn exact_minimum_stops_immediately() {
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 2.0, 0.0, 2.0), 2, 2).unwrap();
        let mut s = crate::mesh::SubdividedMesh::subdivide(&m, 1).unwrap();
        s.classify_edges(Tiling::Right);
        let field = MetricField::identity();
        let t = TargetSpec::new(Tiling::Right, 1);
        let obj = Objective::new(&s, &field, t, BarrierParams::new(0.0).unwrap());
        let mut x = s.vertices.clone();
        let st = minimize_stage(
            &obj,
            &mut x,
            &TerminationCriteria::default(),
            &LbfgsParams::default(),
        );
        assert_eq!(st.iterations, 0);
        assert_eq!(st.reason, TerminationReason::GradientTolerance);
        assert_eq!(st.e_final, 0.0);
    }

    #[test]
    fn stage_decreases_cost_and_stays_feasible() {
        let m = MacroMesh::uniform_grid(Rect::new(-0.5, 0.5, 0.0, 1.0), 1, 1).unwrap();
        let mut s = crate::mesh::SubdividedMesh::subdivide(&m, 4).unwrap();
        s.classify_edges(Tiling::Equilateral);
        let field = MetricField::catalog("s2").unwrap();
        let t = TargetSpec::new(Tiling::Equilateral, 4);
        let crit = TerminationCriteria {
            max_iters: 50,
            ..Default::default()
        };
        let stats = continuation_run(
            &mut s,
            &field,
            t,
            &crit,
            &LbfgsParams::default(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(stats.stages.len(), 6);
        for st in &stats.stages {
            assert!(st.e_final <= st.e_initial);
            assert!(st.e_final.is_finite());
            assert!(st.min_area_ratio > st.epsilon);
        }
        let eps: Vec<f64> = stats.stages.iter().map(|s| s.epsilon).collect();
        assert!(eps.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(eps[0], 0.0);
    }

    fn s1_problem(n: usize) -> (crate::mesh::SubdividedMesh, MetricField, TargetSpec) {
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 2.0, 0.0, 2.0), 2, 2).unwrap();
        let mut s = crate::mesh::SubdividedMesh::subdivide(&m, n).unwrap();
        s.classify_edges(Tiling::Equilateral);
        (
            s,
            MetricField::catalog("s1").unwrap(),
            TargetSpec::new(Tiling::Equilateral, n),
        )
    }

    #[test]
    fn every_line_search_and_preconditioner_pairing_descends() {
        for line_search in [LineSearch::Armijo, LineSearch::Wolfe] {
            for preconditioner in [Preconditioner::None, Preconditioner::GaussNewton] {
                let (s, field, t) = s1_problem(3);
                let obj = Objective::new(&s, &field, t, BarrierParams::new(0.0).unwrap());
                let params = LbfgsParams {
                    line_search,
                    preconditioner,
                    ..Default::default()
                };
                let crit = TerminationCriteria {
                    max_iters: 200,
                    ..Default::default()
                };
                let mut x = s.vertices.clone();
                let st = minimize_stage(&obj, &mut x, &crit, &params);
                assert!(
                    !st.reason.is_failure(),
                    "{line_search:?} {preconditioner:?}: {}",
                    st.reason
                );
                assert!(
                    st.e_final < 1e-2 * st.e_initial,
                    "{line_search:?} {preconditioner:?}"
                );
                assert_eq!(obj.cost(&x).total, st.e_final);
            }
        }
    }

    #[test]
    fn preconditioned_run_reaches_exact_unit_mesh() {
        let (mut s, field, t) = s1_problem(4);
        let stats = continuation_run(
            &mut s,
            &field,
            t,
            &TerminationCriteria::default(),
            &LbfgsParams::default(),
            &Default::default(),
        )
        .unwrap();
        assert!(stats.e_final() < 1e-12, "{}", stats.e_final());
    }
}
