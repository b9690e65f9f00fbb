//! Product Riemannian gradient descent with Armijo backtracking.
//!
//! Each iteration projects the Euclidean gradient onto the tangent space,
//! backtracks `α = α₀·βʲ` until
//! `f(R(x − α g)) − f(x) ≤ −½ α ‖g‖²`, and moves to the retracted point.
//! Accepted steps therefore certify a decrease of at least `(α/2)‖g‖²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{project_to_tangent, retract_blocks, BlockMask, IteratePoint, TangentVector};

/// A smooth function on the product manifold, evaluated in its ambient
/// coordinates.
pub trait Objective {
    fn value(&self, pt: &IteratePoint) -> Result<f64>;

    /// Euclidean gradient in the `2 ∂f/∂X*` convention.
    fn gradient(&self, pt: &IteratePoint) -> Result<TangentVector>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm is at most this.
    pub grad_tol: f64,
    pub armijo_init: f64,
    pub armijo_shrink: f64,
    pub armijo_max_backtracks: usize,
    /// Seed for randomized initialization.
    pub seed: u64,
    /// Components allowed to move; the rest stay bit-for-bit fixed.
    #[serde(skip)]
    pub blocks: BlockMask,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 500,
            grad_tol: 1e-4,
            armijo_init: 1.0,
            armijo_shrink: 0.5,
            armijo_max_backtracks: 50,
            seed: 0,
            blocks: BlockMask::ALL,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "armijo_shrink must lie in (0, 1), got {}",
                self.armijo_shrink
            )));
        }
        if !(self.armijo_init > 0.0 && self.armijo_init.is_finite()) {
            return Err(Error::InvalidConfig(format!("armijo_init must be positive, got {}", self.armijo_init)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be non-negative, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Objective at every visited point, starting with the initial one.
    pub objective_trace: Vec<f64>,
    /// Riemannian gradient norm at every visited point.
    pub grad_norm_trace: Vec<f64>,
    /// Accepted step sizes, one per iteration.
    pub step_trace: Vec<f64>,
    pub final_point: IteratePoint,
    pub iterations_used: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Riemannian gradient norm (over the moving blocks) at `final_point`.
    pub final_grad_norm: f64,
}

impl RunResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial point")
    }
}

/// State handed to an observer once per visited point.
pub struct IterationEvent<'a> {
    pub iteration: usize,
    pub point: &'a IteratePoint,
    pub value: f64,
    pub riemannian_gradient: &'a TangentVector,
    pub grad_norm: f64,
}

/// Accepted Armijo step.
#[derive(Clone, Debug)]
pub struct ArmijoStep {
    pub alpha: f64,
    pub point: IteratePoint,
    pub value: f64,
    pub backtracks: usize,
}

/// Projection of the Euclidean gradient onto the tangent space at `pt`.
pub fn riemannian_gradient<O: Objective + ?Sized>(problem: &O, pt: &IteratePoint) -> Result<TangentVector> {
    riemannian_gradient_masked(problem, pt, BlockMask::ALL)
}

/// [`riemannian_gradient`] with the fixed blocks zeroed.
pub fn riemannian_gradient_masked<O: Objective + ?Sized>(
    problem: &O,
    pt: &IteratePoint,
    mask: BlockMask,
) -> Result<TangentVector> {
    let egrad = problem.gradient(pt)?;
    Ok(project_to_tangent(pt, &egrad)?.masked(mask))
}

/// Generic backtracking over `α = α₀·βʲ`. `trial(α)` returns the value
/// tested against `f0 − ½ α slope_sq`, the point to keep, and that point's
/// objective.
pub(crate) fn backtrack<F>(f0: f64, slope_sq: f64, cfg: &OptimizerConfig, mut trial: F) -> Result<ArmijoStep>
where
    F: FnMut(f64) -> Result<(f64, IteratePoint, f64)>,
{
    let mut history = Vec::with_capacity(8);
    let mut alpha = cfg.armijo_init;
    for j in 0..=cfg.armijo_max_backtracks {
        match trial(alpha) {
            Ok((tested, point, value)) => {
                history.push((alpha, tested));
                if tested.is_finite() && tested - f0 <= -0.5 * alpha * slope_sq {
                    return Ok(ArmijoStep { alpha, point, value, backtracks: j });
                }
            }
            // Numerically invalid trial points count as rejections.
            Err(Error::Numeric(_)) | Err(Error::DegenerateRetraction(_)) => history.push((alpha, f64::NAN)),
            Err(e) => return Err(e),
        }
        alpha *= cfg.armijo_shrink;
    }
    Err(Error::LineSearch { trials: history, partial: None })
}

/// Largest `α` in `{α₀ βʲ}` whose retracted trial point satisfies the
/// sufficient-decrease test.
pub fn armijo_search<O: Objective + ?Sized>(
    problem: &O,
    pt: &IteratePoint,
    value: f64,
    grad: &TangentVector,
    cfg: &OptimizerConfig,
) -> Result<ArmijoStep> {
    let gsq = grad.norm_sq();
    backtrack(value, gsq, cfg, |alpha| {
        let next = retract_blocks(&pt.offset(grad, -alpha)?, pt, cfg.blocks)?;
        let f = problem.value(&next)?;
        Ok((f, next, f))
    })
}

/// Runs PRGD from `init` until the gradient tolerance or the iteration cap.
pub fn solve<O: Objective + ?Sized>(problem: &O, init: &IteratePoint, cfg: &OptimizerConfig) -> Result<RunResult> {
    solve_observed(problem, init, cfg, |_| {})
}

/// [`solve`] with a callback invoked at every visited point.
pub fn solve_observed<O, F>(problem: &O, init: &IteratePoint, cfg: &OptimizerConfig, mut observer: F) -> Result<RunResult>
where
    O: Objective + ?Sized,
    F: FnMut(&IterationEvent<'_>),
{
    cfg.validate()?;
    let residual = init.constraint_residual();
    if residual > 1e-10 {
        return Err(Error::InvalidConfig(format!("initial point is off the manifold by {residual:e}")));
    }

    let mut pt = init.clone();
    let mut value = problem.value(&pt)?;
    let mut objective_trace = Vec::new();
    let mut grad_norm_trace = Vec::new();
    let mut step_trace = Vec::new();

    let finish = |pt: IteratePoint, obj: Vec<f64>, gn: Vec<f64>, steps: Vec<f64>, stop: StopReason| {
        let final_grad_norm = *gn.last().expect("at least one gradient evaluated");
        RunResult {
            iterations_used: steps.len(),
            objective_trace: obj,
            grad_norm_trace: gn,
            step_trace: steps,
            final_point: pt,
            converged: stop == StopReason::Converged,
            stop,
            final_grad_norm,
        }
    };

    loop {
        let grad = riemannian_gradient_masked(problem, &pt, cfg.blocks)?;
        let grad_norm = grad.norm();
        objective_trace.push(value);
        grad_norm_trace.push(grad_norm);
        observer(&IterationEvent {
            iteration: step_trace.len(),
            point: &pt,
            value,
            riemannian_gradient: &grad,
            grad_norm,
        });

        if grad_norm <= cfg.grad_tol {
            return Ok(finish(pt, objective_trace, grad_norm_trace, step_trace, StopReason::Converged));
        }
        if step_trace.len() >= cfg.max_iters {
            return Ok(finish(pt, objective_trace, grad_norm_trace, step_trace, StopReason::MaxIters));
        }
        match armijo_search(problem, &pt, value, &grad, cfg) {
            Ok(step) => {
                step_trace.push(step.alpha);
                pt = step.point;
                value = step.value;
            }
            Err(Error::LineSearch { trials, .. }) => {
                let partial = finish(pt, objective_trace, grad_norm_trace, step_trace, StopReason::LineSearchFailed);
                return Err(Error::LineSearch { trials, partial: Some(Box::new(partial)) });
            }
            Err(e) => return Err(e),
        }
    }
}

/// Unwraps a line-search failure into its partial result; other errors pass
/// through.
pub fn recover_partial(res: Result<RunResult>) -> Result<RunResult> {
    match res {
        Err(Error::LineSearch { partial: Some(p), .. }) => Ok(*p),
        other => other,
    }
}
