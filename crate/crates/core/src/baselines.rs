//! Comparison schemes. Each one reuses the objective and the optimizer
//! under a scheme-specific restriction of channels or variables.
//!
//! | scheme       | channels                           | variables      | solver          |
//! |--------------|------------------------------------|----------------|-----------------|
//! | `proposed`   | cooperative double IRS             | Ŵ, φ₁, φ₂      | PRGD            |
//! | `gd_irs`     | cooperative double IRS             | Ŵ, φ₁, φ₂      | Euclidean GD + projection |
//! | `aom_irs`    | cooperative double IRS             | Ŵ, φ₁, φ₂      | block-cyclic RGD |
//! | `dd_irs`     | inter-IRS link removed             | Ŵ, φ₁, φ₂      | PRGD            |
//! | `sbob_irs`   | one IRS of N₁+N₂ elements near Bob | Ŵ, φ           | PRGD            |
//! | `salice_irs` | one IRS of N₁+N₂ elements near Alice | Ŵ, φ         | PRGD            |
//! | `r_irs`      | cooperative double IRS             | Ŵ (random φ)   | PRGD on sphere  |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{generate, generate_single_irs, inject_cee, CeeConfig, SceneGeometry};
use crate::error::{Error, Result};
use crate::linalg::unit_circle_vec;
use crate::manifold::{retract_blocks, BlockMask, IteratePoint, PointShape};
use crate::objective::{ChannelSet, SecrecyProblem, SecrecyRates, SystemConfig};
use crate::optimizer::{
    backtrack, recover_partial, riemannian_gradient_masked, solve, Objective, OptimizerConfig, RunResult, StopReason,
};
use crate::seed::{derive_seed, purpose, rng_from};
use crate::{CMat, CVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Proposed,
    AomIrs,
    GdIrs,
    DdIrs,
    SbobIrs,
    SaliceIrs,
    RIrs,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 7] = [
        SchemeKind::Proposed,
        SchemeKind::AomIrs,
        SchemeKind::GdIrs,
        SchemeKind::DdIrs,
        SchemeKind::SbobIrs,
        SchemeKind::SaliceIrs,
        SchemeKind::RIrs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Proposed => "proposed",
            SchemeKind::GdIrs => "gd_irs",
            SchemeKind::AomIrs => "aom_irs",
            SchemeKind::DdIrs => "dd_irs",
            SchemeKind::SbobIrs => "sbob_irs",
            SchemeKind::SaliceIrs => "salice_irs",
            SchemeKind::RIrs => "r_irs",
        }
    }

    pub fn is_single_irs(self) -> bool {
        matches!(self, SchemeKind::SbobIrs | SchemeKind::SaliceIrs)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scheme `{s}`")))
    }
}

/// Block-coordinate schedule for `aom_irs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoSchedule {
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub outer_cycles: usize,
}

impl Default for AoSchedule {
    fn default() -> Self {
        AoSchedule { inner_iters: 50, inner_tol: 1e-4, outer_cycles: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub ao: AoSchedule,
    /// Element count of the single IRS; `None` means `N_i1 + N_i2`.
    pub n_sg: Option<usize>,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind) -> Self {
        SchemeSpec { kind, ao: AoSchedule::default(), n_sg: None }
    }
}

/// Positions used by the single-IRS schemes.
pub const NEAR_BOB: [f64; 2] = [50.0, 10.0];
pub const NEAR_ALICE: [f64; 2] = [10.0, 10.0];

/// One channel realization of the double-IRS scene and the seed it was
/// drawn from. Single-IRS scenes are drawn on demand from the same seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub geo: SceneGeometry,
    pub seed: u64,
    pub channels: ChannelSet,
}

impl Scenario {
    pub fn generate(cfg: &SystemConfig, geo: &SceneGeometry, seed: u64) -> Result<Self> {
        let channels = generate(cfg, geo, derive_seed(seed, &[purpose::CHANNEL]))?;
        Ok(Scenario { cfg: cfg.clone(), geo: geo.clone(), seed, channels })
    }
}

/// True channels and free variables of one scheme on one scenario.
#[derive(Clone, Debug)]
pub struct RestrictedProblem {
    pub kind: SchemeKind,
    pub channels: ChannelSet,
    pub blocks: BlockMask,
    /// Phases held fixed (`r_irs` only).
    pub fixed_phases: Option<(CVec, CVec)>,
}

impl RestrictedProblem {
    pub fn point_shape(&self, n_streams: usize) -> PointShape {
        let d = self.channels.dims();
        PointShape { m_tx: d.m_tx, n_streams, n_sub: d.n_sub, n_irs1: d.n_irs1, n_irs2: d.n_irs2 }
    }

    /// Random feasible start; fixed phases override the random ones.
    pub fn initial_point(&self, n_streams: usize, seed: u64) -> IteratePoint {
        let mut rng = rng_from(seed);
        let mut pt = IteratePoint::random(self.point_shape(n_streams), &mut rng);
        if let Some((p1, p2)) = &self.fixed_phases {
            pt.phi1 = p1.clone();
            pt.phi2 = p2.clone();
        }
        pt
    }
}

/// Builds the channels and variable mask a scheme optimizes over.
pub fn restricted_problem(scn: &Scenario, spec: &SchemeSpec) -> Result<RestrictedProblem> {
    let n_sg = spec.n_sg.unwrap_or(scn.cfg.n_irs1 + scn.cfg.n_irs2);
    let (channels, blocks, fixed_phases) = match spec.kind {
        SchemeKind::Proposed | SchemeKind::GdIrs | SchemeKind::AomIrs => {
            (scn.channels.clone(), BlockMask::ALL, None)
        }
        SchemeKind::DdIrs => (scn.channels.without_cascade(), BlockMask::ALL, None),
        SchemeKind::SbobIrs | SchemeKind::SaliceIrs => {
            let (pos, tag) = if spec.kind == SchemeKind::SbobIrs {
                (NEAR_BOB, purpose::SINGLE_IRS_NEAR_BOB)
            } else {
                (NEAR_ALICE, purpose::SINGLE_IRS_NEAR_ALICE)
            };
            let ch = generate_single_irs(&scn.cfg, &scn.geo, pos, n_sg, derive_seed(scn.seed, &[tag]))?;
            (ch, BlockMask { w: true, phi1: true, phi2: false }, None)
        }
        SchemeKind::RIrs => {
            let mut rng = rng_from(derive_seed(scn.seed, &[purpose::RANDOM_PHASES]));
            let p1 = unit_circle_vec(scn.cfg.n_irs1, &mut rng);
            let p2 = unit_circle_vec(scn.cfg.n_irs2, &mut rng);
            (scn.channels.clone(), BlockMask::W_ONLY, Some((p1, p2)))
        }
    };
    Ok(RestrictedProblem { kind: spec.kind, channels, blocks, fixed_phases })
}

/// Euclidean gradient descent on the raw variables, each step followed by
/// projection onto the constraint set. The step size is backtracked on the
/// unprojected objective; monotonicity of the projected iterates is not
/// guaranteed. Stops on the Riemannian gradient norm like PRGD.
pub fn gd_irs_solve<O: Objective + ?Sized>(problem: &O, init: &IteratePoint, cfg: &OptimizerConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mask = cfg.blocks;
    let mut pt = init.clone();
    let mut value = problem.value(&pt)?;
    let mut objective_trace = Vec::new();
    let mut grad_norm_trace = Vec::new();
    let mut step_trace = Vec::new();

    let stop = loop {
        let grad_norm = riemannian_gradient_masked(problem, &pt, mask)?.norm();
        objective_trace.push(value);
        grad_norm_trace.push(grad_norm);
        if grad_norm <= cfg.grad_tol {
            break StopReason::Converged;
        }
        if step_trace.len() >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        let egrad = problem.gradient(&pt)?.masked(mask);
        let step = backtrack(value, egrad.norm_sq(), cfg, |alpha| {
            let raw = pt.offset(&egrad, -alpha)?;
            let ambient = problem.value(&raw)?;
            let next = retract_blocks(&raw, &pt, mask)?;
            let f = problem.value(&next)?;
            Ok((ambient, next, f))
        });
        match step {
            Ok(step) => {
                step_trace.push(step.alpha);
                pt = step.point;
                value = step.value;
            }
            Err(Error::LineSearch { .. }) => break StopReason::LineSearchFailed,
            Err(e) => return Err(e),
        }
    };
    Ok(RunResult {
        iterations_used: step_trace.len(),
        final_grad_norm: *grad_norm_trace.last().expect("one gradient evaluated"),
        objective_trace,
        grad_norm_trace,
        step_trace,
        final_point: pt,
        converged: stop == StopReason::Converged,
        stop,
    })
}

/// Alternating optimization: cyclic RGD over the Ŵ, φ₁ and φ₂ blocks.
///
/// `objective_trace` and `step_trace` concatenate the inner iterations;
/// `grad_norm_trace` holds the joint Riemannian gradient norm at the start
/// of every cycle and at the end.
pub fn aom_irs_solve<O: Objective + ?Sized>(
    problem: &O,
    init: &IteratePoint,
    cfg: &OptimizerConfig,
    schedule: &AoSchedule,
) -> Result<RunResult> {
    cfg.validate()?;
    let mask = cfg.blocks;
    let block_masks: Vec<BlockMask> = [
        (mask.w, BlockMask::W_ONLY),
        (mask.phi1, BlockMask::PHI1_ONLY),
        (mask.phi2, BlockMask::PHI2_ONLY),
    ]
    .into_iter()
    .filter_map(|(on, m)| on.then_some(m))
    .collect();

    let mut pt = init.clone();
    let mut objective_trace = vec![problem.value(&pt)?];
    let mut grad_norm_trace = Vec::new();
    let mut step_trace = Vec::new();

    let mut stop = StopReason::MaxIters;
    for _ in 0..schedule.outer_cycles {
        let joint = riemannian_gradient_masked(problem, &pt, mask)?.norm();
        grad_norm_trace.push(joint);
        if joint <= cfg.grad_tol {
            stop = StopReason::Converged;
            break;
        }
        let before = step_trace.len();
        for &block in &block_masks {
            let inner = OptimizerConfig {
                max_iters: schedule.inner_iters,
                grad_tol: schedule.inner_tol,
                blocks: block,
                ..cfg.clone()
            };
            let res = recover_partial(solve(problem, &pt, &inner))?;
            objective_trace.extend_from_slice(&res.objective_trace[1..]);
            step_trace.extend_from_slice(&res.step_trace);
            pt = res.final_point;
        }
        if step_trace.len() == before {
            // No block could move although the joint gradient is above tolerance.
            stop = StopReason::LineSearchFailed;
            break;
        }
    }
    let final_grad_norm = riemannian_gradient_masked(problem, &pt, mask)?.norm();
    if stop == StopReason::MaxIters && final_grad_norm <= cfg.grad_tol {
        stop = StopReason::Converged;
    }
    grad_norm_trace.push(final_grad_norm);
    Ok(RunResult {
        iterations_used: step_trace.len(),
        objective_trace,
        grad_norm_trace,
        step_trace,
        final_point: pt,
        converged: stop == StopReason::Converged,
        stop,
        final_grad_norm,
    })
}

/// Dispatches to the solver a scheme uses. Line-search failures return the
/// partial result.
pub fn solve_scheme<O: Objective + ?Sized>(
    kind: SchemeKind,
    problem: &O,
    init: &IteratePoint,
    cfg: &OptimizerConfig,
    ao: &AoSchedule,
) -> Result<RunResult> {
    match kind {
        SchemeKind::GdIrs => gd_irs_solve(problem, init, cfg),
        SchemeKind::AomIrs => aom_irs_solve(problem, init, cfg, ao),
        _ => recover_partial(solve(problem, init, cfg)),
    }
}

/// Result of running one scheme on one scenario.
#[derive(Clone, Debug)]
pub struct SchemeOutcome {
    pub run: RunResult,
    /// Rates of the final point on the true channels.
    pub rates: SecrecyRates,
    /// De-normalized precoders `√P·Ŵ`.
    pub precoders: Vec<CMat>,
}

impl SchemeOutcome {
    /// `Σ_k ‖W_k‖_F²` of the de-normalized precoders.
    pub fn total_power(&self) -> f64 {
        self.precoders.iter().map(|w| w.norm_squared()).sum()
    }
}

/// Restricts, optionally corrupts the channels the solver sees, solves, and
/// scores the final point on the true (restricted) channels.
pub fn run_scheme(
    scn: &Scenario,
    spec: &SchemeSpec,
    cee: Option<CeeConfig>,
    opt: &OptimizerConfig,
) -> Result<SchemeOutcome> {
    let restricted = restricted_problem(scn, spec)?;
    let truth = SecrecyProblem::new(restricted.channels.clone(), &scn.cfg)?;
    let estimate = match cee {
        Some(c) if c.delta > 0.0 => {
            let est = inject_cee(&restricted.channels, c, derive_seed(scn.seed, &[purpose::CEE]))?;
            SecrecyProblem::new(est, &scn.cfg)?
        }
        _ => truth.clone(),
    };
    let init = restricted.initial_point(scn.cfg.n_streams, derive_seed(scn.seed, &[purpose::INIT]));
    let cfg = OptimizerConfig { blocks: restricted.blocks, ..opt.clone() };
    let run = solve_scheme(spec.kind, &estimate, &init, &cfg, &spec.ao)?;
    let rates = truth.secrecy_rates_at(&run.final_point)?;
    let precoders = truth.physical_precoders(&run.final_point);
    Ok(SchemeOutcome { run, rates, precoders })
}
