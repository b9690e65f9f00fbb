//! Seeded Monte-Carlo sweeps over one system parameter.
//!
//! A sweep is a grid of `(axis value, realization, scheme)` work items.
//! Every realization seed is derived from the master seed, the axis index
//! and the realization index, so all schemes of one realization see the
//! same channels and the same random start, and rows never depend on
//! execution order or on which other schemes are enabled. Rows are sorted
//! before they are written, which makes the CSV byte-identical across runs
//! and thread counts (with timing disabled).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, AoSchedule, Scenario, SchemeKind, SchemeSpec};
use crate::channel::{CeeConfig, SceneGeometry};
use crate::error::{Error, Result};
use crate::objective::SystemConfig;
use crate::optimizer::OptimizerConfig;
use crate::seed::{derive_seed, hash_str, purpose};
use crate::stats::{bootstrap_mean_ci, mean, std_err};

/// First line of every results file.
pub const RESULTS_HEADER: &str = "# prgd-results v1";
/// First line of every convergence-trace file.
pub const TRACE_HEADER: &str = "# prgd-trace v1";
/// Result columns, in order.
pub const RESULT_COLUMNS: [&str; 9] = ["scheme", "axis", "value", "realization", "seed", "ssr_bits", "iters", "grad_norm", "wall_ms"];
pub const TRACE_COLUMNS: [&str; 7] = ["scheme", "value", "realization", "iteration", "objective", "ssr_bits", "grad_norm"];

/// Bootstrap settings used by [`summarize`].
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_LEVEL: f64 = 0.95;

/// Fixed y coordinate of both surfaces in the position sweep.
pub const POSITION_SWEEP_Y: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Convergence traces; the values are transmit antenna counts.
    Iterations,
    MTx,
    /// Elements per surface (`N_i1 = N_i2`).
    NElements,
    Nmse,
    /// Pairs `[x1, x2]` of surface x coordinates.
    IrsPositions,
    NSub,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Iterations => "iterations",
            SweepAxis::MTx => "m_tx",
            SweepAxis::NElements => "n_elements",
            SweepAxis::Nmse => "nmse",
            SweepAxis::IrsPositions => "irs_positions",
            SweepAxis::NSub => "n_sub",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Scalar(f64),
    Pair([f64; 2]),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Scalar(v) => write!(f, "{v}"),
            AxisValue::Pair([a, b]) => write!(f, "{a}:{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sweep_axis: SweepAxis,
    pub axis_values: Vec<AxisValue>,
    pub schemes: Vec<SchemeKind>,
    pub n_realizations: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Record wall-clock time per row. Off by default so that output is
    /// reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    pub system: SystemConfig,
    #[serde(default)]
    pub geometry: SceneGeometry,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub ao: AoSchedule,
}

/// Scale of a built-in preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Full system size and realization count.
    Full,
    /// Small system and 50 realizations, for quick runs.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(Error::Parse(format!("unknown scale `{s}` (expected full or desk)"))),
        }
    }
}

pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "desk"];

/// x coordinates tried for each surface in the position sweep.
pub const POSITION_GRID: [f64; 5] = [0.0, 15.0, 30.0, 45.0, 60.0];

/// Every `[x1, x2]` pair of [`POSITION_GRID`] with distinct coordinates.
pub fn position_grid() -> Vec<AxisValue> {
    let mut out = Vec::new();
    for &x1 in &POSITION_GRID {
        for &x2 in &POSITION_GRID {
            if x1 != x2 {
                out.push(AxisValue::Pair([x1, x2]));
            }
        }
    }
    out
}

fn scalars(vs: &[f64]) -> Vec<AxisValue> {
    vs.iter().map(|&v| AxisValue::Scalar(v)).collect()
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec fields are all representable in TOML")
    }

    /// Built-in sweep by name.
    pub fn preset(name: &str, scale: Scale) -> Result<Self> {
        let (system, reps) = match scale {
            Scale::Full => (SystemConfig::full_scale(), 100),
            Scale::Desk => (SystemConfig::desk(), 50),
        };
        let all = SchemeKind::ALL.to_vec();
        let base = |axis, values, schemes, n| ExperimentSpec {
            sweep_axis: axis,
            axis_values: values,
            schemes,
            n_realizations: n,
            master_seed: 2024,
            output_path: None,
            timing: false,
            system: system.clone(),
            geometry: SceneGeometry::default(),
            optimizer: OptimizerConfig::default(),
            ao: AoSchedule::default(),
        };
        let spec = match name {
            "fig2" => base(SweepAxis::Iterations, scalars(&[4.0, 8.0, 16.0]), vec![SchemeKind::Proposed], 1),
            "fig3" => base(SweepAxis::MTx, scalars(&[4.0, 8.0, 12.0, 16.0]), all, reps),
            "fig4" => base(SweepAxis::NElements, scalars(&[16.0, 32.0, 48.0, 64.0]), all, reps),
            "fig5" => base(SweepAxis::Nmse, scalars(&[0.0, 0.01, 0.05, 0.1]), all, reps),
            "fig6" => base(SweepAxis::IrsPositions, position_grid(), vec![SchemeKind::Proposed], 20),
            "fig7" => base(SweepAxis::NSub, scalars(&[1.0, 6.0, 11.0, 16.0, 21.0]), vec![SchemeKind::Proposed], reps),
            "desk" => ExperimentSpec {
                system: SystemConfig::desk(),
                ..base(SweepAxis::MTx, scalars(&[SystemConfig::desk().m_tx as f64]), all, 50)
            },
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() {
            return Err(Error::InvalidConfig("axis_values must not be empty".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("n_realizations must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("schemes must not be empty".into()));
        }
        self.optimizer.validate()?;
        for idx in 0..self.axis_values.len() {
            let (cfg, geo, _) = self.point_config(idx)?;
            cfg.validate()?;
            geo.validate()?;
        }
        Ok(())
    }

    /// System, geometry and channel-error model at one axis value.
    pub fn point_config(&self, axis_idx: usize) -> Result<(SystemConfig, SceneGeometry, Option<CeeConfig>)> {
        let value = *self
            .axis_values
            .get(axis_idx)
            .ok_or(Error::IndexOutOfRange { index: axis_idx, len: self.axis_values.len() })?;
        let mut cfg = self.system.clone();
        let mut geo = self.geometry.clone();
        let mut cee = None;
        let count = |v: AxisValue| -> Result<usize> {
            match v {
                AxisValue::Scalar(x) if x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => Ok(x as usize),
                _ => Err(Error::InvalidConfig(format!("axis {} needs positive integers, got {v}", self.sweep_axis.name()))),
            }
        };
        match self.sweep_axis {
            SweepAxis::Iterations | SweepAxis::MTx => cfg.m_tx = count(value)?,
            SweepAxis::NElements => {
                let n = count(value)?;
                cfg.n_irs1 = n;
                cfg.n_irs2 = n;
            }
            SweepAxis::NSub => cfg.n_sub = count(value)?,
            SweepAxis::Nmse => match value {
                AxisValue::Scalar(d) if d >= 0.0 && d.is_finite() => cee = Some(CeeConfig { delta: d }),
                _ => return Err(Error::InvalidConfig(format!("nmse values must be non-negative reals, got {value}"))),
            },
            SweepAxis::IrsPositions => match value {
                AxisValue::Pair([x1, x2]) => {
                    geo.irs1 = [x1, POSITION_SWEEP_Y];
                    geo.irs2 = [x2, POSITION_SWEEP_Y];
                }
                _ => return Err(Error::InvalidConfig(format!("irs_positions values must be [x1, x2] pairs, got {value}"))),
            },
        }
        Ok((cfg, geo, cee))
    }

    /// Seed of one realization at one axis index.
    pub fn realization_seed(&self, axis_idx: usize, realization: usize) -> u64 {
        derive_seed(self.master_seed, &[axis_idx as u64, realization as u64])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeKind,
    pub axis: SweepAxis,
    pub axis_index: usize,
    pub value: String,
    pub realization: usize,
    pub seed: u64,
    pub ssr_bits: f64,
    pub per_subcarrier_ssr: Vec<f64>,
    pub iters: usize,
    pub grad_norm: f64,
    pub wall_ms: f64,
    /// Set when the solve failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

/// One point of a convergence trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub scheme: SchemeKind,
    pub value: String,
    pub realization: usize,
    pub iteration: usize,
    pub objective: f64,
    /// `−objective / ln 2`, the secrecy sum rate before per-subcarrier
    /// clipping.
    pub ssr_bits: f64,
    /// Missing when the solver records gradient norms per cycle.
    pub grad_norm: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// Filled for the `iterations` axis only.
    pub traces: Vec<TracePoint>,
}

struct WorkItem {
    axis_idx: usize,
    realization: usize,
    scheme_rank: usize,
}

fn scheme_rank(kind: SchemeKind) -> usize {
    SchemeKind::ALL.iter().position(|&k| k == kind).expect("ALL lists every scheme")
}

/// Runs the sweep on `threads` workers (all cores when `None`).
pub fn run(spec: &ExperimentSpec, threads: Option<usize>) -> Result<SweepOutput> {
    run_with_progress(spec, threads, &|_, _| {})
}

/// [`run`] with a callback receiving `(finished, total)` after each item.
pub fn run_with_progress(
    spec: &ExperimentSpec,
    threads: Option<usize>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SweepOutput> {
    spec.validate()?;
    let mut schemes = spec.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut items = Vec::new();
    for axis_idx in 0..spec.axis_values.len() {
        for realization in 0..spec.n_realizations {
            for &s in &schemes {
                items.push(WorkItem { axis_idx, realization, scheme_rank: scheme_rank(s) });
            }
        }
    }
    let total = items.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let work = || -> Vec<(ResultRow, Vec<TracePoint>)> {
        items
            .par_iter()
            .map(|item| {
                let out = run_item(spec, item);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(n, total);
                out
            })
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut out = SweepOutput::default();
    for (row, trace) in results {
        out.rows.push(row);
        out.traces.extend(trace);
    }
    out.rows.sort_by_key(|r| (r.axis_index, scheme_rank(r.scheme), r.realization));
    Ok(out)
}

fn run_item(spec: &ExperimentSpec, item: &WorkItem) -> (ResultRow, Vec<TracePoint>) {
    let kind = SchemeKind::ALL[item.scheme_rank];
    let seed = spec.realization_seed(item.axis_idx, item.realization);
    let value = spec.axis_values[item.axis_idx].to_string();
    let started = Instant::now();
    let outcome = spec.point_config(item.axis_idx).and_then(|(cfg, geo, cee)| {
        let scn = Scenario::generate(&cfg, &geo, seed)?;
        let scheme = SchemeSpec { ao: spec.ao.clone(), ..SchemeSpec::new(kind) };
        run_scheme(&scn, &scheme, cee, &spec.optimizer)
    });
    let wall_ms = if spec.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut row = ResultRow {
        scheme: kind,
        axis: spec.sweep_axis,
        axis_index: item.axis_idx,
        value: value.clone(),
        realization: item.realization,
        seed,
        ssr_bits: f64::NAN,
        per_subcarrier_ssr: Vec::new(),
        iters: 0,
        grad_norm: f64::NAN,
        wall_ms,
        error: None,
    };
    let mut trace = Vec::new();
    match outcome {
        Ok(out) => {
            row.ssr_bits = out.rates.total;
            row.per_subcarrier_ssr = out.rates.per_k;
            row.iters = out.run.iterations_used;
            row.grad_norm = out.run.final_grad_norm;
            if spec.sweep_axis == SweepAxis::Iterations {
                let aligned = out.run.grad_norm_trace.len() == out.run.objective_trace.len();
                trace = out
                    .run
                    .objective_trace
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| TracePoint {
                        scheme: kind,
                        value: value.clone(),
                        realization: item.realization,
                        iteration: i,
                        objective: f,
                        ssr_bits: -f / std::f64::consts::LN_2,
                        grad_norm: aligned.then(|| out.run.grad_norm_trace[i]),
                    })
                    .collect();
            }
        }
        Err(e) => row.error = Some(format!("{}: {e}", e.kind())),
    }
    (row, trace)
}

/// Writes rows as CSV, preceded by [`RESULTS_HEADER`]. Failed rows are
/// followed by a `# row-error` comment line carrying the message.
pub fn write_rows<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(RESULT_COLUMNS)?;
        w.flush()?;
    }
    out.write_all(&buf)?;
    for r in rows {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record([
                r.scheme.name().to_string(),
                r.axis.name().to_string(),
                r.value.clone(),
                r.realization.to_string(),
                r.seed.to_string(),
                r.ssr_bits.to_string(),
                r.iters.to_string(),
                r.grad_norm.to_string(),
                r.wall_ms.to_string(),
            ])?;
            w.flush()?;
        }
        out.write_all(&buf)?;
        if let Some(e) = &r.error {
            writeln!(out, "# row-error scheme={} value={} realization={}: {}", r.scheme, r.value, r.realization, e.replace('\n', " "))?;
        }
    }
    Ok(())
}

pub fn write_traces<W: Write>(traces: &[TracePoint], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for t in traces {
        w.write_record([
            t.scheme.name().to_string(),
            t.value.clone(),
            t.realization.to_string(),
            t.iteration.to_string(),
            t.objective.to_string(),
            t.ssr_bits.to_string(),
            t.grad_norm.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Path of the trace file written next to `results`.
pub fn trace_path(results: &Path) -> PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    results.with_file_name(format!("{stem}_trace.csv"))
}

/// Writes the results CSV and, when traces exist, the trace CSV beside it.
pub fn write_output(output: &SweepOutput, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_rows(&output.rows, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    if !output.traces.is_empty() {
        write_traces(&output.traces, std::io::BufWriter::new(std::fs::File::create(trace_path(path))?))?;
    }
    Ok(())
}

/// Row as read back from a results CSV.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct CsvRow {
    pub scheme: SchemeKind,
    pub axis: String,
    pub value: String,
    pub realization: usize,
    pub seed: u64,
    pub ssr_bits: f64,
    pub iters: usize,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(Error::Parse(format!("unexpected columns `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryLine {
    pub scheme: SchemeKind,
    pub axis: String,
    pub value: String,
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub lines: Vec<SummaryLine>,
    pub warnings: Vec<String>,
}

/// Per `(scheme, axis, value)` mean, standard error and percentile
/// bootstrap interval. Groups appear in first-seen order. Rows with a
/// non-finite rate are dropped with a warning.
pub fn summarize(rows: &[CsvRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("nothing to summarize".into()));
    }
    let mut order = Vec::new();
    let mut groups: BTreeMap<(SchemeKind, String, String), Vec<f64>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for r in rows {
        let key = (r.scheme, r.axis.clone(), r.value.clone());
        let slot = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if r.ssr_bits.is_finite() {
            slot.push(r.ssr_bits);
        } else {
            warnings.push(format!("dropped failed row scheme={} value={} realization={}", r.scheme, r.value, r.realization));
        }
    }
    let mut lines = Vec::new();
    for key in order {
        let xs = &groups[&key];
        let (scheme, axis, value) = key;
        if xs.is_empty() {
            warnings.push(format!("no usable rows for scheme={scheme} value={value}"));
            continue;
        }
        let seed = derive_seed(hash_str(&format!("{scheme}/{axis}/{value}")), &[purpose::BOOTSTRAP]);
        let (ci_lo, ci_hi) = bootstrap_mean_ci(xs, BOOTSTRAP_RESAMPLES, BOOTSTRAP_LEVEL, seed);
        lines.push(SummaryLine { scheme, axis, value, n: xs.len(), mean: mean(xs), std_err: std_err(xs), ci_lo, ci_hi });
    }
    Ok(Summary { lines, warnings })
}

pub fn write_summary<W: Write>(summary: &Summary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "axis", "value", "n", "mean", "std_err", "ci_lo", "ci_hi"])?;
    for l in &summary.lines {
        w.write_record([
            l.scheme.name().to_string(),
            l.axis.clone(),
            l.value.clone(),
            l.n.to_string(),
            l.mean.to_string(),
            l.std_err.to_string(),
            l.ci_lo.to_string(),
            l.ci_hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one built-in check.
#[derive(Clone, Debug)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick runtime checks of the numerical core on small instances.
pub fn selftest() -> Vec<SelfCheck> {
    use crate::manifold::{inner, retract, IteratePoint};
    use crate::optimizer::{recover_partial, solve};
    use crate::seed::rng_from;

    let cfg = SystemConfig { m_tx: 4, n_sub: 2, n_irs1: 6, n_irs2: 5, ..SystemConfig::full_scale() };
    let geo = SceneGeometry::default();
    let mut checks = Vec::new();
    let scn = match Scenario::generate(&cfg, &geo, 11) {
        Ok(s) => s,
        Err(e) => {
            checks.push(SelfCheck { name: "channel generation", passed: false, detail: e.to_string() });
            return checks;
        }
    };
    let problem = crate::objective::SecrecyProblem::new(scn.channels.clone(), &cfg).expect("generated channels are valid");
    let mut rng = rng_from(12);
    let pt = IteratePoint::random(cfg.point_shape(), &mut rng);

    // Directional derivative against central differences in the ambient space.
    let (g, _) = problem.euclidean_gradient(&pt).expect("valid point");
    let dir = IteratePoint::random(cfg.point_shape(), &mut rng);
    let dir = crate::manifold::TangentVector { xi_blocks: dir.w_blocks, psi1: dir.phi1, psi2: dir.phi2 };
    let h = 1e-6;
    let f = |t: f64| problem.objective(&pt.offset(&dir, t).expect("shapes agree")).expect("finite");
    let fd = (f(h) - f(-h)) / (2.0 * h);
    let an = inner(&g, &dir).expect("shapes agree");
    let rel = (fd - an).abs() / an.abs().max(1e-12);
    checks.push(SelfCheck { name: "gradient vs finite differences", passed: rel <= 1e-5, detail: format!("relative error {rel:.2e}") });

    let raw = pt.offset(&dir, 3.7).expect("shapes agree");
    let res = retract(&raw).map(|p| p.constraint_residual()).unwrap_or(f64::INFINITY);
    checks.push(SelfCheck { name: "retraction lands on the manifold", passed: res <= 1e-12, detail: format!("residual {res:.2e}") });

    let opt = OptimizerConfig { max_iters: 30, ..OptimizerConfig::default() };
    let run = recover_partial(solve(&problem, &pt, &opt));
    let (passed, detail) = match &run {
        Ok(r) => {
            let worst = r
                .step_trace
                .iter()
                .enumerate()
                .map(|(q, a)| (r.objective_trace[q] - r.objective_trace[q + 1]) - 0.5 * a * r.grad_norm_trace[q].powi(2))
                .fold(f64::INFINITY, f64::min);
            (worst >= -1e-9, format!("{} steps, worst certificate slack {worst:.2e}", r.step_trace.len()))
        }
        Err(e) => (false, e.to_string()),
    };
    checks.push(SelfCheck { name: "sufficient-decrease certificate", passed, detail });

    let tiny = ExperimentSpec {
        sweep_axis: SweepAxis::MTx,
        axis_values: vec![AxisValue::Scalar(4.0)],
        schemes: vec![SchemeKind::Proposed, SchemeKind::RIrs],
        n_realizations: 2,
        master_seed: 5,
        output_path: None,
        timing: false,
        system: cfg,
        geometry: geo,
        optimizer: opt,
        ao: AoSchedule::default(),
    };
    let csv_bytes = |threads| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_rows(&run_sweep_rows(&tiny, threads)?, &mut buf)?;
        Ok(buf)
    };
    let (passed, detail) = match (csv_bytes(Some(1)), csv_bytes(Some(2))) {
        (Ok(a), Ok(b)) => (a == b, format!("{} bytes", a.len())),
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    };
    checks.push(SelfCheck { name: "sweep output is deterministic", passed, detail });
    checks
}

fn run_sweep_rows(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<ResultRow>> {
    Ok(run(spec, threads)?.rows)
}
