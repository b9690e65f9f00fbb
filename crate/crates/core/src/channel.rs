//! Statistical channel generation: log-distance path loss on a 2-D scene
//! with i.i.d. Rayleigh small-scale fading per subcarrier, plus the NMSE
//! channel-estimation-error model `Ĥ = H − E`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cn_matrix;
use crate::objective::{ChannelDims, ChannelSet, SystemConfig, FAMILY_NAMES};
use crate::seed::rng_from;
use crate::{CMat, C64};

/// Path-loss exponents per link family, in [`FAMILY_NAMES`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossExponents {
    pub a_i1: f64,
    pub a_i2: f64,
    pub i1_b: f64,
    pub i1_e: f64,
    pub i2_b: f64,
    pub i2_e: f64,
    pub i1_i2: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        PathLossExponents { a_i1: 2.5, a_i2: 3.0, i1_b: 3.0, i1_e: 3.0, i2_b: 2.5, i2_e: 2.5, i1_i2: 1.1 }
    }
}

impl PathLossExponents {
    fn as_array(&self) -> [f64; 7] {
        [self.a_i1, self.a_i2, self.i1_b, self.i1_e, self.i2_b, self.i2_e, self.i1_i2]
    }
}

/// Node positions (meters) and the large-scale fading model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneGeometry {
    pub alice: [f64; 2],
    pub irs1: [f64; 2],
    pub irs2: [f64; 2],
    pub bob: [f64; 2],
    pub eve: [f64; 2],
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponents: PathLossExponents,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        SceneGeometry {
            alice: [0.0, 0.0],
            irs1: [10.0, 10.0],
            irs2: [50.0, 10.0],
            bob: [60.0, 0.0],
            eve: [40.0, 0.0],
            pl0_db: -30.0,
            d0_m: 1.0,
            exponents: PathLossExponents::default(),
        }
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl SceneGeometry {
    /// Endpoints `(transmitter, receiver)` of each family.
    fn endpoints(&self) -> [([f64; 2], [f64; 2]); 7] {
        [
            (self.alice, self.irs1),
            (self.alice, self.irs2),
            (self.irs1, self.bob),
            (self.irs1, self.eve),
            (self.irs2, self.bob),
            (self.irs2, self.eve),
            (self.irs1, self.irs2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0_m > 0.0) {
            return Err(Error::InvalidConfig(format!("d0_m must be positive, got {}", self.d0_m)));
        }
        for (idx, ((a, b), z)) in self.endpoints().iter().zip(self.exponents.as_array()).enumerate() {
            if !(z > 0.0) {
                return Err(Error::InvalidConfig(format!("exponent of {} must be positive", FAMILY_NAMES[idx])));
            }
            if !(distance(*a, *b) > 0.0) {
                return Err(Error::InvalidConfig(format!("link {} has zero length", FAMILY_NAMES[idx])));
            }
        }
        Ok(())
    }

    /// Linear power gain of every family.
    pub fn family_gains(&self) -> Result<[f64; 7]> {
        let z = self.exponents.as_array();
        let mut out = [0.0; 7];
        for (i, (a, b)) in self.endpoints().iter().enumerate() {
            out[i] = path_loss_linear(distance(*a, *b), z[i], self)?;
        }
        Ok(out)
    }
}

/// `PL₀ − 10 ζ log₁₀(d/d₀)` in dB.
pub fn path_loss_db(d: f64, zeta: f64, geo: &SceneGeometry) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(geo.pl0_db - 10.0 * zeta * (d / geo.d0_m).log10())
}

/// Linear power gain `10^(PL/10)`; the amplitude scale is its square root.
pub fn path_loss_linear(d: f64, zeta: f64, geo: &SceneGeometry) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(d, zeta, geo)? / 10.0))
}

/// Draws every family for the double-IRS scene. Entries are
/// `√gain · CN(0, 1)`, independent across entries, subcarriers and families.
pub fn generate(cfg: &SystemConfig, geo: &SceneGeometry, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    geo.validate()?;
    let dims = ChannelDims {
        m_tx: cfg.m_tx,
        n_bob: cfg.n_bob,
        n_eve: cfg.n_eve,
        n_sub: cfg.n_sub,
        n_irs1: cfg.n_irs1,
        n_irs2: cfg.n_irs2,
    };
    draw(dims, &geo.family_gains()?, seed)
}

fn draw(dims: ChannelDims, gains: &[f64; 7], seed: u64) -> Result<ChannelSet> {
    let mut rng = rng_from(seed);
    let mut ch = ChannelSet::zeros(dims);
    for (idx, fam) in ch.families_mut().into_iter().enumerate() {
        let (r, c) = dims.family_shape(idx);
        let scale = gains[idx].sqrt();
        for m in fam.iter_mut() {
            *m = cn_matrix(r, c, scale, &mut rng);
        }
    }
    Ok(ch)
}

/// Single-IRS scene with `n_elements` at `position`. Only the Alice–IRS and
/// IRS–Bob/Eve families are populated; the second-IRS families are empty
/// (`N_i2 = 0`). The links reuse the exponents of the Alice–IRS 1 and
/// IRS 2–Bob/Eve links.
pub fn generate_single_irs(
    cfg: &SystemConfig,
    geo: &SceneGeometry,
    position: [f64; 2],
    n_elements: usize,
    seed: u64,
) -> Result<ChannelSet> {
    cfg.validate()?;
    if n_elements == 0 {
        return Err(Error::InvalidConfig("single IRS needs at least one element".into()));
    }
    let single = SceneGeometry { irs1: position, ..geo.clone() };
    let z = &geo.exponents;
    let gain = |to: [f64; 2], zeta: f64| path_loss_linear(distance(position, to), zeta, &single);
    let mut gains = [0.0; 7];
    gains[0] = path_loss_linear(distance(geo.alice, position), z.a_i1, &single)?;
    gains[2] = gain(geo.bob, z.i2_b)?;
    gains[3] = gain(geo.eve, z.i2_e)?;
    let dims = ChannelDims {
        m_tx: cfg.m_tx,
        n_bob: cfg.n_bob,
        n_eve: cfg.n_eve,
        n_sub: cfg.n_sub,
        n_irs1: n_elements,
        n_irs2: 0,
    };
    draw(dims, &gains, seed)
}

/// NMSE of the channel estimate, `δ = E‖E‖²/E‖H‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeeConfig {
    pub delta: f64,
}

/// Returns the estimate `Ĥ = H − E` with `E_ij ~ CN(0, δ‖H‖_F²/M_e)` drawn
/// per matrix, `M_e` being that matrix's element count.
pub fn inject_cee(ch: &ChannelSet, cee: CeeConfig, seed: u64) -> Result<ChannelSet> {
    if !(cee.delta >= 0.0 && cee.delta.is_finite()) {
        return Err(Error::InvalidConfig(format!("NMSE delta must be non-negative, got {}", cee.delta)));
    }
    if cee.delta == 0.0 {
        return Ok(ch.clone());
    }
    let mut rng = rng_from(seed);
    let mut out = ch.clone();
    for fam in out.families_mut() {
        for m in fam.iter_mut() {
            if m.is_empty() {
                continue;
            }
            let sigma = (cee.delta * m.norm_squared() / m.len() as f64).sqrt();
            let err = cn_matrix(m.nrows(), m.ncols(), sigma, &mut rng);
            *m -= err;
        }
    }
    Ok(out)
}

const TEXT_HEADER: &str = "# prgd channel set v1";

/// Writes `ch` as text: a `dims` line, then for every family and
/// subcarrier a `family <name> subcarrier <k>` header followed by one
/// `re im` line per entry in row-major order.
pub fn write_text<W: Write>(ch: &ChannelSet, mut out: W) -> Result<()> {
    let d = ch.dims();
    writeln!(out, "{TEXT_HEADER}")?;
    writeln!(
        out,
        "dims m_tx={} n_bob={} n_eve={} n_sub={} n_irs1={} n_irs2={}",
        d.m_tx, d.n_bob, d.n_eve, d.n_sub, d.n_irs1, d.n_irs2
    )?;
    for (idx, fam) in ch.families().iter().enumerate() {
        for (k, m) in fam.iter().enumerate() {
            writeln!(out, "family {} subcarrier {}", FAMILY_NAMES[idx], k)?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let z = m[(i, j)];
                    writeln!(out, "{:e} {:e}", z.re, z.im)?;
                }
            }
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

/// Reads the format produced by [`write_text`].
pub fn read_text<R: BufRead>(input: R) -> Result<ChannelSet> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty() || l.starts_with('#')));

    let mut next = |what: &str| -> Result<(usize, String)> {
        lines.next().transpose()?.ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))
    };

    let (ln, dims_line) = next("dims line")?;
    let mut fields = dims_line.split_whitespace();
    if fields.next() != Some("dims") {
        return Err(parse_err(ln, "expected `dims`"));
    }
    let mut vals = std::collections::HashMap::new();
    for f in fields {
        let (k, v) = f.split_once('=').ok_or_else(|| parse_err(ln, format!("bad field `{f}`")))?;
        let v: usize = v.parse().map_err(|e| parse_err(ln, e))?;
        vals.insert(k.to_string(), v);
    }
    let get = |k: &str| vals.get(k).copied().ok_or_else(|| parse_err(ln, format!("missing `{k}`")));
    let dims = ChannelDims {
        m_tx: get("m_tx")?,
        n_bob: get("n_bob")?,
        n_eve: get("n_eve")?,
        n_sub: get("n_sub")?,
        n_irs1: get("n_irs1")?,
        n_irs2: get("n_irs2")?,
    };

    let mut ch = ChannelSet::zeros(dims);
    for (idx, fam) in ch.families_mut().into_iter().enumerate() {
        let (r, c) = dims.family_shape(idx);
        for (k, m) in fam.iter_mut().enumerate() {
            let (ln, header) = next("family header")?;
            let expected = format!("family {} subcarrier {}", FAMILY_NAMES[idx], k);
            if header.trim() != expected {
                return Err(parse_err(ln, format!("expected `{expected}`, found `{header}`")));
            }
            let mut mat = CMat::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    let (ln, entry) = next("matrix entry")?;
                    let mut parts = entry.split_whitespace();
                    let mut num = || -> Result<f64> {
                        parts
                            .next()
                            .ok_or_else(|| parse_err(ln, "expected `re im`"))?
                            .parse::<f64>()
                            .map_err(|e| parse_err(ln, e))
                    };
                    mat[(i, j)] = C64::new(num()?, num()?);
                }
            }
            *m = mat;
        }
    }
    if let Some((ln, extra)) = next("end").ok() {
        return Err(parse_err(ln, format!("trailing content `{extra}`")));
    }
    ch.validate()?;
    Ok(ch)
}
