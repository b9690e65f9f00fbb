//! The secrecy-rate problem: cascaded effective channels, the log-det
//! objective on the normalized variables, its Wirtinger gradients, and
//! secrecy-rate reporting.
//!
//! Every channel is stored receiver-rows × transmitter-columns, so the
//! effective Bob channel on subcarrier `k` reads
//!
//! ```text
//! H_b = G_i1b·diag(φ₁)·G_ai1 + G_i2b·diag(φ₂)·G_ai2 + G_i2b·diag(φ₂)·G_i1i2·diag(φ₁)·G_ai1
//! ```
//!
//! and likewise for Eve. The objective is `Σ_k ln det P_e,k − ln det P_b,k`
//! with `P_x,k = I + (P/σ_x²) H_x,k W_k W_kᴴ H_x,kᴴ`. Gradients follow the
//! real-gradient convention `∇f = 2 ∂f/∂X*`, so that the directional
//! derivative along `U` is `Re Tr(∇fᴴ U)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    all_finite, diag_of_a_bh, re_trace_inner, regularized_gram, scale_columns, scale_rows, HermitianFactor,
};
use crate::manifold::{IteratePoint, PointShape, TangentVector};
use crate::{CMat, CVec, C64};

/// Scalar system parameters. Powers are in watts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub m_tx: usize,
    pub n_bob: usize,
    pub n_eve: usize,
    pub n_streams: usize,
    pub n_sub: usize,
    pub n_irs1: usize,
    pub n_irs2: usize,
    pub power_watts: f64,
    pub noise_bob_watts: f64,
    pub noise_eve_watts: f64,
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

impl SystemConfig {
    /// M = 16, N = 48 per IRS, N_s = N_b = N_e = 2, K = 10, P = 0 dB (1 W),
    /// σ² = −80 dBm for both receivers.
    pub fn full_scale() -> Self {
        SystemConfig {
            m_tx: 16,
            n_bob: 2,
            n_eve: 2,
            n_streams: 2,
            n_sub: 10,
            n_irs1: 48,
            n_irs2: 48,
            power_watts: db_to_linear(0.0),
            noise_bob_watts: dbm_to_watts(-80.0),
            noise_eve_watts: dbm_to_watts(-80.0),
        }
    }

    /// Reduced instance for quick runs: M = 8, N = 16, K = 4.
    pub fn desk() -> Self {
        SystemConfig { m_tx: 8, n_sub: 4, n_irs1: 16, n_irs2: 16, ..Self::full_scale() }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m_tx", self.m_tx),
            ("n_bob", self.n_bob),
            ("n_eve", self.n_eve),
            ("n_streams", self.n_streams),
            ("n_sub", self.n_sub),
            ("n_irs1", self.n_irs1),
            ("n_irs2", self.n_irs2),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.n_streams > self.m_tx.min(self.n_bob) {
            return Err(Error::InvalidConfig(format!(
                "n_streams = {} exceeds min(m_tx, n_bob) = {}",
                self.n_streams,
                self.m_tx.min(self.n_bob)
            )));
        }
        for (name, p) in [
            ("power_watts", self.power_watts),
            ("noise_bob_watts", self.noise_bob_watts),
            ("noise_eve_watts", self.noise_eve_watts),
        ] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {p}")));
            }
        }
        Ok(())
    }

    pub fn point_shape(&self) -> PointShape {
        PointShape {
            m_tx: self.m_tx,
            n_streams: self.n_streams,
            n_sub: self.n_sub,
            n_irs1: self.n_irs1,
            n_irs2: self.n_irs2,
        }
    }
}

/// Per-subcarrier channel families.
///
/// `g_a_i1[k]` is `N_i1 × M`, `g_a_i2[k]` is `N_i2 × M`, `g_i1_b[k]` is
/// `N_b × N_i1`, `g_i1_e[k]` is `N_e × N_i1`, `g_i2_b[k]` is `N_b × N_i2`,
/// `g_i2_e[k]` is `N_e × N_i2` and `g_i1_i2[k]` is `N_i2 × N_i1`.
/// A single-IRS scene uses `N_i2 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub g_a_i1: Vec<CMat>,
    pub g_a_i2: Vec<CMat>,
    pub g_i1_b: Vec<CMat>,
    pub g_i1_e: Vec<CMat>,
    pub g_i2_b: Vec<CMat>,
    pub g_i2_e: Vec<CMat>,
    pub g_i1_i2: Vec<CMat>,
}

/// Dimensions implied by a [`ChannelSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelDims {
    pub m_tx: usize,
    pub n_bob: usize,
    pub n_eve: usize,
    pub n_sub: usize,
    pub n_irs1: usize,
    pub n_irs2: usize,
}

/// Names of the seven families in canonical order.
pub const FAMILY_NAMES: [&str; 7] = ["g_a_i1", "g_a_i2", "g_i1_b", "g_i1_e", "g_i2_b", "g_i2_e", "g_i1_i2"];

impl ChannelDims {
    /// `(rows, cols)` of the family at `FAMILY_NAMES[idx]`.
    pub fn family_shape(&self, idx: usize) -> (usize, usize) {
        match idx {
            0 => (self.n_irs1, self.m_tx),
            1 => (self.n_irs2, self.m_tx),
            2 => (self.n_bob, self.n_irs1),
            3 => (self.n_eve, self.n_irs1),
            4 => (self.n_bob, self.n_irs2),
            5 => (self.n_eve, self.n_irs2),
            6 => (self.n_irs2, self.n_irs1),
            _ => panic!("family index {idx} out of range"),
        }
    }
}

impl ChannelSet {
    pub fn zeros(dims: ChannelDims) -> Self {
        let fam = |idx: usize| {
            let (r, c) = dims.family_shape(idx);
            vec![CMat::zeros(r, c); dims.n_sub]
        };
        ChannelSet {
            g_a_i1: fam(0),
            g_a_i2: fam(1),
            g_i1_b: fam(2),
            g_i1_e: fam(3),
            g_i2_b: fam(4),
            g_i2_e: fam(5),
            g_i1_i2: fam(6),
        }
    }

    pub fn families(&self) -> [&Vec<CMat>; 7] {
        [&self.g_a_i1, &self.g_a_i2, &self.g_i1_b, &self.g_i1_e, &self.g_i2_b, &self.g_i2_e, &self.g_i1_i2]
    }

    pub fn families_mut(&mut self) -> [&mut Vec<CMat>; 7] {
        [
            &mut self.g_a_i1,
            &mut self.g_a_i2,
            &mut self.g_i1_b,
            &mut self.g_i1_e,
            &mut self.g_i2_b,
            &mut self.g_i2_e,
            &mut self.g_i1_i2,
        ]
    }

    pub fn dims(&self) -> ChannelDims {
        let k = self.g_a_i1.len();
        let first = |v: &Vec<CMat>| v.first().map(|m| m.shape()).unwrap_or((0, 0));
        ChannelDims {
            m_tx: first(&self.g_a_i1).1,
            n_bob: first(&self.g_i1_b).0,
            n_eve: first(&self.g_i1_e).0,
            n_sub: k,
            n_irs1: first(&self.g_a_i1).0,
            n_irs2: first(&self.g_a_i2).0,
        }
    }

    /// Checks family lengths, per-family shapes and finiteness.
    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims.n_sub == 0 {
            return Err(Error::InvalidConfig("channel set has no subcarriers".into()));
        }
        for (idx, fam) in self.families().iter().enumerate() {
            let name = FAMILY_NAMES[idx];
            if fam.len() != dims.n_sub {
                return Err(Error::dim(format!("{name} subcarrier count"), dims.n_sub, fam.len()));
            }
            let (r, c) = dims.family_shape(idx);
            for m in fam.iter() {
                if m.nrows() != r {
                    return Err(Error::dim(format!("{name} rows"), r, m.nrows()));
                }
                if m.ncols() != c {
                    return Err(Error::dim(format!("{name} cols"), c, m.ncols()));
                }
                if !all_finite(m) {
                    return Err(Error::Numeric(format!("{name} has non-finite entries")));
                }
            }
        }
        Ok(())
    }

    /// Copy with the inter-IRS family zeroed (distributed double IRS).
    pub fn without_cascade(&self) -> ChannelSet {
        let mut out = self.clone();
        out.g_i1_i2.iter_mut().for_each(|m| m.fill(C64::new(0.0, 0.0)));
        out
    }

    fn check_point(&self, pt: &IteratePoint) -> Result<()> {
        let d = self.dims();
        let s = pt.shape();
        if s.n_sub != d.n_sub {
            return Err(Error::dim("point subcarrier count", d.n_sub, s.n_sub));
        }
        if s.m_tx != d.m_tx {
            return Err(Error::dim("precoder rows", d.m_tx, s.m_tx));
        }
        self.check_phases(&pt.phi1, &pt.phi2)
    }

    fn check_phases(&self, phi1: &CVec, phi2: &CVec) -> Result<()> {
        let d = self.dims();
        if phi1.len() != d.n_irs1 {
            return Err(Error::dim("phi1 length", d.n_irs1, phi1.len()));
        }
        if phi2.len() != d.n_irs2 {
            return Err(Error::dim("phi2 length", d.n_irs2, phi2.len()));
        }
        Ok(())
    }
}

/// Cascade intermediates of one receiver on one subcarrier:
/// `u = G_i2x·diag(φ₂)`, `v = (G_i1x + u·G_i1i2)·diag(φ₁)`, `h = v·G_ai1 + u·G_ai2`.
struct ReceiverCascade {
    h: CMat,
}

fn receiver_cascade(
    b1: &CMat,
    b2: &CMat,
    ch: &ChannelSet,
    k: usize,
    phi1: &CVec,
    phi2: &CVec,
) -> ReceiverCascade {
    let u = scale_columns(b2, phi2);
    let v = scale_columns(&(b1 + &u * &ch.g_i1_i2[k]), phi1);
    ReceiverCascade { h: &v * &ch.g_a_i1[k] + &u * &ch.g_a_i2[k] }
}

/// Effective Bob (`N_b × M`) and Eve (`N_e × M`) channels on subcarrier `k`.
pub fn effective_channels(ch: &ChannelSet, phi1: &CVec, phi2: &CVec, k: usize) -> Result<(CMat, CMat)> {
    let n_sub = ch.g_a_i1.len();
    if k >= n_sub {
        return Err(Error::IndexOutOfRange { index: k, len: n_sub });
    }
    ch.check_phases(phi1, phi2)?;
    Ok(effective_unchecked(ch, phi1, phi2, k))
}

fn effective_unchecked(ch: &ChannelSet, phi1: &CVec, phi2: &CVec, k: usize) -> (CMat, CMat) {
    let bob = receiver_cascade(&ch.g_i1_b[k], &ch.g_i2_b[k], ch, k, phi1, phi2);
    let eve = receiver_cascade(&ch.g_i1_e[k], &ch.g_i2_e[k], ch, k, phi1, phi2);
    (bob.h, eve.h)
}

fn snr_scales(cfg: &SystemConfig) -> (f64, f64) {
    (cfg.power_watts / cfg.noise_bob_watts, cfg.power_watts / cfg.noise_eve_watts)
}

/// `Σ_k ln det P_e,k − ln det P_b,k` on the normalized variables.
///
/// Only the scalar power and noise fields of `cfg` are used; dimensions come
/// from `ch` and `pt`. The norm constraint on `pt` is not enforced, which
/// lets tests evaluate the relaxed objective.
pub fn objective(ch: &ChannelSet, pt: &IteratePoint, cfg: &SystemConfig) -> Result<f64> {
    ch.check_point(pt)?;
    let (cb, ce) = snr_scales(cfg);
    let mut total = 0.0;
    for (k, w) in pt.w_blocks.iter().enumerate() {
        let (hb, he) = effective_unchecked(ch, &pt.phi1, &pt.phi2, k);
        let pb = HermitianFactor::new(regularized_gram(&(&hb * w), cb))?;
        let pe = HermitianFactor::new(regularized_gram(&(&he * w), ce))?;
        total += pe.ln_det() - pb.ln_det();
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("objective evaluated to {total}")));
    }
    Ok(total)
}

/// Intermediate matrices of the gradient, one entry per subcarrier.
#[derive(Clone, Debug)]
pub struct GradientWorkspace {
    /// `I + (P/σ_b²) H_b W Wᴴ H_bᴴ`
    pub p_b: Vec<CMat>,
    pub p_e: Vec<CMat>,
    /// `(P/σ_b²) P_b⁻¹ H_b`
    pub q_b: Vec<CMat>,
    pub q_e: Vec<CMat>,
    /// `W Wᴴ G_ai1ᴴ`
    pub m_i1: Vec<CMat>,
    /// `W Wᴴ G_ai2ᴴ`
    pub m_i2: Vec<CMat>,
}

/// Euclidean (real) gradient of [`objective`] with respect to every
/// precoder block and both phase vectors, plus the intermediates.
pub fn euclidean_gradient(
    ch: &ChannelSet,
    pt: &IteratePoint,
    cfg: &SystemConfig,
) -> Result<(TangentVector, GradientWorkspace)> {
    let mut ws = GradientWorkspace {
        p_b: Vec::new(),
        p_e: Vec::new(),
        q_b: Vec::new(),
        q_e: Vec::new(),
        m_i1: Vec::new(),
        m_i2: Vec::new(),
    };
    let grad = gradient_impl(ch, pt, cfg, Some(&mut ws))?;
    Ok((grad, ws))
}

pub(crate) fn gradient_impl(
    ch: &ChannelSet,
    pt: &IteratePoint,
    cfg: &SystemConfig,
    mut ws: Option<&mut GradientWorkspace>,
) -> Result<TangentVector> {
    ch.check_point(pt)?;
    let (cb, ce) = snr_scales(cfg);
    let two = C64::new(2.0, 0.0);
    let mut grad = TangentVector::zeros(pt.shape());
    let phi2_conj = pt.phi2.map(|z| z.conj());

    for (k, w) in pt.w_blocks.iter().enumerate() {
        let (hb, he) = effective_unchecked(ch, &pt.phi1, &pt.phi2, k);
        let xb = &hb * w;
        let xe = &he * w;
        let gram_b = regularized_gram(&xb, cb);
        let gram_e = regularized_gram(&xe, ce);
        let fb = HermitianFactor::new(gram_b.clone())?;
        let fe = HermitianFactor::new(gram_e.clone())?;
        // z = (P/σ²) P⁻¹ H W, i.e. Q W.
        let zb = fb.solve(&xb) * C64::new(cb, 0.0);
        let ze = fe.solve(&xe) * C64::new(ce, 0.0);

        grad.xi_blocks[k] = (he.adjoint() * &ze - hb.adjoint() * &zb) * two;

        let r2 = ch.g_i2_e[k].adjoint() * &ze - ch.g_i2_b[k].adjoint() * &zb;
        let r1 = ch.g_i1_e[k].adjoint() * &ze - ch.g_i1_b[k].adjoint() * &zb
            + ch.g_i1_i2[k].adjoint() * scale_rows(&r2, &phi2_conj);
        let s1 = &ch.g_a_i1[k] * w;
        let s2 = &ch.g_a_i2[k] * w + &ch.g_i1_i2[k] * scale_rows(&s1, &pt.phi1);
        grad.psi1 += diag_of_a_bh(&r1, &s1) * two;
        grad.psi2 += diag_of_a_bh(&r2, &s2) * two;

        if let Some(ws) = ws.as_deref_mut() {
            ws.q_b.push(fb.solve(&hb) * C64::new(cb, 0.0));
            ws.q_e.push(fe.solve(&he) * C64::new(ce, 0.0));
            let wwh = w * w.adjoint();
            ws.m_i1.push(&wwh * ch.g_a_i1[k].adjoint());
            ws.m_i2.push(&wwh * ch.g_a_i2[k].adjoint());
            ws.p_b.push(gram_b);
            ws.p_e.push(gram_e);
        }
    }
    Ok(grad)
}

/// Per-subcarrier and total secrecy rates in bits/s/Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct SecrecyRates {
    pub per_k: Vec<f64>,
    pub total: f64,
}

/// Clipped secrecy rates for physical (de-normalized) precoders.
pub fn secrecy_rates(
    ch: &ChannelSet,
    w_physical: &[CMat],
    phi1: &CVec,
    phi2: &CVec,
    cfg: &SystemConfig,
) -> Result<SecrecyRates> {
    let d = ch.dims();
    if w_physical.len() != d.n_sub {
        return Err(Error::dim("precoder count", d.n_sub, w_physical.len()));
    }
    ch.check_phases(phi1, phi2)?;
    let mut per_k = Vec::with_capacity(d.n_sub);
    for (k, w) in w_physical.iter().enumerate() {
        if w.nrows() != d.m_tx {
            return Err(Error::dim("precoder rows", d.m_tx, w.nrows()));
        }
        let (hb, he) = effective_unchecked(ch, phi1, phi2, k);
        let rb = HermitianFactor::new(regularized_gram(&(&hb * w), 1.0 / cfg.noise_bob_watts))?.ln_det();
        let re = HermitianFactor::new(regularized_gram(&(&he * w), 1.0 / cfg.noise_eve_watts))?.ln_det();
        per_k.push(((rb - re) / std::f64::consts::LN_2).max(0.0));
    }
    let total = per_k.iter().sum();
    Ok(SecrecyRates { per_k, total })
}

/// The normalized problem bound to one channel realization.
#[derive(Clone, Debug)]
pub struct SecrecyProblem {
    channels: ChannelSet,
    cfg: SystemConfig,
}

impl SecrecyProblem {
    /// Binds `channels` to the power/noise budget of `cfg`. The point shape
    /// follows the channel dimensions and `cfg.n_streams`.
    pub fn new(channels: ChannelSet, cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        channels.validate()?;
        Ok(SecrecyProblem { channels, cfg: cfg.clone() })
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn point_shape(&self) -> PointShape {
        let d = self.channels.dims();
        PointShape {
            m_tx: d.m_tx,
            n_streams: self.cfg.n_streams,
            n_sub: d.n_sub,
            n_irs1: d.n_irs1,
            n_irs2: d.n_irs2,
        }
    }

    pub fn objective(&self, pt: &IteratePoint) -> Result<f64> {
        objective(&self.channels, pt, &self.cfg)
    }

    pub fn euclidean_gradient(&self, pt: &IteratePoint) -> Result<(TangentVector, GradientWorkspace)> {
        euclidean_gradient(&self.channels, pt, &self.cfg)
    }

    /// `√P · Ŵ` split back into per-subcarrier precoders.
    pub fn physical_precoders(&self, pt: &IteratePoint) -> Vec<CMat> {
        let s = C64::new(self.cfg.power_watts.sqrt(), 0.0);
        pt.w_blocks.iter().map(|b| b * s).collect()
    }

    /// Secrecy rates of a normalized point on these channels.
    pub fn secrecy_rates_at(&self, pt: &IteratePoint) -> Result<SecrecyRates> {
        secrecy_rates(&self.channels, &self.physical_precoders(pt), &pt.phi1, &pt.phi2, &self.cfg)
    }
}

impl crate::optimizer::Objective for SecrecyProblem {
    fn value(&self, pt: &IteratePoint) -> Result<f64> {
        objective(&self.channels, pt, &self.cfg)
    }

    fn gradient(&self, pt: &IteratePoint) -> Result<TangentVector> {
        gradient_impl(&self.channels, pt, &self.cfg, None)
    }
}

/// `Re Tr(aᴴ b)` summed over blocks; exposed for directional-derivative checks.
pub fn blocks_inner(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| re_trace_inner(x, y)).sum()
}
