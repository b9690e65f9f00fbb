//! Geometry of the product manifold `S × T₁ × T₂`: the unit Frobenius
//! sphere over the stacked precoder blocks, and two complex-circle products
//! for the IRS phase vectors.
//!
//! The metric is the real trace inner product summed over components.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cn_matrix, re_trace_inner, re_vec_inner, unit_circle_vec};
use crate::{CMat, CVec, C64};

/// Dimensions of a point on the product manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PointShape {
    pub m_tx: usize,
    pub n_streams: usize,
    pub n_sub: usize,
    pub n_irs1: usize,
    pub n_irs2: usize,
}

impl PointShape {
    /// Number of real coordinates of the ambient space.
    pub fn real_dim(&self) -> usize {
        2 * (self.m_tx * self.n_streams * self.n_sub + self.n_irs1 + self.n_irs2)
    }
}

/// Which components of the product are free to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockMask {
    pub w: bool,
    pub phi1: bool,
    pub phi2: bool,
}

impl BlockMask {
    pub const ALL: BlockMask = BlockMask { w: true, phi1: true, phi2: true };
    pub const W_ONLY: BlockMask = BlockMask { w: true, phi1: false, phi2: false };
    pub const PHI1_ONLY: BlockMask = BlockMask { w: false, phi1: true, phi2: false };
    pub const PHI2_ONLY: BlockMask = BlockMask { w: false, phi1: false, phi2: true };
}

impl Default for BlockMask {
    fn default() -> Self {
        BlockMask::ALL
    }
}

/// A point `(Ŵ, φ₁, φ₂)`. `w_blocks[k]` is the normalized precoder of
/// subcarrier `k`; their column-wise concatenation is `Ŵ`.
///
/// The type also carries raw, possibly off-manifold points (e.g. before
/// [`retract`]); [`IteratePoint::constraint_residual`] measures feasibility.
#[derive(Clone, Debug, PartialEq)]
pub struct IteratePoint {
    pub w_blocks: Vec<CMat>,
    pub phi1: CVec,
    pub phi2: CVec,
}

/// A direction `(Ξ, ψ₁, ψ₂)` with the same shapes as [`IteratePoint`].
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub xi_blocks: Vec<CMat>,
    pub psi1: CVec,
    pub psi2: CVec,
}

fn blocks_shape(blocks: &[CMat], what: &str) -> Result<(usize, usize)> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidConfig(format!("{what}: at least one subcarrier block required")))?;
    let (m, s) = first.shape();
    for b in blocks {
        if b.nrows() != m {
            return Err(Error::dim(format!("{what} block rows"), m, b.nrows()));
        }
        if b.ncols() != s {
            return Err(Error::dim(format!("{what} block cols"), s, b.ncols()));
        }
    }
    Ok((m, s))
}

impl IteratePoint {
    pub fn new(w_blocks: Vec<CMat>, phi1: CVec, phi2: CVec) -> Result<Self> {
        blocks_shape(&w_blocks, "precoder")?;
        Ok(IteratePoint { w_blocks, phi1, phi2 })
    }

    /// Random feasible point: CN(0,1) precoder blocks normalized to the
    /// unit sphere, phases uniform on the unit circle.
    pub fn random<R: Rng + ?Sized>(shape: PointShape, rng: &mut R) -> Self {
        let mut w_blocks: Vec<CMat> = (0..shape.n_sub)
            .map(|_| cn_matrix(shape.m_tx, shape.n_streams, 1.0, rng))
            .collect();
        let norm = w_blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
        for b in &mut w_blocks {
            *b /= C64::new(norm, 0.0);
        }
        IteratePoint {
            w_blocks,
            phi1: unit_circle_vec(shape.n_irs1, rng),
            phi2: unit_circle_vec(shape.n_irs2, rng),
        }
    }

    pub fn shape(&self) -> PointShape {
        let (m_tx, n_streams) = self.w_blocks.first().map(|b| b.shape()).unwrap_or((0, 0));
        PointShape {
            m_tx,
            n_streams,
            n_sub: self.w_blocks.len(),
            n_irs1: self.phi1.len(),
            n_irs2: self.phi2.len(),
        }
    }

    /// `‖Ŵ‖_F²` summed over all blocks.
    pub fn w_norm_sq(&self) -> f64 {
        self.w_blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// The stacked `M × K·N_s` matrix `Ŵ`.
    pub fn stacked_w(&self) -> CMat {
        let shape = self.shape();
        let mut out = CMat::zeros(shape.m_tx, shape.n_sub * shape.n_streams);
        for (k, b) in self.w_blocks.iter().enumerate() {
            out.columns_mut(k * shape.n_streams, shape.n_streams).copy_from(b);
        }
        out
    }

    /// Largest violation of `‖Ŵ‖_F = 1` and `|φ| = 1`.
    pub fn constraint_residual(&self) -> f64 {
        let sphere = (self.w_norm_sq().sqrt() - 1.0).abs();
        self.phi1
            .iter()
            .chain(self.phi2.iter())
            .map(|z| (z.norm() - 1.0).abs())
            .fold(sphere, f64::max)
    }

    /// `self + t · dir` in the ambient space (not retracted).
    pub fn offset(&self, dir: &TangentVector, t: f64) -> Result<IteratePoint> {
        check_shapes(self, dir)?;
        let t = C64::new(t, 0.0);
        Ok(IteratePoint {
            w_blocks: self
                .w_blocks
                .iter()
                .zip(&dir.xi_blocks)
                .map(|(w, xi)| w + xi * t)
                .collect(),
            phi1: &self.phi1 + &dir.psi1 * t,
            phi2: &self.phi2 + &dir.psi2 * t,
        })
    }
}

impl TangentVector {
    pub fn zeros(shape: PointShape) -> Self {
        TangentVector {
            xi_blocks: vec![CMat::zeros(shape.m_tx, shape.n_streams); shape.n_sub],
            psi1: CVec::zeros(shape.n_irs1),
            psi2: CVec::zeros(shape.n_irs2),
        }
    }

    pub fn shape(&self) -> PointShape {
        let (m_tx, n_streams) = self.xi_blocks.first().map(|b| b.shape()).unwrap_or((0, 0));
        PointShape {
            m_tx,
            n_streams,
            n_sub: self.xi_blocks.len(),
            n_irs1: self.psi1.len(),
            n_irs2: self.psi2.len(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.xi_blocks.iter().map(|b| b.norm_squared()).sum::<f64>()
            + self.psi1.norm_squared()
            + self.psi2.norm_squared()
    }

    pub fn scaled(&self, a: f64) -> TangentVector {
        let a = C64::new(a, 0.0);
        TangentVector {
            xi_blocks: self.xi_blocks.iter().map(|b| b * a).collect(),
            psi1: &self.psi1 * a,
            psi2: &self.psi2 * a,
        }
    }

    /// Zero the components that `mask` holds fixed.
    pub fn masked(mut self, mask: BlockMask) -> TangentVector {
        if !mask.w {
            self.xi_blocks.iter_mut().for_each(|b| b.fill(C64::new(0.0, 0.0)));
        }
        if !mask.phi1 {
            self.psi1.fill(C64::new(0.0, 0.0));
        }
        if !mask.phi2 {
            self.psi2.fill(C64::new(0.0, 0.0));
        }
        self
    }
}

fn check_shapes(p: &IteratePoint, v: &TangentVector) -> Result<()> {
    let (a, b) = (p.shape(), v.shape());
    if a.n_sub != b.n_sub {
        return Err(Error::dim("subcarrier count", a.n_sub, b.n_sub));
    }
    blocks_shape(&v.xi_blocks, "direction")?;
    if a.m_tx != b.m_tx {
        return Err(Error::dim("precoder rows", a.m_tx, b.m_tx));
    }
    if a.n_streams != b.n_streams {
        return Err(Error::dim("precoder columns", a.n_streams, b.n_streams));
    }
    if a.n_irs1 != b.n_irs1 {
        return Err(Error::dim("phi1 length", a.n_irs1, b.n_irs1));
    }
    if a.n_irs2 != b.n_irs2 {
        return Err(Error::dim("phi2 length", a.n_irs2, b.n_irs2));
    }
    Ok(())
}

fn check_tangent_shapes(u: &TangentVector, v: &TangentVector) -> Result<()> {
    let (a, b) = (u.shape(), v.shape());
    if a != b {
        return Err(Error::dim("tangent real dimension", a.real_dim(), b.real_dim()));
    }
    Ok(())
}

fn project_circle(phi: &CVec, amb: &CVec) -> CVec {
    CVec::from_iterator(
        phi.len(),
        phi.iter().zip(amb.iter()).map(|(p, a)| {
            let radial = (a.conj() * p).re;
            a - p * radial
        }),
    )
}

/// Orthogonal projection of an ambient direction onto `T_base M`.
pub fn project_to_tangent(base: &IteratePoint, ambient: &TangentVector) -> Result<TangentVector> {
    check_shapes(base, ambient)?;
    let radial: f64 = base
        .w_blocks
        .iter()
        .zip(&ambient.xi_blocks)
        .map(|(w, a)| re_trace_inner(a, w))
        .sum();
    let r = C64::new(radial, 0.0);
    Ok(TangentVector {
        xi_blocks: ambient
            .xi_blocks
            .iter()
            .zip(&base.w_blocks)
            .map(|(a, w)| a - w * r)
            .collect(),
        psi1: project_circle(&base.phi1, &ambient.psi1),
        psi2: project_circle(&base.phi2, &ambient.psi2),
    })
}

fn normalize_phases(v: &CVec, what: &str) -> Result<CVec> {
    let mut out = v.clone();
    for (i, z) in out.iter_mut().enumerate() {
        let r = z.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::DegenerateRetraction(format!("{what}[{i}] has modulus {r}")));
        }
        *z /= r;
    }
    Ok(out)
}

/// Map an ambient point back onto the manifold: the precoder stack is
/// divided by its Frobenius norm and each phase by its modulus.
pub fn retract(raw: &IteratePoint) -> Result<IteratePoint> {
    retract_blocks(raw, raw, BlockMask::ALL)
}

/// Retraction that copies the components `mask` holds fixed from `base`
/// instead of renormalizing them.
pub fn retract_blocks(raw: &IteratePoint, base: &IteratePoint, mask: BlockMask) -> Result<IteratePoint> {
    let w_blocks = if mask.w {
        let norm = raw.w_norm_sq().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateRetraction(format!("precoder stack has norm {norm}")));
        }
        let inv = C64::new(1.0 / norm, 0.0);
        raw.w_blocks.iter().map(|b| b * inv).collect()
    } else {
        base.w_blocks.clone()
    };
    let phi1 = if mask.phi1 { normalize_phases(&raw.phi1, "phi1")? } else { base.phi1.clone() };
    let phi2 = if mask.phi2 { normalize_phases(&raw.phi2, "phi2")? } else { base.phi2.clone() };
    Ok(IteratePoint { w_blocks, phi1, phi2 })
}

/// Product metric: `Re Tr(UᴴV) + Re(u₁ᴴv₁) + Re(u₂ᴴv₂)`.
pub fn inner(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    check_tangent_shapes(u, v)?;
    let w: f64 = u
        .xi_blocks
        .iter()
        .zip(&v.xi_blocks)
        .map(|(a, b)| re_trace_inner(a, b))
        .sum();
    Ok(w + re_vec_inner(&u.psi1, &v.psi1) + re_vec_inner(&u.psi2, &v.psi2))
}

/// Largest deviation of `v` from `T_base M`: `|Re Tr(Ξᴴ Ŵ)|` and
/// `|Re(ψ* ⊙ φ)|` entrywise.
pub fn tangency_residual(base: &IteratePoint, v: &TangentVector) -> Result<f64> {
    check_shapes(base, v)?;
    let sphere: f64 = base
        .w_blocks
        .iter()
        .zip(&v.xi_blocks)
        .map(|(w, xi)| re_trace_inner(xi, w))
        .sum::<f64>()
        .abs();
    let circles = base
        .phi1
        .iter()
        .zip(v.psi1.iter())
        .chain(base.phi2.iter().zip(v.psi2.iter()))
        .map(|(p, s)| (s.conj() * p).re.abs());
    Ok(circles.fold(sphere, f64::max))
}
