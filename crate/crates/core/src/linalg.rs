use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::{CMat, CVec, C64};

/// `Re{Tr(aᴴ b)}` for equally shaped matrices.
pub(crate) fn re_trace_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub(crate) fn re_vec_inner(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `m · diag(v)`.
pub(crate) fn scale_columns(m: &CMat, v: &CVec) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= v[j];
    }
    out
}

/// `diag(v) · m`.
pub(crate) fn scale_rows(m: &CMat, v: &CVec) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= v[i];
    }
    out
}

/// Row-wise `Σ_s a[n,s]·conj(b[n,s])`, i.e. `diag(a bᴴ)`.
pub(crate) fn diag_of_a_bh(a: &CMat, b: &CMat) -> CVec {
    CVec::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|n| {
            a.row(n)
                .iter()
                .zip(b.row(n).iter())
                .map(|(x, y)| x * y.conj())
                .sum::<C64>()
        }),
    )
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub(crate) struct HermitianFactor(Cholesky<C64, nalgebra::Dyn>);

impl HermitianFactor {
    pub(crate) fn new(m: CMat) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("non-finite entry in Gram matrix".into()));
        }
        Cholesky::new(m)
            .map(HermitianFactor)
            .ok_or_else(|| Error::Numeric("Gram matrix is not positive definite".into()))
    }

    pub(crate) fn ln_det(&self) -> f64 {
        let l = self.0.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
    }

    pub(crate) fn solve(&self, b: &CMat) -> CMat {
        self.0.solve(b)
    }
}

/// `I + c · x xᴴ`.
pub(crate) fn regularized_gram(x: &CMat, c: f64) -> CMat {
    let n = x.nrows();
    let mut g = x * x.adjoint();
    g *= C64::new(c, 0.0);
    for i in 0..n {
        g[(i, i)] += C64::new(1.0, 0.0);
    }
    // Force exact Hermitian symmetry.
    for i in 0..n {
        g[(i, i)].im = 0.0;
        for j in 0..i {
            let avg = (g[(i, j)] + g[(j, i)].conj()) * 0.5;
            g[(i, j)] = avg;
            g[(j, i)] = avg.conj();
        }
    }
    g
}

/// One CN(0, 1) sample.
pub(crate) fn cn01<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. CN(0, scale²) entries, filled column-major.
pub(crate) fn cn_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn01(rng) * scale)
}

pub(crate) fn unit_circle_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        C64::from_polar(1.0, theta)
    })
}

pub(crate) fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
