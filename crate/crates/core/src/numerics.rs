//! Unitary 2-D transforms, complex SVD and the nuclear-norm proximal operator.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::seisdata::{Gather, Spectrum};

/// Maximum allowed imaginary residue after an inverse transform, relative to
/// the Frobenius norm of the result.
pub const IMAG_RESIDUE_TOL: f64 = 1e-6;

const SVD_MAX_SWEEPS: usize = 10_000;

/// Reusable forward/inverse plans for one grid shape.
///
/// Both directions are scaled by `1/sqrt(nt*nx)` so the pair is unitary.
pub struct Fft2 {
    nt: usize,
    nx: usize,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Fft2 {
    pub fn new(nt: usize, nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nt,
            nx,
            col_fwd: planner.plan_fft_forward(nt),
            col_inv: planner.plan_fft_inverse(nt),
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            scale: 1.0 / ((nt * nx) as f64).sqrt(),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.nt, self.nx)
    }

    pub fn forward_real(&self, a: &Array2<f64>) -> Array2<Complex64> {
        self.forward(&a.mapv(|v| Complex64::new(v, 0.0)))
    }

    pub fn forward(&self, a: &Array2<Complex64>) -> Array2<Complex64> {
        self.transform(a, &self.col_fwd, &self.row_fwd)
    }

    pub fn inverse(&self, a: &Array2<Complex64>) -> Array2<Complex64> {
        self.transform(a, &self.col_inv, &self.row_inv)
    }

    /// Inverse transform that must land on a real grid. The imaginary part is
    /// dropped after checking it is negligible.
    pub fn inverse_real(&self, a: &Array2<Complex64>) -> Result<Array2<f64>> {
        let full = self.inverse(a);
        let (re_sq, im_sq) = full
            .iter()
            .fold((0.0, 0.0), |(r, i), c| (r + c.re * c.re, i + c.im * c.im));
        let total = (re_sq + im_sq).sqrt();
        if im_sq.sqrt() > IMAG_RESIDUE_TOL * total {
            return Err(Error::Consistency(format!(
                "imaginary residue {:.3e} exceeds {:.0e} of norm {:.3e}",
                im_sq.sqrt(),
                IMAG_RESIDUE_TOL,
                total
            )));
        }
        Ok(full.mapv(|c| c.re))
    }

    fn transform(
        &self,
        a: &Array2<Complex64>,
        col_plan: &Arc<dyn Fft<f64>>,
        row_plan: &Arc<dyn Fft<f64>>,
    ) -> Array2<Complex64> {
        assert_eq!(a.dim(), (self.nt, self.nx), "grid shape does not match plan");
        let mut out = a.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nt];
        for mut col in out.columns_mut() {
            for (b, v) in buf.iter_mut().zip(col.iter()) {
                *b = *v;
            }
            col_plan.process(&mut buf);
            for (v, b) in col.iter_mut().zip(&buf) {
                *v = *b;
            }
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nx];
        for mut row in out.rows_mut() {
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = *v;
            }
            row_plan.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = *b * self.scale;
            }
        }
        out
    }
}

pub fn fft2_unitary(g: &Gather) -> Spectrum {
    let (nt, nx) = g.dim();
    Spectrum::new(Fft2::new(nt, nx).forward_real(g.samples()))
        .expect("transform of finite data is finite")
}

/// Inverse unitary transform of a spectrum that should come from real data.
pub fn ifft2_unitary(s: &Spectrum) -> Result<Array2<f64>> {
    let (nt, nx) = s.dim();
    Fft2::new(nt, nx).inverse_real(s.values())
}

/// `A = U diag(s) V^H`, singular values non-increasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m x p` with orthonormal columns, `p = min(m, n)`.
    pub left_vectors: Array2<Complex64>,
    pub singular_values: Vec<f64>,
    /// `n x p` with orthonormal columns.
    pub right_vectors: Array2<Complex64>,
}

impl SvdResult {
    /// `U diag(w) V^H` for arbitrary weights `w` (one per singular triple).
    pub fn recompose_with(&self, weights: &[f64]) -> Array2<Complex64> {
        let m = self.left_vectors.nrows();
        let n = self.right_vectors.nrows();
        let mut out = Array2::zeros((m, n));
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let u = self.left_vectors.column(k);
            let v = self.right_vectors.column(k);
            for i in 0..m {
                let ui = u[i] * w;
                for j in 0..n {
                    out[[i, j]] += ui * v[j].conj();
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> Array2<Complex64> {
        self.recompose_with(&self.singular_values)
    }
}

pub fn svd(a: &Array2<Complex64>) -> Result<SvdResult> {
    check_finite(a)?;
    let (m, n) = a.dim();
    let mat = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let dec = nalgebra::SVD::try_new(mat, true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical(format!("SVD of {m}x{n} matrix did not converge")))?;
    let u = dec.u.expect("left vectors requested");
    let v_t = dec.v_t.expect("right vectors requested");
    let p = dec.singular_values.len();

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| dec.singular_values[y].total_cmp(&dec.singular_values[x]));

    let singular_values = order.iter().map(|&k| dec.singular_values[k].max(0.0)).collect();
    let left_vectors = Array2::from_shape_fn((m, p), |(i, k)| u[(i, order[k])]);
    let right_vectors = Array2::from_shape_fn((n, p), |(j, k)| v_t[(order[k], j)].conj());
    Ok(SvdResult {
        left_vectors,
        singular_values,
        right_vectors,
    })
}

pub fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    check_finite(a)?;
    let (m, n) = a.dim();
    let mat = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let dec = nalgebra::SVD::try_new(mat, false, false, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical(format!("SVD of {m}x{n} matrix did not converge")))?;
    let mut s: Vec<f64> = dec.singular_values.iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Singular value thresholding: the proximal map of `tau * ||.||_*`.
pub fn svt(a: &Array2<Complex64>, tau: f64) -> Result<Array2<Complex64>> {
    svt_capped(a, tau, None)
}

/// [`svt`] keeping at most `rank_cap` components when a cap is given.
pub fn svt_capped(
    a: &Array2<Complex64>,
    tau: f64,
    rank_cap: Option<usize>,
) -> Result<Array2<Complex64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Argument(format!("SVT threshold must be >= 0, got {tau}")));
    }
    let dec = svd(a)?;
    let cap = rank_cap.unwrap_or(usize::MAX);
    let shrunk: Vec<f64> = dec
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| if k < cap { (s - tau).max(0.0) } else { 0.0 })
        .collect();
    Ok(dec.recompose_with(&shrunk))
}

pub fn nuclear_norm(a: &Array2<Complex64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn frobenius_c(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(a: &Array2<Complex64>) -> Result<()> {
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    Ok(())
}

/// Magnitude spectrum over non-negative frequencies and centred wavenumbers.
#[derive(Debug, Clone)]
pub struct FkSpectrum {
    /// `(nt/2 + 1) x nx`; row = frequency, column = wavenumber.
    pub magnitudes: Array2<f64>,
    /// Hz, `0 ..= 1/(2 dt)`.
    pub freq_axis: Vec<f64>,
    /// cycles/m, ascending, zero at column `nx/2`.
    pub wavenumber_axis: Vec<f64>,
}

impl FkSpectrum {
    /// Column of wavenumber zero.
    pub fn k_zero_col(&self) -> usize {
        self.wavenumber_axis.len() / 2
    }
}

pub fn fk_spectrum(g: &Gather) -> FkSpectrum {
    let (nt, nx) = g.dim();
    let spec = Fft2::new(nt, nx).forward_real(g.samples());
    let nf = nt / 2 + 1;
    let half = nx / 2;
    let magnitudes = Array2::from_shape_fn((nf, nx), |(i, m)| {
        let j = (m + nx - half) % nx;
        spec[[i, j]].norm()
    });
    let freq_axis = (0..nf).map(|i| i as f64 / (nt as f64 * g.dt())).collect();
    let wavenumber_axis = (0..nx)
        .map(|m| (m as f64 - half as f64) / (nx as f64 * g.dx()))
        .collect();
    FkSpectrum {
        magnitudes,
        freq_axis,
        wavenumber_axis,
    }
}
