//! Reference separations: F-K fan rejection and mask-guided local SVD.
//!
//! Both return `(X, G)` with `X + G = Y`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::numerics::Fft2;
use crate::seisdata::{Gather, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkFilterParams {
    /// Apparent velocities below this are rejected (m/s).
    pub v_reject: f64,
    /// Upper frequency of the reject fan (Hz).
    pub f_max: f64,
    /// Cosine taper width as a fraction of the fan edge.
    pub taper_frac: f64,
}

impl Default for FkFilterParams {
    fn default() -> Self {
        Self {
            v_reject: 800.0,
            f_max: 20.0,
            taper_frac: 0.2,
        }
    }
}

impl FkFilterParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        let nyq = 0.5 / dt;
        if !(self.v_reject > 0.0) {
            return Err(Error::Argument("v_reject must be positive".into()));
        }
        if !(self.f_max > 0.0 && self.f_max < nyq) {
            return Err(Error::Argument(format!("f_max must be in (0, {nyq}) Hz")));
        }
        if !(0.0..1.0).contains(&self.taper_frac) {
            return Err(Error::Argument("taper_frac must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// 1 inside `value <= edge`, 0 beyond `edge * (1 + taper)`, raised cosine between.
fn edge_weight(value: f64, edge: f64, taper: f64) -> f64 {
    if value <= edge {
        return 1.0;
    }
    let width = edge * taper;
    if width <= 0.0 || value >= edge + width {
        return 0.0;
    }
    0.5 * (1.0 + (PI * (value - edge) / width).cos())
}

/// Reject weight for a signed DFT bin pair.
fn fan_weight(f: f64, k: f64, p: &FkFilterParams) -> f64 {
    let (f, k) = (f.abs(), k.abs());
    if k == 0.0 {
        // infinite apparent velocity, including DC
        return 0.0;
    }
    let velocity = f / k;
    edge_weight(velocity, p.v_reject, p.taper_frac) * edge_weight(f, p.f_max, p.taper_frac)
}

fn signed_bin(idx: usize, n: usize) -> f64 {
    if idx <= n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    }
}

pub fn fk_fan_filter(y: &Gather, p: &FkFilterParams) -> Result<(Gather, Gather)> {
    p.validate(y.dt())?;
    let (nt, nx) = y.dim();
    let fft = Fft2::new(nt, nx);
    let mut spec = fft.forward_real(y.samples());
    let weights = fk_reject_weights(y, p);
    spec.zip_mut_with(&weights, |v, &w| *v *= w);
    let g = fft.inverse_real(&spec)?;
    let x = y.samples() - &g;
    Ok((y.with_samples(x)?, y.with_samples(g)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSvdParams {
    pub win_t: usize,
    pub win_x: usize,
    /// Window overlap in samples along time; traces overlap by the same fraction.
    pub overlap: usize,
    /// Leading singular components moved into `G` per active window.
    pub rank: usize,
}

impl Default for LocalSvdParams {
    fn default() -> Self {
        Self {
            win_t: 64,
            win_x: 16,
            overlap: 32,
            rank: 2,
        }
    }
}

impl LocalSvdParams {
    pub fn validate(&self, nt: usize, nx: usize) -> Result<()> {
        if self.win_t > nt || self.win_x > nx {
            return Err(Error::Argument(format!(
                "window {}x{} larger than gather {nt}x{nx}",
                self.win_t, self.win_x
            )));
        }
        if self.win_t < 2 || self.win_x < 2 {
            return Err(Error::Argument("windows must be at least 2x2".into()));
        }
        if self.overlap >= self.win_t {
            return Err(Error::Argument("overlap must be smaller than win_t".into()));
        }
        if self.rank < 1 || self.rank >= self.win_t.min(self.win_x) {
            return Err(Error::Argument(format!(
                "rank must be in [1, {})",
                self.win_t.min(self.win_x)
            )));
        }
        Ok(())
    }

    fn trace_overlap(&self) -> usize {
        (self.overlap * self.win_x) / self.win_t
    }
}

/// Window start positions covering `0..n` with the given step; the last
/// window is pinned to the end.
fn window_starts(n: usize, win: usize, step: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut starts: Vec<usize> = (0..=n - win).step_by(step).collect();
    if *starts.last().unwrap() != n - win {
        starts.push(n - win);
    }
    starts
}

/// Strictly positive triangular taper.
fn triangle(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 - ((2.0 * (i as f64 + 0.5) / n as f64) - 1.0).abs())
        .collect()
}

pub fn local_svd_filter(y: &Gather, m: &Mask, p: &LocalSvdParams) -> Result<(Gather, Gather)> {
    let (nt, nx) = y.dim();
    p.validate(nt, nx)?;
    m.check_shape((nt, nx))?;
    let t_starts = window_starts(nt, p.win_t, p.win_t - p.overlap);
    let x_starts = window_starts(nx, p.win_x, p.win_x - p.trace_overlap());
    let wt = triangle(p.win_t);
    let wx = triangle(p.win_x);

    let mut acc = Array2::<f64>::zeros((nt, nx));
    let mut wsum = Array2::<f64>::zeros((nt, nx));
    let mask = m.to_weights();
    for &t0 in &t_starts {
        for &x0 in &x_starts {
            let block = s![t0..t0 + p.win_t, x0..x0 + p.win_x];
            let coverage = mask.slice(block).mean().unwrap_or(0.0);
            let patch = y.samples().slice(block);
            let coherent = if coverage > 0.5 {
                Some(leading_components(&patch.to_owned(), p.rank)?)
            } else {
                None
            };
            for a in 0..p.win_t {
                for b in 0..p.win_x {
                    let w = wt[a] * wx[b];
                    wsum[[t0 + a, x0 + b]] += w;
                    if let Some(c) = &coherent {
                        acc[[t0 + a, x0 + b]] += w * c[[a, b]];
                    }
                }
            }
        }
    }
    let g = &acc / &wsum;
    let x = y.samples() - &g;
    Ok((y.with_samples(x)?, y.with_samples(g)?))
}

/// Rank-`r` truncation of a real patch.
fn leading_components(patch: &Array2<f64>, rank: usize) -> Result<Array2<f64>> {
    let (n, k) = patch.dim();
    let mat = DMatrix::from_fn(n, k, |i, j| patch[[i, j]]);
    let dec = nalgebra::SVD::try_new(mat, true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("local SVD did not converge".into()))?;
    let u = dec.u.expect("requested");
    let v_t = dec.v_t.expect("requested");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let mut out = Array2::zeros((n, k));
    for &c in order.iter().take(rank) {
        let sv = dec.singular_values[c];
        for i in 0..n {
            for j in 0..k {
                out[[i, j]] += u[(i, c)] * sv * v_t[(c, j)];
            }
        }
    }
    Ok(out)
}

/// Reject weight per DFT bin (unshifted layout); 1 inside the fan.
pub fn fk_reject_weights(y: &Gather, p: &FkFilterParams) -> Array2<f64> {
    let (nt, nx) = y.dim();
    Array2::from_shape_fn((nt, nx), |(i, j)| {
        let f = signed_bin(i, nt) / (nt as f64 * y.dt());
        let k = signed_bin(j, nx) / (nx as f64 * y.dx());
        fan_weight(f, k, p)
    })
}
