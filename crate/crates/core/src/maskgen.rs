//! Heuristic ground-roll masks and mask utilities.
//!
//! The response at each sample is the share of local energy that sits below
//! `f_cut`. Ground roll is low-frequency, so its fan lights up; reflections
//! carry most of their energy above the cut and stay dark.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::filters::box_sum;
use crate::seisdata::{Gather, Mask};

/// Per-sample values in `[0, 1]` aligned with a gather.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    values: Array2<f64>,
}

impl ResponseMap {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::Argument(format!("response value {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Window energy floor relative to the mean window energy; quiet windows
/// read as background instead of amplifying filter ringing.
pub const FLOOR_FRAC: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicParams {
    /// Upper edge of the ground-roll band (Hz).
    pub f_cut: f64,
    /// Energy window half-sizes (samples, traces).
    pub win_t: usize,
    pub win_x: usize,
    pub eta: f64,
    pub open_r: usize,
    pub close_r: usize,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            f_cut: 15.0,
            win_t: 15,
            win_x: 5,
            eta: 0.5,
            open_r: 1,
            close_r: 2,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        let nyq = 0.5 / dt;
        if !(self.f_cut > 0.0 && self.f_cut < nyq) {
            return Err(Error::Argument(format!("f_cut must be in (0, {nyq}) Hz")));
        }
        if self.win_t < 1 || self.win_x < 1 {
            return Err(Error::Argument("window half-sizes must be >= 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Argument(format!("eta must be in (0, 1), got {}", self.eta)));
        }
        Ok(())
    }
}

/// One RBJ low-pass biquad section, direct form II transposed.
#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 - cos) / 2.0 / a0;
        Self {
            b: [b0, (1.0 - cos) / a0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[0] * y + s2;
            s2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }
}

/// Fourth-order Butterworth low-pass applied forward and backward.
fn zero_phase_lowpass(trace: &[f64], fc: f64, fs: f64) -> Vec<f64> {
    let sections = [
        Biquad::lowpass(fc, fs, 0.541_196_100_146_197),
        Biquad::lowpass(fc, fs, 1.306_562_964_876_376_5),
    ];
    let n = trace.len();
    let pad = (n - 1).min(24);
    // odd extension at both ends keeps start-up transients off the trace
    let mut buf = Vec::with_capacity(n + 2 * pad);
    buf.extend((1..=pad).rev().map(|k| 2.0 * trace[0] - trace[k]));
    buf.extend_from_slice(trace);
    buf.extend((1..=pad).map(|k| 2.0 * trace[n - 1] - trace[n - 1 - k]));

    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();
    buf[pad..pad + n].to_vec()
}

pub fn heuristic_response(g: &Gather, p: &HeuristicParams) -> Result<ResponseMap> {
    p.validate(g.dt())?;
    let (nt, nx) = g.dim();
    let fs = 1.0 / g.dt();
    let mut low = Array2::zeros((nt, nx));
    for j in 0..nx {
        let trace: Vec<f64> = g.samples().column(j).to_vec();
        let filtered = zero_phase_lowpass(&trace, p.f_cut, fs);
        for (i, v) in filtered.into_iter().enumerate() {
            low[[i, j]] = v;
        }
    }
    let e_low = box_sum(&low.mapv(|v| v * v), p.win_t, p.win_x);
    let e_tot = box_sum(&g.samples().mapv(|v| v * v), p.win_t, p.win_x);
    let floor = FLOOR_FRAC * e_tot.mean().unwrap_or(0.0) + f64::MIN_POSITIVE;
    let mut values = Array2::zeros((nt, nx));
    Zip::from(&mut values)
        .and(&e_low)
        .and(&e_tot)
        .for_each(|r, &lo, &tot| *r = (lo / (tot + floor)).clamp(0.0, 1.0));
    ResponseMap::new(values)
}

/// Strict threshold: a sample is set iff its response exceeds `eta`.
pub fn binarize(r: &ResponseMap, eta: f64) -> Mask {
    let (nt, nx) = r.dim();
    Mask::from_fn(nt, nx, |i, j| r.values[[i, j]] > eta)
}

fn dilate(m: &Array2<u8>, r: usize) -> Array2<u8> {
    let (n, k) = m.dim();
    Array2::from_shape_fn((n, k), |(i, j)| {
        let hit = (i.saturating_sub(r)..(i + r + 1).min(n))
            .any(|ii| (j.saturating_sub(r)..(j + r + 1).min(k)).any(|jj| m[[ii, jj]] == 1));
        hit as u8
    })
}

// Out-of-grid pixels are ignored by both operators, which keeps them adjoint.
fn erode(m: &Array2<u8>, r: usize) -> Array2<u8> {
    let (n, k) = m.dim();
    Array2::from_shape_fn((n, k), |(i, j)| {
        let all = (i.saturating_sub(r)..(i + r + 1).min(n))
            .all(|ii| (j.saturating_sub(r)..(j + r + 1).min(k)).all(|jj| m[[ii, jj]] == 1));
        all as u8
    })
}

/// Opening with a `(2*open_r+1)` square, then closing with a `(2*close_r+1)` square.
pub fn morph_clean(m: &Mask, open_r: usize, close_r: usize) -> Mask {
    let mut bits = m.bits().clone();
    if open_r > 0 {
        bits = dilate(&erode(&bits, open_r), open_r);
    }
    if close_r > 0 {
        bits = erode(&dilate(&bits, close_r), close_r);
    }
    Mask::new(bits).expect("morphology keeps values binary")
}

pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!(
            "mask shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    Zip::from(a.bits()).and(b.bits()).for_each(|&x, &y| {
        inter += (x & y) as usize;
        union += (x | y) as usize;
    });
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Response, threshold and morphological cleanup in one call.
pub fn heuristic_mask(g: &Gather, p: &HeuristicParams) -> Result<Mask> {
    let r = heuristic_response(g, p)?;
    Ok(morph_clean(&binarize(&r, p.eta), p.open_r, p.close_r))
}
