//! Synthetic shot gathers with known clean reflections, ground roll and noise.
//!
//! The contaminated record is `Y = clean + G + N` where `G` and `N` are the
//! ground roll and white noise after scaling to the requested input SNR.

use std::f64::consts::PI;

use log::warn;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{box_mean, quantile};
use crate::seisdata::{Gather, Mask};

/// Half-width of the boxcar used for the ground-truth mask (11 x 11 window).
pub const TRUTH_MASK_HALF_WIN: usize = 5;
pub const DEFAULT_TRUTH_QUANTILE: f64 = 0.55;

/// Offset at which geometric spreading has reduced ground-roll amplitude by `1/sqrt(2)`.
const SPREADING_REF_M: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    /// Zero-offset two-way time (s).
    pub t0: f64,
    /// Stacking velocity (m/s).
    pub v: f64,
    pub amplitude: f64,
    /// Ricker peak frequency (Hz).
    pub f_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundRollMode {
    /// Apparent velocity of the onset (m/s).
    pub v_app: f64,
    pub f_low: f64,
    pub f_high: f64,
    pub amplitude: f64,
    pub origin_trace: usize,
    /// Wavetrain length at zero offset (s).
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Extra wavetrain length per metre of offset (s/m).
    #[serde(default = "default_dispersion")]
    pub dispersion: f64,
}

fn default_duration() -> f64 {
    0.25
}

fn default_dispersion() -> f64 {
    2.0e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub reflections: Vec<Reflection>,
    pub groundroll: Vec<GroundRollMode>,
    /// Noise std relative to the clean peak amplitude.
    pub noise_level: f64,
    pub target_snr_db: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if self.nt < 2 || self.nx < 2 {
            return bad(format!("grid must be at least 2x2, got {}x{}", self.nt, self.nx));
        }
        if !(self.dt > 0.0) || !(self.dx > 0.0) {
            return bad("dt and dx must be positive".into());
        }
        let nyq = self.nyquist();
        for (k, r) in self.reflections.iter().enumerate() {
            if !(r.v > 0.0) {
                return bad(format!("reflection {k}: velocity must be positive"));
            }
            if !(r.t0 >= 0.0) {
                return bad(format!("reflection {k}: t0 must be >= 0"));
            }
            if !(r.f_peak > 0.0 && r.f_peak < nyq) {
                return bad(format!("reflection {k}: f_peak must be in (0, {nyq})"));
            }
        }
        for (k, m) in self.groundroll.iter().enumerate() {
            if !(m.v_app > 0.0) {
                return bad(format!("ground-roll mode {k}: v_app must be positive"));
            }
            if !(m.f_low > 0.0 && m.f_low < m.f_high && m.f_high < nyq) {
                return bad(format!(
                    "ground-roll mode {k}: need 0 < f_low < f_high < {nyq}"
                ));
            }
            if m.origin_trace >= self.nx {
                return bad(format!("ground-roll mode {k}: origin_trace outside gather"));
            }
            if !(m.duration > 0.0) || !(m.dispersion >= 0.0) {
                return bad(format!("ground-roll mode {k}: bad duration/dispersion"));
            }
        }
        if !(self.noise_level >= 0.0) {
            return bad("noise_level must be >= 0".into());
        }
        if !self.target_snr_db.is_finite() {
            return bad("target_snr_db must be finite".into());
        }
        Ok(())
    }
}

fn ricker_at(f: f64, t: f64) -> f64 {
    let a = (PI * f * t).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

/// Ricker wavelet sampled on `[-half_len*dt, +half_len*dt]`.
pub fn ricker(f_peak: f64, dt: f64, half_len: usize) -> Result<Vec<f64>> {
    if !(f_peak > 0.0 && f_peak < 0.5 / dt) {
        return Err(Error::Argument(format!(
            "Ricker peak frequency {f_peak} Hz must lie in (0, {}) Hz",
            0.5 / dt
        )));
    }
    let h = half_len as isize;
    Ok((-h..=h).map(|k| ricker_at(f_peak, k as f64 * dt)).collect())
}

/// Hyperbolic reflections `t(x) = sqrt(t0^2 + (x/v)^2)` with offset measured from trace 0.
pub fn make_reflections(cfg: &SynthConfig) -> Result<Gather> {
    cfg.validate()?;
    let window = cfg.nt as f64 * cfg.dt;
    let mut out = Array2::zeros((cfg.nt, cfg.nx));
    for (k, r) in cfg.reflections.iter().enumerate() {
        if r.t0 >= window {
            warn!("reflection {k} at t0={} s lies outside the {window} s window; skipped", r.t0);
            continue;
        }
        for j in 0..cfg.nx {
            let x = j as f64 * cfg.dx;
            let tx = (r.t0 * r.t0 + (x / r.v).powi(2)).sqrt();
            for i in 0..cfg.nt {
                out[[i, j]] += r.amplitude * ricker_at(r.f_peak, i as f64 * cfg.dt - tx);
            }
        }
    }
    Gather::new(out, cfg.dt, cfg.dx)
}

/// Linear-moveout dispersive ground-roll fans, one per mode.
///
/// On each trace the wavetrain starts at `|x - x_origin| / v_app` and sweeps
/// linearly from an upper frequency down to `f_low`. The upper frequency falls
/// from `f_high` at the apex to the band centre at the far offset, and the
/// wavetrain lengthens with offset.
pub fn make_groundroll(cfg: &SynthConfig) -> Result<Gather> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x67_72_6f_6c_6c);
    let mut out = Array2::zeros((cfg.nt, cfg.nx));
    for mode in &cfg.groundroll {
        let phase0 = rng.random_range(0.0..2.0 * PI);
        if mode.amplitude == 0.0 {
            continue;
        }
        let far = (0..cfg.nx)
            .map(|j| (j as f64 - mode.origin_trace as f64).abs() * cfg.dx)
            .fold(0.0, f64::max);
        for j in 0..cfg.nx {
            let d = (j as f64 - mode.origin_trace as f64).abs() * cfg.dx;
            let onset = d / mode.v_app;
            let len = mode.duration + mode.dispersion * d;
            let rel = if far > 0.0 { d / far } else { 0.0 };
            let f_top = mode.f_high - 0.5 * (mode.f_high - mode.f_low) * rel;
            let sweep = mode.f_low - f_top;
            let amp = mode.amplitude / (1.0 + d / SPREADING_REF_M).sqrt();
            for i in 0..cfg.nt {
                let tau = i as f64 * cfg.dt - onset;
                if tau < 0.0 || tau > len {
                    continue;
                }
                let env = (PI * tau / len).sin().powi(2);
                let phase = 2.0 * PI * (f_top * tau + sweep * tau * tau / (2.0 * len)) + phase0;
                out[[i, j]] += amp * env * phase.sin();
            }
        }
    }
    Gather::new(out, cfg.dt, cfg.dx)
}

/// Returns `clean + scale * contaminant` with `scale` chosen so the
/// contaminant sits `target_snr_db` below the clean energy.
pub fn mix_to_snr(clean: &Gather, contaminant: &Gather, target_snr_db: f64) -> Result<(Gather, f64)> {
    let scale = snr_scale(clean, contaminant, target_snr_db)?;
    let mixed = clean.samples() + &contaminant.samples().mapv(|v| v * scale);
    Ok((clean.with_samples(mixed)?, scale))
}

fn snr_scale(clean: &Gather, contaminant: &Gather, target_snr_db: f64) -> Result<f64> {
    if clean.dim() != contaminant.dim() {
        return Err(Error::Argument("clean and contaminant shapes differ".into()));
    }
    if !target_snr_db.is_finite() {
        return Err(Error::Argument(format!("target SNR must be finite, got {target_snr_db}")));
    }
    let ek = contaminant.energy();
    if ek == 0.0 {
        return Err(Error::Degenerate("contaminant has zero energy".into()));
    }
    Ok((clean.energy() / (ek * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// Support where the 11x11-smoothed ground-roll energy exceeds its own
/// `energy_quantile`.
pub fn ground_truth_mask(groundroll: &Gather, energy_quantile: f64) -> Result<Mask> {
    if !(energy_quantile > 0.0 && energy_quantile < 1.0) {
        return Err(Error::Argument(format!(
            "energy quantile must be in (0, 1), got {energy_quantile}"
        )));
    }
    let (nt, nx) = groundroll.dim();
    let energy = box_mean(
        &groundroll.samples().mapv(|v| v * v),
        TRUTH_MASK_HALF_WIN,
        TRUTH_MASK_HALF_WIN,
    );
    let threshold = quantile(energy.iter().copied(), energy_quantile);
    Ok(Mask::from_fn(nt, nx, |i, j| energy[[i, j]] > threshold))
}

/// Everything produced for one synthetic experiment.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub clean: Gather,
    /// Scaled ground roll `G`.
    pub groundroll: Gather,
    /// Scaled noise `N`.
    pub noise: Gather,
    /// `clean + groundroll + noise`.
    pub noisy: Gather,
    pub mask: Mask,
    pub contaminant_scale: f64,
}

impl SynthOutput {
    pub fn input_snr_db(&self) -> f64 {
        let resid = self.noisy.samples() - self.clean.samples();
        10.0 * (self.clean.energy() / resid.iter().map(|v| v * v).sum::<f64>()).log10()
    }
}

pub fn synthesize(cfg: &SynthConfig) -> Result<SynthOutput> {
    let clean = make_reflections(cfg)?;
    if clean.max_abs() == 0.0 {
        return Err(Error::Degenerate("no signal content".into()));
    }
    let gr = make_groundroll(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = cfg.noise_level * clean.max_abs();
    let noise = if std > 0.0 {
        let dist = Normal::new(0.0, std).map_err(|e| Error::Argument(e.to_string()))?;
        Array2::from_shape_simple_fn((cfg.nt, cfg.nx), || dist.sample(&mut rng))
    } else {
        Array2::zeros((cfg.nt, cfg.nx))
    };

    let contaminant = gr.with_samples(gr.samples() + &noise)?;
    let scale = snr_scale(&clean, &contaminant, cfg.target_snr_db)?;
    let groundroll = gr.with_samples(gr.samples().mapv(|v| v * scale))?;
    let noise = gr.with_samples(noise.mapv(|v| v * scale))?;
    let noisy = clean.with_samples(clean.samples() + groundroll.samples() + noise.samples())?;
    let mask = ground_truth_mask(&groundroll, DEFAULT_TRUTH_QUANTILE)?;
    Ok(SynthOutput {
        clean,
        groundroll,
        noise,
        noisy,
        mask,
        contaminant_scale: scale,
    })
}
