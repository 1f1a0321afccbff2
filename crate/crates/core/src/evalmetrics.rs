//! Separation quality metrics.

use std::io::Write;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::filters::{box_sum, gaussian_smooth};
use crate::maskgen::ResponseMap;
use crate::seisdata::Gather;

/// Reported instead of +inf when the estimate is exact.
pub const SNR_CAP_DB: f64 = 300.0;

pub const METRICS_HEADER: &str = "method,snr_db,sim_mean,sim_var";

fn same_shape(a: &Gather, b: &Gather) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `10 log10(||clean||^2 / ||clean - estimate||^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(clean: &Gather, estimate: &Gather) -> Result<f64> {
    same_shape(clean, estimate)?;
    let signal = clean.energy();
    if signal == 0.0 {
        return Err(Error::Degenerate("clean reference has zero energy".into()));
    }
    let resid = Zip::from(clean.samples())
        .and(estimate.samples())
        .fold(0.0, |acc, &c, &e| acc + (c - e).powi(2));
    if resid == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / resid).log10()).min(SNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub win_t: usize,
    pub win_x: usize,
    pub smooth_sigma: f64,
    pub eps_stab: f64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            win_t: 10,
            win_x: 5,
            smooth_sigma: 3.0,
            eps_stab: 1e-8,
        }
    }
}

/// Windowed normalised cross-correlation magnitude, Gaussian-smoothed.
pub fn local_similarity(a: &Gather, b: &Gather, p: &SimilarityParams) -> Result<ResponseMap> {
    same_shape(a, b)?;
    if p.win_t < 1 || p.win_x < 1 || !(p.eps_stab > 0.0) {
        return Err(Error::Argument("similarity windows must be >= 1 and eps_stab > 0".into()));
    }
    let (sa, sb) = (a.samples(), b.samples());
    let ab = box_sum(&(sa * sb), p.win_t, p.win_x);
    let aa = box_sum(&sa.mapv(|v| v * v), p.win_t, p.win_x);
    let bb = box_sum(&sb.mapv(|v| v * v), p.win_t, p.win_x);
    let mut raw = Array2::zeros(a.dim());
    Zip::from(&mut raw)
        .and(&ab)
        .and(&aa)
        .and(&bb)
        .for_each(|r, &x, &ea, &eb| {
            let denom = ((ea + p.eps_stab) * (eb + p.eps_stab)).sqrt();
            *r = (x.abs() / denom).min(1.0);
        });
    let smoothed = gaussian_smooth(&raw, p.smooth_sigma).mapv(|v| v.clamp(0.0, 1.0));
    ResponseMap::new(smoothed)
}

/// Mean and population variance over every sample of the map.
pub fn similarity_stats(map: &ResponseMap) -> (f64, f64) {
    let n = map.values().len() as f64;
    let mean = map.values().sum() / n;
    let var = map.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub snr_db: f64,
    pub sim_mean: f64,
    pub sim_var: f64,
}

impl MetricsRow {
    pub fn evaluate(
        method: &str,
        clean: &Gather,
        x: &Gather,
        g: &Gather,
        p: &SimilarityParams,
    ) -> Result<Self> {
        same_shape(clean, x)?;
        same_shape(clean, g)?;
        let snr = snr_db(clean, x)?;
        let (sim_mean, sim_var) = similarity_stats(&local_similarity(x, g, p)?);
        Ok(Self {
            method: method.to_string(),
            snr_db: snr,
            sim_mean,
            sim_var,
        })
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6}",
            self.method, self.snr_db, self.sim_mean, self.sim_var
        )
    }
}
