//! 8-bit PGM rendering of gathers, masks, maps and f-k spectra.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::filters::quantile;
use crate::numerics::fk_spectrum;
use crate::seisdata::{Gather, Mask};

/// Dynamic range shown in f-k renders.
pub const FK_FLOOR_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// Percentile-clipped min..max to black..white.
    Gray,
    /// Symmetric about zero: zero is mid-gray.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Clip percentile in (50, 100].
    pub gain: f64,
    pub colormap: Colormap,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            gain: 98.0,
            colormap: Colormap::Gray,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 50.0 && self.gain <= 100.0) {
            return Err(Error::Argument(format!("gain must be in (50, 100], got {}", self.gain)));
        }
        Ok(())
    }
}

/// Grayscale raster, row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Pgm {
    fn from_grid(grid: &Array2<u8>) -> Self {
        let (height, width) = grid.dim();
        Self {
            width,
            height,
            pixels: grid.iter().copied().collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

fn to_byte(unit: f64) -> u8 {
    (unit.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Linear map of a real grid; time runs down the image, traces across.
pub fn render_grid(values: &Array2<f64>, opts: &RenderOptions) -> Result<Pgm> {
    opts.validate()?;
    let q = opts.gain / 100.0;
    let grid = match opts.colormap {
        Colormap::Gray => {
            let hi = quantile(values.iter().copied(), q);
            let lo = quantile(values.iter().copied(), 1.0 - q);
            if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
                values.mapv(|_| 128)
            } else {
                values.mapv(|v| to_byte((v - lo) / (hi - lo)))
            }
        }
        Colormap::Signed => {
            let clip = quantile(values.iter().map(|v| v.abs()), q);
            if clip == 0.0 {
                values.mapv(|_| 128)
            } else {
                values.mapv(|v| to_byte(0.5 + 0.5 * v / clip))
            }
        }
    };
    Ok(Pgm::from_grid(&grid))
}

pub fn render_gather(g: &Gather, opts: &RenderOptions) -> Result<Pgm> {
    render_grid(g.samples(), opts)
}

/// Set bits white, clear bits black.
pub fn render_mask(m: &Mask) -> Pgm {
    Pgm::from_grid(&m.bits().mapv(|b| if b == 1 { 255 } else { 0 }))
}

/// f-k magnitude in dB relative to the peak, floored at -[`FK_FLOOR_DB`].
/// Frequency increases down the image, wavenumber left to right.
pub fn render_fk(g: &Gather) -> Pgm {
    let fk = fk_spectrum(g);
    let peak = fk.magnitudes.iter().fold(0.0_f64, |m, v| m.max(*v));
    let grid = if peak == 0.0 {
        fk.magnitudes.mapv(|_| 0)
    } else {
        fk.magnitudes.mapv(|v| {
            let db = if v > 0.0 { 20.0 * (v / peak).log10() } else { -FK_FLOOR_DB };
            to_byte((db.max(-FK_FLOOR_DB) + FK_FLOOR_DB) / FK_FLOOR_DB)
        })
    };
    Pgm::from_grid(&grid)
}
