//! Grid types and the GRL1 / GRM1 binary formats.
//!
//! Every grid is stored in memory as an `nt x nx` array (row = time sample,
//! column = trace). On disk the samples are trace-major: all times of trace 0,
//! then all times of trace 1, and so on. All multi-byte fields are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const GATHER_MAGIC: &[u8; 4] = b"GRL1";
pub const MASK_MAGIC: &[u8; 4] = b"GRM1";
pub const FORMAT_VERSION: u32 = 1;

const GATHER_HEADER_LEN: usize = 32;
const MASK_HEADER_LEN: usize = 16;

/// A real-valued time x offset record with its sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Gather {
    dt: f64,
    dx: f64,
    samples: Array2<f64>,
}

impl Gather {
    /// Builds a gather from an `nt x nx` sample grid.
    pub fn new(samples: Array2<f64>, dt: f64, dx: f64) -> Result<Self> {
        let (nt, nx) = samples.dim();
        if nt < 2 || nx < 2 {
            return Err(Error::Argument(format!(
                "gather must be at least 2x2, got {nt}x{nx}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) || !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Argument(format!(
                "sampling intervals must be positive, got dt={dt} dx={dx}"
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite sample at flat index {pos}"
            )));
        }
        Ok(Self { dt, dx, samples })
    }

    pub fn zeros(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Self> {
        Self::new(Array2::zeros((nt, nx)), dt, dx)
    }

    /// Same sampling metadata, new samples.
    pub fn with_samples(&self, samples: Array2<f64>) -> Result<Self> {
        if samples.dim() != self.samples.dim() {
            return Err(Error::Argument(format!(
                "shape {:?} does not match gather {:?}",
                samples.dim(),
                self.samples.dim()
            )));
        }
        Self::new(samples, self.dt, self.dx)
    }

    pub fn nt(&self) -> usize {
        self.samples.nrows()
    }

    pub fn nx(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.samples.dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.energy().sqrt()
    }
}

/// Binary ground-roll support aligned with a gather.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Array2<u8>,
}

impl Mask {
    pub fn new(bits: Array2<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Argument(format!(
                "mask value at flat index {pos} is not 0 or 1"
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(nt: usize, nx: usize) -> Self {
        Self {
            bits: Array2::zeros((nt, nx)),
        }
    }

    pub fn ones(nt: usize, nx: usize) -> Self {
        Self {
            bits: Array2::ones((nt, nx)),
        }
    }

    pub fn from_fn(nt: usize, nx: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Self {
            bits: Array2::from_shape_fn((nt, nx), |(i, j)| f(i, j) as u8),
        }
    }

    pub fn nt(&self) -> usize {
        self.bits.nrows()
    }

    pub fn nx(&self) -> usize {
        self.bits.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.bits.dim()
    }

    pub fn bits(&self) -> &Array2<u8> {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[[i, j]] == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// The mask as 0.0 / 1.0 weights.
    pub fn to_weights(&self) -> Array2<f64> {
        self.bits.mapv(f64::from)
    }

    pub fn check_shape(&self, dim: (usize, usize)) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Argument(format!(
                "mask shape {:?} does not match gather shape {:?}",
                self.dim(),
                dim
            )));
        }
        Ok(())
    }
}

/// Complex grid with the shape of the gather it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Array2<Complex64>,
}

impl Spectrum {
    pub fn new(values: Array2<Complex64>) -> Result<Self> {
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Argument("spectrum contains non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }
}

pub fn write_gather(g: &Gather, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_gather(g)).map_err(|e| Error::io(path, e))
}

pub fn encode_gather(g: &Gather) -> Vec<u8> {
    let (nt, nx) = g.dim();
    let mut buf = Vec::with_capacity(GATHER_HEADER_LEN + 4 * nt * nx);
    buf.extend_from_slice(GATHER_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(nt as u32).to_le_bytes());
    buf.extend_from_slice(&(nx as u32).to_le_bytes());
    buf.extend_from_slice(&g.dt.to_le_bytes());
    buf.extend_from_slice(&g.dx.to_le_bytes());
    // Column-major iteration gives the trace-major file order.
    for v in g.samples.t().iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    buf
}

pub fn read_gather(path: impl AsRef<Path>) -> Result<Gather> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gather(&bytes, path)
}

pub fn decode_gather(bytes: &[u8], path: &Path) -> Result<Gather> {
    if bytes.len() < GATHER_HEADER_LEN {
        return Err(Error::format(path, "header", "truncated header"));
    }
    if &bytes[0..4] != GATHER_MAGIC {
        return Err(Error::format(path, "magic", "bad magic"));
    }
    check_version(&bytes[4..8], path)?;
    let nt = u32_at(bytes, 8) as usize;
    let nx = u32_at(bytes, 12) as usize;
    let dt = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let dx = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    if nt < 2 || nx < 2 {
        return Err(Error::format(path, "dims", format!("invalid dims {nt}x{nx}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::format(path, "dt", format!("invalid dt {dt}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::format(path, "dx", format!("invalid dx {dx}")));
    }
    let payload = &bytes[GATHER_HEADER_LEN..];
    let want = nt * nx * 4;
    if payload.len() < want {
        return Err(Error::format(
            path,
            "samples",
            format!("truncated: expected {want} payload bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > want {
        return Err(Error::format(path, "samples", "trailing bytes after payload"));
    }
    let mut samples = Array2::zeros((nt, nx));
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                path,
                "samples",
                format!("non-finite sample at trace {}, time {}", k / nt, k % nt),
            ));
        }
        samples[[k % nt, k / nt]] = f64::from(v);
    }
    Ok(Gather { dt, dx, samples })
}

pub fn write_mask(m: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(m)).map_err(|e| Error::io(path, e))
}

pub fn encode_mask(m: &Mask) -> Vec<u8> {
    let (nt, nx) = m.dim();
    let mut buf = Vec::with_capacity(MASK_HEADER_LEN + nt * nx);
    buf.extend_from_slice(MASK_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(nt as u32).to_le_bytes());
    buf.extend_from_slice(&(nx as u32).to_le_bytes());
    buf.extend(m.bits.t().iter().copied());
    buf
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes, path)
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<Mask> {
    if bytes.len() < MASK_HEADER_LEN {
        return Err(Error::format(path, "header", "truncated header"));
    }
    if &bytes[0..4] != MASK_MAGIC {
        return Err(Error::format(path, "magic", "bad magic"));
    }
    check_version(&bytes[4..8], path)?;
    let nt = u32_at(bytes, 8) as usize;
    let nx = u32_at(bytes, 12) as usize;
    if nt == 0 || nx == 0 {
        return Err(Error::format(path, "dims", format!("invalid dims {nt}x{nx}")));
    }
    let payload = &bytes[MASK_HEADER_LEN..];
    if payload.len() < nt * nx {
        return Err(Error::format(
            path,
            "bits",
            format!("truncated: expected {} payload bytes, found {}", nt * nx, payload.len()),
        ));
    }
    if payload.len() > nt * nx {
        return Err(Error::format(path, "bits", "trailing bytes after payload"));
    }
    let mut bits = Array2::zeros((nt, nx));
    for (k, &b) in payload.iter().enumerate() {
        if b > 1 {
            return Err(Error::format(
                path,
                "bits",
                format!("value {b} at trace {}, time {} is not 0 or 1", k / nt, k % nt),
            ));
        }
        bits[[k % nt, k / nt]] = b;
    }
    Ok(Mask { bits })
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn check_version(raw: &[u8], path: &Path) -> Result<()> {
    let version = u32::from_le_bytes(raw.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            "version",
            format!("unsupported version {version}"),
        ));
    }
    Ok(())
}

/// Divides by the peak absolute amplitude. Returns the scaled gather and the scale.
pub fn normalize(g: &Gather) -> Result<(Gather, f64)> {
    let scale = g.max_abs();
    if scale == 0.0 {
        return Err(Error::Degenerate("cannot normalize an all-zero gather".into()));
    }
    let samples = g.samples.mapv(|v| v / scale);
    Ok((
        Gather {
            dt: g.dt,
            dx: g.dx,
            samples,
        },
        scale,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> Gather {
        Gather::new(array![[1.0, 2.0], [3.0, 4.0]], 0.004, 10.0).unwrap()
    }

    #[test]
    fn gather_layout_is_byte_exact() {
        let bytes = encode_gather(&small());
        assert_eq!(bytes.len(), 48);
        assert_eq!(&bytes[0..4], b"GRL1");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!(u32_at(&bytes, 8), 2);
        assert_eq!(u32_at(&bytes, 12), 2);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0.004);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 10.0);
        // trace 0 = [1, 3], trace 1 = [2, 4]
        let floats: Vec<f32> = bytes[32..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(floats, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn gather_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grl");
        let g = Gather::new(array![[0.1, -2.5], [3.25, 1e-3], [7.0, 0.0]], 0.002, 12.5).unwrap();
        write_gather(&g, &path).unwrap();
        let back = read_gather(&path).unwrap();
        assert_eq!(back.dim(), g.dim());
        assert_eq!(back.dt(), g.dt());
        assert_eq!(back.dx(), g.dx());
        for (a, b) in back.samples().iter().zip(g.samples()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
    }

    #[test]
    fn unwritable_path_is_file_error() {
        let err = write_gather(&small(), "/nonexistent-dir/sub/g.grl").unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode_gather(&small());
        bytes[0..4].copy_from_slice(b"XXXX");
        let err = decode_gather(&bytes, Path::new("x.grl")).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = encode_gather(&small());
        let err = decode_gather(&bytes[..bytes.len() - 3], Path::new("x.grl")).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn non_finite_sample_rejected() {
        let mut bytes = encode_gather(&small());
        bytes[36..40].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode_gather(&bytes, Path::new("x.grl")).unwrap_err();
        assert!(matches!(err, Error::Format { field: "samples", .. }), "{err}");
    }

    #[test]
    fn zero_mask_payload() {
        let bytes = encode_mask(&Mask::zeros(3, 3));
        assert_eq!(bytes.len(), 16 + 9);
        assert_eq!(&bytes[0..4], b"GRM1");
        assert!(bytes[16..].iter().all(|&b| b == 0));
    }

    #[test]
    fn mask_round_trip_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.grm");
        let m = Mask::from_fn(3, 2, |i, j| i == 0 && j == 1);
        write_mask(&m, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[16..], &[0, 0, 0, 1, 0, 0]);
        assert_eq!(read_mask(&path).unwrap(), m);
    }

    #[test]
    fn mask_byte_outside_binary_rejected() {
        let mut bytes = encode_mask(&Mask::zeros(2, 2));
        bytes[17] = 2;
        let err = decode_mask(&bytes, Path::new("m.grm")).unwrap_err();
        assert!(matches!(err, Error::Format { field: "bits", .. }), "{err}");
    }

    #[test]
    fn normalize_by_peak() {
        let g = Gather::new(array![[1.0, -4.0], [2.0, 0.5]], 0.004, 10.0).unwrap();
        let (n, scale) = normalize(&g).unwrap();
        assert_eq!(scale, 4.0);
        assert_eq!(n.max_abs(), 1.0);

        let (again, s2) = normalize(&n).unwrap();
        assert_eq!(s2, 1.0);
        assert_eq!(again, n);
    }

    #[test]
    fn normalize_all_zero_fails() {
        let g = Gather::zeros(4, 4, 0.004, 10.0).unwrap();
        assert!(matches!(normalize(&g), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gather_invariants_enforced() {
        assert!(Gather::new(Array2::zeros((1, 4)), 0.004, 10.0).is_err());
        assert!(Gather::new(Array2::zeros((4, 4)), 0.0, 10.0).is_err());
        assert!(Gather::new(Array2::from_elem((2, 2), f64::INFINITY), 0.004, 10.0).is_err());
    }
}
