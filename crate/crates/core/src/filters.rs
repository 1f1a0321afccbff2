//! Small grid filters shared by the mask, synthesis and metric code.

use ndarray::Array2;

/// Windowed sum over `(2*ht+1) x (2*hx+1)`, truncated at the grid edges.
///
/// Separable direct sums; each output only ever adds nearby values, so quiet
/// windows keep full relative precision.
pub fn box_sum(a: &Array2<f64>, ht: usize, hx: usize) -> Array2<f64> {
    let (n, m) = a.dim();
    let cols = Array2::from_shape_fn((n, m), |(i, j)| {
        (i.saturating_sub(ht)..(i + ht + 1).min(n)).map(|ii| a[[ii, j]]).sum::<f64>()
    });
    Array2::from_shape_fn((n, m), |(i, j)| {
        (j.saturating_sub(hx)..(j + hx + 1).min(m)).map(|jj| cols[[i, jj]]).sum::<f64>()
    })
}

/// Windowed mean over the in-bounds part of each window.
pub fn box_mean(a: &Array2<f64>, ht: usize, hx: usize) -> Array2<f64> {
    let (n, m) = a.dim();
    let mut out = box_sum(a, ht, hx);
    for ((i, j), v) in out.indexed_iter_mut() {
        let rows = (i + ht + 1).min(n) - i.saturating_sub(ht);
        let cols = (j + hx + 1).min(m) - j.saturating_sub(hx);
        *v /= (rows * cols) as f64;
    }
    out
}

/// Separable Gaussian smoothing, kernel truncated at 3 sigma and renormalised
/// over the in-bounds taps so constants are preserved at the edges.
pub fn gaussian_smooth(a: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return a.clone();
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let pass = |src: &Array2<f64>, along_rows: bool| {
        let (n, m) = src.dim();
        Array2::from_shape_fn((n, m), |(i, j)| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (t, w) in kernel.iter().enumerate() {
                let off = t as isize - half;
                let (ii, jj) = if along_rows {
                    (i as isize + off, j as isize)
                } else {
                    (i as isize, j as isize + off)
                };
                if ii < 0 || jj < 0 || ii >= n as isize || jj >= m as isize {
                    continue;
                }
                acc += w * src[[ii as usize, jj as usize]];
                wsum += w;
            }
            acc / wsum
        })
    };
    pass(&pass(a, true), false)
}

/// Linear-interpolated quantile (the common "type 7" definition).
pub fn quantile(values: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    assert!(!v.is_empty(), "quantile of empty set");
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}
