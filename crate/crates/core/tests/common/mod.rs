#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use groundroll::config::read_synth_config;
use groundroll::synth::{synthesize, SynthConfig, SynthOutput};
use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_real(rng: &mut ChaCha8Rng, nt: usize, nx: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((nt, nx), || rng.random_range(-1.0..1.0))
}

pub fn random_complex(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<Complex64> {
    Array2::from_shape_simple_fn((m, n), || {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Direct O(N^2) unitary 2-D DFT; `sign` = -1 forward, +1 inverse.
pub fn naive_dft2(a: &Array2<Complex64>, sign: f64) -> Array2<Complex64> {
    let (m, n) = a.dim();
    let scale = 1.0 / ((m * n) as f64).sqrt();
    Array2::from_shape_fn((m, n), |(p, q)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..n {
                let theta = sign
                    * 2.0
                    * std::f64::consts::PI
                    * ((p * i) as f64 / m as f64 + (q * j) as f64 / n as f64);
                acc += a[[i, j]] * Complex64::from_polar(1.0, theta);
            }
        }
        acc * scale
    })
}

/// Singular values as square roots of the eigenvalues of `A^H A`, descending.
pub fn gram_singular_values(a: &Array2<Complex64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mat = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let gram = mat.adjoint() * &mat;
    let eig = gram.symmetric_eigen();
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.truncate(m.min(n));
    s
}

/// Singular values from the eigenvalues of `[[0, A], [A^H, 0]]`, descending.
/// No squaring, so zero singular values come out at rounding level.
pub fn dilation_singular_values(a: &Array2<Complex64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let zero = Complex64::new(0.0, 0.0);
    let h = DMatrix::from_fn(m + n, m + n, |i, j| match (i < m, j < m) {
        (true, false) => a[[i, j - m]],
        (false, true) => a[[j, i - m]].conj(),
        _ => zero,
    });
    let mut s: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.truncate(m.min(n));
    s.iter().map(|v| v.max(0.0)).collect()
}

/// `tau ||Z||_* + 1/2 ||Z - A||^2`.
pub fn prox_objective(z: &Array2<Complex64>, a: &Array2<Complex64>, tau: f64) -> f64 {
    let nuc = groundroll::numerics::nuclear_norm(z).expect("finite matrix");
    let fit: f64 = z.iter().zip(a.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    tau * nuc + 0.5 * fit
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/synthetic.cfg")
}

pub fn fixture_config() -> SynthConfig {
    read_synth_config(fixture_path()).expect("fixture config parses")
}

pub fn fixture() -> &'static SynthOutput {
    static FIXTURE: OnceLock<SynthOutput> = OnceLock::new();
    FIXTURE.get_or_init(|| synthesize(&fixture_config()).expect("fixture synthesizes"))
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_groundroll")
}

/// Random iterate with conjugate-symmetric spectral blocks, as produced by the
/// solver from real data.
pub fn random_state(
    rng: &mut ChaCha8Rng,
    problem: &groundroll::solver::Problem,
) -> groundroll::solver::SolverState {
    let (nt, nx) = problem.y().dim();
    let fft = problem.fft();
    let spectral = |r: &mut ChaCha8Rng| fft.forward_real(&random_real(r, nt, nx));
    let u = spectral(rng);
    let v = spectral(rng);
    let d1 = spectral(rng);
    let d3 = spectral(rng);
    groundroll::solver::SolverState {
        x: random_real(rng, nt, nx),
        g: random_real(rng, nt, nx),
        z: random_real(rng, nt, nx),
        u,
        v,
        d1,
        d2: random_real(rng, nt, nx),
        d3,
        k: 0,
    }
}

pub fn random_mask(rng: &mut ChaCha8Rng, nt: usize, nx: usize) -> groundroll::Mask {
    groundroll::Mask::from_fn(nt, nx, |_, _| rng.random_bool(0.5))
}

/// Norm of the central-difference gradient of `f` at `x`.
pub fn fd_gradient_norm(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>, h: f64) -> f64 {
    let mut probe = x.clone();
    let mut sq = 0.0;
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[i, j]];
        probe[[i, j]] = orig + h;
        let up = f(&probe);
        probe[[i, j]] = orig - h;
        let down = f(&probe);
        probe[[i, j]] = orig;
        sq += ((up - down) / (2.0 * h)).powi(2);
    }
    sq.sqrt()
}

/// Smallest objective gap `f(z + d) - f(z)` over `probes` random complex
/// perturbations of Frobenius size in `[1e-6, 1e-2]`.
pub fn min_probe_gap(
    rng: &mut ChaCha8Rng,
    z: &Array2<Complex64>,
    f: impl Fn(&Array2<Complex64>) -> f64,
    probes: usize,
) -> f64 {
    let base = f(z);
    let (m, n) = z.dim();
    (0..probes)
        .map(|_| {
            let d = random_complex(rng, m, n);
            let norm = d.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let size = 10f64.powf(rng.random_range(-6.0..-2.0));
            f(&(z + &(&d * Complex64::new(size / norm, 0.0)))) - base
        })
        .fold(f64::INFINITY, f64::min)
}
