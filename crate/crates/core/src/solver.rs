//! Mask-guided dual low-rank decomposition solved by ADMM.
//!
//! Model: minimise `1/2 ||Y - X - G||_F^2 + lambda_s ||F(X)||_* + lambda_g ||F(Z)||_*`
//! with `Z = M o G`, where `F` is the unitary 2-D Fourier transform and `M` the
//! ground-roll mask. Splitting `U = F(X)`, `V = F(Z)` gives closed-form updates
//! for every block; `D1..D3` are the scaled duals of the three constraints.

use std::fmt;
use std::io::Write;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{frobenius_c, nuclear_norm, svt_capped, Fft2};
use crate::seisdata::{normalize, Gather, Mask};

/// Tolerance on `max|y|` for inputs that are supposed to be peak-normalised.
pub const NORMALIZED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight on the reflection nuclear norm.
    pub lambda_s: f64,
    /// Weight on the ground-roll nuclear norm.
    pub lambda_g: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub max_iter: usize,
    pub eps: f64,
    /// Evaluate the objective at every iteration (two extra SVDs per step).
    pub record_history: bool,
    /// Optional truncation rank for the SVT steps; `None` keeps the full SVD.
    pub rank_cap: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_s: 5.0e-3,
            lambda_g: 1.0e-2,
            rho1: 3.0,
            rho2: 3.0,
            rho3: 3.0,
            max_iter: 200,
            eps: 1e-4,
            record_history: true,
            rank_cap: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_s", self.lambda_s),
            ("lambda_g", self.lambda_g),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
            ("eps", self.eps),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be >= 1".into()));
        }
        if self.rank_cap == Some(0) {
            return Err(Error::Argument("rank_cap must be >= 1".into()));
        }
        Ok(())
    }

    /// SVT threshold of the `U` step.
    pub fn tau_u(&self) -> f64 {
        self.lambda_s / self.rho1
    }

    /// SVT threshold of the `V` step.
    pub fn tau_v(&self) -> f64 {
        self.lambda_g / self.rho3
    }
}

/// All ADMM iterates. `z` is the mask-supported ground roll.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Array2<f64>,
    pub g: Array2<f64>,
    pub z: Array2<f64>,
    pub u: Array2<Complex64>,
    pub v: Array2<Complex64>,
    pub d1: Array2<Complex64>,
    pub d2: Array2<f64>,
    pub d3: Array2<Complex64>,
    pub k: usize,
}

impl SolverState {
    pub fn zeros(nt: usize, nx: usize) -> Self {
        let r = Array2::zeros((nt, nx));
        let c = Array2::zeros((nt, nx));
        Self {
            x: r.clone(),
            g: r.clone(),
            z: r.clone(),
            u: c.clone(),
            v: c.clone(),
            d1: c.clone(),
            d2: r,
            d3: c,
            k: 0,
        }
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        let real = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        let cplx = |a: &Array2<Complex64>| a.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        [
            ("X", real(&self.x)),
            ("G", real(&self.g)),
            ("Z", real(&self.z)),
            ("U", cplx(&self.u)),
            ("V", cplx(&self.v)),
            ("D1", cplx(&self.d1)),
            ("D2", real(&self.d2)),
            ("D3", cplx(&self.d3)),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(name, _)| name)
    }
}

/// Primal residual norms `||U - F(X)||`, `||Z - M o G||`, `||V - F(Z)||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::MaxIter => f.write_str("max_iter"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub residuals: Residuals,
    /// Present when the config asks for history.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub records: Vec<IterRecord>,
    pub reason: Termination,
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residuals(&self) -> Option<Residuals> {
        self.records.last().map(|r| r.residuals)
    }

    pub fn converged(&self) -> bool {
        self.reason == Termination::Converged
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "iteration,r1,r2,r3,objective")?;
        for r in &self.records {
            let obj = r.objective.map(|o| format!("{o:.17e}")).unwrap_or_default();
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{}",
                r.iteration, r.residuals.r1, r.residuals.r2, r.residuals.r3, obj
            )?;
        }
        Ok(())
    }
}

/// Fixed data of one solve: observed gather, mask, config and FFT plans.
pub struct Problem {
    y: Array2<f64>,
    mask: Array2<f64>,
    cfg: SolverConfig,
    fft: Fft2,
}

impl Problem {
    pub fn new(y: Array2<f64>, mask: &Mask, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        mask.check_shape(y.dim())?;
        let (nt, nx) = y.dim();
        Ok(Self {
            mask: mask.to_weights(),
            cfg: cfg.clone(),
            fft: Fft2::new(nt, nx),
            y,
        })
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn mask(&self) -> &Array2<f64> {
        &self.mask
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn init_state(&self) -> SolverState {
        let (nt, nx) = self.y.dim();
        SolverState::zeros(nt, nx)
    }

    /// `X = [(Y - G) + rho1 F^-1(U + D1)] / (1 + rho1)`.
    pub fn update_x(&self, s: &SolverState) -> Result<Array2<f64>> {
        let back = self.fft.inverse_real(&(&s.u + &s.d1))?;
        let rho = self.cfg.rho1;
        let mut x = &self.y - &s.g;
        Zip::from(&mut x).and(&back).for_each(|xv, &b| *xv = (*xv + rho * b) / (1.0 + rho));
        Ok(x)
    }

    /// Elementwise `G = [(Y - X) + rho2 M (Z + D2)] / (1 + rho2 M)`.
    pub fn update_g(&self, s: &SolverState) -> Array2<f64> {
        let rho = self.cfg.rho2;
        let mut g = Array2::zeros(self.y.dim());
        Zip::from(&mut g)
            .and(&self.y)
            .and(&s.x)
            .and(&self.mask)
            .and(&s.z)
            .and(&s.d2)
            .for_each(|gv, &y, &x, &m, &z, &d2| {
                *gv = (y - x + rho * m * (z + d2)) / (1.0 + rho * m);
            });
        g
    }

    /// `Z = [rho2 (M o G - D2) + rho3 F^-1(V + D3)] / (rho2 + rho3)`.
    pub fn update_z(&self, s: &SolverState) -> Result<Array2<f64>> {
        let back = self.fft.inverse_real(&(&s.v + &s.d3))?;
        let (r2, r3) = (self.cfg.rho2, self.cfg.rho3);
        let mut z = Array2::zeros(self.y.dim());
        Zip::from(&mut z)
            .and(&self.mask)
            .and(&s.g)
            .and(&s.d2)
            .and(&back)
            .for_each(|zv, &m, &g, &d2, &b| *zv = (r2 * (m * g - d2) + r3 * b) / (r2 + r3));
        Ok(z)
    }

    /// `U = SVT_{lambda_s/rho1}(F(X) - D1)`.
    pub fn update_u(&self, s: &SolverState) -> Result<Array2<Complex64>> {
        let fx = self.fft.forward_real(&s.x);
        svt_capped(&(&fx - &s.d1), self.cfg.tau_u(), self.cfg.rank_cap)
    }

    /// `V = SVT_{lambda_g/rho3}(F(Z) - D3)`.
    pub fn update_v(&self, s: &SolverState) -> Result<Array2<Complex64>> {
        let fz = self.fft.forward_real(&s.z);
        svt_capped(&(&fz - &s.d3), self.cfg.tau_v(), self.cfg.rank_cap)
    }

    /// Scaled dual ascent on the three constraints.
    pub fn update_duals(
        &self,
        s: &SolverState,
    ) -> (Array2<Complex64>, Array2<f64>, Array2<Complex64>) {
        let fx = self.fft.forward_real(&s.x);
        let fz = self.fft.forward_real(&s.z);
        self.duals_from(s, &fx, &fz)
    }

    fn duals_from(
        &self,
        s: &SolverState,
        fx: &Array2<Complex64>,
        fz: &Array2<Complex64>,
    ) -> (Array2<Complex64>, Array2<f64>, Array2<Complex64>) {
        let d1 = &s.d1 + &(&s.u - fx);
        let d2 = &s.d2 + &(&s.z - &(&self.mask * &s.g));
        let d3 = &s.d3 + &(&s.v - fz);
        (d1, d2, d3)
    }

    pub fn residuals(&self, s: &SolverState) -> Residuals {
        let fx = self.fft.forward_real(&s.x);
        let fz = self.fft.forward_real(&s.z);
        self.residuals_from(s, &fx, &fz)
    }

    fn residuals_from(
        &self,
        s: &SolverState,
        fx: &Array2<Complex64>,
        fz: &Array2<Complex64>,
    ) -> Residuals {
        let r2 = Zip::from(&s.z)
            .and(&self.mask)
            .and(&s.g)
            .fold(0.0, |acc, &z, &m, &g| acc + (z - m * g).powi(2))
            .sqrt();
        Residuals {
            r1: frobenius_c(&(&s.u - fx)),
            r2,
            r3: frobenius_c(&(&s.v - fz)),
        }
    }

    /// Model objective at `(X, G, Z)`; constraint violation is not included.
    pub fn objective(&self, s: &SolverState) -> Result<f64> {
        let fx = self.fft.forward_real(&s.x);
        let fz = self.fft.forward_real(&s.z);
        self.objective_from(s, &fx, &fz)
    }

    fn objective_from(
        &self,
        s: &SolverState,
        fx: &Array2<Complex64>,
        fz: &Array2<Complex64>,
    ) -> Result<f64> {
        let fit = Zip::from(&self.y)
            .and(&s.x)
            .and(&s.g)
            .fold(0.0, |acc, &y, &x, &g| acc + (y - x - g).powi(2));
        Ok(0.5 * fit
            + self.cfg.lambda_s * nuclear_norm(fx)?
            + self.cfg.lambda_g * nuclear_norm(fz)?)
    }

    /// One full sweep in the order X, G, Z, U, V, duals. Returns the primal
    /// residuals at the new iterate and, if requested, the objective.
    fn check_finite(&self, s: &SolverState, iteration: usize) -> Result<()> {
        match s.first_non_finite() {
            Some(name) => Err(Error::Divergence {
                iteration,
                detail: format!("non-finite entries in {name}"),
            }),
            None => Ok(()),
        }
    }

    pub fn step(&self, s: &mut SolverState) -> Result<(Residuals, Option<f64>)> {
        s.x = self.update_x(s)?;
        s.g = self.update_g(s);
        s.z = self.update_z(s)?;
        self.check_finite(s, s.k + 1)?;

        let fx = self.fft.forward_real(&s.x);
        let fz = self.fft.forward_real(&s.z);
        s.u = svt_capped(&(&fx - &s.d1), self.cfg.tau_u(), self.cfg.rank_cap)?;
        s.v = svt_capped(&(&fz - &s.d3), self.cfg.tau_v(), self.cfg.rank_cap)?;
        let (d1, d2, d3) = self.duals_from(s, &fx, &fz);
        s.d1 = d1;
        s.d2 = d2;
        s.d3 = d3;
        s.k += 1;
        self.check_finite(s, s.k)?;
        let res = self.residuals_from(s, &fx, &fz);
        let obj = if self.cfg.record_history {
            Some(self.objective_from(s, &fx, &fz)?)
        } else {
            None
        };
        Ok((res, obj))
    }

    /// Iterates from `state` until the residual test passes or `max_iter` sweeps ran.
    pub fn run(&self, state: &mut SolverState) -> Result<RunReport> {
        let mut records = Vec::with_capacity(self.cfg.max_iter);
        let mut reason = Termination::MaxIter;
        for _ in 0..self.cfg.max_iter {
            let (residuals, objective) = self.step(state)?;
            records.push(IterRecord {
                iteration: state.k,
                residuals,
                objective,
            });
            if residuals.max() <= self.cfg.eps {
                reason = Termination::Converged;
                break;
            }
        }
        Ok(RunReport { records, reason })
    }

    /// `1/2 ||Y - X - G||^2 + rho1/2 ||U - F(X) + D1||^2`, the X-subproblem.
    pub fn x_subproblem(&self, s: &SolverState, x: &Array2<f64>) -> f64 {
        let fit = (&self.y - x - &s.g).mapv(|v| v * v).sum();
        let fx = self.fft.forward_real(x);
        let pen = frobenius_c(&(&(&s.u - &fx) + &s.d1)).powi(2);
        0.5 * fit + 0.5 * self.cfg.rho1 * pen
    }

    /// `1/2 ||Y - X - G||^2 + rho2/2 ||Z - M o G + D2||^2`, the G-subproblem.
    pub fn g_subproblem(&self, s: &SolverState, g: &Array2<f64>) -> f64 {
        let fit = (&self.y - &s.x - g).mapv(|v| v * v).sum();
        let pen = (&(&s.z - &(&self.mask * g)) + &s.d2).mapv(|v| v * v).sum();
        0.5 * fit + 0.5 * self.cfg.rho2 * pen
    }

    /// `rho2/2 ||Z - M o G + D2||^2 + rho3/2 ||V - F(Z) + D3||^2`, the Z-subproblem.
    pub fn z_subproblem(&self, s: &SolverState, z: &Array2<f64>) -> f64 {
        let pen2 = (&(z - &(&self.mask * &s.g)) + &s.d2).mapv(|v| v * v).sum();
        let fz = self.fft.forward_real(z);
        let pen3 = frobenius_c(&(&(&s.v - &fz) + &s.d3)).powi(2);
        0.5 * self.cfg.rho2 * pen2 + 0.5 * self.cfg.rho3 * pen3
    }
}

/// Result of a full solve.
#[derive(Debug, Clone)]
pub struct Separation {
    /// Reflection estimate.
    pub x: Gather,
    /// Removed ground-roll component.
    pub g: Gather,
    /// Mask-supported ground roll `Z`.
    pub z: Gather,
    pub report: RunReport,
}

/// Runs the solver on a peak-normalised gather.
pub fn separate(y: &Gather, m: &Mask, cfg: &SolverConfig) -> Result<Separation> {
    let peak = y.max_abs();
    if peak > 1.0 + NORMALIZED_TOL {
        return Err(Error::Argument(format!(
            "input must be normalised to max |y| <= 1, got {peak}"
        )));
    }
    let problem = Problem::new(y.samples().clone(), m, cfg)?;
    let mut state = problem.init_state();
    let report = problem.run(&mut state)?;
    Ok(Separation {
        x: y.with_samples(state.x)?,
        g: y.with_samples(state.g)?,
        z: y.with_samples(state.z)?,
        report,
    })
}

/// Normalises by the peak amplitude, solves, and scales the components back.
pub fn separate_gather(y: &Gather, m: &Mask, cfg: &SolverConfig) -> Result<Separation> {
    if y.max_abs() == 0.0 {
        return separate(y, m, cfg);
    }
    let (yn, scale) = normalize(y)?;
    let mut out = separate(&yn, m, cfg)?;
    let rescale = |g: &Gather| g.with_samples(g.samples().mapv(|v| v * scale));
    out.x = rescale(&out.x)?;
    out.g = rescale(&out.g)?;
    out.z = rescale(&out.z)?;
    Ok(out)
}
