//! The `groundroll` command line.
//!
//! Exit codes: 0 success, 1 usage or format error, 2 solver stopped at
//! `max_iter` without converging.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{fk_fan_filter, local_svd_filter, FkFilterParams, LocalSvdParams};
use crate::config::{read_solver_config, read_synth_config};
use crate::error::{Error, Result};
use crate::evalmetrics::{MetricsRow, SimilarityParams, METRICS_HEADER};
use crate::maskgen::{heuristic_mask, HeuristicParams};
use crate::render::{render_fk, render_gather, render_mask, Colormap, RenderOptions};
use crate::seisdata::{read_gather, read_mask, write_gather, write_mask, Gather, Mask};
use crate::solver::{separate_gather, SolverConfig};
use crate::synth::synthesize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "groundroll", version, about = "Mask-guided low-rank ground-roll separation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic experiment from a key=value config.
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: String,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate a ground-roll mask with the low-band energy heuristic.
    Mask {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long, default_value_t = 15.0)]
        f_cut: f64,
        #[arg(long, default_value_t = 15)]
        win_t: usize,
        #[arg(long, default_value_t = 5)]
        win_x: usize,
        #[arg(long, default_value_t = 1)]
        open_r: usize,
        #[arg(long, default_value_t = 2)]
        close_r: usize,
    },
    /// Run the ADMM separation. INPUT may be a directory of .grl files.
    Separate {
        input: PathBuf,
        mask: PathBuf,
        #[arg(long)]
        out: String,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Run a reference method.
    Baseline {
        kind: BaselineKind,
        input: PathBuf,
        #[arg(long)]
        out: String,
        /// Required by `lsvd`.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 800.0)]
        v_reject: f64,
        #[arg(long, default_value_t = 20.0)]
        f_max: f64,
        #[arg(long, default_value_t = 0.2)]
        taper: f64,
        #[arg(long, default_value_t = 64)]
        win_t: usize,
        #[arg(long, default_value_t = 16)]
        win_x: usize,
        /// Defaults to half of win_t.
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long, default_value_t = 2)]
        rank: usize,
    },
    /// Print one CSV metrics row for a separation.
    Metrics {
        clean: PathBuf,
        x: PathBuf,
        g: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long, default_value = "method")]
        method: String,
    },
    /// Render a gather, mask or f-k spectrum to an 8-bit PGM.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 98.0)]
        gain: f64,
        #[arg(long, value_enum, default_value_t = ColormapArg::Gray)]
        colormap: ColormapArg,
        #[arg(long)]
        fk: bool,
    },
    /// Same as `render --fk`.
    Spectrum {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// key=value solver config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    /// Sets rho1 = rho2 = rho3.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rank_cap: Option<usize>,
    /// Skip the per-iteration objective.
    #[arg(long)]
    no_history: bool,
}

impl SolverFlags {
    fn resolve(&self) -> Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_solver_config(p)?,
            None => SolverConfig::default(),
        };
        if let Some(v) = self.lambda_s {
            cfg.lambda_s = v;
        }
        if let Some(v) = self.lambda_g {
            cfg.lambda_g = v;
        }
        if let Some(v) = self.rho {
            cfg.rho1 = v;
            cfg.rho2 = v;
            cfg.rho3 = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if self.rank_cap.is_some() {
            cfg.rank_cap = self.rank_cap;
        }
        if self.no_history {
            cfg.record_history = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Fk,
    Lsvd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColormapArg {
    Gray,
    Signed,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth { config, out: prefix, seed } => cmd_synth(&config, &prefix, seed, out),
        Command::Mask {
            input,
            out: path,
            eta,
            f_cut,
            win_t,
            win_x,
            open_r,
            close_r,
        } => {
            let params = HeuristicParams {
                f_cut,
                win_t,
                win_x,
                eta,
                open_r,
                close_r,
            };
            cmd_mask(&input, &path, &params, out)
        }
        Command::Separate {
            input,
            mask,
            out: prefix,
            solver,
        } => cmd_separate(&input, &mask, &prefix, &solver.resolve()?, out),
        Command::Baseline {
            kind,
            input,
            out: prefix,
            mask,
            v_reject,
            f_max,
            taper,
            win_t,
            win_x,
            overlap,
            rank,
        } => {
            let y = read_gather(&input)?;
            let (x, g) = match kind {
                BaselineKind::Fk => fk_fan_filter(
                    &y,
                    &FkFilterParams {
                        v_reject,
                        f_max,
                        taper_frac: taper,
                    },
                )?,
                BaselineKind::Lsvd => {
                    let mask_path = mask.ok_or_else(|| {
                        Error::Argument("baseline lsvd requires --mask".into())
                    })?;
                    let m = read_mask(&mask_path)?;
                    let p = LocalSvdParams {
                        win_t,
                        win_x,
                        overlap: overlap.unwrap_or(win_t / 2),
                        rank,
                    };
                    local_svd_filter(&y, &m, &p)?
                }
            };
            write_gather(&x, format!("{prefix}_x.grl"))?;
            write_gather(&g, format!("{prefix}_g.grl"))?;
            Ok(EXIT_OK)
        }
        Command::Metrics {
            clean,
            x,
            g,
            header,
            method,
        } => {
            let row = MetricsRow::evaluate(
                &method,
                &read_gather(&clean)?,
                &read_gather(&x)?,
                &read_gather(&g)?,
                &SimilarityParams::default(),
            )?;
            let io = |e| Error::io("<stdout>", e);
            if header {
                writeln!(out, "{METRICS_HEADER}").map_err(io)?;
            }
            row.write_csv(&mut *out).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Render {
            input,
            out: path,
            gain,
            colormap,
            fk,
        } => {
            let opts = RenderOptions {
                gain,
                colormap: match colormap {
                    ColormapArg::Gray => Colormap::Gray,
                    ColormapArg::Signed => Colormap::Signed,
                },
            };
            cmd_render(&input, &path, &opts, fk)
        }
        Command::Spectrum { input, out: path } => {
            cmd_render(&input, &path, &RenderOptions::default(), true)
        }
    }
}

pub fn cmd_synth(config: &Path, prefix: &str, seed: Option<u64>, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = read_synth_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let run = synthesize(&cfg)?;
    write_gather(&run.clean, format!("{prefix}_clean.grl"))?;
    write_gather(&run.groundroll, format!("{prefix}_groundroll.grl"))?;
    write_gather(&run.noisy, format!("{prefix}_noisy.grl"))?;
    write_mask(&run.mask, format!("{prefix}_mask.grm"))?;
    writeln!(out, "input SNR: {:.4} dB", run.input_snr_db()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

pub fn cmd_mask(input: &Path, path: &Path, params: &HeuristicParams, _out: &mut dyn Write) -> Result<i32> {
    let g = read_gather(input)?;
    write_mask(&heuristic_mask(&g, params)?, path)?;
    Ok(EXIT_OK)
}

fn separate_one(input: &Path, mask: &Mask, prefix: &str, cfg: &SolverConfig) -> Result<(bool, String)> {
    let y = read_gather(input)?;
    let sep = separate_gather(&y, mask, cfg)?;
    write_gather(&sep.x, format!("{prefix}_x.grl"))?;
    write_gather(&sep.g, format!("{prefix}_g.grl"))?;
    let report_path = format!("{prefix}_report.csv");
    let mut buf = Vec::new();
    sep.report
        .write_csv(&mut buf)
        .map_err(|e| Error::io(&report_path, e))?;
    fs::write(&report_path, buf).map_err(|e| Error::io(&report_path, e))?;
    let last = sep.report.final_residuals().map(|r| r.max()).unwrap_or(0.0);
    let summary = format!(
        "{}: {} after {} iterations, max residual {:.3e}",
        input.display(),
        sep.report.reason,
        sep.report.iterations(),
        last
    );
    Ok((sep.report.converged(), summary))
}

pub fn cmd_separate(
    input: &Path,
    mask_path: &Path,
    prefix: &str,
    cfg: &SolverConfig,
    out: &mut dyn Write,
) -> Result<i32> {
    let mask = read_mask(mask_path)?;
    let io = |e| Error::io("<stdout>", e);
    if !input.is_dir() {
        let (converged, summary) = separate_one(input, &mask, prefix, cfg)?;
        writeln!(out, "{summary}").map_err(io)?;
        return Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED });
    }

    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "grl"))
        .collect();
    files.sort();
    let results: Vec<Result<(bool, String)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| {
                let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let file_prefix = format!("{prefix}_{stem}");
                let mask = &mask;
                scope.spawn(move || separate_one(f, mask, &file_prefix, cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut code = EXIT_OK;
    for (file, res) in files.iter().zip(results) {
        match res {
            Ok((converged, summary)) => {
                writeln!(out, "{summary}").map_err(io)?;
                if !converged && code == EXIT_OK {
                    code = EXIT_NOT_CONVERGED;
                }
            }
            Err(e) => {
                writeln!(out, "{}: error: {e}", file.display()).map_err(io)?;
                code = EXIT_ERROR;
            }
        }
    }
    Ok(code)
}

enum Loaded {
    Gather(Gather),
    Mask(Mask),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match bytes.get(0..4) {
        Some(b"GRM1") => Ok(Loaded::Mask(crate::seisdata::decode_mask(&bytes, path)?)),
        _ => Ok(Loaded::Gather(crate::seisdata::decode_gather(&bytes, path)?)),
    }
}

pub fn cmd_render(input: &Path, path: &Path, opts: &RenderOptions, fk: bool) -> Result<i32> {
    let img = match load_any(input)? {
        Loaded::Gather(g) if fk => render_fk(&g),
        Loaded::Gather(g) => render_gather(&g, opts)?,
        Loaded::Mask(_) if fk => {
            return Err(Error::Argument("f-k rendering needs a gather, not a mask".into()))
        }
        Loaded::Mask(m) => render_mask(&m),
    };
    img.write(path)?;
    Ok(EXIT_OK)
}
