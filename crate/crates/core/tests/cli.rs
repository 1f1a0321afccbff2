mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use groundroll::numerics::fk_spectrum;
use groundroll::seisdata::{read_gather, read_mask, write_gather, write_mask};
use groundroll::{Gather, Mask};
use ndarray::Array2;

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth_into(dir: &Path) -> String {
    let prefix = p(dir, "fx");
    let cfg = fixture_path().to_string_lossy().into_owned();
    let o = run(&["synth", &cfg, "--out", &prefix]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    prefix
}

fn pgm_pixels(path: &str) -> (usize, usize, Vec<u8>) {
    let bytes = std::fs::read(path).unwrap();
    let header = String::from_utf8_lossy(&bytes[..bytes.len().min(32)]).into_owned();
    let mut parts = header.split_whitespace();
    assert_eq!(parts.next(), Some("P5"));
    let w: usize = parts.next().unwrap().parse().unwrap();
    let h: usize = parts.next().unwrap().parse().unwrap();
    assert_eq!(parts.next(), Some("255"));
    let pixels = bytes[bytes.len() - w * h..].to_vec();
    (w, h, pixels)
}

#[test]
fn synth_writes_four_files_and_reports_snr() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = p(dir.path(), "fx");
    let cfg = fixture_path().to_string_lossy().into_owned();
    let o = run(&["synth", &cfg, "--out", &prefix]);
    assert_eq!(o.status.code(), Some(0));
    for suffix in ["_clean.grl", "_groundroll.grl", "_noisy.grl", "_mask.grm"] {
        assert!(Path::new(&format!("{prefix}{suffix}")).exists(), "{suffix}");
    }
    let text = stdout(&o);
    let snr: f64 = text
        .split_whitespace()
        .find_map(|w| w.parse().ok())
        .expect("SNR printed");
    assert!((snr - 1.45).abs() <= 0.01, "{text}");
}

#[test]
fn synth_is_deterministic_and_seed_overridable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = synth_into(a.path());
    let pb = synth_into(b.path());
    for suffix in ["_clean.grl", "_groundroll.grl", "_noisy.grl", "_mask.grm"] {
        let fa = std::fs::read(format!("{pa}{suffix}")).unwrap();
        let fb = std::fs::read(format!("{pb}{suffix}")).unwrap();
        assert_eq!(fa, fb, "{suffix}");
    }
    let pc = p(b.path(), "other");
    let cfg = fixture_path().to_string_lossy().into_owned();
    assert_eq!(run(&["synth", &cfg, "--out", &pc, "--seed", "99"]).status.code(), Some(0));
    assert_ne!(
        std::fs::read(format!("{pa}_noisy.grl")).unwrap(),
        std::fs::read(format!("{pc}_noisy.grl")).unwrap()
    );
}

#[test]
fn synth_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "empty.cfg");
    std::fs::write(&cfg, "nt = 64\nnx = 8\ndt = 0.004\ndx = 10.0\ntarget_snr_db = 1.0\n").unwrap();
    let o = run(&["synth", &cfg, "--out", &p(dir.path(), "x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no signal content"), "{}", stderr(&o));

    std::fs::write(&cfg, "nt = 64\nnx = eight\n").unwrap();
    let o = run(&["synth", &cfg, "--out", &p(dir.path(), "x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn mask_command_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let noisy = format!("{prefix}_noisy.grl");
    let out = p(dir.path(), "m.grm");
    assert_eq!(run(&["mask", &noisy, "--out", &out]).status.code(), Some(0));
    let truth = read_mask(format!("{prefix}_mask.grm")).unwrap();
    let iou = groundroll::maskgen::mask_iou(&read_mask(&out).unwrap(), &truth).unwrap();
    assert!(iou >= 0.6, "{iou}");

    let area = 128.0 * 48.0;
    assert_eq!(run(&["mask", &noisy, "--out", &out, "--eta", "0.999"]).status.code(), Some(0));
    assert!((read_mask(&out).unwrap().count() as f64) < 0.02 * area);
    assert_eq!(run(&["mask", &noisy, "--out", &out, "--eta", "0.001"]).status.code(), Some(0));
    assert!((read_mask(&out).unwrap().count() as f64) > 0.95 * area);
    assert_eq!(run(&["mask", &noisy, "--out", &out, "--eta", "1.5"]).status.code(), Some(1));
}

#[test]
fn separate_exit_codes_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let noisy = format!("{prefix}_noisy.grl");
    let mask = format!("{prefix}_mask.grm");
    let out = p(dir.path(), "sep");

    let o = run(&["separate", &noisy, &mask, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report = std::fs::read_to_string(format!("{out}_report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("iteration,r1,r2,r3,objective"));
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(last[1].max(last[2]).max(last[3]) <= 1e-4);
    let x = read_gather(format!("{out}_x.grl")).unwrap();
    let g = read_gather(format!("{out}_g.grl")).unwrap();
    assert_eq!(x.dim(), (128, 48));
    assert_eq!(g.dim(), (128, 48));

    let o = run(&["separate", &noisy, &mask, "--out", &out, "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let small = p(dir.path(), "small.grm");
    write_mask(&Mask::ones(128, 47), &small).unwrap();
    let o = run(&["separate", &noisy, &small, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn separate_flags_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let noisy = format!("{prefix}_noisy.grl");
    let mask = format!("{prefix}_mask.grm");
    let cfg = p(dir.path(), "solver.cfg");
    std::fs::write(&cfg, "max_iter = 3\nrho = 2.0\n").unwrap();
    let a = p(dir.path(), "a");
    let b = p(dir.path(), "b");
    assert_eq!(run(&["separate", &noisy, &mask, "--out", &a, "--config", &cfg]).status.code(), Some(2));
    let o = run(&[
        "separate", &noisy, &mask, "--out", &b, "--rho", "2", "--max-iter", "3", "--lambda-s", "0.005",
        "--lambda-g", "0.01", "--eps", "0.0001",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        std::fs::read(format!("{a}_x.grl")).unwrap(),
        std::fs::read(format!("{b}_x.grl")).unwrap()
    );
    assert_eq!(run(&["separate", &noisy, &mask, "--out", &b, "--rho", "-1"]).status.code(), Some(1));
}

#[test]
fn separate_is_deterministic_and_handles_directories() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let batch = dir.path().join("batch");
    std::fs::create_dir(&batch).unwrap();
    let noisy = read_gather(format!("{prefix}_noisy.grl")).unwrap();
    write_gather(&noisy, batch.join("a.grl")).unwrap();
    write_gather(&noisy.with_samples(noisy.samples() * 0.5).unwrap(), batch.join("b.grl")).unwrap();
    let mask = format!("{prefix}_mask.grm");
    let out = p(dir.path(), "run");
    let o = run(&["separate", batch.to_str().unwrap(), &mask, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let single = p(dir.path(), "single");
    let o = run(&["separate", &format!("{prefix}_noisy.grl"), &mask, "--out", &single]);
    assert_eq!(o.status.code(), Some(0));
    for suffix in ["_x.grl", "_g.grl", "_report.csv"] {
        assert_eq!(
            std::fs::read(format!("{out}_a{suffix}")).unwrap(),
            std::fs::read(format!("{single}{suffix}")).unwrap(),
            "{suffix}"
        );
    }
    assert!(Path::new(&format!("{out}_b_x.grl")).exists());
}

#[test]
fn baseline_commands() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let noisy = format!("{prefix}_noisy.grl");
    let out = p(dir.path(), "fk");
    assert_eq!(run(&["baseline", "fk", &noisy, "--out", &out]).status.code(), Some(0));
    // files hold f32 samples, so additivity is checked at f32 resolution here
    let y = read_gather(&noisy).unwrap();
    let x = read_gather(format!("{out}_x.grl")).unwrap();
    let g = read_gather(format!("{out}_g.grl")).unwrap();
    let worst = (x.samples() + g.samples() - y.samples()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-6 * y.max_abs(), "{worst}");

    let empty = p(dir.path(), "empty.grm");
    write_mask(&Mask::zeros(128, 48), &empty).unwrap();
    let out = p(dir.path(), "lsvd");
    assert_eq!(
        run(&["baseline", "lsvd", &noisy, "--out", &out, "--mask", &empty]).status.code(),
        Some(0)
    );
    assert_eq!(read_gather(format!("{out}_x.grl")).unwrap(), y);
    assert_eq!(run(&["baseline", "lsvd", &noisy, "--out", &out]).status.code(), Some(1));

    let o = run(&["baseline", "inr", &noisy, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("fk") && err.contains("lsvd"), "{err}");
}

#[test]
fn metrics_command() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let clean = format!("{prefix}_clean.grl");
    let zero = p(dir.path(), "zero.grl");
    write_gather(&Gather::zeros(128, 48, 0.004, 10.0).unwrap(), &zero).unwrap();
    let o = run(&["metrics", &clean, &clean, &zero, "--header", "--method", "oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,snr_db,sim_mean,sim_var"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "oracle");
    assert_eq!(row[1].parse::<f64>().unwrap(), 300.0);
    assert!(row[2].parse::<f64>().unwrap() < 1e-6);

    let o = run(&["metrics", &clean, &clean, &format!("{prefix}_mask.grm")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn render_commands() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());

    let flat = p(dir.path(), "flat.grl");
    write_gather(&Gather::new(Array2::from_elem((16, 8), 0.3), 0.004, 10.0).unwrap(), &flat).unwrap();
    let img = p(dir.path(), "flat.pgm");
    assert_eq!(run(&["render", &flat, "--out", &img]).status.code(), Some(0));
    let (w, h, px) = pgm_pixels(&img);
    assert_eq!((w, h), (8, 16));
    assert!(px.iter().all(|&v| v == 128));

    let img = p(dir.path(), "mask.pgm");
    let mask = format!("{prefix}_mask.grm");
    assert_eq!(run(&["render", &mask, "--out", &img]).status.code(), Some(0));
    let (_, _, px) = pgm_pixels(&img);
    assert!(px.iter().all(|&v| v == 0 || v == 255));
    assert!(px.contains(&0) && px.contains(&255));

    let img = p(dir.path(), "signed.pgm");
    let noisy = format!("{prefix}_noisy.grl");
    let o = run(&["render", &noisy, "--out", &img, "--colormap", "signed", "--gain", "99"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(run(&["render", &noisy, "--out", &img, "--gain", "40"]).status.code(), Some(1));
}

#[test]
fn spectrum_peak_lies_on_groundroll_line() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth_into(dir.path());
    let noisy = format!("{prefix}_noisy.grl");
    let img = p(dir.path(), "fk.pgm");
    assert_eq!(run(&["spectrum", &noisy, "--out", &img]).status.code(), Some(0));
    let img2 = p(dir.path(), "fk2.pgm");
    assert_eq!(run(&["render", &noisy, "--fk", "--out", &img2]).status.code(), Some(0));
    assert_eq!(std::fs::read(&img).unwrap(), std::fs::read(&img2).unwrap());

    let (w, h, px) = pgm_pixels(&img);
    let idx = (0..px.len()).max_by_key(|&k| (px[k], std::cmp::Reverse(k))).unwrap();
    let (row, col) = (idx / w, idx % w);
    let fk = fk_spectrum(&read_gather(&noisy).unwrap());
    assert_eq!(h, fk.freq_axis.len());
    let f = fk.freq_axis[row];
    let k = fk.wavenumber_axis[col];
    let dk = fk.wavenumber_axis[1] - fk.wavenumber_axis[0];
    let v = fixture_config().groundroll[0].v_app;
    assert!(f > 0.0);
    assert!((k + f / v).abs() <= 2.0 * dk, "peak at f={f} k={k}, line k={}", -f / v);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("separate"));
    let o = run(&["mask", "/nonexistent/file.grl", "--out", "/tmp/never.grm"]);
    assert_eq!(o.status.code(), Some(1));
}
