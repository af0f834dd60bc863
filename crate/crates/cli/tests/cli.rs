use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdrforge::io::{read_crf, read_ldr, read_rgbe, write_ldr, write_manifest, ManifestEntry, StackManifest};
use hdrforge::{ExposureUnit, LdrImage, Raster};
use serde_json::Value;

fn hdrforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdrforge"))
        .args(args)
        .env("HDRFORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad json {text:?}: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Gamma-2.2 camera over a smooth log-radiance ramp, three brackets two stops apart.
fn write_stack(dir: &Path, count: usize) -> PathBuf {
    let (w, h) = (48, 32);
    let stops: Vec<f64> = match count {
        1 => vec![0.0],
        _ => (0..count).map(|k| 2.0 * k as f64 - (count - 1) as f64).collect(),
    };
    let mut entries = Vec::new();
    for (k, ev) in stops.iter().enumerate() {
        let img = LdrImage::from_fn(w, h, |x, y, c| {
            let t = (y * w + x) as f64 / (w * h - 1) as f64;
            let log_e = -7.0 + 12.0 * t + 0.3 * c as f64 + ev * std::f64::consts::LN_2;
            (128.0 * (log_e / 2.2).exp()).round().clamp(0.0, 255.0) as u8
        })
        .unwrap();
        let name = format!("img{k}.ppm");
        write_ldr(&img, dir.join(&name)).unwrap();
        entries.push(ManifestEntry {
            path: name.into(),
            ev: *ev,
            unit: ExposureUnit::Stops,
        });
    }
    let manifest = dir.join("stack.json");
    write_manifest(&StackManifest { entries }, &manifest).unwrap();
    manifest
}

fn calibrated(dir: &Path) -> (PathBuf, PathBuf) {
    let stack = write_stack(dir, 3);
    let crf = dir.join("crf.csv");
    let out = hdrforge(&["calibrate", "--stack", s(&stack), "--out", s(&crf)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (stack, crf)
}

#[test]
fn calibrate_writes_full_table() {
    let dir = tempfile::tempdir().unwrap();
    let (_, crf) = calibrated(dir.path());
    let text = std::fs::read_to_string(&crf).unwrap();
    assert_eq!(text.lines().count(), 257);
    let curve = read_crf(&crf).unwrap();
    assert_eq!(curve.anchor_index(), 128);
    assert!(curve.g(200, 0) > curve.g(60, 0));
}

#[test]
fn calibrate_single_exposure_is_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let stack = write_stack(dir.path(), 1);
    let out = hdrforge(&["calibrate", "--stack", s(&stack), "--out", s(&dir.path().join("c.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("insufficient"), "{err}");
}

#[test]
fn calibrate_lambda_zero_fits_data() {
    let dir = tempfile::tempdir().unwrap();
    // g(z) = (z - 128) / 32: a 64-level shift is exactly 2 natural-log units
    let mut entries = Vec::new();
    for (k, off) in [-64i32, 0, 64].iter().enumerate() {
        let img = LdrImage::from_fn(16, 16, |x, y, c| ((64 + (y * 16 + x + 37 * c) % 128) as i32 + off) as u8).unwrap();
        let name = format!("lin{k}.ppm");
        write_ldr(&img, dir.path().join(&name)).unwrap();
        entries.push(ManifestEntry {
            path: name.into(),
            ev: *off as f64 / 32.0,
            unit: ExposureUnit::NaturalLog,
        });
    }
    let stack = dir.path().join("lin.json");
    write_manifest(&StackManifest { entries }, &stack).unwrap();
    let crf = dir.path().join("c.csv");
    let out = hdrforge(&[
        "calibrate", "--stack", s(&stack), "--lambda", "0", "--samples-per-level", "4", "--out", s(&crf),
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["method"], "debevec");
    assert!(v["data_residual"].as_f64().unwrap() < 1e-10, "{v}");
}

#[test]
fn calibrate_polynomial_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let stack = write_stack(dir.path(), 3);
    let crf = dir.path().join("p.csv");
    let out = hdrforge(&[
        "calibrate", "--stack", s(&stack), "--polynomial", "3", "--monotone", "--out", s(&crf),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["method"], "polynomial");
    assert_eq!(v["monotone"], true);
    assert!(read_crf(&crf).unwrap().is_monotone());
}

#[test]
fn merge_then_tonemap() {
    let dir = tempfile::tempdir().unwrap();
    let (stack, crf) = calibrated(dir.path());
    let hdr = dir.path().join("m.hdr");
    let out = hdrforge(&["merge", "--stack", s(&stack), "--crf", s(&crf), "--out", s(&hdr)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["width"], 48);
    let merged = read_rgbe(&hdr).unwrap();
    assert_eq!((merged.width(), merged.height()), (48, 32));
    assert!(merged.max_value() > 0.0);

    for op in ["reinhard", "mulaw"] {
        let png = dir.path().join(format!("{op}.png"));
        let out = hdrforge(&["tonemap", "--in", s(&hdr), "--operator", op, "--out", s(&png)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let ldr = read_ldr(&png).unwrap();
        assert_eq!((ldr.width(), ldr.height()), (48, 32));
    }
    let out = hdrforge(&["tonemap", "--in", s(&hdr), "--operator", "drago", "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn merge_missing_crf() {
    let dir = tempfile::tempdir().unwrap();
    let stack = write_stack(dir.path(), 3);
    let out = hdrforge(&[
        "merge",
        "--stack",
        s(&stack),
        "--crf",
        s(&dir.path().join("absent.csv")),
        "--out",
        s(&dir.path().join("m.hdr")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn metrics_identity_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let img = LdrImage::from_fn(40, 40, |x, y, c| ((x * 5 + y * 3 + c * 40) % 256) as u8).unwrap();
    write_ldr(&img, &a).unwrap();
    let out = hdrforge(&["metrics", "--ref", s(&a), "--test", s(&a)]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["psnr"].as_f64(), Some(99.0));
    assert_eq!(v["ssim"].as_f64(), Some(1.0));
    assert!((v["ms_ssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = hdrforge(&["metrics", "--ref", s(&a), "--test", s(&a), "--psnr"]);
    let v = json(&out);
    assert!(v.get("ssim").is_none() && v.get("psnr").is_some());

    write_ldr(&LdrImage::filled(20, 40, 7).unwrap(), &b).unwrap();
    let out = hdrforge(&["metrics", "--ref", s(&a), "--test", s(&b)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (stack, crf) = calibrated(dir.path());
    let run = |seed: &str| hdrforge(&["gradcheck", "--stack", s(&stack), "--crf", s(&crf), "--seed", seed]);
    let first = run("5");
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stdout));
    let v = json(&first);
    assert_eq!(v["passed"], true);
    assert!(v["num_checked"].as_u64().unwrap() >= 500);
    assert!(v["max_rel_err"].as_f64().unwrap() < 1e-6);
    assert_eq!(first.stdout, run("5").stdout);

    for loss in ["log-l2", "sum-log"] {
        let out = hdrforge(&["gradcheck", "--stack", s(&stack), "--crf", s(&crf), "--loss", loss]);
        assert!(out.status.success(), "{loss}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let out = hdrforge(&["gradcheck", "--stack", s(&stack), "--crf", s(&crf), "--h", "0.6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let (stack, crf) = calibrated(dir.path());
    let hdr = dir.path().join("target.hdr");
    assert!(hdrforge(&["merge", "--stack", s(&stack), "--crf", s(&crf), "--out", s(&hdr)])
        .status
        .success());
    let out_dir = dir.path().join("fit");
    let out = hdrforge(&[
        "fit", "--target", s(&hdr), "--init", s(&stack), "--crf", s(&crf), "--steps", "20", "--lr",
        "200000", "--noise", "10", "--seed", "1", "--out", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["final_loss"].as_f64().unwrap() <= v["initial_loss"].as_f64().unwrap());
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 22);
    assert!(out_dir.join("merged.hdr").exists());

    let out = hdrforge(&[
        "fit", "--target", s(&dir.path().join("none.hdr")), "--init", s(&stack), "--crf", s(&crf),
        "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_hdrforge"))
        .args(["metrics", "--ref", "a.ppm", "--test", "b.ppm"])
        .env("HDRFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
