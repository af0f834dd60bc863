//! `hdrforge` command-line front end.
//!
//! Every command prints one JSON object on stdout and human-readable notes on
//! stderr. Exit codes: 0 success, 2 bad arguments or unreadable input,
//! 3 insufficient data, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hdrforge::calibration::{
    fit_polynomial_crf, project_monotone, sample_pixels, solve_debevec, DebevecOptions, Weighting,
    DEFAULT_ANCHOR,
};
use hdrforge::fit::{fit_report, fit_stack, FitConfig, FitLoss};
use hdrforge::io::{read_crf, read_ldr, read_manifest, read_rgbe, write_crf, write_ldr, write_rgbe};
use hdrforge::metrics::{hdr_to_display, ms_ssim, psnr, ssim, MS_SSIM_WEIGHTS, PSNR_CAP, SSIM_WINDOW};
use hdrforge::objectives::{LogL2Loss, MuLawLoss, DEFAULT_MU};
use hdrforge::synthesis::{
    grad_check, linearize, merge, GradCheckOptions, LogRadianceLoss, SumLogRadiance,
    WeightFunction, WeightKind,
};
use hdrforge::tonemap::{reinhard, WhitePoint, DEFAULT_KEY};
use hdrforge::{Error, ExposureStack, HdrImage, LdrImage, Raster, RelaxedImage, Result};

#[derive(Parser)]
#[command(name = "hdrforge", version, about = "Differentiable multi-exposure HDR toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover the inverse camera response from a bracketed stack.
    Calibrate(CalibrateArgs),
    /// Merge a stack into a Radiance .hdr file.
    Merge(MergeArgs),
    /// Tone map a .hdr file to an 8-bit image.
    Tonemap(TonemapArgs),
    /// Compare two images.
    Metrics(MetricsArgs),
    /// Finite-difference check of the merge gradients.
    Gradcheck(GradcheckArgs),
    /// Gradient descent on stack intensities toward a target radiance map.
    Fit(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibWeighting {
    Hat,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeWeighting {
    Hat,
    Uniform,
}

impl From<MergeWeighting> for WeightFunction {
    fn from(w: MergeWeighting) -> Self {
        WeightFunction::new(match w {
            MergeWeighting::Hat => WeightKind::Hat,
            MergeWeighting::Uniform => WeightKind::Uniform,
        })
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Stack manifest (JSON).
    #[arg(long)]
    stack: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "hat")]
    weighting: CalibWeighting,
    #[arg(long = "samples-per-level", default_value_t = 2)]
    samples_per_level: usize,
    /// Exposure whose intensities drive the sampling; defaults to the middle one.
    #[arg(long)]
    reference: Option<usize>,
    /// Fit a polynomial response of this order instead.
    #[arg(long)]
    polynomial: Option<usize>,
    /// Project the solved curve onto non-decreasing tables.
    #[arg(long)]
    monotone: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    stack: PathBuf,
    #[arg(long)]
    crf: PathBuf,
    #[arg(long, value_enum, default_value = "hat")]
    weighting: MergeWeighting,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Operator {
    Reinhard,
    Mulaw,
}

#[derive(Args)]
struct TonemapArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "reinhard")]
    operator: Operator,
    #[arg(long, default_value_t = DEFAULT_KEY)]
    key: f64,
    /// Reinhard white point; the largest scaled luminance when omitted.
    #[arg(long)]
    white: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    psnr: bool,
    #[arg(long)]
    ssim: bool,
    #[arg(long)]
    msssim: bool,
    /// Inputs are .hdr files; compare their percentile-scaled mu-law versions.
    #[arg(long)]
    hdr: bool,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckLoss {
    Mulaw,
    LogL2,
    SumLog,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    stack: PathBuf,
    #[arg(long)]
    crf: PathBuf,
    #[arg(long, value_enum, default_value = "mulaw")]
    loss: CheckLoss,
    /// Target radiance for the mulaw / log-l2 losses; defaults to the merge of
    /// the stack scaled by one half.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    h: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: MergeWeighting,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitLossArg {
    Mulaw,
    LogL2,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    target: PathBuf,
    /// Manifest of the initial stack.
    #[arg(long)]
    init: PathBuf,
    #[arg(long)]
    crf: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 50.0)]
    lr: f64,
    #[arg(long, value_enum, default_value = "mulaw")]
    loss: FitLossArg,
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Amplitude of seeded uniform noise added to the initial stack.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long = "record-every", default_value_t = 1)]
    record_every: usize,
    #[arg(long = "no-halving")]
    no_halving: bool,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: MergeWeighting,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InsufficientData(_) => 3,
        Error::NumericalFailure(_) => 4,
        _ => 2,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HDRFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("HDRFORGE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot size thread pool: {e}")))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn calibrate(a: &CalibrateArgs) -> Result<Value> {
    let stack = read_manifest(&a.stack)?;
    let reference = a.reference.unwrap_or(stack.len() / 2);
    let samples = sample_pixels(&stack, a.samples_per_level, reference)?;
    eprintln!(
        "calibrate: {} exposures, {} sample rows",
        stack.len(),
        samples.rows()
    );
    if let Some(order) = a.polynomial {
        let poly = fit_polynomial_crf(&samples, order)?;
        let mut curve = poly.to_response_curve(DEFAULT_ANCHOR)?;
        if a.monotone {
            curve = project_monotone(&curve);
        }
        write_crf(&curve, &a.out)?;
        return Ok(json!({
            "command": "calibrate",
            "method": "polynomial",
            "order": order,
            "coefficients": (0..3).map(|c| poly.coefficients(c).to_vec()).collect::<Vec<_>>(),
            "monotone": curve.is_monotone(),
            "out": path_str(&a.out),
        }));
    }
    let opts = DebevecOptions {
        lambda: a.lambda,
        weighting: match a.weighting {
            CalibWeighting::Hat => Weighting::Hat,
            CalibWeighting::None => Weighting::None,
        },
        ..Default::default()
    };
    let sol = solve_debevec(&samples, &opts)?;
    let mut curve = sol.curve;
    if a.monotone {
        curve = project_monotone(&curve);
    }
    write_crf(&curve, &a.out)?;
    let channels: Vec<Value> = sol
        .diagnostics
        .iter()
        .enumerate()
        .map(|(c, d)| {
            eprintln!(
                "channel {c}: residual {:.3e}, smoothness {:.3e}, rank {}/{}, condition {:.3e}",
                d.data_residual, d.smoothness, d.rank, d.unknowns, d.condition
            );
            json!({
                "samples": d.samples,
                "data_residual": d.data_residual,
                "smoothness": d.smoothness,
                "rank": d.rank,
                "unknowns": d.unknowns,
                "condition": d.condition,
            })
        })
        .collect();
    let residual: f64 = sol.diagnostics.iter().map(|d| d.data_residual).sum();
    Ok(json!({
        "command": "calibrate",
        "method": "debevec",
        "lambda": a.lambda,
        "data_residual": residual,
        "channels": channels,
        "monotone": curve.is_monotone(),
        "out": path_str(&a.out),
    }))
}

fn merge_cmd(a: &MergeArgs) -> Result<Value> {
    let stack = read_manifest(&a.stack)?;
    let crf = read_crf(&a.crf)?;
    let hdr = merge(&stack, &linearize(&crf), &a.weighting.into())?;
    write_rgbe(&hdr, &a.out)?;
    eprintln!("merge: {} exposures -> {}", stack.len(), a.out.display());
    Ok(json!({
        "command": "merge",
        "width": hdr.width(),
        "height": hdr.height(),
        "max_radiance": hdr.max_value(),
        "out": path_str(&a.out),
    }))
}

fn tonemap_cmd(a: &TonemapArgs) -> Result<Value> {
    let hdr = read_rgbe(&a.input)?;
    let out = match a.operator {
        Operator::Reinhard => {
            let white = a.white.map_or(WhitePoint::Auto, WhitePoint::Value);
            reinhard(&hdr, a.key, white)?
        }
        Operator::Mulaw => hdr_to_display(&hdr, a.mu)?,
    };
    write_ldr(&out, &a.out)?;
    Ok(json!({
        "command": "tonemap",
        "operator": match a.operator { Operator::Reinhard => "reinhard", Operator::Mulaw => "mulaw" },
        "width": out.width(),
        "height": out.height(),
        "out": path_str(&a.out),
    }))
}

fn load_for_metrics(path: &Path, hdr: bool, mu: f64) -> Result<LdrImage> {
    if hdr {
        hdr_to_display(&read_rgbe(path)?, mu)
    } else {
        read_ldr(path)
    }
}

fn metrics_cmd(a: &MetricsArgs) -> Result<Value> {
    let r = load_for_metrics(&a.reference, a.hdr, a.mu)?;
    let t = load_for_metrics(&a.test, a.hdr, a.mu)?;
    let all = !(a.psnr || a.ssim || a.msssim);
    let mut out = json!({ "command": "metrics", "psnr_cap": PSNR_CAP });
    if all || a.psnr {
        out["psnr"] = json!(psnr(&r, &t)?);
    }
    if all || a.ssim {
        out["ssim"] = json!(ssim(&r, &t)?);
    }
    if all || a.msssim {
        let side = r.width().min(r.height());
        let levels = (1..=MS_SSIM_WEIGHTS.len()).rev().find(|l| side >= SSIM_WINDOW << (l - 1));
        match levels {
            Some(l) => {
                out["ms_ssim"] = json!(ms_ssim(&r, &t, l)?);
                out["ms_ssim_levels"] = json!(l);
            }
            None if a.msssim => ms_ssim(&r, &t, 1).map(|_| ())?,
            None => out["ms_ssim"] = Value::Null,
        }
    }
    Ok(out)
}

fn target_or_default(
    target: &Option<PathBuf>,
    stack: &ExposureStack<LdrImage>,
    crf: &hdrforge::calibration::ResponseCurve,
    w: &WeightFunction,
) -> Result<HdrImage> {
    match target {
        Some(p) => read_rgbe(p),
        None => {
            let m = merge(stack, &linearize(crf), w)?;
            HdrImage::new(m.width(), m.height(), m.data().iter().map(|v| 0.5 * v).collect())
        }
    }
}

/// Moves every intensity off the integer grid by a seeded offset in
/// `[-0.4, -0.1] U [0.1, 0.4]`, so finite differences stay inside one
/// segment of the response.
fn jitter(stack: &ExposureStack<LdrImage>, seed: u64) -> ExposureStack<RelaxedImage> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = stack.to_relaxed();
    for img in out.images_mut() {
        for i in 0..img.len() {
            let v = img.value(i);
            let mag: f64 = rng.gen_range(0.1..0.4);
            let off = if v <= 0.0 || (v < 255.0 && rng.gen_bool(0.5)) { mag } else { -mag };
            img.set(i, v + off);
        }
    }
    out
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<Value> {
    let stack = read_manifest(&a.stack)?;
    let crf = read_crf(&a.crf)?;
    let w: WeightFunction = a.weighting.into();
    let loss: Box<dyn LogRadianceLoss> = match a.loss {
        CheckLoss::SumLog => Box::new(SumLogRadiance),
        CheckLoss::Mulaw => Box::new(MuLawLoss::new(&target_or_default(&a.target, &stack, &crf, &w)?, a.mu)?),
        CheckLoss::LogL2 => Box::new(LogL2Loss::new(&target_or_default(&a.target, &stack, &crf, &w)?)?),
    };
    let relaxed = jitter(&stack, a.seed);
    let opts = GradCheckOptions {
        h: a.h,
        seed: a.seed,
        samples: a.samples,
        tolerance: a.tolerance,
    };
    let report = grad_check(&relaxed, &linearize(&crf), &w, loss.as_ref(), &opts)?;
    eprintln!(
        "gradcheck: {} coordinates, max relative error {:.3e}, {} failures",
        report.num_checked,
        report.max_rel_err,
        report.failures.len()
    );
    let out = json!({
        "command": "gradcheck",
        "h": a.h,
        "seed": a.seed,
        "max_rel_err": report.max_rel_err,
        "num_checked": report.num_checked,
        "failures": report.failures,
        "passed": report.passed(),
    });
    if !report.passed() {
        println!("{out}");
        return Err(Error::NumericalFailure(format!(
            "{} coordinates exceed relative error {}",
            report.failures.len(),
            a.tolerance
        )));
    }
    Ok(out)
}

fn fit_cmd(a: &FitArgs) -> Result<Value> {
    let target = read_rgbe(&a.target)?;
    let init = read_manifest(&a.init)?;
    let crf = read_crf(&a.crf)?;
    let cfg = FitConfig {
        steps: a.steps,
        lr: a.lr,
        loss: match a.loss {
            FitLossArg::Mulaw => FitLoss::MuLawHdr,
            FitLossArg::LogL2 => FitLoss::LogL2,
        },
        mu: a.mu,
        seed: a.seed,
        init_noise: a.noise,
        record_every: a.record_every,
        halving: !a.no_halving,
        ..Default::default()
    };
    let trace = fit_stack(&target, &init.to_relaxed(), &crf, &a.weighting.into(), &cfg)?;
    let files = fit_report(&trace, &a.out)?;
    eprintln!(
        "fit: loss {:.6e} -> {:.6e} over {} steps",
        trace.initial_loss(),
        trace.final_loss(),
        a.steps
    );
    Ok(json!({
        "command": "fit",
        "steps": a.steps,
        "initial_loss": trace.initial_loss(),
        "final_loss": trace.final_loss(),
        "records": trace.records.len(),
        "out": path_str(&a.out),
        "files": files,
    }))
}

fn run(cli: &Cli) -> Result<Value> {
    configure_threads()?;
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Merge(a) => merge_cmd(a),
        Command::Tonemap(a) => tonemap_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Fit(a) => fit_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
