//! Gradient descent on relaxed stack intensities through the merge, toward a
//! target radiance map.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::ResponseCurve;
use crate::error::{Error, Result};
use crate::image::{quantize, ExposureStack, HdrImage, Raster, RelaxedImage};
use crate::io::{write_bytes, write_ldr, write_rgbe};
use crate::objectives::{LogL2Loss, MuLawLoss, DEFAULT_MU};
use crate::synthesis::{
    check_same_shape, linearize, merge, merge_backward, merge_log, LinearizedResponse,
    LogRadianceLoss, WeightFunction,
};

/// Largest number of halvings tried before a step is abandoned.
pub const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitLoss {
    #[default]
    MuLawHdr,
    LogL2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    pub lr: f64,
    pub loss: FitLoss,
    pub mu: f64,
    pub clamp: (f64, f64),
    pub seed: u64,
    /// Uniform noise of this amplitude is added to the initial stack.
    pub init_noise: f64,
    pub record_every: usize,
    /// Halve the step until the loss does not increase.
    pub halving: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 50.0,
            loss: FitLoss::MuLawHdr,
            mu: DEFAULT_MU,
            clamp: (0.0, 255.0),
            seed: 0,
            init_noise: 0.0,
            record_every: 1,
            halving: true,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        let (lo, hi) = self.clamp;
        if !(0.0 <= lo && lo < hi && hi <= 255.0) {
            return Err(Error::invalid(format!(
                "clamp bounds must satisfy 0 <= lo < hi <= 255, got ({lo}, {hi})"
            )));
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return Err(Error::invalid("init_noise must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    pub final_stack: ExposureStack<RelaxedImage>,
    pub merged: HdrImage,
}

impl FitTrace {
    pub fn initial_loss(&self) -> f64 {
        self.records[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.records[self.records.len() - 1].loss
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }
}

fn build_loss(target: &HdrImage, cfg: &FitConfig) -> Result<Box<dyn LogRadianceLoss>> {
    Ok(match cfg.loss {
        FitLoss::MuLawHdr => Box::new(MuLawLoss::new(target, cfg.mu)?),
        FitLoss::LogL2 => Box::new(LogL2Loss::new(target)?),
    })
}

struct Problem<'a> {
    lin: LinearizedResponse,
    w: &'a WeightFunction,
    loss: Box<dyn LogRadianceLoss>,
}

impl Problem<'_> {
    fn value(&self, stack: &ExposureStack<RelaxedImage>, step: usize) -> Result<f64> {
        let v = self.loss.value(&merge_log(stack, &self.lin, self.w)?)?;
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite loss at step {step}")));
        }
        Ok(v)
    }

    fn value_and_grad(
        &self,
        stack: &ExposureStack<RelaxedImage>,
        step: usize,
    ) -> Result<(f64, Vec<Vec<f64>>, f64)> {
        let log = merge_log(stack, &self.lin, self.w)?;
        let (v, up) = self.loss.value_and_grad(&log)?;
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite loss at step {step}")));
        }
        let g = merge_backward(stack, &self.lin, self.w, &up)?;
        let norm = g.norm();
        Ok((v, g.images().to_vec(), norm))
    }
}

fn descend(
    stack: &ExposureStack<RelaxedImage>,
    grad: &[Vec<f64>],
    lr: f64,
    clamp: (f64, f64),
) -> ExposureStack<RelaxedImage> {
    let mut next = stack.clone();
    for (img, g) in next.images_mut().iter_mut().zip(grad) {
        for (i, gi) in g.iter().enumerate() {
            let v = (img.value(i) - lr * gi).clamp(clamp.0, clamp.1);
            img.set(i, v);
        }
    }
    next
}

fn perturb(stack: &ExposureStack<RelaxedImage>, cfg: &FitConfig) -> ExposureStack<RelaxedImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = stack.clone();
    for img in out.images_mut() {
        for i in 0..img.len() {
            let noise = rng.gen_range(-cfg.init_noise..=cfg.init_noise);
            img.set(i, (img.value(i) + noise).clamp(cfg.clamp.0, cfg.clamp.1));
        }
    }
    out
}

/// Runs `cfg.steps` descent steps. Loss and gradient norm are recorded every
/// `record_every` steps and after the last one.
pub fn fit_stack(
    target: &HdrImage,
    init: &ExposureStack<RelaxedImage>,
    crf: &ResponseCurve,
    w: &WeightFunction,
    cfg: &FitConfig,
) -> Result<FitTrace> {
    cfg.validate()?;
    check_same_shape(init, target)?;
    let problem = Problem {
        lin: linearize(crf),
        w,
        loss: build_loss(target, cfg)?,
    };
    let mut stack = if cfg.init_noise > 0.0 {
        perturb(init, cfg)
    } else {
        init.clone()
    };
    let mut records = Vec::new();
    for step in 0..cfg.steps {
        let (loss, grad, norm) = problem.value_and_grad(&stack, step)?;
        if step % cfg.record_every == 0 {
            records.push(TraceRecord {
                step,
                loss,
                grad_norm: norm,
            });
        }
        let mut lr = cfg.lr;
        let mut candidate = descend(&stack, &grad, lr, cfg.clamp);
        if cfg.halving {
            let mut halvings = 0;
            while problem.value(&candidate, step)? > loss {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    candidate = stack.clone();
                    break;
                }
                lr /= 2.0;
                candidate = descend(&stack, &grad, lr, cfg.clamp);
            }
        }
        stack = candidate;
    }
    let (loss, _, norm) = problem.value_and_grad(&stack, cfg.steps)?;
    records.push(TraceRecord {
        step: cfg.steps,
        loss,
        grad_norm: norm,
    });
    let merged = merge(&stack, &problem.lin, w)?;
    Ok(FitTrace {
        records,
        final_stack: stack,
        merged,
    })
}

pub const TRACE_FILE: &str = "trace.csv";
pub const MERGED_FILE: &str = "merged.hdr";

pub fn trace_csv(trace: &FitTrace) -> String {
    let mut s = String::from("step,loss,grad_norm\n");
    for r in &trace.records {
        s.push_str(&format!("{},{},{}\n", r.step, r.loss, r.grad_norm));
    }
    s
}

/// Writes `trace.csv`, `stack_NN.ppm` per exposure and `merged.hdr` into
/// `dir`, creating it if needed. Returns the written file names.
pub fn fit_report(trace: &FitTrace, dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = vec![TRACE_FILE.to_string()];
    write_bytes(&dir.join(TRACE_FILE), trace_csv(trace).as_bytes())?;
    for (j, img) in trace.final_stack.images().iter().enumerate() {
        let name = format!("stack_{j:02}.ppm");
        write_ldr(&quantize(img), dir.join(&name))?;
        names.push(name);
    }
    write_rgbe(&trace.merged, dir.join(MERGED_FILE))?;
    names.push(MERGED_FILE.to_string());
    Ok(names)
}
