use serde::{Deserialize, Serialize};

use crate::diffusion::GaussianStream;
use crate::dis_loss::{DisBreakdown, DisObjective, DisWeights};
use crate::error::{invalid, Error, Result};
use crate::image::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub steps: usize,
    /// Step size per pixel; see [`run_descent`].
    pub learning_rate: f64,
    pub lambda_dis: f64,
    pub dis_weights: DisWeights,
    /// Seed for [`perturbed_init`].
    pub seed: u64,
    pub log_every: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 0.1,
            lambda_dis: 0.02,
            dis_weights: DisWeights::default(),
            seed: 0,
            log_every: 10,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be > 0"));
        }
        if !(self.lambda_dis.is_finite() && self.lambda_dis >= 0.0) {
            return Err(invalid("lambda_dis must be >= 0"));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every must be >= 1"));
        }
        self.dis_weights.validate()
    }
}

/// `MSE(x, target) + λ_dis · DIS(x, target)` with target-side terms cached.
#[derive(Debug, Clone)]
pub struct TotalObjective {
    dis: DisObjective,
    lambda_dis: f64,
}

impl TotalObjective {
    pub fn new(target: &ImageGrid, lambda_dis: f64, weights: &DisWeights) -> Result<Self> {
        Ok(Self {
            dis: DisObjective::new(target, weights)?,
            lambda_dis,
        })
    }

    pub fn dis(&self) -> &DisObjective {
        &self.dis
    }

    pub fn mse(&self, x: &ImageGrid) -> Result<f64> {
        let d = x.zip_map(self.dis.target(), |a, b| a - b)?;
        Ok(d.as_slice().iter().map(|v| v * v).sum::<f64>() / d.len() as f64)
    }

    /// `(total, mse, breakdown)`.
    pub fn evaluate(&self, x: &ImageGrid) -> Result<(f64, f64, DisBreakdown)> {
        let mse = self.mse(x)?;
        let dis = self.dis.evaluate(x)?;
        Ok((mse + self.lambda_dis * dis.total, mse, dis))
    }

    pub fn grad(&self, x: &ImageGrid) -> Result<ImageGrid> {
        let n = x.len() as f64;
        let mse = x.zip_map(self.dis.target(), |a, b| 2.0 * (a - b) / n)?;
        if self.lambda_dis == 0.0 {
            return Ok(mse);
        }
        let dis = self.dis.grad(x)?;
        mse.zip_map(&dis, |m, d| m + self.lambda_dis * d)
    }

    /// See [`DisObjective::kink_pixels`]; the MSE term is smooth.
    pub fn kink_pixels(&self, x: &ImageGrid, h: f64) -> Result<Vec<bool>> {
        if self.lambda_dis == 0.0 {
            return Ok(vec![false; x.len()]);
        }
        self.dis.kink_pixels(x, h)
    }
}

/// Total loss and the DIS breakdown behind it.
pub fn total_loss(
    x: &ImageGrid,
    target: &ImageGrid,
    cfg: &OptimizeConfig,
) -> Result<(f64, DisBreakdown)> {
    x.ensure_same_dims(target)?;
    let (total, _, dis) =
        TotalObjective::new(target, cfg.lambda_dis, &cfg.dis_weights)?.evaluate(x)?;
    Ok((total, dis))
}

/// `2(x − target)/N + λ_dis · ∇DIS`.
pub fn total_loss_grad(
    x: &ImageGrid,
    target: &ImageGrid,
    cfg: &OptimizeConfig,
) -> Result<ImageGrid> {
    x.ensure_same_dims(target)?;
    TotalObjective::new(target, cfg.lambda_dis, &cfg.dis_weights)?.grad(x)
}

/// `target` plus seeded uniform noise in `[-amplitude, amplitude)`.
pub fn perturbed_init(target: &ImageGrid, amplitude: f64, seed: u64) -> ImageGrid {
    let noise = GaussianStream::new(seed).uniform_image(target.height(), target.width(), amplitude);
    target.zip_map(&noise, |t, n| t + n).expect("same dims")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub mse: f64,
    pub dis: DisBreakdown,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    pub records: Vec<TraceRecord>,
    pub final_image: ImageGrid,
}

impl OptimizeTrace {
    pub fn first(&self) -> &TraceRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace is never empty")
    }
}

/// Plain gradient descent from `init` towards `target`.
///
/// Both loss terms are pixel means, so their gradients carry a `1/N`
/// factor. The learning rate is applied per pixel: each update is
/// `x ← x − lr · N · ∇total`, which makes `lr` independent of the image
/// size (with `lr = 0.5` the MSE term alone would land on the target in
/// one step).
///
/// Records step 0 (the initial state), every `log_every`-th step, and
/// the final step.
pub fn run_descent(
    init: &ImageGrid,
    target: &ImageGrid,
    cfg: &OptimizeConfig,
) -> Result<OptimizeTrace> {
    cfg.validate()?;
    init.ensure_same_dims(target)?;
    let objective = TotalObjective::new(target, cfg.lambda_dis, &cfg.dis_weights)?;
    let step_size = cfg.learning_rate * init.len() as f64;
    let mut x = init.clone();
    let mut records = Vec::with_capacity(cfg.steps / cfg.log_every + 2);

    let record = |step: usize, x: &ImageGrid| -> Result<TraceRecord> {
        let (total, mse, dis) = objective.evaluate(x)?;
        if !total.is_finite() {
            return Err(Error::Numerical {
                step,
                detail: format!("total loss is {total}"),
            });
        }
        Ok(TraceRecord {
            step,
            mse,
            dis,
            total,
        })
    };

    records.push(record(0, &x)?);
    for step in 1..=cfg.steps {
        let grad = objective.grad(&x)?;
        for (v, g) in x.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *v -= step_size * g;
        }
        if !x.is_finite() {
            return Err(Error::Numerical {
                step,
                detail: "image contains non-finite pixels".into(),
            });
        }
        if step % cfg.log_every == 0 || step == cfg.steps {
            records.push(record(step, &x)?);
        }
    }
    Ok(OptimizeTrace {
        records,
        final_image: x,
    })
}
