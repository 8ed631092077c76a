use serde::{Deserialize, Serialize};

use super::{DiffusionSchedule, GaussianStream};
use crate::error::{invalid, Error, Result};
use crate::image::ImageGrid;
use crate::par;

/// Noise predictor `ε_θ(x_t, t, condition)`.
///
/// The condition payload is opaque to the sampler; a content/style
/// encoder would live behind it. Closures with the matching signature
/// implement the trait.
pub trait Denoiser<C: ?Sized = ()> {
    fn predict(&self, x_t: &ImageGrid, t: usize, condition: &C) -> ImageGrid;
}

impl<C: ?Sized, F> Denoiser<C> for F
where
    F: Fn(&ImageGrid, usize, &C) -> ImageGrid,
{
    fn predict(&self, x_t: &ImageGrid, t: usize, condition: &C) -> ImageGrid {
        self(x_t, t, condition)
    }
}

/// Always predicts zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl<C: ?Sized> Denoiser<C> for ZeroDenoiser {
    fn predict(&self, x_t: &ImageGrid, _t: usize, _condition: &C) -> ImageGrid {
        ImageGrid::filled(x_t.height(), x_t.width(), 0.0)
    }
}

/// Knows the clean image and returns the exact noise that maps it to
/// `x_t`: `(x_t − sqrt(ᾱ_t)·x0) / sqrt(1 − ᾱ_t)`.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub x0: ImageGrid,
    pub schedule: DiffusionSchedule,
}

impl<C: ?Sized> Denoiser<C> for OracleDenoiser {
    fn predict(&self, x_t: &ImageGrid, t: usize, _condition: &C) -> ImageGrid {
        let ab = self.schedule.alpha_bar(t);
        let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
        x_t.zip_map(&self.x0, |x, x0| (x - s * x0) / n)
            .expect("oracle built for this image size")
    }
}

/// Variance of the noise injected by each reverse step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// `σ_t² = β_t`.
    #[default]
    Beta,
    /// Deterministic: `σ_t = 0`.
    Zero,
}

/// `x_t = sqrt(ᾱ_t)·x0 + sqrt(1 − ᾱ_t)·ε`.
pub fn forward_sample(
    x0: &ImageGrid,
    t: usize,
    eps: &ImageGrid,
    s: &DiffusionSchedule,
) -> Result<ImageGrid> {
    s.check_timestep(t)?;
    let ab = s.alpha_bar(t);
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(eps, |x, e| signal * x + noise * e)
}

fn predict_checked<C: ?Sized, D: Denoiser<C> + ?Sized>(
    denoiser: &D,
    x_t: &ImageGrid,
    t: usize,
    condition: &C,
) -> Result<ImageGrid> {
    let out = denoiser.predict(x_t, t, condition);
    if out.dims() != x_t.dims() {
        return Err(Error::ContractViolation(format!(
            "denoiser returned {}x{} for a {}x{} input",
            out.height(),
            out.width(),
            x_t.height(),
            x_t.width()
        )));
    }
    Ok(out)
}

/// Mean squared error between `eps` and the denoiser's prediction at
/// `forward_sample(x0, t, eps)`.
pub fn training_loss<C: ?Sized, D: Denoiser<C> + ?Sized>(
    x0: &ImageGrid,
    t: usize,
    eps: &ImageGrid,
    denoiser: &D,
    condition: &C,
    s: &DiffusionSchedule,
) -> Result<f64> {
    let x_t = forward_sample(x0, t, eps, s)?;
    let pred = predict_checked(denoiser, &x_t, t, condition)?;
    let sq: f64 = eps
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .map(|(e, p)| (e - p) * (e - p))
        .sum();
    Ok(sq / eps.len() as f64)
}

/// One ancestral step `x_t → x_{t−1}`:
///
/// `(x_t − (1 − α_t)/sqrt(1 − ᾱ_t) · ε̂) / sqrt(α_t) + σ_t·z`.
///
/// No noise is added at `t = 1`, so `z` may be `None` there or in
/// [`SigmaMode::Zero`].
pub fn reverse_step(
    x_t: &ImageGrid,
    t: usize,
    eps_hat: &ImageGrid,
    z: Option<&ImageGrid>,
    s: &DiffusionSchedule,
    mode: SigmaMode,
) -> Result<ImageGrid> {
    s.check_timestep(t)?;
    let sqrt_alpha = s.alpha(t).sqrt();
    let coef = s.beta(t) / (1.0 - s.alpha_bar(t)).sqrt();
    let mean = x_t.zip_map(eps_hat, |x, e| (x - coef * e) / sqrt_alpha)?;
    let sigma = match mode {
        SigmaMode::Zero => return Ok(mean),
        SigmaMode::Beta if t == 1 => return Ok(mean),
        SigmaMode::Beta => s.beta(t).sqrt(),
    };
    let z = z.ok_or_else(|| invalid(format!("reverse step at t={t} needs noise z")))?;
    mean.zip_map(z, |m, z| m + sigma * z)
}

/// Draws `x_T ~ N(0, I)` and denoises down to `x_0`.
///
/// All randomness comes from `GaussianStream::new(seed)`: first `x_T`,
/// then one `z` image per step with `t > 1` in [`SigmaMode::Beta`].
pub fn sample<C: ?Sized, D: Denoiser<C> + ?Sized>(
    denoiser: &D,
    condition: &C,
    shape: (usize, usize),
    s: &DiffusionSchedule,
    seed: u64,
    mode: SigmaMode,
) -> Result<ImageGrid> {
    sample_with(
        denoiser,
        condition,
        shape,
        s,
        GaussianStream::new(seed),
        mode,
        |_, _| {},
    )
}

/// [`sample`] with an explicit noise stream and an observer called with
/// `(T, x_T)` and then `(t − 1, x_{t−1})` after every step.
pub fn sample_with<C: ?Sized, D: Denoiser<C> + ?Sized>(
    denoiser: &D,
    condition: &C,
    (height, width): (usize, usize),
    s: &DiffusionSchedule,
    mut noise: GaussianStream,
    mode: SigmaMode,
    mut observe: impl FnMut(usize, &ImageGrid),
) -> Result<ImageGrid> {
    if height == 0 || width == 0 {
        return Err(invalid("sample shape must be positive"));
    }
    let total = s.total_timesteps();
    let mut x = noise.normal_image(height, width);
    observe(total, &x);
    for t in (1..=total).rev() {
        let eps_hat = predict_checked(denoiser, &x, t, condition)?;
        let z = (mode == SigmaMode::Beta && t > 1).then(|| noise.normal_image(height, width));
        x = reverse_step(&x, t, &eps_hat, z.as_ref(), s, mode)?;
        observe(t - 1, &x);
    }
    Ok(x)
}

/// `count` independent samples; sample `i` uses stream `i` of `seed`.
pub fn sample_batch<C, D>(
    denoiser: &D,
    condition: &C,
    shape: (usize, usize),
    s: &DiffusionSchedule,
    seed: u64,
    mode: SigmaMode,
    count: usize,
) -> Result<Vec<ImageGrid>>
where
    C: ?Sized + Sync,
    D: Denoiser<C> + ?Sized + Sync,
{
    let indices: Vec<u64> = (0..count as u64).collect();
    par::map(&indices, |&i| {
        sample_with(
            denoiser,
            condition,
            shape,
            s,
            GaussianStream::with_stream(seed, i),
            mode,
            |_, _| {},
        )
    })
    .into_iter()
    .collect()
}
