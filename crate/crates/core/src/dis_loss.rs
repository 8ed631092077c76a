//! Differentiable ink-structure loss.
//!
//! Three L1 terms, each averaged over pixels:
//!
//! * core: soft erosions of generated and target images must agree;
//! * boundary: the pixel difference restricted to the morphological
//!   boundary band of the target;
//! * smooth: Laplacian responses must agree.
//!
//! `total = λ_c·core + λ_b·boundary + λ_lap·smooth`. Gradients use the
//! subgradient `sign(0) = 0` for every absolute value.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{laplacian, laplacian_transpose, ImageGrid};
use crate::soft_morph::{hard_morph, soft_erosion, soft_erosion_vjp, MorphConfig, MorphMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisWeights {
    pub lambda_c: f64,
    pub lambda_b: f64,
    pub lambda_lap: f64,
    pub morph: MorphConfig,
    /// Radius of the boundary band. Falls back to `morph.radius`.
    pub mask_radius: Option<usize>,
}

impl Default for DisWeights {
    fn default() -> Self {
        Self {
            lambda_c: 1.0,
            lambda_b: 1.0,
            lambda_lap: 1.0,
            morph: MorphConfig::default(),
            mask_radius: None,
        }
    }
}

impl DisWeights {
    pub fn new(lambda_c: f64, lambda_b: f64, lambda_lap: f64, morph: MorphConfig) -> Result<Self> {
        let w = Self {
            lambda_c,
            lambda_b,
            lambda_lap,
            morph,
            mask_radius: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn with_mask_radius(mut self, radius: usize) -> Self {
        self.mask_radius = Some(radius);
        self
    }

    pub fn mask_radius(&self) -> usize {
        self.mask_radius.unwrap_or(self.morph.radius)
    }

    /// Same weights with every λ multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambda_c: self.lambda_c * factor,
            lambda_b: self.lambda_b * factor,
            lambda_lap: self.lambda_lap * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_c, self.lambda_b, self.lambda_lap];
        if !lambdas.iter().all(|l| l.is_finite() && *l >= 0.0) {
            return Err(invalid("loss weights must be finite and >= 0"));
        }
        if lambdas.iter().all(|&l| l == 0.0) {
            return Err(invalid("at least one loss weight must be > 0"));
        }
        if self.mask_radius == Some(0) {
            return Err(invalid("mask radius must be >= 1"));
        }
        self.morph.validate()
    }
}

/// Per-component loss values and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisBreakdown {
    pub core: f64,
    pub boundary: f64,
    pub smooth: f64,
    pub total: f64,
}

/// Flat JSON document for a breakdown together with the weights that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisReport {
    pub core: f64,
    pub boundary: f64,
    pub smooth: f64,
    pub total: f64,
    pub weights: WeightsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsReport {
    pub lambda_c: f64,
    pub lambda_b: f64,
    pub lambda_lap: f64,
    pub tau: f64,
    pub radius: usize,
    pub mask_radius: usize,
}

impl DisReport {
    pub fn new(b: &DisBreakdown, w: &DisWeights) -> Self {
        Self {
            core: b.core,
            boundary: b.boundary,
            smooth: b.smooth,
            total: b.total,
            weights: WeightsReport {
                lambda_c: w.lambda_c,
                lambda_b: w.lambda_b,
                lambda_lap: w.lambda_lap,
                tau: w.morph.tau,
                radius: w.morph.radius,
                mask_radius: w.mask_radius(),
            },
        }
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn mean_abs(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(f64::abs).sum::<f64>() / n as f64
}

/// `(dilate_hard(target) − erode_hard(target)) / 2`: 1 on the boundary
/// band, 0 elsewhere.
pub fn boundary_mask(target: &ImageGrid, radius: usize) -> Result<ImageGrid> {
    let d = hard_morph(target, radius, MorphMode::Dilate)?;
    let e = hard_morph(target, radius, MorphMode::Erode)?;
    d.zip_map(&e, |a, b| (a - b) / 2.0)
}

type GradTerm = fn(&DisObjective, &ImageGrid) -> Result<ImageGrid>;

/// Target-side quantities precomputed once and reused for every
/// evaluation against a changing generated image.
#[derive(Debug, Clone)]
pub struct DisObjective {
    target: ImageGrid,
    weights: DisWeights,
    eroded_target: ImageGrid,
    laplacian_target: ImageGrid,
    mask: ImageGrid,
}

impl DisObjective {
    pub fn new(target: &ImageGrid, weights: &DisWeights) -> Result<Self> {
        weights.validate()?;
        Ok(Self {
            target: target.clone(),
            weights: *weights,
            eroded_target: soft_erosion(target, &weights.morph)?,
            laplacian_target: laplacian(target)?,
            mask: boundary_mask(target, weights.mask_radius())?,
        })
    }

    pub fn target(&self) -> &ImageGrid {
        &self.target
    }

    pub fn weights(&self) -> &DisWeights {
        &self.weights
    }

    pub fn mask(&self) -> &ImageGrid {
        &self.mask
    }

    fn core_residual(&self, g: &ImageGrid) -> Result<ImageGrid> {
        soft_erosion(g, &self.weights.morph)?.zip_map(&self.eroded_target, |a, b| a - b)
    }

    fn boundary_residual(&self, g: &ImageGrid) -> Result<ImageGrid> {
        let diff = g.zip_map(&self.target, |a, b| a - b)?;
        diff.zip_map(&self.mask, |d, m| d * m)
    }

    fn smooth_residual(&self, g: &ImageGrid) -> Result<ImageGrid> {
        laplacian(g)?.zip_map(&self.laplacian_target, |a, b| a - b)
    }

    pub fn core(&self, g: &ImageGrid) -> Result<f64> {
        let r = self.core_residual(g)?;
        Ok(mean_abs(r.as_slice().iter().copied(), r.len()))
    }

    pub fn boundary(&self, g: &ImageGrid) -> Result<f64> {
        let r = self.boundary_residual(g)?;
        Ok(mean_abs(r.as_slice().iter().copied(), r.len()))
    }

    pub fn smooth(&self, g: &ImageGrid) -> Result<f64> {
        let r = self.smooth_residual(g)?;
        Ok(mean_abs(r.as_slice().iter().copied(), r.len()))
    }

    pub fn evaluate(&self, g: &ImageGrid) -> Result<DisBreakdown> {
        let core = self.core(g)?;
        let boundary = self.boundary(g)?;
        let smooth = self.smooth(g)?;
        let w = &self.weights;
        Ok(DisBreakdown {
            core,
            boundary,
            smooth,
            total: w.lambda_c * core + w.lambda_b * boundary + w.lambda_lap * smooth,
        })
    }

    pub fn core_grad(&self, g: &ImageGrid) -> Result<ImageGrid> {
        let n = g.len() as f64;
        let upstream = self.core_residual(g)?.map(|r| sign(r) / n);
        soft_erosion_vjp(g, &self.weights.morph, &upstream)
    }

    pub fn boundary_grad(&self, g: &ImageGrid) -> Result<ImageGrid> {
        let n = g.len() as f64;
        self.boundary_residual(g)?
            .zip_map(&self.mask, |r, m| m * sign(r) / n)
    }

    pub fn smooth_grad(&self, g: &ImageGrid) -> Result<ImageGrid> {
        let n = g.len() as f64;
        laplacian_transpose(&self.smooth_residual(g)?.map(|r| sign(r) / n))
    }

    /// Gradient of `total` with respect to the generated image.
    pub fn grad(&self, g: &ImageGrid) -> Result<ImageGrid> {
        let w = &self.weights;
        let mut acc = vec![0.0; g.len()];
        let terms: [(f64, GradTerm); 3] = [
            (w.lambda_c, Self::core_grad),
            (w.lambda_b, Self::boundary_grad),
            (w.lambda_lap, Self::smooth_grad),
        ];
        for (lambda, term) in terms {
            if lambda == 0.0 {
                continue;
            }
            let part = term(self, g)?;
            for (a, p) in acc.iter_mut().zip(part.as_slice()) {
                *a += lambda * p;
            }
        }
        Ok(ImageGrid::from_raw(g.height(), g.width(), acc))
    }

    /// Marks pixels where a central difference of half-width `h` may
    /// straddle a kink of one of the active absolute-value terms.
    ///
    /// A pixel is flagged when some residual it influences lies within
    /// `1e-6 + L·h` of zero, `L` bounding that residual's sensitivity
    /// to the pixel (0.25 for the core term, 1 for the boundary term,
    /// 8 for the Laplacian term).
    pub fn kink_pixels(&self, g: &ImageGrid, h: f64) -> Result<Vec<bool>> {
        let (rows, cols) = g.dims();
        let mut flagged = vec![false; g.len()];
        let w = &self.weights;
        let mut mark_window = |residual: &ImageGrid, radius: usize, margin: f64| {
            let r = radius as isize;
            for qy in 0..rows {
                for qx in 0..cols {
                    if residual.get(qy, qx).abs() > margin {
                        continue;
                    }
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let py = qy as isize + dy;
                            let px = qx as isize + dx;
                            if py >= 0 && px >= 0 && (py as usize) < rows && (px as usize) < cols {
                                flagged[py as usize * cols + px as usize] = true;
                            }
                        }
                    }
                }
            }
        };
        if w.lambda_c > 0.0 {
            mark_window(&self.core_residual(g)?, w.morph.radius, 1e-6 + 0.25 * h);
        }
        if w.lambda_lap > 0.0 {
            mark_window(&self.smooth_residual(g)?, 1, 1e-6 + 8.0 * h);
        }
        if w.lambda_b > 0.0 {
            let diff = g.zip_map(&self.target, |a, b| a - b)?;
            for (i, (d, m)) in diff.as_slice().iter().zip(self.mask.as_slice()).enumerate() {
                if *m != 0.0 && d.abs() <= 1e-6 + h {
                    flagged[i] = true;
                }
            }
        }
        Ok(flagged)
    }
}

/// Mean `|soft_erosion(generated) − soft_erosion(target)|`.
pub fn core_loss(generated: &ImageGrid, target: &ImageGrid, cfg: &MorphConfig) -> Result<f64> {
    generated.ensure_same_dims(target)?;
    let a = soft_erosion(generated, cfg)?;
    let b = soft_erosion(target, cfg)?;
    Ok(mean_abs(
        a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p - q),
        a.len(),
    ))
}

/// Mean `|(generated − target) ⊙ boundary_mask(target)|`.
pub fn boundary_loss(generated: &ImageGrid, target: &ImageGrid, radius: usize) -> Result<f64> {
    generated.ensure_same_dims(target)?;
    let mask = boundary_mask(target, radius)?;
    let n = generated.len();
    Ok(mean_abs(
        generated
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(mask.as_slice())
            .map(|((g, t), m)| (g - t) * m),
        n,
    ))
}

/// Mean `|laplacian(generated) − laplacian(target)|`.
pub fn smooth_loss(generated: &ImageGrid, target: &ImageGrid) -> Result<f64> {
    generated.ensure_same_dims(target)?;
    let a = laplacian(generated)?;
    let b = laplacian(target)?;
    Ok(mean_abs(
        a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p - q),
        a.len(),
    ))
}

pub fn dis_loss(generated: &ImageGrid, target: &ImageGrid, w: &DisWeights) -> Result<DisBreakdown> {
    generated.ensure_same_dims(target)?;
    DisObjective::new(target, w)?.evaluate(generated)
}

pub fn dis_loss_grad(
    generated: &ImageGrid,
    target: &ImageGrid,
    w: &DisWeights,
) -> Result<ImageGrid> {
    generated.ensure_same_dims(target)?;
    DisObjective::new(target, w)?.grad(generated)
}
