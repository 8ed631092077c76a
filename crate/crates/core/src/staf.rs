//! Spatio-temporal adaptive fusion of content and high-frequency features.
//!
//! ```text
//! fused  = f_c + α_global · detail
//! detail = α(t, l) · (align(f_hf) ⊙ W)
//! W      = σ(conv3x3(align(f_hf)) + bias)
//! α(t,l) = clamp(α_base · max(0.1, 1 − l·γ_layer) · (1 + (t/T)·γ_time), 0, 1)
//! ```
//!
//! `align` resizes each channel bilinearly to the content resolution and
//! averages channels into one map, which is broadcast over the content
//! channels. Forward only.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{convolve, resize_bilinear, ImageGrid, Kernel};
use crate::soft_morph::sigmoid;

/// A `channels x height x width` tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(invalid("feature map dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(invalid(format!(
                "feature data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature values must be finite"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Stacks equally sized images as channels.
    pub fn from_channels(images: &[ImageGrid]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| invalid("feature map needs at least one channel"))?;
        let (h, w) = first.dims();
        let mut data = Vec::with_capacity(images.len() * h * w);
        for img in images {
            first.ensure_same_dims(img)?;
            data.extend_from_slice(img.as_slice());
        }
        Ok(Self {
            channels: images.len(),
            height: h,
            width: w,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(channels > 0 && height > 0 && width > 0);
        assert!(value.is_finite());
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> ImageGrid {
        let n = self.height * self.width;
        ImageGrid::from_raw(
            self.height,
            self.width,
            self.data[c * n..(c + 1) * n].to_vec(),
        )
    }

    /// Adds `other` elementwise.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.channels, self.height, self.width) != (other.channels, other.height, other.width) {
            return Err(invalid("feature map shapes differ"));
        }
        Ok(Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
            ..self.clone()
        })
    }
}

/// Fusion gates, modulation factors and attention parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StafParams {
    pub alpha_global: f64,
    pub alpha_base: f64,
    pub gamma_layer: f64,
    pub gamma_time: f64,
    /// Row-major 3x3 attention convolution taps.
    pub attention_taps: [f64; 9],
    pub attention_bias: f64,
    pub total_timesteps: usize,
}

impl Default for StafParams {
    fn default() -> Self {
        Self {
            alpha_global: 1.0,
            alpha_base: 1.0,
            gamma_layer: 0.15,
            gamma_time: 0.2,
            attention_taps: [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            attention_bias: 0.0,
            total_timesteps: 1000,
        }
    }
}

impl StafParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.alpha_global,
            self.alpha_base,
            self.gamma_layer,
            self.gamma_time,
            self.attention_bias,
        ];
        if scalars
            .iter()
            .chain(&self.attention_taps)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("fusion parameters must be finite"));
        }
        if self.gamma_layer < 0.0 || self.gamma_time < 0.0 {
            return Err(invalid("gamma_layer and gamma_time must be >= 0"));
        }
        if self.total_timesteps == 0 {
            return Err(invalid("total_timesteps must be >= 1"));
        }
        Ok(())
    }

    fn attention_kernel(&self) -> Kernel {
        Kernel::new(3, self.attention_taps.to_vec()).expect("3x3 taps")
    }
}

const LAYER_FLOOR: f64 = 0.1;

/// `max(0.1, 1 − l·γ_layer)`.
///
/// The floor engages once `1 − l·γ` is within `1e-12` of it, so that
/// e.g. `l = 6, γ = 0.15` yields exactly `0.1` despite `6 · 0.15`
/// rounding below `0.9`.
pub fn layer_factor(layer: usize, gamma_layer: f64) -> f64 {
    let v = 1.0 - layer as f64 * gamma_layer;
    if v <= LAYER_FLOOR + 1e-12 {
        LAYER_FLOOR
    } else {
        v
    }
}

/// `1 + (t/T)·γ_time` for `0 <= t <= T`.
pub fn time_factor(t: usize, total_timesteps: usize, gamma_time: f64) -> Result<f64> {
    if total_timesteps == 0 {
        return Err(invalid("total_timesteps must be >= 1"));
    }
    if t > total_timesteps {
        return Err(invalid(format!(
            "timestep {t} exceeds total_timesteps {total_timesteps}"
        )));
    }
    Ok(1.0 + (t as f64 / total_timesteps as f64) * gamma_time)
}

/// `α(t, l)`, clamped to `[0, 1]`.
pub fn composite_weight(p: &StafParams, layer: usize, t: usize) -> Result<f64> {
    let lf = layer_factor(layer, p.gamma_layer);
    let tf = time_factor(t, p.total_timesteps, p.gamma_time)?;
    Ok((p.alpha_base * lf * tf).clamp(0.0, 1.0))
}

/// Resizes every channel to `height x width` and averages the channels.
pub fn align(f: &FeatureMap, height: usize, width: usize) -> Result<ImageGrid> {
    let mut acc = vec![0.0; height * width];
    for c in 0..f.channels {
        let resized = resize_bilinear(&f.channel(c), height, width)?;
        for (a, v) in acc.iter_mut().zip(resized.as_slice()) {
            *a += v;
        }
    }
    let k = f.channels as f64;
    Ok(ImageGrid::from_raw(
        height,
        width,
        acc.into_iter().map(|v| v / k).collect(),
    ))
}

fn attention_from_aligned(aligned: &ImageGrid, p: &StafParams) -> Result<ImageGrid> {
    let (h, w) = aligned.dims();
    // replicate padding needs the 3x3 window to fit; 1-pixel-wide maps
    // fall back to the center tap only.
    let response = if h >= 2 && w >= 2 {
        convolve(aligned, &p.attention_kernel())?
    } else {
        aligned.map(|v| v * p.attention_taps[4])
    };
    Ok(response.map(|v| sigmoid(v + p.attention_bias)))
}

/// Spatial attention map `W` at the requested resolution, one channel,
/// values in `(0, 1)`.
pub fn spatial_attention(
    f_hf: &FeatureMap,
    p: &StafParams,
    target_h: usize,
    target_w: usize,
) -> Result<FeatureMap> {
    p.validate()?;
    let aligned = align(f_hf, target_h, target_w)?;
    let w = attention_from_aligned(&aligned, p)?;
    Ok(FeatureMap {
        channels: 1,
        height: target_h,
        width: target_w,
        data: w.into_vec(),
    })
}

/// Output of [`fuse_detailed`]: the fused features plus the quantities
/// that produced them.
#[derive(Debug, Clone)]
pub struct Fusion {
    pub fused: FeatureMap,
    pub attention: ImageGrid,
    pub composite_weight: f64,
}

/// Residual fusion of `f_hf` into `f_c` at layer `l` and timestep `t`.
pub fn fuse(
    f_c: &FeatureMap,
    f_hf: &FeatureMap,
    p: &StafParams,
    l: usize,
    t: usize,
) -> Result<FeatureMap> {
    Ok(fuse_detailed(f_c, f_hf, p, l, t)?.fused)
}

pub fn fuse_detailed(
    f_c: &FeatureMap,
    f_hf: &FeatureMap,
    p: &StafParams,
    l: usize,
    t: usize,
) -> Result<Fusion> {
    p.validate()?;
    let weight = composite_weight(p, l, t)?;
    let aligned = align(f_hf, f_c.height, f_c.width)?;
    let attention = attention_from_aligned(&aligned, p)?;
    if p.alpha_global == 0.0 || weight == 0.0 {
        // Exact identity; adding a signed zero could flip -0.0 to +0.0.
        return Ok(Fusion {
            fused: f_c.clone(),
            attention,
            composite_weight: weight,
        });
    }
    let detail: Vec<f64> = aligned
        .as_slice()
        .iter()
        .zip(attention.as_slice())
        .map(|(v, a)| weight * (v * a))
        .collect();
    let plane = f_c.height * f_c.width;
    let data = f_c
        .data
        .chunks(plane)
        .flat_map(|ch| ch.iter().zip(&detail).map(|(c, d)| c + p.alpha_global * d))
        .collect();
    Ok(Fusion {
        fused: FeatureMap {
            data,
            ..f_c.clone()
        },
        attention,
        composite_weight: weight,
    })
}
