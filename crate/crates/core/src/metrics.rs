//! Image-quality metrics on `[0, 1]`-remapped images: L1, RMSE, PSNR and
//! SSIM.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::image::ImageGrid;
use crate::par;

/// Gaussian-window SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    /// Odd window side. Shrunk to the largest odd size that fits images
    /// smaller than the window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(invalid("SSIM window must be odd and positive"));
        }
        if ![self.sigma, self.k1, self.k2].iter().all(|&v| v > 0.0) {
            return Err(invalid("SSIM sigma, k1 and k2 must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub l1: f64,
    pub rmse: f64,
    /// Decibels; `+inf` for identical images, serialized as `"inf"`.
    #[serde(serialize_with = "ser_psnr", deserialize_with = "de_psnr")]
    pub psnr: f64,
    pub ssim: f64,
}

fn ser_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_psnr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Psnr {
        Num(f64),
        Text(String),
    }
    match Psnr::deserialize(d)? {
        Psnr::Num(v) => Ok(v),
        Psnr::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Psnr::Text(t) => Err(serde::de::Error::custom(format!("bad psnr value {t}"))),
    }
}

fn to_unit(x: f64) -> f64 {
    (x + 1.0) / 2.0
}

/// `10·log10(1 / mse)`, or `+inf` when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut w = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 - r, x as f64 - r);
            w.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM over every position where the window fits inside the image.
/// Inputs are already in `[0, 1]`; dynamic range is 1.
pub fn ssim_unit(a: &ImageGrid, b: &ImageGrid, cfg: &SsimConfig) -> Result<f64> {
    a.ensure_same_dims(b)?;
    cfg.validate()?;
    let (h, w) = a.dims();
    let mut size = cfg.window.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let win = gaussian_window(size, cfg.sigma);
    let c1 = (cfg.k1 * 1.0).powi(2);
    let c2 = (cfg.k2 * 1.0).powi(2);
    let (oh, ow) = (h - size + 1, w - size + 1);
    let (pa, pb) = (a.as_slice(), b.as_slice());

    let mut map = vec![0.0; oh * ow];
    par::for_each_row(&mut map, ow, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wy in 0..size {
                let base = (y + wy) * w + x;
                for wx in 0..size {
                    let g = win[wy * size + wx];
                    let (va, vb) = (pa[base + wx], pb[base + wx]);
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            *out = num / den;
        }
    });
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// All metrics after remapping both images from `[-1, 1]` to `[0, 1]`.
pub fn evaluate(a: &ImageGrid, b: &ImageGrid) -> Result<MetricReport> {
    evaluate_with(a, b, &SsimConfig::default())
}

pub fn evaluate_with(a: &ImageGrid, b: &ImageGrid, cfg: &SsimConfig) -> Result<MetricReport> {
    a.ensure_same_dims(b)?;
    let ua = a.map(to_unit);
    let ub = b.map(to_unit);
    let n = ua.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, q) in ua.as_slice().iter().zip(ub.as_slice()) {
        let d = p - q;
        abs += d.abs();
        sq += d * d;
    }
    let mse = sq / n;
    Ok(MetricReport {
        l1: abs / n,
        rmse: mse.sqrt(),
        psnr: psnr_from_mse(mse),
        ssim: ssim_unit(&ua, &ub, cfg)?,
    })
}
