//! Soft erosion and dilation.
//!
//! Both operators aggregate a neighborhood with a normalized disk
//! kernel, `c = conv(x, disk)`, and squash the result through a
//! temperature-scaled logistic:
//!
//! ```text
//! erosion(x)  = -σ(-c / τ) · τ
//! dilation(x) =  σ( c / τ) · τ
//! ```
//!
//! Since `σ(z) + σ(-z) = 1`, `dilation - erosion = τ` everywhere. The
//! hard (binarized min/max) operators live here too; they build the
//! boundary mask and serve as the `τ → 0` reference.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{
    convolve, convolve_transpose, disk_kernel, kernel::disk_offsets, ImageGrid, Kernel,
};
use crate::par;

/// Logistic sigmoid, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ'(z) = e^{-|z|} / (1 + e^{-|z|})²`, accurate deep into the tails.
#[inline]
pub fn sigmoid_derivative(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// Temperature and structuring-element radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphConfig {
    pub tau: f64,
    pub radius: usize,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            radius: 2,
        }
    }
}

impl MorphConfig {
    pub fn new(tau: f64, radius: usize) -> Result<Self> {
        let cfg = Self { tau, radius };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau must be > 0"));
        }
        if self.radius == 0 {
            return Err(invalid("radius must be >= 1"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        disk_kernel(self.radius)
    }
}

/// Neighborhood aggregate `c = conv(x, disk(radius))`.
pub fn aggregate(x: &ImageGrid, cfg: &MorphConfig) -> Result<ImageGrid> {
    cfg.validate()?;
    convolve(x, &cfg.kernel()?)
}

pub fn soft_erosion(x: &ImageGrid, cfg: &MorphConfig) -> Result<ImageGrid> {
    let tau = cfg.tau;
    Ok(aggregate(x, cfg)?.map(|c| -sigmoid(-c / tau) * tau))
}

pub fn soft_dilation(x: &ImageGrid, cfg: &MorphConfig) -> Result<ImageGrid> {
    let tau = cfg.tau;
    Ok(aggregate(x, cfg)?.map(|c| sigmoid(c / tau) * tau))
}

/// `σ(c / τ)`: soft dilation divided by `τ`. Tends to the indicator of
/// `c > 0` as `τ → 0`. Not used by any loss.
pub fn soft_dilation_normalized(x: &ImageGrid, cfg: &MorphConfig) -> Result<ImageGrid> {
    let tau = cfg.tau;
    Ok(aggregate(x, cfg)?.map(|c| sigmoid(c / tau)))
}

/// Both soft operators have the same local derivative with respect to
/// `c`, namely `σ'(c / τ)`, so they share one VJP.
fn soft_vjp(x: &ImageGrid, cfg: &MorphConfig, upstream: &ImageGrid) -> Result<ImageGrid> {
    x.ensure_same_dims(upstream)?;
    let kernel = cfg.kernel()?;
    let c = aggregate(x, cfg)?;
    let tau = cfg.tau;
    let local = c.zip_map(upstream, |c, u| sigmoid_derivative(c / tau) * u)?;
    convolve_transpose(&local, &kernel)
}

/// Gradient of `<upstream, soft_erosion(x)>` with respect to `x`.
pub fn soft_erosion_vjp(
    x: &ImageGrid,
    cfg: &MorphConfig,
    upstream: &ImageGrid,
) -> Result<ImageGrid> {
    soft_vjp(x, cfg, upstream)
}

/// Gradient of `<upstream, soft_dilation(x)>` with respect to `x`.
pub fn soft_dilation_vjp(
    x: &ImageGrid,
    cfg: &MorphConfig,
    upstream: &ImageGrid,
) -> Result<ImageGrid> {
    soft_vjp(x, cfg, upstream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphMode {
    Erode,
    Dilate,
}

/// Classical binary morphology: binarize at 0 (ink where `x > 0`), then
/// take the min (erode) or max (dilate) over the unnormalized disk.
/// Borders replicate. Output is in `{-1, +1}`.
pub fn hard_morph(x: &ImageGrid, radius: usize, mode: MorphMode) -> Result<ImageGrid> {
    if radius == 0 {
        return Err(invalid("radius must be >= 1"));
    }
    let (h, w) = x.dims();
    let ink: Vec<bool> = x.as_slice().iter().map(|&v| v > 0.0).collect();
    let offsets = disk_offsets(radius);
    let mut out = vec![0.0; h * w];
    par::for_each_row(&mut out, w, |y, row| {
        for (xi, px) in row.iter_mut().enumerate() {
            let mut neighbors = offsets.iter().map(|&(dy, dx)| {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let sx = (xi as isize + dx).clamp(0, w as isize - 1) as usize;
                ink[sy * w + sx]
            });
            let hit = match mode {
                MorphMode::Erode => neighbors.all(|b| b),
                MorphMode::Dilate => neighbors.any(|b| b),
            };
            *px = if hit { 1.0 } else { -1.0 };
        }
    });
    Ok(ImageGrid::from_raw(h, w, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tau: f64, radius: usize) -> MorphConfig {
        MorphConfig::new(tau, radius).unwrap()
    }

    fn noise(n: usize, seed: u64) -> ImageGrid {
        // small LCG, independent of the library PRNG
        let mut s = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ImageGrid::from_fn(n, n, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), 1.0);
        assert_eq!(sigmoid(-1e6), 0.0);
        assert!(sigmoid(-1e6).is_finite());
        assert_eq!(sigmoid_derivative(0.0), 0.25);
        assert_eq!(sigmoid_derivative(1e6), 0.0);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(MorphConfig::new(0.0, 1).is_err());
        assert!(MorphConfig::new(-1.0, 1).is_err());
        assert!(MorphConfig::new(f64::NAN, 1).is_err());
        assert!(MorphConfig::new(0.5, 0).is_err());
        let bad = MorphConfig {
            tau: 0.0,
            radius: 1,
        };
        let err = soft_erosion(&ImageGrid::filled(4, 4, 0.0), &bad).unwrap_err();
        assert_eq!(err.to_string(), "tau must be > 0");
    }

    #[test]
    fn balanced_neighborhood_gives_half_tau() {
        let x = ImageGrid::filled(5, 5, 0.0);
        let c = cfg(0.3, 1);
        assert!(soft_erosion(&x, &c)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == -0.15));
        assert!(soft_dilation(&x, &c)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.15));
    }

    #[test]
    fn constant_fields() {
        let c = cfg(0.1, 1);
        let expect = 0.1 * sigmoid(-10.0);
        assert!((expect - 4.5397868702e-6).abs() < 1e-15);
        let e = soft_erosion(&ImageGrid::filled(6, 6, 1.0), &c).unwrap();
        for &v in e.as_slice() {
            assert!((v + expect).abs() < 1e-15);
        }
        let d = soft_dilation(&ImageGrid::filled(6, 6, -1.0), &c).unwrap();
        for &v in d.as_slice() {
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dilation_minus_erosion_is_tau() {
        let x = noise(40, 3); // 1600 pixels
        for (tau, r) in [(0.01, 1), (0.5, 2), (2.0, 3)] {
            let c = cfg(tau, r);
            let d = soft_dilation(&x, &c).unwrap();
            let e = soft_erosion(&x, &c).unwrap();
            let agg = aggregate(&x, &c).unwrap();
            for ((a, b), z) in d.as_slice().iter().zip(e.as_slice()).zip(agg.as_slice()) {
                assert!((a - b - tau).abs() <= 1e-12);
                assert!(*a > 0.0 && *a <= tau);
                assert!(*b < 0.0 && *b >= -tau);
                // away from f64 saturation the bounds are strict
                if (z / tau).abs() < 30.0 {
                    assert!(*a < tau && *b > -tau);
                }
            }
        }
    }

    #[test]
    fn dilation_is_monotone() {
        let x = noise(12, 5);
        let bump = noise(12, 6).map(|v| v.abs() * 0.3);
        let y = x.zip_map(&bump, |a, b| a + b).unwrap();
        let c = cfg(0.5, 2);
        let dx = soft_dilation(&x, &c).unwrap();
        let dy = soft_dilation(&y, &c).unwrap();
        for (a, b) in dx.as_slice().iter().zip(dy.as_slice()) {
            assert!(a <= b);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let x = noise(8, 1);
        let zero = ImageGrid::filled(8, 8, 0.0);
        let c = cfg(0.5, 1);
        assert!(soft_erosion_vjp(&x, &c, &zero)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        assert!(soft_dilation_vjp(&x, &c, &zero)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gradient_vanishes_cleanly() {
        // c = 1 everywhere, τ = 0.01 → |c/τ| = 100
        let x = ImageGrid::filled(8, 8, 1.0);
        let ones = ImageGrid::filled(8, 8, 1.0);
        let g = soft_erosion_vjp(&x, &cfg(0.01, 1), &ones).unwrap();
        for &v in g.as_slice() {
            assert!(v.is_finite());
            assert!(v.abs() < 1e-20);
        }
    }

    #[test]
    fn erosion_and_dilation_vjps_coincide() {
        let x = noise(10, 9);
        let u = noise(10, 10);
        let c = cfg(0.2, 2);
        assert_eq!(
            soft_erosion_vjp(&x, &c, &u).unwrap(),
            soft_dilation_vjp(&x, &c, &u).unwrap()
        );
    }

    #[test]
    fn vjp_dimension_mismatch() {
        let x = noise(8, 1);
        let u = ImageGrid::filled(8, 9, 1.0);
        assert!(soft_erosion_vjp(&x, &cfg(0.5, 1), &u).is_err());
    }

    fn single_ink(n: usize) -> ImageGrid {
        ImageGrid::from_fn(
            n,
            n,
            |y, x| if y == n / 2 && x == n / 2 { 1.0 } else { -1.0 },
        )
    }

    #[test]
    fn hard_dilate_single_pixel_is_cross() {
        let out = hard_morph(&single_ink(5), 1, MorphMode::Dilate).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let d = (y as isize - 2).abs() + (x as isize - 2).abs();
                let expect = if d <= 1 { 1.0 } else { -1.0 };
                assert_eq!(out.get(y, x), expect);
            }
        }
    }

    #[test]
    fn hard_erode_single_pixel_is_paper() {
        let out = hard_morph(&single_ink(5), 1, MorphMode::Erode).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn hard_morph_keeps_constant_ink() {
        let ink = ImageGrid::filled(6, 6, 1.0);
        for mode in [MorphMode::Erode, MorphMode::Dilate] {
            assert_eq!(hard_morph(&ink, 2, mode).unwrap(), ink);
        }
    }
}
