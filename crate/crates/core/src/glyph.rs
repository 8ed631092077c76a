//! Seeded synthetic ink glyphs: random polyline strokes with a
//! geometrically fading halo standing in for ink diffusion.

use serde::{Deserialize, Serialize};

use crate::diffusion::GaussianStream;
use crate::error::{invalid, Result};
use crate::image::ImageGrid;
use crate::soft_morph::{hard_morph, MorphMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphSpec {
    pub size: usize,
    pub stroke_count: usize,
    pub stroke_width: f64,
    pub halo_radius: usize,
    pub halo_decay: f64,
    pub seed: u64,
}

impl Default for GlyphSpec {
    fn default() -> Self {
        Self {
            size: 96,
            stroke_count: 4,
            stroke_width: 5.0,
            halo_radius: 2,
            halo_decay: 0.5,
            seed: 0,
        }
    }
}

impl GlyphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 8 {
            return Err(invalid("glyph size must be >= 8"));
        }
        if self.stroke_count == 0 {
            return Err(invalid("stroke_count must be >= 1"));
        }
        if !(self.stroke_width.is_finite() && self.stroke_width >= 1.0) {
            return Err(invalid("stroke_width must be >= 1"));
        }
        if 4 * self.halo_radius > self.size {
            return Err(invalid("halo_radius must be <= size / 4"));
        }
        if !(self.halo_decay > 0.0 && self.halo_decay <= 1.0) {
            return Err(invalid("halo_decay must be in (0, 1]"));
        }
        if self.stroke_width + 2.0 * self.halo_radius as f64 + 4.0 >= self.size as f64 / 2.0 {
            return Err(invalid("strokes and halo do not fit in the glyph"));
        }
        Ok(())
    }

    /// Ink intensity of halo ring `k` (1-based): `2·decay^k − 1`.
    pub fn ring_intensity(&self, k: usize) -> f64 {
        (2.0 * self.halo_decay.powi(k as i32) - 1.0).max(-1.0)
    }
}

/// A stroke centerline; vertices in `(x, y)` pixel coordinates.
pub type Polyline = Vec<(f64, f64)>;

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx.hypot(dy)
}

pub fn polyline_length(line: &Polyline) -> f64 {
    line.windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

/// Draws the stroke centerlines for `spec`, deterministically.
pub fn stroke_polylines(spec: &GlyphSpec) -> Result<Vec<Polyline>> {
    spec.validate()?;
    let mut rng = GaussianStream::new(spec.seed);
    let size = spec.size as f64;
    let margin = spec.stroke_width / 2.0 + spec.halo_radius as f64 + 2.0;
    let (lo, hi) = (margin, size - 1.0 - margin);
    let inside = |p: (f64, f64)| p.0 >= lo && p.0 <= hi && p.1 >= lo && p.1 <= hi;
    let (min_len, max_len) = (size / 8.0, size / 3.0);

    let mut lines = Vec::with_capacity(spec.stroke_count);
    for _ in 0..spec.stroke_count {
        let vertices = 3 + (rng.next_uniform() * 3.0) as usize;
        let mut line = vec![(
            lo + rng.next_uniform() * (hi - lo),
            lo + rng.next_uniform() * (hi - lo),
        )];
        let mut heading = rng.next_uniform() * std::f64::consts::TAU;
        while line.len() < vertices {
            let last = *line.last().expect("non-empty");
            let mut next = None;
            for _ in 0..64 {
                // turn by at most 100 degrees so strokes do not fold back
                let turn = if line.len() == 1 {
                    rng.next_uniform() * std::f64::consts::TAU
                } else {
                    (rng.next_uniform() * 2.0 - 1.0) * 100f64.to_radians()
                };
                let len = min_len + rng.next_uniform() * (max_len - min_len);
                let dir = heading + turn;
                let cand = (last.0 + len * dir.cos(), last.1 + len * dir.sin());
                if inside(cand) {
                    heading = dir;
                    next = Some(cand);
                    break;
                }
            }
            match next {
                Some(p) => line.push(p),
                // boxed in: head back towards the center
                None => {
                    let c = (size - 1.0) / 2.0;
                    let p = (last.0 + (c - last.0) * 0.5, last.1 + (c - last.1) * 0.5);
                    heading = (p.1 - last.1).atan2(p.0 - last.0);
                    line.push(p);
                }
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

/// Binary stroke mask: `+1` within `stroke_width / 2` of a centerline.
pub fn rasterize(lines: &[Polyline], size: usize, stroke_width: f64) -> ImageGrid {
    let half = stroke_width / 2.0;
    ImageGrid::from_fn(size, size, |y, x| {
        let p = (x as f64, y as f64);
        let hit = lines.iter().any(|line| {
            line.windows(2)
                .any(|w| point_segment_distance(p, w[0], w[1]) <= half)
        });
        if hit {
            1.0
        } else {
            -1.0
        }
    })
}

/// Renders the glyph: strokes at `+1`, then `halo_radius` rings grown by
/// successive radius-1 hard dilations, ring `k` at `2·decay^k − 1`.
pub fn synth_glyph(spec: &GlyphSpec) -> Result<ImageGrid> {
    let lines = stroke_polylines(spec)?;
    let core = rasterize(&lines, spec.size, spec.stroke_width);
    let mut out = core.clone();
    let mut region = core;
    for k in 1..=spec.halo_radius {
        let grown = hard_morph(&region, 1, MorphMode::Dilate)?;
        let level = spec.ring_intensity(k);
        for (i, (&g, &r)) in grown.as_slice().iter().zip(region.as_slice()).enumerate() {
            if g > 0.0 && r <= 0.0 {
                out.as_mut_slice()[i] = level;
            }
        }
        region = grown;
    }
    Ok(out)
}
