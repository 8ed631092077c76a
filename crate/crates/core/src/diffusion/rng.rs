use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::image::ImageGrid;

/// Deterministic standard-normal stream.
///
/// Uniforms come from ChaCha20 seeded with `seed_from_u64(seed)` on
/// stream `stream`; each uniform uses the top 53 bits of one `u64`.
/// Normals are produced in pairs by the Box–Muller transform
/// `sqrt(-2 ln u1)·(cos 2πu2, sin 2πu2)` with `u1 ∈ (0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    pub fn normal_image(&mut self, height: usize, width: usize) -> ImageGrid {
        ImageGrid::from_fn(height, width, |_, _| self.next_normal())
    }

    /// Uniform noise in `[-amplitude, amplitude)`.
    pub fn uniform_image(&mut self, height: usize, width: usize, amplitude: f64) -> ImageGrid {
        ImageGrid::from_fn(height, width, |_, _| {
            (2.0 * self.next_uniform() - 1.0) * amplitude
        })
    }
}
