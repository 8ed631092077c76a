//! Differentiable ink morphology for glyph images.
//!
//! * [`image`]: grids, kernels, replicate-padded correlation and filters
//! * [`soft_morph`]: sigmoid-relaxed erosion/dilation with VJPs
//! * [`dis_loss`]: the ink-structure loss (core, boundary band,
//!   Laplacian smoothness) and its gradient
//! * [`staf`]: spatio-temporal adaptive fusion of high-frequency features
//! * [`diffusion`]: DDPM schedule, forward noising, ancestral sampling
//! * [`optimize`]: pixel-space descent and finite-difference checks
//! * [`metrics`]: L1, RMSE, PSNR, SSIM
//! * [`glyph`]: seeded synthetic glyph fixtures
//! * [`pgm`]: binary PGM I/O
//!
//! Inner loops run on rayon when the default `parallel` feature is on.

pub mod diffusion;
pub mod dis_loss;
pub mod error;
pub mod glyph;
pub mod image;
pub mod metrics;
pub mod optimize;
pub mod par;
pub mod pgm;
pub mod soft_morph;
pub mod staf;

pub use error::{Error, Result};
pub use image::{ImageGrid, Kernel};
