//! Single-channel image grids, odd-sized kernels and the filters built on
//! them.
//!
//! Pixels are `f64` in the ink-signed convention: ink is `+1`, paper is
//! `-1`, and the zero level set is the stroke boundary. Nothing here
//! clamps intermediate results.

mod filter;
mod grid;
pub(crate) mod kernel;
mod resize;

pub use filter::{convolve, convolve_transpose, laplacian, laplacian_transpose, sobel_magnitude};
pub use grid::ImageGrid;
pub use kernel::{disk_kernel, Kernel};
pub use resize::resize_bilinear;
