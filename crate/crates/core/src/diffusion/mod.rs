//! DDPM machinery: variance schedule, closed-form forward noising, the
//! noise-prediction objective and ancestral sampling.

mod rng;
mod sampler;
mod schedule;

pub use rng::GaussianStream;
pub use sampler::{
    forward_sample, reverse_step, sample, sample_batch, sample_with, training_loss, Denoiser,
    OracleDenoiser, SigmaMode, ZeroDenoiser,
};
pub use schedule::DiffusionSchedule;
