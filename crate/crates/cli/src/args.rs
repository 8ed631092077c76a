use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use inkmorph::glyph::GlyphSpec;
use inkmorph::metrics::SsimConfig;
use inkmorph::soft_morph::MorphConfig;
use inkmorph::staf::StafParams;

use crate::config::*;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "inkmorph",
    version,
    about = "Soft ink morphology, DIS loss, STAF fusion and DDPM tools"
)]
pub struct Cli {
    /// Read and write PGM files with black (0) as ink instead of white.
    #[arg(long, global = true)]
    pub invert: bool,

    /// Where to write the run manifest.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply soft or hard erosion/dilation to an image.
    Morph(MorphArgs),
    /// Print the DIS loss breakdown between two images as JSON.
    DisLoss(DisLossArgs),
    /// Check every analytic gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Run pixel-space gradient descent towards a target image.
    Optimize(OptimizeArgs),
    /// Diffusion demos.
    #[command(subcommand)]
    Diffuse(DiffuseCommand),
    /// Fuse a Sobel detail map into content features.
    StafDemo(StafDemoArgs),
    /// Image quality metrics for one pair or a directory of pairs.
    Metrics(MetricsArgs),
    /// Generate a synthetic ink glyph.
    SynthGlyph(SynthGlyphArgs),
    /// Re-execute a run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Subcommand)]
pub enum DiffuseCommand {
    /// Noise an image to timestep t in closed form.
    Forward(DiffuseForwardArgs),
    /// Ancestral sampling from pure noise.
    Sample(DiffuseSampleArgs),
}

#[derive(Debug, Args)]
pub struct MorphArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub op: MorphOp,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DisArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda_c: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda_b: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda_lap: f64,
    /// Soft morphology temperature.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub tau: f64,
    /// Structuring element radius.
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    /// Boundary mask radius [default: --radius].
    #[arg(long)]
    pub mask_radius: Option<usize>,
}

impl DisArgs {
    fn resolve(&self) -> CliResult<DisSettings> {
        let s = DisSettings {
            lambda_c: self.lambda_c,
            lambda_b: self.lambda_b,
            lambda_lap: self.lambda_lap,
            tau: self.tau,
            radius: self.radius,
            mask_radius: self.mask_radius.unwrap_or(self.radius),
        };
        s.weights()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct DisLossArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub dis: DisArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    #[arg(long, default_value_t = 100)]
    pub probes: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub target: PathBuf,
    /// Starting image [default: target plus seeded uniform noise].
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Step size per pixel: x -= lr * N * grad.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    pub lambda_dis: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Amplitude of the uniform noise added to the target for the start image.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub log_every: usize,
    #[command(flatten)]
    pub dis: DisArgs,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Number of diffusion timesteps.
    #[arg(long = "T", default_value_t = 1000)]
    pub total_timesteps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 0.02)]
    pub beta_end: f64,
}

impl ScheduleArgs {
    fn resolve(&self) -> CliResult<ScheduleSettings> {
        let s = ScheduleSettings {
            total_timesteps: self.total_timesteps,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
        };
        s.build()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct DiffuseForwardArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Args)]
pub struct DiffuseSampleArgs {
    /// Side of the square sample [default: 96, or the size of --x0].
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SigmaChoice::Beta)]
    pub sigma: SigmaChoice,
    /// Also write x_t every this many steps (0 disables).
    #[arg(long, default_value_t = 0)]
    pub dump_every: usize,
    #[arg(long, value_enum, default_value_t = DenoiserChoice::Zero)]
    pub denoiser: DenoiserChoice,
    /// Clean image for the oracle denoiser.
    #[arg(long)]
    pub x0: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Debug, Args)]
pub struct StafDemoArgs {
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long)]
    pub t: usize,
    /// Overrides `total_timesteps` from --params.
    #[arg(long = "T")]
    pub total_timesteps: Option<usize>,
    /// StafParams as a JSON file or inline JSON object; missing keys take defaults.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, requires = "b", conflicts_with = "pairs_dir")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Directory with `generated/` and `target/` subdirectories of PGMs
    /// matched by file name; prints CSV.
    #[arg(long, required_unless_present = "a")]
    pub pairs_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    pub ssim_window: usize,
    #[arg(long, default_value_t = 1.5)]
    pub ssim_sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub ssim_k1: f64,
    #[arg(long, default_value_t = 0.03)]
    pub ssim_k2: f64,
}

#[derive(Debug, Args)]
pub struct SynthGlyphArgs {
    /// GlyphSpec as a JSON file or inline JSON object; missing keys take defaults.
    #[arg(long, conflicts_with_all = ["size", "strokes", "stroke_width", "halo_radius", "halo_decay", "seed"])]
    pub spec_json: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub strokes: Option<usize>,
    #[arg(long)]
    pub stroke_width: Option<f64>,
    #[arg(long)]
    pub halo_radius: Option<usize>,
    #[arg(long)]
    pub halo_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub from: PathBuf,
}

/// Inline JSON if the text starts with `{`, otherwise a file path.
fn json_arg<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    let body = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(|e| CliError::io(text, e))?
    };
    serde_json::from_str(&body).map_err(|e| CliError::invalid(format!("{what}: {e}")))
}

impl Command {
    /// Validates the arguments and materializes every default.
    /// `rerun` is handled by the caller.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        Ok(match self {
            Command::Morph(a) => {
                MorphConfig::new(a.tau, a.radius)?;
                RunConfig::Morph(MorphRun {
                    input: a.input.clone(),
                    output: a.output.clone(),
                    op: a.op,
                    tau: a.tau,
                    radius: a.radius,
                })
            }
            Command::DisLoss(a) => RunConfig::DisLoss(DisLossRun {
                generated: a.generated.clone(),
                target: a.target.clone(),
                dis: a.dis.resolve()?,
            }),
            Command::Gradcheck(a) => {
                if !(a.h > 0.0 && a.h.is_finite()) {
                    return Err(CliError::invalid("h must be > 0"));
                }
                if a.probes == 0 {
                    return Err(CliError::invalid("probes must be >= 1"));
                }
                RunConfig::Gradcheck(GradcheckRun {
                    seed: a.seed,
                    size: a.size,
                    probes: a.probes,
                    h: a.h,
                })
            }
            Command::Optimize(a) => {
                let run = OptimizeRun {
                    target: a.target.clone(),
                    init: a.init.clone(),
                    out_dir: a.out_dir.clone(),
                    steps: a.steps,
                    lr: a.lr,
                    lambda_dis: a.lambda_dis,
                    seed: a.seed,
                    noise: a.noise,
                    log_every: a.log_every,
                    dis: a.dis.resolve()?,
                };
                crate::commands::optimize_config(&run)?.validate()?;
                if !(a.noise >= 0.0 && a.noise.is_finite()) {
                    return Err(CliError::invalid("noise must be >= 0"));
                }
                RunConfig::Optimize(run)
            }
            Command::Diffuse(DiffuseCommand::Forward(a)) => {
                let schedule = a.schedule.resolve()?;
                schedule.build()?.check_timestep(a.t)?;
                RunConfig::DiffuseForward(DiffuseForwardRun {
                    input: a.input.clone(),
                    output: a.output.clone(),
                    t: a.t,
                    seed: a.seed,
                    schedule,
                })
            }
            Command::Diffuse(DiffuseCommand::Sample(a)) => {
                if a.denoiser == DenoiserChoice::Oracle && a.x0.is_none() {
                    return Err(CliError::invalid("the oracle denoiser needs --x0"));
                }
                let size = a.size.unwrap_or(96);
                if size == 0 {
                    return Err(CliError::invalid("size must be >= 1"));
                }
                RunConfig::DiffuseSample(DiffuseSampleRun {
                    size,
                    out_dir: a.out_dir.clone(),
                    seed: a.seed,
                    sigma: a.sigma,
                    dump_every: a.dump_every,
                    denoiser: a.denoiser,
                    x0: a.x0.clone(),
                    schedule: a.schedule.resolve()?,
                })
            }
            Command::StafDemo(a) => {
                let mut params: StafParams = match &a.params {
                    Some(text) => json_arg(text, "params")?,
                    None => StafParams::default(),
                };
                if let Some(t) = a.total_timesteps {
                    params.total_timesteps = t;
                }
                params.validate()?;
                inkmorph::staf::composite_weight(&params, a.layer, a.t)?;
                RunConfig::StafDemo(StafDemoRun {
                    content: a.content.clone(),
                    out_dir: a.out_dir.clone(),
                    layer: a.layer,
                    t: a.t,
                    params,
                })
            }
            Command::Metrics(a) => {
                let ssim = SsimConfig {
                    window: a.ssim_window,
                    sigma: a.ssim_sigma,
                    k1: a.ssim_k1,
                    k2: a.ssim_k2,
                };
                ssim.validate()?;
                let source = match (&a.a, &a.b, &a.pairs_dir) {
                    (Some(x), Some(y), None) => MetricsSource::Pair {
                        a: x.clone(),
                        b: y.clone(),
                    },
                    (None, None, Some(d)) => MetricsSource::PairsDir(d.clone()),
                    _ => return Err(CliError::invalid("give either --a and --b, or --pairs-dir")),
                };
                RunConfig::Metrics(MetricsRun { source, ssim })
            }
            Command::SynthGlyph(a) => {
                let spec = match &a.spec_json {
                    Some(text) => json_arg(text, "spec")?,
                    None => {
                        let d = GlyphSpec::default();
                        GlyphSpec {
                            size: a.size.unwrap_or(d.size),
                            stroke_count: a.strokes.unwrap_or(d.stroke_count),
                            stroke_width: a.stroke_width.unwrap_or(d.stroke_width),
                            halo_radius: a.halo_radius.unwrap_or(d.halo_radius),
                            halo_decay: a.halo_decay.unwrap_or(d.halo_decay),
                            seed: a.seed.unwrap_or(d.seed),
                        }
                    }
                };
                spec.validate()?;
                RunConfig::SynthGlyph(SynthGlyphRun {
                    output: a.output.clone(),
                    spec,
                })
            }
            Command::Rerun(_) => unreachable!("rerun is resolved from its manifest"),
        })
    }
}

pub fn is_rerun(c: &Command) -> Option<&Path> {
    match c {
        Command::Rerun(r) => Some(&r.from),
        _ => None,
    }
}
