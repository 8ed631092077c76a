//! Fully resolved run configurations. These are what a manifest records
//! and what `rerun` executes.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use inkmorph::diffusion::{DiffusionSchedule, SigmaMode};
use inkmorph::dis_loss::DisWeights;
use inkmorph::glyph::GlyphSpec;
use inkmorph::metrics::SsimConfig;
use inkmorph::soft_morph::MorphConfig;
use inkmorph::staf::StafParams;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MorphOp {
    Erode,
    Dilate,
    HardErode,
    HardDilate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SigmaChoice {
    Beta,
    Zero,
}

impl From<SigmaChoice> for SigmaMode {
    fn from(c: SigmaChoice) -> Self {
        match c {
            SigmaChoice::Beta => SigmaMode::Beta,
            SigmaChoice::Zero => SigmaMode::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserChoice {
    /// Predicts zero noise everywhere.
    Zero,
    /// Predicts the exact noise relative to a known clean image (`--x0`).
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisSettings {
    pub lambda_c: f64,
    pub lambda_b: f64,
    pub lambda_lap: f64,
    pub tau: f64,
    pub radius: usize,
    pub mask_radius: usize,
}

impl DisSettings {
    pub fn weights(&self) -> CliResult<DisWeights> {
        let morph = MorphConfig::new(self.tau, self.radius)?;
        Ok(
            DisWeights::new(self.lambda_c, self.lambda_b, self.lambda_lap, morph)?
                .with_mask_radius(self.mask_radius),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSettings {
    pub total_timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleSettings {
    pub fn build(&self) -> CliResult<DiffusionSchedule> {
        Ok(DiffusionSchedule::linear(
            self.total_timesteps,
            self.beta_start,
            self.beta_end,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphRun {
    pub input: PathBuf,
    pub output: PathBuf,
    pub op: MorphOp,
    pub tau: f64,
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisLossRun {
    pub generated: PathBuf,
    pub target: PathBuf,
    pub dis: DisSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRun {
    pub seed: u64,
    pub size: usize,
    pub probes: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRun {
    pub target: PathBuf,
    pub init: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub steps: usize,
    pub lr: f64,
    pub lambda_dis: f64,
    pub seed: u64,
    pub noise: f64,
    pub log_every: usize,
    pub dis: DisSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffuseForwardRun {
    pub input: PathBuf,
    pub output: PathBuf,
    pub t: usize,
    pub seed: u64,
    pub schedule: ScheduleSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffuseSampleRun {
    pub size: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sigma: SigmaChoice,
    pub dump_every: usize,
    pub denoiser: DenoiserChoice,
    pub x0: Option<PathBuf>,
    pub schedule: ScheduleSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StafDemoRun {
    pub content: PathBuf,
    pub out_dir: PathBuf,
    pub layer: usize,
    pub t: usize,
    pub params: StafParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsSource {
    Pair { a: PathBuf, b: PathBuf },
    PairsDir(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRun {
    pub source: MetricsSource,
    pub ssim: SsimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGlyphRun {
    pub output: PathBuf,
    pub spec: GlyphSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "kebab-case")]
pub enum RunConfig {
    Morph(MorphRun),
    DisLoss(DisLossRun),
    Gradcheck(GradcheckRun),
    Optimize(OptimizeRun),
    DiffuseForward(DiffuseForwardRun),
    DiffuseSample(DiffuseSampleRun),
    StafDemo(StafDemoRun),
    Metrics(MetricsRun),
    SynthGlyph(SynthGlyphRun),
}

/// `out.pgm` becomes `out.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Morph(_) => "morph",
            Self::DisLoss(_) => "dis-loss",
            Self::Gradcheck(_) => "gradcheck",
            Self::Optimize(_) => "optimize",
            Self::DiffuseForward(_) => "diffuse-forward",
            Self::DiffuseSample(_) => "diffuse-sample",
            Self::StafDemo(_) => "staf-demo",
            Self::Metrics(_) => "metrics",
            Self::SynthGlyph(_) => "synth-glyph",
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Self::Gradcheck(c) => vec![c.seed],
            Self::Optimize(c) => vec![c.seed],
            Self::DiffuseForward(c) => vec![c.seed],
            Self::DiffuseSample(c) => vec![c.seed],
            Self::SynthGlyph(c) => vec![c.spec.seed],
            _ => Vec::new(),
        }
    }

    /// Where the manifest goes when `--manifest` is not given: next to the
    /// primary output, or in the working directory for stdout-only runs.
    pub fn default_manifest_path(&self) -> PathBuf {
        match self {
            Self::Morph(c) => sibling(&c.output, "manifest.json"),
            Self::DiffuseForward(c) => sibling(&c.output, "manifest.json"),
            Self::SynthGlyph(c) => sibling(&c.output, "manifest.json"),
            Self::Optimize(c) => c.out_dir.join("manifest.json"),
            Self::DiffuseSample(c) => c.out_dir.join("manifest.json"),
            Self::StafDemo(c) => c.out_dir.join("manifest.json"),
            other => PathBuf::from(format!("inkmorph-{}.manifest.json", other.name())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub run: RunConfig,
    pub invert: bool,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}
