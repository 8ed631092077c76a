use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use inkmorph::diffusion::{
    forward_sample, sample_with, GaussianStream, OracleDenoiser, ZeroDenoiser,
};
use inkmorph::dis_loss::{dis_loss, DisReport};
use inkmorph::glyph::synth_glyph;
use inkmorph::image::{resize_bilinear, sobel_magnitude};
use inkmorph::metrics::{evaluate_with, MetricReport};
use inkmorph::optimize::{
    perturbed_init, run_descent, validate_gradients, OptimizeConfig, REL_ERROR_FLOOR,
};
use inkmorph::soft_morph::{hard_morph, soft_dilation, soft_erosion, MorphConfig, MorphMode};
use inkmorph::staf::{fuse_detailed, layer_factor, time_factor, FeatureMap};
use inkmorph::{par, ImageGrid};
use serde::Serialize;

use crate::config::*;
use crate::context::{to_json, RunContext};
use crate::error::{CliError, CliResult};

/// Gradient checks pass when every probe is within this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// What a finished run prints, plus an optional reason to exit with a
/// validation failure even though every output was written.
pub struct Outcome {
    pub stdout: String,
    pub verdict: Option<String>,
}

impl Outcome {
    fn json<T: Serialize>(value: &T) -> Self {
        Self {
            stdout: to_json(value),
            verdict: None,
        }
    }
}

#[derive(Serialize)]
struct ImageStats {
    height: usize,
    width: usize,
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
}

fn stats(img: &ImageGrid) -> ImageStats {
    let mean = img.mean();
    let var = img
        .as_slice()
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / img.len() as f64;
    ImageStats {
        height: img.height(),
        width: img.width(),
        min: img.as_slice().iter().copied().fold(f64::INFINITY, f64::min),
        max: img
            .as_slice()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
    }
}

pub fn execute(run: &RunConfig, ctx: &mut RunContext) -> CliResult<Outcome> {
    match run {
        RunConfig::Morph(c) => morph(c, ctx),
        RunConfig::DisLoss(c) => dis(c, ctx),
        RunConfig::Gradcheck(c) => gradcheck(c),
        RunConfig::Optimize(c) => optimize(c, ctx),
        RunConfig::DiffuseForward(c) => diffuse_forward(c, ctx),
        RunConfig::DiffuseSample(c) => diffuse_sample(c, ctx),
        RunConfig::StafDemo(c) => staf_demo(c, ctx),
        RunConfig::Metrics(c) => metrics(c, ctx),
        RunConfig::SynthGlyph(c) => glyph(c, ctx),
    }
}

fn morph(c: &MorphRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let cfg = MorphConfig::new(c.tau, c.radius)?;
    let x = ctx.read_pgm(&c.input)?;
    let out = match c.op {
        MorphOp::Erode => soft_erosion(&x, &cfg)?,
        MorphOp::Dilate => soft_dilation(&x, &cfg)?,
        MorphOp::HardErode => hard_morph(&x, c.radius, MorphMode::Erode)?,
        MorphOp::HardDilate => hard_morph(&x, c.radius, MorphMode::Dilate)?,
    };
    ctx.write_pgm(&c.output, &out)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        op: MorphOp,
        output: &'a Path,
        stats: ImageStats,
    }
    Ok(Outcome::json(&Summary {
        op: c.op,
        output: &c.output,
        stats: stats(&out),
    }))
}

fn dis(c: &DisLossRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let w = c.dis.weights()?;
    let generated = ctx.read_pgm(&c.generated)?;
    let target = ctx.read_pgm(&c.target)?;
    let b = dis_loss(&generated, &target, &w)?;
    Ok(Outcome::json(&DisReport::new(&b, &w)))
}

fn gradcheck(c: &GradcheckRun) -> CliResult<Outcome> {
    let cases = validate_gradients(c.seed, c.size, c.probes, c.h)?;
    let max = cases
        .iter()
        .map(|k| k.report.max_rel_error)
        .fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(CliError::Numerical(format!(
            "gradient check produced {max}"
        )));
    }
    let passed = max <= GRADCHECK_TOLERANCE;
    #[derive(Serialize)]
    struct Summary<'a> {
        max_rel_error: f64,
        tolerance: f64,
        denominator_floor: f64,
        passed: bool,
        cases: &'a [inkmorph::optimize::GradCheckCase],
    }
    let mut out = Outcome::json(&Summary {
        max_rel_error: max,
        tolerance: GRADCHECK_TOLERANCE,
        denominator_floor: REL_ERROR_FLOOR,
        passed,
        cases: &cases,
    });
    if !passed {
        out.verdict = Some(format!(
            "max relative error {max:e} exceeds {GRADCHECK_TOLERANCE:e}"
        ));
    }
    Ok(out)
}

pub fn optimize_config(c: &OptimizeRun) -> CliResult<OptimizeConfig> {
    Ok(OptimizeConfig {
        steps: c.steps,
        learning_rate: c.lr,
        lambda_dis: c.lambda_dis,
        dis_weights: c.dis.weights()?,
        seed: c.seed,
        log_every: c.log_every,
    })
}

fn optimize(c: &OptimizeRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let cfg = optimize_config(c)?;
    let target = ctx.read_pgm(&c.target)?;
    let init = match &c.init {
        Some(p) => ctx.read_pgm(p)?,
        None => perturbed_init(&target, c.noise, c.seed),
    };
    let trace = run_descent(&init, &target, &cfg)?;
    let mut lines = String::new();
    for r in &trace.records {
        lines.push_str(&serde_json::to_string(r).expect("serializable record"));
        lines.push('\n');
    }
    ctx.ensure_dir(&c.out_dir)?;
    ctx.write_text(&c.out_dir.join("trace.jsonl"), &lines)?;
    ctx.write_pgm(&c.out_dir.join("init.pgm"), &init)?;
    ctx.write_pgm(&c.out_dir.join("final.pgm"), &trace.final_image)?;
    let (first, last) = (trace.first(), trace.last());
    #[derive(Serialize)]
    struct Summary {
        steps: usize,
        initial_total: f64,
        final_total: f64,
        total_ratio: f64,
        initial_boundary: f64,
        final_boundary: f64,
    }
    Ok(Outcome::json(&Summary {
        steps: last.step,
        initial_total: first.total,
        final_total: last.total,
        total_ratio: if first.total > 0.0 {
            last.total / first.total
        } else {
            0.0
        },
        initial_boundary: first.dis.boundary,
        final_boundary: last.dis.boundary,
    }))
}

fn diffuse_forward(c: &DiffuseForwardRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let s = c.schedule.build()?;
    let x0 = ctx.read_pgm(&c.input)?;
    let eps = GaussianStream::new(c.seed).normal_image(x0.height(), x0.width());
    let xt = forward_sample(&x0, c.t, &eps, &s)?;
    ctx.write_pgm(&c.output, &xt)?;
    #[derive(Serialize)]
    struct Summary {
        t: usize,
        alpha_bar: f64,
        signal_scale: f64,
        noise_scale: f64,
        stats: ImageStats,
    }
    let ab = s.alpha_bar(c.t);
    Ok(Outcome::json(&Summary {
        t: c.t,
        alpha_bar: ab,
        signal_scale: ab.sqrt(),
        noise_scale: (1.0 - ab).sqrt(),
        stats: stats(&xt),
    }))
}

fn diffuse_sample(c: &DiffuseSampleRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let s = c.schedule.build()?;
    let oracle = match (&c.denoiser, &c.x0) {
        (DenoiserChoice::Oracle, Some(p)) => {
            let x0 = ctx.read_pgm(p)?;
            Some(OracleDenoiser {
                x0,
                schedule: s.clone(),
            })
        }
        (DenoiserChoice::Oracle, None) => {
            return Err(CliError::invalid("the oracle denoiser needs --x0"))
        }
        _ => None,
    };
    let shape = match &oracle {
        Some(o) => o.x0.dims(),
        None => (c.size, c.size),
    };
    let mut dumps: Vec<(usize, ImageGrid)> = Vec::new();
    let observe = |t: usize, x: &ImageGrid| {
        if c.dump_every > 0 && t.is_multiple_of(c.dump_every) {
            dumps.push((t, x.clone()));
        }
    };
    let noise = GaussianStream::new(c.seed);
    let x = match &oracle {
        Some(o) => sample_with(o, &(), shape, &s, noise, c.sigma.into(), observe)?,
        None => sample_with(
            &ZeroDenoiser,
            &(),
            shape,
            &s,
            noise,
            c.sigma.into(),
            observe,
        )?,
    };
    if !x.is_finite() {
        return Err(CliError::Numerical(
            "sample contains non-finite values".into(),
        ));
    }
    ctx.ensure_dir(&c.out_dir)?;
    for (t, img) in &dumps {
        ctx.write_pgm(&c.out_dir.join(format!("x_{t:05}.pgm")), img)?;
    }
    ctx.write_pgm(&c.out_dir.join("sample.pgm"), &x)?;
    #[derive(Serialize)]
    struct Summary {
        dumped: usize,
        stats: ImageStats,
    }
    Ok(Outcome::json(&Summary {
        dumped: dumps.len(),
        stats: stats(&x),
    }))
}

fn staf_demo(c: &StafDemoRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let content = ctx.read_pgm(&c.content)?;
    let (h, w) = content.dims();
    let edges = sobel_magnitude(&content)?;
    // The detail branch runs at half resolution so Align has work to do.
    let detail = resize_bilinear(&edges, h.div_ceil(2), w.div_ceil(2))?;
    let f_c = FeatureMap::from_channels(std::slice::from_ref(&content))?;
    let f_hf = FeatureMap::from_channels(&[detail])?;
    let fusion = fuse_detailed(&f_c, &f_hf, &c.params, c.layer, c.t)?;
    #[derive(Serialize)]
    struct Weights {
        layer: usize,
        t: usize,
        total_timesteps: usize,
        layer_factor: f64,
        time_factor: f64,
        composite_weight: f64,
    }
    let report = Weights {
        layer: c.layer,
        t: c.t,
        total_timesteps: c.params.total_timesteps,
        layer_factor: layer_factor(c.layer, c.params.gamma_layer),
        time_factor: time_factor(c.t, c.params.total_timesteps, c.params.gamma_time)?,
        composite_weight: fusion.composite_weight,
    };
    ctx.ensure_dir(&c.out_dir)?;
    ctx.write_pgm(&c.out_dir.join("fused.pgm"), &fusion.fused.channel(0))?;
    // Attention lives in (0, 1); stretch it over the full gray range.
    ctx.write_pgm(
        &c.out_dir.join("attention.pgm"),
        &fusion.attention.map(|a| 2.0 * a - 1.0),
    )?;
    ctx.write_json(&c.out_dir.join("composite_weight.json"), &report)?;
    Ok(Outcome::json(&report))
}

fn pgm_names(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".pgm") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn metrics(c: &MetricsRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    match &c.source {
        MetricsSource::Pair { a, b } => {
            let x = ctx.read_pgm(a)?;
            let y = ctx.read_pgm(b)?;
            Ok(Outcome::json(&evaluate_with(&x, &y, &c.ssim)?))
        }
        MetricsSource::PairsDir(dir) => {
            let (gen_dir, tgt_dir) = (dir.join("generated"), dir.join("target"));
            let names = pgm_names(&gen_dir)?;
            let targets = pgm_names(&tgt_dir)?;
            if names != targets {
                return Err(CliError::invalid(format!(
                    "{} and {} must hold the same PGM file names",
                    gen_dir.display(),
                    tgt_dir.display()
                )));
            }
            let mut pairs: Vec<(String, ImageGrid, ImageGrid)> = Vec::with_capacity(names.len());
            for n in names {
                let g = ctx.read_pgm(&gen_dir.join(&n))?;
                let t = ctx.read_pgm(&tgt_dir.join(&n))?;
                pairs.push((n, g, t));
            }
            let reports: Vec<CliResult<MetricReport>> = par::map(&pairs, |(n, g, t)| {
                evaluate_with(g, t, &c.ssim).map_err(|e| CliError::invalid(format!("{n}: {e}")))
            });
            let mut csv = String::from("name,ssim,l1,rmse,psnr\n");
            for ((name, _, _), r) in pairs.iter().zip(reports) {
                let r = r?;
                let psnr = if r.psnr.is_infinite() {
                    "inf".to_string()
                } else {
                    r.psnr.to_string()
                };
                writeln!(csv, "{name},{},{},{},{psnr}", r.ssim, r.l1, r.rmse)
                    .expect("string write");
            }
            Ok(Outcome {
                stdout: csv,
                verdict: None,
            })
        }
    }
}

fn glyph(c: &SynthGlyphRun, ctx: &mut RunContext) -> CliResult<Outcome> {
    let img = synth_glyph(&c.spec)?;
    ctx.write_pgm(&c.output, &img)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        image: &'a PathBuf,
        spec: &'a inkmorph::glyph::GlyphSpec,
        core_pixels: usize,
        halo_pixels: usize,
    }
    let sidecar = Sidecar {
        image: &c.output,
        spec: &c.spec,
        core_pixels: img.as_slice().iter().filter(|&&v| v == 1.0).count(),
        halo_pixels: img
            .as_slice()
            .iter()
            .filter(|&&v| v > -1.0 && v < 1.0)
            .count(),
    };
    ctx.write_json(&sibling(&c.output, "json"), &sidecar)?;
    Ok(Outcome::json(&sidecar))
}
