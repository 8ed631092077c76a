//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use inkmorph::diffusion::{
    forward_sample, reverse_step, DiffusionSchedule, GaussianStream, SigmaMode,
};
use inkmorph::dis_loss::{boundary_mask, dis_loss, dis_loss_grad, DisWeights};
use inkmorph::metrics::evaluate;
use inkmorph::optimize::validate_gradients;
use inkmorph::soft_morph::{
    aggregate, soft_dilation, soft_dilation_normalized, soft_erosion, MorphConfig,
};
use inkmorph::staf::{composite_weight, fuse, layer_factor, FeatureMap, StafParams};
use inkmorph::ImageGrid;
use serde_json::Value;

type Check = Result<String, String>;

/// Number, name, runtime limit in seconds, check.
type Criterion = (u32, &'static str, u64, Box<dyn Fn() -> Check>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let x = GaussianStream::new(i).uniform_image(32, 32, 1.0);
        for tau in [0.01, 0.1, 0.5, 1.0] {
            for radius in [1, 2, 3] {
                let cfg = MorphConfig::new(tau, radius).map_err(|e| e.to_string())?;
                let d = soft_dilation(&x, &cfg).map_err(|e| e.to_string())?;
                let e = soft_erosion(&x, &cfg).map_err(|e| e.to_string())?;
                for (dv, ev) in d.as_slice().iter().zip(e.as_slice()) {
                    worst = worst.max((dv - ev - tau).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max |dilation - erosion - tau| = {worst:e}"))
}

fn criterion_2() -> Check {
    let mut worst: f64 = 0.0;
    let mut min_probes = usize::MAX;
    for seed in 0..10 {
        for case in validate_gradients(seed, 16, 100, 1e-4).map_err(|e| e.to_string())? {
            min_probes = min_probes.min(case.report.probes);
            worst = worst.max(case.report.max_rel_error);
            ensure(case.report.probes >= 100, || {
                format!("seed {seed} {}: {} probes", case.name, case.report.probes)
            })?;
            ensure(case.report.max_rel_error <= 1e-4, || {
                format!(
                    "seed {seed} {}: rel error {:e}",
                    case.name, case.report.max_rel_error
                )
            })?;
        }
    }
    Ok(format!(
        "max rel error {worst:e}, >= {min_probes} probes per function"
    ))
}

fn criterion_3() -> Check {
    let edge = ImageGrid::from_fn(16, 16, |_, x| if x < 8 { -1.0 } else { 1.0 });
    let c = aggregate(&edge, &MorphConfig::new(1.0, 1).unwrap()).map_err(|e| e.to_string())?;
    let mut prev: Option<Vec<f64>> = None;
    let mut last_max = 0.0;
    for tau in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let s = soft_dilation_normalized(&edge, &MorphConfig::new(tau, 1).unwrap())
            .map_err(|e| e.to_string())?;
        let gap: Vec<f64> = s
            .as_slice()
            .iter()
            .zip(c.as_slice())
            .map(|(v, cv)| (v - if *cv > 0.0 { 1.0 } else { 0.0 }).abs())
            .collect();
        if let Some(p) = &prev {
            for i in 0..gap.len() {
                if c.as_slice()[i] != 0.0 {
                    ensure(gap[i] < p[i], || {
                        format!("tau {tau} pixel {i}: {} !< {}", gap[i], p[i])
                    })?;
                }
            }
        }
        last_max = gap.iter().copied().fold(0.0, f64::max);
        prev = Some(gap);
    }
    Ok(format!(
        "gap strictly decreasing; max gap at tau=0.01 is {last_max:e}"
    ))
}

fn criterion_4() -> Check {
    let s = DiffusionSchedule::default();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = GaussianStream::new(1000 + i);
        let (h, w) = (4 + (i as usize % 7), 5 + (i as usize % 5));
        let x0 = rng.uniform_image(h, w, 1.0);
        let eps = rng.normal_image(h, w);
        let xt = forward_sample(&x0, 1, &eps, &s).map_err(|e| e.to_string())?;
        let back =
            reverse_step(&xt, 1, &eps, None, &s, SigmaMode::Zero).map_err(|e| e.to_string())?;
        for (a, b) in back.as_slice().iter().zip(x0.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("inversion error {worst:e}"))?;
    let mut consistency: f64 = 0.0;
    for t in 2..=1000 {
        consistency = consistency.max((s.alpha_bar(t) / s.alpha_bar(t - 1) - s.alpha(t)).abs());
    }
    ensure(consistency <= 1e-15, || {
        format!("schedule consistency {consistency:e}")
    })?;
    Ok(format!(
        "inversion {worst:e}, schedule consistency {consistency:e}"
    ))
}

fn criterion_5() -> Check {
    let s = DiffusionSchedule::default();
    let zero = ImageGrid::filled(100, 100, 0.0);
    let mut notes = Vec::new();
    for t in [1, 500, 1000] {
        let eps = GaussianStream::new(t as u64).normal_image(100, 100);
        let xt = forward_sample(&zero, t, &eps, &s).map_err(|e| e.to_string())?;
        let mean = xt.mean();
        let var = xt
            .as_slice()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / xt.len() as f64;
        let expected = 1.0 - s.alpha_bar(t);
        let rel = (var / expected - 1.0).abs();
        ensure(rel <= 0.05, || {
            format!("t={t}: variance {var} vs {expected}")
        })?;
        notes.push(format!("t={t}: {:.2}%", rel * 100.0));
    }
    Ok(format!("relative variance error {}", notes.join(", ")))
}

fn criterion_6() -> Check {
    let mut rng = GaussianStream::new(6);
    let f_c = FeatureMap::from_channels(&[
        rng.uniform_image(12, 10, 1.0),
        rng.uniform_image(12, 10, 1.0),
    ])
    .unwrap();
    let f_hf = FeatureMap::from_channels(&[rng.uniform_image(7, 9, 1.0)]).unwrap();
    let gate_off = StafParams {
        alpha_global: 0.0,
        ..StafParams::default()
    };
    let base_off = StafParams {
        alpha_base: 0.0,
        ..StafParams::default()
    };
    for (name, p) in [
        ("alpha_global = 0", &gate_off),
        ("composite weight = 0", &base_off),
    ] {
        for (l, t) in [(0, 0), (3, 500), (9, 1000)] {
            let fused = fuse(&f_c, &f_hf, p, l, t).map_err(|e| e.to_string())?;
            let same = fused
                .as_slice()
                .iter()
                .zip(f_c.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("{name}: fuse changed f_c at l={l}, t={t}"))?;
        }
    }
    let t_max = StafParams::default().total_timesteps;
    let p = |base: f64| StafParams {
        alpha_base: base,
        ..StafParams::default()
    };
    let w =
        |base: f64, l: usize, t: usize| composite_weight(&p(base), l, t).map_err(|e| e.to_string());
    ensure(w(1.0, 0, t_max)? == 1.0, || {
        "base 1, l 0, t T is not clamped to 1".into()
    })?;
    let w2 = w(0.8, 2, t_max)?;
    let hand = 0.8_f64 * 0.7 * 1.2;
    ensure(w2 == hand, || {
        format!("base 0.8, l 2, t T gave {w2:?}, hand {hand:?}")
    })?;
    ensure((w2 - 0.672).abs() <= f64::EPSILON * 0.672, || {
        format!("{w2} is not within 1 ulp of 0.672")
    })?;
    for l in 6..30 {
        ensure(layer_factor(l, 0.15) == 0.1, || {
            format!("layer_factor({l}) = {}", layer_factor(l, 0.15))
        })?;
        for base in [0.25, 0.5, 1.0] {
            ensure(w(base, l, 0)? == base * 0.1, || {
                format!("base {base}, l {l}: floor not used")
            })?;
        }
    }
    Ok(format!(
        "identity bit-exact; table 1.0 / {w2:?} / floor 0.1"
    ))
}

fn criterion_8() -> Check {
    let target = ImageGrid::from_fn(15, 15, |y, x| {
        if (5..10).contains(&y) && (5..10).contains(&x) {
            1.0
        } else {
            -1.0
        }
    });
    let noise = GaussianStream::new(8).uniform_image(15, 15, 0.4);
    let generated = target.zip_map(&noise, |a, b| a + b).unwrap();
    let mut checked = 0;
    for mask_radius in [1, 2] {
        let w = DisWeights::new(0.0, 1.0, 0.0, MorphConfig::default())
            .unwrap()
            .with_mask_radius(mask_radius);
        let mask = boundary_mask(&target, mask_radius).map_err(|e| e.to_string())?;
        let base = dis_loss(&generated, &target, &w)
            .map_err(|e| e.to_string())?
            .total;
        ensure(base > 0.0, || "fixture has zero boundary loss".into())?;
        let grad = dis_loss_grad(&generated, &target, &w).map_err(|e| e.to_string())?;
        for p in 0..generated.len() {
            if mask.as_slice()[p] != 0.0 {
                continue;
            }
            ensure(grad.as_slice()[p] == 0.0, || {
                format!("gradient {} at pixel {p}", grad.as_slice()[p])
            })?;
            for delta in [0.37, -1.5] {
                let mut moved = generated.clone();
                moved.as_mut_slice()[p] += delta;
                let loss = dis_loss(&moved, &target, &w)
                    .map_err(|e| e.to_string())?
                    .total;
                ensure(loss.to_bits() == base.to_bits(), || {
                    format!("pixel {p}: loss {loss} != {base}")
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} off-mask pixels: loss unchanged, gradient 0"
    ))
}

fn criterion_9() -> Check {
    let a = GaussianStream::new(9).uniform_image(32, 32, 1.0);
    let r = evaluate(&a, &a).map_err(|e| e.to_string())?;
    ensure(r.l1 == 0.0 && r.rmse == 0.0 && r.ssim == 1.0, || {
        format!("identical pair gave {r:?}")
    })?;
    ensure(r.psnr == f64::INFINITY, || format!("psnr {}", r.psnr))?;
    let json = serde_json::to_value(r).unwrap();
    ensure(json["psnr"] == "inf", || {
        format!("psnr serialized as {}", json["psnr"])
    })?;
    // Unit-range values in [0.1, 0.6], shifted by 0.2 in unit space
    // (0.4 in ink-signed space).
    let u = GaussianStream::new(10)
        .uniform_image(32, 32, 0.25)
        .map(|v| 2.0 * (v + 0.35) - 1.0);
    let shifted = u.map(|v| v + 0.4);
    let r = evaluate(&u, &shifted).map_err(|e| e.to_string())?;
    let expected = 10.0 * (1.0_f64 / 0.04).log10();
    ensure((r.psnr - expected).abs() <= 1e-3, || {
        format!("psnr {} vs {expected}", r.psnr)
    })?;
    Ok(format!(
        "identical pair exact; offset psnr {:.6} dB (expected {expected:.6})",
        r.psnr
    ))
}

fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_inkmorph"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`inkmorph {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(out.stdout)
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn criterion_7(dir: &Path) -> Check {
    cli(
        dir,
        &["synth-glyph", "--seed", "1", "--output", "glyph.pgm"],
    )?;
    cli(
        dir,
        &[
            "optimize",
            "--target",
            "glyph.pgm",
            "--out-dir",
            "descent",
            "--steps",
            "200",
            "--noise",
            "0.3",
            "--seed",
            "7",
        ],
    )?;
    let manifest = read_json(&dir.join("descent/manifest.json"))?;
    let lr = manifest["config"]["lr"]
        .as_f64()
        .ok_or("manifest lacks lr")?;
    ensure((0.1..=1.0).contains(&lr), || {
        format!("lr {lr} outside [0.1, 1.0]")
    })?;
    let trace = fs::read_to_string(dir.join("descent/trace.jsonl")).map_err(|e| e.to_string())?;
    let records: Vec<Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let (first, last) = (&records[0], &records[records.len() - 1]);
    ensure(last["step"] == 200, || {
        format!("last logged step {}", last["step"])
    })?;
    let ratio = last["total"].as_f64().unwrap() / first["total"].as_f64().unwrap();
    let b0 = first["dis"]["boundary"].as_f64().unwrap();
    let b1 = last["dis"]["boundary"].as_f64().unwrap();
    let drop = 1.0 - b1 / b0;
    ensure(ratio <= 0.10, || format!("final/initial total {ratio:.4}"))?;
    ensure(drop >= 0.5, || {
        format!("boundary decreased by {:.1}%", drop * 100.0)
    })?;
    Ok(format!(
        "lr {lr}: total ratio {ratio:.4}, boundary -{:.1}%",
        drop * 100.0
    ))
}

/// Every file a run wrote, keyed by path, plus its stdout.
fn snapshot(
    dir: &Path,
    manifest: &Path,
    stdout: Vec<u8>,
) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let m = read_json(&dir.join(manifest))?;
    let mut files = BTreeMap::new();
    for o in m["outputs"].as_array().ok_or("manifest lacks outputs")? {
        let p = PathBuf::from(o.as_str().ok_or("output path is not a string")?);
        let bytes = fs::read(dir.join(&p)).map_err(|e| format!("{}: {e}", p.display()))?;
        files.insert(p, bytes);
    }
    ensure(files.contains_key(manifest), || {
        format!("{} not listed in its own outputs", manifest.display())
    })?;
    files.insert(PathBuf::from("<stdout>"), stdout);
    Ok(files)
}

fn criterion_10(dir: &Path) -> Check {
    cli(
        dir,
        &[
            "synth-glyph",
            "--seed",
            "4",
            "--size",
            "48",
            "--output",
            "base.pgm",
        ],
    )?;
    cli(
        dir,
        &[
            "synth-glyph",
            "--seed",
            "5",
            "--size",
            "48",
            "--output",
            "other.pgm",
        ],
    )?;
    fs::create_dir_all(dir.join("pairs/generated")).map_err(|e| e.to_string())?;
    fs::create_dir_all(dir.join("pairs/target")).map_err(|e| e.to_string())?;
    let copies = [
        ("base.pgm", "pairs/target/a.pgm"),
        ("base.pgm", "pairs/target/b.pgm"),
        ("base.pgm", "pairs/generated/a.pgm"),
        ("other.pgm", "pairs/generated/b.pgm"),
    ];
    for (from, to) in copies {
        fs::copy(dir.join(from), dir.join(to)).map_err(|e| e.to_string())?;
    }

    let runs: Vec<(&str, Vec<&str>, &str)> = vec![
        (
            "synth-glyph",
            vec![
                "synth-glyph",
                "--seed",
                "9",
                "--size",
                "40",
                "--output",
                "g/glyph.pgm",
            ],
            "g/glyph.manifest.json",
        ),
        (
            "morph",
            vec![
                "morph",
                "--input",
                "base.pgm",
                "--op",
                "erode",
                "--tau",
                "0.3",
                "--output",
                "m/eroded.pgm",
            ],
            "m/eroded.manifest.json",
        ),
        (
            "dis-loss",
            vec![
                "dis-loss",
                "--generated",
                "other.pgm",
                "--target",
                "base.pgm",
                "--manifest",
                "d.json",
            ],
            "d.json",
        ),
        (
            "gradcheck",
            vec![
                "gradcheck",
                "--seed",
                "7",
                "--size",
                "16",
                "--probes",
                "100",
                "--h",
                "1e-4",
                "--manifest",
                "gc.json",
            ],
            "gc.json",
        ),
        (
            "optimize",
            vec![
                "optimize",
                "--target",
                "base.pgm",
                "--out-dir",
                "o",
                "--steps",
                "20",
                "--seed",
                "3",
            ],
            "o/manifest.json",
        ),
        (
            "diffuse forward",
            vec![
                "diffuse", "forward", "--input", "base.pgm", "--t", "300", "--seed", "2",
                "--output", "f/xt.pgm",
            ],
            "f/xt.manifest.json",
        ),
        (
            "diffuse sample",
            vec![
                "diffuse",
                "sample",
                "--size",
                "24",
                "--T",
                "100",
                "--seed",
                "5",
                "--dump-every",
                "50",
                "--out-dir",
                "s",
            ],
            "s/manifest.json",
        ),
        (
            "staf-demo",
            vec![
                "staf-demo",
                "--content",
                "base.pgm",
                "--layer",
                "2",
                "--t",
                "400",
                "--out-dir",
                "st",
            ],
            "st/manifest.json",
        ),
        (
            "metrics",
            vec!["metrics", "--pairs-dir", "pairs", "--manifest", "mt.json"],
            "mt.json",
        ),
    ];
    for (name, args, manifest) in &runs {
        let manifest = Path::new(manifest);
        let stdout = cli(dir, args)?;
        let first = snapshot(dir, manifest, stdout)?;
        let stdout = cli(dir, &["rerun", manifest.to_str().unwrap()])?;
        let second = snapshot(dir, manifest, stdout)?;
        ensure(first.len() == second.len(), || {
            format!("{name}: output sets differ")
        })?;
        for (path, bytes) in &first {
            ensure(second.get(path) == Some(bytes), || {
                format!("{name}: {} differs on rerun", path.display())
            })?;
        }
    }
    Ok(format!(
        "{} subcommands reproduced bit-for-bit from their manifests",
        runs.len()
    ))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let dir7 = scratch.path().join("c7");
    let dir10 = scratch.path().join("c10");
    fs::create_dir_all(&dir7).unwrap();
    fs::create_dir_all(&dir10).unwrap();

    let criteria: Vec<Criterion> = vec![
        (1, "morphology identity", 5, Box::new(criterion_1)),
        (2, "gradient oracle", 60, Box::new(criterion_2)),
        (3, "temperature limit", 1, Box::new(criterion_3)),
        (4, "diffusion inversion", 1, Box::new(criterion_4)),
        (5, "variance identity", 2, Box::new(criterion_5)),
        (6, "STAF gates", 1, Box::new(criterion_6)),
        (
            7,
            "optimization descent",
            120,
            Box::new(move || criterion_7(&dir7)),
        ),
        (8, "boundary-mask locality", 1, Box::new(criterion_8)),
        (9, "metric sanity", 1, Box::new(criterion_9)),
        (
            10,
            "CLI determinism",
            60,
            Box::new(move || criterion_10(&dir10)),
        ),
    ];
    let mut failures = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed > Duration::from_secs(limit) {
                Err(format!(
                    "{detail}; took {:.2}s, limit {limit}s",
                    elapsed.as_secs_f64()
                ))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!(
                "criterion {n:>2} PASS  {name}: {detail} [{:.2}s]",
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                failures += 1;
                println!(
                    "criterion {n:>2} FAIL  {name}: {why} [{:.2}s]",
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failures == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 10 criteria failed");
        ExitCode::FAILURE
    }
}
