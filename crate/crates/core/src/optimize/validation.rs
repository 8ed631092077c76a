use serde::{Deserialize, Serialize};

use super::descent::{OptimizeConfig, TotalObjective};
use super::gradcheck::{check_gradient, GradCheckReport};
use crate::diffusion::GaussianStream;
use crate::dis_loss::{DisObjective, DisWeights};
use crate::error::{invalid, Result};
use crate::image::ImageGrid;
use crate::soft_morph::{
    soft_dilation, soft_dilation_vjp, soft_erosion, soft_erosion_vjp, MorphConfig,
};

/// One analytic gradient checked against central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub name: String,
    #[serde(flatten)]
    pub report: GradCheckReport,
}

fn dot(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| p * q)
        .sum()
}

/// Up to `count` pixel indices in seeded random order, skipping flagged ones.
fn pick_probes(rng: &mut GaussianStream, flagged: &[bool], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..flagged.len()).collect();
    // Fisher–Yates
    for i in (1..order.len()).rev() {
        let j = (rng.next_uniform() * (i + 1) as f64) as usize;
        order.swap(i, j.min(i));
    }
    order
        .into_iter()
        .filter(|&p| !flagged[p])
        .take(count)
        .collect()
}

/// Checks every analytic gradient in the crate on random `size x size`
/// images drawn from `seed`:
///
/// * `soft_erosion` / `soft_dilation` VJPs (τ = 0.5, radius 1, random
///   upstream);
/// * each DIS component, the weighted DIS total (default weights), and
///   the combined objective with λ_dis = 0.02.
///
/// Probes near an absolute-value kink are excluded, so a case may probe
/// fewer pixels than requested.
pub fn validate_gradients(
    seed: u64,
    size: usize,
    probes: usize,
    h: f64,
) -> Result<Vec<GradCheckCase>> {
    if size < 3 {
        return Err(invalid("gradient check images need size >= 3"));
    }
    let mut rng = GaussianStream::new(seed);
    let x = rng.uniform_image(size, size, 1.0);
    let target = rng.uniform_image(size, size, 1.0);
    let upstream = rng.uniform_image(size, size, 1.0);
    let none = vec![false; size * size];
    let mut cases = Vec::new();

    let morph = MorphConfig::new(0.5, 1)?;
    let p = pick_probes(&mut rng, &none, probes);
    let g = soft_erosion_vjp(&x, &morph, &upstream)?;
    let report = check_gradient(
        &g,
        |v| Ok(dot(&upstream, &soft_erosion(v, &morph)?)),
        &x,
        h,
        &p,
    )?;
    cases.push(GradCheckCase {
        name: "soft_erosion".into(),
        report,
    });
    let g = soft_dilation_vjp(&x, &morph, &upstream)?;
    let report = check_gradient(
        &g,
        |v| Ok(dot(&upstream, &soft_dilation(v, &morph)?)),
        &x,
        h,
        &p,
    )?;
    cases.push(GradCheckCase {
        name: "soft_dilation".into(),
        report,
    });

    let base = DisWeights::default();
    let components = [
        (
            "dis_core",
            DisWeights {
                lambda_c: 1.0,
                lambda_b: 0.0,
                lambda_lap: 0.0,
                ..base
            },
        ),
        (
            "dis_boundary",
            DisWeights {
                lambda_c: 0.0,
                lambda_b: 1.0,
                lambda_lap: 0.0,
                ..base
            },
        ),
        (
            "dis_smooth",
            DisWeights {
                lambda_c: 0.0,
                lambda_b: 0.0,
                lambda_lap: 1.0,
                ..base
            },
        ),
        ("dis_total", base),
    ];
    for (name, weights) in components {
        let objective = DisObjective::new(&target, &weights)?;
        let flagged = objective.kink_pixels(&x, h)?;
        let p = pick_probes(&mut rng, &flagged, probes);
        let g = objective.grad(&x)?;
        let report = check_gradient(&g, |v| Ok(objective.evaluate(v)?.total), &x, h, &p)?;
        cases.push(GradCheckCase {
            name: name.into(),
            report,
        });
    }

    let cfg = OptimizeConfig::default();
    let objective = TotalObjective::new(&target, cfg.lambda_dis, &cfg.dis_weights)?;
    let flagged = objective.kink_pixels(&x, h)?;
    let p = pick_probes(&mut rng, &flagged, probes);
    let g = objective.grad(&x)?;
    let report = check_gradient(&g, |v| Ok(objective.evaluate(v)?.0), &x, h, &p)?;
    cases.push(GradCheckCase {
        name: "total_loss".into(),
        report,
    });
    Ok(cases)
}
