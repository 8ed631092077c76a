use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::ImageGrid;
use crate::par;

/// Denominator floor for [`relative_error`]; below it both values count
/// as zero and the error is effectively absolute.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Central differences `(L(x + h·e_p) − L(x − h·e_p)) / 2h` at each
/// probed flat index `p`. Probes are evaluated in parallel.
pub fn finite_diff_grad<F>(loss: F, x: &ImageGrid, h: f64, probes: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&ImageGrid) -> Result<f64> + Sync + Send,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("finite-difference step h must be > 0"));
    }
    if let Some(p) = probes.iter().find(|&&p| p >= x.len()) {
        return Err(invalid(format!(
            "probe {p} outside image of {} pixels",
            x.len()
        )));
    }
    par::map(probes, |&p| {
        let mut plus = x.clone();
        plus.as_mut_slice()[p] += h;
        let mut minus = x.clone();
        minus.as_mut_slice()[p] -= h;
        Ok((loss(&plus)? - loss(&minus)?) / (2.0 * h))
    })
    .into_iter()
    .collect()
}

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub worst_pixel: Option<usize>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

/// Compares `analytic` against central differences of `loss` at `probes`.
pub fn check_gradient<F>(
    analytic: &ImageGrid,
    loss: F,
    x: &ImageGrid,
    h: f64,
    probes: &[usize],
) -> Result<GradCheckReport>
where
    F: Fn(&ImageGrid) -> Result<f64> + Sync + Send,
{
    analytic.ensure_same_dims(x)?;
    let numeric = finite_diff_grad(loss, x, h, probes)?;
    let mut report = GradCheckReport {
        probes: probes.len(),
        max_rel_error: 0.0,
        worst_pixel: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };
    for (&p, &f) in probes.iter().zip(&numeric) {
        let a = analytic.as_slice()[p];
        let err = relative_error(a, f);
        if report.worst_pixel.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_pixel = Some(p);
            report.analytic_at_worst = a;
            report.numeric_at_worst = f;
        }
    }
    Ok(report)
}
