use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-step noise variances `β_t` and the derived `α_t = 1 − β_t`,
/// `ᾱ_t = Π_{i≤t} α_i`. Timesteps are 1-based: `t ∈ 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    /// Schedule from explicit betas, each in `(0, 1)`.
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(invalid("schedule needs at least one timestep"));
        }
        if let Some(b) = beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(invalid(format!("beta {b} is outside (0, 1)")));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Ok(Self {
            beta,
            alpha,
            alpha_bar,
        })
    }

    /// `β_t` linear from `beta_start` at `t = 1` to `beta_end` at `t = T`.
    pub fn linear(total_timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if total_timesteps == 0 {
            return Err(invalid("T must be >= 1"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(invalid(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let span = beta_end - beta_start;
        let beta = (0..total_timesteps)
            .map(|i| {
                if total_timesteps == 1 {
                    beta_start
                } else {
                    beta_start + span * i as f64 / (total_timesteps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(beta)
    }

    pub fn total_timesteps(&self) -> usize {
        self.beta.len()
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.total_timesteps() {
            return Err(invalid(format!(
                "timestep {t} outside 1..={}",
                self.total_timesteps()
            )));
        }
        Ok(())
    }

    /// `β_t`; panics outside `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self::linear(1000, 1e-4, 0.02).expect("valid default schedule")
    }
}
