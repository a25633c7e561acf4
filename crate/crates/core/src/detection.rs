//! Estimating the number of active components of a multipath signal.
//!
//! Both detectors work on coefficient estimates in the signal family's own
//! basis, so index d counts signal components.

use crate::error::{MspError, Result};
use crate::estimator::{argmin_first, cost_function};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub iota: usize,
    pub delta: f64,
    pub c_star: f64,
}

impl DetectionConfig {
    /// ι = [ln ε⁻²], c* = ε √|ln ε|.
    pub fn for_epsilon(epsilon: f64, delta: f64) -> Result<Self> {
        let iota = ((1.0 / (epsilon * epsilon)).ln() + 1e-9).floor();
        if !(iota >= 1.0) {
            return Err(MspError::config(format!("no detection candidates at epsilon {epsilon}")));
        }
        Ok(DetectionConfig { iota: iota as usize, delta, c_star: shrinkage_threshold(epsilon) })
    }
}

pub fn shrinkage_threshold(epsilon: f64) -> f64 {
    epsilon * epsilon.ln().abs().sqrt()
}

/// J(d) = Σ_{j≤d} θ̂_j² − 2 Σ_{j≤d} θ̃_j + δ ε² ϰ̂ d.
pub fn projection_cost(d: usize, theta_hat: &[f64], kappa_hat: f64, epsilon: f64, delta: f64) -> Result<f64> {
    if d == 0 || d > theta_hat.len() {
        return Err(MspError::Range { index: d, max: theta_hat.len() });
    }
    if !(delta > 0.0 && delta < 1.0 / 6.0) {
        return Err(MspError::DeltaRange(delta));
    }
    let e2k = epsilon * epsilon * kappa_hat;
    let mut acc = 0.0;
    for t in &theta_hat[..d] {
        let sq = t * t;
        acc += sq - 2.0 * (sq - e2k);
    }
    Ok(acc + delta * e2k * d as f64)
}

/// q̂₁ = argmin_{1 ≤ d ≤ ι} J(d), smallest d on ties.
pub fn detect_count_lse(theta_hat: &[f64], kappa_hat: f64, epsilon: f64, delta: f64, iota: usize) -> Result<usize> {
    if iota == 0 || iota > theta_hat.len() {
        return Err(MspError::Range { index: iota, max: theta_hat.len() });
    }
    let costs = (1..=iota)
        .map(|d| projection_cost(d, theta_hat, kappa_hat, epsilon, delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmin_first(&costs) + 1)
}

/// q̂₂ = inf{j ≥ 1 : |θ̂_j| ≤ c*}, or n + 1 when no coefficient drops below c*.
pub fn detect_count_shrinkage(theta_hat: &[f64], c_star: f64) -> usize {
    theta_hat
        .iter()
        .position(|t| t.abs() <= c_star)
        .map(|i| i + 1)
        .unwrap_or(theta_hat.len() + 1)
}

/// Number of leading coefficients above c*, i.e. q̂₂ − 1.
pub fn shrinkage_signal_count(theta_hat: &[f64], c_star: f64) -> usize {
    detect_count_shrinkage(theta_hat, c_star) - 1
}

/// Projection cost through the general cost function, used to cross-check.
pub fn projection_cost_via_weights(
    d: usize,
    theta_hat: &[f64],
    kappa_hat: f64,
    epsilon: f64,
    delta: f64,
) -> Result<f64> {
    let lambda: Vec<f64> = (1..=theta_hat.len()).map(|j| if j <= d { 1.0 } else { 0.0 }).collect();
    cost_function(&lambda, theta_hat, kappa_hat, epsilon, delta)
}

/// Most frequent value, smallest on ties.
pub fn mode(values: &[usize]) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(*v).or_insert(0usize) += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (v, c) in counts {
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}
