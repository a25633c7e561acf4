//! simulate → truncate → estimate → select, with the per-ε pieces
//! (weight grid, threshold, transform plan) built once and shared.

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, TrigTransform};
use crate::error::{MspError, Result};
use crate::estimator::{
    build_weight_grid, estimate_variance_from, fourier_estimates_from, sample_size, select_model, truncate_path,
    variance_sample_size, GridParams, SelectionResult, ThresholdRule, TruncationConfig, TruncationMode, WeightFamily,
};
use crate::noise_sim::{noise_variances, simulate_path, NoiseModel, ObservationPath, SignalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// ϰ̂ from high-frequency trigonometric coefficients.
    Estimated,
    /// ϰ̂ = ϰ̌_Q, computed from the noise model.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DeltaRule {
    /// δ = (3 + |ln ε|)⁻²
    LogSquared,
    /// δ = (6 + |ln ε|)⁻¹
    LogReciprocal,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(&self, epsilon: f64) -> f64 {
        let le = epsilon.ln().abs();
        match *self {
            DeltaRule::LogSquared => 1.0 / (3.0 + le).powi(2),
            DeltaRule::LogReciprocal => 1.0 / (6.0 + le),
            DeltaRule::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusCount {
    /// m = [1/ϖ]
    Reciprocal,
    /// m = [|ln ε|²]
    LogSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub basis: Basis,
    pub truncation: TruncationMode,
    pub threshold: ThresholdRule,
    pub variance: VarianceMode,
    pub delta: DeltaRule,
    /// k* = k*₀ + √|ln ε|
    pub k_star_0: f64,
    pub radius_count: RadiusCount,
    pub sigma_star: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            basis: Basis::Trigonometric,
            truncation: TruncationMode::Empirical,
            threshold: ThresholdRule::PerSupport,
            variance: VarianceMode::Estimated,
            delta: DeltaRule::LogSquared,
            k_star_0: 100.0,
            radius_count: RadiusCount::LogSquared,
            sigma_star: 1.0,
        }
    }
}

impl PipelineConfig {
    pub fn grid_params(&self, epsilon: f64, n: usize) -> GridParams {
        let le = epsilon.ln().abs();
        GridParams {
            epsilon,
            sigma_star: self.sigma_star,
            k_star: (self.k_star_0 + le.sqrt() + 1e-9).floor().max(1.0) as usize,
            varpi: 1.0 / le,
            m: match self.radius_count {
                RadiusCount::Reciprocal => None,
                RadiusCount::LogSquared => Some((le * le + 1e-9).floor().max(1.0) as usize),
            },
            n,
        }
    }

    pub fn prepare(&self, epsilon: f64, p: usize) -> Result<Prepared> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(MspError::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let max = self.basis.max_index(p);
        if max == 0 {
            return Err(MspError::config(format!("grid of {p} steps resolves no basis function")));
        }
        let n = sample_size(epsilon).min(max);
        let family = build_weight_grid(&self.grid_params(epsilon, n))?;
        let a_bar = self.threshold.a_bar(epsilon, family.lambda_star);
        let delta = self.delta.delta(epsilon);
        if !(delta > 0.0 && delta < 1.0 / 6.0) {
            return Err(MspError::DeltaRange(delta));
        }
        let variance_n = variance_sample_size(epsilon, p);
        let basis_top = self.basis.trig_indices(n).into_iter().max().unwrap_or(1);
        Ok(Prepared {
            config: self.clone(),
            epsilon,
            p,
            n,
            family,
            a_bar,
            delta,
            variance_n,
            trig_top: basis_top.max(variance_n),
            transform: TrigTransform::new(p),
        })
    }
}

/// Everything that depends on (ε, p) but not on the data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: PipelineConfig,
    pub epsilon: f64,
    pub p: usize,
    pub n: usize,
    pub family: WeightFamily,
    pub a_bar: f64,
    pub delta: f64,
    variance_n: usize,
    trig_top: usize,
    pub transform: TrigTransform,
}

/// Result of one pass over one observed path.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub selection: SelectionResult,
    /// ∫ Tr_j dy̌ for every resolvable j.
    pub trig_integrals: Vec<f64>,
    /// ϰ̌_Q when the noise model is known.
    pub kappa_check: Option<f64>,
}

impl Prepared {
    pub fn truncation(&self) -> TruncationConfig {
        TruncationConfig::new(self.a_bar, self.config.truncation).expect("positive threshold")
    }

    pub fn simulate(&self, signal: &SignalSpec, noise: &NoiseModel, seed: u64) -> Result<ObservationPath> {
        simulate_path(signal, noise, self.epsilon, self.p, seed)
    }

    pub fn kappa_check(&self, noise: &NoiseModel) -> Result<f64> {
        Ok(noise_variances(noise, self.epsilon, self.a_bar)?.1)
    }

    /// Runs truncation, estimation and selection on an observed path.
    pub fn estimate(&self, raw: &ObservationPath, noise: Option<&NoiseModel>) -> Result<Estimate> {
        if raw.p != self.p || raw.values.len() != self.p + 1 {
            return Err(MspError::GridMismatch { expected: self.p + 1, actual: raw.values.len() });
        }
        let truncated = truncate_path(raw, &self.truncation());
        let trig = self.transform.integrals(&truncated.increments(), self.p - 1)?;
        let theta_hat = fourier_estimates_from(raw, &trig[..self.trig_top], &self.config.basis, self.n)?;
        let kappa_check = noise.map(|q| self.kappa_check(q)).transpose()?;
        let kappa_hat = match self.config.variance {
            VarianceMode::Estimated => estimate_variance_from(self.epsilon, &trig, self.variance_n)?,
            VarianceMode::Known => kappa_check
                .ok_or_else(|| MspError::config("known-variance mode needs the noise model"))?,
        };
        let selection = select_model(
            &self.family,
            &theta_hat,
            kappa_hat,
            self.epsilon,
            self.delta,
            self.a_bar,
            &self.config.basis,
            &self.transform,
        )?;
        Ok(Estimate { selection, trig_integrals: trig, kappa_check })
    }

    pub fn run(&self, signal: &SignalSpec, noise: &NoiseModel, seed: u64) -> Result<(ObservationPath, Estimate)> {
        let path = self.simulate(signal, noise, seed)?;
        let est = self.estimate(&path, Some(noise))?;
        Ok((path, est))
    }
}

/// Coefficient estimates in `basis` read off precomputed trigonometric integrals.
pub fn reindex(trig_integrals: &[f64], basis: &Basis, len: usize) -> Result<Vec<f64>> {
    basis
        .trig_indices(len)
        .into_iter()
        .map(|i| {
            trig_integrals
                .get(i - 1)
                .copied()
                .ok_or(MspError::Range { index: i, max: trig_integrals.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn delta_rules() {
        let eps = 0.1f64;
        let le = eps.ln().abs();
        assert_abs_diff_eq!(DeltaRule::LogSquared.delta(eps), 1.0 / (3.0 + le).powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(DeltaRule::LogReciprocal.delta(eps), 1.0 / (6.0 + le), epsilon = 1e-15);
        assert_eq!(DeltaRule::Fixed(0.1).delta(eps), 0.1);
    }

    #[test]
    fn grid_defaults_follow_simulation_setup() {
        let cfg = PipelineConfig::default();
        let eps = 1.0 / 1000f64.sqrt();
        let g = cfg.grid_params(eps, 1000);
        assert_eq!(g.k_star, 101);
        assert_eq!(g.m, Some(11));
        assert_abs_diff_eq!(g.varpi, 1.0 / eps.ln().abs(), epsilon = 1e-15);
    }

    #[test]
    fn prepare_caps_n_by_grid() {
        let cfg = PipelineConfig { basis: Basis::ScaledSine, ..PipelineConfig::default() };
        let prep = cfg.prepare(1e-10, 10_000).unwrap();
        assert_eq!(prep.n, Basis::ScaledSine.max_index(10_000));
        let prep = PipelineConfig::default().prepare(1.0 / 20f64.sqrt(), 10_000).unwrap();
        assert_eq!(prep.n, 20);
        assert_abs_diff_eq!(prep.a_bar, prep.epsilon / prep.family.lambda_star as f64, epsilon = 1e-15);
    }

    #[test]
    fn selection_reconstruction_is_consistent() {
        let prep = PipelineConfig::default().prepare(0.1, 4096).unwrap();
        let (_, est) = prep.run(&SignalSpec::trig(vec![(2, 1.0), (5, 0.5)]).unwrap(), &NoiseModel::brownian(), 3).unwrap();
        let sel = &est.selection;
        let coeffs = sel.weighted_coefficients();
        for (i, v) in sel.s_hat.iter().enumerate().step_by(97) {
            let t = i as f64 / 4096.0;
            let want: f64 = coeffs.iter().enumerate().map(|(j, c)| c * crate::basis::trig_eval(j + 1, t)).sum();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn known_variance_needs_noise() {
        let cfg = PipelineConfig { variance: VarianceMode::Known, ..PipelineConfig::default() };
        let prep = cfg.prepare(0.1, 1000).unwrap();
        let path = prep.simulate(&SignalSpec::zero(), &NoiseModel::brownian(), 1).unwrap();
        assert!(prep.estimate(&path, None).is_err());
        let est = prep.estimate(&path, Some(&NoiseModel::brownian())).unwrap();
        assert_eq!(est.selection.kappa_hat, 1.0);
    }
}
