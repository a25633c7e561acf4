//! Simulation of dy_t = S(t) dt + ε dξ_t on a uniform grid, where
//! ξ = ρ₁ w + ρ₂ z, w is a Brownian motion and z a compensated compound
//! Poisson process whose Lévy measure satisfies Π(x²) = 1.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::basis::{scaled_frequency, trig_antiderivative, trig_eval, trig_frequency};
use crate::error::{MspError, Result};
use crate::seed::stream_rng;

pub(crate) const NORMALIZATION_TOL: f64 = 1e-12;

/// Distribution of a single jump size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDist {
    /// +c with probability `p_plus`, −c otherwise.
    TwoPoint { c: f64, p_plus: f64 },
    /// Centered normal with standard deviation `std`.
    Gaussian { std: f64 },
    /// Centered Laplace with scale `scale`.
    Laplace { scale: f64 },
}

impl SizeDist {
    pub fn mean(&self) -> f64 {
        match *self {
            SizeDist::TwoPoint { c, p_plus } => c * (2.0 * p_plus - 1.0),
            SizeDist::Gaussian { .. } | SizeDist::Laplace { .. } => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            SizeDist::TwoPoint { c, .. } => c * c,
            SizeDist::Gaussian { std } => std * std,
            SizeDist::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    pub fn fourth_moment(&self) -> f64 {
        match *self {
            SizeDist::TwoPoint { c, .. } => c.powi(4),
            SizeDist::Gaussian { std } => 3.0 * std.powi(4),
            SizeDist::Laplace { scale } => 24.0 * scale.powi(4),
        }
    }

    /// E[Y² 1{|Y| ≤ a}].
    pub fn truncated_second_moment(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        match *self {
            SizeDist::TwoPoint { c, .. } => {
                if c.abs() <= a {
                    c * c
                } else {
                    0.0
                }
            }
            SizeDist::Gaussian { std } => {
                let u = a / std;
                let pdf = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
                std * std * (erf(u / SQRT_2) - 2.0 * u * pdf)
            }
            SizeDist::Laplace { scale } => {
                let u = a / scale;
                2.0 * scale * scale * (1.0 - (-u).exp() * (1.0 + u + 0.5 * u * u))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SizeDist::TwoPoint { c, p_plus } => c > 0.0 && (0.0..=1.0).contains(&p_plus),
            SizeDist::Gaussian { std } => std > 0.0,
            SizeDist::Laplace { scale } => scale > 0.0,
        };
        if ok && self.second_moment().is_finite() {
            Ok(())
        } else {
            Err(MspError::Degenerate(format!("invalid jump size law {:?}", self)))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SizeDist::TwoPoint { c, p_plus } => {
                if rng.gen::<f64>() < p_plus {
                    c
                } else {
                    -c
                }
            }
            SizeDist::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            SizeDist::Laplace { scale } => {
                let u: f64 = rng.gen::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

/// Compound Poisson Lévy measure Π = intensity × law(Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
    pub intensity: f64,
    pub size: SizeDist,
}

impl JumpLaw {
    /// Law with the intensity chosen so that Π(x²) = 1.
    pub fn normalized(size: SizeDist) -> Result<Self> {
        size.validate()?;
        Ok(JumpLaw { intensity: 1.0 / size.second_moment(), size })
    }

    /// Π(x²).
    pub fn pi_x2(&self) -> f64 {
        self.intensity * self.size.second_moment()
    }

    /// Π(x⁴).
    pub fn pi_x4(&self) -> f64 {
        self.intensity * self.size.fourth_moment()
    }

    /// Π(x² 1{|x| ≤ a}).
    pub fn pi_truncated_x2(&self, a: f64) -> f64 {
        self.intensity * self.size.truncated_second_moment(a)
    }
}

/// Noise distribution Q: amplitudes of the Brownian and jump parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    rho1: f64,
    rho2: f64,
    jump_law: Option<JumpLaw>,
    sigma_star: f64,
}

impl NoiseModel {
    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    pub fn jump_law(&self) -> Option<&JumpLaw> {
        self.jump_law.as_ref()
    }

    pub fn sigma_star(&self) -> f64 {
        self.sigma_star
    }

    /// ϰ_Q = ρ₁² + ρ₂².
    pub fn kappa_q(&self) -> f64 {
        self.rho1 * self.rho1 + self.rho2 * self.rho2
    }

    /// Standard Brownian noise with unit variance, the simulation setting.
    pub fn brownian() -> Self {
        NoiseModel { rho1: 1.0, rho2: 0.0, jump_law: None, sigma_star: 1.0 }
    }

    /// ρ₂⁴ Π(x⁴), zero without jumps.
    pub fn jump_fourth_term(&self) -> f64 {
        match self.jump_law {
            Some(law) if self.rho2 > 0.0 => self.rho2.powi(4) * law.pi_x4(),
            _ => 0.0,
        }
    }
}

pub fn make_noise_model(
    rho1: f64,
    rho2: f64,
    jump_law: Option<JumpLaw>,
    sigma_star: f64,
) -> Result<NoiseModel> {
    if !(rho1 >= 0.0 && rho2 >= 0.0) || (rho1 == 0.0 && rho2 == 0.0) {
        return Err(MspError::Degenerate(format!("amplitudes rho1={rho1}, rho2={rho2}")));
    }
    if !(sigma_star > 0.0) {
        return Err(MspError::Degenerate(format!("family bound {sigma_star}")));
    }
    if let Some(law) = &jump_law {
        law.size.validate()?;
        let m2 = law.pi_x2();
        if !(law.intensity > 0.0) || (m2 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MspError::Normalization(m2));
        }
    } else if rho2 > 0.0 {
        return Err(MspError::Degenerate("jump amplitude set without a jump law".into()));
    }
    let kappa = rho1 * rho1 + rho2 * rho2;
    if kappa > sigma_star * (1.0 + NORMALIZATION_TOL) {
        return Err(MspError::FamilyBound { kappa, bound: sigma_star });
    }
    Ok(NoiseModel { rho1, rho2, jump_law, sigma_star })
}

/// (ϰ_Q, ϰ̌_Q) where ϰ̌_Q = ρ₁² + ρ₂² Π(x² 1{|x| ≤ ā/(ρ₂ε)}).
pub fn noise_variances(noise: &NoiseModel, epsilon: f64, a_bar: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && a_bar > 0.0) {
        return Err(MspError::Degenerate(format!("epsilon={epsilon}, a_bar={a_bar}")));
    }
    let kappa = noise.kappa_q();
    if noise.rho2 == 0.0 {
        return Ok((kappa, noise.rho1 * noise.rho1));
    }
    let law = noise
        .jump_law
        .ok_or_else(|| MspError::Degenerate("jump amplitude set without a jump law".into()))?;
    let a_tilde = a_bar / (noise.rho2 * epsilon);
    let check = noise.rho1 * noise.rho1 + noise.rho2 * noise.rho2 * law.pi_truncated_x2(a_tilde);
    Ok((kappa, check))
}

/// Unknown regression function S.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// Σ c Tr_j over (trigonometric index, coefficient) pairs.
    Trig { terms: Vec<(usize, f64)> },
    /// Values at t_i = i/p, i = 0..=p.
    Sampled { values: Vec<f64> },
}

impl SignalSpec {
    pub fn trig(terms: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (j, _) in &terms {
            if *j == 0 || !seen.insert(*j) {
                return Err(MspError::config("signal basis indices must be positive and distinct"));
            }
        }
        Ok(SignalSpec::Trig { terms })
    }

    pub fn zero() -> Self {
        SignalSpec::Trig { terms: Vec::new() }
    }

    /// S(t) = Σ_{j=1}^{10} j/(j+1) √2 sin(2π l_j t), l_j = [√j]·j.
    pub fn multipath_test_signal() -> Self {
        let terms = (1..=10usize)
            .map(|j| (2 * scaled_frequency(j) + 1, j as f64 / (j as f64 + 1.0)))
            .collect();
        SignalSpec::Trig { terms }
    }

    pub fn terms(&self) -> Option<&[(usize, f64)]> {
        match self {
            SignalSpec::Trig { terms } => Some(terms),
            SignalSpec::Sampled { .. } => None,
        }
    }

    /// ‖S‖² = Σ θ_j², available for basis-form signals.
    pub fn norm_sq(&self) -> Option<f64> {
        self.terms().map(|t| t.iter().map(|(_, c)| c * c).sum())
    }

    /// ‖Ṡ‖ = (Σ (2π l_j c_j)²)^{1/2}, available for basis-form signals.
    pub fn derivative_norm(&self) -> Option<f64> {
        self.terms().map(|t| {
            t.iter()
                .map(|(j, c)| (2.0 * PI * trig_frequency(*j) as f64 * c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
    }

    /// Largest trigonometric index carrying a term.
    pub fn max_index(&self) -> Option<usize> {
        self.terms().map(|t| t.iter().map(|(j, _)| *j).max().unwrap_or(1))
    }

    pub fn values_on_grid(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            SignalSpec::Trig { terms } => Ok((0..=p)
                .map(|i| {
                    let t = i as f64 / p as f64;
                    terms.iter().map(|(j, c)| c * trig_eval(*j, t)).sum()
                })
                .collect()),
            SignalSpec::Sampled { values } => {
                check_grid(values.len(), p)?;
                Ok(values.clone())
            }
        }
    }

    /// ∫₀^{t_i} S ds for i = 0..=p: closed form for basis-form signals,
    /// cumulative trapezoid otherwise.
    pub fn cumulative_integral(&self, p: usize) -> Result<Vec<f64>> {
        match self {
            SignalSpec::Trig { terms } => Ok((0..=p)
                .map(|i| {
                    let t = i as f64 / p as f64;
                    terms.iter().map(|(j, c)| c * trig_antiderivative(*j, t)).sum()
                })
                .collect()),
            SignalSpec::Sampled { values } => {
                check_grid(values.len(), p)?;
                let h = 1.0 / p as f64;
                let mut out = Vec::with_capacity(p + 1);
                let mut acc = 0.0;
                out.push(0.0);
                for w in values.windows(2) {
                    acc += 0.5 * h * (w[0] + w[1]);
                    out.push(acc);
                }
                Ok(out)
            }
        }
    }
}

fn check_grid(len: usize, p: usize) -> Result<()> {
    if len != p + 1 {
        return Err(MspError::GridMismatch { expected: p + 1, actual: len });
    }
    Ok(())
}

/// A jump of the observed process: time in (0, 1] and size of ε ρ₂ ΔZ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

impl Jump {
    /// Grid cell (t_{i-1}, t_i] containing the jump, as the index i.
    pub fn cell(&self, p: usize) -> usize {
        ((self.time * p as f64).ceil() as usize).clamp(1, p)
    }
}

/// Observed path y on the grid t_i = i/p, i = 0..=p.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPath {
    pub p: usize,
    pub epsilon: f64,
    pub values: Vec<f64>,
    pub jumps: Vec<Jump>,
    pub seed: u64,
}

impl ObservationPath {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.p as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.p).map(|i| self.time(i)).collect()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn from_increments(template: &ObservationPath, increments: &[f64], jumps: Vec<Jump>) -> Self {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for d in increments {
            acc += d;
            values.push(acc);
        }
        ObservationPath { p: template.p, epsilon: template.epsilon, values, jumps, seed: template.seed }
    }

    pub fn same_grid(&self, other: &ObservationPath) -> Result<()> {
        if self.p != other.p || self.values.len() != other.values.len() {
            return Err(MspError::GridMismatch { expected: self.values.len(), actual: other.values.len() });
        }
        if self.epsilon != other.epsilon {
            return Err(MspError::Degenerate("paths observed at different noise levels".into()));
        }
        Ok(())
    }
}

pub const MIN_GRID: usize = 100;

/// Simulates y on the p-grid; Brownian increments come from stream 0 of
/// `seed`, jump times and sizes from stream 1.
pub fn simulate_path(
    signal: &SignalSpec,
    noise: &NoiseModel,
    epsilon: f64,
    p: usize,
    seed: u64,
) -> Result<ObservationPath> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(MspError::Degenerate(format!("epsilon={epsilon}")));
    }
    if p < MIN_GRID {
        return Err(MspError::config(format!("grid size {p} below {MIN_GRID}")));
    }
    let mut values = signal.cumulative_integral(p)?;

    if noise.rho1 > 0.0 {
        let mut rng = stream_rng(seed, 0);
        let scale = epsilon * noise.rho1 / (p as f64).sqrt();
        let mut w = 0.0;
        for v in values.iter_mut().skip(1) {
            w += scale * rng.sample::<f64, _>(StandardNormal);
            *v += w;
        }
    }

    let mut jumps = Vec::new();
    if noise.rho2 > 0.0 {
        let law = noise.jump_law.expect("validated noise model");
        let mut rng = stream_rng(seed, 1);
        let wait = Exp::new(law.intensity).map_err(|e| MspError::Degenerate(e.to_string()))?;
        let mut t = 0.0;
        loop {
            t += wait.sample(&mut rng);
            if t > 1.0 {
                break;
            }
            let size = epsilon * noise.rho2 * law.size.sample(&mut rng);
            jumps.push(Jump { time: t, size });
        }
        let mut step = vec![0.0; p + 1];
        for j in &jumps {
            step[j.cell(p)] += j.size;
        }
        // compensator of the jump measure
        let drift = epsilon * noise.rho2 * law.intensity * law.size.mean() / p as f64;
        let mut z = 0.0;
        for (i, v) in values.iter_mut().enumerate().skip(1) {
            z += step[i] - drift;
            *v += z;
        }
    }

    Ok(ObservationPath { p, epsilon, values, jumps, seed })
}
