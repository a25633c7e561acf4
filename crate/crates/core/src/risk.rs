//! Monte Carlo risks, oracle-inequality constants and Pinsker efficiency.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::basis::project_basis;
use crate::error::{MspError, Result};
use crate::estimator::Candidate;
use crate::noise_sim::{noise_variances, NoiseModel, SignalSpec};
use crate::pipeline::{PipelineConfig, Prepared};
use crate::seed::split_seed;

/// Constants of the remainder terms in the oracle inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConstants {
    pub kappa: f64,
    pub kappa_check: f64,
    /// Ψ_{Q,ε} = 8ϰ̌(1+ι) + 4 U_{1,Q} ι / ϰ̌
    pub psi: f64,
    /// U_Q = 24ϰ² + 6ρ₂⁴Π(x⁴)
    pub u_q: f64,
    /// U_{1,Q} = U_Q + 6ϰ̌(φ*)⁴
    pub u_1q: f64,
    /// Υ_Q(S) = 4(‖Ṡ‖+1)²(1 + √ϰ̌ + 2ϰ̌ + √U_Q)
    pub upsilon_s: f64,
    pub g1: f64,
    pub g2: f64,
}

pub fn oracle_constants(
    noise: &NoiseModel,
    epsilon: f64,
    a_bar: f64,
    signal_deriv_norm: f64,
    iota: usize,
    phi_star: f64,
) -> Result<OracleConstants> {
    let (kappa, kappa_check) = noise_variances(noise, epsilon, a_bar)?;
    if !(kappa_check > 0.0) {
        return Err(MspError::Degenerate("truncated noise variance is zero".into()));
    }
    let u_q = 24.0 * kappa * kappa + 6.0 * noise.jump_fourth_term();
    let u_1q = u_q + 6.0 * kappa_check * phi_star.powi(4);
    let iota = iota as f64;
    let psi = 8.0 * kappa_check * (1.0 + iota) + 4.0 * u_1q * iota / kappa_check;
    let shape = 1.0 + kappa_check.sqrt() + 2.0 * kappa_check + u_q.sqrt();
    Ok(OracleConstants {
        kappa,
        kappa_check,
        psi,
        u_q,
        u_1q,
        upsilon_s: 4.0 * (signal_deriv_norm + 1.0).powi(2) * shape,
        g1: 48.0 * shape,
        g2: 12.0 * (6.0 * kappa_check).sqrt(),
    })
}

/// Grid risk (1/p) Σ_{i=1}^p (Ŝ(t_i) − S(t_i))² for values on t_i = i/p, i = 0..=p.
pub fn empirical_abs_risk(s_hat: &[f64], s_true: &[f64], p: usize) -> Result<f64> {
    for v in [s_hat, s_true] {
        if v.len() != p + 1 {
            return Err(MspError::GridMismatch { expected: p + 1, actual: v.len() });
        }
    }
    Ok(s_hat[1..].iter().zip(&s_true[1..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p as f64)
}

/// ‖S‖²_p = (1/p) Σ_{i=1}^p S(t_i)².
pub fn grid_norm_sq(s_true: &[f64]) -> f64 {
    let p = s_true.len() - 1;
    s_true[1..].iter().map(|v| v * v).sum::<f64>() / p as f64
}

/// Single-replication (R, R / ‖S‖²_p).
pub fn empirical_risk(s_hat: &[f64], s_true: &[f64], p: usize) -> Result<(f64, f64)> {
    let r = empirical_abs_risk(s_hat, s_true, p)?;
    let norm = grid_norm_sq(s_true);
    if norm == 0.0 {
        return Err(MspError::ZeroSignal);
    }
    Ok((r, r / norm))
}

/// Pinsker constant ((2k+1)r)^{1/(2k+1)} (k/((k+1)π))^{2k/(2k+1)}.
pub fn pinsker_constant(k: u32, r: f64) -> f64 {
    let k = k as f64;
    ((2.0 * k + 1.0) * r).powf(1.0 / (2.0 * k + 1.0)) * (k / ((k + 1.0) * PI)).powf(2.0 * k / (2.0 * k + 1.0))
}

/// υ_ε^{2k/(2k+1)} · risk / l_*(r), with υ_ε = 1/(ε² ς*).
pub fn efficiency_ratio(sup_risk: f64, epsilon: f64, sigma_star: f64, k: u32, r: f64) -> f64 {
    let upsilon = 1.0 / (epsilon * epsilon * sigma_star);
    let kf = k as f64;
    upsilon.powf(2.0 * kf / (2.0 * kf + 1.0)) * sup_risk / pinsker_constant(k, r)
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub epsilon: f64,
    pub n_reps: usize,
    pub seed: u64,
    /// R̄ on the grid
    pub r_bar: f64,
    pub r_bar_se: f64,
    /// R̄ / ‖S‖²_p
    pub r_bar_rel: f64,
    /// ‖Ŝ_* − S‖² in coefficient space
    pub risk_star: f64,
    pub risk_star_se: f64,
    /// ‖Ŝ_λ − S‖² per candidate, grid order
    pub per_lambda: Vec<f64>,
    pub per_lambda_se: Vec<f64>,
    /// mean cost J(λ) per candidate
    pub j_mean: Vec<f64>,
    /// P(λ) = ε² ϰ̌ |λ|² per candidate
    pub penalty_known: Vec<f64>,
    pub oracle_ratio: f64,
    /// risk_star − (1+3δ)/(1−3δ) min_λ risk
    pub slack: f64,
    pub delta: f64,
    pub kappa_check: f64,
    pub kappa_hat_mean: f64,
    pub kappa_hat_abs_err: f64,
    pub kappa_hat_abs_err_se: f64,
    pub iota: usize,
    pub lambda_star: usize,
    pub a_bar: f64,
    pub alphas: Vec<Option<(u32, f64)>>,
}

impl RiskReport {
    pub fn min_lambda(&self) -> usize {
        crate::estimator::argmin_first(&self.per_lambda)
    }

    pub fn oracle_factor(&self) -> f64 {
        (1.0 + 3.0 * self.delta) / (1.0 - 3.0 * self.delta)
    }
}

struct RepOutcome {
    grid_risk: f64,
    coeff_risks: Vec<f64>,
    costs: Vec<f64>,
    chosen: usize,
    kappa_hat: f64,
}

/// Signal coordinates in the estimator basis and the energy left outside them.
fn signal_coordinates(signal: &SignalSpec, prep: &Prepared, s_true: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = prep.n;
    let basis = &prep.config.basis;
    match signal {
        SignalSpec::Trig { terms } => {
            let theta = basis.coefficients_of(terms, n);
            let inside: f64 = theta.iter().map(|t| t * t).sum();
            let total = signal.norm_sq().unwrap_or(0.0);
            Ok((theta, (total - inside).max(0.0)))
        }
        SignalSpec::Sampled { .. } => {
            let theta = (1..=n)
                .map(|j| project_basis(s_true, basis, j, prep.p))
                .collect::<Result<Vec<_>>>()?;
            let h = 1.0 / prep.p as f64;
            let total: f64 = s_true
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 || i == prep.p { 0.5 * v * v } else { v * v })
                .sum::<f64>()
                * h;
            let inside: f64 = theta.iter().map(|t| t * t).sum();
            Ok((theta, (total - inside).max(0.0)))
        }
    }
}

fn candidate_risks(prep: &Prepared, theta_hat: &[f64], theta: &[f64], tail: f64) -> Vec<f64> {
    let n = prep.n;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for t in theta {
        acc += t * t;
        prefix.push(acc);
    }
    prep.family
        .candidates
        .iter()
        .map(|c| {
            let last = match c {
                Candidate::Grid(g) => (g.omega.floor() as usize).min(n),
                Candidate::Explicit(_) => n,
            };
            let mut r = tail + prefix[n] - prefix[last];
            for j in 1..=last {
                let l = c.weight(j);
                r += (l * theta_hat[j - 1] - theta[j - 1]).powi(2);
            }
            r
        })
        .collect()
}

/// Runs the full procedure `n_reps` times on split seeds of `seed`.
pub fn monte_carlo_risk(
    signal: &SignalSpec,
    noise: &NoiseModel,
    epsilon: f64,
    p: usize,
    n_reps: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<RiskReport> {
    let prep = config.prepare(epsilon, p)?;
    monte_carlo_risk_prepared(signal, noise, &prep, n_reps, seed)
}

pub fn monte_carlo_risk_prepared(
    signal: &SignalSpec,
    noise: &NoiseModel,
    prep: &Prepared,
    n_reps: usize,
    seed: u64,
) -> Result<RiskReport> {
    if n_reps < 2 {
        return Err(MspError::config("Monte Carlo risk needs at least two replications"));
    }
    let p = prep.p;
    let s_true = signal.values_on_grid(p)?;
    let (theta, tail) = signal_coordinates(signal, prep, &s_true)?;
    let kappa_check = prep.kappa_check(noise)?;

    let outcomes: Vec<RepOutcome> = (0..n_reps)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let (_, est) = prep.run(signal, noise, split_seed(seed, rep as u64))?;
            let sel = est.selection;
            Ok(RepOutcome {
                grid_risk: empirical_abs_risk(&sel.s_hat, &s_true, p)?,
                coeff_risks: candidate_risks(prep, &sel.theta_hat, &theta, tail),
                costs: sel.costs,
                chosen: sel.chosen,
                kappa_hat: sel.kappa_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let iota = prep.family.iota();
    let grid: Vec<f64> = outcomes.iter().map(|o| o.grid_risk).collect();
    let (r_bar, r_bar_se) = mean_se(&grid);
    let norm = grid_norm_sq(&s_true);
    let r_bar_rel = if norm > 0.0 { r_bar / norm } else { f64::NAN };
    let star: Vec<f64> = outcomes.iter().map(|o| o.coeff_risks[o.chosen]).collect();
    let (risk_star, risk_star_se) = mean_se(&star);

    let mut per_lambda = Vec::with_capacity(iota);
    let mut per_lambda_se = Vec::with_capacity(iota);
    let mut j_mean = Vec::with_capacity(iota);
    let mut column = vec![0.0; outcomes.len()];
    for k in 0..iota {
        for (c, o) in column.iter_mut().zip(&outcomes) {
            *c = o.coeff_risks[k];
        }
        let (m, se) = mean_se(&column);
        per_lambda.push(m);
        per_lambda_se.push(se);
        j_mean.push(outcomes.iter().map(|o| o.costs[k]).sum::<f64>() / outcomes.len() as f64);
    }
    let kh: Vec<f64> = outcomes.iter().map(|o| o.kappa_hat).collect();
    let kappa_hat_mean = mean_se(&kh).0;
    let abs_err: Vec<f64> = kh.iter().map(|k| (k - kappa_check).abs()).collect();
    let (kappa_hat_abs_err, kappa_hat_abs_err_se) = mean_se(&abs_err);

    let min_risk = per_lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = prep.delta;
    let factor = (1.0 + 3.0 * delta) / (1.0 - 3.0 * delta);
    let e2k = prep.epsilon * prep.epsilon * kappa_check;
    let penalty_known = prep
        .family
        .candidates
        .iter()
        .map(|c| e2k * c.to_vec(prep.n).iter().map(|l| l * l).sum::<f64>())
        .collect();

    Ok(RiskReport {
        epsilon: prep.epsilon,
        n_reps,
        seed,
        r_bar,
        r_bar_se,
        r_bar_rel,
        risk_star,
        risk_star_se,
        per_lambda,
        per_lambda_se,
        j_mean,
        penalty_known,
        oracle_ratio: risk_star / min_risk,
        slack: risk_star - factor * min_risk,
        delta,
        kappa_check,
        kappa_hat_mean,
        kappa_hat_abs_err,
        kappa_hat_abs_err_se,
        iota,
        lambda_star: prep.family.lambda_star,
        a_bar: prep.a_bar,
        alphas: prep.family.candidates.iter().map(|c| c.alpha()).collect(),
    })
}

/// Monte Carlo mean and variance of ∫ Tr_j dξ̌ (pure noise, truncated).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralMoments {
    pub index: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Simulates `n_paths` noise-only paths with ε = 1 and returns the moments of
/// the truncated stochastic integrals of the listed trigonometric functions.
pub fn integral_moments(
    noise: &NoiseModel,
    truncation: &crate::estimator::TruncationConfig,
    p: usize,
    n_paths: usize,
    indices: &[usize],
    seed: u64,
) -> Result<Vec<IntegralMoments>> {
    let top = indices.iter().copied().max().unwrap_or(1);
    let tr = crate::basis::TrigTransform::new(p);
    let zero = SignalSpec::zero();
    let samples = (0..n_paths)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let path = crate::noise_sim::simulate_path(&zero, noise, 1.0, p, split_seed(seed, k as u64))?;
            let cut = crate::estimator::truncate_path(&path, truncation);
            let ints = tr.integrals(&cut.increments(), top)?;
            Ok(indices.iter().map(|&j| ints[j - 1]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(indices
        .iter()
        .enumerate()
        .map(|(c, &index)| {
            let col: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let (mean, se) = mean_se(&col);
            IntegralMoments { index, mean, variance: se * se * col.len() as f64 }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct RobustRisk {
    pub reports: Vec<RiskReport>,
    /// index of the noise model with the largest R̄
    pub worst: usize,
}

impl RobustRisk {
    pub fn sup_risk(&self) -> f64 {
        self.reports[self.worst].r_bar
    }
}

/// Maximizes the Monte Carlo risk over a finite set of noise models, all
/// driven by the same seeds.
pub fn robust_risk(
    signal: &SignalSpec,
    noise_set: &[NoiseModel],
    epsilon: f64,
    p: usize,
    n_reps: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<RobustRisk> {
    if noise_set.is_empty() {
        return Err(MspError::config("empty noise set"));
    }
    for q in noise_set {
        if q.kappa_q() > config.sigma_star * (1.0 + crate::noise_sim::NORMALIZATION_TOL) {
            return Err(MspError::FamilyBound { kappa: q.kappa_q(), bound: config.sigma_star });
        }
    }
    let prep = config.prepare(epsilon, p)?;
    let reports = noise_set
        .iter()
        .map(|q| monte_carlo_risk_prepared(signal, q, &prep, n_reps, seed))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = reports.iter().map(|r| -r.r_bar).collect();
    let worst = crate::estimator::argmin_first(&risks);
    Ok(RobustRisk { reports, worst })
}
