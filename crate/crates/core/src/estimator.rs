//! Jump truncation, Fourier estimates, variance estimation, the weight grid
//! and penalized model selection.

use serde::{Deserialize, Serialize};

use crate::basis::{stieltjes_direct, Basis, TrigTransform};
use crate::error::{MspError, Result};
use crate::noise_sim::{Jump, ObservationPath};

/// Largest noise level for which the variance estimator is defined.
pub const MAX_VARIANCE_EPSILON: f64 = 0.577_350_269_189_625_8; // 1/√3

/// n = [1/ε²], guarded against 1/ε² landing just below an integer.
pub fn sample_size(epsilon: f64) -> usize {
    (1.0 / (epsilon * epsilon) + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// Drop grid increments larger than ā in absolute value.
    Empirical,
    /// Remove the simulator-recorded jumps larger than ā.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    a_bar: f64,
    pub mode: TruncationMode,
}

impl TruncationConfig {
    pub fn new(a_bar: f64, mode: TruncationMode) -> Result<Self> {
        if !(a_bar > 0.0) {
            return Err(MspError::config(format!("truncation threshold must be positive, got {a_bar}")));
        }
        Ok(TruncationConfig { a_bar, mode })
    }

    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }
}

/// Choice of ā as a function of ε and |Λ|_*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// ā = ε / |Λ|_*
    PerSupport,
    /// ā = ε / √|Λ|_*
    PerSqrtSupport,
}

impl ThresholdRule {
    pub fn a_bar(&self, epsilon: f64, lambda_star: usize) -> f64 {
        let s = lambda_star.max(1) as f64;
        match self {
            ThresholdRule::PerSupport => epsilon / s,
            ThresholdRule::PerSqrtSupport => epsilon / s.sqrt(),
        }
    }
}

/// Increment cutoff used by empirical truncation: the larger of ā and the
/// universal threshold √(2 ln p)·σ̂, σ̂ = MAD(Δy)/0.6745. Grid increments also
/// carry the drift and the Brownian part, so ā alone would flag every cell
/// once ā ≪ ε/√p.
pub fn empirical_threshold(path: &ObservationPath, a_bar: f64) -> f64 {
    let mut abs: Vec<f64> = path.values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if abs.is_empty() {
        return a_bar;
    }
    let mid = abs.len() / 2;
    let (_, med, _) = abs.select_nth_unstable_by(mid, f64::total_cmp);
    let sigma = *med / 0.674_489_750_196_081_7;
    a_bar.max(sigma * (2.0 * (path.p as f64).ln()).sqrt())
}

/// Cells (t_{i-1}, t_i] whose increment exceeds `cutoff` in absolute value.
pub fn large_increment_cells(path: &ObservationPath, cutoff: f64) -> Vec<usize> {
    path.values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1] - w[0]).abs() > cutoff)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Cells containing a recorded jump larger than ā in absolute value.
pub fn large_jump_cells(path: &ObservationPath, a_bar: f64) -> Vec<usize> {
    let mut cells: Vec<usize> = path
        .jumps
        .iter()
        .filter(|j| j.size.abs() > a_bar)
        .map(|j| j.cell(path.p))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// y̌_t = y_t − Σ_{s ≤ t} Δy_s 1{|Δy_s| > ā}.
pub fn truncate_path(path: &ObservationPath, cfg: &TruncationConfig) -> ObservationPath {
    let a = cfg.a_bar;
    match cfg.mode {
        TruncationMode::Empirical => {
            let mut incr = path.increments();
            let removed = large_increment_cells(path, empirical_threshold(path, a));
            for &c in &removed {
                incr[c - 1] = 0.0;
            }
            let jumps: Vec<Jump> = path
                .jumps
                .iter()
                .copied()
                .filter(|j| removed.binary_search(&j.cell(path.p)).is_err())
                .collect();
            ObservationPath::from_increments(path, &incr, jumps)
        }
        TruncationMode::Oracle => {
            let mut out = path.clone();
            out.jumps.clear();
            for j in &path.jumps {
                if j.size.abs() > a {
                    for v in out.values.iter_mut().skip(j.cell(path.p)) {
                        *v -= j.size;
                    }
                } else {
                    out.jumps.push(*j);
                }
            }
            out
        }
    }
}

/// Largest trigonometric index resolvable on the path's grid.
fn trig_limit(p: usize) -> usize {
    p - 1
}

/// ∫ Tr_j dy for j = 1..=max_index.
pub fn trig_integrals(path: &ObservationPath, tr: &TrigTransform, max_index: usize) -> Result<Vec<f64>> {
    tr.integrals(&path.increments(), max_index)
}

/// θ̂_j for j = 1..=n in `basis`: j = 1 from the raw path, j ≥ 2 from the
/// truncated one.
pub fn fourier_estimates(
    raw: &ObservationPath,
    truncated: &ObservationPath,
    basis: &Basis,
    n: usize,
    tr: &TrigTransform,
) -> Result<Vec<f64>> {
    raw.same_grid(truncated)?;
    let trunc = trig_integrals(truncated, tr, needed_trig_index(basis, n, truncated.p)?)?;
    fourier_estimates_from(raw, &trunc, basis, n)
}

fn needed_trig_index(basis: &Basis, n: usize, p: usize) -> Result<usize> {
    let max = basis.max_index(p);
    if n == 0 || n > max {
        return Err(MspError::Range { index: n, max });
    }
    Ok(basis.trig_indices(n).into_iter().max().unwrap_or(1))
}

pub(crate) fn fourier_estimates_from(
    raw: &ObservationPath,
    trunc_integrals: &[f64],
    basis: &Basis,
    n: usize,
) -> Result<Vec<f64>> {
    let idx = basis.trig_indices(n);
    let mut theta: Vec<f64> = idx
        .iter()
        .map(|&i| {
            trunc_integrals
                .get(i - 1)
                .copied()
                .ok_or(MspError::Range { index: i, max: trunc_integrals.len() })
        })
        .collect::<Result<_>>()?;
    theta[0] = if idx[0] == 1 {
        raw.values[raw.p] - raw.values[0]
    } else {
        stieltjes_direct(&raw.increments(), idx[0])
    };
    Ok(theta)
}

/// Number of trigonometric coefficients used by the variance estimate.
pub fn variance_sample_size(epsilon: f64, p: usize) -> usize {
    sample_size(epsilon).min(trig_limit(p))
}

/// ϰ̂ = Σ_{j=[√n]+1}^{n} τ̂_j², τ̂_j = ∫ Tr_j dy̌.
pub fn estimate_variance(truncated: &ObservationPath, tr: &TrigTransform) -> Result<f64> {
    let n = variance_sample_size(truncated.epsilon, truncated.p);
    let tau = trig_integrals(truncated, tr, n)?;
    estimate_variance_from(truncated.epsilon, &tau, n)
}

pub(crate) fn estimate_variance_from(epsilon: f64, tau: &[f64], n: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= MAX_VARIANCE_EPSILON) {
        return Err(MspError::Domain(epsilon));
    }
    let start = (n as f64).sqrt().floor() as usize + 1;
    Ok(tau[start - 1..n].iter().map(|t| t * t).sum())
}

/// d_β = (β+1)(2β+1) / (π^{2β} β).
pub fn d_beta(beta: u32) -> f64 {
    let b = beta as f64;
    (b + 1.0) * (2.0 * b + 1.0) / (std::f64::consts::PI.powi(2 * beta as i32) * b)
}

/// One weight vector of the grid, indexed by α = (β, r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWeight {
    pub beta: u32,
    pub r: f64,
    pub omega: f64,
    pub j_star: usize,
}

impl GridWeight {
    pub fn weight(&self, j: usize) -> f64 {
        let jf = j as f64;
        if jf > self.omega || j == 0 {
            0.0
        } else if j < self.j_star {
            1.0
        } else {
            1.0 - (jf / self.omega).powi(self.beta as i32)
        }
    }

    /// Last index ≤ n that can carry positive weight.
    fn last(&self, n: usize) -> usize {
        (self.omega.floor() as usize).min(n)
    }
}

/// A candidate weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Candidate {
    Grid(GridWeight),
    Explicit(Vec<f64>),
}

impl Candidate {
    pub fn weight(&self, j: usize) -> f64 {
        match self {
            Candidate::Grid(g) => g.weight(j),
            Candidate::Explicit(v) => {
                if j == 0 {
                    0.0
                } else {
                    v.get(j - 1).copied().unwrap_or(0.0)
                }
            }
        }
    }

    pub fn to_vec(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|j| self.weight(j)).collect()
    }

    /// #{j ≤ n : λ_j > 0}
    pub fn support(&self, n: usize) -> usize {
        match self {
            Candidate::Grid(g) => (1..=g.last(n)).filter(|&j| g.weight(j) > 0.0).count(),
            Candidate::Explicit(v) => v.iter().take(n).filter(|w| **w > 0.0).count(),
        }
    }

    pub fn alpha(&self) -> Option<(u32, f64)> {
        match self {
            Candidate::Grid(g) => Some((g.beta, g.r)),
            Candidate::Explicit(_) => None,
        }
    }
}

/// The finite set Λ of candidate weights over coordinates 1..=n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    pub candidates: Vec<Candidate>,
    pub n: usize,
    pub lambda_star: usize,
    pub k_star: usize,
    pub varpi: f64,
    pub m: usize,
    pub upsilon: f64,
}

impl WeightFamily {
    pub fn iota(&self) -> usize {
        self.candidates.len()
    }

    /// Family of arbitrary weight vectors of length n.
    pub fn from_vectors(vectors: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(MspError::config("empty weight family"));
        }
        for v in &vectors {
            if v.len() != n {
                return Err(MspError::GridMismatch { expected: n, actual: v.len() });
            }
            if v.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(MspError::config("weights must lie in [0, 1]"));
            }
        }
        let candidates: Vec<Candidate> = vectors.into_iter().map(Candidate::Explicit).collect();
        let lambda_star = candidates.iter().map(|c| c.support(n)).max().unwrap_or(0);
        Ok(WeightFamily { candidates, n, lambda_star, k_star: 0, varpi: 0.0, m: 0, upsilon: 0.0 })
    }

    /// Projection weights λ_d = 1{j ≤ d} for d = 1..=iota.
    pub fn projections(iota: usize, n: usize) -> Result<Self> {
        if iota == 0 || iota > n {
            return Err(MspError::Range { index: iota, max: n });
        }
        Self::from_vectors((1..=iota).map(|d| (1..=n).map(|j| if j <= d { 1.0 } else { 0.0 }).collect()).collect(), n)
    }
}

/// Parameters of the (β, r) grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub epsilon: f64,
    pub sigma_star: f64,
    pub k_star: usize,
    pub varpi: f64,
    /// Number of radii; `None` means m = [1/ϖ].
    pub m: Option<usize>,
    /// Estimator length (n = [1/ε²], possibly capped by the grid).
    pub n: usize,
}

pub fn build_weight_grid(params: &GridParams) -> Result<WeightFamily> {
    let GridParams { epsilon, sigma_star, k_star, varpi, m, n } = *params;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MspError::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if k_star == 0 || !(varpi > 0.0 && varpi < 1.0) || !(sigma_star > 0.0) || n == 0 {
        return Err(MspError::config(format!(
            "invalid grid: k*={k_star}, varpi={varpi}, sigma*={sigma_star}, n={n}"
        )));
    }
    let m = m.unwrap_or_else(|| (1.0 / varpi + 1e-9).floor() as usize);
    if m == 0 {
        return Err(MspError::config("empty radius grid"));
    }
    let log_eps = epsilon.ln().abs();
    let upsilon = 1.0 / (epsilon * epsilon * sigma_star);
    let mut candidates = Vec::with_capacity(k_star * m);
    for beta in 1..=k_star as u32 {
        let d = d_beta(beta);
        for i in 1..=m {
            let r = i as f64 * varpi;
            let omega = (d * r * upsilon).powf(1.0 / (2.0 * beta as f64 + 1.0));
            let j_star = (omega / log_eps).floor() as usize;
            candidates.push(Candidate::Grid(GridWeight { beta, r, omega, j_star }));
        }
    }
    let lambda_star = candidates.iter().map(|c| c.support(n)).max().unwrap_or(0);
    if lambda_star == 0 {
        return Err(MspError::config("weight grid has empty support"));
    }
    Ok(WeightFamily { candidates, n, lambda_star, k_star, varpi, m, upsilon })
}

/// ε² κ |λ|².
pub fn penalty(lambda: &[f64], kappa: f64, epsilon: f64) -> f64 {
    epsilon * epsilon * kappa * lambda.iter().map(|l| l * l).sum::<f64>()
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0 / 6.0) {
        return Err(MspError::DeltaRange(delta));
    }
    Ok(())
}

/// J(λ) = Σ λ² θ̂² − 2 Σ λ θ̃ + δ P̂(λ), θ̃_j = θ̂_j² − ε² ϰ̂.
pub fn cost_function(lambda: &[f64], theta_hat: &[f64], kappa_hat: f64, epsilon: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if lambda.len() != theta_hat.len() {
        return Err(MspError::GridMismatch { expected: theta_hat.len(), actual: lambda.len() });
    }
    let e2k = epsilon * epsilon * kappa_hat;
    let mut quad = 0.0;
    let mut cross = 0.0;
    for (l, t) in lambda.iter().zip(theta_hat) {
        quad += l * l * t * t;
        cross += l * (t * t - e2k);
    }
    Ok(quad - 2.0 * cross + delta * penalty(lambda, kappa_hat, epsilon))
}

/// Cost evaluator sharing prefix sums across candidates.
struct CostTable {
    /// per-coordinate contribution of weight 1: θ̂² − 2θ̃ + δε²ϰ̂
    unit_prefix: Vec<f64>,
    sq: Vec<f64>,
    tilde: Vec<f64>,
    pen: f64,
}

impl CostTable {
    fn new(theta_hat: &[f64], kappa_hat: f64, epsilon: f64, delta: f64) -> Self {
        let e2k = epsilon * epsilon * kappa_hat;
        let pen = delta * e2k;
        let sq: Vec<f64> = theta_hat.iter().map(|t| t * t).collect();
        let tilde: Vec<f64> = sq.iter().map(|s| s - e2k).collect();
        let mut unit_prefix = Vec::with_capacity(sq.len() + 1);
        let mut acc = 0.0;
        unit_prefix.push(0.0);
        for (s, t) in sq.iter().zip(&tilde) {
            acc += s - 2.0 * t + pen;
            unit_prefix.push(acc);
        }
        CostTable { unit_prefix, sq, tilde, pen }
    }

    fn term(&self, j: usize, l: f64) -> f64 {
        l * l * (self.sq[j - 1] + self.pen) - 2.0 * l * self.tilde[j - 1]
    }

    fn cost(&self, c: &Candidate) -> f64 {
        let n = self.sq.len();
        match c {
            Candidate::Grid(g) => {
                let last = g.last(n);
                let ones = g.j_star.saturating_sub(1).min(last);
                let mut acc = self.unit_prefix[ones];
                for j in ones + 1..=last {
                    acc += self.term(j, g.weight(j));
                }
                acc
            }
            Candidate::Explicit(v) => (1..=n).map(|j| self.term(j, v[j - 1])).sum(),
        }
    }
}

/// Costs J(λ) for every candidate of the family, in grid order.
pub fn family_costs(
    family: &WeightFamily,
    theta_hat: &[f64],
    kappa_hat: f64,
    epsilon: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    check_delta(delta)?;
    if theta_hat.len() != family.n {
        return Err(MspError::GridMismatch { expected: family.n, actual: theta_hat.len() });
    }
    let table = CostTable::new(theta_hat, kappa_hat, epsilon, delta);
    Ok(family.candidates.iter().map(|c| table.cost(c)).collect())
}

/// Index of the smallest value, first one on ties.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub theta_hat: Vec<f64>,
    pub kappa_hat: f64,
    pub costs: Vec<f64>,
    pub chosen: usize,
    pub chosen_alpha: Option<(u32, f64)>,
    pub lambda_hat: Vec<f64>,
    /// Ŝ_* at t_i = i/p, i = 0..=p.
    pub s_hat: Vec<f64>,
    pub delta: f64,
    pub a_bar: f64,
}

impl SelectionResult {
    pub fn min_cost(&self) -> f64 {
        self.costs[self.chosen]
    }

    /// Coefficients λ̂_j θ̂_j of Ŝ_* in the estimator basis.
    pub fn weighted_coefficients(&self) -> Vec<f64> {
        self.lambda_hat.iter().zip(&self.theta_hat).map(|(l, t)| l * t).collect()
    }
}

/// Σ_j c_j φ_j on the grid of `tr`.
pub fn reconstruct(coeffs: &[f64], basis: &Basis, tr: &TrigTransform) -> Result<Vec<f64>> {
    let idx = basis.trig_indices(coeffs.len());
    let top = idx.iter().copied().max().unwrap_or(1);
    let mut trig = vec![0.0; top];
    for (c, i) in coeffs.iter().zip(&idx) {
        trig[i - 1] += c;
    }
    tr.synthesize(&trig)
}

/// λ̂ = argmin_Λ J(λ) and Ŝ_* = Σ λ̂_j θ̂_j φ_j.
#[allow(clippy::too_many_arguments)]
pub fn select_model(
    family: &WeightFamily,
    theta_hat: &[f64],
    kappa_hat: f64,
    epsilon: f64,
    delta: f64,
    a_bar: f64,
    basis: &Basis,
    tr: &TrigTransform,
) -> Result<SelectionResult> {
    let costs = family_costs(family, theta_hat, kappa_hat, epsilon, delta)?;
    let chosen = argmin_first(&costs);
    let cand = &family.candidates[chosen];
    let lambda_hat = cand.to_vec(family.n);
    let weighted: Vec<f64> = lambda_hat.iter().zip(theta_hat).map(|(l, t)| l * t).collect();
    let s_hat = reconstruct(&weighted, basis, tr)?;
    Ok(SelectionResult {
        theta_hat: theta_hat.to_vec(),
        kappa_hat,
        costs,
        chosen,
        chosen_alpha: cand.alpha(),
        lambda_hat,
        s_hat,
        delta,
        a_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::trig_eval;
    use crate::noise_sim::{make_noise_model, simulate_path, JumpLaw, NoiseModel, SignalSpec, SizeDist};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(eps: f64, n: usize) -> WeightFamily {
        let le = eps.ln().abs();
        build_weight_grid(&GridParams {
            epsilon: eps,
            sigma_star: 1.0,
            k_star: (100.0 + le.sqrt()).floor() as usize,
            varpi: 1.0 / le,
            m: Some((le * le).floor() as usize),
            n,
        })
        .unwrap()
    }

    fn flat_path(p: usize, eps: f64) -> ObservationPath {
        ObservationPath { p, epsilon: eps, values: vec![0.0; p + 1], jumps: vec![], seed: 0 }
    }

    #[test]
    fn sample_size_is_exact_for_reciprocal_square_roots() {
        for k in [3usize, 20, 100, 200, 1000] {
            assert_eq!(sample_size(1.0 / (k as f64).sqrt()), k);
        }
        assert_eq!(sample_size(0.1), 100);
    }

    #[test]
    fn truncation_leaves_small_increments() {
        let p = 1000;
        let path = simulate_path(&SignalSpec::zero(), &NoiseModel::brownian(), 0.1, p, 4).unwrap();
        let cfg = TruncationConfig::new(1.0, TruncationMode::Empirical).unwrap();
        assert_eq!(truncate_path(&path, &cfg), path);
        assert!(TruncationConfig::new(0.0, TruncationMode::Oracle).is_err());
    }

    #[test]
    fn empirical_truncation_keeps_drift() {
        let p = 4096;
        let s = SignalSpec::trig(vec![(2, 0.5), (3, -0.25)]).unwrap();
        let path = simulate_path(&s, &NoiseModel::brownian(), 1e-10, p, 1).unwrap();
        let cfg = TruncationConfig::new(1e-14, TruncationMode::Empirical).unwrap();
        let cut = empirical_threshold(&path, cfg.a_bar());
        assert!(large_increment_cells(&path, cut).is_empty(), "cutoff {cut}");
        let out = truncate_path(&path, &cfg);
        assert!(out.values.iter().zip(&path.values).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn oracle_truncation_removes_single_jump() {
        let p = 200;
        let a = 0.1;
        let mut path = flat_path(p, 0.1);
        path.jumps.push(Jump { time: 0.5, size: 2.0 * a });
        for i in 100..=p {
            path.values[i] += 2.0 * a;
        }
        let out = truncate_path(&path, &TruncationConfig::new(a, TruncationMode::Oracle).unwrap());
        assert!(out.values.iter().all(|v| v.abs() < 1e-15));
        assert!(out.jumps.is_empty());
        let emp = truncate_path(&path, &TruncationConfig::new(a, TruncationMode::Empirical).unwrap());
        assert!(emp.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn noiseless_fourier_estimates() {
        let p = 100_000;
        let s = SignalSpec::trig(vec![(5, 1.0)]).unwrap();
        let path = simulate_path(&s, &NoiseModel::brownian(), 1e-12, p, 1).unwrap();
        let tr = TrigTransform::new(p);
        let th = fourier_estimates(&path, &path, &Basis::Trigonometric, 50, &tr).unwrap();
        assert_abs_diff_eq!(th[4], 1.0, epsilon = 1e-6);
        for (j, t) in th.iter().enumerate() {
            if j != 4 {
                assert!(t.abs() < 1e-6, "theta_{} = {}", j + 1, t);
            }
        }
    }

    #[test]
    fn fourier_estimates_grid_checks() {
        let tr = TrigTransform::new(100);
        let a = flat_path(100, 0.1);
        let b = flat_path(200, 0.1);
        assert!(matches!(
            fourier_estimates(&a, &b, &Basis::Trigonometric, 10, &tr),
            Err(MspError::GridMismatch { .. })
        ));
        assert!(fourier_estimates(&a, &a, &Basis::Trigonometric, 100, &tr).is_err());
    }

    #[test]
    fn first_coefficient_uses_raw_path() {
        let p = 500;
        let mut raw = flat_path(p, 0.1);
        for i in 250..=p {
            raw.values[i] = 3.0;
        }
        let trunc = flat_path(p, 0.1);
        let tr = TrigTransform::new(p);
        let th = fourier_estimates(&raw, &trunc, &Basis::Trigonometric, 4, &tr).unwrap();
        assert_eq!(th[0], 3.0);
        assert_eq!(&th[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn scaled_sine_estimates_match_projection() {
        // single replication, multipath signal: θ̂ within 3ε√ϰ̌ of j/(j+1)
        let p = 10_000;
        let eps = 0.01;
        let s = SignalSpec::multipath_test_signal();
        let path = simulate_path(&s, &NoiseModel::brownian(), eps, p, 21).unwrap();
        let tr = TrigTransform::new(p);
        let th = fourier_estimates(&path, &path, &Basis::ScaledSine, 10, &tr).unwrap();
        let f = s.values_on_grid(p).unwrap();
        for j in 1..=10 {
            let oracle = crate::basis::project_basis(&f, &Basis::ScaledSine, j, p).unwrap();
            assert_abs_diff_eq!(oracle, j as f64 / (j as f64 + 1.0), epsilon = 1e-9);
            assert!((th[j - 1] - oracle).abs() < 3.0 * eps, "j={} {} vs {}", j, th[j - 1], oracle);
        }
    }

    #[test]
    fn variance_estimate_domain() {
        let path = flat_path(1000, 0.6);
        let tr = TrigTransform::new(1000);
        assert!(matches!(estimate_variance(&path, &tr), Err(MspError::Domain(_))));
    }

    #[test]
    fn variance_estimate_of_low_frequency_signal_vanishes() {
        let p = 10_000;
        let s = SignalSpec::trig(vec![(3, 0.7)]).unwrap();
        let path = simulate_path(&s, &NoiseModel::brownian(), 1e-12, p, 2).unwrap();
        let tr = TrigTransform::new(p);
        assert!(estimate_variance(&path, &tr).unwrap() < 1e-10);
    }

    #[test]
    fn variance_estimate_mean() {
        let p = 2000;
        let eps = 0.05;
        let tr = TrigTransform::new(p);
        let reps = 1000;
        let mean: f64 = (0..reps)
            .map(|s| {
                let path = simulate_path(&SignalSpec::zero(), &NoiseModel::brownian(), eps, p, s).unwrap();
                estimate_variance(&path, &tr).unwrap()
            })
            .sum::<f64>()
            / reps as f64;
        // E ϰ̂ = ε² ϰ̌ (n − [√n]) = 0.95
        assert!((mean - 1.0).abs() < 0.1);
        assert!((mean - 0.95).abs() < 0.01);
    }

    #[test]
    fn d_beta_example() {
        assert_abs_diff_eq!(d_beta(1), 6.0 / (PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn grid_basic_quantities() {
        let g = grid(0.1, sample_size(0.1));
        assert_eq!(g.n, 100);
        assert_abs_diff_eq!(g.upsilon, 100.0, epsilon = 1e-9);
        assert_eq!(g.iota(), g.k_star * g.m);
        assert!(g.lambda_star >= 1);
        let default_m = build_weight_grid(&GridParams {
            epsilon: 0.1,
            sigma_star: 1.0,
            k_star: 3,
            varpi: 0.25,
            m: None,
            n: 100,
        })
        .unwrap();
        assert_eq!(default_m.m, 4);
        assert_eq!(default_m.iota(), 12);
    }

    #[test]
    fn grid_rejects_bad_config() {
        let mut gp = GridParams { epsilon: 0.1, sigma_star: 1.0, k_star: 0, varpi: 0.5, m: None, n: 10 };
        assert!(build_weight_grid(&gp).is_err());
        gp.k_star = 2;
        gp.varpi = 1.5;
        assert!(build_weight_grid(&gp).is_err());
        // υ tiny: every ω < 1, nothing survives
        gp.varpi = 0.5;
        gp.sigma_star = 1e6;
        assert!(matches!(build_weight_grid(&gp), Err(MspError::Config(_))));
    }

    #[test]
    fn grid_weight_structure() {
        let g = grid(0.001, 1000);
        for c in &g.candidates {
            let Candidate::Grid(w) = c else { unreachable!() };
            let v = c.to_vec(g.n);
            for j in 1..w.j_star.min(g.n + 1) {
                if (j as f64) <= w.omega {
                    assert_eq!(v[j - 1], 1.0);
                }
            }
            let cut = w.omega.ceil() as usize + 1;
            if cut <= g.n {
                assert_eq!(v[cut - 1], 0.0);
            }
            assert!(v.windows(2).all(|x| x[1] <= x[0]));
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(&[0.0; 10], 3.0, 0.1), 0.0);
        let mut ind = vec![0.0; 20];
        ind[..7].iter_mut().for_each(|x| *x = 1.0);
        assert_abs_diff_eq!(penalty(&ind, 0.8, 0.1), 0.01 * 0.8 * 7.0, epsilon = 1e-15);

        let g = grid(0.1, 100);
        let Candidate::Grid(w) = g.candidates[0] else { unreachable!() };
        let mut direct = 0.0;
        for j in 1..=100usize {
            let jf = j as f64;
            let l = if jf > w.omega {
                0.0
            } else if j < w.j_star {
                1.0
            } else {
                1.0 - (jf / w.omega).powi(w.beta as i32)
            };
            direct += l * l;
        }
        assert_abs_diff_eq!(penalty(&g.candidates[0].to_vec(100), 1.0, 0.1), 0.01 * direct, epsilon = 1e-15);
    }

    #[test]
    fn cost_examples() {
        let th = vec![0.9, -0.4, 0.2, 0.05];
        let (eps, kh, delta) = (0.1, 1.3, 0.1);
        assert_eq!(cost_function(&[0.0; 4], &th, kh, eps, delta).unwrap(), 0.0);
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let want = -th[j] * th[j] + 2.0 * eps * eps * kh + delta * eps * eps * kh;
            assert_abs_diff_eq!(cost_function(&e, &th, kh, eps, delta).unwrap(), want, epsilon = 1e-15);
        }
        assert!(matches!(cost_function(&[0.0; 4], &th, kh, eps, 0.2), Err(MspError::DeltaRange(_))));
        assert!(matches!(cost_function(&[0.0; 4], &th, kh, eps, 0.0), Err(MspError::DeltaRange(_))));
    }

    #[test]
    fn noiseless_cost_minimized_at_unit_weights() {
        let th = vec![0.5, -1.0, 0.25];
        let ones = cost_function(&[1.0; 3], &th, 0.0, 0.1, 0.1).unwrap();
        for a in 0..=10 {
            for b in 0..=10 {
                let l = [a as f64 / 10.0, b as f64 / 10.0, 0.3];
                assert!(cost_function(&l, &th, 0.0, 0.1, 0.1).unwrap() >= ones - 1e-15);
            }
        }
    }

    #[test]
    fn cost_decomposition() {
        // J(λ) + 2Σλθ̂θ − Σλ²θ̂² = 2Σλ(θ̂θ − θ̃) + δP̂(λ)
        let th_hat = vec![0.7, 0.1, -0.3, 0.05];
        let th = vec![0.65, 0.0, -0.25, 0.0];
        let lam = vec![1.0, 0.8, 0.5, 0.1];
        let (eps, kh, delta) = (0.2, 0.9, 0.12);
        let j = cost_function(&lam, &th_hat, kh, eps, delta).unwrap();
        let cross: f64 = lam.iter().zip(&th_hat).zip(&th).map(|((l, a), b)| l * a * b).sum();
        let quad: f64 = lam.iter().zip(&th_hat).map(|(l, a)| l * l * a * a).sum();
        let tilde: f64 = lam.iter().zip(&th_hat).map(|(l, a)| l * (a * a - eps * eps * kh)).sum();
        let lhs = j + 2.0 * cross - quad;
        let rhs = 2.0 * (cross - tilde) + delta * penalty(&lam, kh, eps);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn fast_costs_match_direct_evaluation() {
        let g = grid(1.0 / 200f64.sqrt(), 200);
        let th: Vec<f64> = (1..=200).map(|j| ((j * 7919) % 13) as f64 / 40.0 - 0.15).collect();
        let costs = family_costs(&g, &th, 0.9, 1.0 / 200f64.sqrt(), 0.05).unwrap();
        for (c, cand) in costs.iter().zip(&g.candidates) {
            let direct = cost_function(&cand.to_vec(200), &th, 0.9, 1.0 / 200f64.sqrt(), 0.05).unwrap();
            assert_abs_diff_eq!(*c, direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_point_argmin() {
        let n = 4;
        let th = vec![1.0, 1.0, 0.0, 0.0];
        let fam = WeightFamily::from_vectors(vec![vec![0.0, 0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0, 0.0]], n).unwrap();
        let tr = TrigTransform::new(100);
        let res = select_model(&fam, &th, 1.0, 0.1, 0.1, 0.1, &Basis::Trigonometric, &tr).unwrap();
        assert_eq!(res.chosen, 1);
        assert_eq!(res.min_cost(), res.costs.iter().cloned().fold(f64::INFINITY, f64::min));

        // ties resolve to the first candidate
        let fam = WeightFamily::from_vectors(vec![vec![1.0, 0.0, 0.0, 0.0]; 3], n).unwrap();
        let res = select_model(&fam, &th, 1.0, 0.1, 0.1, 0.1, &Basis::Trigonometric, &tr).unwrap();
        assert_eq!(res.chosen, 0);
    }

    #[test]
    fn noiseless_selection_matches_exhaustive_oracle() {
        let eps = 1.0 / 1000f64.sqrt();
        let g = grid(eps, 1000);
        let theta: Vec<f64> = (1..=1000).map(|j| if j <= 12 { 1.0 / j as f64 } else { 0.0 }).collect();
        let tr = TrigTransform::new(4096);
        let res = select_model(&g, &theta, 0.0, eps, 0.05, 0.01, &Basis::Trigonometric, &tr).unwrap();
        let quad = |c: &Candidate| -> f64 {
            (1..=1000).map(|j| (1.0 - c.weight(j)).powi(2) * theta[j - 1] * theta[j - 1]).sum()
        };
        let best = g.candidates.iter().map(quad).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(quad(&g.candidates[res.chosen]), best, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_matches_pointwise_sum() {
        let p = 2048;
        let tr = TrigTransform::new(p);
        let g = grid(0.05, 400);
        let th: Vec<f64> = (1..=400).map(|j| 1.0 / (j * j) as f64).collect();
        let res = select_model(&g, &th, 1.0, 0.05, 0.1, 0.01, &Basis::Trigonometric, &tr).unwrap();
        for (i, v) in res.s_hat.iter().enumerate() {
            let t = i as f64 / p as f64;
            let want: f64 = (1..=400).map(|j| res.lambda_hat[j - 1] * th[j - 1] * trig_eval(j, t)).sum();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn jump_truncation_modes_agree_on_separated_jumps() {
        let eps = 0.1;
        let p = 100_000;
        let law = JumpLaw::normalized(SizeDist::Gaussian { std: 1.0 }).unwrap();
        let noise = make_noise_model(0.6, 0.8, Some(law), 1.0).unwrap();
        let a_bar = eps / 8.0;
        let (mut eligible, mut agree) = (0, 0);
        for seed in 0..200 {
            let path = simulate_path(&SignalSpec::zero(), &noise, eps, p, seed).unwrap();
            let big_jumps = path.jumps.iter().all(|j| j.size.abs() > 2.0 * a_bar);
            let small_bm = eps * 0.6 / (p as f64).sqrt() * 6.0 < a_bar / 2.0;
            if !(big_jumps && small_bm) {
                continue;
            }
            eligible += 1;
            if large_increment_cells(&path, empirical_threshold(&path, a_bar)) == large_jump_cells(&path, a_bar) {
                agree += 1;
            }
        }
        assert!(eligible > 50);
        assert!(agree as f64 >= 0.99 * eligible as f64);
    }

    proptest! {
        #[test]
        fn argmin_invariant_under_positive_scaling(
            costs in proptest::collection::vec(-10.0f64..10.0, 1..40),
            scale in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = costs.iter().map(|c| c * scale).collect();
            prop_assert_eq!(argmin_first(&costs), argmin_first(&scaled));
        }
    }
}
