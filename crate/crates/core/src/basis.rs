//! Orthonormal bases on [0, 1], grid projections and Sobolev ellipsoid weights.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};

/// Uniform bound of the trigonometric basis.
pub const TRIG_PHI_STAR: f64 = SQRT_2;

/// Frequency `[j/2]` of the j-th trigonometric function.
#[inline]
pub fn trig_frequency(j: usize) -> usize {
    j / 2
}

/// j-th trigonometric basis function: 1, then √2 cos / √2 sin pairs.
pub fn trig_eval(j: usize, t: f64) -> f64 {
    assert!(j >= 1, "trigonometric index starts at 1");
    if j == 1 {
        return 1.0;
    }
    let arg = 2.0 * PI * trig_frequency(j) as f64 * t;
    if j % 2 == 0 {
        SQRT_2 * arg.cos()
    } else {
        SQRT_2 * arg.sin()
    }
}

/// ∫₀ᵗ Tr_j(s) ds in closed form.
pub fn trig_antiderivative(j: usize, t: f64) -> f64 {
    assert!(j >= 1, "trigonometric index starts at 1");
    if j == 1 {
        return t;
    }
    let w = 2.0 * PI * trig_frequency(j) as f64;
    if j % 2 == 0 {
        SQRT_2 * (w * t).sin() / w
    } else {
        SQRT_2 * (1.0 - (w * t).cos()) / w
    }
}

/// An orthonormal family used by the estimator.
///
/// Every family shipped here is a sub-family of the trigonometric basis, so
/// stochastic integrals against it are read off one grid transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// Tr_1 ≡ 1, Tr_{2k} = √2 cos(2πkt), Tr_{2k+1} = √2 sin(2πkt).
    Trigonometric,
    /// φ_j = √2 sin(2π l_j t) with l_j = [√j]·j.
    ScaledSine,
    /// φ_j = √2 sin(2π l_j t) for an explicit list of distinct frequencies.
    Sine { frequencies: Vec<usize> },
}

impl Basis {
    pub fn explicit_sine(frequencies: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &l in &frequencies {
            if l == 0 || !seen.insert(l) {
                return Err(MspError::config("sine frequencies must be positive and distinct"));
            }
        }
        Ok(Basis::Sine { frequencies })
    }

    /// Index in the trigonometric basis of the j-th function of this family.
    pub fn trig_index(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return None;
        }
        match self {
            Basis::Trigonometric => Some(j),
            Basis::ScaledSine => Some(2 * scaled_frequency(j) + 1),
            Basis::Sine { frequencies } => frequencies.get(j - 1).map(|l| 2 * l + 1),
        }
    }

    pub fn eval(&self, j: usize, t: f64) -> f64 {
        let idx = self.trig_index(j).expect("basis index out of range");
        trig_eval(idx, t)
    }

    pub fn phi_star(&self) -> f64 {
        TRIG_PHI_STAR
    }

    /// Largest j whose function is represented on a p-step grid without
    /// aliasing (trigonometric frequency strictly below p/2).
    pub fn max_index(&self, p: usize) -> usize {
        let fits = |idx: usize| 2 * trig_frequency(idx) < p;
        match self {
            Basis::Trigonometric => p.saturating_sub(1),
            Basis::ScaledSine => {
                let mut j = 0;
                while fits(2 * scaled_frequency(j + 1) + 1) {
                    j += 1;
                }
                j
            }
            Basis::Sine { frequencies } => frequencies
                .iter()
                .take_while(|&&l| fits(2 * l + 1))
                .count(),
        }
    }

    /// Trigonometric indices of the first `n` functions.
    pub fn trig_indices(&self, n: usize) -> Vec<usize> {
        (1..=n)
            .map(|j| self.trig_index(j).expect("basis index out of range"))
            .collect()
    }

    /// Coordinates in this family of a signal given by trigonometric terms.
    pub fn coefficients_of(&self, terms: &[(usize, f64)], n: usize) -> Vec<f64> {
        let idx = self.trig_indices(n);
        idx.iter()
            .map(|&i| terms.iter().filter(|(k, _)| *k == i).map(|(_, c)| c).sum())
            .collect()
    }
}

/// `[√j]·j`.
pub fn scaled_frequency(j: usize) -> usize {
    (j as f64).sqrt().floor() as usize * j
}

/// Trapezoid approximation of ∫₀¹ f φ_j dt for `f` sampled at t_i = i/p.
pub fn project(f: &[f64], j: usize, p: usize) -> Result<f64> {
    project_basis(f, &Basis::Trigonometric, j, p)
}

pub fn project_basis(f: &[f64], basis: &Basis, j: usize, p: usize) -> Result<f64> {
    if f.len() != p + 1 {
        return Err(MspError::GridMismatch { expected: p + 1, actual: f.len() });
    }
    let h = 1.0 / p as f64;
    let mut acc = 0.0;
    for (i, &v) in f.iter().enumerate() {
        let w = if i == 0 || i == p { 0.5 } else { 1.0 };
        acc += w * v * basis.eval(j, i as f64 * h);
    }
    Ok(acc * h)
}

/// Sobolev ellipsoid weight a_j = Σ_{i=0}^k (2π[j/2])^{2i}, with 0⁰ = 1.
pub fn sobolev_coeff(j: usize, k: u32) -> f64 {
    let w2 = (2.0 * PI * trig_frequency(j) as f64).powi(2);
    let mut term = 1.0;
    let mut acc = 0.0;
    for _ in 0..=k {
        acc += term;
        term *= w2;
    }
    acc
}

/// Σ_j a_j θ_j² for trigonometric coordinates θ_1, θ_2, …
pub fn sobolev_radius(theta: &[f64], k: u32) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(i, t)| sobolev_coeff(i + 1, k) * t * t)
        .sum()
}

/// Grid transform for a fixed p: stochastic integrals of every trigonometric
/// function against grid increments, and synthesis back onto the grid.
///
/// Integrals use the cell midpoint (t_{i-1} + t_i)/2 as evaluation point.
#[derive(Clone)]
pub struct TrigTransform {
    p: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TrigTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrigTransform").field("p", &self.p).finish()
    }
}

impl TrigTransform {
    pub fn new(p: usize) -> Self {
        let mut planner = FftPlanner::new();
        TrigTransform {
            p,
            forward: planner.plan_fft_forward(p),
            inverse: planner.plan_fft_inverse(p),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// ∫ Tr_j dy for j = 1..=max_index, from the p grid increments of y.
    pub fn integrals(&self, increments: &[f64], max_index: usize) -> Result<Vec<f64>> {
        let p = self.p;
        if increments.len() != p {
            return Err(MspError::GridMismatch { expected: p, actual: increments.len() });
        }
        if max_index >= p {
            return Err(MspError::Range { index: max_index, max: p - 1 });
        }
        let mut buf: Vec<Complex64> = increments.iter().map(|&d| Complex64::new(d, 0.0)).collect();
        self.forward.process(&mut buf);
        let mut out = Vec::with_capacity(max_index);
        for j in 1..=max_index {
            let k = trig_frequency(j);
            if j == 1 {
                out.push(buf[0].re);
                continue;
            }
            let phase = Complex64::from_polar(1.0, -PI * k as f64 / p as f64);
            let g = buf[k] * phase;
            if j % 2 == 0 {
                out.push(SQRT_2 * g.re);
            } else {
                out.push(-SQRT_2 * g.im);
            }
        }
        Ok(out)
    }

    /// Values of Σ_j c_j Tr_j at t_i = i/p, i = 0..=p.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let p = self.p;
        if coeffs.len() >= p {
            return Err(MspError::Range { index: coeffs.len(), max: p - 1 });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        for (i, &c) in coeffs.iter().enumerate() {
            let j = i + 1;
            let k = trig_frequency(j);
            if j == 1 {
                buf[0].re += c;
            } else if j % 2 == 0 {
                buf[k].re += SQRT_2 * c;
            } else {
                buf[k].im -= SQRT_2 * c;
            }
        }
        self.inverse.process(&mut buf);
        let mut vals: Vec<f64> = buf.iter().map(|z| z.re).collect();
        vals.push(vals[0]);
        Ok(vals)
    }
}

/// Midpoint Stieltjes sum Σ_i φ(t_{i-1/2}) Δy_i evaluated term by term.
pub fn stieltjes_direct(increments: &[f64], j: usize) -> f64 {
    let p = increments.len() as f64;
    increments
        .iter()
        .enumerate()
        .map(|(i, d)| trig_eval(j, (i as f64 + 0.5) / p) * d)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample<F: Fn(f64) -> f64>(f: F, p: usize) -> Vec<f64> {
        (0..=p).map(|i| f(i as f64 / p as f64)).collect()
    }

    #[test]
    fn trig_eval_examples() {
        assert_eq!(trig_eval(1, 0.37), 1.0);
        assert_abs_diff_eq!(trig_eval(2, 0.0), SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(trig_eval(3, 0.25), SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        for j in [1, 2, 3, 8, 17] {
            for t in [0.1, 0.5, 0.93] {
                let m = 200_000;
                let h = t / m as f64;
                let q: f64 = (0..m).map(|i| trig_eval(j, (i as f64 + 0.5) * h) * h).sum();
                assert_abs_diff_eq!(trig_antiderivative(j, t), q, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn project_examples() {
        let p = 100_000;
        let f = sample(|t| trig_eval(5, t), p);
        assert_abs_diff_eq!(project(&f, 5, p).unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(project(&f, 7, p).unwrap(), 0.0, epsilon = 1e-8);
        let err = project(&f, 5, p + 1).unwrap_err();
        assert!(matches!(err, MspError::GridMismatch { .. }));
    }

    #[test]
    fn project_recovers_signal_term() {
        // fourth term of the ten-term test signal: (4/5) √2 sin(2π·8t) = (4/5) Tr_17
        let p = 100_000;
        let f = sample(
            |t| {
                (1..=10usize)
                    .map(|j| j as f64 / (j as f64 + 1.0) * SQRT_2 * (2.0 * PI * scaled_frequency(j) as f64 * t).sin())
                    .sum()
            },
            p,
        );
        assert_eq!(scaled_frequency(4), 8);
        assert_abs_diff_eq!(project(&f, 17, p).unwrap(), 0.8, epsilon = 1e-6);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let p = 100_000;
        let cols: Vec<Vec<f64>> = (1..=100).map(|j| sample(|t| trig_eval(j, t), p)).collect();
        for i in 0..100 {
            for j in i..100 {
                let ip = project(&cols[i], j + 1, p).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-6, "({}, {}) -> {}", i + 1, j + 1, ip);
            }
        }
    }

    #[test]
    fn uniform_bound() {
        let p = 10_000;
        for j in 1..=100 {
            for i in 0..=p {
                assert!(trig_eval(j, i as f64 / p as f64).abs() <= TRIG_PHI_STAR + 1e-12);
            }
        }
    }

    #[test]
    fn sobolev_coeff_examples() {
        assert_eq!(sobolev_coeff(1, 1), 1.0);
        assert_abs_diff_eq!(sobolev_coeff(2, 1), 1.0 + 4.0 * PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(
            sobolev_coeff(3, 2),
            1.0 + 4.0 * PI * PI + 16.0 * PI.powi(4),
            epsilon = 1e-9
        );
    }

    #[test]
    fn sobolev_radius_examples() {
        assert_eq!(sobolev_radius(&[0.0; 12], 3), 0.0);
        assert_abs_diff_eq!(sobolev_radius(&[1.7, 0.0, 0.0], 1), 1.7 * 1.7, epsilon = 1e-15);

        // ten-term test signal, by direct summation over its terms
        let mut theta = vec![0.0; 61];
        let mut direct = 0.0;
        for j in 1..=10usize {
            let l = scaled_frequency(j) as f64;
            let c = j as f64 / (j as f64 + 1.0);
            theta[2 * scaled_frequency(j)] = c;
            direct += c * c * (1.0 + 4.0 * PI * PI * l * l);
        }
        assert_abs_diff_eq!(sobolev_radius(&theta, 1), direct, epsilon = 1e-9 * direct);
    }

    #[test]
    fn scaled_sine_family() {
        let b = Basis::ScaledSine;
        let l: Vec<usize> = (1..=10).map(scaled_frequency).collect();
        assert_eq!(l, vec![1, 2, 3, 8, 10, 12, 14, 16, 27, 30]);
        assert_eq!(b.trig_index(1), Some(3));
        assert_eq!(b.trig_index(10), Some(61));
        let n = b.max_index(10_000);
        assert!(scaled_frequency(n) < 5000 && scaled_frequency(n + 1) >= 5000);
        assert_eq!(Basis::Trigonometric.max_index(100), 99);
        assert!(Basis::explicit_sine(vec![3, 3]).is_err());
    }

    #[test]
    fn fft_integrals_match_direct_sums() {
        let p = 256;
        let incr: Vec<f64> = (0..p).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let tr = TrigTransform::new(p);
        let fast = tr.integrals(&incr, p - 1).unwrap();
        for j in 1..p {
            assert_abs_diff_eq!(fast[j - 1], stieltjes_direct(&incr, j), epsilon = 1e-10);
        }
    }

    #[test]
    fn synthesis_matches_pointwise_evaluation() {
        let p = 512;
        let coeffs: Vec<f64> = (1..=40).map(|j| 1.0 / j as f64).collect();
        let vals = TrigTransform::new(p).synthesize(&coeffs).unwrap();
        assert_eq!(vals.len(), p + 1);
        for (i, v) in vals.iter().enumerate() {
            let t = i as f64 / p as f64;
            let want: f64 = coeffs.iter().enumerate().map(|(k, c)| c * trig_eval(k + 1, t)).sum();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn sobolev_coeff_monotone(j in 1usize..200, k in 1u32..5) {
            prop_assert!(sobolev_coeff(j + 1, k) >= sobolev_coeff(j, k));
            if j >= 2 {
                prop_assert!(sobolev_coeff(j, k + 1) >= sobolev_coeff(j, k));
            }
        }
    }
}
