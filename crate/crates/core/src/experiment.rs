//! Configuration-driven runs: risk tables, detection tables, figure data and
//! oracle checks. Every output carries the master seed and a config hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::Basis;
use crate::detection::{detect_count_lse, mode, shrinkage_signal_count, DetectionConfig};
use crate::error::{MspError, Result};
use crate::estimator::MAX_VARIANCE_EPSILON;
use crate::io::{fmt_f64, read_path, write_path, write_selection, write_toml, CsvDoc, Provenance};
use crate::noise_sim::{make_noise_model, JumpLaw, NoiseModel, SignalSpec, SizeDist, MIN_GRID};
use crate::pipeline::PipelineConfig;
use crate::risk::{monte_carlo_risk_prepared, oracle_constants, robust_risk, OracleConstants, RiskReport};
use crate::seed::split_seed;

/// ε written either as `1/sqrt(K)` or as a plain decimal.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonLabel {
    text: String,
    value: f64,
}

impl EpsilonLabel {
    pub fn inv_sqrt(k: u64) -> Self {
        format!("1/sqrt({k})").parse().expect("valid label")
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// File-name friendly form: `1/sqrt(20)` → `1_sqrt_20`.
    pub fn slug(&self) -> String {
        self.text
            .chars()
            .filter_map(|c| match c {
                '/' => Some('_'),
                '(' => Some('_'),
                ')' => None,
                c if c.is_ascii_alphanumeric() || c == '.' || c == '-' => Some(c),
                _ => Some('_'),
            })
            .collect()
    }
}

impl FromStr for EpsilonLabel {
    type Err = MspError;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim().to_string();
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let value = if let Some(k) = compact.strip_prefix("1/sqrt(").and_then(|r| r.strip_suffix(')')) {
            let k: f64 = k.parse().map_err(|_| MspError::config(format!("bad epsilon label `{s}`")))?;
            1.0 / k.sqrt()
        } else {
            compact.parse().map_err(|_| MspError::config(format!("bad epsilon label `{s}`")))?
        };
        if !(value > 0.0 && value <= MAX_VARIANCE_EPSILON) {
            return Err(MspError::config(format!("epsilon {s} outside (0, 1/sqrt(3)]")));
        }
        Ok(EpsilonLabel { text: compact, value })
    }
}

impl fmt::Display for EpsilonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for EpsilonLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for EpsilonLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalChoice {
    /// Σ_{j≤10} j/(j+1) √2 sin(2π [√j] j t)
    Multipath,
    /// Σ c Tr_j over (index, coefficient) pairs
    Trig { terms: Vec<(usize, f64)> },
}

impl SignalChoice {
    pub fn build(&self) -> Result<SignalSpec> {
        match self {
            SignalChoice::Multipath => Ok(SignalSpec::multipath_test_signal()),
            SignalChoice::Trig { terms } => SignalSpec::trig(terms.clone()),
        }
    }
}

/// ξ = ρ₁w + ρ₂z; `jumps` is the size law of z before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub rho1: f64,
    #[serde(default)]
    pub rho2: f64,
    #[serde(default)]
    pub jumps: Option<SizeDist>,
}

impl NoiseSpec {
    pub const BROWNIAN: NoiseSpec = NoiseSpec { rho1: 1.0, rho2: 0.0, jumps: None };

    pub fn build(&self, sigma_star: f64) -> Result<NoiseModel> {
        let law = self.jumps.map(JumpLaw::normalized).transpose()?;
        make_noise_model(self.rho1, self.rho2, law, sigma_star)
    }
}

/// Brownian; half-and-half with ±1 jumps; jump-dominated 0.2/0.98.
pub fn default_noise_set() -> Vec<NoiseSpec> {
    let two_point = Some(SizeDist::TwoPoint { c: 1.0, p_plus: 0.5 });
    vec![
        NoiseSpec::BROWNIAN,
        NoiseSpec { rho1: 0.5f64.sqrt(), rho2: 0.5f64.sqrt(), jumps: two_point },
        NoiseSpec { rho1: 0.2, rho2: 0.96f64.sqrt(), jumps: two_point },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilons: Vec<EpsilonLabel>,
    pub reps: usize,
    pub grid: usize,
    #[serde(with = "crate::io::seed_serde")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub signal: SignalChoice,
    pub noise: NoiseSpec,
    /// Finite surrogate of the noise family for the robust risk; empty = off.
    pub noise_set: Vec<NoiseSpec>,
    /// Basis in which the detectors read coefficients.
    pub detection_basis: Basis,
    pub pipeline: PipelineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            epsilons: [20, 100, 200, 1000].into_iter().map(EpsilonLabel::inv_sqrt).collect(),
            reps: 200,
            grid: 10_000,
            seed: 20_240_601,
            output_dir: PathBuf::from("out"),
            signal: SignalChoice::Multipath,
            noise: NoiseSpec::BROWNIAN,
            noise_set: Vec::new(),
            detection_basis: Basis::ScaledSine,
            pipeline: PipelineConfig { basis: Basis::ScaledSine, ..PipelineConfig::default() },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| MspError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(file: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(file)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(MspError::config("no epsilon values"));
        }
        if self.reps == 0 {
            return Err(MspError::config("reps must be at least 1"));
        }
        if self.grid < MIN_GRID {
            return Err(MspError::config(format!("grid must be at least {MIN_GRID}")));
        }
        self.signal.build()?;
        self.noise.build(self.pipeline.sigma_star)?;
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML form, with the
    /// output directory left out so that relocating a run keeps its bytes.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { output_dir: PathBuf::new(), ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance { seed: self.seed, config_hash: self.hash() }
    }

    pub fn epsilon(&self, label: &str) -> Result<EpsilonLabel> {
        label.parse()
    }
}

#[derive(Debug, Clone, Serialize)]
struct ProvenanceSidecar<'a> {
    #[serde(with = "crate::io::seed_serde")]
    seed: u64,
    reps: usize,
    grid: usize,
    version: &'a str,
    config_hash: String,
}

fn write_sidecar(cfg: &ExperimentConfig, file: &Path) -> Result<()> {
    write_toml(
        file,
        &ProvenanceSidecar {
            seed: cfg.seed,
            reps: cfg.reps,
            grid: cfg.grid,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
            config_hash: cfg.hash(),
        },
    )
}

#[derive(Debug, Clone)]
pub struct RiskRow {
    pub label: EpsilonLabel,
    pub report: RiskReport,
}

/// Writes `risk_table.csv` (epsilon_label, R_bar, R_bar_rel) and its sidecar;
/// with a non-empty noise set also `robust_risk.csv`.
pub fn run_risk_table(cfg: &ExperimentConfig) -> Result<Vec<RiskRow>> {
    cfg.validate()?;
    let signal = cfg.signal.build()?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let prov = cfg.provenance();
    let mut rows = Vec::new();
    let mut doc = CsvDoc::new(&prov, &["epsilon_label", "R_bar", "R_bar_rel"]);
    for label in &cfg.epsilons {
        let prep = cfg.pipeline.prepare(label.value(), cfg.grid)?;
        let report = monte_carlo_risk_prepared(&signal, &noise, &prep, cfg.reps.max(2), cfg.seed)?;
        doc.row(&[label.to_string(), fmt_f64(report.r_bar), fmt_f64(report.r_bar_rel)]);
        rows.push(RiskRow { label: label.clone(), report });
    }
    doc.write(&cfg.output_dir.join("risk_table.csv"))?;
    write_sidecar(cfg, &cfg.output_dir.join("risk_table.provenance.toml"))?;

    if !cfg.noise_set.is_empty() {
        let set = cfg
            .noise_set
            .iter()
            .map(|q| q.build(cfg.pipeline.sigma_star))
            .collect::<Result<Vec<_>>>()?;
        let mut doc = CsvDoc::new(&prov, &["epsilon_label", "noise_index", "R_bar", "R_bar_rel", "worst"]);
        for label in &cfg.epsilons {
            let rr = robust_risk(&signal, &set, label.value(), cfg.grid, cfg.reps.max(2), &cfg.pipeline, cfg.seed)?;
            for (k, r) in rr.reports.iter().enumerate() {
                doc.row(&[
                    label.to_string(),
                    k.to_string(),
                    fmt_f64(r.r_bar),
                    fmt_f64(r.r_bar_rel),
                    u8::from(k == rr.worst).to_string(),
                ]);
            }
        }
        doc.write(&cfg.output_dir.join("robust_risk.csv"))?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub label: EpsilonLabel,
    pub q_hat_1: Vec<usize>,
    pub q_hat_2: Vec<usize>,
    pub q_hat_1_mode: usize,
    pub q_hat_2_mode: usize,
}

/// Both detectors over `reps` replications at one ε.
pub fn detect_counts(cfg: &ExperimentConfig, label: &EpsilonLabel) -> Result<DetectionRow> {
    let eps = label.value();
    let signal = cfg.signal.build()?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let pcfg = PipelineConfig { basis: cfg.detection_basis.clone(), ..cfg.pipeline.clone() };
    let prep = pcfg.prepare(eps, cfg.grid)?;
    let det = DetectionConfig::for_epsilon(eps, prep.delta)?;
    let iota = det.iota.min(prep.n);
    let counts = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<(usize, usize)> {
            let (_, est) = prep.run(&signal, &noise, split_seed(cfg.seed, rep as u64))?;
            let sel = &est.selection;
            let q1 = detect_count_lse(&sel.theta_hat, sel.kappa_hat, eps, det.delta, iota)?;
            Ok((q1, shrinkage_signal_count(&sel.theta_hat, det.c_star)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (q_hat_1, q_hat_2): (Vec<usize>, Vec<usize>) = counts.into_iter().unzip();
    Ok(DetectionRow {
        label: label.clone(),
        q_hat_1_mode: mode(&q_hat_1).expect("reps ≥ 1"),
        q_hat_2_mode: mode(&q_hat_2).expect("reps ≥ 1"),
        q_hat_1,
        q_hat_2,
    })
}

/// Writes `detect_table.csv` (modes) and `detect_reps.csv` (every replication).
pub fn run_detection_table(cfg: &ExperimentConfig) -> Result<Vec<DetectionRow>> {
    cfg.validate()?;
    let prov = cfg.provenance();
    let rows = cfg.epsilons.iter().map(|l| detect_counts(cfg, l)).collect::<Result<Vec<_>>>()?;
    let mut table = CsvDoc::new(&prov, &["epsilon", "q_hat_1_mode", "q_hat_2_mode"]);
    let mut reps = CsvDoc::new(&prov, &["epsilon", "rep", "q_hat_1", "q_hat_2"]);
    for row in &rows {
        table.row(&[row.label.to_string(), row.q_hat_1_mode.to_string(), row.q_hat_2_mode.to_string()]);
        for (k, (a, b)) in row.q_hat_1.iter().zip(&row.q_hat_2).enumerate() {
            reps.row(&[row.label.to_string(), k.to_string(), a.to_string(), b.to_string()]);
        }
    }
    table.write(&cfg.output_dir.join("detect_table.csv"))?;
    reps.write(&cfg.output_dir.join("detect_reps.csv"))?;
    write_sidecar(cfg, &cfg.output_dir.join("detect_table.provenance.toml"))?;
    Ok(rows)
}

/// `figure_eps_<label>.csv` with (t, y_observed, S_true, S_hat) for the
/// first replication of the master seed.
pub fn emit_figure_data(cfg: &ExperimentConfig, label: &EpsilonLabel) -> Result<PathBuf> {
    cfg.validate()?;
    let signal = cfg.signal.build()?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let prep = cfg.pipeline.prepare(label.value(), cfg.grid)?;
    let (path, est) = prep.run(&signal, &noise, split_seed(cfg.seed, 0))?;
    let truth = signal.values_on_grid(cfg.grid)?;
    let mut doc = CsvDoc::new(&cfg.provenance(), &["t", "y_observed", "S_true", "S_hat"]);
    for i in 0..=cfg.grid {
        doc.row(&[
            fmt_f64(path.time(i)),
            fmt_f64(path.values[i]),
            fmt_f64(truth[i]),
            fmt_f64(est.selection.s_hat[i]),
        ]);
    }
    let file = cfg.output_dir.join(format!("figure_eps_{}.csv", label.slug()));
    doc.write(&file)?;
    Ok(file)
}

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub label: EpsilonLabel,
    pub report: RiskReport,
    pub constants: OracleConstants,
    /// (1+3δ)/(1−3δ) min_λ risk + ε²Ψ/δ
    pub bound: f64,
}

impl OracleCheck {
    pub fn holds(&self) -> bool {
        self.report.risk_star <= self.bound + 3.0 * self.report.risk_star_se
    }
}

#[derive(Serialize)]
struct OracleSummary {
    #[serde(with = "crate::io::seed_serde")]
    seed: u64,
    config_hash: String,
    epsilon: String,
    reps: usize,
    risk_star: f64,
    risk_star_se: f64,
    min_lambda_risk: f64,
    oracle_ratio: f64,
    factor: f64,
    psi: f64,
    bound: f64,
    holds: bool,
}

/// Per-candidate risks and mean costs at one ε, checked against the oracle
/// inequality. Writes `oracle_eps_<label>.csv` and a summary.
pub fn run_oracle_check(cfg: &ExperimentConfig, label: &EpsilonLabel) -> Result<OracleCheck> {
    cfg.validate()?;
    let signal = cfg.signal.build()?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let prep = cfg.pipeline.prepare(label.value(), cfg.grid)?;
    let report = monte_carlo_risk_prepared(&signal, &noise, &prep, cfg.reps.max(2), cfg.seed)?;
    let eps = label.value();
    let constants = oracle_constants(
        &noise,
        eps,
        prep.a_bar,
        signal.derivative_norm().unwrap_or(0.0),
        report.iota,
        prep.config.basis.phi_star(),
    )?;
    let min = report.per_lambda[report.min_lambda()];
    let bound = report.oracle_factor() * min + eps * eps * constants.psi / report.delta;
    let check = OracleCheck { label: label.clone(), report, constants, bound };

    let prov = cfg.provenance();
    let mut doc = CsvDoc::new(&prov, &["beta", "r", "risk", "risk_se", "J_mean", "penalty"]);
    let r = &check.report;
    for k in 0..r.iota {
        let (beta, rr) = match r.alphas[k] {
            Some((b, rr)) => (b.to_string(), fmt_f64(rr)),
            None => (String::new(), String::new()),
        };
        doc.row(&[beta, rr, fmt_f64(r.per_lambda[k]), fmt_f64(r.per_lambda_se[k]), fmt_f64(r.j_mean[k]), fmt_f64(r.penalty_known[k])]);
    }
    let stem = format!("oracle_eps_{}", label.slug());
    doc.write(&cfg.output_dir.join(format!("{stem}.csv")))?;
    write_toml(
        &cfg.output_dir.join(format!("{stem}.summary.toml")),
        &OracleSummary {
            seed: cfg.seed,
            config_hash: prov.config_hash.clone(),
            epsilon: label.to_string(),
            reps: r.n_reps,
            risk_star: r.risk_star,
            risk_star_se: r.risk_star_se,
            min_lambda_risk: min,
            oracle_ratio: r.oracle_ratio,
            factor: r.oracle_factor(),
            psi: check.constants.psi,
            bound: check.bound,
            holds: check.holds(),
        },
    )?;
    Ok(check)
}

/// Simulates one path at ε and writes `path_eps_<label>.csv` (+ sidecar).
pub fn simulate_to_file(cfg: &ExperimentConfig, label: &EpsilonLabel) -> Result<PathBuf> {
    cfg.validate()?;
    let signal = cfg.signal.build()?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let path = crate::noise_sim::simulate_path(&signal, &noise, label.value(), cfg.grid, split_seed(cfg.seed, 0))?;
    let file = cfg.output_dir.join(format!("path_eps_{}.csv", label.slug()));
    write_path(&file, &path, &cfg.hash())?;
    Ok(file)
}

/// Runs the estimator on a stored path; writes `<stem>.selection.csv`.
pub fn estimate_file(cfg: &ExperimentConfig, input: &Path) -> Result<PathBuf> {
    let path = read_path(input)?;
    let prep = cfg.pipeline.prepare(path.epsilon, path.p)?;
    let noise = cfg.noise.build(cfg.pipeline.sigma_star)?;
    let est = prep.estimate(&path, Some(&noise))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("path");
    let file = cfg.output_dir.join(format!("{stem}.selection.csv"));
    write_selection(&file, &est.selection, &Provenance { seed: path.seed, config_hash: cfg.hash() })?;
    Ok(file)
}
