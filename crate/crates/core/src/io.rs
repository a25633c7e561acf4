//! CSV/TOML readers and writers. Floats use Rust's shortest round-trip
//! formatting so that identical results give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MspError, Result};
use crate::estimator::SelectionResult;
use crate::noise_sim::{Jump, ObservationPath};

/// TOML integers are i64: seeds above `i64::MAX` are written as strings.
pub mod seed_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => u64::try_from(i).map_err(de::Error::custom),
            Repr::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// Header line carried by every CSV written by the runner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    fn line(&self) -> String {
        format!("# seed={} config_hash={}\n", self.seed, self.config_hash)
    }
}

/// Builds a CSV document: provenance comment, header, rows.
pub struct CsvDoc {
    buf: String,
    width: usize,
}

impl CsvDoc {
    pub fn new(prov: &Provenance, header: &[&str]) -> Self {
        let mut buf = prov.line();
        buf.push_str(&header.join(","));
        buf.push('\n');
        CsvDoc { buf, width: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.width);
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn write(&self, file: &Path) -> Result<()> {
        write_file(file, &self.buf)
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

pub fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x}").unwrap();
    s
}

pub fn write_file(file: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = file.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(file, contents)?;
    Ok(())
}

pub fn write_toml<T: Serialize>(file: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| MspError::Parse(e.to_string()))?;
    write_file(file, &text)
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(file: &Path) -> Result<T> {
    let text = fs::read_to_string(file)?;
    toml::from_str(&text).map_err(|e| MspError::Parse(format!("{}: {e}", file.display())))
}

/// Sidecar describing a path CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathMeta {
    pub epsilon: f64,
    pub p: usize,
    #[serde(with = "seed_serde")]
    pub seed: u64,
    pub config_hash: String,
    /// (time, size) of every simulated jump
    #[serde(default)]
    pub jumps: Vec<(f64, f64)>,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes `t,y` rows and a `<file>.meta` TOML sidecar.
pub fn write_path(file: &Path, path: &ObservationPath, config_hash: &str) -> Result<()> {
    let prov = Provenance { seed: path.seed, config_hash: config_hash.to_string() };
    let mut doc = CsvDoc::new(&prov, &["t", "y"]);
    for (i, y) in path.values.iter().enumerate() {
        doc.row(&[fmt_f64(path.time(i)), fmt_f64(*y)]);
    }
    doc.write(file)?;
    let meta = PathMeta {
        epsilon: path.epsilon,
        p: path.p,
        seed: path.seed,
        config_hash: config_hash.to_string(),
        jumps: path.jumps.iter().map(|j| (j.time, j.size)).collect(),
    };
    write_toml(&meta_path(file), &meta)
}

/// Reads numeric rows, skipping `#` comments and the header line.
pub fn read_csv_rows(file: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(file)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| MspError::Parse(format!("{}: empty file", file.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| MspError::Parse(format!("{} row {}: {e}", file.display(), k + 1)))?;
        if row.len() != header.len() {
            return Err(MspError::Parse(format!("{} row {}: expected {} cells", file.display(), k + 1, header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a path written by [`write_path`]; the sidecar must sit next to it.
pub fn read_path(file: &Path) -> Result<ObservationPath> {
    let meta: PathMeta = read_toml(&meta_path(file))?;
    let (header, rows) = read_csv_rows(file)?;
    let y = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| MspError::Parse(format!("{}: no `y` column", file.display())))?;
    let values: Vec<f64> = rows.iter().map(|r| r[y]).collect();
    if values.len() != meta.p + 1 {
        return Err(MspError::GridMismatch { expected: meta.p + 1, actual: values.len() });
    }
    Ok(ObservationPath {
        p: meta.p,
        epsilon: meta.epsilon,
        values,
        jumps: meta.jumps.iter().map(|&(time, size)| Jump { time, size }).collect(),
        seed: meta.seed,
    })
}

/// Summary written next to a selection CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    #[serde(with = "seed_serde")]
    pub seed: u64,
    pub config_hash: String,
    pub chosen: usize,
    pub beta: Option<u32>,
    pub r: Option<f64>,
    pub kappa_hat: f64,
    pub j_min: f64,
    pub delta: f64,
    pub a_bar: f64,
}

/// `j,theta_hat,lambda_hat` rows plus a `<stem>.summary.toml`.
pub fn write_selection(file: &Path, sel: &SelectionResult, prov: &Provenance) -> Result<()> {
    let mut doc = CsvDoc::new(prov, &["j", "theta_hat", "lambda_hat"]);
    for (j, (t, l)) in sel.theta_hat.iter().zip(&sel.lambda_hat).enumerate() {
        doc.row(&[(j + 1).to_string(), fmt_f64(*t), fmt_f64(*l)]);
    }
    doc.write(file)?;
    let summary = SelectionSummary {
        seed: prov.seed,
        config_hash: prov.config_hash.clone(),
        chosen: sel.chosen,
        beta: sel.chosen_alpha.map(|a| a.0),
        r: sel.chosen_alpha.map(|a| a.1),
        kappa_hat: sel.kappa_hat,
        j_min: sel.min_cost(),
        delta: sel.delta,
        a_bar: sel.a_bar,
    };
    write_toml(&file.with_extension("summary.toml"), &summary)
}
