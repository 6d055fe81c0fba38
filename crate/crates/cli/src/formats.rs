//! On-disk formats: the whitespace-separated `KLDA1` dataset text format and
//! the JSON model file. Both are written with shortest-round-trip float
//! formatting, so write -> read -> write is byte-identical and parameters
//! survive a round trip bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use klda::linalg::{Matrix, SymMatrix};
use klda::matnorm::{LabeledMatrixDataset, ModelParameters, Observation};

use crate::errors::{data_err, CliError, CliResult};

pub const DATASET_MAGIC: &str = "KLDA1";

/// Serializes a dataset: header `KLDA1 n r c J`, then one line per
/// observation (`label` followed by the row-major entries). Label 0 marks an
/// unlabeled observation.
pub fn write_dataset(data: &LabeledMatrixDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{DATASET_MAGIC} {} {} {} {}",
        data.n(),
        data.r(),
        data.c(),
        data.num_classes()
    );
    for obs in data.observations() {
        let _ = write!(out, "{}", obs.label);
        for v in obs.x.data() {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, data: &LabeledMatrixDataset) -> CliResult<()> {
    fs::write(path, write_dataset(data)).map_err(|e| data_err(&path.display().to_string(), e))
}

/// Parses the dataset format, reporting the offending line on failure.
pub fn parse_dataset(text: &str, source: &str) -> CliResult<LabeledMatrixDataset> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(ln, line)| line.split_whitespace().map(move |t| (ln + 1, t)));
    let mut next = |what: &str| -> CliResult<(usize, &str)> {
        tokens
            .next()
            .ok_or_else(|| CliError::Data(format!("{source}: unexpected end of file, expected {what}")))
    };

    let (line, magic) = next("magic string")?;
    if magic != DATASET_MAGIC {
        return Err(CliError::Data(format!(
            "{source}:{line}: bad magic string {magic:?}, expected {DATASET_MAGIC:?}"
        )));
    }
    let mut read_count = |what: &str| -> CliResult<usize> {
        let (line, tok) = next(what)?;
        tok.parse::<usize>()
            .map_err(|e| CliError::Data(format!("{source}:{line}: bad {what} {tok:?}: {e}")))
    };
    let n = read_count("observation count")?;
    let r = read_count("row count")?;
    let c = read_count("column count")?;
    let j = read_count("class count")?;

    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        let (line, tok) = next("label")?;
        let label: usize = tok
            .parse()
            .map_err(|e| CliError::Data(format!("{source}:{line}: bad label {tok:?}: {e}")))?;
        if label > j {
            return Err(CliError::Data(format!(
                "{source}:{line}: label {label} exceeds class count {j}"
            )));
        }
        let mut vals = Vec::with_capacity(r * c);
        for _ in 0..r * c {
            let (line, tok) = next("matrix entry")?;
            let v: f64 = tok.parse().map_err(|e| {
                CliError::Data(format!("{source}:{line}: bad value {tok:?}: {e}"))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{source}:{line}: non-finite value in observation {}",
                    i + 1
                )));
            }
            vals.push(v);
        }
        let x = Matrix::from_rows(r, c, vals)
            .map_err(|e| CliError::Data(format!("{source}: observation {}: {e}", i + 1)))?;
        observations.push(Observation { x, label });
    }
    if let Some((line, tok)) = tokens.next() {
        return Err(CliError::Data(format!(
            "{source}:{line}: trailing content {tok:?} after {n} observations"
        )));
    }
    LabeledMatrixDataset::new(r, c, j, observations)
        .map_err(|e| CliError::Data(format!("{source}: {e}")))
}

pub fn load_dataset(path: &Path) -> CliResult<LabeledMatrixDataset> {
    let text = fs::read_to_string(path).map_err(|e| data_err(&path.display().to_string(), e))?;
    parse_dataset(&text, &path.display().to_string())
}

/// Fit metadata recorded alongside the parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitMeta {
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub software_version: String,
}

/// JSON model file: priors, means, the precision pair (or a dense covariance
/// for ground-truth files of the dense simulation models), and optional fit
/// metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub r: usize,
    pub c: usize,
    pub classes: usize,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMeta>,
}

pub const MODEL_FORMAT: &str = "klda-model-v1";

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn sym_to_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    matrix_to_rows(&m.to_matrix())
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Data(format!("{what}: ragged or empty matrix")));
    }
    Matrix::from_rows(r, c, rows.iter().flatten().copied().collect())
        .map_err(|e| CliError::Data(format!("{what}: {e}")))
}

fn rows_to_sym(rows: &[Vec<f64>], what: &str) -> CliResult<SymMatrix> {
    let m = rows_to_matrix(rows, what)?;
    SymMatrix::from_matrix(&m).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

impl ModelFile {
    pub fn from_params(params: &ModelParameters, fit: Option<FitMeta>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            r: params.r(),
            c: params.c(),
            classes: params.num_classes(),
            priors: params.priors.clone(),
            means: params.means.iter().map(matrix_to_rows).collect(),
            phi: Some(sym_to_rows(&params.phi)),
            delta: Some(sym_to_rows(&params.delta)),
            sigma: None,
            fit,
        }
    }

    /// Ground-truth file for the dense covariance models.
    pub fn from_dense_truth(
        priors: &[f64],
        means: &[Matrix],
        sigma: &SymMatrix,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            r: means[0].rows(),
            c: means[0].cols(),
            classes: means.len(),
            priors: priors.to_vec(),
            means: means.iter().map(matrix_to_rows).collect(),
            phi: None,
            delta: None,
            sigma: Some(sym_to_rows(sigma)),
            fit: None,
        }
    }

    pub fn to_params(&self) -> CliResult<ModelParameters> {
        let phi = self
            .phi
            .as_ref()
            .ok_or_else(|| CliError::Data("model file lacks a phi precision factor".into()))?;
        let delta = self
            .delta
            .as_ref()
            .ok_or_else(|| CliError::Data("model file lacks a delta precision factor".into()))?;
        let params = ModelParameters {
            priors: self.priors.clone(),
            means: self
                .means
                .iter()
                .map(|m| rows_to_matrix(m, "means"))
                .collect::<CliResult<_>>()?,
            phi: rows_to_sym(phi, "phi")?,
            delta: rows_to_sym(delta, "delta")?,
        };
        params
            .validate()
            .map_err(|e| CliError::Data(format!("invalid model parameters: {e}")))?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("serializing model: {e}")))?;
        fs::write(path, json + "\n").map_err(|e| data_err(&path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| data_err(&path.display().to_string(), e))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if file.format != MODEL_FORMAT {
            return Err(CliError::Data(format!(
                "{}: unsupported format {:?}",
                path.display(),
                file.format
            )));
        }
        Ok(file)
    }
}
