//! File formats for operators, states, ensembles and results.
//!
//! Matrices are stored row-major as separate real and imaginary arrays:
//! `{"dim": 2, "re": [...], "im": [...]}`. Vectors use the same layout with
//! `dim` entries. All floats are written in shortest round-trip form.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amplimit::AmplificationResult;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::operators::HermitianOperator;
use crate::pointer::{BasisLabel, DetectorEnsemble, PureDetectorState};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorFile {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub weights: Vec<f64>,
    pub states: Vec<VectorFile>,
}

fn imag_or_zero(im: &[f64], len: usize, what: &str) -> Result<Vec<f64>> {
    match im.len() {
        0 => Ok(vec![0.0; len]),
        n if n == len => Ok(im.to_vec()),
        n => Err(Error::InvalidInput(format!("{what}: expected {len} imaginary entries, found {n}"))),
    }
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { dim, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let len = self.dim * self.dim;
        if self.dim == 0 || self.re.len() != len {
            return Err(Error::InvalidInput(format!(
                "operator file: dim {} needs {len} real entries, found {}",
                self.dim,
                self.re.len()
            )));
        }
        let im = imag_or_zero(&self.im, len, "operator file")?;
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| C64::new(self.re[i * self.dim + j], im[i * self.dim + j])))
    }

    pub fn to_operator(&self) -> Result<HermitianOperator> {
        HermitianOperator::from_dense(self.to_matrix()?)
    }
}

impl VectorFile {
    pub fn from_vector(v: &CVector) -> Self {
        Self { dim: v.len(), re: v.iter().map(|c| c.re).collect(), im: v.iter().map(|c| c.im).collect() }
    }

    pub fn to_vector(&self) -> Result<CVector> {
        if self.dim == 0 || self.re.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "vector file: dim {} but {} real entries",
                self.dim,
                self.re.len()
            )));
        }
        let im = imag_or_zero(&self.im, self.dim, "vector file")?;
        Ok(CVector::from_iterator(self.dim, self.re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i))))
    }

    /// Detector state; the amplitudes must already be normalized.
    pub fn to_state(&self) -> Result<PureDetectorState> {
        PureDetectorState::new(self.to_vector()?, BasisLabel::Abstract)
    }
}

impl EnsembleFile {
    pub fn to_ensemble(&self) -> Result<DetectorEnsemble> {
        let states = self.states.iter().map(VectorFile::to_state).collect::<Result<Vec<_>>>()?;
        DetectorEnsemble::new(self.weights.clone(), states)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_operator(path: &Path) -> Result<HermitianOperator> {
    read_json::<MatrixFile>(path)?.to_operator()
}

pub fn read_state(path: &Path) -> Result<PureDetectorState> {
    read_json::<VectorFile>(path)?.to_state()
}

pub fn read_ensemble(path: &Path) -> Result<DetectorEnsemble> {
    read_json::<EnsembleFile>(path)?.to_ensemble()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Machine-readable form of an [`AmplificationResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub limit: f64,
    pub extremum: f64,
    pub extrema: Vec<f64>,
    pub mu_re: Vec<f64>,
    pub mu_im: Vec<f64>,
    pub whiten_condition: f64,
    pub kind: String,
    pub g: Option<f64>,
    pub rank: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl From<&AmplificationResult> for ResultFile {
    fn from(r: &AmplificationResult) -> Self {
        Self {
            limit: r.limit,
            extremum: r.extremum,
            extrema: r.extrema.clone(),
            mu_re: r.mu.iter().map(|c| c.re).collect(),
            mu_im: r.mu.iter().map(|c| c.im).collect(),
            whiten_condition: r.whiten_condition,
            kind: r.kind.name().to_string(),
            g: r.kind.g(),
            rank: r.rank,
            residual: r.residual,
            warnings: r.warnings.clone(),
        }
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV with a header row, `,` separators and LF line endings.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("CSV is not UTF-8: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
