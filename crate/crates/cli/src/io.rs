//! JSON matrix records, basis presets and CSV traces.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use qot_core::grid::Grid;
use qot_core::herm::{ComplexMatrix, DensityMatrix, HermitianMatrix, TangentVector};
use qot_core::lindblad::LindbladBasis;
use qot_core::spatial::MatrixField;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A square complex matrix; `entries` holds `dim²` `[re, im]` pairs in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { dim: n, entries }
    }

    pub fn to_matrix(&self) -> CliResult<ComplexMatrix> {
        let n = self.dim;
        if n == 0 || self.entries.len() != n * n {
            return Err(CliError::Usage(format!(
                "matrix record of dim {n} needs {} entries, found {}",
                n * n,
                self.entries.len()
            )));
        }
        if self.entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CliError::Usage("matrix record has non-finite entries".into()));
        }
        let zs: Vec<Complex64> = self.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        Ok(ComplexMatrix::from_row_slice(n, n, &zs))
    }
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

/// Writes to `path`, or to stdout when `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_output(path, text.as_bytes())
}

pub fn read_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    read_json::<MatrixRecord>(path)?.to_matrix()
}

pub fn read_density(path: &Path) -> CliResult<DensityMatrix> {
    Ok(DensityMatrix::from_matrix(read_matrix(path)?)?)
}

pub fn read_tangent(path: &Path) -> CliResult<TangentVector> {
    Ok(TangentVector::new(HermitianMatrix::new(read_matrix(path)?)?)?)
}

/// A field file is a JSON array with one record per grid point.
pub fn read_field(path: &Path) -> CliResult<MatrixField> {
    let records: Vec<MatrixRecord> = read_json(path)?;
    let values = records
        .iter()
        .map(|r| Ok(HermitianMatrix::new(r.to_matrix()?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let field = MatrixField::new(Grid::new(values.len())?, values)?;
    field.validate_density()?;
    Ok(field)
}

pub fn field_records(field: &MatrixField) -> Vec<MatrixRecord> {
    field.values().iter().map(|v| MatrixRecord::from_matrix(v.as_matrix())).collect()
}

/// `pauli`, `gellmann:<n>`, or a path to a JSON array of Hermitian matrix records.
pub fn parse_basis(spec: &str) -> CliResult<LindbladBasis> {
    if spec == "pauli" {
        return Ok(LindbladBasis::pauli());
    }
    if let Some(n) = spec.strip_prefix("gellmann:") {
        let n: usize = n
            .parse()
            .map_err(|_| CliError::Usage(format!("bad basis preset '{spec}'")))?;
        return Ok(LindbladBasis::gell_mann(n)?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "basis '{spec}' is neither a preset (pauli, gellmann:<n>) nor a file"
        )));
    }
    let records: Vec<MatrixRecord> = read_json(path)?;
    let ops = records
        .iter()
        .map(|r| Ok(HermitianMatrix::new(r.to_matrix()?)?))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(LindbladBasis::new(ops)?)
}

/// One row of a flow trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub entropy: f64,
    pub trace_drift: f64,
    pub min_eig: f64,
    pub dist_to_uniform: f64,
}

pub fn write_trace(path: Option<&Path>, rows: &[TraceRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    write_output(path, &bytes)
}
