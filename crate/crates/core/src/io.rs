//! Plain-text matrix files and the on-disk layout of a diagnostics instance.
//!
//! A matrix file holds one row per line with comma-separated values.
//!
//! An instance directory contains `x0.csv`, `y0.csv`, optionally `e.csv`
//! (zero noise when absent) and `config.txt` with `key=value` lines:
//!
//! ```text
//! kind=single        # any pair kind; custom reads p.csv and q.csv
//! lambda1=1.2        # both penalties, or sigma to use the defaults
//! lambda2=0.3
//! sigma=0.5
//! c=1.5              # optional
//! eta0=1             # optional
//! rho=0.8            # optional, otherwise the grid minimiser
//! ```

use std::io::Write;
use std::path::Path;

use crate::diagnostics::DiagnoseSettings;
use crate::error::{Error, Result};
use crate::interpolation::{projector_pair, PairKind, ProjectorPair};
use crate::linalg::Matrix;
use crate::solver::default_penalties;

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        let mut field_offset = line_offset + (raw.len() - raw.trim_start().len());
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Format {
                offset: field_offset,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            data.push(v);
            field_offset += field.len() + 1;
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Format {
                    offset: line_offset,
                    message: format!("row {} has {width} values, expected {c}", rows + 1),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::Format {
        offset: 0,
        message: "empty matrix file".into(),
    })?;
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix<W: Write>(m: &Matrix, mut out: W) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Ground truth plus settings read from an instance directory.
#[derive(Debug, Clone)]
pub struct DiagnoseInstance {
    pub x0: Matrix,
    pub y0: Matrix,
    pub e: Matrix,
    pub pair: ProjectorPair,
    pub settings: DiagnoseSettings,
}

pub fn load_instance(dir: impl AsRef<Path>) -> Result<DiagnoseInstance> {
    let dir = dir.as_ref();
    let x0 = read_matrix(dir.join("x0.csv"))?;
    let y0 = read_matrix(dir.join("y0.csv"))?;
    let e_path = dir.join("e.csv");
    let e = if e_path.exists() {
        read_matrix(e_path)?
    } else {
        Matrix::zeros(y0.nrows(), y0.ncols())
    };
    let config = std::fs::read_to_string(dir.join("config.txt"))?;

    let mut kind = PairKind::Single;
    let mut values: Vec<(String, f64, usize)> = Vec::new();
    let mut offset = 0;
    for raw in config.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            offset: line_offset,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k == "kind" {
            kind = v.parse().map_err(|_| Error::Format {
                offset: line_offset,
                message: format!("unknown kind {v:?}"),
            })?;
            continue;
        }
        if !matches!(k, "lambda1" | "lambda2" | "sigma" | "c" | "eta0" | "rho") {
            return Err(Error::Format {
                offset: line_offset,
                message: format!("unknown key {k:?}"),
            });
        }
        let num = v.parse().map_err(|_| Error::Format {
            offset: line_offset,
            message: format!("bad value {v:?} for {k}"),
        })?;
        values.push((k.to_string(), num, line_offset));
    }
    let get = |key: &str| {
        values
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| *v)
    };

    let (big_n, big_m) = y0.shape();
    let pair = match kind {
        PairKind::Custom => ProjectorPair::custom(
            read_matrix(dir.join("p.csv"))?,
            read_matrix(dir.join("q.csv"))?,
        )?,
        k => projector_pair(k, big_n, big_m)?,
    };
    let (lambda1, lambda2) = match (get("lambda1"), get("lambda2"), get("sigma")) {
        (Some(a), Some(b), _) => (a, b),
        (a, b, Some(sigma)) => {
            let (d1, d2) = default_penalties(big_n, sigma)?;
            (a.unwrap_or(d1), b.unwrap_or(d2))
        }
        _ => {
            return Err(Error::Format {
                offset: config.len(),
                message: "config needs lambda1 and lambda2, or sigma".into(),
            })
        }
    };
    let mut settings = DiagnoseSettings::new(lambda1, lambda2);
    if let Some(c) = get("c") {
        settings.c = c;
    }
    if let Some(eta0) = get("eta0") {
        settings.eta0 = eta0;
    }
    settings.rho = get("rho");
    Ok(DiagnoseInstance {
        x0,
        y0,
        e,
        pair,
        settings,
    })
}
