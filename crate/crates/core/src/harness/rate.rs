use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log τ, log error)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `error_k / error_{k+1}` for consecutive rows.
    pub ratios: Vec<f64>,
}

pub fn fit_rate(taus: &[f64], errors: &[f64]) -> Result<RateFit> {
    if taus.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} step sizes, {} errors",
            taus.len(),
            errors.len()
        )));
    }
    let points: Vec<(f64, f64)> = taus
        .iter()
        .zip(errors)
        .filter(|(t, e)| **t > 0.0 && **e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewRows(points.len()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("rate fit needs distinct step sizes".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        ratios: errors.windows(2).map(|w| w[0] / w[1]).collect(),
    })
}

/// Reads `tau` and one error column (by header name) from a convergence CSV.
pub fn read_convergence_columns(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| parse_err("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| parse_err(format!("missing column {name}")))
    };
    let (it, ie) = (find("tau")?, find(column)?);
    let mut taus = Vec::new();
    let mut errors = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .ok_or_else(|| parse_err(format!("row {} is too short", row + 2)))?
                .parse()
                .map_err(|e| parse_err(format!("row {}: {e}", row + 2)))
        };
        taus.push(get(it)?);
        errors.push(get(ie)?);
    }
    Ok((taus, errors))
}
