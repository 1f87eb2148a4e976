use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::inner_product;

use super::rate::RateFit;
use super::study::{ConvergenceRecord, RunOutcome, StudyResult};

pub const CONVERGENCE_HEADER: &str =
    "n,tau,lift_error,best_error,lift_vs_projection,full_projection_error,kappa,eps,max_diag_ratio";

#[derive(Serialize)]
struct RunSummary<'a> {
    n: usize,
    tau: f64,
    final_time: f64,
    interpolation_defect: f64,
    data_consistency: f64,
    localization: f64,
    final_l2_error: f64,
    final_l2_norm: f64,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    lift_rate: Option<&'a RateFit>,
    best_rate: Option<&'a RateFit>,
    runs: Vec<RunSummary<'a>>,
}

fn sci(v: f64) -> String {
    format!("{v:.15e}")
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_convergence_csv(record: &ConvergenceRecord, path: &Path) -> Result<()> {
    write_file(path, |out| {
        writeln!(out, "{CONVERGENCE_HEADER}")?;
        for r in &record.rows {
            let values = [
                r.tau,
                r.lift_error,
                r.best_error,
                r.lift_vs_projection,
                r.full_projection_error,
                r.kappa,
                r.eps,
                r.max_diag_ratio,
            ];
            let cols: Vec<String> = values.iter().map(|v| sci(*v)).collect();
            writeln!(out, "{},{}", r.n, cols.join(","))?;
        }
        Ok(())
    })
}

fn final_errors(run: &RunOutcome) -> (Vec<f64>, f64, f64) {
    let last = &run.last;
    let err: Vec<f64> = last.reconstructed.iter().zip(&last.truth).map(|(a, b)| a - b).collect();
    let l2 = inner_product(&err, &err, &run.grid).expect("same grid").sqrt();
    let norm = inner_product(&last.truth, &last.truth, &run.grid).expect("same grid").sqrt();
    (err, l2, norm)
}

/// Writes every artifact of a study into `dir` and returns the paths written.
///
/// `convergence.csv`, `summary.json`, and per `n`: `bound_report_n<k>.json`,
/// `snapshots_n<k>.csv` (fields at the last sampled instant) and
/// `error_profile_n<k>.csv` (pointwise error, raw and divided by the L² norm
/// of the true snapshot).
pub fn emit_outputs(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("convergence.csv");
    write_convergence_csv(&result.record, &path)?;
    written.push(path);

    let mut runs = Vec::new();
    for run in &result.runs {
        let n = run.n;
        let path = dir.join(format!("bound_report_n{n}.json"));
        write_file(&path, |out| out.write_all(run.report.to_json().as_bytes()))?;
        written.push(path);

        let last = &run.last;
        let path = dir.join(format!("snapshots_n{n}.csv"));
        write_file(&path, |out| {
            writeln!(out, "x,reconstructed,true,background,causal_projection")?;
            for i in 0..last.x.len() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    sci(last.x[i]),
                    sci(last.reconstructed[i]),
                    sci(last.truth[i]),
                    sci(last.background[i]),
                    sci(last.causal_projection[i])
                )?;
            }
            Ok(())
        })?;
        written.push(path);

        let (err, l2, norm) = final_errors(run);
        let path = dir.join(format!("error_profile_n{n}.csv"));
        write_file(&path, |out| {
            writeln!(out, "x,error,normalized_error")?;
            for (x, e) in last.x.iter().zip(&err) {
                let scaled = if norm > 0.0 { e / norm } else { *e };
                writeln!(out, "{},{},{}", sci(*x), sci(*e), sci(scaled))?;
            }
            Ok(())
        })?;
        written.push(path);

        runs.push(RunSummary {
            n,
            tau: run.tau,
            final_time: run.final_time,
            interpolation_defect: run.interpolation_defect,
            data_consistency: run.data_consistency,
            localization: run.localization,
            final_l2_error: l2,
            final_l2_norm: norm,
            warnings: &run.report.warnings,
        });
    }

    let summary = Summary {
        name: &result.config.name,
        lift_rate: result.record.lift_rate.as_ref(),
        best_rate: result.record.best_rate.as_ref(),
        runs,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&path, |out| out.write_all(text.as_bytes()))?;
    written.push(path);
    Ok(written)
}
