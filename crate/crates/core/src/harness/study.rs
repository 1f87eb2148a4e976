use serde::{Deserialize, Serialize};

use crate::diagnostics::{evaluate_bounds_gram, BoundReport, GramData};
use crate::error::{Error, Result};
use crate::gramian::{cholesky_factor, mass_from_data, relative_frobenius};
use crate::model::{background_snapshots, SnapshotMatrix, SpatialGrid};
use crate::wave::solve_fd;

use super::config::ExperimentConfig;
use super::rate::{fit_rate, RateFit};

/// Errors below this (per `√n`) are treated as the discretization floor.
pub const FLOOR: f64 = 1e-6;

/// One row of the convergence table. Errors are tuple norms divided by `√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tau: f64,
    pub lift_error: f64,
    pub best_error: f64,
    pub lift_vs_projection: f64,
    pub full_projection_error: f64,
    pub kappa: f64,
    pub eps: f64,
    pub max_diag_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    /// Sorted by decreasing `τ`.
    pub rows: Vec<ConvergenceRow>,
    /// Fit of the lift error; `None` below the floor or with fewer than 3 rows.
    pub lift_rate: Option<RateFit>,
    pub best_rate: Option<RateFit>,
}

impl ConvergenceRecord {
    pub fn from_rows(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
        let fit = |e: Vec<f64>| {
            if e.iter().all(|v| *v < FLOOR) {
                None
            } else {
                fit_rate(&taus, &e).ok()
            }
        };
        Self {
            lift_rate: fit(rows.iter().map(|r| r.lift_error).collect()),
            best_rate: fit(rows.iter().map(|r| r.best_error).collect()),
            rows,
        }
    }
}

/// Fields at the last sampled instant `(n - 1)τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalSnapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub reconstructed: Vec<f64>,
    pub truth: Vec<f64>,
    pub background: Vec<f64>,
    pub causal_projection: Vec<f64>,
}

impl FinalSnapshot {
    /// Share of `∫ (𝐮 - u)²` within `radius` of the wavefront `x = t`.
    pub fn error_fraction_near(&self, front: f64, radius: f64, weights: &[f64]) -> f64 {
        let mut near = 0.0;
        let mut total = 0.0;
        for (i, &x) in self.x.iter().enumerate() {
            let e = self.reconstructed[i] - self.truth[i];
            let v = weights[i] * e * e;
            total += v;
            if (x - front).abs() <= radius {
                near += v;
            }
        }
        if total == 0.0 {
            1.0
        } else {
            near / total
        }
    }
}

/// Everything measured for one `n`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub n: usize,
    pub grid: SpatialGrid,
    pub tau: f64,
    pub final_time: f64,
    pub report: BoundReport,
    /// `‖TᵀM₀T - M‖_F / ‖M‖_F`.
    pub interpolation_defect: f64,
    /// `‖M - UᵀWU‖_F / ‖UᵀWU‖_F`: data Gramian against the simulated snapshots.
    pub data_consistency: f64,
    /// Share of the final-time squared error within `3τ` of the wavefront.
    pub localization: f64,
    pub last: FinalSnapshot,
}

impl RunOutcome {
    pub fn row(&self) -> ConvergenceRow {
        let s = (self.n as f64).sqrt();
        let r = &self.report;
        ConvergenceRow {
            n: self.n,
            tau: self.tau,
            lift_error: r.lift_error / s,
            best_error: r.best_error / s,
            lift_vs_projection: r.lift_vs_projection / s,
            full_projection_error: r.full_projection_error / s,
            kappa: r.kappa,
            eps: r.eps,
            max_diag_ratio: r.max_diag_ratio,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutcome>,
    pub record: ConvergenceRecord,
}

/// Solves, lifts and evaluates every `n` of the configuration in turn.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<StudyResult> {
    run_experiment_with(cfg, |_| {})
}

/// As [`run_experiment`], calling `progress` after each `n`.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&RunOutcome),
) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.is_mimo() {
        return Err(Error::InvalidConfig(
            "multi-source configurations are checked by `verify`, not `run`".into(),
        ));
    }
    let mut runs = Vec::with_capacity(cfg.samples.len());
    for &n in &cfg.samples {
        let outcome = run_single(cfg, n).map_err(|e| Error::Run {
            n,
            source: Box::new(e),
        })?;
        progress(&outcome);
        runs.push(outcome);
    }
    let record = ConvergenceRecord::from_rows(runs.iter().map(RunOutcome::row).collect());
    Ok(StudyResult {
        config: cfg.clone(),
        runs,
        record,
    })
}

/// One forward solve, lift and evaluation. Only Gram matrices and the last
/// snapshot are formed, so memory stays at two snapshot matrices.
pub fn run_single(cfg: &ExperimentConfig, n: usize) -> Result<RunOutcome> {
    let setup = cfg.setup(n)?;
    let grid = setup.grid;
    let q = cfg.potential(&grid)?;
    let g = setup.pulse.evaluate(&grid)?;
    let forward = solve_fd(&q, &g, &grid, &setup.solver)?;
    let transfer = forward.transfer.ok_or(Error::MissingRecording)?;
    let u = forward.snapshots;
    let u0 = background_snapshots(&setup.pulse, &setup.sampling, &grid)?;

    let m = mass_from_data(&cfg.recorded(&transfer), n)?;
    let l = cholesky_factor(m.entries())?;
    let data = GramData::new(&u, &u0)?;
    let eval = evaluate_bounds_gram(&data, &l)?;
    let m0 = &data.background;
    let t = &eval.transform;
    let interpolation_defect = relative_frobenius(&(t.transpose() * m0 * t), m.entries());
    let data_consistency = relative_frobenius(m.entries(), &u.cross_gram(&u)?);

    let k = n - 1;
    let last = FinalSnapshot {
        time: k as f64 * setup.sampling.tau,
        x: grid.nodes(),
        reconstructed: combine_column(&u0, t, k),
        truth: u.column(k).to_vec(),
        background: u0.column(k).to_vec(),
        causal_projection: combine_column(&u0, &eval.causal, k),
    };
    let localization = last.error_fraction_near(last.time, 3.0 * setup.sampling.tau, &grid.weights());
    Ok(RunOutcome {
        n,
        grid,
        tau: setup.sampling.tau,
        final_time: setup.sampling.final_time,
        report: eval.report,
        interpolation_defect,
        data_consistency,
        localization,
        last,
    })
}

/// Column `k` of `U₀ C`.
fn combine_column(u0: &SnapshotMatrix, coefficients: &nalgebra::DMatrix<f64>, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; u0.grid().node_count()];
    for j in 0..u0.len() {
        let c = coefficients[(j, k)];
        if c != 0.0 {
            for (o, v) in out.iter_mut().zip(u0.column(j)) {
                *o += c * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::evaluate_bounds;
    use crate::gramian::{lift_internal, mass_from_snapshots};
    use crate::harness::presets::preset;
    use crate::model::tuple_norm;

    #[test]
    fn single_run_matches_explicit_pipeline() {
        let cfg = preset("hat-desk").unwrap();
        let n = cfg.samples[0];
        let out = run_single(&cfg, n).unwrap();
        let setup = cfg.setup(n).unwrap();
        let q = cfg.potential(&setup.grid).unwrap();
        let g = setup.pulse.evaluate(&setup.grid).unwrap();
        let fwd = solve_fd(&q, &g, &setup.grid, &setup.solver).unwrap();
        let u0 = background_snapshots(&setup.pulse, &setup.sampling, &setup.grid).unwrap();
        let mut m = mass_from_data(fwd.transfer.as_ref().unwrap(), n).unwrap();
        let mut m0 = mass_from_snapshots(&u0);
        let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
        let rep = evaluate_bounds(&fwd.snapshots, &u0, &lift).unwrap();
        let scale = tuple_norm(&fwd.snapshots);
        assert!((rep.lift_error - out.report.lift_error).abs() < 1e-7 * scale);
        assert!((rep.best_error - out.report.best_error).abs() < 1e-7 * scale);
        let col = lift.lifted.column(n - 1);
        for (a, b) in col.iter().zip(&out.last.reconstructed) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
        assert!(out.interpolation_defect < 1e-10);
        // The averaged update is self-adjoint in a weighted product, so data and
        // quadrature Gramians differ at order h² max q.
        let h = setup.grid.step();
        assert!(out.data_consistency < h * h, "{}", out.data_consistency);
    }

    #[test]
    fn rows_sorted_by_decreasing_tau() {
        let row = |n: usize, tau: f64, e: f64| ConvergenceRow {
            n,
            tau,
            lift_error: e,
            best_error: e,
            lift_vs_projection: 0.0,
            full_projection_error: e,
            kappa: 1.0,
            eps: 0.0,
            max_diag_ratio: 0.0,
        };
        let rec = ConvergenceRecord::from_rows(vec![row(4, 0.25, 0.5), row(1, 1.0, 1.0), row(2, 0.5, 0.7)]);
        assert_eq!(rec.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert!(rec.lift_rate.is_some());
        let rec = ConvergenceRecord::from_rows(vec![row(1, 1.0, 1e-9), row(2, 0.5, 1e-9), row(4, 0.25, 1e-9)]);
        assert!(rec.lift_rate.is_none());
    }

    #[test]
    fn multi_source_configs_are_rejected() {
        let cfg = preset("mimo-desk").unwrap();
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
    }
}
