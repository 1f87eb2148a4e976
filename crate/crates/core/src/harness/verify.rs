use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{
    causal_projection, condition_number, evaluate_bounds, residual_matrix, stewart_sun_check,
    BOUND_SLACK,
};
use crate::error::{Error, Result};
use crate::gramian::{
    lift_internal, mass_from_data, mass_from_snapshots, relative_frobenius, GramianMatrix,
    GramianSource,
};
use crate::mimo::{
    block_lift_internal, block_mass_from_data, block_mass_from_snapshots, multi_background,
    multi_forward,
};
use crate::model::{background_snapshots, tuple_norm, Potential, PulseKind, SnapshotMatrix};
use crate::wave::{
    solve_fd, spectral_oracle, PotentialUpdate, SolverConfig, SPECTRAL_SIZE_LIMIT,
};

use super::config::{ExperimentConfig, RunSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// A documented failure that the configuration is built to provoke.
    Expected,
    /// Measured and reported without a pass criterion.
    Info,
}

impl std::fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Expected => "EXPECTED",
            CheckStatus::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyEntry {
    pub check: String,
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub preset: String,
    pub entries: Vec<VerifyEntry>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != CheckStatus::Fail)
    }

    pub fn entry(&self, check: &str) -> Option<&VerifyEntry> {
        self.entries.iter().find(|e| e.check == check)
    }

    fn push(&mut self, check: &str, status: CheckStatus, value: Option<f64>, detail: impl Into<String>) {
        self.entries.push(VerifyEntry {
            check: check.into(),
            status,
            value,
            detail: detail.into(),
        });
    }

    fn expect_below(&mut self, check: &str, value: f64, limit: f64, what: &str) {
        let status = if value <= limit {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.push(check, status, Some(value), format!("{what} <= {limit:e}"));
    }

    fn error(&mut self, check: &str, err: &Error) {
        self.push(check, CheckStatus::Fail, None, err.to_string());
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "verify {}", self.preset)?;
        let width = self.entries.iter().map(|e| e.check.len()).max().unwrap_or(5);
        for e in &self.entries {
            let value = e.value.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
            writeln!(f, "  {:<width$}  {:<8}  {:>13}  {}", e.check, e.status, value, e.detail)?;
        }
        Ok(())
    }
}

/// Runs the invariant checks on the first sample count of `cfg`.
pub fn verify_suite(cfg: &ExperimentConfig) -> VerifyReport {
    let mut report = VerifyReport {
        preset: cfg.name.clone(),
        entries: Vec::new(),
    };
    if let Err(e) = cfg.validate() {
        report.error("configuration", &e);
        return report;
    }
    let n = cfg.samples[0];
    let setup = match cfg.setup(n) {
        Ok(s) => s,
        Err(e) => {
            report.error("configuration", &e);
            return report;
        }
    };
    if cfg.is_mimo() {
        verify_mimo(cfg, &setup, &mut report);
    } else {
        verify_single(cfg, &setup, &mut report);
    }
    stewart_sun_random(&mut report);
    report
}

fn verify_single(cfg: &ExperimentConfig, setup: &RunSetup, report: &mut VerifyReport) {
    let grid = &setup.grid;
    let n = setup.n;
    let run = || -> Result<_> {
        let q = cfg.potential(grid)?;
        let g = setup.pulse.evaluate(grid)?;
        let fwd = solve_fd(&q, &g, grid, &setup.solver)?;
        let u0 = background_snapshots(&setup.pulse, &setup.sampling, grid)?;
        Ok((q, g, fwd, u0))
    };
    let (q, g, fwd, u0) = match run() {
        Ok(v) => v,
        Err(e) => return report.error("forward solve", &e),
    };
    let transfer = fwd.transfer.as_ref().expect("boundary data is recorded by default");
    let u = &fwd.snapshots;

    background_structure(setup, &u0, report);

    let mut m = match mass_from_data(&cfg.recorded(transfer), n) {
        Ok(m) => m,
        Err(e) => return report.error("data Gramian", &e),
    };
    let direct = mass_from_snapshots(u);
    let data_gap = (m.entries() - direct.entries()).norm();
    report.push(
        "data vs snapshot Gramian",
        CheckStatus::Info,
        Some(data_gap / direct.entries().norm()),
        "relative Frobenius gap of M from data and from simulated snapshots",
    );
    let mut m0 = mass_from_snapshots(&u0);
    let lift = match lift_internal(&u0, &mut m0, &mut m) {
        Ok(l) => l,
        Err(e @ Error::NotPositiveDefinite { .. }) if cfg.oversample > 1 => {
            report.push(
                "data Gramian SPD",
                CheckStatus::Expected,
                None,
                format!("oversampled by {} beyond the data precision: {e}", cfg.oversample),
            );
            return;
        }
        Err(e) => return report.error("data Gramian SPD", &e),
    };
    report.push("data Gramian SPD", CheckStatus::Pass, None, "Cholesky factor exists");
    if let Ok(k) = condition_number(&m) {
        report.push("data Gramian condition", CheckStatus::Info, Some(k), "kappa(M)");
    }
    if cfg.oversample > 1 {
        report.push(
            "oversampling",
            CheckStatus::Info,
            None,
            "the data Gramian stayed positive definite",
        );
    }

    let back = mass_from_snapshots(&lift.lifted);
    report.expect_below(
        "Gramian interpolation",
        relative_frobenius(back.entries(), m.entries()),
        1e-8,
        "|M(lift) - M|_F / |M|_F",
    );
    let lf = lift.chol_true.norm();
    report.expect_below(
        "lift norm identity",
        (tuple_norm(&lift.lifted) - lf).abs() / lf,
        1e-8,
        "| |lift| - |L|_F | / |L|_F",
    );

    match evaluate_bounds(u, &u0, &lift) {
        Ok(rep) => {
            let bridge = (rep.lift_vs_projection - rep.factor_gap).abs() / lf;
            if rep.projection_admissible {
                report.expect_below("lift gap identity", bridge, 1e-8, "| |lift - proj| - |L - Lhat|_F | / |L|_F");
            } else {
                report.push("lift gap identity", CheckStatus::Info, Some(bridge), "projection not admissible");
            }
            let status = if rep.mass_defect_bound_holds(data_gap) {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            report.push(
                "mass defect bound",
                status,
                Some(rep.mass_defect),
                format!(
                    "<= |U - Uhat|^2 + |R|_F + |M - UtU|_F = {:.6e}",
                    rep.best_error.powi(2) + rep.r_frobenius + data_gap
                ),
            );
            let ratio = rep.bound_lhs / rep.bound_rhs;
            if rep.in_regime {
                let status = if rep.bound_holds() { CheckStatus::Pass } else { CheckStatus::Fail };
                report.push("error bound", status, Some(ratio), format!("lhs/rhs <= {BOUND_SLACK}"));
            } else {
                report.push(
                    "error bound",
                    CheckStatus::Info,
                    Some(ratio),
                    format!("out of regime (eps = {:.3e}); lhs/rhs reported only", rep.eps),
                );
            }
            report.push(
                "lift error",
                CheckStatus::Info,
                Some(rep.lift_error / (n as f64).sqrt()),
                format!("|lift - U| / sqrt(n); best approximation {:.6e}", rep.best_error / (n as f64).sqrt()),
            );
            report.push("max diagonal ratio", CheckStatus::Info, Some(rep.max_diag_ratio), "max_i |Lhat_ii / L0_ii - 1|");
            if let Ok(causal) = causal_projection(u, &u0) {
                residual_structure(setup, u, &causal, report);
            }
        }
        Err(e) => report.error("bound evaluation", &e),
    }

    zero_potential_collapse(cfg, setup, &g, report);
    oracle_order(setup, &q, &g, report);
}

fn background_structure(setup: &RunSetup, u0: &SnapshotMatrix, report: &mut VerifyReport) {
    let m0 = mass_from_snapshots(u0);
    let a = m0.entries();
    let n = a.nrows();
    let tau = setup.pulse.tau;
    let h = setup.grid.step();
    if setup.sampling.tau != tau {
        return;
    }
    match setup.pulse.kind {
        PulseKind::Step => {
            let off = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].abs())
                .fold(0.0, f64::max);
            report.expect_below("background Gramian diagonal", off / a.amax(), 1e-8, "max off-diagonal / max entry");
            if let Ok(k) = condition_number(&m0) {
                report.expect_below("background condition", (k - 2.0).abs(), 1e-8, "|kappa(M0) - 2|");
            }
        }
        PulseKind::Hat => {
            let mut worst = 0.0_f64;
            // Row 1 still couples to the double-height first snapshot.
            for i in 2..n.saturating_sub(1) {
                let row = [a[(i, i - 1)], a[(i, i)], a[(i, i + 1)]];
                for (v, e) in row.iter().zip([1.0, 4.0, 1.0]) {
                    worst = worst.max((6.0 * tau * v - e).abs() / e);
                }
            }
            report.expect_below("background interior rows", worst, 10.0 * h * h, "relative gap of 6 tau M0 rows to (1, 4, 1)");
            if n > 2 {
                let interior = GramianMatrix::new(a.view((1, 1), (n - 1, n - 1)).clone_owned(), GramianSource::FromSnapshots);
                if let Ok(k) = interior.and_then(|g| condition_number(&g)) {
                    report.expect_below("background condition (interior)", k, 3.0, "kappa of M0 without its first row and column");
                }
            }
            if let Ok(k) = condition_number(&m0) {
                let status = if k < 3.0 { CheckStatus::Pass } else { CheckStatus::Expected };
                report.push(
                    "background condition (full)",
                    status,
                    Some(k),
                    "the first snapshot has twice the height of the others, which lifts kappa above 3",
                );
            }
        }
    }
}

fn residual_structure(
    setup: &RunSetup,
    u: &SnapshotMatrix,
    causal: &crate::diagnostics::ProjectionResult,
    report: &mut VerifyReport,
) {
    if setup.sampling.tau != setup.pulse.tau {
        return;
    }
    let Ok(r) = residual_matrix(u, causal) else { return };
    let n = r.nrows();
    let scale = tuple_norm(u).powi(2) / n as f64;
    match setup.pulse.kind {
        PulseKind::Step => {
            report.expect_below("residual matrix", r.amax() / scale, 1e-8, "max |R_ij| / (|U|^2 / n)");
        }
        PulseKind::Hat => {
            let Ok(e) = u.difference(&causal.projected) else { return };
            let Ok(u0) = background_snapshots(&setup.pulse, &setup.sampling, &setup.grid) else { return };
            let Ok(eu) = e.cross_gram(&u0) else { return };
            let mut worst = 0.0_f64;
            let mut off_band = 0.0_f64;
            for i in 0..n.saturating_sub(1) {
                for j in i + 1..n {
                    let predicted = causal.coefficients[(i + 1, j)] * eu[(i, i + 1)];
                    worst = worst.max((r[(i, j)] - predicted).abs());
                    if j > i + 1 {
                        off_band = off_band.max(r[(i, j)].abs());
                    }
                }
            }
            let amax = r.amax().max(f64::MIN_POSITIVE);
            report.expect_below("residual rows", worst / amax, 1e-6, "R_ij against c_{i+1,j} <e_i, u0_{i+1}>");
            report.push(
                "residual band",
                CheckStatus::Info,
                Some(off_band / amax),
                "largest entry beyond the first off-diagonal, relative to max |R|",
            );
        }
    }
}

/// With `q = 0` at unit Courant number the scheme is exact, so the data
/// Gramian is the background Gramian and the transform is the identity.
fn zero_potential_collapse(cfg: &ExperimentConfig, setup: &RunSetup, g: &[f64], report: &mut VerifyReport) {
    let grid = &setup.grid;
    let run = || -> Result<(f64, f64)> {
        let solver = SolverConfig::new(grid, &setup.sampling, 1.0)?;
        let fwd = solve_fd(&Potential::zero(grid), g, grid, &solver)?;
        let u0 = background_snapshots(&setup.pulse, &setup.sampling, grid)?;
        let mut m = mass_from_data(fwd.transfer.as_ref().ok_or(Error::MissingRecording)?, setup.n)?;
        let mut m0 = mass_from_snapshots(&u0);
        let lift = lift_internal(&u0, &mut m0, &mut m)?;
        let eye = DMatrix::<f64>::identity(setup.n, setup.n);
        let t_gap = (&lift.transform - eye).amax();
        let u_gap = tuple_norm(&lift.lifted.difference(&u0)?) / tuple_norm(&u0);
        Ok((t_gap, u_gap))
    };
    match run() {
        Ok((t_gap, u_gap)) => {
            report.expect_below("zero potential transform", t_gap, 1e-10, "max |T - I|");
            report.expect_below("zero potential collapse", u_gap, 1e-6, "|lift - U0| / |U0|");
        }
        Err(e @ Error::NotPositiveDefinite { .. }) if cfg.oversample > 1 => {
            report.push("zero potential collapse", CheckStatus::Expected, None, e.to_string())
        }
        Err(e) => report.error("zero potential collapse", &e),
    }
}

/// Halving the time step against the semi-discrete spectral solution.
///
/// The order check uses a smooth Gaussian datum: the kinks of the pulse put
/// energy into modes whose leapfrog phase error saturates, which caps the
/// observed order near one. The pulse ratio is reported alongside.
fn oracle_order(setup: &RunSetup, q: &Potential, g: &[f64], report: &mut VerifyReport) {
    let grid = &setup.grid;
    if grid.cell_count() > SPECTRAL_SIZE_LIMIT {
        report.push(
            "spectral oracle order",
            CheckStatus::Info,
            None,
            format!("skipped: {} cells exceed the oracle limit", grid.cell_count()),
        );
        return;
    }
    let tau = setup.sampling.tau;
    let n = setup.n.min(8);
    let sigma = setup.pulse.tau.max(16.0 * grid.step());
    let smooth: Vec<f64> = grid.nodes().iter().map(|x| (-(x / sigma).powi(2)).exp()).collect();
    let ratio = |data: &[f64]| -> Result<f64> {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * tau).collect();
        let exact = spectral_oracle(q, data, grid, &times)?;
        let mut errs = Vec::new();
        for c in [0.5, 0.25] {
            let solver = SolverConfig::with_samples(grid, tau, n, c)?
                .with_potential_update(PotentialUpdate::Explicit)
                .with_record_boundary(false);
            let fwd = solve_fd(q, data, grid, &solver)?;
            errs.push(tuple_norm(&fwd.snapshots.difference(&exact)?));
        }
        Ok(errs[0] / errs[1])
    };
    match ratio(&smooth) {
        Ok(r) => {
            let status = if (3.5..=4.5).contains(&r) { CheckStatus::Pass } else { CheckStatus::Fail };
            report.push("spectral oracle order", status, Some(r), "smooth datum: error ratio under time-step halving in [3.5, 4.5]");
        }
        Err(e) => report.error("spectral oracle order", &e),
    }
    match ratio(g) {
        Ok(r) => report.push("spectral oracle order (pulse)", CheckStatus::Info, Some(r), "same ratio for the pulse itself"),
        Err(e) => report.error("spectral oracle order (pulse)", &e),
    }
}

fn verify_mimo(cfg: &ExperimentConfig, setup: &RunSetup, report: &mut VerifyReport) {
    let grid = &setup.grid;
    let centers = &cfg.source_centers;
    let k = centers.len();
    let run = |q: &Potential, solver: &SolverConfig| -> Result<(SnapshotMatrix, SnapshotMatrix, crate::gramian::LiftResult, f64)> {
        let (truth, resp) = multi_forward(q, &setup.pulse, grid, solver, centers)?;
        let u0 = multi_background(&setup.pulse, &setup.sampling, grid, centers)?;
        let mut m = block_mass_from_data(&resp, setup.n, 1e-8)?;
        let mut m0 = block_mass_from_snapshots(&u0, k)?;
        let lift = block_lift_internal(&u0, &mut m0, &mut m)?;
        let back = block_mass_from_snapshots(&lift.lifted, k)?;
        Ok((truth, u0, lift, relative_frobenius(back.entries(), m.entries())))
    };
    let q = match cfg.potential(grid) {
        Ok(q) => q,
        Err(e) => return report.error("potential", &e),
    };
    match run(&q, &setup.solver) {
        Ok((truth, _, lift, gap)) => {
            report.expect_below("block Gramian interpolation", gap, 1e-8, "|M(lift) - M|_F / |M|_F");
            let err = tuple_norm(&lift.lifted.difference(&truth).expect("same grid")) / tuple_norm(&truth);
            report.push("block lift error", CheckStatus::Info, Some(err), "|lift - U| / |U|");
        }
        Err(e) => report.error("block Gramian interpolation", &e),
    }
    let exact = SolverConfig::new(grid, &setup.sampling, 1.0);
    match exact.and_then(|s| run(&Potential::zero(grid), &s)) {
        Ok((_, u0, lift, _)) => {
            let gap = tuple_norm(&lift.lifted.difference(&u0).expect("same grid")) / tuple_norm(&u0);
            report.expect_below("block zero potential collapse", gap, 1e-6, "|lift - U0| / |U0|");
        }
        Err(e) => report.error("block zero potential collapse", &e),
    }
}

/// First-order Cholesky perturbation bound on random well-conditioned pairs.
fn stewart_sun_random(report: &mut VerifyReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut used = 0;
    for _ in 0..20 {
        let b = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(10, 10);
        let e = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let e = (&e + e.transpose()) * 0.5;
        let size = rng.random_range(1e-6..1e-3);
        let m = GramianMatrix::new(a.clone(), GramianSource::FromSnapshots).expect("square");
        let kappa = condition_number(&m).unwrap_or(f64::INFINITY);
        let hi = nalgebra::SymmetricEigen::new(a.clone()).eigenvalues.max();
        // Scale so that ε κ = size.
        let e = e.clone() * (size * hi / (kappa * e.norm()));
        let mhat = GramianMatrix::new(a + e, GramianSource::FromSnapshots).expect("square");
        match stewart_sun_check(&m, &mhat) {
            Ok(rec) if rec.in_regime => {
                used += 1;
                worst = worst.max(rec.ratio);
            }
            Ok(_) => {}
            Err(e) => return report.error("Cholesky perturbation", &e),
        }
    }
    let status = if used == 20 && worst <= BOUND_SLACK { CheckStatus::Pass } else { CheckStatus::Fail };
    report.push(
        "Cholesky perturbation",
        status,
        Some(worst),
        format!("worst actual/bound over {used} random pairs <= {BOUND_SLACK}"),
    );
}
