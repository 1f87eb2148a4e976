//! Forward solvers for `u_tt - u_xx + q u = 0` on `(0, L)` with Neumann ends,
//! `u(0) = g` and `u_t(0) = 0`.
//!
//! [`solve_fd`] is an explicit three-point leapfrog scheme. [`spectral_oracle`]
//! evaluates `cos(t √A) g` for the same semi-discrete operator `A` and is exact
//! in time, so comparing the two isolates the time-stepping error.

mod fd;
mod spectral;
pub(crate) mod tridiag;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SnapshotMatrix, SpatialGrid, TimeSampling};

pub use fd::{solve_fd, solve_fd_receivers};
pub use spectral::{spectral_oracle, SPECTRAL_SIZE_LIMIT};

/// How the potential term enters the leapfrog update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialUpdate {
    /// `u^{m+1} = 2u^m - u^{m-1} + Δt²(D₂u^m - q u^m)`.
    #[default]
    Explicit,
    /// `(1 + Δt² q / 2)(u^{m+1} + u^{m-1}) = 2u^m + Δt² D₂u^m`.
    ///
    /// Stays stable at Courant ratio 1 for any `q ≥ 0`, where the explicit
    /// form does not; with `q = 0` both reduce to the same scheme.
    Averaged,
}

/// Time-stepping parameters of one forward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub courant_ratio: f64,
    /// Sampling interval of snapshots and receiver data.
    pub tau: f64,
    /// Number of snapshots `u(kτ)`, `k = 0..n`.
    pub n: usize,
    /// Record `F(kτ)` for `k = 0..2n-1`, which doubles the simulated time.
    pub record_boundary: bool,
    pub potential_update: PotentialUpdate,
    /// Log the conserved discrete energy at every sample instant.
    pub track_energy: bool,
    steps_per_sample: usize,
}

impl SolverConfig {
    pub fn new(grid: &SpatialGrid, sampling: &TimeSampling, courant_ratio: f64) -> Result<Self> {
        Self::with_samples(grid, sampling.tau, sampling.n, courant_ratio)
    }

    pub fn with_samples(grid: &SpatialGrid, tau: f64, n: usize, courant_ratio: f64) -> Result<Self> {
        if !(courant_ratio > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "courant ratio must be positive, got {courant_ratio}"
            )));
        }
        if courant_ratio > 1.0 + 1e-12 {
            return Err(Error::CflViolation {
                ratio: courant_ratio,
            });
        }
        if n == 0 || !(tau > 0.0) {
            return Err(Error::InvalidConfig(
                "need at least one snapshot and a positive sampling interval".into(),
            ));
        }
        let dt = courant_ratio * grid.step();
        let s = tau / dt;
        let steps = s.round();
        if steps < 1.0 || (s - steps).abs() > 1e-8 * s {
            return Err(Error::SampleTimeMisaligned { tau, dt });
        }
        Ok(Self {
            dt,
            courant_ratio,
            tau,
            n,
            record_boundary: true,
            potential_update: PotentialUpdate::Explicit,
            track_energy: false,
            steps_per_sample: steps as usize,
        })
    }

    pub fn with_potential_update(mut self, update: PotentialUpdate) -> Self {
        self.potential_update = update;
        self
    }

    pub fn with_record_boundary(mut self, record: bool) -> Self {
        self.record_boundary = record;
        self
    }

    pub fn with_energy(mut self, track: bool) -> Self {
        self.track_energy = track;
        self
    }

    pub fn steps_per_sample(&self) -> usize {
        self.steps_per_sample
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..self.n).map(|k| k as f64 * self.tau).collect()
    }

    /// Number of samples simulated: `2n - 1` with boundary recording, else `n`.
    pub fn sample_count(&self) -> usize {
        if self.record_boundary {
            2 * self.n - 1
        } else {
            self.n
        }
    }
}

/// Receiver readings `F(kτ) = ∫ g u(·, kτ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSeries {
    pub tau: f64,
    pub values: Vec<f64>,
}

impl TransferSeries {
    pub fn new(tau: f64, values: Vec<f64>) -> Self {
        Self { tau, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every reading rounded to `digits` significant decimal digits.
    pub fn rounded(&self, digits: u32) -> Self {
        let values = self
            .values
            .iter()
            .map(|&v| {
                if v == 0.0 || !v.is_finite() {
                    return v;
                }
                let scale = 10f64.powi(digits as i32 - 1 - v.abs().log10().floor() as i32);
                (v * scale).round() / scale
            })
            .collect();
        Self::new(self.tau, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub snapshots: SnapshotMatrix,
    pub transfer: Option<TransferSeries>,
    /// `(t, E)` pairs, empty unless energy tracking was requested.
    pub energy: Vec<(f64, f64)>,
}

/// The recorded boundary data of a solve.
pub fn sample_transfer(result: &ForwardResult) -> Result<TransferSeries> {
    result.transfer.clone().ok_or(Error::MissingRecording)
}

/// Writes snapshots as CSV: node position first, then one column per snapshot.
pub fn write_snapshots_csv(snapshots: &SnapshotMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        write!(out, "x")?;
        for k in 0..snapshots.len() {
            write!(out, ",u{k}")?;
        }
        writeln!(out)?;
        for (i, x) in snapshots.grid().nodes().into_iter().enumerate() {
            write!(out, "{x:.15e}")?;
            for k in 0..snapshots.len() {
                write!(out, ",{:.15e}", snapshots.column(k)[i])?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
