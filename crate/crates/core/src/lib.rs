//! Internal wave fields from boundary data.
//!
//! For the 1D plasma wave equation `u_tt - u_xx + q u = 0` with Neumann ends,
//! the samples `F(kτ) = ⟨g, u(kτ)⟩` of the response to a short pulse `g`
//! determine the Gramian of the unknown snapshots. Its Cholesky factor,
//! combined with that of the known `q = 0` snapshots, lifts the background
//! snapshots to fields that reproduce the data exactly and approximate the
//! true internal solution at rate `√τ`.
//!
//! - [`model`]: grids, pulses, potentials, snapshot matrices.
//! - [`wave`]: leapfrog solver and a spectral reference solution.
//! - [`gramian`]: mass matrices and the lift.
//! - [`diagnostics`]: projections and the error-bound report.
//! - [`mimo`]: the multi-source block variant.
//! - [`harness`]: configurations, studies, artifacts, verification.
//!
//! ```
//! use romlift::prelude::*;
//!
//! let grid = SpatialGrid::new(12.0, 384).unwrap();
//! let pulse = PulseFamily::hat(0.5).unwrap();
//! let sampling = TimeSampling::for_pulse(&pulse, 10).unwrap();
//! let q = Potential::gaussian(&grid, 0.5, 1.0, 3.0).unwrap();
//! let g = evaluate_pulse(&pulse, &grid).unwrap();
//! let cfg = SolverConfig::new(&grid, &sampling, 1.0)
//!     .unwrap()
//!     .with_potential_update(PotentialUpdate::Averaged);
//! let truth = solve_fd(&q, &g, &grid, &cfg).unwrap();
//!
//! let mut m = mass_from_data(truth.transfer.as_ref().unwrap(), 10).unwrap();
//! let u0 = background_snapshots(&pulse, &sampling, &grid).unwrap();
//! let mut m0 = mass_from_snapshots(&u0);
//! let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
//! let report = evaluate_bounds(&truth.snapshots, &u0, &lift).unwrap();
//! assert!(report.lift_error < 0.5 * report.true_norm);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod gramian;
pub mod harness;
pub mod mimo;
pub mod model;
pub mod wave;

pub use error::{Error, Result};

/// The types and functions most programs need.
pub mod prelude {
    pub use crate::diagnostics::{
        causal_projection, evaluate_bounds, full_projection, BoundReport, ProjectionResult,
    };
    pub use crate::error::{Error, Result};
    pub use crate::gramian::{
        lift_internal, mass_from_data, mass_from_snapshots, GramianMatrix, LiftResult,
    };
    pub use crate::model::{
        background_snapshots, evaluate_pulse, inner_product, tuple_norm, Potential,
        PulseFamily, PulseKind, SnapshotMatrix, SpatialGrid, TimeSampling,
    };
    pub use crate::wave::{solve_fd, spectral_oracle, PotentialUpdate, SolverConfig};
}
