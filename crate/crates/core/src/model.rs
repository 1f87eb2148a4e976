//! Grids, pulses, potentials, snapshot containers and the quadrature shared by
//! every other module.
//!
//! All integrals are trapezoid sums over the nodes of a uniform grid. Pulses are
//! sampled at the nodes; their breakpoints are required to sit where the
//! trapezoid rule integrates them without error:
//!
//! * hat pulses need `tau / h` to be an integer, so every kink is a node;
//! * step pulses need `tau / h` to be an odd integer, so every jump falls
//!   halfway between two nodes.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Uniform grid on `[0, domain_length]` with `cell_count` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    domain_length: f64,
    cell_count: usize,
}

impl SpatialGrid {
    pub fn new(domain_length: f64, cell_count: usize) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        if cell_count == 0 {
            return Err(Error::InvalidConfig("cell count must be positive".into()));
        }
        Ok(Self {
            domain_length,
            cell_count,
        })
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn node_count(&self) -> usize {
        self.cell_count + 1
    }

    pub fn step(&self) -> f64 {
        self.domain_length / self.cell_count as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.domain_length * i as f64 / self.cell_count as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cell_count {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.weight(i)).collect()
    }

    /// `x / h` when it is an integer (within rounding), otherwise `None`.
    pub fn steps_in(&self, x: f64) -> Option<usize> {
        let r = x / self.step();
        let k = r.round();
        if k >= 0.0 && (r - k).abs() <= ALIGN_TOL * r.abs().max(1.0) {
            Some(k as usize)
        } else {
            None
        }
    }

    pub(crate) fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(L = {}, N = {}) vs (L = {}, N = {})",
                self.domain_length, self.cell_count, other.domain_length, other.cell_count
            )))
        }
    }
}

/// Trapezoid approximation of `∫ u v dx`.
pub fn inner_product(u: &[f64], v: &[f64], grid: &SpatialGrid) -> Result<f64> {
    let m = grid.node_count();
    if u.len() != m || v.len() != m {
        return Err(Error::GridMismatch(format!(
            "grid has {m} nodes, functions have {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(weighted_dot(u, v, grid))
}

pub(crate) fn weighted_dot(u: &[f64], v: &[f64], grid: &SpatialGrid) -> f64 {
    let h = grid.step();
    let last = u.len() - 1;
    let interior: f64 = u[1..last].iter().zip(&v[1..last]).map(|(a, b)| a * b).sum();
    h * interior + 0.5 * h * (u[0] * v[0] + u[last] * v[last])
}

pub(crate) fn l2_norm(u: &[f64], grid: &SpatialGrid) -> f64 {
    weighted_dot(u, u, grid).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    /// Piecewise constant pulse `2 H(x/tau) / tau`.
    Step,
    /// Piecewise linear pulse `2 phi(x/tau) / tau`.
    Hat,
}

impl std::fmt::Display for PulseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PulseKind::Step => f.write_str("step"),
            PulseKind::Hat => f.write_str("hat"),
        }
    }
}

/// An approximate delta pulse of width set by `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseFamily {
    pub kind: PulseKind,
    pub tau: f64,
}

impl PulseFamily {
    pub fn new(kind: PulseKind, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { kind, tau })
    }

    pub fn step(tau: f64) -> Result<Self> {
        Self::new(PulseKind::Step, tau)
    }

    pub fn hat(tau: f64) -> Result<Self> {
        Self::new(PulseKind::Hat, tau)
    }

    /// Half-width of the pulse support.
    pub fn radius(&self) -> f64 {
        match self.kind {
            PulseKind::Step => 0.5 * self.tau,
            PulseKind::Hat => self.tau,
        }
    }

    /// The full symmetric pulse centred at zero, as a function of `z`.
    pub fn profile(&self, z: f64) -> f64 {
        let s = z / self.tau;
        match self.kind {
            PulseKind::Step => {
                if s.abs() <= 0.5 {
                    2.0 / self.tau
                } else {
                    0.0
                }
            }
            PulseKind::Hat => 2.0 * (1.0 - s.abs()).max(0.0) / self.tau,
        }
    }

    /// Checks that the pulse is resolved by the grid and that its breakpoints
    /// are integrated exactly. Returns `tau / h`.
    pub fn check_resolution(&self, grid: &SpatialGrid) -> Result<usize> {
        let h = grid.step();
        if self.tau < 2.0 * h * (1.0 - ALIGN_TOL) {
            return Err(Error::PulseUnderresolved {
                tau: self.tau,
                step: h,
            });
        }
        let cells = grid.steps_in(self.tau).ok_or_else(|| {
            Error::PulseMisaligned(format!("tau / h = {} is not an integer", self.tau / h))
        })?;
        if self.kind == PulseKind::Step && cells % 2 == 0 {
            return Err(Error::PulseMisaligned(format!(
                "step pulses need an odd tau / h so jumps fall between nodes, got {cells}"
            )));
        }
        Ok(cells)
    }

    /// Samples `profile(x - center)` on the grid.
    pub fn source_at(&self, grid: &SpatialGrid, center: f64) -> Result<Vec<f64>> {
        self.check_resolution(grid)?;
        check_center(grid, center)?;
        Ok((0..grid.node_count())
            .map(|i| self.profile(grid.node(i) - center))
            .collect())
    }

    pub fn evaluate(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        evaluate_pulse(self, grid)
    }
}

fn check_center(grid: &SpatialGrid, center: f64) -> Result<()> {
    if center < 0.0 || grid.steps_in(center).is_none() {
        return Err(Error::PulseMisaligned(format!(
            "source center {center} is not a grid node"
        )));
    }
    Ok(())
}

/// Initial data `g` of the family, truncated to the domain.
pub fn evaluate_pulse(family: &PulseFamily, grid: &SpatialGrid) -> Result<Vec<f64>> {
    family.source_at(grid, 0.0)
}

/// Sampling interval, number of snapshots and final time of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSampling {
    pub tau: f64,
    pub n: usize,
    pub final_time: f64,
}

impl TimeSampling {
    /// Sampling at the pulse width: `T = n tau` for hats, `(n - 1/2) tau` for steps.
    pub fn for_pulse(pulse: &PulseFamily, n: usize) -> Result<Self> {
        Self::oversampled(pulse, n, 1)
    }

    /// Sampling at `pulse.tau / factor`. The final time is the right end of
    /// the support of the last background snapshot.
    pub fn oversampled(pulse: &PulseFamily, n: usize, factor: usize) -> Result<Self> {
        if n == 0 || factor == 0 {
            return Err(Error::InvalidConfig(
                "snapshot count and oversampling factor must be positive".into(),
            ));
        }
        let tau = pulse.tau / factor as f64;
        Ok(Self {
            tau,
            n,
            final_time: (n - 1) as f64 * tau + pulse.radius(),
        })
    }

    pub fn measurement_count(&self) -> usize {
        2 * self.n - 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| k as f64 * self.tau).collect()
    }

    pub fn validate(&self, pulse: &PulseFamily, grid: &SpatialGrid) -> Result<()> {
        let expected = (self.n - 1) as f64 * self.tau + pulse.radius();
        if (self.final_time - expected).abs() > 1e-9 * expected.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "final time {} does not match the {} rule (expected {expected})",
                self.final_time, pulse.kind
            )));
        }
        let ratio = pulse.tau / self.tau;
        if (ratio - ratio.round()).abs() > ALIGN_TOL * ratio || ratio.round() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "sampling interval {} does not divide the pulse width {}",
                self.tau, pulse.tau
            )));
        }
        if grid.steps_in(self.tau).is_none() {
            return Err(Error::PulseMisaligned(format!(
                "sampling interval {} is not a multiple of h = {}",
                self.tau,
                grid.step()
            )));
        }
        if self.final_time >= grid.domain_length() {
            return Err(Error::InvalidConfig(format!(
                "final time {} must be below the domain length {}",
                self.final_time,
                grid.domain_length()
            )));
        }
        Ok(())
    }
}

/// Nonnegative potential sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    support_end: f64,
}

impl Potential {
    pub fn zero(grid: &SpatialGrid) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
            support_end: 0.0,
        }
    }

    /// `amplitude * exp(-rate (x - center)^2)`, with values below `1e-16 * amplitude`
    /// set to zero so the support is compact.
    pub fn gaussian(grid: &SpatialGrid, amplitude: f64, rate: f64, center: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian potential needs amplitude >= 0 and rate > 0, got {amplitude}, {rate}"
            )));
        }
        let cutoff = 1e-16 * amplitude;
        let values = grid
            .nodes()
            .into_iter()
            .map(|x| {
                let q = amplitude * (-rate * (x - center).powi(2)).exp();
                if q < cutoff {
                    0.0
                } else {
                    q
                }
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "potential has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some((i, q)) = values
            .iter()
            .enumerate()
            .find(|(_, q)| !(q.is_finite() && **q >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "potential must be finite and nonnegative, node {i} has {q}"
            )));
        }
        let support_end = values
            .iter()
            .rposition(|&q| q != 0.0)
            .map_or(0.0, |i| grid.node(i));
        Ok(Self {
            values,
            support_end,
        })
    }

    /// Reads one value per line, or `x,q` pairs, one per node.
    pub fn from_file(grid: &SpatialGrid, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = Vec::with_capacity(grid.node_count());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.rsplit(',').next().unwrap_or(line).trim();
            let q: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: cannot parse {field:?}", lineno + 1),
            })?;
            values.push(q);
        }
        Self::from_values(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&q| q == 0.0)
    }
}

/// An ordered family of grid functions, one per column, sampled `tau` apart in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    grid: SpatialGrid,
    tau: f64,
    values: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(grid: SpatialGrid, tau: f64, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "snapshot columns have {} entries, grid has {} nodes",
                values.nrows(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, tau, values })
    }

    pub fn zeros(grid: SpatialGrid, tau: f64, n: usize) -> Self {
        Self {
            grid,
            tau,
            values: DMatrix::zeros(grid.node_count(), n),
        }
    }

    pub fn from_columns(grid: SpatialGrid, tau: f64, columns: &[Vec<f64>]) -> Result<Self> {
        let m = grid.node_count();
        if let Some(c) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::GridMismatch(format!(
                "column has {} entries, grid has {m} nodes",
                c.len()
            )));
        }
        let values = DMatrix::from_fn(m, columns.len(), |i, k| columns[k][i]);
        Ok(Self { grid, tau, values })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let m = self.values.nrows();
        &self.values.as_slice()[k * m..(k + 1) * m]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.values.nrows();
        &mut self.values.as_mut_slice()[k * m..(k + 1) * m]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub(crate) fn check_compatible(&self, other: &SnapshotMatrix) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} snapshots vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// `self - other`, column by column.
    pub fn difference(&self, other: &SnapshotMatrix) -> Result<SnapshotMatrix> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid,
            tau: self.tau,
            values: &self.values - &other.values,
        })
    }

    /// Linear recombination `self * coefficients`.
    pub fn combine(&self, coefficients: &DMatrix<f64>) -> Result<SnapshotMatrix> {
        if coefficients.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} snapshots, coefficient matrix has {} rows",
                self.len(),
                coefficients.nrows()
            )));
        }
        Ok(Self {
            grid: self.grid,
            tau: self.tau,
            values: &self.values * coefficients,
        })
    }

    /// Matrix of inner products `<self_i, other_j>`.
    pub fn cross_gram(&self, other: &SnapshotMatrix) -> Result<DMatrix<f64>> {
        self.grid.check_same(&other.grid)?;
        Ok(weighted_cross_gram(&self.grid, &self.values, &other.values))
    }

    /// `L2` norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| l2_norm(self.column(k), &self.grid))
            .collect()
    }

    /// Max-norm of every column over the grid nodes.
    pub fn column_max_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.column(k).iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// `Aᵀ W B` for column-major `A`, `B` sharing a grid, via one blocked product.
pub(crate) fn weighted_cross_gram(
    grid: &SpatialGrid,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m = grid.node_count();
    debug_assert_eq!(a.nrows(), m);
    debug_assert_eq!(b.nrows(), m);
    let weights = grid.weights();
    let mut wb = b.clone();
    for mut col in wb.column_iter_mut() {
        for (v, w) in col.iter_mut().zip(&weights) {
            *v *= w;
        }
    }
    let (p, q) = (a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(p, q);
    if p == 0 || q == 0 {
        return out;
    }
    // SAFETY: the strides describe the column-major storage of `a` (read as its
    // transpose), `wb` and `out`, whose shapes are p x m, m x q and p x q.
    unsafe {
        matrixmultiply::dgemm(
            p,
            m,
            q,
            1.0,
            a.as_ptr(),
            m as isize,
            1,
            wb.as_ptr(),
            1,
            m as isize,
            0.0,
            out.as_mut_ptr(),
            1,
            p as isize,
        );
    }
    out
}

/// `(Σ_i ‖v_i‖²)^{1/2}`.
pub fn tuple_norm(v: &SnapshotMatrix) -> f64 {
    (0..v.len())
        .map(|k| weighted_dot(v.column(k), v.column(k), &v.grid))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Snapshots `u⁰(·, kτ)` of the zero-potential problem for a pulse at `x = 0`.
pub fn background_snapshots(
    family: &PulseFamily,
    sampling: &TimeSampling,
    grid: &SpatialGrid,
) -> Result<SnapshotMatrix> {
    background_snapshots_at(family, sampling, grid, 0.0)
}

/// Zero-potential snapshots for a pulse initially centred at `center`.
///
/// The Neumann condition at `x = 0` is handled by the even extension
/// `E(y) = p(|y| - center)`, so `u⁰(x, t) = (E(x - t) + E(x + t)) / 2`.
pub fn background_snapshots_at(
    family: &PulseFamily,
    sampling: &TimeSampling,
    grid: &SpatialGrid,
    center: f64,
) -> Result<SnapshotMatrix> {
    family.check_resolution(grid)?;
    check_center(grid, center)?;
    sampling.validate(family, grid)?;
    if center + sampling.final_time >= grid.domain_length() {
        return Err(Error::InvalidConfig(format!(
            "pulse at {center} reaches the far boundary before the final time {}",
            sampling.final_time
        )));
    }
    let nodes = grid.nodes();
    let mut out = SnapshotMatrix::zeros(*grid, sampling.tau, sampling.n);
    for k in 0..sampling.n {
        let t = k as f64 * sampling.tau;
        let col = out.column_mut(k);
        for (v, &x) in col.iter_mut().zip(&nodes) {
            let left = family.profile((x - t).abs() - center);
            let right = family.profile(x + t - center);
            *v = 0.5 * (left + right);
        }
    }
    Ok(out)
}
