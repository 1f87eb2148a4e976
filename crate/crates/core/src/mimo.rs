//! Experimental multi-source variant: `K` pulses in one dimension.
//!
//! Snapshots of all sources are stored in one [`SnapshotMatrix`] with
//! time-major, source-minor column order: column `k K + i` is source `i` at
//! time `kτ`. The block mass matrix uses the same flattened ordering.
//!
//! Diagonal blocks of the block factor are taken to be lower-triangular
//! Cholesky factors, which makes the block factorization coincide with the
//! scalar Cholesky factorization of the flattened matrix. A block
//! lower-triangular factor also imposes an ordering between the sources at a
//! single instant, which has no physical meaning; other square roots of the
//! diagonal blocks are equally admissible and are not explored here.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gramian::{cholesky_factor, symmetrize, transform_from_factors, LiftResult};
use crate::model::{
    background_snapshots_at, weighted_cross_gram, Potential, PulseFamily, SnapshotMatrix,
    SpatialGrid, TimeSampling,
};
use crate::wave::{solve_fd_receivers, SolverConfig};

/// `K x K` response matrices `F^{ij}(mτ) = ∫ g_i u^{(j)}(·, mτ)`, `m = 0..`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSeries {
    pub tau: f64,
    pub values: Vec<DMatrix<f64>>,
}

impl ResponseSeries {
    pub fn sources(&self) -> usize {
        self.values.first().map_or(0, |f| f.nrows())
    }
}

/// Block mass matrix with `n x n` blocks of size `K x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGramian {
    sources: usize,
    blocks: usize,
    entries: DMatrix<f64>,
    factor: Option<DMatrix<f64>>,
}

impl BlockGramian {
    /// From a flattened symmetric matrix of size `nK`.
    pub fn new(entries: DMatrix<f64>, sources: usize) -> Result<Self> {
        let size = entries.nrows();
        if !entries.is_square() || sources == 0 || !size.is_multiple_of(sources) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix cannot hold {sources}x{sources} blocks",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            sources,
            blocks: size / sources,
            entries: symmetrize(entries),
            factor: None,
        })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn block(&self, k: usize, l: usize) -> DMatrix<f64> {
        let s = self.sources;
        self.entries.view((k * s, l * s), (s, s)).into_owned()
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    pub fn factorize(&mut self) -> Result<&DMatrix<f64>> {
        if self.factor.is_none() {
            self.factor = Some(block_cholesky(&self.entries, self.sources)?);
        }
        Ok(self.factor.as_ref().expect("factor was just stored"))
    }
}

/// Block `M_kl = (F((k-l)τ) + F((k+l)τ)) / 2` with `F(-mτ) = F(mτ)ᵀ`.
///
/// Each response matrix must be symmetric to `symmetry_tol` relative to the
/// largest entry of `F(0)`.
pub fn block_mass_from_data(
    f: &ResponseSeries,
    n: usize,
    symmetry_tol: f64,
) -> Result<BlockGramian> {
    let required = 2 * n.max(1) - 1;
    if f.values.len() < required {
        return Err(Error::InsufficientData {
            required,
            available: f.values.len(),
        });
    }
    let k = f.sources();
    let scale = f.values[0].amax().max(f64::MIN_POSITIVE);
    for (m, fm) in f.values[..required].iter().enumerate() {
        if fm.nrows() != k || fm.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "response {m} is {}x{}, expected {k}x{k}",
                fm.nrows(),
                fm.ncols()
            )));
        }
        let defect = (fm - fm.transpose()).amax() / scale;
        if defect > symmetry_tol {
            return Err(Error::AsymmetricResponse { sample: m, defect });
        }
    }
    let lagged = |d: isize| -> DMatrix<f64> {
        if d >= 0 {
            f.values[d as usize].clone()
        } else {
            f.values[(-d) as usize].transpose()
        }
    };
    let mut entries = DMatrix::zeros(n * k, n * k);
    for a in 0..n {
        for b in 0..n {
            let block = (lagged(a as isize - b as isize) + &f.values[a + b]) * 0.5;
            entries.view_mut((a * k, b * k), (k, k)).copy_from(&block);
        }
    }
    BlockGramian::new(entries, k)
}

/// Block mass matrix of multi-source snapshots by quadrature.
pub fn block_mass_from_snapshots(u: &SnapshotMatrix, sources: usize) -> Result<BlockGramian> {
    BlockGramian::new(weighted_cross_gram(u.grid(), u.values(), u.values()), sources)
}

/// Block Cholesky with lower-triangular Cholesky roots of the diagonal blocks.
pub fn block_cholesky(a: &DMatrix<f64>, sources: usize) -> Result<DMatrix<f64>> {
    let size = a.nrows();
    let s = sources;
    if s == 0 || !size.is_multiple_of(s) {
        return Err(Error::DimensionMismatch(format!(
            "size {size} is not a multiple of {s}"
        )));
    }
    let nb = size / s;
    let mut l = DMatrix::zeros(size, size);
    for j in 0..nb {
        let mut diag = a.view((j * s, j * s), (s, s)).into_owned();
        for p in 0..j {
            let ljp = l.view((j * s, p * s), (s, s));
            diag -= ljp * ljp.transpose();
        }
        let ljj = cholesky_factor(&diag).map_err(|e| match e {
            Error::NotPositiveDefinite { index, value } => Error::NotPositiveDefinite {
                index: j * s + index,
                value,
            },
            other => other,
        })?;
        l.view_mut((j * s, j * s), (s, s)).copy_from(&ljj);
        for i in j + 1..nb {
            let mut b = a.view((i * s, j * s), (s, s)).into_owned();
            for p in 0..j {
                b -= l.view((i * s, p * s), (s, s)) * l.view((j * s, p * s), (s, s)).transpose();
            }
            // X Lⱼⱼᵀ = B  ⇔  Lⱼⱼ Xᵀ = Bᵀ.
            let mut xt = b.transpose();
            ljj.solve_lower_triangular_mut(&mut xt);
            l.view_mut((i * s, j * s), (s, s)).copy_from(&xt.transpose());
        }
    }
    Ok(l)
}

/// `𝐔 = U₀ L₀^{-T} Lᵀ` with block factors.
pub fn block_lift_internal(
    u0: &SnapshotMatrix,
    m0: &mut BlockGramian,
    m: &mut BlockGramian,
) -> Result<LiftResult> {
    if m0.entries.nrows() != u0.len() || m.entries.nrows() != u0.len() || m0.sources != m.sources
    {
        return Err(Error::DimensionMismatch(format!(
            "{} background columns, block Gramians of size {} and {}",
            u0.len(),
            m0.entries.nrows(),
            m.entries.nrows()
        )));
    }
    let l0 = m0.factorize()?.clone();
    let l = m.factorize()?.clone();
    let transform = transform_from_factors(&l0, &l)?;
    let lifted = u0.combine(&transform)?;
    Ok(LiftResult {
        lifted,
        transform,
        chol_true: l,
        chol_background: l0,
    })
}

/// Zero-potential snapshots of pulses centred at `centers`, interleaved in
/// time-major order.
pub fn multi_background(
    pulse: &PulseFamily,
    sampling: &TimeSampling,
    grid: &SpatialGrid,
    centers: &[f64],
) -> Result<SnapshotMatrix> {
    let per_source = centers
        .iter()
        .map(|&c| background_snapshots_at(pulse, sampling, grid, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(interleave(grid, sampling.tau, &per_source))
}

fn interleave(grid: &SpatialGrid, tau: f64, per_source: &[SnapshotMatrix]) -> SnapshotMatrix {
    let k = per_source.len();
    let n = per_source.first().map_or(0, |s| s.len());
    let mut out = SnapshotMatrix::zeros(*grid, tau, n * k);
    for t in 0..n {
        for (i, s) in per_source.iter().enumerate() {
            out.column_mut(t * k + i).copy_from_slice(s.column(t));
        }
    }
    out
}

/// One leapfrog solve per source, each read by every receiver.
///
/// Returns the interleaved true snapshots and the response series.
pub fn multi_forward(
    q: &Potential,
    pulse: &PulseFamily,
    grid: &SpatialGrid,
    cfg: &SolverConfig,
    centers: &[f64],
) -> Result<(SnapshotMatrix, ResponseSeries)> {
    let sources: Vec<Vec<f64>> = centers
        .iter()
        .map(|&c| pulse.source_at(grid, c))
        .collect::<Result<_>>()?;
    let receivers: Vec<&[f64]> = sources.iter().map(Vec::as_slice).collect();
    let k = sources.len();
    let mut per_source = Vec::with_capacity(k);
    let mut series = Vec::with_capacity(k);
    for g in &sources {
        let (snaps, f, _) = solve_fd_receivers(q, g, &receivers, grid, cfg)?;
        per_source.push(snaps);
        series.push(f);
    }
    let samples = series.first().and_then(|s| s.first()).map_or(0, |s| s.len());
    if samples == 0 {
        return Err(Error::MissingRecording);
    }
    let values = (0..samples)
        .map(|m| DMatrix::from_fn(k, k, |i, j| series[j][i].values[m]))
        .collect();
    Ok((
        interleave(grid, cfg.tau, &per_source),
        ResponseSeries {
            tau: cfg.tau,
            values,
        },
    ))
}
