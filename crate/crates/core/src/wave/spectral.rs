use crate::error::{Error, Result};
use crate::model::{Potential, SnapshotMatrix, SpatialGrid};

use super::tridiag::SymTridiagonal;

/// Largest cell count accepted by [`spectral_oracle`].
pub const SPECTRAL_SIZE_LIMIT: usize = 20_000;

/// `u(t) = cos(t √A) g` for `A = -D₂ + diag(q)` with ghost-node Neumann closure.
///
/// `A` is self-adjoint in the trapezoid inner product, so `W^{1/2} A W^{-1/2}`
/// is a symmetric tridiagonal matrix. Its eigenpairs are computed one at a
/// time and accumulated into every requested time, so memory stays `O(N)` per
/// output column. Time `0` returns `g` unchanged.
pub fn spectral_oracle(
    q: &Potential,
    g: &[f64],
    grid: &SpatialGrid,
    times: &[f64],
) -> Result<SnapshotMatrix> {
    let m = grid.node_count();
    if grid.cell_count() > SPECTRAL_SIZE_LIMIT {
        return Err(Error::SizeLimit {
            size: grid.cell_count(),
            limit: SPECTRAL_SIZE_LIMIT,
        });
    }
    if g.len() != m || q.values().len() != m {
        return Err(Error::GridMismatch(format!(
            "grid has {m} nodes, initial data has {} and potential {}",
            g.len(),
            q.values().len()
        )));
    }
    let tau = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let mut out = SnapshotMatrix::zeros(*grid, tau, times.len());
    if m == 1 {
        for (k, &t) in times.iter().enumerate() {
            out.column_mut(k)[0] = g[0] * (q.values()[0].sqrt() * t).cos();
        }
        return Ok(out);
    }

    let s = symmetrized_operator(q, grid);
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let gw: Vec<f64> = g.iter().zip(&sqrt_w).map(|(a, b)| a * b).collect();

    let mut acc = vec![vec![0.0; m]; times.len()];
    for k in 0..m {
        let lambda = s.eigenvalue(k);
        let v = s.eigenvector(lambda);
        let c: f64 = v.iter().zip(&gw).map(|(a, b)| a * b).sum();
        let omega = lambda.max(0.0).sqrt();
        for (col, &t) in acc.iter_mut().zip(times) {
            let f = c * (omega * t).cos();
            for (o, vi) in col.iter_mut().zip(&v) {
                *o += f * vi;
            }
        }
    }
    for (k, (col, &t)) in acc.into_iter().zip(times).enumerate() {
        let dst = out.column_mut(k);
        if t == 0.0 {
            dst.copy_from_slice(g);
        } else {
            for ((o, a), w) in dst.iter_mut().zip(col).zip(&sqrt_w) {
                *o = a / w;
            }
        }
    }
    Ok(out)
}

pub(crate) fn symmetrized_operator(q: &Potential, grid: &SpatialGrid) -> SymTridiagonal {
    let nmax = grid.cell_count();
    let inv_h2 = 1.0 / (grid.step() * grid.step());
    let d = q.values().iter().map(|qi| 2.0 * inv_h2 + qi).collect();
    // A[i][i+1] and A[i+1][i]; the end rows carry the doubled ghost coupling.
    let e = (0..nmax)
        .map(|i| {
            let up = if i == 0 { 2.0 } else { 1.0 };
            let down = if i + 1 == nmax { 2.0 } else { 1.0 };
            let product: f64 = up * down;
            -product.sqrt() * inv_h2
        })
        .collect();
    SymTridiagonal::new(d, e)
}
