//! Mass matrices from data and from snapshots, their Cholesky factors, and the
//! lift of background snapshots into data-generated internal solutions.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SnapshotMatrix;
use crate::wave::TransferSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramianSource {
    FromData,
    FromSnapshots,
}

/// Symmetric mass matrix, optionally carrying its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianMatrix {
    entries: DMatrix<f64>,
    source: GramianSource,
    factor: Option<DMatrix<f64>>,
}

impl GramianMatrix {
    /// Stores `(A + Aᵀ)/2`.
    pub fn new(entries: DMatrix<f64>, source: GramianSource) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Gramian must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            entries: symmetrize(entries),
            source,
            factor: None,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn source(&self) -> GramianSource {
        self.source
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Factors in place (once) and returns the factor.
    pub fn factorize(&mut self) -> Result<&DMatrix<f64>> {
        if self.factor.is_none() {
            self.factor = Some(cholesky_factor(&self.entries)?);
        }
        Ok(self.factor.as_ref().expect("factor was just stored"))
    }

    /// Smallest eigenvalue, estimated by inverse power iteration with the factor.
    pub fn min_eigenvalue_estimate(&mut self) -> Result<f64> {
        let n = self.dim();
        let l = self.factorize()?.clone();
        let mut x = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64).sin());
        x /= x.norm();
        let mut lambda = f64::INFINITY;
        for _ in 0..50 {
            let mut y = x.clone();
            l.solve_lower_triangular_mut(&mut y);
            l.tr_solve_lower_triangular_mut(&mut y);
            let norm = y.norm();
            let next = 1.0 / norm;
            x = y / norm;
            if (next - lambda).abs() <= 1e-10 * next {
                return Ok(next);
            }
            lambda = next;
        }
        Ok(lambda)
    }

    /// Row-major CSV of the full matrix.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(&self.entries, path)
    }
}

pub(crate) fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

/// `M_kl = (F(|k-l|τ) + F((k+l)τ)) / 2` for `k, l < n`.
pub fn mass_from_data(f: &TransferSeries, n: usize) -> Result<GramianMatrix> {
    let required = 2 * n.max(1) - 1;
    if f.len() < required {
        return Err(Error::InsufficientData {
            required,
            available: f.len(),
        });
    }
    let v = &f.values;
    let m = DMatrix::from_fn(n, n, |k, l| 0.5 * (v[k.abs_diff(l)] + v[k + l]));
    GramianMatrix::new(m, GramianSource::FromData)
}

/// `M_kl = ⟨u_k, u_l⟩`.
pub fn mass_from_snapshots(u: &SnapshotMatrix) -> GramianMatrix {
    let m = u.cross_gram(u).expect("a snapshot matrix shares its own grid");
    GramianMatrix::new(m, GramianSource::FromSnapshots).expect("cross Gram of one family is square")
}

/// Factors `M` in place and returns its lower-triangular factor.
pub fn cholesky(m: &mut GramianMatrix) -> Result<DMatrix<f64>> {
    m.factorize().cloned()
}

/// Lower-triangular `L` with positive diagonal and `L Lᵀ = A`.
///
/// Fails at the first pivot that is not above `n ε max_i A_ii`.
pub fn cholesky_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let threshold = n as f64 * f64::EPSILON * max_diag;
    // Row-major working copy so that the inner products run over contiguous rows.
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let (done, rest) = l.split_at_mut(j * n);
        let row_j = &mut rest[..n];
        for k in 0..j {
            let row_k = &done[k * n..k * n + k];
            let s: f64 = row_k.iter().zip(&row_j[..k]).map(|(x, y)| x * y).sum();
            row_j[k] = (a[(j, k)] - s) / done[k * n + k];
        }
        let d = a[(j, j)] - row_j[..j].iter().map(|x| x * x).sum::<f64>();
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        row_j[j] = d.sqrt();
    }
    Ok(DMatrix::from_row_slice(n, n, &l))
}

/// Upper-triangular `T` with `L₀ᵀ T = Lᵀ`, by back substitution.
pub fn transform_from_factors(l0: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l0.shape() != l.shape() {
        return Err(Error::DimensionMismatch(format!(
            "factors of size {} and {}",
            l0.nrows(),
            l.nrows()
        )));
    }
    let mut t = l.transpose();
    if !l0.tr_solve_lower_triangular_mut(&mut t) {
        return Err(Error::NotPositiveDefinite {
            index: (0..l0.nrows()).find(|&i| l0[(i, i)] == 0.0).unwrap_or(0),
            value: 0.0,
        });
    }
    // Entries below the diagonal are exact zeros in exact arithmetic.
    for j in 0..t.ncols() {
        for i in j + 1..t.nrows() {
            t[(i, j)] = 0.0;
        }
    }
    Ok(t)
}

/// Data-generated snapshots and the factors that produced them.
#[derive(Debug, Clone)]
pub struct LiftResult {
    pub lifted: SnapshotMatrix,
    pub transform: DMatrix<f64>,
    pub chol_true: DMatrix<f64>,
    pub chol_background: DMatrix<f64>,
}

/// `𝐔 = U₀ L₀^{-T} Lᵀ`.
pub fn lift_internal(
    u0: &SnapshotMatrix,
    m0: &mut GramianMatrix,
    m: &mut GramianMatrix,
) -> Result<LiftResult> {
    let n = u0.len();
    if m0.dim() != n || m.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} background snapshots, Gramians of size {} and {}",
            m0.dim(),
            m.dim()
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

/// `‖A - B‖_F / ‖B‖_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.norm();
    let diff = (a - b).norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub(crate) fn write_matrix_csv(a: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if j > 0 {
                    out.write_all(b",")?;
                }
                write!(out, "{:.15e}", a[(i, j)])?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        background_snapshots, evaluate_pulse, tuple_norm, Potential, PulseFamily, SpatialGrid,
        TimeSampling,
    };
    use crate::wave::{solve_fd, PotentialUpdate, SolverConfig};
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| {
            ((seed as f64 + 1.0) * (i as f64 * 1.7 + j as f64 * 0.31 + 0.2)).sin()
        });
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn cholesky_small_cases() {
        let l = cholesky_factor(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(l, DMatrix::identity(5, 5));
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = cholesky_factor(&a).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn cholesky_reports_offending_pivot() {
        // Eigenvalues 3 and -1; the second pivot is 1 - 4 = -3.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_factor(&a) {
            Err(Error::NotPositiveDefinite { index, value }) => {
                assert_eq!(index, 1);
                assert!((value + 3.0).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mass_from_data_layout() {
        let f = TransferSeries::new(1.0, vec![5.0, 3.0, 2.0, 1.0, 0.5]);
        let m = mass_from_data(&f, 3).unwrap();
        assert_eq!(m.entries()[(0, 0)], 5.0);
        assert_eq!(m.entries()[(1, 2)], 0.5 * (3.0 + 1.0));
        assert_eq!(m.entries()[(2, 2)], 0.5 * (5.0 + 0.5));
        assert!(matches!(
            mass_from_data(&f, 4),
            Err(Error::InsufficientData {
                required: 7,
                available: 5
            })
        ));
    }

    #[test]
    fn single_unit_column() {
        let grid = SpatialGrid::new(1.0, 100).unwrap();
        let u = SnapshotMatrix::from_columns(grid, 0.1, &[vec![1.0; 101]]).unwrap();
        let m = mass_from_snapshots(&u);
        assert!((m.entries()[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let mut m = GramianMatrix::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 2.0, 0.25, 9.0])),
            GramianSource::FromSnapshots,
        )
        .unwrap();
        assert!((m.min_eigenvalue_estimate().unwrap() - 0.25).abs() < 1e-9);
    }

    /// Step pulse and a localized potential at a small size, with Courant 1.
    fn step_case(q_amp: f64) -> (SnapshotMatrix, SnapshotMatrix, GramianMatrix) {
        let grid = SpatialGrid::new(12.0, 12 * 34).unwrap();
        let pulse = PulseFamily::step(0.5).unwrap();
        let sampling = TimeSampling::for_pulse(&pulse, 12).unwrap();
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let q = if q_amp == 0.0 {
            Potential::zero(&grid)
        } else {
            Potential::gaussian(&grid, q_amp, 2.0, 2.0).unwrap()
        };
        let cfg = SolverConfig::new(&grid, &sampling, 1.0)
            .unwrap()
            .with_potential_update(PotentialUpdate::Averaged);
        let res = solve_fd(&q, &g, &grid, &cfg).unwrap();
        let u0 = background_snapshots(&pulse, &sampling, &grid).unwrap();
        let m = mass_from_data(res.transfer.as_ref().unwrap(), 12).unwrap();
        (res.snapshots, u0, m)
    }

    #[test]
    fn lift_interpolates_gramian_and_norm() {
        let (_, u0, mut m) = step_case(1.0);
        let mut m0 = mass_from_snapshots(&u0);
        let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
        let back = mass_from_snapshots(&lift.lifted);
        assert!(relative_frobenius(back.entries(), m.entries()) < 1e-10);
        let norm = tuple_norm(&lift.lifted);
        assert!((norm / lift.chol_true.norm() - 1.0).abs() < 1e-10);
        for i in 0..12 {
            assert!(lift.transform[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(lift.transform[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn zero_potential_gives_identity_transform() {
        let (_, u0, mut m) = step_case(0.0);
        // Diagonal background Gramian (2/τ, 1/τ, ..., 1/τ).
        for k in 0..12 {
            let expected = if k == 0 { 4.0 } else { 2.0 };
            assert!((m.entries()[(k, k)] - expected).abs() < 1e-12);
        }
        let mut m0 = mass_from_snapshots(&u0);
        let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
        let eye = DMatrix::<f64>::identity(12, 12);
        assert!((&lift.transform - eye).amax() < 1e-12);
    }

    #[test]
    fn transform_is_unique() {
        // A second factorization path: nalgebra's own Cholesky.
        let (_, u0, mut m) = step_case(1.0);
        let mut m0 = mass_from_snapshots(&u0);
        let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
        let l = nalgebra::Cholesky::new(m.entries().clone()).unwrap().unpack();
        let l0 = nalgebra::Cholesky::new(m0.entries().clone()).unwrap().unpack();
        let t = l0.transpose().solve_upper_triangular(&l.transpose()).unwrap();
        assert!(relative_frobenius(&t, &lift.transform) < 1e-12);
    }

    proptest! {
        #[test]
        fn factor_reproduces_matrix(n in 1usize..30, seed in 0u64..1000) {
            let a = spd(n, seed);
            let mut g = GramianMatrix::new(a.clone(), GramianSource::FromSnapshots).unwrap();
            let l = cholesky(&mut g).unwrap();
            prop_assert!(relative_frobenius(&(&l * l.transpose()), &a) < 1e-12);
            for i in 0..n {
                prop_assert!(l[(i, i)] > 0.0);
                for j in i + 1..n {
                    prop_assert_eq!(l[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn symmetrized_on_construction(n in 1usize..12, seed in 0u64..1000) {
            let mut a = spd(n, seed);
            if n > 1 {
                a[(0, n - 1)] += 1e-3;
            }
            let g = GramianMatrix::new(a, GramianSource::FromData).unwrap();
            prop_assert_eq!(g.entries(), &g.entries().transpose());
        }

        #[test]
        fn lift_of_random_combinations(n in 2usize..10, seed in 0u64..500) {
            // U = U₀ C for a random upper-triangular C: the lift must recover U.
            let grid = SpatialGrid::new(10.0, 1000).unwrap();
            let pulse = PulseFamily::hat(0.5).unwrap();
            let sampling = TimeSampling::for_pulse(&pulse, n).unwrap();
            let u0 = background_snapshots(&pulse, &sampling, &grid).unwrap();
            let c = DMatrix::from_fn(n, n, |i, j| {
                if i > j { 0.0 } else if i == j { 1.0 + 0.5 * ((seed + i as u64) as f64).sin().abs() }
                else { 0.3 * ((seed as f64) * 0.7 + (i * n + j) as f64).cos() }
            });
            let u = u0.combine(&c).unwrap();
            let mut m = mass_from_snapshots(&u);
            let mut m0 = mass_from_snapshots(&u0);
            let lift = lift_internal(&u0, &mut m0, &mut m).unwrap();
            prop_assert!(relative_frobenius(&lift.transform, &c) < 1e-9);
            let back = mass_from_snapshots(&lift.lifted);
            prop_assert!(relative_frobenius(back.entries(), m.entries()) < 1e-8);
        }
    }
}
