//! Symmetric tridiagonal eigenpairs by Sturm bisection and inverse iteration.
//!
//! Only what the spectral oracle needs: eigenvalues one at a time, each with a
//! unit eigenvector, in `O(n)` memory per pair.

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len(), "off-diagonal must have n - 1 entries");
        Self { d, e }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut p = 0.0_f64;
        for i in 0..self.len() {
            p = if i == 0 {
                self.d[0] - x
            } else {
                self.d[i] - x - self.e[i - 1] * self.e[i - 1] / p
            };
            // A zero pivot is nudged to the negative side and counted there.
            if p.abs() < tiny {
                p = -tiny;
            }
            if p < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let tol = 4.0 * f64::EPSILON * scale;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[cfg(test)]
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.eigenvalue(k)).collect()
    }

    /// Unit eigenvector for the (accurate) eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return vec![1.0];
        }
        let (lo, hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let lu = ShiftedLu::new(self, lambda, f64::EPSILON * scale);
        // A start vector with no special structure.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
            .collect();
        for _ in 0..3 {
            lu.solve(&mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
        }
        x
    }
}

/// LU factorization of `T - λI` with partial pivoting (two super-diagonals of U).
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(t: &SymTridiagonal, lambda: f64, floor: f64) -> Self {
        let n = t.len();
        let mut diag: Vec<f64> = t.d.iter().map(|d| d - lambda).collect();
        let mut upper = t.e.clone();
        let mut lower = t.e.clone();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n - 1];
        let mut swapped = vec![false; n - 1];
        for i in 0..n - 1 {
            if diag[i].abs() >= lower[i].abs() {
                if diag[i].abs() < floor {
                    diag[i] = floor;
                }
                let f = lower[i] / diag[i];
                l[i] = f;
                diag[i + 1] -= f * upper[i];
            } else {
                // Swap rows i and i+1.
                swapped[i] = true;
                let f = diag[i] / lower[i];
                l[i] = f;
                diag[i] = lower[i];
                let old_upper = upper[i];
                upper[i] = diag[i + 1];
                diag[i + 1] = old_upper - f * upper[i];
                if i + 1 < n - 1 {
                    u2[i] = upper[i + 1];
                    upper[i + 1] *= -f;
                }
            }
            lower[i] = 0.0;
        }
        if diag[n - 1].abs() < floor {
            diag[n - 1] = floor;
        }
        Self {
            u0: diag,
            u1: upper,
            u2,
            l,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        x[n - 1] /= self.u0[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.u1[n - 2] * x[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.u1[i] * x[i + 1] - self.u2[i] * x[i + 2]) / self.u0[i];
        }
    }
}
