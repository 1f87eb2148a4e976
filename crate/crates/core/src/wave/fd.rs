use crate::error::{Error, Result};
use crate::model::{weighted_dot, Potential, SnapshotMatrix, SpatialGrid};

use super::{ForwardResult, PotentialUpdate, SolverConfig, TransferSeries};

/// Leapfrog solve with the receiver equal to the initial pulse.
pub fn solve_fd(
    q: &Potential,
    g: &[f64],
    grid: &SpatialGrid,
    cfg: &SolverConfig,
) -> Result<ForwardResult> {
    let (snapshots, mut series, energy) = solve_fd_receivers(q, g, &[g], grid, cfg)?;
    Ok(ForwardResult {
        snapshots,
        transfer: series.pop(),
        energy,
    })
}

/// Leapfrog solve from `init`, reading `∫ r u(·, kτ)` for every receiver `r`.
///
/// Returns the snapshots, one series per receiver (empty when boundary
/// recording is off) and the energy log.
#[allow(clippy::type_complexity)]
pub fn solve_fd_receivers(
    q: &Potential,
    init: &[f64],
    receivers: &[&[f64]],
    grid: &SpatialGrid,
    cfg: &SolverConfig,
) -> Result<(SnapshotMatrix, Vec<TransferSeries>, Vec<(f64, f64)>)> {
    let m = grid.node_count();
    if init.len() != m || q.values().len() != m || receivers.iter().any(|r| r.len() != m) {
        return Err(Error::GridMismatch(format!(
            "grid has {m} nodes; initial data, potential or receiver do not"
        )));
    }
    if cfg.courant_ratio > 1.0 + 1e-12 {
        return Err(Error::CflViolation {
            ratio: cfg.courant_ratio,
        });
    }
    let last_snapshot = (cfg.n - 1) as f64 * cfg.tau;
    if last_snapshot >= grid.domain_length() {
        return Err(Error::InvalidConfig(format!(
            "last snapshot time {last_snapshot} is not below the domain length {}",
            grid.domain_length()
        )));
    }

    let nmax = m - 1;
    let r2 = cfg.courant_ratio * cfg.courant_ratio;
    let dt2 = cfg.dt * cfg.dt;
    // next_i = a_i u_i + b_i (u_{i-1} + u_{i+1}) - prev_i
    let (a, b): (Vec<f64>, Vec<f64>) = q
        .values()
        .iter()
        .map(|&qi| match cfg.potential_update {
            PotentialUpdate::Explicit => (2.0 - 2.0 * r2 - dt2 * qi, r2),
            PotentialUpdate::Averaged => {
                let d = 1.0 / (1.0 + 0.5 * dt2 * qi);
                (d * (2.0 - 2.0 * r2), d * r2)
            }
        })
        .unzip();

    let s = cfg.steps_per_sample();
    let samples = cfg.sample_count();
    let total_steps = (samples - 1) * s;
    let snapshot_steps = (cfg.n - 1) * s;

    // Supports grow by one node per step. Once the last snapshot is taken only
    // nodes that can still reach a receiver before the final step matter.
    let init_end = last_nonzero(init).unwrap_or(0);
    let recv_ranges: Vec<(usize, usize)> = receivers
        .iter()
        .map(|r| {
            let lo = r.iter().position(|&v| v != 0.0).unwrap_or(0);
            (lo, last_nonzero(r).unwrap_or(0))
        })
        .collect();
    let recv_end = recv_ranges.iter().map(|r| r.1).max().unwrap_or(0);
    let active = |step: usize| -> usize {
        let grow = init_end + step;
        let limit = if cfg.track_energy || step <= snapshot_steps || !cfg.record_boundary {
            usize::MAX
        } else {
            recv_end + (total_steps - step)
        };
        grow.min(limit).min(nmax)
    };

    let mut snapshots = SnapshotMatrix::zeros(*grid, cfg.tau, cfg.n);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); receivers.len()];
    let mut energy = Vec::new();
    let mut record = |k: usize, u: &[f64], snapshots: &mut SnapshotMatrix| {
        if k < cfg.n {
            snapshots.column_mut(k).copy_from_slice(u);
        }
        if cfg.record_boundary {
            for ((r, &(lo, hi)), out) in receivers.iter().zip(&recv_ranges).zip(&mut series) {
                out.push(partial_dot(r, u, lo, hi, grid));
            }
        }
    };

    let mut prev = init.to_vec();
    record(0, &prev, &mut snapshots);
    if total_steps == 0 {
        return Ok((snapshots, finish(series, cfg.tau), energy));
    }

    // Taylor startup encoding u_t(0) = 0: half of one leapfrog step with u^{-1} = u^1.
    let mut cur = vec![0.0; m];
    let hi = active(1);
    stencil(&a, &b, &prev, None, &mut cur, hi, nmax);
    for v in &mut cur[..=hi] {
        *v *= 0.5;
    }
    let mut next = vec![0.0; m];

    if cfg.track_energy {
        energy.push((0.5 * cfg.dt, discrete_energy(q, &prev, &cur, grid, cfg)));
    }
    if s == 1 {
        record(1, &cur, &mut snapshots);
    }
    for step in 1..total_steps {
        let hi = active(step + 1);
        stencil(&a, &b, &cur, Some(&prev), &mut next, hi, nmax);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        let now = step + 1;
        if now % s == 0 {
            record(now / s, &cur, &mut snapshots);
            if cfg.track_energy {
                let t = (now as f64 - 0.5) * cfg.dt;
                energy.push((t, discrete_energy(q, &prev, &cur, grid, cfg)));
            }
        }
    }
    Ok((snapshots, finish(series, cfg.tau), energy))
}

fn finish(series: Vec<Vec<f64>>, tau: f64) -> Vec<TransferSeries> {
    series
        .into_iter()
        .filter(|v| !v.is_empty())
        .map(|v| TransferSeries::new(tau, v))
        .collect()
}

fn last_nonzero(v: &[f64]) -> Option<usize> {
    v.iter().rposition(|&x| x != 0.0)
}

fn partial_dot(r: &[f64], u: &[f64], lo: usize, hi: usize, grid: &SpatialGrid) -> f64 {
    let n = grid.cell_count();
    let h = grid.step();
    let mut sum = 0.0;
    for i in lo..=hi {
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        sum += w * r[i] * u[i];
    }
    sum
}

/// Writes nodes `0..=hi` of `out = a∘u + b∘(shifted sums) - prev`.
fn stencil(
    a: &[f64],
    b: &[f64],
    u: &[f64],
    prev: Option<&[f64]>,
    out: &mut [f64],
    hi: usize,
    nmax: usize,
) {
    let p = |i: usize| prev.map_or(0.0, |p| p[i]);
    if nmax == 0 {
        out[0] = a[0] * u[0] - p(0);
        return;
    }
    out[0] = a[0] * u[0] + 2.0 * b[0] * u[1] - p(0);
    let end = hi.min(nmax - 1);
    if end >= 1 {
        let body = &mut out[1..=end];
        let win = u[..=end + 1].windows(3);
        match prev {
            Some(prev) => {
                for ((((o, w), ai), bi), pi) in body
                    .iter_mut()
                    .zip(win)
                    .zip(&a[1..=end])
                    .zip(&b[1..=end])
                    .zip(&prev[1..=end])
                {
                    *o = ai * w[1] + bi * (w[0] + w[2]) - pi;
                }
            }
            None => {
                for (((o, w), ai), bi) in body.iter_mut().zip(win).zip(&a[1..=end]).zip(&b[1..=end])
                {
                    *o = ai * w[1] + bi * (w[0] + w[2]);
                }
            }
        }
    }
    if hi == nmax {
        out[nmax] = a[nmax] * u[nmax] + 2.0 * b[nmax] * u[nmax - 1] - p(nmax);
    }
}

/// `⟨D v, v⟩ + ⟨A u^{m+1}, u^m⟩` with `v = (u^{m+1} - u^m)/Δt`, `A = -D₂ + q`
/// and `D = I` (explicit) or `I + Δt² q / 2` (averaged). Conserved exactly by the
/// scheme in exact arithmetic.
fn discrete_energy(
    q: &Potential,
    old: &[f64],
    new: &[f64],
    grid: &SpatialGrid,
    cfg: &SolverConfig,
) -> f64 {
    let dt = cfg.dt;
    let h2 = grid.step() * grid.step();
    let nmax = old.len() - 1;
    let qv = q.values();
    let v: Vec<f64> = new.iter().zip(old).map(|(a, b)| (a - b) / dt).collect();
    let dv: Vec<f64> = match cfg.potential_update {
        PotentialUpdate::Explicit => v.clone(),
        PotentialUpdate::Averaged => v
            .iter()
            .zip(qv)
            .map(|(vi, qi)| vi * (1.0 + 0.5 * dt * dt * qi))
            .collect(),
    };
    let au: Vec<f64> = (0..=nmax)
        .map(|i| {
            let lap = if nmax == 0 {
                0.0
            } else if i == 0 {
                2.0 * (new[1] - new[0])
            } else if i == nmax {
                2.0 * (new[nmax - 1] - new[nmax])
            } else {
                new[i - 1] - 2.0 * new[i] + new[i + 1]
            };
            -lap / h2 + qv[i] * new[i]
        })
        .collect();
    weighted_dot(&dv, &v, grid) + weighted_dot(&au, old, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        background_snapshots, evaluate_pulse, tuple_norm, PulseFamily, TimeSampling,
    };

    fn hat_setup(l: f64, cells: usize, tau: f64, n: usize) -> (SpatialGrid, PulseFamily, TimeSampling) {
        let grid = SpatialGrid::new(l, cells).unwrap();
        let pulse = PulseFamily::hat(tau).unwrap();
        let sampling = TimeSampling::for_pulse(&pulse, n).unwrap();
        (grid, pulse, sampling)
    }

    #[test]
    fn zero_potential_matches_background_at_half_courant() {
        let (grid, pulse, sampling) = hat_setup(200.0, 9600, 2.0, 20);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 0.5).unwrap();
        let res = solve_fd(&Potential::zero(&grid), &g, &grid, &cfg).unwrap();
        let u0 = background_snapshots(&pulse, &sampling, &grid).unwrap();
        let rel = tuple_norm(&res.snapshots.difference(&u0).unwrap()) / tuple_norm(&u0);
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn zero_potential_is_exact_at_unit_courant() {
        let (grid, pulse, sampling) = hat_setup(20.0, 400, 0.5, 12);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 1.0).unwrap();
        let res = solve_fd(&Potential::zero(&grid), &g, &grid, &cfg).unwrap();
        let u0 = background_snapshots(&pulse, &sampling, &grid).unwrap();
        let diff = res.snapshots.difference(&u0).unwrap();
        assert!(tuple_norm(&diff) < 1e-12 * tuple_norm(&u0));
    }

    #[test]
    fn transfer_vanishes_once_pulse_leaves() {
        let (grid, pulse, sampling) = hat_setup(20.0, 400, 0.5, 10);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 1.0).unwrap();
        let res = solve_fd(&Potential::zero(&grid), &g, &grid, &cfg).unwrap();
        let f = super::super::sample_transfer(&res).unwrap();
        assert_eq!(f.len(), 19);
        // Trapezoid rule on the squared hat: 4/(3τ) + 2h²/(3τ³).
        let (tau, h) = (0.5_f64, grid.step());
        let exact = 4.0 / (3.0 * tau) + 2.0 * h * h / (3.0 * tau.powi(3));
        assert!((f.values[0] - exact).abs() < 1e-12, "{} vs {exact}", f.values[0]);
        assert!(f.values[2..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn step_transfer_at_zero_is_two_over_tau() {
        let grid = SpatialGrid::new(10.0, 1020).unwrap();
        let pulse = PulseFamily::step(0.5).unwrap();
        let sampling = TimeSampling::for_pulse(&pulse, 6).unwrap();
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 1.0).unwrap();
        let res = solve_fd(&Potential::zero(&grid), &g, &grid, &cfg).unwrap();
        let f = res.transfer.unwrap();
        assert!((f.values[0] - 4.0).abs() < 1e-12);
        assert!(f.values[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn energy_is_conserved() {
        let (grid, pulse, sampling) = hat_setup(40.0, 960, 1.0, 12);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let q = Potential::gaussian(&grid, 0.3, 0.04, 10.0).unwrap();
        for (ratio, update) in [
            (0.5, PotentialUpdate::Explicit),
            (1.0, PotentialUpdate::Averaged),
        ] {
            let cfg = SolverConfig::new(&grid, &sampling, ratio)
                .unwrap()
                .with_potential_update(update)
                .with_energy(true);
            let res = solve_fd(&q, &g, &grid, &cfg).unwrap();
            let e0 = res.energy[0].1;
            let drift = res
                .energy
                .iter()
                .map(|(_, e)| ((e - e0) / e0).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-10, "{update:?}: drift {drift}");
        }
    }

    #[test]
    fn active_region_does_not_change_results() {
        let (grid, pulse, sampling) = hat_setup(40.0, 960, 1.0, 12);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let q = Potential::gaussian(&grid, 0.3, 0.04, 10.0).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 0.5).unwrap();
        let fast = solve_fd(&q, &g, &grid, &cfg).unwrap();
        // Energy tracking forces the full domain on every step.
        let full = solve_fd(&q, &g, &grid, &cfg.clone().with_energy(true)).unwrap();
        assert_eq!(fast.snapshots, full.snapshots);
        assert_eq!(fast.transfer, full.transfer);
    }

    #[test]
    fn rejects_bad_configs() {
        let grid = SpatialGrid::new(10.0, 100).unwrap();
        let pulse = PulseFamily::hat(0.5).unwrap();
        let sampling = TimeSampling::for_pulse(&pulse, 4).unwrap();
        assert!(matches!(
            SolverConfig::new(&grid, &sampling, 1.5),
            Err(Error::CflViolation { .. })
        ));
        assert!(matches!(
            SolverConfig::new(&grid, &sampling, 0.3),
            Err(Error::SampleTimeMisaligned { .. })
        ));
    }

    #[test]
    fn causality() {
        let (grid, pulse, sampling) = hat_setup(40.0, 960, 1.0, 10);
        let g = evaluate_pulse(&pulse, &grid).unwrap();
        let q = Potential::gaussian(&grid, 0.3, 0.5, 20.0).unwrap();
        let cfg = SolverConfig::new(&grid, &sampling, 1.0)
            .unwrap()
            .with_potential_update(PotentialUpdate::Averaged);
        let res = solve_fd(&q, &g, &grid, &cfg).unwrap();
        for k in 0..10 {
            let front = k as f64 * sampling.tau + pulse.radius();
            for (x, v) in grid.nodes().iter().zip(res.snapshots.column(k)) {
                if *x > front + 1e-9 {
                    assert!(v.abs() < 1e-12, "k = {k}, x = {x}, u = {v}");
                }
            }
        }
    }
}
