//! Leapfrog against the spectral solution of the same semi-discrete problem.
//!
//! A smooth datum shows the second-order time error. The hat pulse, with its
//! kinks, converges at roughly first order over long times.
use romlift::prelude::*;

fn error(q: &Potential, g: &[f64], grid: &SpatialGrid, exact: &SnapshotMatrix, t: f64, courant: f64) -> Result<f64> {
    let cfg = SolverConfig::with_samples(grid, t, 2, courant)?.with_record_boundary(false);
    let res = solve_fd(q, g, grid, &cfg)?;
    let d: Vec<f64> = res.snapshots.column(1).iter().zip(exact.column(0)).map(|(a, b)| a - b).collect();
    Ok(inner_product(&d, &d, grid)?.sqrt())
}

fn main() -> Result<()> {
    let grid = SpatialGrid::new(60.0, 1440)?;
    let q = Potential::gaussian(&grid, 0.3, 0.04, 20.0)?;
    let t = 15.0;
    let smooth: Vec<f64> = grid.nodes().iter().map(|x| (-x * x).exp()).collect();
    let hat = evaluate_pulse(&PulseFamily::hat(1.0)?, &grid)?;
    for (label, g) in [("gaussian", &smooth), ("hat", &hat)] {
        let exact = spectral_oracle(&q, g, &grid, &[t])?;
        let e1 = error(&q, g, &grid, &exact, t, 0.5)?;
        let e2 = error(&q, g, &grid, &exact, t, 0.25)?;
        println!("{label:>8}: error {e1:.4e} -> {e2:.4e}, ratio {:.3}", e1 / e2);
    }
    Ok(())
}
