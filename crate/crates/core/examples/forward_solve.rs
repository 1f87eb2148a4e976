//! Leapfrog solve with a Gaussian potential: transfer samples and energy drift.
use romlift::prelude::*;

fn main() -> Result<()> {
    let grid = SpatialGrid::new(40.0, 2560)?;
    let pulse = PulseFamily::hat(1.0)?;
    let sampling = TimeSampling::for_pulse(&pulse, 12)?;
    let q = Potential::gaussian(&grid, 0.3, 0.04, 14.0)?;
    let g = evaluate_pulse(&pulse, &grid)?;
    let cfg = SolverConfig::new(&grid, &sampling, 0.5)?.with_energy(true);
    let res = solve_fd(&q, &g, &grid, &cfg)?;

    let f = res.transfer.as_ref().expect("recorded by default");
    println!("  t          F(t)");
    for (k, v) in f.values.iter().enumerate() {
        println!("{:5.1}  {v:+.6e}", k as f64 * f.tau);
    }
    let e0 = res.energy.first().map_or(0.0, |e| e.1);
    let drift = res.energy.iter().map(|e| (e.1 - e0).abs()).fold(0.0, f64::max);
    println!("energy {e0:.10e}, max drift {drift:.2e}");

    if let Some(path) = std::env::args().nth(1) {
        romlift::wave::write_snapshots_csv(&res.snapshots, std::path::Path::new(&path))?;
        println!("snapshots written to {path}");
    }
    Ok(())
}
