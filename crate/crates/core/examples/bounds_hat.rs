//! Hat pulse: the full bound report as JSON.
use romlift::prelude::*;

fn main() -> Result<()> {
    let grid = SpatialGrid::new(16.0, 16 * 64)?;
    let pulse = PulseFamily::hat(0.25)?;
    let n = 32;
    let sampling = TimeSampling::for_pulse(&pulse, n)?;
    let q = Potential::gaussian(&grid, 0.3, 0.5, 4.0)?;
    let g = evaluate_pulse(&pulse, &grid)?;
    let cfg = SolverConfig::new(&grid, &sampling, 1.0)?.with_potential_update(PotentialUpdate::Averaged);
    let truth = solve_fd(&q, &g, &grid, &cfg)?;

    let mut m = mass_from_data(truth.transfer.as_ref().expect("recorded"), n)?;
    let u0 = background_snapshots(&pulse, &sampling, &grid)?;
    let mut m0 = mass_from_snapshots(&u0);
    let lift = lift_internal(&u0, &mut m0, &mut m)?;
    let report = evaluate_bounds(&truth.snapshots, &u0, &lift)?;
    println!("{}", report.to_json());
    eprintln!(
        "lift {:.4e}, best {:.4e}, lift vs projection {:.4e} (per sqrt n)",
        report.bound_lhs,
        report.best_error / (n as f64).sqrt(),
        report.lift_vs_projection / (n as f64).sqrt()
    );
    Ok(())
}
