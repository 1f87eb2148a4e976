//! Step pulse: lift the background snapshots with data alone and compare
//! against the simulated internal field.
use romlift::prelude::*;

fn main() -> Result<()> {
    // tau / h = 35 is odd, so the jumps sit at cell midpoints.
    let grid = SpatialGrid::new(16.0, 16 * 70)?;
    let pulse = PulseFamily::step(0.5)?;
    let n = 16;
    let sampling = TimeSampling::for_pulse(&pulse, n)?;
    let q = Potential::gaussian(&grid, 1.0, 0.5, 3.0)?;
    let g = evaluate_pulse(&pulse, &grid)?;
    let cfg = SolverConfig::new(&grid, &sampling, 1.0)?.with_potential_update(PotentialUpdate::Averaged);
    let truth = solve_fd(&q, &g, &grid, &cfg)?;

    let mut m = mass_from_data(truth.transfer.as_ref().expect("recorded"), n)?;
    let u0 = background_snapshots(&pulse, &sampling, &grid)?;
    let mut m0 = mass_from_snapshots(&u0);
    let lift = lift_internal(&u0, &mut m0, &mut m)?;

    println!(" k   T_kk        |lift_k - u_k| / |u_k|");
    for k in 0..n {
        let d: Vec<f64> = lift.lifted.column(k).iter().zip(truth.snapshots.column(k)).map(|(a, b)| a - b).collect();
        let rel = inner_product(&d, &d, &grid)?.sqrt() / inner_product(truth.snapshots.column(k), truth.snapshots.column(k), &grid)?.sqrt();
        println!("{k:2}   {:.6}   {rel:.3e}", lift.transform[(k, k)]);
    }
    let back = mass_from_snapshots(&lift.lifted);
    println!(
        "Gramian of the lift vs data: {:.2e}",
        romlift::gramian::relative_frobenius(back.entries(), m.entries())
    );
    Ok(())
}
