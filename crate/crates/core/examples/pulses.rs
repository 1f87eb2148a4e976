//! Step and hat pulses on a grid, and the Gramians of their background snapshots.
use romlift::prelude::*;

fn main() -> Result<()> {
    let grid = SpatialGrid::new(10.0, 1020)?;
    for pulse in [PulseFamily::step(0.5)?, PulseFamily::hat(0.5)?] {
        let g = evaluate_pulse(&pulse, &grid)?;
        let ones = vec![1.0; grid.node_count()];
        println!(
            "{:>4}: tau = {}, integral = {:.12}, |g|^2 = {:.12}",
            pulse.kind,
            pulse.tau,
            inner_product(&g, &ones, &grid)?,
            inner_product(&g, &g, &grid)?
        );
        let sampling = TimeSampling::for_pulse(&pulse, 6)?;
        let u0 = background_snapshots(&pulse, &sampling, &grid)?;
        let m0 = mass_from_snapshots(&u0);
        // Scaled so that the hat gives (1, 4, 1) in the interior.
        let scaled = m0.entries() * (6.0 * pulse.tau);
        println!("6 tau M0 =\n{scaled:.4}");
    }
    Ok(())
}
