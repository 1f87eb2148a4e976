//! Two sources in one dimension: block Gramian from the response matrices,
//! block Cholesky lift, and the interpolation identity.
use romlift::gramian::relative_frobenius;
use romlift::mimo::{block_lift_internal, block_mass_from_data, block_mass_from_snapshots, multi_background, multi_forward};
use romlift::prelude::*;

fn main() -> Result<()> {
    let grid = SpatialGrid::new(48.0, 768)?;
    let pulse = PulseFamily::hat(0.5)?;
    let n = 20;
    let sampling = TimeSampling::for_pulse(&pulse, n)?;
    let centers = [0.0, 20.0];
    let q = Potential::gaussian(&grid, 0.5, 0.5, 10.0)?;
    let cfg = SolverConfig::new(&grid, &sampling, 0.5)?;

    let (truth, responses) = multi_forward(&q, &pulse, &grid, &cfg, &centers)?;
    println!("F(0) =\n{:.6}", responses.values[0]);
    let mut m = block_mass_from_data(&responses, n, 1e-8)?;
    let u0 = multi_background(&pulse, &sampling, &grid, &centers)?;
    let mut m0 = block_mass_from_snapshots(&u0, centers.len())?;
    let lift = block_lift_internal(&u0, &mut m0, &mut m)?;

    let back = block_mass_from_snapshots(&lift.lifted, centers.len())?;
    println!("interpolation defect {:.2e}", relative_frobenius(back.entries(), m.entries()));
    let err = tuple_norm(&lift.lifted.difference(&truth)?) / tuple_norm(&truth);
    println!("relative lift error {err:.4e}");
    Ok(())
}
