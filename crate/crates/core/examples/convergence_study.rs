//! Runs a preset study (default `hat-desk`) and prints the convergence table.
//! Pass an output directory as the second argument to write the artifacts.
use romlift::harness::{emit_outputs, preset, run_experiment};

fn main() -> romlift::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "hat-desk".into());
    let cfg = preset(&name)?;
    let study = run_experiment(&cfg)?;
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "n", "tau", "lift", "best", "diag ratio");
    for r in &study.record.rows {
        println!(
            "{:>5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            r.n, r.tau, r.lift_error, r.best_error, r.max_diag_ratio
        );
    }
    if let Some(fit) = &study.record.lift_rate {
        println!("slope {:.4}, halving ratios {:?}", fit.slope, fit.ratios);
    }
    if let Some(dir) = args.next() {
        for path in emit_outputs(&study, dir.as_ref())? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
