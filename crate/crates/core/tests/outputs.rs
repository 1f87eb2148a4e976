use std::fs;
use std::path::Path;

use romlift::harness::{emit_outputs, preset, run_experiment, CONVERGENCE_HEADER};
use tempfile::TempDir;

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

/// Every data field is in scientific notation with at least 12 significant digits.
fn check_numeric_csv(path: &Path, header: &str, rows: usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header), "{}", path.display());
    let width = header.split(',').count();
    let mut count = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), width, "{line}");
        for (k, f) in fields.iter().enumerate() {
            if k == 0 && header.starts_with("n,") {
                f.parse::<usize>().unwrap();
                continue;
            }
            let (mantissa, exponent) = f.split_once('e').unwrap_or_else(|| panic!("{f} is not scientific"));
            exponent.parse::<i32>().unwrap();
            let digits = mantissa.chars().filter(char::is_ascii_digit).count();
            assert!(digits >= 12, "{f} has {digits} digits");
            assert!(f.parse::<f64>().unwrap().is_finite());
        }
        count += 1;
    }
    assert_eq!(count, rows, "{}", path.display());
}

#[test]
fn outputs_are_deterministic_and_well_formed() {
    let cfg = preset("hat-desk").unwrap();
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    emit_outputs(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
    emit_outputs(&run_experiment(&cfg).unwrap(), b.path()).unwrap();

    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    for name in &names {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }

    let nodes = cfg.cell_count + 1;
    check_numeric_csv(&a.path().join("convergence.csv"), CONVERGENCE_HEADER, cfg.samples.len());
    for &n in &cfg.samples {
        check_numeric_csv(
            &a.path().join(format!("snapshots_n{n}.csv")),
            "x,reconstructed,true,background,causal_projection",
            nodes,
        );
        check_numeric_csv(&a.path().join(format!("error_profile_n{n}.csv")), "x,error,normalized_error", nodes);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join(format!("bound_report_n{n}.json"))).unwrap()).unwrap();
        assert_eq!(report["n"], n);
        for key in ["tau", "eps", "kappa", "lift_error", "best_error", "bound_lhs", "bound_rhs", "max_diag_ratio"] {
            assert!(report[key].is_number(), "{key}");
        }
    }

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["name"], "hat-desk");
    assert!(summary["lift_rate"]["slope"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["runs"].as_array().unwrap().len(), cfg.samples.len());
}

#[test]
fn snapshot_columns_are_consistent_with_the_error_profile() {
    let cfg = preset("zero-desk").unwrap();
    let dir = TempDir::new().unwrap();
    emit_outputs(&run_experiment(&cfg).unwrap(), dir.path()).unwrap();
    let parse = |name: &str| -> Vec<Vec<f64>> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
            .collect()
    };
    let snaps = parse("snapshots_n16.csv");
    let profile = parse("error_profile_n16.csv");
    for (s, p) in snaps.iter().zip(&profile) {
        assert_eq!(s[0], p[0]);
        assert!((p[1] - (s[1] - s[2])).abs() <= 1e-14 * (1.0 + s[2].abs()));
    }
}
