use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Potential, PulseFamily, PulseKind, SpatialGrid, TimeSampling};
use crate::wave::{PotentialUpdate, SolverConfig, TransferSeries};

/// How the pulse width is derived from the final time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauRule {
    /// `τ = T/n` (hat) or `T/(n - 1/2)` (step) must already align with the grid.
    #[default]
    Exact,
    /// Round `τ` to the nearest admissible multiple of `h`; the final time follows.
    Snap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialShape {
    #[default]
    Zero,
    Gaussian,
    File,
}

/// One convergence study. Every key is flat; see `dump-config` for examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain_length: f64,
    pub cell_count: usize,
    pub pulse: PulseKind,
    pub final_time: f64,
    pub samples: Vec<usize>,
    #[serde(default = "default_courant")]
    pub courant_ratio: f64,
    #[serde(default)]
    pub potential_update: PotentialUpdate,
    #[serde(default)]
    pub tau_rule: TauRule,
    #[serde(default)]
    pub potential: PotentialShape,
    /// `amplitude · exp(-rate (x - center)²)`.
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub center: f64,
    /// Node values, one per line (`q` or `x,q`). Relative paths resolve
    /// against the directory of the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_file: Option<PathBuf>,
    /// Source positions; more than one makes the configuration a MIMO case.
    #[serde(default = "default_sources")]
    pub source_centers: Vec<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Round every reading of `F` to this many significant digits before use,
    /// modelling data recorded at finite precision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_digits: Option<u32>,
    /// Pulse width `oversample` times the sampling interval `final_time/n`.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_courant() -> f64 {
    0.5
}

fn default_sources() -> Vec<f64> {
    vec![0.0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_oversample() -> usize {
    1
}

/// Everything one run at a given `n` needs.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub n: usize,
    pub grid: SpatialGrid,
    pub pulse: PulseFamily,
    pub sampling: TimeSampling,
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if let (Some(file), Some(dir)) = (&cfg.potential_file, origin.parent()) {
            if file.is_relative() {
                cfg.potential_file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields serialize")
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.domain_length, self.cell_count)
    }

    /// Applies `data_digits` to recorded data.
    pub fn recorded(&self, f: &TransferSeries) -> TransferSeries {
        match self.data_digits {
            Some(d) => f.rounded(d),
            None => f.clone(),
        }
    }

    pub fn is_mimo(&self) -> bool {
        self.source_centers.len() > 1
    }

    pub fn potential(&self, grid: &SpatialGrid) -> Result<Potential> {
        match self.potential {
            PotentialShape::Zero => Ok(Potential::zero(grid)),
            PotentialShape::Gaussian => Potential::gaussian(grid, self.amplitude, self.rate, self.center),
            PotentialShape::File => {
                let path = self.potential_file.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("potential = \"file\" needs potential_file".into())
                })?;
                Potential::from_file(grid, path)
            }
        }
    }

    /// Pulse width for `n` snapshots under the configured rule. With
    /// oversampling the width is that many sampling intervals.
    pub fn pulse_for(&self, n: usize, grid: &SpatialGrid) -> Result<PulseFamily> {
        if n == 0 {
            return Err(Error::InvalidConfig("sample counts must be positive".into()));
        }
        let span = match self.pulse {
            PulseKind::Hat => n as f64,
            PulseKind::Step => n as f64 - 0.5,
        };
        let raw = self.final_time / span * self.oversample.max(1) as f64;
        let tau = match self.tau_rule {
            TauRule::Exact => raw,
            TauRule::Snap => {
                let h = grid.step();
                let cells = raw / h;
                let mut k = cells.round().max(1.0) as usize;
                if self.pulse == PulseKind::Step && k.is_multiple_of(2) {
                    k = if cells >= k as f64 { k + 1 } else { k - 1 };
                }
                k.max(2) as f64 * h
            }
        };
        let pulse = PulseFamily::new(self.pulse, tau)?;
        pulse.check_resolution(grid)?;
        Ok(pulse)
    }

    pub fn setup(&self, n: usize) -> Result<RunSetup> {
        let grid = self.grid()?;
        let pulse = self.pulse_for(n, &grid)?;
        let sampling = TimeSampling::oversampled(&pulse, n, self.oversample)?;
        sampling.validate(&pulse, &grid)?;
        let solver = SolverConfig::new(&grid, &sampling, self.courant_ratio)?
            .with_potential_update(self.potential_update);
        Ok(RunSetup {
            n,
            grid,
            pulse,
            sampling,
            solver,
        })
    }

    /// Checks every sample count without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::InvalidConfig("name must not be empty".into()));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidConfig("samples must list at least one n".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "final_time must be positive, got {}",
                self.final_time
            )));
        }
        if self.oversample == 0 {
            return Err(Error::InvalidConfig("oversample must be at least 1".into()));
        }
        if self.data_digits == Some(0) {
            return Err(Error::InvalidConfig("data_digits must be at least 1".into()));
        }
        if self.source_centers.is_empty() {
            return Err(Error::InvalidConfig("source_centers must not be empty".into()));
        }
        let grid = self.grid()?;
        self.potential(&grid)?;
        for &n in &self.samples {
            self.setup(n)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hat() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
name = "t"
domain_length = 20.0
cell_count = 1280
pulse = "hat"
final_time = 8.0
samples = [16, 32]
potential = "gaussian"
amplitude = 0.5
rate = 1.0
center = 4.0
"#,
            Path::new("t.toml"),
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = hat();
        assert_eq!(cfg.courant_ratio, 0.5);
        assert_eq!(cfg.tau_rule, TauRule::Exact);
        assert_eq!(cfg.source_centers, vec![0.0]);
        cfg.validate().unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml(), Path::new("t.toml")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn exact_rule_rejects_misaligned_width() {
        let mut cfg = hat();
        cfg.samples = vec![15];
        assert!(cfg.validate().is_err());
        cfg.tau_rule = TauRule::Snap;
        cfg.validate().unwrap();
    }

    #[test]
    fn snapped_step_width_is_an_odd_multiple() {
        let mut cfg = hat();
        cfg.pulse = PulseKind::Step;
        cfg.tau_rule = TauRule::Snap;
        let grid = cfg.grid().unwrap();
        for n in [7, 16, 33] {
            let p = cfg.pulse_for(n, &grid).unwrap();
            let k = (p.tau / grid.step()).round() as usize;
            assert_eq!(k % 2, 1);
            assert!((p.tau - 8.0 / (n as f64 - 0.5)).abs() <= grid.step());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("name = \"x\"\nbogus = 1\n", Path::new("c.toml"));
        assert!(matches!(err, Err(Error::Parse { .. })));
    }
}
