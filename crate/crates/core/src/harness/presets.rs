use std::path::Path;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

const PRESETS: &[(&str, &str)] = &[
    ("paper-sec8", include_str!("../../presets/paper-sec8.toml")),
    ("paper-sec8-desk", include_str!("../../presets/paper-sec8-desk.toml")),
    ("step-desk", include_str!("../../presets/step-desk.toml")),
    ("hat-desk", include_str!("../../presets/hat-desk.toml")),
    ("zero-desk", include_str!("../../presets/zero-desk.toml")),
    ("mimo-desk", include_str!("../../presets/mimo-desk.toml")),
    ("oversampled", include_str!("../../presets/oversampled.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

/// The shipped TOML text of a preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown preset {name:?}; available: {}",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ExperimentConfig::from_toml(text, Path::new(name))
}
