//! Built-in configs, compiled into the binary from `presets/*.json`.

use crate::config::{Config, ConfigError};

pub struct Preset {
    pub name: &'static str,
    /// Subcommands the preset is written for.
    pub commands: &'static str,
    pub json: &'static str,
}

macro_rules! preset {
    ($name:literal, $commands:literal) => {
        Preset {
            name: $name,
            commands: $commands,
            json: include_str!(concat!("../presets/", $name, ".json")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("identity-1d", "verify-onb"),
    preset!("cantor4", "verify-onb"),
    preset!("middle-third", "verify-onb"),
    preset!("unipotent-sin", "verify-onb, tiling-check"),
    preset!("counterexample-exp", "verify-onb, tiling-check"),
    preset!("holhos-disc", "verify-onb, probe-injectivity"),
    preset!("square-phase", "verify-onb"),
    preset!("frame-half", "frame-bounds"),
    preset!("heisenberg", "repdisc"),
    preset!("poly2d", "repdisc"),
    preset!("axb", "repdisc"),
    preset!("shearlet", "repdisc"),
    preset!("lattice-density", "density"),
    preset!("lambda4-density", "density"),
    preset!("reconstruct-x", "reconstruct"),
    preset!("probe-digit", "probe-injectivity"),
];

pub fn load(name: &str) -> Result<Config, ConfigError> {
    let Some(p) = PRESETS.iter().find(|p| p.name == name) else {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        return Err(ConfigError(format!(
            "unknown preset '{name}'; available: {}",
            names.join(", ")
        )));
    };
    serde_json::from_str(p.json).map_err(|e| ConfigError(format!("preset {name}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_names_its_commands() {
        for p in PRESETS {
            let c = load(p.name).unwrap();
            let listed: Vec<&str> = p.commands.split(", ").collect();
            assert_eq!(
                c.commands
                    .as_deref()
                    .map(|v| v.iter().map(String::as_str).collect::<Vec<_>>()),
                Some(listed)
            );
            assert!(c.description.is_some(), "{}", p.name);
        }
    }
}
