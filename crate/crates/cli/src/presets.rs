//! Built-in configurations. Each preset is embedded at compile time, so
//! the binary reproduces the canonical scenarios anywhere; `--config`
//! accepts either a file path or one of these names.

/// Which subcommand a preset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Run,
    Sweep,
    Budget,
}

impl PresetKind {
    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::Run => "run",
            PresetKind::Sweep => "sweep",
            PresetKind::Budget => "budget",
        }
    }
}

/// A named, embedded config.
pub struct Preset {
    pub name: &'static str,
    pub kind: PresetKind,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "eigen-sweep",
        kind: PresetKind::Sweep,
        description: "closed-form mode map: relaxation and frequency vs exchange rate at |<F>| = 0.48",
        text: include_str!("../presets/eigen-sweep.toml"),
    },
    Preset {
        name: "coherence-revival",
        kind: PresetKind::Run,
        description: "100 identical atoms at gamma/omega = 100: collapse and slow synchronized revival",
        text: include_str!("../presets/coherence-revival.toml"),
    },
    Preset {
        name: "sync-strong",
        kind: PresetKind::Run,
        description: "sampled tilts and 2% frequency spread at gamma/omega = 100: spins synchronize",
        text: include_str!("../presets/sync-strong.toml"),
    },
    Preset {
        name: "sync-weak",
        kind: PresetKind::Run,
        description: "the same ensemble at gamma/omega = 0.01: spins stay unsynchronized",
        text: include_str!("../presets/sync-weak.toml"),
    },
    Preset {
        name: "isotope-grid",
        kind: PresetKind::Sweep,
        description: "density-matrix engine, I = 3/2: collective frequency vs prepared polarization",
        text: include_str!("../presets/isotope-grid.toml"),
    },
    Preset {
        name: "budget",
        kind: PresetKind::Budget,
        description: "vapor design point: relaxation budget, polarization, pulse geometry",
        text: include_str!("../presets/budget.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Resolve a `--config` argument: an existing file path wins, otherwise a
/// preset name. Returns the text and the preset kind when one was used.
pub fn load_config_text(arg: &str) -> Result<(String, Option<PresetKind>), String> {
    let path = std::path::Path::new(arg);
    if path.exists() {
        return std::fs::read_to_string(path)
            .map(|t| (t, None))
            .map_err(|e| format!("reading {arg}: {e}"));
    }
    if let Some(p) = find(arg) {
        return Ok((p.text.to_string(), Some(p.kind)));
    }
    let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
    Err(format!(
        "'{arg}' is neither an existing file nor a preset (presets: {})",
        names.join(", ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::BudgetFile;
    use crate::config::{RunConfig, SweepConfig};

    #[test]
    fn every_preset_parses_and_validates() {
        for p in PRESETS {
            match p.kind {
                PresetKind::Run => {
                    let cfg = RunConfig::from_toml(p.text)
                        .unwrap_or_else(|e| panic!("{}: {e}", p.name));
                    cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
                }
                PresetKind::Sweep => {
                    let cfg = SweepConfig::from_toml(p.text)
                        .unwrap_or_else(|e| panic!("{}: {e}", p.name));
                    cfg.base
                        .validate()
                        .unwrap_or_else(|e| panic!("{}: {e}", p.name));
                    assert!(!cfg.sweep.values.is_empty(), "{} has an empty grid", p.name);
                }
                PresetKind::Budget => {
                    BudgetFile::from_toml(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
                }
            }
        }
    }

    #[test]
    fn names_resolve_and_misses_list_the_menu() {
        let (text, kind) = load_config_text("sync-strong").unwrap();
        assert_eq!(kind, Some(PresetKind::Run));
        assert!(text.contains("engine"));
        let err = load_config_text("no-such-thing").unwrap_err();
        assert!(err.contains("eigen-sweep"));
    }
}
