//! Named terrain parameter sets.
//!
//! Presets are TOML files, one per preset, named `<preset>.toml`. The
//! shipped set lives in the crate's `presets/` directory and is embedded at
//! build time; pointing [`PRESET_DIR_ENV`] at another directory replaces it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{BasePolicy, FieldSeeds, NoiseLayer, TerrainParams};
use crate::error::{Error, Result};

pub const PRESET_DIR_ENV: &str = "TRAVERSE_SIM_PRESETS";

const BUILTIN: &[(&str, &str)] = &[
    ("flat", include_str!("../../presets/flat.toml")),
    ("smooth", include_str!("../../presets/smooth.toml")),
    ("wavy", include_str!("../../presets/wavy.toml")),
    ("rough", include_str!("../../presets/rough.toml")),
    ("mountains", include_str!("../../presets/mountains.toml")),
    ("depressions", include_str!("../../presets/depressions.toml")),
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    #[serde(default)]
    description: String,
    /// Whether dataset builds use this preset when none are named.
    #[serde(default = "default_true")]
    default_mix: bool,
    #[serde(default)]
    shared_seed: bool,
    #[serde(default)]
    base_policy: BasePolicy,
    mountain: NoiseLayer,
    plain: NoiseLayer,
    smoothing: f64,
    blend: NoiseLayer,
    upper: f64,
    lower: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainPreset {
    pub name: String,
    pub description: String,
    pub default_mix: bool,
    shared_seed: bool,
    template: TerrainParams,
}

impl TerrainPreset {
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let file: PresetFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("preset {name}: {e}")))?;
        let template = TerrainParams {
            mountain: file.mountain,
            plain: file.plain,
            smoothing: file.smoothing,
            blend: file.blend,
            upper: file.upper,
            lower: file.lower,
            seeds: FieldSeeds::from_master(0, file.shared_seed),
            base_policy: file.base_policy,
        };
        template.validate()?;
        Ok(Self {
            name: name.to_string(),
            description: file.description,
            default_mix: file.default_mix,
            shared_seed: file.shared_seed,
            template,
        })
    }

    /// Parameters with noise seeds derived from `master_seed`.
    pub fn params(&self, master_seed: i64) -> TerrainParams {
        TerrainParams { seeds: FieldSeeds::from_master(master_seed, self.shared_seed), ..self.template }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PresetLibrary {
    presets: BTreeMap<String, TerrainPreset>,
}

impl PresetLibrary {
    pub fn builtin() -> Self {
        let presets = BUILTIN
            .iter()
            .map(|(name, text)| {
                let p = TerrainPreset::parse(name, text).expect("shipped presets parse");
                (name.to_string(), p)
            })
            .collect();
        Self { presets }
    }

    /// Loads every `*.toml` file in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut presets = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path)?;
            presets.insert(name.to_string(), TerrainPreset::parse(name, &text)?);
        }
        if presets.is_empty() {
            return Err(Error::InvalidConfig(format!("no presets found in {}", dir.display())));
        }
        Ok(Self { presets })
    }

    pub fn get(&self, name: &str) -> Result<&TerrainPreset> {
        self.presets.get(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown preset {name:?}; available: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.presets.keys().map(String::as_str).collect()
    }

    /// Presets flagged for the default dataset mix, in name order.
    pub fn default_mix(&self) -> Vec<&TerrainPreset> {
        self.presets.values().filter(|p| p.default_mix).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TerrainPreset> {
        self.presets.values()
    }
}

/// Preset library from [`PRESET_DIR_ENV`] when set, the shipped set otherwise.
pub fn load_presets() -> Result<PresetLibrary> {
    match std::env::var_os(PRESET_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PresetLibrary::from_dir(Path::new(&dir)),
        _ => Ok(PresetLibrary::builtin()),
    }
}
