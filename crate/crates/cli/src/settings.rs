use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use surgtrack::eval::MotConfig;
use surgtrack::skill::SkillConfig;
use surgtrack::stats::{ClassifierConfig, FoldConfig};
use surgtrack::tracking::{TrackerConfig, Variant};

/// Effective configuration of a run. Its JSON form is what the provenance
/// hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Seeds the tracker, classifiers, fold resampling and generators.
    pub seed: u64,
    /// Frame rate used to convert frame counts to seconds.
    pub fps: f64,
    /// Features kept by ANOVA selection.
    pub k_features: usize,
    pub tracker: TrackerConfig,
    pub skill: SkillConfig,
    pub mot: MotConfig,
    pub classifier: ClassifierConfig,
    pub folds: FoldConfig,
}

impl Settings {
    pub fn defaults(variant: Variant) -> Self {
        Self {
            seed: 0,
            fps: 25.0,
            k_features: 10,
            tracker: TrackerConfig::new(variant),
            skill: SkillConfig::default(),
            mot: MotConfig::default(),
            classifier: ClassifierConfig::default(),
            folds: FoldConfig::default(),
        }
    }

    fn propagate_seed(&mut self) {
        self.tracker.seed = self.seed;
        self.classifier.seed = self.seed;
    }
}

/// Tables whose keys are data rather than field names.
const OPEN_TABLES: [&str; 2] = ["folds.resample", "tracker.registry.classes"];

fn overlay(base: &mut Value, patch: Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let open = OPEN_TABLES.contains(&path);
            if open {
                b.clear();
            }
            for (k, v) in p {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v, &child)?,
                    None if open => {
                        b.insert(k, v);
                    }
                    None => bail!("unknown configuration key '{child}'"),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Defaults for the chosen variant, overlaid with the TOML file, then with
/// command-line flags.
pub fn load(path: Option<&Path>, variant: Option<Variant>, seed: Option<u64>) -> Result<Settings> {
    let patch: Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Value::Object(Default::default()),
    };
    let file_variant = patch
        .pointer("/tracker/variant")
        .and_then(Value::as_str)
        .map(str::parse::<Variant>)
        .transpose()?;
    let variant = variant.or(file_variant).unwrap_or(Variant::StrongSort);
    let mut value = serde_json::to_value(Settings::defaults(variant))?;
    overlay(&mut value, patch, "")?;
    value["tracker"]["variant"] = serde_json::to_value(variant)?;
    let mut settings: Settings = serde_json::from_value(value).context("invalid configuration")?;
    if let Some(s) = seed {
        settings.seed = s;
    }
    settings.propagate_seed();
    settings.tracker.validate()?;
    if !(settings.fps.is_finite() && settings.fps > 0.0) {
        bail!("fps must be positive");
    }
    Ok(settings)
}
