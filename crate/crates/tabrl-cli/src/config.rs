//! Run configuration. The JSON file mirrors the struct fields exactly and
//! unknown keys anywhere in the document are an error: a typo in a sweep
//! config should fail loudly, not run with defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabrl_core::agent::SacHyperparams;
use tabrl_core::explore::ExploreConfig;
use tabrl_core::sim::reset;
use tabrl_core::surrogate::{CommandVector, DetectorConfig};
use tabrl_core::{EpisodeConfig, TaskSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSpec,
    /// Template for episode generation; the per-episode seed is replaced by
    /// the trainer, everything else is used as written.
    pub episode: EpisodeConfig,
    pub explore: ExploreConfig,
    pub sac: SacHyperparams,
    pub total_steps: u64,
    pub eval_every: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Real timings make byte-identical reruns impossible, so the
    /// wall-clock column is written as 0.0 unless this is set.
    #[serde(default)]
    pub record_wall_clock: bool,
}

fn default_eval_episodes() -> usize {
    50
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        RunConfig::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(task) = value.get("task") {
            reject_unknown_task_keys(task)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.explore.validate().or_else(|m| invalid(m))?;
        self.sac.validate().or_else(|m| invalid(m))?;
        if self.seeds.is_empty() {
            return invalid("seeds must be non-empty".into());
        }
        if self.total_steps <= self.explore.warmup_steps {
            return invalid(format!(
                "total_steps {} must exceed warmup_steps {}",
                self.total_steps, self.explore.warmup_steps
            ));
        }
        if self.eval_every == 0 || self.eval_every > self.total_steps {
            return invalid(format!(
                "eval_every {} must be in 1..=total_steps {}",
                self.eval_every, self.total_steps
            ));
        }
        if self.eval_episodes == 0 {
            return invalid("eval_episodes must be positive".into());
        }
        let crop_side = DetectorConfig::default().crop_side();
        if self.sac.encoder.crop_side != crop_side {
            return invalid(format!(
                "encoder crop_side {} does not match detector crop side {}",
                self.sac.encoder.crop_side, crop_side
            ));
        }
        if self.sac.encoder.lang_dim != CommandVector::FLAT_LEN {
            return invalid(format!(
                "encoder lang_dim {} does not match command vector length {}",
                self.sac.encoder.lang_dim,
                CommandVector::FLAT_LEN
            ));
        }
        // A dry reset catches task/episode mismatches (commanded glyph or
        // color missing from the sets, sets smaller than the object counts).
        let probe = EpisodeConfig {
            seed: 0,
            ..self.episode.clone()
        };
        if let Err(e) = reset(&self.task, &probe) {
            return invalid(format!("task and episode are inconsistent: {e}"));
        }
        Ok(())
    }
}

/// Internally tagged enums silently ignore `deny_unknown_fields`, so the
/// task table is checked by hand before deserialization.
fn reject_unknown_task_keys(v: &serde_json::Value) -> Result<(), ConfigError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ConfigError::Parse("task must be an object".into()))?;
    let horizon = obj
        .get("horizon")
        .and_then(|h| h.as_str())
        .ok_or_else(|| ConfigError::Parse("task.horizon must be \"sh\" or \"lh\"".into()))?;
    let allowed: &[&str] = match horizon {
        "sh" => &["horizon", "pick_letter", "place_color", "max_steps"],
        "lh" => &["horizon", "max_steps"],
        other => {
            return Err(ConfigError::Parse(format!(
                "unknown task horizon {other:?}"
            )))
        }
    };
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::Parse(format!(
                "unknown key {key:?} in task ({horizon})"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabrl_core::{ColorId, Glyph};

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "task": {"horizon": "sh", "pick_letter": "V", "place_color": "red", "max_steps": 10},
            "episode": {
                "seed": 0,
                "overlap_mode": "no",
                "letter_set": ["V", "O", "T"],
                "color_set": ["red", "green", "blue"],
                "n_letters": 3,
                "n_bowls": 3
            },
            "explore": {"epsilon": 0.2, "warmup_steps": 100, "schedule": {"kind": "constant"}},
            "sac": {
                "gamma": 0.95, "tau": 0.005, "lr": 3e-4,
                "batch_size": 8, "buffer_capacity": 1000,
                "warm_start_steps": 50, "update_every": 1,
                "target_entropy": -4.0, "init_alpha": 0.1,
                "encoder": {"crop_side": 24, "conv_filters": [1, 1], "mlp_width": 16, "lang_dim": 12}
            },
            "total_steps": 400,
            "eval_every": 200,
            "eval_episodes": 5,
            "seeds": [0, 1],
            "output_dir": "/tmp/tabrl-test-run"
        })
    }

    #[test]
    fn round_trips_and_applies_defaults() {
        let mut v = base_json();
        v.as_object_mut().unwrap().remove("eval_episodes");
        let cfg = RunConfig::from_json(&v.to_string()).unwrap();
        assert_eq!(cfg.eval_episodes, 50);
        assert!(!cfg.record_wall_clock);
        assert_eq!(
            cfg.task,
            TaskSpec::Sh {
                pick_letter: Glyph::V,
                place_color: ColorId::Red,
                max_steps: 10
            }
        );
        // Serialize and reload: identical config.
        let text = serde_json::to_string(&cfg).unwrap();
        let again = RunConfig::from_json(&text).unwrap();
        assert_eq!(serde_json::to_value(&again).unwrap(), serde_json::to_value(&cfg).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for (pointer, key) in [
            ("", "bogus"),
            ("/task", "bogus"),
            ("/episode", "bogus"),
            ("/explore", "bogus"),
            ("/sac", "bogus"),
            ("/sac/encoder", "bogus"),
        ] {
            let mut v = base_json();
            v.pointer_mut(pointer)
                .unwrap()
                .as_object_mut()
                .unwrap()
                .insert(key.into(), serde_json::json!(1));
            let err = RunConfig::from_json(&v.to_string()).unwrap_err();
            assert!(
                matches!(err, ConfigError::Parse(_)),
                "expected parse error for unknown key at {pointer:?}, got {err:?}"
            );
        }
    }

    #[test]
    fn lh_task_rejects_sh_only_keys() {
        let mut v = base_json();
        *v.pointer_mut("/task").unwrap() =
            serde_json::json!({"horizon": "lh", "max_steps": 30, "pick_letter": "V"});
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        *v.pointer_mut("/task").unwrap() = serde_json::json!({"horizon": "lh", "max_steps": 30});
        RunConfig::from_json(&v.to_string()).unwrap();
    }

    #[test]
    fn invariants_are_enforced() {
        let mut v = base_json();
        *v.pointer_mut("/total_steps").unwrap() = serde_json::json!(100);
        assert!(matches!(
            RunConfig::from_json(&v.to_string()),
            Err(ConfigError::Invalid(_))
        ));

        let mut v = base_json();
        *v.pointer_mut("/seeds").unwrap() = serde_json::json!([]);
        assert!(RunConfig::from_json(&v.to_string()).is_err());

        // Commanded letter missing from the letter set.
        let mut v = base_json();
        *v.pointer_mut("/episode/letter_set").unwrap() = serde_json::json!(["O", "T", "C"]);
        assert!(RunConfig::from_json(&v.to_string()).is_err());

        // Encoder that cannot ingest detector crops.
        let mut v = base_json();
        *v.pointer_mut("/sac/encoder/crop_side").unwrap() = serde_json::json!(16);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
