use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sac::{SacAgent, SacHyperparams};
use crate::tensor::{store_from_json, store_to_json, Adam, SerializeError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint format version {got}, expected {FORMAT_VERSION}")]
    Version { got: u64 },
    #[error("parameter snapshot: {0}")]
    Params(#[from] SerializeError),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    hyperparams: SacHyperparams,
    total_updates: u64,
    env_steps: u64,
    actor: serde_json::Value,
    critic: serde_json::Value,
    target: serde_json::Value,
    log_alpha: f64,
    actor_opt: Adam,
    critic_opt: Adam,
    alpha_opt: Adam,
}

/// Full training state as a JSON value. Parameter floats use shortest-round-
/// trip formatting, so save -> load -> save is byte-stable.
pub fn save_checkpoint(agent: &SacAgent, env_steps: u64) -> serde_json::Value {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        hyperparams: agent.hp,
        total_updates: agent.total_updates,
        env_steps,
        actor: store_to_json(&agent.actor_store),
        critic: store_to_json(&agent.critic_store),
        target: store_to_json(&agent.target_store),
        log_alpha: agent.alpha_store.value(agent.log_alpha).item(),
        actor_opt: agent.actor_opt.clone(),
        critic_opt: agent.critic_opt.clone(),
        alpha_opt: agent.alpha_opt.clone(),
    };
    serde_json::to_value(&file).expect("checkpoint serializes")
}

/// Rebuilds an agent from [`save_checkpoint`] output. Returns the agent and
/// the environment step count stored with it.
pub fn load_checkpoint(value: &serde_json::Value) -> Result<(SacAgent, u64), CheckpointError> {
    let got = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0);
    if got != FORMAT_VERSION as u64 {
        return Err(CheckpointError::Version { got });
    }
    let file: CheckpointFile = serde_json::from_value(value.clone())?;

    // Reconstruct the exact layout, then overwrite every value.
    let mut agent = SacAgent::new(file.hyperparams, 0);
    store_from_json(&mut agent.actor_store, &file.actor)?;
    store_from_json(&mut agent.critic_store, &file.critic)?;
    store_from_json(&mut agent.target_store, &file.target)?;
    agent.alpha_store.value_mut(agent.log_alpha).data_mut()[0] = file.log_alpha;
    agent.actor_opt = file.actor_opt;
    agent.critic_opt = file.critic_opt;
    agent.alpha_opt = file.alpha_opt;
    agent.total_updates = file.total_updates;
    Ok((agent, file.env_steps))
}

pub fn write_checkpoint(
    path: &Path,
    agent: &SacAgent,
    env_steps: u64,
) -> Result<(), CheckpointError> {
    let value = save_checkpoint(agent, env_steps);
    let text = serde_json::to_string(&value)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(SacAgent, u64), CheckpointError> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    load_checkpoint(&value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::obs::CompactObs;
    use crate::agent::replay::ReplayTransition;
    use crate::check::fixtures::{
        synthetic_observation as synthetic_obs, tiny_encoder_config as tiny_config,
    };
    use crate::explore::ActionSource;
    use crate::rng::stream;

    fn trained_agent() -> SacAgent {
        let hp = SacHyperparams {
            batch_size: 1,
            buffer_capacity: 8,
            warm_start_steps: 0,
            encoder: tiny_config(),
            ..SacHyperparams::default()
        };
        let mut agent = SacAgent::new(hp, 3);
        let mut rng = stream(3, "ckpt-test", 0);
        let o = synthetic_obs(&tiny_config(), 3, &mut rng);
        let n = synthetic_obs(&tiny_config(), 3, &mut rng);
        let t = ReplayTransition {
            obs: CompactObs::from_obs(&o),
            action: [0.1, 0.2, -0.3, 0.4],
            reward: 0.5,
            next_obs: CompactObs::from_obs(&n),
            terminal: false,
            source: ActionSource::Rl,
        };
        for _ in 0..3 {
            agent.update(&[&t], &mut rng);
        }
        agent
    }

    #[test]
    fn round_trip_preserves_behavior_and_bytes() {
        let agent = trained_agent();
        let value = save_checkpoint(&agent, 1234);
        let text = serde_json::to_string(&value).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let (loaded, steps) = load_checkpoint(&parsed).unwrap();
        assert_eq!(steps, 1234);
        assert_eq!(loaded.total_updates(), agent.total_updates());
        assert_eq!(loaded.alpha(), agent.alpha());

        let mut rng = stream(3, "ckpt-test", 1);
        let obs = synthetic_obs(&tiny_config(), 4, &mut rng);
        assert_eq!(
            agent.act(&obs, true, &mut rng),
            loaded.act(&obs, true, &mut rng),
            "loaded agent must act bit-identically"
        );

        // Second save is byte-identical: a checkpoint round trip loses
        // nothing even through text form.
        let again = serde_json::to_string(&save_checkpoint(&loaded, 1234)).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn file_round_trip_works() {
        let agent = trained_agent();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        write_checkpoint(&path, &agent, 77).unwrap();
        let (loaded, steps) = read_checkpoint(&path).unwrap();
        assert_eq!(steps, 77);
        assert_eq!(loaded.total_updates(), agent.total_updates());
    }

    #[test]
    fn wrong_version_and_unknown_fields_are_rejected() {
        let agent = trained_agent();
        let mut value = save_checkpoint(&agent, 0);
        value["format_version"] = serde_json::json!(2);
        assert!(matches!(
            load_checkpoint(&value),
            Err(CheckpointError::Version { got: 2 })
        ));

        let mut value = save_checkpoint(&agent, 0);
        value["surprise"] = serde_json::json!(true);
        assert!(matches!(
            load_checkpoint(&value),
            Err(CheckpointError::Json(_))
        ));
    }
}
