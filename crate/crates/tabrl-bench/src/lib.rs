//! Shared scenario builders for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tabrl_core::agent::{build_observation, ReplayBuffer, ReplayTransition, SacAgent, SacHyperparams};
use tabrl_core::explore::ActionSource;
use tabrl_core::sim::{ColorId, Env, EpisodeConfig, Glyph, TaskSpec};
use tabrl_core::surrogate::command::CommandVector;
use tabrl_core::surrogate::detect::{detect_objects, DetectorConfig};

pub fn sh_task() -> TaskSpec {
    TaskSpec::Sh {
        pick_letter: Glyph::V,
        place_color: ColorId::Red,
        max_steps: 10,
    }
}

pub fn episode_config(seed: u64) -> EpisodeConfig {
    EpisodeConfig {
        seed,
        ..EpisodeConfig::default()
    }
}

pub fn desk_hyperparams() -> SacHyperparams {
    let mut hp = SacHyperparams {
        batch_size: 32,
        buffer_capacity: 4096,
        ..SacHyperparams::default()
    };
    hp.encoder.conv_filters = (2, 2);
    hp.encoder.mlp_width = 64;
    hp
}

/// Agent plus a buffer pre-filled with enough real transitions to sample batches.
pub fn warm_agent_and_buffer(n_transitions: usize) -> (SacAgent, ReplayBuffer) {
    let hp = desk_hyperparams();
    let mut agent = SacAgent::new(hp.clone(), 7);
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let detector = DetectorConfig::noiseless();
    let command = CommandVector::sh(Glyph::V, ColorId::Red);

    let mut pushed = 0;
    let mut episode = 0u64;
    while pushed < n_transitions {
        let (mut env, _raw) = Env::reset(sh_task(), &episode_config(episode)).expect("reset");
        let mut det = detect_objects(env.scene(), &detector, &mut rng);
        let mut obs = build_observation(&det, &command, env.scene());
        while pushed < n_transitions && !env.is_done() {
            let u = agent.act(&obs, false, &mut rng);
            let structured = agent.codec(det.len()).decode(&u);
            let action = tabrl_core::surrogate::compose(&structured, &det);
            let out = env.step(action);
            det = detect_objects(env.scene(), &detector, &mut rng);
            let next_obs = build_observation(&det, &command, env.scene());
            buffer.push(ReplayTransition {
                obs: obs.clone().into(),
                action: u,
                reward: out.reward.total,
                next_obs: next_obs.clone().into(),
                terminal: out.done,
                source: ActionSource::Rl,
            });
            obs = next_obs;
            pushed += 1;
        }
        episode += 1;
    }
    (agent, buffer)
}
