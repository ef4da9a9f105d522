//! Deterministic inputs for verification suites and unit tests: synthetic
//! observations at arbitrary crop sizes, a probe-scale encoder that accepts
//! real detector crops, and real-environment transition batches.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agent::codec::ActionCodec;
use crate::agent::networks::EncoderConfig;
use crate::agent::obs::{build_observation, CompactObs, ReformulatedObservation};
use crate::agent::replay::ReplayTransition;
use crate::explore::ActionSource;
use crate::rng::{derive_seed, stream};
use crate::sim::{check_success, reset, step};
use crate::surrogate::action::{compose, StructuredAction};
use crate::surrogate::command::CommandVector;
use crate::surrogate::detect::{detect_objects, DetectorConfig};
use crate::{ColorId, EpisodeConfig, Glyph, Prim, TaskSpec};

/// Small encoder over synthetic 8x8 crops; fast enough for per-test use.
pub fn tiny_encoder_config() -> EncoderConfig {
    EncoderConfig {
        crop_side: 8,
        conv_filters: (2, 3),
        mlp_width: 16,
        lang_dim: CommandVector::FLAT_LEN,
    }
}

/// Smallest encoder that accepts real detector crops (side 24).
pub fn probe_encoder_config() -> EncoderConfig {
    EncoderConfig {
        crop_side: 24,
        conv_filters: (1, 1),
        mlp_width: 16,
        lang_dim: CommandVector::FLAT_LEN,
    }
}

/// Random observation whose rasters are k/255, so the compact replay form
/// reproduces it exactly.
pub fn synthetic_observation(
    cfg: &EncoderConfig,
    n_objects: usize,
    rng: &mut ChaCha8Rng,
) -> ReformulatedObservation {
    let len = 4 * cfg.crop_side * cfg.crop_side;
    ReformulatedObservation {
        crops: (0..n_objects)
            .map(|_| (0..len).map(|_| rng.gen_range(0..=255u32) as f64 / 255.0).collect())
            .collect(),
        positions: (0..n_objects)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
        held: (0..n_objects).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
        lang: (0..cfg.lang_dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
        crop_side: cfg.crop_side,
    }
}

/// The short-horizon task used by probe batches.
pub fn probe_task() -> TaskSpec {
    TaskSpec::Sh {
        pick_letter: Glyph::O,
        place_color: ColorId::Red,
        max_steps: 10,
    }
}

/// Real transitions from fresh short-horizon scenes: noiseless detection,
/// random lattice actions pushed through the codec, one step each.
/// Deterministic for a given seed.
pub fn probe_transitions(n: usize, seed: u64) -> Vec<ReplayTransition> {
    let task = probe_task();
    let command = CommandVector::sh(Glyph::O, ColorId::Red);
    let det_cfg = DetectorConfig::noiseless();
    let mut rng = stream(seed, "probe-batch", 0);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let ep = EpisodeConfig {
            seed: derive_seed(seed, "probe-scene", k as u64),
            ..EpisodeConfig::default()
        };
        let (scene, _) = reset(&task, &ep).expect("probe scene");
        let d = detect_objects(&scene, &det_cfg, &mut rng);
        let obs = build_observation(&d, &command);
        let codec = ActionCodec::new(d.positions.len());

        let prim = if rng.gen_bool(0.5) { Prim::Pick } else { Prim::Place };
        let index = rng.gen_range(0..d.positions.len());
        let residual = (rng.gen_range(-12..=12) as f64, rng.gen_range(-12..=12) as f64);
        let structured = StructuredAction::new(prim, index, residual);
        let u = codec.encode_action(&structured);
        let executed = compose(&codec.decode(&u), &d);

        let outcome = step(&scene, executed, &task);
        let d2 = detect_objects(&outcome.scene, &det_cfg, &mut rng);
        let next_obs = build_observation(&d2, &command);
        out.push(ReplayTransition {
            obs: CompactObs::from_obs(&obs),
            action: u,
            reward: outcome.reward.total,
            next_obs: CompactObs::from_obs(&next_obs),
            terminal: outcome.done && check_success(&outcome.scene, &task),
            source: ActionSource::Rl,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_transitions_are_deterministic_and_real() {
        let a = probe_transitions(4, 17);
        let b = probe_transitions(4, 17);
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.obs, y.obs);
            assert_eq!(x.action, y.action);
            assert_eq!(x.reward, y.reward);
            assert_eq!(x.terminal, y.terminal);
        }
        // Real detector output: six objects, full-size crops.
        assert_eq!(a[0].obs.to_obs().n_objects(), 6);
        assert_eq!(a[0].obs.to_obs().crop_side, 24);
    }
}
