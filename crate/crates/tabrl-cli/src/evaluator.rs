//! Frozen-policy evaluation. Episodes are generated from seeds derived off
//! one protocol seed, so two calls with the same protocol see identical
//! scenes and identical detector noise, regardless of the policy under test.
//!
//! Every episode lands in exactly one bucket: success, low-level error
//! (some primitive chose the right target for the command but its execution
//! failed), or other failure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tabrl_core::agent::{build_observation, ActionCodec, SacAgent};
use tabrl_core::rng::{derive_seed, stream};
use tabrl_core::sim::{check_success, correctly_placed, Env, SimError};
use tabrl_core::surrogate::{
    compose, detect_objects, high_level_policy, low_level_policy, CommandVector, DetectionSet,
    DetectorConfig, ProgramSet, StructuredAction,
};
use tabrl_core::{ColorId, EpisodeConfig, Glyph, ObjectKind, OverlapMode, Prim, SceneState,
    TaskSpec};

/// Policy under evaluation.
pub enum EvalActor<'a> {
    /// Learned policy, deterministic head (tanh of the mean).
    Trained(&'a SacAgent),
    /// Scripted hierarchy sampling from affordance programs.
    Scripted(&'a ProgramSet),
    /// Scripted target choice with a uniform random within-crop offset;
    /// isolates how much the shaped offset distribution contributes.
    ScriptedUniformResidual,
}

/// A fixed, reproducible episode suite.
#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub task: TaskSpec,
    /// Episode template; the seed field is replaced per episode.
    pub episode: EpisodeConfig,
    /// Commanded (letter, bowl color) pairs for the short-horizon task;
    /// episode k uses entry k modulo the length. Must be empty exactly for
    /// the long-horizon task.
    pub commands: Vec<(Glyph, ColorId)>,
    pub episodes: usize,
    pub detector: DetectorConfig,
    pub seed: u64,
}

impl EvalProtocol {
    /// Suite that evaluates the task exactly as configured.
    pub fn for_task(
        task: &TaskSpec,
        episode: &EpisodeConfig,
        episodes: usize,
        detector: DetectorConfig,
        seed: u64,
    ) -> EvalProtocol {
        let commands = match *task {
            TaskSpec::Sh {
                pick_letter,
                place_color,
                ..
            } => vec![(pick_letter, place_color)],
            TaskSpec::Lh { .. } => Vec::new(),
        };
        EvalProtocol {
            task: *task,
            episode: episode.clone(),
            commands,
            episodes,
            detector,
            seed,
        }
    }
}

/// Episode partition and mean return over one suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub success_rate: f64,
    pub low_level_error_rate: f64,
    pub other_failure_rate: f64,
    pub mean_return: f64,
}

/// Run the suite. Identical protocols produce identical stats for a
/// deterministic actor.
pub fn run_eval(actor: &EvalActor, proto: &EvalProtocol) -> Result<EvalStats, SimError> {
    assert!(proto.episodes > 0, "empty evaluation suite");
    let mut successes = 0usize;
    let mut ll_errors = 0usize;
    let mut return_sum = 0.0;

    for k in 0..proto.episodes {
        let (task_k, command) = episode_task(proto, k);
        let ep = EpisodeConfig {
            seed: derive_seed(proto.seed, "eval-scene", k as u64),
            ..proto.episode.clone()
        };
        let mut det_rng = stream(proto.seed, "eval-detect", k as u64);
        let mut act_rng = stream(proto.seed, "eval-act", k as u64);
        let (mut env, _) = Env::reset(task_k, ep)?;
        let mut ll_flag = false;

        while !env.done {
            let det = detect_objects(&env.scene, &proto.detector, &mut det_rng);
            let Some(structured) = propose_action(actor, &env.scene, &det, &command, &mut act_rng)
            else {
                // The scripted policy sees no usable target; the episode
                // cannot proceed and counts as an other-failure unless a
                // low-level error was already flagged.
                break;
            };
            let intent_ok = intent_correct(&env.scene, &structured, &command);
            let executed = compose(&structured, &det);
            let out = env.step(executed);
            return_sum += out.reward.total;
            if intent_ok && !out.info.executed_ok {
                ll_flag = true;
            }
        }

        if check_success(&env.scene, &env.task) {
            successes += 1;
        } else if ll_flag {
            ll_errors += 1;
        }
    }

    let n = proto.episodes as f64;
    Ok(EvalStats {
        episodes: proto.episodes,
        success_rate: successes as f64 / n,
        low_level_error_rate: ll_errors as f64 / n,
        other_failure_rate: (proto.episodes - successes - ll_errors) as f64 / n,
        mean_return: return_sum / n,
    })
}

fn episode_task(proto: &EvalProtocol, k: usize) -> (TaskSpec, CommandVector) {
    match proto.task {
        TaskSpec::Sh { max_steps, .. } => {
            assert!(
                !proto.commands.is_empty(),
                "short-horizon protocol needs at least one command"
            );
            let (glyph, color) = proto.commands[k % proto.commands.len()];
            (
                TaskSpec::Sh {
                    pick_letter: glyph,
                    place_color: color,
                    max_steps,
                },
                CommandVector::sh(glyph, color),
            )
        }
        TaskSpec::Lh { .. } => (proto.task, CommandVector::lh()),
    }
}

pub(crate) fn propose_action(
    actor: &EvalActor,
    scene: &SceneState,
    det: &DetectionSet,
    command: &CommandVector,
    rng: &mut ChaCha8Rng,
) -> Option<StructuredAction> {
    match actor {
        EvalActor::Trained(agent) => {
            let obs = build_observation(det, command);
            let u = agent.act(&obs, true, rng);
            Some(ActionCodec::new(det.len()).decode(&u))
        }
        EvalActor::Scripted(programs) => {
            let g = (scene.gripper_pos.0 as f64, scene.gripper_pos.1 as f64);
            let choice = high_level_policy(det, g, command).ok()?;
            low_level_policy(det, choice, programs, rng).ok()
        }
        EvalActor::ScriptedUniformResidual => {
            let g = (scene.gripper_pos.0 as f64, scene.gripper_pos.1 as f64);
            let (prim, index) = high_level_policy(det, g, command).ok()?;
            let r = det.crop_radius as f64;
            let residual = (rng.gen_range(-r..=r), rng.gen_range(-r..=r));
            Some(StructuredAction::new(prim, index, residual))
        }
    }
}

/// Detection index -> object id. Detections are emitted letters first then
/// bowls, ascending id within each group.
fn detection_object_ids(scene: &SceneState) -> Vec<u8> {
    let mut keyed: Vec<(bool, u8)> = scene
        .objects
        .iter()
        .map(|o| (o.kind == ObjectKind::Bowl, o.id))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, id)| id).collect()
}

/// Whether the chosen primitive and target are the right high-level move
/// for the command, judged against ground truth. Execution may still fail
/// (noisy detection, bad offset); that distinction is the point.
fn intent_correct(scene: &SceneState, action: &StructuredAction, command: &CommandVector) -> bool {
    let ids = detection_object_ids(scene);
    let Some(&id) = ids.get(action.index) else {
        return false;
    };
    let obj = scene.object(id);
    match action.prim {
        Prim::Pick => {
            if scene.held.is_some() || obj.kind != ObjectKind::Letter {
                return false;
            }
            match command.pick_slot {
                Some(glyph) => obj.glyph == Some(glyph),
                // "Put all letters away": any letter still off target.
                None => !correctly_placed(scene, id),
            }
        }
        Prim::Place => {
            let Some(held) = scene.held else {
                return false;
            };
            if obj.kind != ObjectKind::Bowl {
                return false;
            }
            match command.place_slot {
                Some(color) => obj.color == color,
                None => scene.object(held).color == obj.color,
            }
        }
    }
}

/// Which held-out dimension an evaluation condition swaps in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnseenKind {
    Colors,
    Letters,
}

/// One cell of the evaluation grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// "no" or "ao".
    pub overlap: String,
    /// "seen", "unseen_colors", or "unseen_letters".
    pub objects: String,
    pub stats: EvalStats,
}

/// Protocol for one grid cell. Seen cells evaluate the configured task
/// verbatim; unseen cells swap held-out glyphs or colors into the scene
/// sets and cycle the command over the held-out values. Set sizes stay at
/// the configured counts, so scenes keep their shape.
pub fn condition_protocol(
    task: &TaskSpec,
    episode: &EpisodeConfig,
    overlap: OverlapMode,
    unseen: Option<UnseenKind>,
    episodes: usize,
    detector: DetectorConfig,
    seed: u64,
) -> EvalProtocol {
    let mut ep = episode.clone();
    ep.overlap_mode = overlap;
    let mut proto = EvalProtocol::for_task(task, &ep, episodes, detector, seed);
    match unseen {
        None => {}
        Some(UnseenKind::Colors) => {
            // Two held-out colors plus one seen filler to keep three bowls.
            proto.episode.color_set = vec![ColorId::Yellow, ColorId::Purple, ColorId::Red];
            if let TaskSpec::Sh { pick_letter, .. } = *task {
                proto.commands = ColorId::UNSEEN.iter().map(|&c| (pick_letter, c)).collect();
            }
        }
        Some(UnseenKind::Letters) => {
            proto.episode.letter_set = vec![Glyph::C, Glyph::M, Glyph::V];
            if let TaskSpec::Sh { place_color, .. } = *task {
                proto.commands = Glyph::UNSEEN.iter().map(|&g| (g, place_color)).collect();
            }
        }
    }
    proto
}

/// Evaluate an actor over the overlap x object-set grid.
pub fn eval_grid(
    actor: &EvalActor,
    task: &TaskSpec,
    episode: &EpisodeConfig,
    overlaps: &[OverlapMode],
    unseen_kinds: &[Option<UnseenKind>],
    episodes: usize,
    detector: DetectorConfig,
    seed: u64,
) -> Result<Vec<ConditionReport>, SimError> {
    let mut out = Vec::new();
    for &overlap in overlaps {
        for &unseen in unseen_kinds {
            let proto =
                condition_protocol(task, episode, overlap, unseen, episodes, detector, seed);
            let stats = run_eval(actor, &proto)?;
            out.push(ConditionReport {
                overlap: match overlap {
                    OverlapMode::NonOverlap => "no".into(),
                    OverlapMode::ArbitraryOverlap => "ao".into(),
                },
                objects: match unseen {
                    None => "seen".into(),
                    Some(UnseenKind::Colors) => "unseen_colors".into(),
                    Some(UnseenKind::Letters) => "unseen_letters".into(),
                },
                stats,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh_task() -> TaskSpec {
        TaskSpec::Sh {
            pick_letter: Glyph::V,
            place_color: ColorId::Red,
            max_steps: 10,
        }
    }

    fn proto(detector: DetectorConfig, episodes: usize) -> EvalProtocol {
        EvalProtocol::for_task(
            &sh_task(),
            &EpisodeConfig::default(),
            episodes,
            detector,
            99,
        )
    }

    #[test]
    fn scripted_hierarchy_solves_clean_scenes() {
        let programs = ProgramSet::reference();
        let p = proto(DetectorConfig::noiseless(), 30);
        let stats = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        assert!(
            stats.success_rate >= 0.9,
            "scripted policy at zero noise: {stats:?}"
        );
        let total =
            stats.success_rate + stats.low_level_error_rate + stats.other_failure_rate;
        assert!((total - 1.0).abs() < 1e-12, "partition must sum to 1");
    }

    #[test]
    fn identical_protocols_give_identical_stats() {
        let programs = ProgramSet::reference();
        let p = proto(DetectorConfig::default(), 10);
        let a = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        let b = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_residual_hurts_the_scripted_policy() {
        let programs = ProgramSet::reference();
        let p = proto(DetectorConfig::noiseless(), 40);
        let shaped = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        let uniform = run_eval(&EvalActor::ScriptedUniformResidual, &p).unwrap();
        assert!(
            shaped.success_rate > uniform.success_rate,
            "shaped {shaped:?} vs uniform {uniform:?}"
        );
    }

    #[test]
    fn unseen_conditions_swap_heldout_values_into_commands_and_sets() {
        let p = condition_protocol(
            &sh_task(),
            &EpisodeConfig::default(),
            OverlapMode::NonOverlap,
            Some(UnseenKind::Letters),
            20,
            DetectorConfig::noiseless(),
            7,
        );
        assert!(p.episode.letter_set.contains(&Glyph::C));
        assert!(p.commands.iter().any(|&(g, _)| g == Glyph::C));
        assert!(p.commands.iter().any(|&(g, _)| g == Glyph::M));
        // The scripted policy still works there: target glyphs exist.
        let programs = ProgramSet::reference();
        let stats = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        assert!(stats.success_rate >= 0.9, "{stats:?}");
    }

    #[test]
    fn low_level_errors_are_separated_from_wrong_intent() {
        // At heavy detection noise the scripted hierarchy keeps choosing
        // the right targets (labels are exact) but placements miss: failed
        // episodes should be dominated by the low-level bucket.
        let programs = ProgramSet::reference();
        let mut p = proto(DetectorConfig::default(), 40);
        p.detector.sigma = 12.0;
        let stats = run_eval(&EvalActor::Scripted(&programs), &p).unwrap();
        assert!(stats.success_rate < 1.0);
        assert!(
            stats.low_level_error_rate > stats.other_failure_rate,
            "{stats:?}"
        );
    }
}
