//! Long-horizon decomposition: a scripted planner reads the task space,
//! pairs every letter with the bowl of its color, and issues one
//! single-target command per letter to a short-horizon policy. After each
//! command the task space is observed again, so later commands see the
//! results of earlier ones.

use tabrl_core::rng::{derive_seed, stream};
use tabrl_core::sim::{check_success, correctly_placed, Env, SimError};
use tabrl_core::surrogate::{compose, detect_objects, CommandVector, DetectorConfig};
use tabrl_core::{ColorId, EpisodeConfig, Glyph, ObjectKind, TaskSpec};

use crate::evaluator::{propose_action, EvalActor};

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("no bowl matches letter color {0:?}; cannot form a command")]
    MissingBowl(ColorId),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// What one decomposed episode did.
#[derive(Debug, Clone)]
pub struct ComposeOutcome {
    pub success: bool,
    /// Commands in the order issued, one per letter.
    pub commands: Vec<String>,
    pub steps: u32,
}

/// Success rate over a decomposition suite.
#[derive(Debug, Clone)]
pub struct ComposeSuiteStats {
    pub episodes: usize,
    pub success_rate: f64,
    pub outcomes: Vec<ComposeOutcome>,
}

/// Run one long-horizon episode by decomposition. `scene_seed` generates
/// the scene; `stream_seed`/`index` derive the detector and action streams.
pub fn decompose_and_run(
    actor: &EvalActor,
    episode: &EpisodeConfig,
    per_command_steps: u32,
    detector: &DetectorConfig,
    stream_seed: u64,
    index: u64,
) -> Result<ComposeOutcome, PlannerError> {
    let n_letters = episode.n_letters as u32;
    let task = TaskSpec::Lh {
        max_steps: per_command_steps * n_letters,
    };
    let (mut env, _) = Env::reset(task, episode.clone())?;
    let mut det_rng = stream(stream_seed, "compose-detect", index);
    let mut act_rng = stream(stream_seed, "compose-act", index);

    // Plan from an observation of the task space. Detection noise moves
    // positions, never labels, so the plan itself is noise-free.
    let first = detect_objects(&env.scene, detector, &mut det_rng);
    let mut plan: Vec<(Glyph, ColorId)> = Vec::new();
    for label in &first.labels {
        if label.kind != ObjectKind::Letter {
            continue;
        }
        let glyph = label.glyph.expect("letters carry glyphs");
        let has_bowl = first
            .labels
            .iter()
            .any(|l| l.kind == ObjectKind::Bowl && l.color == label.color);
        if !has_bowl {
            return Err(PlannerError::MissingBowl(label.color));
        }
        plan.push((glyph, label.color));
    }
    debug_assert_eq!(plan.len(), episode.n_letters);

    let mut commands = Vec::with_capacity(plan.len());
    let mut steps = 0u32;
    for &(glyph, color) in &plan {
        let command = CommandVector::sh(glyph, color);
        commands.push(command.to_text());
        let mut used = 0u32;
        while !env.done && used < per_command_steps && !sub_goal_met(&env, glyph) {
            let det = detect_objects(&env.scene, detector, &mut det_rng);
            let Some(structured) =
                propose_action(actor, &env.scene, &det, &command, &mut act_rng)
            else {
                break;
            };
            let executed = compose(&structured, &det);
            env.step(executed);
            used += 1;
            steps += 1;
        }
        if env.done {
            break;
        }
    }

    Ok(ComposeOutcome {
        success: check_success(&env.scene, &env.task),
        commands,
        steps,
    })
}

/// The commanded letter sits in the bowl of its color.
fn sub_goal_met(env: &Env, glyph: Glyph) -> bool {
    env.scene
        .letters()
        .find(|o| o.glyph == Some(glyph))
        .map(|o| correctly_placed(&env.scene, o.id))
        .unwrap_or(false)
}

/// Run a seeded suite of decomposed episodes.
pub fn run_compose_suite(
    actor: &EvalActor,
    episode: &EpisodeConfig,
    episodes: usize,
    per_command_steps: u32,
    detector: &DetectorConfig,
    seed: u64,
) -> Result<ComposeSuiteStats, PlannerError> {
    let mut outcomes = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let ep = EpisodeConfig {
            seed: derive_seed(seed, "compose-scene", k as u64),
            ..episode.clone()
        };
        outcomes.push(decompose_and_run(
            actor,
            &ep,
            per_command_steps,
            detector,
            seed,
            k as u64,
        )?);
    }
    let successes = outcomes.iter().filter(|o| o.success).count();
    Ok(ComposeSuiteStats {
        episodes,
        success_rate: successes as f64 / episodes as f64,
        outcomes,
    })
}
