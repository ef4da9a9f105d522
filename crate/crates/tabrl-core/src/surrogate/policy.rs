use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::action::StructuredAction;
use super::affordance::{interpret_affordance, sample_from_affordance};
use super::command::CommandVector;
use super::detect::DetectionSet;
use super::dsl::{reference_bowl_place, reference_letter_pick, AffordanceProgram, DslError};
use crate::sim::glyphs::BOWL_INTERIOR_RADIUS;
use crate::{ObjectKind, Prim};

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("no detection satisfies the command (looking for {0})")]
    TargetAbsent(String),
    #[error("no program registered for {kind:?}/{prim:?}")]
    MissingProgram { kind: ObjectKind, prim: Prim },
    #[error(transparent)]
    Program(#[from] DslError),
}

/// Affordance programs keyed by what they act on and how.
#[derive(Debug, Clone, Default)]
pub struct ProgramSet {
    programs: HashMap<(ObjectKind, Prim), AffordanceProgram>,
}

impl ProgramSet {
    pub fn new() -> ProgramSet {
        ProgramSet::default()
    }

    /// The shipped teacher: mask-uniform picks, bowl-interior places.
    pub fn reference() -> ProgramSet {
        let mut set = ProgramSet::new();
        set.insert(ObjectKind::Letter, Prim::Pick, reference_letter_pick());
        set.insert(ObjectKind::Bowl, Prim::Place, reference_bowl_place());
        set
    }

    pub fn insert(&mut self, kind: ObjectKind, prim: Prim, program: AffordanceProgram) {
        self.programs.insert((kind, prim), program);
    }

    pub fn get(&self, kind: ObjectKind, prim: Prim) -> Option<&AffordanceProgram> {
        self.programs.get(&(kind, prim))
    }
}

fn held_index(detections: &DetectionSet) -> Option<usize> {
    (0..detections.len()).find(|&k| detections.labels[k].held)
}

/// Whether the detected letter already sits in a matching bowl, judged
/// purely from (possibly noisy) detected centers.
fn looks_placed(detections: &DetectionSet, letter: usize) -> bool {
    let (lr, lc) = detections.positions[letter];
    let color = detections.labels[letter].color;
    let r2 = (BOWL_INTERIOR_RADIUS * BOWL_INTERIOR_RADIUS) as f64;
    (0..detections.len()).any(|k| {
        let lab = &detections.labels[k];
        if lab.kind != ObjectKind::Bowl || lab.color != color {
            return false;
        }
        let (br, bc) = detections.positions[k];
        (lr - br) * (lr - br) + (lc - bc) * (lc - bc) <= r2
    })
}

/// Chooses what to act on next: a primitive and the detection index it
/// targets. Decisions use only the detection set and the command, so noisy
/// detections produce imperfect but plausible choices.
pub fn high_level_policy(
    detections: &DetectionSet,
    gripper_pos: (f64, f64),
    command: &CommandVector,
) -> Result<(Prim, usize), SurrogateError> {
    let held = held_index(detections);
    match (command.pick_slot, command.place_slot) {
        // Single-target command: fetch one named letter into one named bowl.
        (Some(glyph), Some(color)) => {
            if held.is_some() {
                let k = (0..detections.len())
                    .find(|&k| {
                        detections.labels[k].kind == ObjectKind::Bowl
                            && detections.labels[k].color == color
                    })
                    .ok_or_else(|| SurrogateError::TargetAbsent(format!("{} bowl", color.name())))?;
                Ok((Prim::Place, k))
            } else {
                let k = (0..detections.len())
                    .find(|&k| detections.labels[k].glyph == Some(glyph))
                    .ok_or_else(|| {
                        SurrogateError::TargetAbsent(format!("letter {}", glyph.as_char()))
                    })?;
                Ok((Prim::Pick, k))
            }
        }
        // Sort-everything command: clear the nearest unplaced letter, then
        // drop it in its color-matched bowl.
        (None, None) => {
            if let Some(h) = held {
                let color = detections.labels[h].color;
                let k = (0..detections.len())
                    .find(|&k| {
                        detections.labels[k].kind == ObjectKind::Bowl
                            && detections.labels[k].color == color
                    })
                    .ok_or_else(|| SurrogateError::TargetAbsent(format!("{} bowl", color.name())))?;
                Ok((Prim::Place, k))
            } else {
                let mut best: Option<(f64, usize)> = None;
                for k in 0..detections.len() {
                    let lab = &detections.labels[k];
                    if lab.kind != ObjectKind::Letter || looks_placed(detections, k) {
                        continue;
                    }
                    let (r, c) = detections.positions[k];
                    let d = (r - gripper_pos.0).powi(2) + (c - gripper_pos.1).powi(2);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
                let (_, k) = best
                    .ok_or_else(|| SurrogateError::TargetAbsent("unplaced letter".into()))?;
                Ok((Prim::Pick, k))
            }
        }
        _ => unreachable!("command templates bind both slots or neither"),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScriptedOutcome {
    pub success: bool,
    pub steps: u32,
    pub total_return: f64,
}

/// Runs a whole episode under the scripted hierarchy: detect, choose a
/// target, sample the affordance, act. Surrogate errors end the episode
/// early; the environment keeps the final say on success.
pub fn run_scripted_episode(
    task: &crate::TaskSpec,
    ep: &crate::EpisodeConfig,
    command: &CommandVector,
    programs: &ProgramSet,
    detector: &super::detect::DetectorConfig,
    rng: &mut ChaCha8Rng,
) -> ScriptedOutcome {
    use crate::sim::{check_success, reset, step};
    use crate::surrogate::action::compose;
    use crate::surrogate::detect::detect_objects;

    let (mut scene, _) = reset(task, ep).expect("episode config must be satisfiable");
    let mut total = 0.0;
    loop {
        let det = detect_objects(&scene, detector, rng);
        let gripper = (scene.gripper_pos.0 as f64, scene.gripper_pos.1 as f64);
        let action = high_level_policy(&det, gripper, command)
            .and_then(|choice| low_level_policy(&det, choice, programs, rng));
        let act = match action {
            Ok(a) => a,
            Err(_) => break,
        };
        let out = step(&scene, compose(&act, &det), task);
        total += out.reward.total;
        scene = out.scene;
        if out.done {
            break;
        }
    }
    ScriptedOutcome {
        success: check_success(&scene, task),
        steps: scene.step_count,
        total_return: total,
    }
}

/// Turns a high-level choice into a full structured action by sampling the
/// target's affordance map.
pub fn low_level_policy(
    detections: &DetectionSet,
    choice: (Prim, usize),
    programs: &ProgramSet,
    rng: &mut ChaCha8Rng,
) -> Result<StructuredAction, SurrogateError> {
    let (prim, index) = choice;
    let kind = detections.labels[index].kind;
    let program = programs
        .get(kind, prim)
        .ok_or(SurrogateError::MissingProgram { kind, prim })?;
    let side = 2 * detections.crop_radius;
    let map = interpret_affordance(program, &detections.crops[index], side)?;
    let residual = sample_from_affordance(&map, rng);
    Ok(StructuredAction::new(prim, index, residual))
}
