//! Environment invariants checked against independent oracles: seeded
//! determinism, conservation of scene structure during rollouts, and the
//! placement-separation contract of the two scene generation modes.

use rand::Rng;

use super::CheckResult;
use crate::rng::stream;
use crate::sim::env::{check_success, render, reset, step};
use crate::sim::types::{
    EpisodeConfig, ObjectSpec, OverlapMode, Prim, PrimitiveAction, SceneState, TaskSpec,
    WORKSPACE,
};

fn lh_task() -> TaskSpec {
    TaskSpec::Lh { max_steps: 30 }
}

fn config_for_seed(seed: u64, mode: OverlapMode) -> EpisodeConfig {
    EpisodeConfig {
        seed,
        overlap_mode: mode,
        ..EpisodeConfig::default()
    }
}

fn random_action(rng: &mut rand_chacha::ChaCha8Rng) -> PrimitiveAction {
    PrimitiveAction {
        prim: if rng.gen::<bool>() { Prim::Pick } else { Prim::Place },
        position: (
            rng.gen_range(0..WORKSPACE as i32),
            rng.gen_range(0..WORKSPACE as i32),
        ),
    }
}

/// All workspace cells covered by the object's mask at its current center.
fn occupied_cells(o: &ObjectSpec) -> Vec<(i32, i32)> {
    o.mask
        .occupied_offsets()
        .map(|(dr, dc)| (o.center.0 + dr, o.center.1 + dc))
        .collect()
}

/// Minimum chessboard distance between occupied cells of any two objects,
/// computed by brute force, independent of the occupancy grid the scene
/// generator uses internally.
fn min_pairwise_separation(scene: &SceneState) -> i32 {
    let cells: Vec<Vec<(i32, i32)>> = scene.objects.iter().map(occupied_cells).collect();
    let mut best = i32::MAX;
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            for &(ar, ac) in &cells[a] {
                for &(br, bc) in &cells[b] {
                    let d = (ar - br).abs().max((ac - bc).abs());
                    best = best.min(d);
                    if best == 0 {
                        return 0;
                    }
                }
            }
        }
    }
    best
}

pub fn run_env_checks() -> Vec<CheckResult> {
    let task = lh_task();
    let mut results = Vec::new();

    // Identical seeds must reproduce the scene, the render, and a full
    // rollout bit for bit.
    let mut deterministic = true;
    let mut detail = String::from("20 seeds, 12-step rollouts identical");
    'seeds: for seed in 0..20u64 {
        let cfg = config_for_seed(seed, OverlapMode::NonOverlap);
        let (s1, o1) = reset(&task, &cfg).expect("reset");
        let (s2, o2) = reset(&task, &cfg).expect("reset");
        if s1 != s2 || o1 != o2 || render(&s1) != render(&s2) {
            deterministic = false;
            detail = format!("seed {seed}: reset differs between runs");
            break;
        }
        let mut ra = stream(seed, "env-check-actions", 0);
        let mut rb = stream(seed, "env-check-actions", 0);
        let (mut a, mut b) = (s1, s2);
        for k in 0..12 {
            let out_a = step(&a, random_action(&mut ra), &task);
            let out_b = step(&b, random_action(&mut rb), &task);
            if out_a.scene != out_b.scene
                || out_a.obs != out_b.obs
                || out_a.reward != out_b.reward
                || out_a.done != out_b.done
                || out_a.info != out_b.info
            {
                deterministic = false;
                detail = format!("seed {seed}: step {k} diverged");
                break 'seeds;
            }
            if out_a.done {
                break;
            }
            a = out_a.scene;
            b = out_b.scene;
        }
    }
    results.push(CheckResult {
        name: "env-seeded-determinism".into(),
        pass: deterministic,
        detail,
    });

    // Structure conservation along random rollouts.
    let mut conserved = true;
    let mut detail = String::from("40 seeds: counts, held-id, score set, step counter all consistent");
    'conserve: for seed in 100..140u64 {
        let cfg = config_for_seed(seed, OverlapMode::NonOverlap);
        let (mut scene, _) = reset(&task, &cfg).expect("reset");
        let n_objects = scene.objects.len();
        let letter_ids: Vec<u8> = scene.letters().map(|o| o.id).collect();
        let mut rng = stream(seed, "env-check-actions", 1);
        for _ in 0..30 {
            let prev_scored = scene.scored_letters.clone();
            let prev_steps = scene.step_count;
            let out = step(&scene, random_action(&mut rng), &task);
            scene = out.scene;
            let held_ok = scene
                .held
                .map(|id| letter_ids.contains(&id))
                .unwrap_or(true);
            let scored_ok = prev_scored.iter().all(|id| scene.scored_letters.contains(id));
            let reward_ok =
                out.reward.total == out.reward.dense + out.reward.sparse
                    && out.reward.total.is_finite();
            if scene.objects.len() != n_objects
                || !held_ok
                || !scored_ok
                || scene.step_count != prev_steps + 1
                || !reward_ok
            {
                conserved = false;
                detail = format!("seed {seed}: invariant broken at step {}", prev_steps + 1);
                break 'conserve;
            }
            if out.done {
                break;
            }
        }
    }
    results.push(CheckResult {
        name: "env-rollout-conservation".into(),
        pass: conserved,
        detail,
    });

    // Non-overlap generation: brute-force pairwise separation >= 2 px.
    let mut min_no = i32::MAX;
    for seed in 0..100u64 {
        let cfg = config_for_seed(seed, OverlapMode::NonOverlap);
        let (scene, _) = reset(&task, &cfg).expect("reset");
        min_no = min_no.min(min_pairwise_separation(&scene));
    }
    results.push(CheckResult {
        name: "env-nonoverlap-separation".into(),
        pass: min_no >= 2,
        detail: format!("min pairwise chessboard distance over 100 scenes = {min_no} (>= 2)"),
    });

    // Arbitrary-overlap generation must actually produce closer packings.
    let mut min_ao = i32::MAX;
    for seed in 0..100u64 {
        let cfg = config_for_seed(seed, OverlapMode::ArbitraryOverlap);
        let (scene, _) = reset(&task, &cfg).expect("reset");
        min_ao = min_ao.min(min_pairwise_separation(&scene));
    }
    results.push(CheckResult {
        name: "env-overlap-mode-allows-contact".into(),
        pass: min_ao < 2,
        detail: format!("min pairwise chessboard distance over 100 scenes = {min_ao} (< 2)"),
    });

    // Fresh episodes never start solved, for either horizon.
    let sh = TaskSpec::Sh {
        pick_letter: crate::sim::types::Glyph::V,
        place_color: crate::sim::types::ColorId::Red,
        max_steps: 10,
    };
    let mut unsolved = true;
    for seed in 0..50u64 {
        for (t, mode) in [
            (&task, OverlapMode::NonOverlap),
            (&sh, OverlapMode::NonOverlap),
            (&task, OverlapMode::ArbitraryOverlap),
        ] {
            let cfg = config_for_seed(seed, mode);
            let (scene, _) = reset(t, &cfg).expect("reset");
            if check_success(&scene, t) {
                unsolved = false;
            }
        }
    }
    results.push(CheckResult {
        name: "env-reset-never-solved".into(),
        pass: unsolved,
        detail: "150 resets across horizons and modes, none start solved".into(),
    });

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_env_checks_pass() {
        for r in run_env_checks() {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
