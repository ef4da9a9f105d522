use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::glyphs::{bowl_mask, in_bowl_interior, letter_mask};
use super::types::*;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("placement infeasible for {kind:?} after {attempts} attempts: {constraint}")]
    PlacementInfeasible {
        kind: ObjectKind,
        attempts: usize,
        constraint: &'static str,
    },
    #[error("bad episode config: {0}")]
    BadConfig(String),
}

/// Minimum pairwise chessboard distance between object masks in
/// non-overlap mode.
pub const MIN_MASK_DISTANCE: i32 = 2;
/// Candidate draws per object (and whole-scene retries) before giving up.
pub const REJECTION_BUDGET: usize = 1000;

fn validate(task: &TaskSpec, cfg: &EpisodeConfig) -> Result<(), SimError> {
    if cfg.n_letters == 0 || cfg.n_bowls == 0 {
        return Err(SimError::BadConfig("need at least one letter and one bowl".into()));
    }
    if cfg.letter_set.len() < cfg.n_letters {
        return Err(SimError::BadConfig(format!(
            "letter_set has {} glyphs, need {}",
            cfg.letter_set.len(),
            cfg.n_letters
        )));
    }
    if cfg.color_set.len() < cfg.n_bowls {
        return Err(SimError::BadConfig(format!(
            "color_set has {} colors, need {} distinct bowl colors",
            cfg.color_set.len(),
            cfg.n_bowls
        )));
    }
    if let TaskSpec::Sh {
        pick_letter,
        place_color,
        ..
    } = task
    {
        if !cfg.letter_set.contains(pick_letter) {
            return Err(SimError::BadConfig(format!(
                "commanded glyph {pick_letter:?} not in letter_set"
            )));
        }
        if !cfg.color_set.contains(place_color) {
            return Err(SimError::BadConfig(format!(
                "commanded color {place_color:?} not in color_set"
            )));
        }
    }
    Ok(())
}

/// Chooses glyphs/colors for the episode. The commanded letter and bowl (SH)
/// always come first, so they get the lowest ids of their kind; detection
/// indices of commanded objects are therefore scene-independent, which is
/// what makes index selection learnable by a permutation-invariant policy.
fn sample_identities(
    task: &TaskSpec,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<Glyph>, Vec<ColorId>, Vec<ColorId>) {
    let mut glyphs: Vec<Glyph>;
    let mut bowl_colors: Vec<ColorId>;
    match task {
        TaskSpec::Sh {
            pick_letter,
            place_color,
            ..
        } => {
            let mut rest: Vec<Glyph> = cfg
                .letter_set
                .iter()
                .copied()
                .filter(|g| g != pick_letter)
                .collect();
            rest.shuffle(rng);
            glyphs = vec![*pick_letter];
            glyphs.extend(rest.into_iter().take(cfg.n_letters - 1));

            let mut rest: Vec<ColorId> = cfg
                .color_set
                .iter()
                .copied()
                .filter(|c| c != place_color)
                .collect();
            rest.shuffle(rng);
            bowl_colors = vec![*place_color];
            bowl_colors.extend(rest.into_iter().take(cfg.n_bowls - 1));
        }
        TaskSpec::Lh { .. } => {
            glyphs = cfg.letter_set.clone();
            glyphs.shuffle(rng);
            glyphs.truncate(cfg.n_letters);
            bowl_colors = cfg.color_set.clone();
            bowl_colors.shuffle(rng);
            bowl_colors.truncate(cfg.n_bowls);
        }
    }
    // Letter colors come from the bowls' colors so every letter has a
    // matching bowl; without replacement while possible.
    let mut pool = bowl_colors.clone();
    pool.shuffle(rng);
    let letter_colors: Vec<ColorId> = (0..cfg.n_letters).map(|i| pool[i % pool.len()]).collect();
    (glyphs, bowl_colors, letter_colors)
}

struct OccupancyGrid {
    // Existing occupancy dilated by chessboard radius (MIN_MASK_DISTANCE-1).
    dilated: Vec<bool>,
}

impl OccupancyGrid {
    fn new() -> Self {
        OccupancyGrid {
            dilated: vec![false; WORKSPACE * WORKSPACE],
        }
    }

    fn collides(&self, obj: &ObjectSpec) -> bool {
        obj.mask.occupied_offsets().any(|(dr, dc)| {
            let r = obj.center.0 + dr;
            let c = obj.center.1 + dc;
            self.dilated[r as usize * WORKSPACE + c as usize]
        })
    }

    fn paint(&mut self, obj: &ObjectSpec) {
        let rad = MIN_MASK_DISTANCE - 1;
        for (dr, dc) in obj.mask.occupied_offsets() {
            let r = obj.center.0 + dr;
            let c = obj.center.1 + dc;
            for er in -rad..=rad {
                for ec in -rad..=rad {
                    let (rr, cc) = (r + er, c + ec);
                    if rr >= 0 && cc >= 0 && (rr as usize) < WORKSPACE && (cc as usize) < WORKSPACE
                    {
                        self.dilated[rr as usize * WORKSPACE + cc as usize] = true;
                    }
                }
            }
        }
    }
}

fn place_objects(
    task: &TaskSpec,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ObjectSpec>, SimError> {
    let (glyphs, bowl_colors, letter_colors) = sample_identities(task, cfg, rng);
    let mut objects = Vec::with_capacity(cfg.n_letters + cfg.n_bowls);
    let mut grid = OccupancyGrid::new();

    // Bowls first (larger footprints), then letters; ids are letters
    // 0..n_letters then bowls n_letters.. so detection order is stable.
    let mut specs: Vec<(u8, ObjectKind, Option<Glyph>, ColorId, Mask)> = Vec::new();
    for (k, color) in bowl_colors.iter().enumerate() {
        specs.push((
            (cfg.n_letters + k) as u8,
            ObjectKind::Bowl,
            None,
            *color,
            bowl_mask(),
        ));
    }
    for (k, glyph) in glyphs.iter().enumerate() {
        specs.push((
            k as u8,
            ObjectKind::Letter,
            Some(*glyph),
            letter_colors[k],
            letter_mask(*glyph),
        ));
    }

    for (id, kind, glyph, color, mask) in specs {
        let (hh, hw) = (mask.half_h(), mask.half_w());
        let mut placed = false;
        for _attempt in 0..REJECTION_BUDGET {
            let r = rng.gen_range(hh..WORKSPACE as i32 - hh);
            let c = rng.gen_range(hw..WORKSPACE as i32 - hw);
            let candidate = ObjectSpec {
                id,
                kind,
                glyph,
                color,
                center: (r, c),
                mask: mask.clone(),
            };
            if cfg.overlap_mode == OverlapMode::NonOverlap && grid.collides(&candidate) {
                continue;
            }
            if cfg.overlap_mode == OverlapMode::NonOverlap {
                grid.paint(&candidate);
            }
            objects.push(candidate);
            placed = true;
            break;
        }
        if !placed {
            return Err(SimError::PlacementInfeasible {
                kind,
                attempts: REJECTION_BUDGET,
                constraint: "pairwise mask distance >= 2 px",
            });
        }
    }
    objects.sort_by_key(|o| o.id);
    Ok(objects)
}

/// Seeded scene generation. Scenes that would already satisfy the task are
/// resampled so a fresh episode never starts solved.
pub fn reset(task: &TaskSpec, cfg: &EpisodeConfig) -> Result<(SceneState, RawObservation), SimError> {
    validate(task, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..REJECTION_BUDGET {
        let objects = place_objects(task, cfg, &mut rng)?;
        let mut scene = SceneState {
            objects,
            held: None,
            step_count: 0,
            rng: rng.clone(),
            gripper_pos: (WORKSPACE as i32 / 2, WORKSPACE as i32 / 2),
            first_pick_rewarded: false,
            scored_letters: Vec::new(),
        };
        if check_success(&scene, task) {
            continue;
        }
        // Letters that happen to start correctly placed (possible under
        // arbitrary overlap) never pay a placement bonus.
        scene.scored_letters = scene
            .letters()
            .filter(|l| correctly_placed(&scene, l.id))
            .map(|l| l.id)
            .collect();
        scene.scored_letters.sort_unstable();
        let obs = render(&scene);
        return Ok((scene, obs));
    }
    Err(SimError::PlacementInfeasible {
        kind: ObjectKind::Letter,
        attempts: REJECTION_BUDGET,
        constraint: "scene must not start in a solved configuration",
    })
}

/// Deterministic top-down raster. Bowls first, letters over bowls, both in
/// ascending id order; the held letter is absent.
pub fn render(scene: &SceneState) -> RawObservation {
    let n = WORKSPACE * WORKSPACE;
    let mut rgb = Vec::with_capacity(n * 3);
    for _ in 0..n {
        rgb.extend_from_slice(&BACKGROUND_RGB);
    }
    let mut depth = vec![0.0; n];

    let mut paint = |obj: &ObjectSpec, d: f64| {
        let col = obj.color.rgb();
        for (dr, dc) in obj.mask.occupied_offsets() {
            let r = obj.center.0 + dr;
            let c = obj.center.1 + dc;
            if r >= 0 && c >= 0 && (r as usize) < WORKSPACE && (c as usize) < WORKSPACE {
                let i = r as usize * WORKSPACE + c as usize;
                rgb[i * 3..i * 3 + 3].copy_from_slice(&col);
                depth[i] = d;
            }
        }
    };

    let mut bowls: Vec<&ObjectSpec> = scene.bowls().collect();
    bowls.sort_by_key(|o| o.id);
    for b in bowls {
        paint(b, DEPTH_BOWL_RIM);
    }
    let mut letters: Vec<&ObjectSpec> = scene
        .letters()
        .filter(|l| scene.held != Some(l.id))
        .collect();
    letters.sort_by_key(|o| o.id);
    for l in letters {
        paint(l, DEPTH_LETTER);
    }

    RawObservation {
        rgb,
        depth,
        ee_holding: scene.held.is_some(),
    }
}

fn clamp_pos(p: (i32, i32)) -> (i32, i32) {
    (
        p.0.clamp(0, WORKSPACE as i32 - 1),
        p.1.clamp(0, WORKSPACE as i32 - 1),
    )
}

/// Letter currently sitting in the interior of a bowl of its own color.
pub fn correctly_placed(scene: &SceneState, letter_id: u8) -> bool {
    let letter = scene.object(letter_id);
    if scene.held == Some(letter_id) {
        return false;
    }
    scene.bowls().any(|b| {
        b.color == letter.color
            && in_bowl_interior(letter.center.0 - b.center.0, letter.center.1 - b.center.1)
    })
}

pub fn check_success(scene: &SceneState, task: &TaskSpec) -> bool {
    match task {
        TaskSpec::Sh {
            pick_letter,
            place_color,
            ..
        } => {
            let Some(letter) = scene.letters().find(|l| l.glyph == Some(*pick_letter)) else {
                return false;
            };
            if scene.held == Some(letter.id) {
                return false;
            }
            let Some(bowl) = scene.bowls().find(|b| b.color == *place_color) else {
                return false;
            };
            in_bowl_interior(
                letter.center.0 - bowl.center.0,
                letter.center.1 - bowl.center.1,
            )
        }
        TaskSpec::Lh { .. } => scene
            .letters()
            .map(|l| l.id)
            .collect::<Vec<_>>()
            .into_iter()
            .all(|id| correctly_placed(scene, id)),
    }
}

/// Whether picking this letter counts as task-correct.
fn pick_is_correct(prev: &SceneState, letter_id: u8, task: &TaskSpec) -> bool {
    match task {
        TaskSpec::Sh { pick_letter, .. } => prev.object(letter_id).glyph == Some(*pick_letter),
        TaskSpec::Lh { .. } => !correctly_placed(prev, letter_id),
    }
}

/// One pick-or-place primitive. Failed primitives change nothing but the
/// step count (and gripper position); done triggers on success or horizon.
pub fn step(scene: &SceneState, a: PrimitiveAction, task: &TaskSpec) -> StepOutcome {
    assert!(
        scene.step_count < task.max_steps(),
        "step on a terminal scene"
    );
    let pos = clamp_pos(a.position);
    let mut next = scene.clone();
    next.step_count += 1;
    next.gripper_pos = pos;

    let info = match a.prim {
        Prim::Pick => {
            if scene.held.is_some() {
                StepInfo {
                    executed_ok: false,
                    hit_object_id: None,
                    miss_kind: Some(MissKind::PickWhileHolding),
                }
            } else {
                // Topmost letter wins: highest id is drawn last.
                let hit = scene
                    .letters()
                    .filter(|l| l.covers(pos))
                    .map(|l| l.id)
                    .max();
                match hit {
                    Some(id) => {
                        next.held = Some(id);
                        if pick_is_correct(scene, id, task) && !next.first_pick_rewarded {
                            next.first_pick_rewarded = true;
                        }
                        StepInfo {
                            executed_ok: true,
                            hit_object_id: Some(id),
                            miss_kind: None,
                        }
                    }
                    None => StepInfo {
                        executed_ok: false,
                        hit_object_id: None,
                        miss_kind: Some(MissKind::PickMissedLetter),
                    },
                }
            }
        }
        Prim::Place => match scene.held {
            None => StepInfo {
                executed_ok: false,
                hit_object_id: None,
                miss_kind: Some(MissKind::PlaceWhileEmpty),
            },
            Some(held_id) => {
                let bowl = scene
                    .bowls()
                    .filter(|b| in_bowl_interior(pos.0 - b.center.0, pos.1 - b.center.1))
                    .map(|b| (b.id, b.center))
                    .max_by_key(|(id, _)| *id);
                match bowl {
                    Some((bowl_id, bowl_center)) => {
                        let letter = next
                            .objects
                            .iter_mut()
                            .find(|o| o.id == held_id)
                            .expect("held letter exists");
                        letter.center = bowl_center;
                        next.held = None;
                        if correctly_placed(&next, held_id)
                            && !next.scored_letters.contains(&held_id)
                        {
                            next.scored_letters.push(held_id);
                            next.scored_letters.sort_unstable();
                        }
                        StepInfo {
                            executed_ok: true,
                            hit_object_id: Some(bowl_id),
                            miss_kind: None,
                        }
                    }
                    None => StepInfo {
                        executed_ok: false,
                        hit_object_id: None,
                        miss_kind: Some(MissKind::PlaceOutsideBowl),
                    },
                }
            }
        },
    };

    let reward = compute_reward(scene, a, &next, task);
    let success = check_success(&next, task);
    let done = success || next.step_count >= task.max_steps();
    let obs = render(&next);
    StepOutcome {
        scene: next,
        obs,
        reward,
        done,
        info,
    }
}

/// Pure reward of a transition. Dense part: -0.05 per step, +0.3 once for
/// the first task-correct pick, -0.1 for wrong picks and wrong-bowl places,
/// LH +0.5 per newly correct letter. Sparse part: +1.0 on entering task
/// success.
pub fn compute_reward(
    prev: &SceneState,
    _a: PrimitiveAction,
    next: &SceneState,
    task: &TaskSpec,
) -> RewardBreakdown {
    let mut dense = -0.05;

    let picked = prev.held.is_none().then_some(next.held).flatten();
    if let Some(id) = picked {
        if next.first_pick_rewarded && !prev.first_pick_rewarded {
            dense += 0.3;
        }
        if !pick_is_correct(prev, id, task) {
            dense += -0.1;
        }
    }

    let placed = next.held.is_none().then_some(prev.held).flatten();
    if let Some(id) = placed {
        let letter = next.object(id);
        let bowl = next
            .bowls()
            .filter(|b| b.center == letter.center)
            .max_by_key(|b| b.id)
            .expect("deposit bowl exists");
        let wrong = match task {
            TaskSpec::Sh { place_color, .. } => bowl.color != *place_color,
            TaskSpec::Lh { .. } => bowl.color != letter.color,
        };
        if wrong {
            dense += -0.1;
        }
        if matches!(task, TaskSpec::Lh { .. }) {
            let newly = next.scored_letters.len() - prev.scored_letters.len();
            dense += 0.5 * newly as f64;
        }
    }

    let sparse = if check_success(next, task) && !check_success(prev, task) {
        1.0
    } else {
        0.0
    };
    RewardBreakdown::new(dense, sparse)
}

/// Convenience wrapper owning the scene and task for rollout loops.
#[derive(Debug, Clone)]
pub struct Env {
    pub task: TaskSpec,
    pub cfg: EpisodeConfig,
    pub scene: SceneState,
    pub done: bool,
}

impl Env {
    pub fn reset(task: TaskSpec, cfg: EpisodeConfig) -> Result<(Env, RawObservation), SimError> {
        let (scene, obs) = reset(&task, &cfg)?;
        Ok((
            Env {
                task,
                cfg,
                scene,
                done: false,
            },
            obs,
        ))
    }

    pub fn step(&mut self, a: PrimitiveAction) -> StepOutcome {
        let out = step(&self.scene, a, &self.task);
        self.scene = out.scene.clone();
        self.done = out.done;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh_task() -> TaskSpec {
        TaskSpec::Sh {
            pick_letter: Glyph::V,
            place_color: ColorId::Red,
            max_steps: 6,
        }
    }

    fn cfg(seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            seed,
            ..EpisodeConfig::default()
        }
    }

    fn find_letter<'s>(scene: &'s SceneState, g: Glyph) -> &'s ObjectSpec {
        scene.letters().find(|l| l.glyph == Some(g)).unwrap()
    }

    fn find_bowl<'s>(scene: &'s SceneState, c: ColorId) -> &'s ObjectSpec {
        scene.bowls().find(|b| b.color == c).unwrap()
    }

    /// Any occupied pixel of the letter, usable as a pick target.
    fn pick_pixel(scene: &SceneState, g: Glyph) -> (i32, i32) {
        let l = find_letter(scene, g);
        let (dr, dc) = l.mask.occupied_offsets().next().unwrap();
        (l.center.0 + dr, l.center.1 + dc)
    }

    #[test]
    fn same_seed_gives_identical_scene_and_observation() {
        let t = sh_task();
        let (s1, o1) = reset(&t, &cfg(17)).unwrap();
        let (s2, o2) = reset(&t, &cfg(17)).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(o1, o2);
        let (s3, _) = reset(&t, &cfg(18)).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn fresh_scene_is_not_solved_and_ids_are_canonical() {
        let t = sh_task();
        for seed in 0..20 {
            let (scene, obs) = reset(&t, &cfg(seed)).unwrap();
            assert!(!check_success(&scene, &t));
            assert!(!obs.ee_holding);
            // Commanded glyph gets letter id 0, commanded color the first
            // bowl id.
            assert_eq!(scene.object(0).glyph, Some(Glyph::V));
            assert_eq!(scene.object(3).color, ColorId::Red);
            assert_eq!(scene.objects.len(), 6);
        }
    }

    #[test]
    fn pick_on_background_fails_and_only_costs_the_step_penalty() {
        let t = sh_task();
        let (scene, _) = reset(&t, &cfg(3)).unwrap();
        // Find a pixel not covered by anything.
        let mut target = None;
        'outer: for r in 0..WORKSPACE as i32 {
            for c in 0..WORKSPACE as i32 {
                if scene.objects.iter().all(|o| !o.covers((r, c))) {
                    target = Some((r, c));
                    break 'outer;
                }
            }
        }
        let out = step(
            &scene,
            PrimitiveAction {
                prim: Prim::Pick,
                position: target.unwrap(),
            },
            &t,
        );
        assert!(!out.info.executed_ok);
        assert_eq!(out.info.miss_kind, Some(MissKind::PickMissedLetter));
        assert_eq!(out.reward.dense, -0.05);
        assert_eq!(out.reward.sparse, 0.0);
        assert_eq!(out.scene.held, None);
        // Scene unchanged apart from bookkeeping.
        assert_eq!(out.scene.objects, scene.objects);
    }

    #[test]
    fn pick_at_o_geometric_center_fails() {
        let t = TaskSpec::Sh {
            pick_letter: Glyph::O,
            place_color: ColorId::Red,
            max_steps: 6,
        };
        let (scene, _) = reset(&t, &cfg(5)).unwrap();
        let o = find_letter(&scene, Glyph::O);
        let out = step(
            &scene,
            PrimitiveAction {
                prim: Prim::Pick,
                position: o.center,
            },
            &t,
        );
        assert!(!out.info.executed_ok, "annular glyph center must miss");
    }

    #[test]
    fn solving_sh_in_two_steps_returns_1_2() {
        let t = sh_task();
        let (scene, _) = reset(&t, &cfg(11)).unwrap();
        let pick = step(
            &scene,
            PrimitiveAction {
                prim: Prim::Pick,
                position: pick_pixel(&scene, Glyph::V),
            },
            &t,
        );
        assert!(pick.info.executed_ok);
        assert_eq!(pick.scene.held, Some(0));
        assert!((pick.reward.total - 0.25).abs() < 1e-12);
        assert!(!pick.done);

        let bowl = find_bowl(&pick.scene, ColorId::Red);
        let place = step(
            &pick.scene,
            PrimitiveAction {
                prim: Prim::Place,
                position: bowl.center,
            },
            &t,
        );
        assert!(place.info.executed_ok);
        assert!(place.done);
        assert!((place.reward.total - 0.95).abs() < 1e-12);
        let ret = pick.reward.total + place.reward.total;
        assert!((ret - 1.2).abs() < 1e-12);
    }

    #[test]
    fn wrong_letter_pick_and_wrong_bowl_place_are_penalized() {
        let t = sh_task();
        let (scene, _) = reset(&t, &cfg(23)).unwrap();
        let wrong_glyph = scene
            .letters()
            .find(|l| l.glyph != Some(Glyph::V))
            .unwrap()
            .glyph
            .unwrap();
        let pick = step(
            &scene,
            PrimitiveAction {
                prim: Prim::Pick,
                position: pick_pixel(&scene, wrong_glyph),
            },
            &t,
        );
        assert!(pick.info.executed_ok);
        assert!((pick.reward.total - (-0.15)).abs() < 1e-12);

        let wrong_bowl = pick
            .scene
            .bowls()
            .find(|b| b.color != ColorId::Red)
            .unwrap()
            .center;
        let place = step(
            &pick.scene,
            PrimitiveAction {
                prim: Prim::Place,
                position: wrong_bowl,
            },
            &t,
        );
        assert!(place.info.executed_ok);
        assert!((place.reward.total - (-0.15)).abs() < 1e-12);
        assert!(!place.done);
    }

    #[test]
    fn horizon_exhaustion_sets_done_without_success() {
        let t = TaskSpec::Sh {
            pick_letter: Glyph::V,
            place_color: ColorId::Red,
            max_steps: 2,
        };
        let (scene, _) = reset(&t, &cfg(2)).unwrap();
        let noop = PrimitiveAction {
            prim: Prim::Place,
            position: (0, 0),
        };
        let s1 = step(&scene, noop, &t);
        assert!(!s1.done);
        let s2 = step(&s1.scene, noop, &t);
        assert!(s2.done);
        assert!(!check_success(&s2.scene, &t));
    }

    #[test]
    fn held_letter_vanishes_from_render_and_conservation_holds() {
        let t = sh_task();
        let (scene, _) = reset(&t, &cfg(31)).unwrap();
        let v = find_letter(&scene, Glyph::V);
        let v_pixels: Vec<(i32, i32)> = v
            .mask
            .occupied_offsets()
            .map(|(dr, dc)| (v.center.0 + dr, v.center.1 + dc))
            .collect();
        let out = step(
            &scene,
            PrimitiveAction {
                prim: Prim::Pick,
                position: pick_pixel(&scene, Glyph::V),
            },
            &t,
        );
        // Previously letter-colored pixels no longer show the letter depth
        // unless another object overlaps there (NO mode forbids overlap).
        for (r, c) in v_pixels {
            assert_ne!(out.obs.depth_at(r as usize, c as usize), DEPTH_LETTER);
        }
        // Glyph multiset unchanged: held letter still exists in the scene.
        let glyphs_before: Vec<_> = scene.letters().map(|l| l.glyph).collect();
        let glyphs_after: Vec<_> = out.scene.letters().map(|l| l.glyph).collect();
        assert_eq!(glyphs_before, glyphs_after);
    }

    #[test]
    fn lh_full_solve_totals_expected_rewards() {
        let t = TaskSpec::Lh { max_steps: 12 };
        let (mut scene, _) = reset(&t, &cfg(7)).unwrap();
        let mut sparse_total = 0.0;
        let mut bonus_count = 0;
        for _ in 0..3 {
            let target = scene
                .letters()
                .find(|l| !correctly_placed(&scene, l.id))
                .unwrap();
            let g = target.glyph.unwrap();
            let color = target.color;
            let pick = step(
                &scene,
                PrimitiveAction {
                    prim: Prim::Pick,
                    position: pick_pixel(&scene, g),
                },
                &t,
            );
            assert!(pick.info.executed_ok);
            sparse_total += pick.reward.sparse;
            let bowl = find_bowl(&pick.scene, color).center;
            let place = step(
                &pick.scene,
                PrimitiveAction {
                    prim: Prim::Place,
                    position: bowl,
                },
                &t,
            );
            assert!(place.info.executed_ok);
            if place.reward.dense > 0.0 {
                bonus_count += 1;
            }
            sparse_total += place.reward.sparse;
            scene = place.scene;
        }
        assert!(check_success(&scene, &t));
        assert_eq!(sparse_total, 1.0);
        assert_eq!(bonus_count, 3, "each letter pays its placement bonus once");
    }
}
