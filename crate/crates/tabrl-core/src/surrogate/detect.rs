use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::sim::glyphs::{bowl_mask, letter_mask};
use crate::sim::render;
use crate::sim::types::{ColorId, Glyph, ObjectKind, ObjectSpec, RawObservation, SceneState, WORKSPACE};

/// Detector settings. The noise scale defaults to half the crop radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub crop_radius: usize,
    pub sigma: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            crop_radius: 12,
            sigma: 6.0,
        }
    }
}

impl DetectorConfig {
    pub fn noiseless() -> Self {
        DetectorConfig {
            sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn crop_side(&self) -> usize {
        2 * self.crop_radius
    }
}

/// Identity information about one detection. Visible to scripted policies
/// and metrics only; the learned agent never reads labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionLabel {
    pub kind: ObjectKind,
    pub glyph: Option<crate::sim::types::Glyph>,
    pub color: crate::sim::types::ColorId,
    /// True when this object is in the gripper; its position then reports
    /// the gripper, keeping the detection count constant.
    pub held: bool,
}

/// Noisy per-object detections in fixed order: letters then bowls,
/// ascending id. Cardinality and order are constant across an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    /// (row, col) per object, true center + Gaussian noise, clamped.
    pub positions: Vec<(f64, f64)>,
    /// RGB-D patches, channel-major [4][side][side], values in [0,1],
    /// zero-padded outside the workspace, centered at the rounded noisy
    /// position.
    pub crops: Vec<Vec<f64>>,
    pub labels: Vec<DetectionLabel>,
    pub crop_radius: usize,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Rounded pixel center of detection i; crops are cut around this.
    pub fn pixel_center(&self, i: usize) -> (i32, i32) {
        (
            self.positions[i].0.round() as i32,
            self.positions[i].1.round() as i32,
        )
    }
}

/// Cut a zero-padded channel-major RGB-D patch around `center`.
pub fn cut_crop(obs: &RawObservation, center: (i32, i32), radius: usize) -> Vec<f64> {
    let side = 2 * radius;
    let mut crop = vec![0.0; 4 * side * side];
    let r0 = center.0 - radius as i32;
    let c0 = center.1 - radius as i32;
    for i in 0..side {
        let r = r0 + i as i32;
        if r < 0 || r >= WORKSPACE as i32 {
            continue;
        }
        for j in 0..side {
            let c = c0 + j as i32;
            if c < 0 || c >= WORKSPACE as i32 {
                continue;
            }
            let src = (r as usize * WORKSPACE + c as usize) * 3;
            let dst = i * side + j;
            let plane = side * side;
            crop[dst] = obs.rgb[src];
            crop[plane + dst] = obs.rgb[src + 1];
            crop[2 * plane + dst] = obs.rgb[src + 2];
            crop[3 * plane + dst] = obs.depth[r as usize * WORKSPACE + c as usize];
        }
    }
    crop
}

/// Noisy object detection: per-axis Gaussian noise with the configured
/// sigma, resampled on every call; a held letter reports the gripper
/// position instead of its stale table pose.
pub fn detect_objects(
    scene: &SceneState,
    cfg: &DetectorConfig,
    rng: &mut ChaCha8Rng,
) -> DetectionSet {
    let obs = render(scene);
    let noise = Normal::new(0.0, cfg.sigma).expect("sigma >= 0");
    let mut order: Vec<&_> = scene.objects.iter().collect();
    order.sort_by_key(|o| (o.kind == ObjectKind::Bowl, o.id));

    let mut positions = Vec::with_capacity(order.len());
    let mut crops = Vec::with_capacity(order.len());
    let mut labels = Vec::with_capacity(order.len());
    let hi = (WORKSPACE - 1) as f64;
    for o in order {
        let held = scene.held == Some(o.id);
        let true_pos = if held {
            (scene.gripper_pos.0 as f64, scene.gripper_pos.1 as f64)
        } else {
            (o.center.0 as f64, o.center.1 as f64)
        };
        let pos = (
            (true_pos.0 + noise.sample(rng)).clamp(0.0, hi),
            (true_pos.1 + noise.sample(rng)).clamp(0.0, hi),
        );
        positions.push(pos);
        crops.push(cut_crop(
            &obs,
            (pos.0.round() as i32, pos.1.round() as i32),
            cfg.crop_radius,
        ));
        labels.push(DetectionLabel {
            kind: o.kind,
            glyph: o.glyph,
            color: o.color,
            held,
        });
    }
    DetectionSet {
        positions,
        crops,
        labels,
        crop_radius: cfg.crop_radius,
    }
}

fn single_object_crop(spec: ObjectSpec, radius: usize) -> Vec<f64> {
    use rand::SeedableRng;
    let center = spec.center;
    let scene = SceneState {
        objects: vec![spec],
        held: None,
        step_count: 0,
        rng: ChaCha8Rng::seed_from_u64(0),
        gripper_pos: center,
        first_pick_rewarded: false,
        scored_letters: Vec::new(),
    };
    cut_crop(&render(&scene), center, radius)
}

/// Clean crop of one letter on an otherwise empty table, centered exactly;
/// input for program probes and affordance rendering.
pub fn synthetic_letter_crop(glyph: Glyph, color: ColorId, radius: usize) -> Vec<f64> {
    let mid = WORKSPACE as i32 / 2;
    single_object_crop(
        ObjectSpec {
            id: 0,
            kind: ObjectKind::Letter,
            glyph: Some(glyph),
            color,
            center: (mid, mid),
            mask: letter_mask(glyph),
        },
        radius,
    )
}

/// Clean centered crop of one bowl on an otherwise empty table.
pub fn synthetic_bowl_crop(color: ColorId, radius: usize) -> Vec<f64> {
    let mid = WORKSPACE as i32 / 2;
    single_object_crop(
        ObjectSpec {
            id: 0,
            kind: ObjectKind::Bowl,
            glyph: None,
            color,
            center: (mid, mid),
            mask: bowl_mask(),
        },
        radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::reset;
    use crate::sim::types::{ColorId, EpisodeConfig, Glyph, TaskSpec};
    use rand::SeedableRng;

    fn setup() -> SceneState {
        let task = TaskSpec::Sh {
            pick_letter: Glyph::V,
            place_color: ColorId::Red,
            max_steps: 6,
        };
        reset(&task, &EpisodeConfig::default()).unwrap().0
    }

    #[test]
    fn zero_noise_recovers_true_centers_in_fixed_order() {
        let scene = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        assert_eq!(det.len(), 6);
        // Letters (ids 0..2) then bowls (ids 3..5).
        for (i, label) in det.labels.iter().enumerate() {
            let expected_kind = if i < 3 {
                ObjectKind::Letter
            } else {
                ObjectKind::Bowl
            };
            assert_eq!(label.kind, expected_kind);
        }
        for (i, o) in scene.objects.iter().enumerate() {
            assert_eq!(det.positions[i], (o.center.0 as f64, o.center.1 as f64));
        }
    }

    #[test]
    fn crops_are_centered_on_the_object_at_zero_noise() {
        let scene = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        let side = det.crop_radius * 2;
        let plane = side * side;
        // The letter's occupied pixels appear at mask-relative offsets from
        // the crop center in the depth channel.
        let letter = &scene.objects[0];
        let crop = &det.crops[0];
        for (dr, dc) in letter.mask.occupied_offsets() {
            let i = (dr + det.crop_radius as i32) as usize;
            let j = (dc + det.crop_radius as i32) as usize;
            assert!(crop[3 * plane + i * side + j] > 0.0);
        }
    }

    #[test]
    fn out_of_bounds_regions_are_zero_padded() {
        let scene = setup();
        let obs = render(&scene);
        let crop = cut_crop(&obs, (0, 0), 12);
        let side = 24;
        // Rows/cols with negative workspace coordinates are all zero.
        for ch in 0..4 {
            for i in 0..12 {
                for j in 0..side {
                    assert_eq!(crop[ch * side * side + i * side + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn held_letter_reports_gripper_position_with_flag() {
        let mut scene = setup();
        scene.held = Some(0);
        scene.gripper_pos = (20, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        assert!(det.labels[0].held);
        assert_eq!(det.positions[0], (20.0, 30.0));
        assert_eq!(det.labels.iter().filter(|l| l.held).count(), 1);
    }

    #[test]
    fn noise_is_resampled_per_call_and_seeded() {
        let scene = setup();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let d1 = detect_objects(&scene, &DetectorConfig::default(), &mut r1);
        let d2 = detect_objects(&scene, &DetectorConfig::default(), &mut r1);
        assert_ne!(d1.positions, d2.positions);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let d3 = detect_objects(&scene, &DetectorConfig::default(), &mut r2);
        assert_eq!(d1.positions, d3.positions);
    }
}
