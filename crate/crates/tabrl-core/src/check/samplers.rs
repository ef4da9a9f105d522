//! Statistical verification of the stochastic pieces: affordance program
//! outputs (normalization, support, the hollow-center property), the
//! affordance sampler's distribution, and the detector's noise scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stats::{chi_square_crit_99, chi_square_expected, chi_square_uniform};
use super::CheckResult;
use crate::rng::stream;
use crate::sim::glyphs::{bowl_mask, in_bowl_interior, letter_mask, CROP_RADIUS};
use crate::sim::types::{ColorId, Glyph, ObjectKind, ObjectSpec, SceneState};
use crate::surrogate::affordance::{interpret_affordance, sample_from_affordance, AffordanceMap};
use crate::surrogate::detect::{
    detect_objects, synthetic_bowl_crop, synthetic_letter_crop, DetectorConfig,
};
use crate::surrogate::dsl::{reference_bowl_place, reference_letter_pick};

const SIDE: usize = 2 * CROP_RADIUS;

pub fn run_sampler_checks() -> Vec<CheckResult> {
    let mut results = Vec::new();

    // Reference pick program: normalized, supported only on occupied
    // pixels, zero at the hollow center of 'O'.
    let pick = reference_letter_pick();
    let mut worst_sum = 0.0f64;
    let mut support_ok = true;
    for g in Glyph::ALL {
        let crop = synthetic_letter_crop(g, ColorId::Red, CROP_RADIUS);
        let map = interpret_affordance(&pick, &crop, SIDE).expect("pick program runs");
        let sum: f64 = map.probs().iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        let depth = &crop[3 * SIDE * SIDE..];
        for (k, &p) in map.probs().iter().enumerate() {
            if p < 0.0 || (p > 0.0 && depth[k] <= 0.0) {
                support_ok = false;
            }
        }
    }
    results.push(CheckResult {
        name: "sampler-pick-program-normalized-on-support".into(),
        pass: worst_sum <= 1e-9 && support_ok,
        detail: format!("worst |sum-1| {worst_sum:.2e}, support-only {support_ok}"),
    });

    let crop_o = synthetic_letter_crop(Glyph::O, ColorId::Green, CROP_RADIUS);
    let map_o = interpret_affordance(&pick, &crop_o, SIDE).expect("pick on O");
    let center = map_o.at(SIDE / 2, SIDE / 2);
    results.push(CheckResult {
        name: "sampler-pick-O-center-is-zero".into(),
        pass: center == 0.0,
        detail: format!("affordance at the hollow center = {center}"),
    });

    // Reference place program: normalized, every positive cell strictly
    // inside the bowl interior (never on the rim, never outside).
    let place = reference_bowl_place();
    let crop_b = synthetic_bowl_crop(ColorId::Blue, CROP_RADIUS);
    let map_b = interpret_affordance(&place, &crop_b, SIDE).expect("place program runs");
    let sum_b: f64 = map_b.probs().iter().sum();
    let mut interior_only = true;
    for r in 0..SIDE {
        for c in 0..SIDE {
            if map_b.at(r, c) > 0.0 {
                let dr = r as i32 - CROP_RADIUS as i32;
                let dc = c as i32 - CROP_RADIUS as i32;
                if !in_bowl_interior(dr, dc) {
                    interior_only = false;
                }
            }
        }
    }
    let center_mass = map_b.at(SIDE / 2, SIDE / 2);
    results.push(CheckResult {
        name: "sampler-place-program-interior-only".into(),
        pass: (sum_b - 1.0).abs() <= 1e-9 && interior_only && center_mass > 0.0,
        detail: format!(
            "|sum-1| {:.2e}, interior-only {interior_only}, center mass {center_mass:.4}",
            (sum_b - 1.0).abs()
        ),
    });

    // Sampler distribution: uniform map over the full crop.
    let n_draws = 100_000usize;
    let cells = SIDE * SIDE;
    let uniform = AffordanceMap::from_weights(SIDE, vec![1.0; cells]);
    let mut rng = stream(43, "sampler-check", 0);
    let mut counts = vec![0u64; cells];
    for _ in 0..n_draws {
        let (dr, dc) = sample_from_affordance(&uniform, &mut rng);
        let r = (dr + (SIDE / 2) as f64) as usize;
        let c = (dc + (SIDE / 2) as f64) as usize;
        counts[r * SIDE + c] += 1;
    }
    let stat = chi_square_uniform(&counts);
    let crit = chi_square_crit_99(cells - 1);
    results.push(CheckResult {
        name: "sampler-uniform-chi-square".into(),
        pass: stat < crit,
        detail: format!("chi^2 {stat:.1} < crit(99%, df {}) {crit:.1}", cells - 1),
    });

    // Sampler distribution: two cells at 3:1 odds.
    let mut weights = vec![0.0; cells];
    weights[5 * SIDE + 7] = 3.0;
    weights[16 * SIDE + 20] = 1.0;
    let skewed = AffordanceMap::from_weights(SIDE, weights);
    let mut rng = stream(43, "sampler-check", 1);
    let mut two = [0u64; 2];
    let mut stray = None;
    for _ in 0..n_draws {
        let (dr, dc) = sample_from_affordance(&skewed, &mut rng);
        let r = (dr + (SIDE / 2) as f64) as usize;
        let c = (dc + (SIDE / 2) as f64) as usize;
        match (r, c) {
            (5, 7) => two[0] += 1,
            (16, 20) => two[1] += 1,
            other => stray = Some(other),
        }
    }
    let stat2 = chi_square_expected(&two, &[0.75, 0.25]);
    let crit2 = chi_square_crit_99(1);
    results.push(CheckResult {
        name: "sampler-two-pixel-chi-square".into(),
        pass: stray.is_none() && stat2 < crit2,
        detail: match stray {
            Some(pos) => format!("draw landed outside support at {pos:?}"),
            None => format!("chi^2 {stat2:.3} < crit(99%, df 1) {crit2:.3}"),
        },
    });

    results.push(detection_noise_check());
    results
}

/// Scene whose objects all sit at least 4 sigma from every border, so the
/// detector's position clamp cannot bias the measured noise scale.
fn interior_scene() -> SceneState {
    let spots: [(i32, i32); 6] = [(30, 30), (30, 48), (30, 66), (66, 30), (66, 48), (66, 66)];
    let glyphs = [Glyph::V, Glyph::O, Glyph::T];
    let colors = [ColorId::Red, ColorId::Green, ColorId::Blue];
    let mut objects = Vec::new();
    for k in 0..3 {
        objects.push(ObjectSpec {
            id: k as u8,
            kind: ObjectKind::Letter,
            glyph: Some(glyphs[k]),
            color: colors[k],
            center: spots[k],
            mask: letter_mask(glyphs[k]),
        });
    }
    for k in 0..3 {
        objects.push(ObjectSpec {
            id: 3 + k as u8,
            kind: ObjectKind::Bowl,
            glyph: None,
            color: colors[k],
            center: spots[3 + k],
            mask: bowl_mask(),
        });
    }
    SceneState {
        objects,
        held: None,
        step_count: 0,
        rng: ChaCha8Rng::seed_from_u64(0),
        gripper_pos: (48, 48),
        first_pick_rewarded: false,
        scored_letters: Vec::new(),
    }
}

pub fn detection_noise_check() -> CheckResult {
    let scene = interior_scene();
    let cfg = DetectorConfig::default();
    // Detection order is letters then bowls by ascending id, which matches
    // the construction order of interior_scene.
    let truth: Vec<(f64, f64)> = scene
        .objects
        .iter()
        .map(|o| (o.center.0 as f64, o.center.1 as f64))
        .collect();

    let n_detections = 100_000usize;
    let per_call = scene.objects.len();
    let calls = n_detections.div_ceil(per_call);
    let mut rng = stream(43, "sampler-check", 2);
    let mut dr = Vec::with_capacity(calls * per_call);
    let mut dc = Vec::with_capacity(calls * per_call);
    for _ in 0..calls {
        let d = detect_objects(&scene, &cfg, &mut rng);
        for (i, &(r, c)) in d.positions.iter().enumerate() {
            dr.push(r - truth[i].0);
            dc.push(c - truth[i].1);
        }
    }
    let std = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    };
    let (sr, sc) = (std(&dr), std(&dc));
    CheckResult {
        name: "detector-noise-scale".into(),
        pass: (5.8..=6.2).contains(&sr) && (5.8..=6.2).contains(&sc),
        detail: format!(
            "row std {sr:.3}, col std {sc:.3} over {} detections (configured sigma {})",
            dr.len(),
            cfg.sigma
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_sampler_checks_pass() {
        for r in run_sampler_checks() {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
