use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dsl::{AffordanceProgram, DslError, DslOp};

/// A normalized action heatmap over a square crop. Probabilities sum to 1.
#[derive(Debug, Clone)]
pub struct AffordanceMap {
    side: usize,
    probs: Vec<f64>,
}

impl AffordanceMap {
    /// Builds a map from raw nonnegative weights, normalizing them to sum
    /// to 1. Zero total mass falls back to uniform, matching the
    /// interpreter's normalize op.
    pub fn from_weights(side: usize, mut weights: Vec<f64>) -> AffordanceMap {
        assert_eq!(weights.len(), side * side, "weights must fill the crop");
        for v in weights.iter_mut() {
            *v = v.max(0.0);
        }
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            for v in weights.iter_mut() {
                *v /= sum;
            }
        } else {
            weights.fill(1.0 / (side * side) as f64);
        }
        AffordanceMap {
            side,
            probs: weights,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.side + col]
    }

    /// Highest-probability cell; ties resolve to the first in row-major
    /// order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0usize;
        for (k, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = k;
            }
        }
        (best / self.side, best % self.side)
    }
}

/// Runs a program over one detection crop. The working buffer starts as the
/// crop's depth occupancy; every op must leave it finite.
///
/// `crop` is channel-major rgb+depth, `4 * side * side` values.
pub fn interpret_affordance(
    program: &AffordanceProgram,
    crop: &[f64],
    side: usize,
) -> Result<AffordanceMap, DslError> {
    program.validate()?;
    assert_eq!(crop.len(), 4 * side * side, "crop must be rgb+depth");
    let depth = &crop[3 * side * side..];
    let occupancy: Vec<bool> = depth.iter().map(|&d| d > 0.0).collect();
    let mut buf: Vec<f64> = occupancy.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect();

    for (index, op) in program.ops.iter().enumerate() {
        apply_op(op, &mut buf, &occupancy, side);
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(DslError::NonFinite {
                name: program.name.clone(),
                index,
                op: op.name(),
            });
        }
    }
    Ok(AffordanceMap { side, probs: buf })
}

/// Draws a cell from the map and returns its offset from the crop's center
/// cell in (row, col) pixels. Crops are cut with the object center at index
/// `side / 2`, so an offset of zero lands exactly on the detected center.
pub fn sample_from_affordance(map: &AffordanceMap, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u: f64 = rng.gen();
    // CDF walk; rounding can leave the accumulated mass a hair under 1, so
    // the final cell absorbs the tail.
    let mut idx = map.probs.len() - 1;
    let mut acc = 0.0;
    for (k, p) in map.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            idx = k;
            break;
        }
    }
    let center = (map.side / 2) as f64;
    (
        (idx / map.side) as f64 - center,
        (idx % map.side) as f64 - center,
    )
}

fn apply_op(op: &DslOp, buf: &mut [f64], occupancy: &[bool], side: usize) {
    match op {
        DslOp::ObjectMask => object_mask(buf, occupancy, side),
        DslOp::InteriorMask => interior_mask(buf, side),
        DslOp::GaussianBlur { sigma } => gaussian_blur(buf, side, *sigma),
        DslOp::DistanceTransform => distance_transform(buf, side),
        DslOp::Invert => {
            let max = buf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in buf.iter_mut() {
                *v = max - *v;
            }
        }
        DslOp::Power { gamma } => {
            for v in buf.iter_mut() {
                *v = v.powf(*gamma);
            }
        }
        DslOp::Add { c } => {
            for v in buf.iter_mut() {
                *v += c;
            }
        }
        DslOp::CenterGaussian { sigma } => {
            let center = (side / 2) as f64;
            let inv = 1.0 / (2.0 * sigma * sigma);
            for r in 0..side {
                for c in 0..side {
                    let dr = r as f64 - center;
                    let dc = c as f64 - center;
                    buf[r * side + c] = (-(dr * dr + dc * dc) * inv).exp();
                }
            }
        }
        DslOp::Edge => edge(buf, side),
        DslOp::Clamp0 => {
            for v in buf.iter_mut() {
                *v = v.max(0.0);
            }
        }
        DslOp::Normalize => {
            for v in buf.iter_mut() {
                *v = v.max(0.0);
            }
            let sum: f64 = buf.iter().sum();
            if sum > 0.0 {
                for v in buf.iter_mut() {
                    *v /= sum;
                }
            } else {
                // Empty support carries no signal; fall back to uniform so
                // the result is still a distribution.
                let uniform = 1.0 / buf.len() as f64;
                buf.fill(uniform);
            }
        }
    }
}

/// Keeps only the 8-connected occupancy component whose closest cell is
/// nearest the crop center. Clutter from neighboring objects that leaks
/// into the crop ends up in other components and is dropped.
fn object_mask(buf: &mut [f64], occupancy: &[bool], side: usize) {
    let n = side * side;
    let mut component = vec![u32::MAX; n];
    let mut best_component = u32::MAX;
    let mut best_dist = i64::MAX;
    let center = (side / 2) as i64;
    let mut next = 0u32;
    let mut queue = Vec::new();
    for seed in 0..n {
        if !occupancy[seed] || component[seed] != u32::MAX {
            continue;
        }
        let id = next;
        next += 1;
        component[seed] = id;
        queue.clear();
        queue.push(seed);
        let mut dist = i64::MAX;
        while let Some(cell) = queue.pop() {
            let (r, c) = ((cell / side) as i64, (cell % side) as i64);
            let d = (r - center) * (r - center) + (c - center) * (c - center);
            dist = dist.min(d);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= side as i64 || nc >= side as i64 {
                        continue;
                    }
                    let ncell = (nr * side as i64 + nc) as usize;
                    if occupancy[ncell] && component[ncell] == u32::MAX {
                        component[ncell] = id;
                        queue.push(ncell);
                    }
                }
            }
        }
        // First component to reach a given distance wins ties; scan order
        // is row-major, so the outcome is deterministic.
        if dist < best_dist {
            best_dist = dist;
            best_component = id;
        }
    }
    for k in 0..n {
        buf[k] = if occupancy[k] && component[k] == best_component {
            1.0
        } else {
            0.0
        };
    }
}

/// Marks cells enclosed by the current support: zero regions that a
/// 4-connected flood from the border cannot reach.
fn interior_mask(buf: &mut [f64], side: usize) {
    let n = side * side;
    let support: Vec<bool> = buf.iter().map(|&v| v > 0.0).collect();
    let mut outside = vec![false; n];
    let mut queue = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if r == 0 || c == 0 || r == side - 1 || c == side - 1 {
                let k = r * side + c;
                if !support[k] && !outside[k] {
                    outside[k] = true;
                    queue.push(k);
                }
            }
        }
    }
    while let Some(cell) = queue.pop() {
        let (r, c) = (cell / side, cell % side);
        let mut visit = |k: usize| {
            if !support[k] && !outside[k] {
                outside[k] = true;
                queue.push(k);
            }
        };
        if r > 0 {
            visit(cell - side);
        }
        if r + 1 < side {
            visit(cell + side);
        }
        if c > 0 {
            visit(cell - 1);
        }
        if c + 1 < side {
            visit(cell + 1);
        }
    }
    for k in 0..n {
        buf[k] = if !support[k] && !outside[k] { 1.0 } else { 0.0 };
    }
}

fn gaussian_blur(buf: &mut [f64], side: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for k in -radius..=radius {
        kernel.push((-(k * k) as f64 * inv).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for v in kernel.iter_mut() {
        *v /= norm;
    }
    // Separable passes with zero padding outside the crop.
    let mut tmp = vec![0.0; buf.len()];
    for r in 0..side as i64 {
        for c in 0..side as i64 {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let cc = c + ki as i64 - radius;
                if cc >= 0 && cc < side as i64 {
                    acc += w * buf[(r * side as i64 + cc) as usize];
                }
            }
            tmp[(r * side as i64 + c) as usize] = acc;
        }
    }
    for r in 0..side as i64 {
        for c in 0..side as i64 {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let rr = r + ki as i64 - radius;
                if rr >= 0 && rr < side as i64 {
                    acc += w * tmp[(rr * side as i64 + c) as usize];
                }
            }
            buf[(r * side as i64 + c) as usize] = acc;
        }
    }
}

/// Chessboard distance from each support cell to the nearest non-support
/// cell, where everything outside the crop counts as non-support.
/// Non-support cells read 0.
fn distance_transform(buf: &mut [f64], side: usize) {
    let padded = side + 2;
    let mut dist = vec![0i32; padded * padded];
    let mut frontier = Vec::new();
    for r in 0..padded {
        for c in 0..padded {
            let inner = r >= 1 && c >= 1 && r <= side && c <= side;
            let support = inner && buf[(r - 1) * side + (c - 1)] > 0.0;
            if support {
                dist[r * padded + c] = -1;
            } else {
                frontier.push(r * padded + c);
            }
        }
    }
    let mut depth = 0i32;
    let mut next = Vec::new();
    while !frontier.is_empty() {
        depth += 1;
        next.clear();
        for &cell in &frontier {
            let (r, c) = ((cell / padded) as i64, (cell % padded) as i64);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= padded as i64 || nc >= padded as i64 {
                        continue;
                    }
                    let k = (nr * padded as i64 + nc) as usize;
                    if dist[k] == -1 {
                        dist[k] = depth;
                        next.push(k);
                    }
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    for r in 0..side {
        for c in 0..side {
            buf[r * side + c] = dist[(r + 1) * padded + (c + 1)].max(0) as f64;
        }
    }
}

/// Support cells with at least one 4-neighbor off support; the crop border
/// counts as off support.
fn edge(buf: &mut [f64], side: usize) {
    let support: Vec<bool> = buf.iter().map(|&v| v > 0.0).collect();
    let off = |r: i64, c: i64| -> bool {
        if r < 0 || c < 0 || r >= side as i64 || c >= side as i64 {
            return true;
        }
        !support[(r * side as i64 + c) as usize]
    };
    for r in 0..side as i64 {
        for c in 0..side as i64 {
            let k = (r * side as i64 + c) as usize;
            let boundary = support[k]
                && (off(r - 1, c) || off(r + 1, c) || off(r, c - 1) || off(r, c + 1));
            buf[k] = if boundary { 1.0 } else { 0.0 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sim::glyphs::{in_bowl_interior, CROP_RADIUS};
    use crate::sim::{render, reset};
    use crate::surrogate::detect::{detect_objects, DetectorConfig};
    use crate::surrogate::dsl::{
        center_gaussian_candidate, reference_bowl_place, reference_letter_pick,
    };
    use crate::{EpisodeConfig, Glyph, ObjectKind, TaskSpec};

    const SIDE: usize = 2 * CROP_RADIUS;

    fn crop_for(kind: ObjectKind, glyph: Option<Glyph>) -> (Vec<f64>, (f64, f64), u8) {
        let task = TaskSpec::Lh { max_steps: 30 };
        let (scene, _) = reset(&task, &EpisodeConfig::default()).unwrap();
        let mut rng = stream(7, "afford-test", 0);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        for k in 0..det.len() {
            if det.labels[k].kind == kind && (glyph.is_none() || det.labels[k].glyph == glyph) {
                return (det.crops[k].clone(), det.positions[k], k as u8);
            }
        }
        panic!("no matching object detected");
    }

    #[test]
    fn mask_pick_is_uniform_over_the_target_component() {
        let (crop, _, _) = crop_for(ObjectKind::Letter, None);
        let map = interpret_affordance(&reference_letter_pick(), &crop, SIDE).unwrap();
        let depth = &crop[3 * SIDE * SIDE..];
        let sum: f64 = map.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let support: Vec<usize> = (0..SIDE * SIDE).filter(|&k| map.probs()[k] > 0.0).collect();
        assert!(!support.is_empty());
        let expected = 1.0 / support.len() as f64;
        for &k in &support {
            assert!(depth[k] > 0.0, "positive mass off the object at {k}");
            assert!((map.probs()[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_place_lands_inside_the_bowl_not_on_the_rim() {
        let (crop, _, _) = crop_for(ObjectKind::Bowl, None);
        let map = interpret_affordance(&reference_bowl_place(), &crop, SIDE).unwrap();
        let depth = &crop[3 * SIDE * SIDE..];
        let mut hits = 0usize;
        for r in 0..SIDE {
            for c in 0..SIDE {
                let p = map.at(r, c);
                if p > 0.0 {
                    hits += 1;
                    let dr = r as i32 - CROP_RADIUS as i32;
                    let dc = c as i32 - CROP_RADIUS as i32;
                    assert!(in_bowl_interior(dr, dc), "mass outside interior");
                    assert_eq!(depth[r * SIDE + c], 0.0, "mass on the rim");
                }
            }
        }
        assert!(hits > 100, "interior unexpectedly small: {hits}");
    }

    #[test]
    fn center_gaussian_peaks_on_the_hollow_center_of_o() {
        let task = TaskSpec::Sh {
            pick_letter: Glyph::O,
            place_color: crate::ColorId::Red,
            max_steps: 10,
        };
        let (scene, _) = reset(&task, &EpisodeConfig::default()).unwrap();
        let mut rng = stream(7, "afford-test", 1);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        let k = (0..det.len())
            .find(|&k| det.labels[k].glyph == Some(Glyph::O))
            .unwrap();
        let map = interpret_affordance(&center_gaussian_candidate(), &det.crops[k], SIDE).unwrap();
        let (r, c) = map.argmax();
        assert_eq!((r, c), (CROP_RADIUS as usize, CROP_RADIUS as usize));
        // The peak sits on unoccupied pixels, so a pick aimed there misses.
        let depth = &det.crops[k][3 * SIDE * SIDE..];
        assert_eq!(depth[r * SIDE + c], 0.0);
    }

    #[test]
    fn empty_crop_normalizes_to_uniform() {
        let crop = vec![0.0; 4 * SIDE * SIDE];
        let map = interpret_affordance(&reference_letter_pick(), &crop, SIDE).unwrap();
        let uniform = 1.0 / (SIDE * SIDE) as f64;
        assert!(map.probs().iter().all(|&p| (p - uniform).abs() < 1e-15));
    }

    #[test]
    fn non_finite_intermediate_is_reported_with_its_op() {
        let prog = AffordanceProgram {
            name: "bad".into(),
            ops: vec![
                DslOp::ObjectMask,
                DslOp::Add { c: -2.0 },
                DslOp::Power { gamma: 0.5 },
                DslOp::Normalize,
            ],
        };
        let (crop, _, _) = crop_for(ObjectKind::Letter, None);
        let err = interpret_affordance(&prog, &crop, SIDE).unwrap_err();
        match err {
            DslError::NonFinite { index, op, .. } => {
                assert_eq!(index, 2);
                assert_eq!(op, "power");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn sampling_tracks_the_distribution() {
        let mut probs = vec![0.0; SIDE * SIDE];
        probs[0] = 0.25;
        probs[SIDE * SIDE - 1] = 0.75;
        let map = AffordanceMap { side: SIDE, probs };
        let mut rng = stream(11, "sample-test", 0);
        let mut first = 0usize;
        let n = 20_000usize;
        for _ in 0..n {
            let (dr, dc) = sample_from_affordance(&map, &mut rng);
            let r = (dr + CROP_RADIUS as f64) as usize;
            let c = (dc + CROP_RADIUS as f64) as usize;
            assert!(r == 0 && c == 0 || r == SIDE - 1 && c == SIDE - 1);
            if r == 0 {
                first += 1;
            }
        }
        let f = first as f64 / n as f64;
        assert!((f - 0.25).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn distance_transform_rings_match_hand_counts() {
        // 5x5 crop fully occupied: chessboard distance to the virtual
        // outside is 1 on the outer ring, 2 on the next, 3 at the center.
        let side = 5usize;
        let mut crop = vec![0.0; 4 * side * side];
        for v in crop[3 * side * side..].iter_mut() {
            *v = 1.0;
        }
        let prog = AffordanceProgram {
            name: "dt".into(),
            ops: vec![DslOp::DistanceTransform, DslOp::Normalize],
        };
        let map = interpret_affordance(&prog, &crop, side).unwrap();
        let expected_raw = [
            1.0, 1.0, 1.0, 1.0, 1.0, //
            1.0, 2.0, 2.0, 2.0, 1.0, //
            1.0, 2.0, 3.0, 2.0, 1.0, //
            1.0, 2.0, 2.0, 2.0, 1.0, //
            1.0, 1.0, 1.0, 1.0, 1.0,
        ];
        let total: f64 = expected_raw.iter().sum();
        for k in 0..side * side {
            assert!((map.probs()[k] - expected_raw[k] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_marks_the_support_boundary() {
        // A 3x3 block in a 5x5 crop: all 8 perimeter cells of the block are
        // edges, the single inner cell is not.
        let side = 5usize;
        let mut crop = vec![0.0; 4 * side * side];
        for r in 1..4 {
            for c in 1..4 {
                crop[3 * side * side + r * side + c] = 1.0;
            }
        }
        let prog = AffordanceProgram {
            name: "edges".into(),
            ops: vec![DslOp::Edge, DslOp::Normalize],
        };
        let map = interpret_affordance(&prog, &crop, side).unwrap();
        assert_eq!(map.at(2, 2), 0.0);
        for (r, c) in [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)] {
            assert!((map.at(r, c) - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn object_mask_drops_clutter_from_neighbors() {
        // Two blobs: a 2x2 near the center and a lone far cell. Only the
        // central component should survive.
        let side = 9usize;
        let mut crop = vec![0.0; 4 * side * side];
        let d = 3 * side * side;
        for (r, c) in [(4, 4), (4, 5), (5, 4), (5, 5)] {
            crop[d + r * side + c] = 1.0;
        }
        crop[d] = 1.0; // corner clutter
        let prog = AffordanceProgram {
            name: "mask".into(),
            ops: vec![DslOp::ObjectMask, DslOp::Normalize],
        };
        let map = interpret_affordance(&prog, &crop, side).unwrap();
        assert_eq!(map.at(0, 0), 0.0);
        assert!((map.at(4, 4) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rendered_scene_round_trips_through_detection_crops() {
        // Make sure crops taken from a live render feed the interpreter the
        // depth classes it expects (letters and rims both count as support).
        let task = TaskSpec::Lh { max_steps: 30 };
        let (scene, _) = reset(&task, &EpisodeConfig::default()).unwrap();
        let obs = render(&scene);
        assert!(obs.depth.iter().any(|&v| v > 0.0));
        let mut rng = stream(7, "afford-test", 2);
        let det = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        for k in 0..det.len() {
            let map =
                interpret_affordance(&reference_letter_pick(), &det.crops[k], SIDE).unwrap();
            let occupied: f64 = map
                .probs()
                .iter()
                .enumerate()
                .filter(|(i, _)| det.crops[k][3 * SIDE * SIDE + i] > 0.0)
                .map(|(_, p)| p)
                .sum();
            assert!((occupied - 1.0).abs() < 1e-9, "object {k} mass leaked");
        }
    }
}
