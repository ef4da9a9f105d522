use serde::{Deserialize, Serialize};

use super::detect::DetectionSet;
use crate::sim::glyphs::CROP_RADIUS;
use crate::{Prim, PrimitiveAction, WORKSPACE};

/// Mid-level action: a primitive, the index of the detection it targets,
/// and a continuous pixel offset within that detection's crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredAction {
    pub prim: Prim,
    pub index: usize,
    pub residual: (f64, f64),
}

impl StructuredAction {
    pub fn new(prim: Prim, index: usize, residual: (f64, f64)) -> StructuredAction {
        let r = CROP_RADIUS as f64;
        assert!(
            residual.0.abs() <= r && residual.1.abs() <= r,
            "residual {residual:?} outside the crop"
        );
        StructuredAction {
            prim,
            index,
            residual,
        }
    }
}

/// Grounds a structured action into workspace pixels: detected center plus
/// rounded residual, clamped to the image.
pub fn compose(action: &StructuredAction, detections: &DetectionSet) -> PrimitiveAction {
    let (pr, pc) = detections.positions[action.index];
    let row = pr.round() as i32 + action.residual.0.round() as i32;
    let col = pc.round() as i32 + action.residual.1.round() as i32;
    let hi = WORKSPACE as i32 - 1;
    PrimitiveAction {
        prim: action.prim,
        position: (row.clamp(0, hi), col.clamp(0, hi)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::detect::DetectionLabel;
    use crate::ObjectKind;

    fn single_detection(pos: (f64, f64)) -> DetectionSet {
        DetectionSet {
            positions: vec![pos],
            crops: vec![vec![0.0; 4 * 24 * 24]],
            labels: vec![DetectionLabel {
                kind: ObjectKind::Letter,
                glyph: None,
                color: crate::ColorId::Red,
                held: false,
            }],
            crop_radius: CROP_RADIUS,
        }
    }

    #[test]
    fn residual_offsets_the_detected_center() {
        let det = single_detection((40.0, 50.0));
        let a = StructuredAction::new(Prim::Pick, 0, (3.0, -2.0));
        assert_eq!(compose(&a, &det).position, (43, 48));
    }

    #[test]
    fn fractional_parts_round_to_the_nearest_pixel() {
        let det = single_detection((40.2, 49.8));
        let a = StructuredAction::new(Prim::Place, 0, (0.6, -0.6));
        // Center rounds to (40, 50), residual rounds to (1, -1).
        assert_eq!(compose(&a, &det).position, (41, 49));
    }

    #[test]
    fn composed_position_stays_inside_the_workspace() {
        let det = single_detection((1.0, 94.0));
        let a = StructuredAction::new(Prim::Pick, 0, (-12.0, 12.0));
        assert_eq!(compose(&a, &det).position, (0, 95));
    }

    #[test]
    #[should_panic(expected = "outside the crop")]
    fn oversized_residuals_are_rejected_at_construction() {
        StructuredAction::new(Prim::Pick, 0, (13.0, 0.0));
    }
}
