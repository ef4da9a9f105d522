use crate::sim::glyphs::CROP_RADIUS;
use crate::surrogate::action::StructuredAction;
use crate::Prim;

/// Raw squashed policy output, all coordinates in [-1, 1]:
/// primitive sign, target index, and two residual pixels.
pub type ContinuousAction = [f64; 4];

/// Maps between the squashed box the policy lives in and structured
/// (primitive, index, residual) actions over `n_objects` detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionCodec {
    pub n_objects: usize,
}

impl ActionCodec {
    pub fn new(n_objects: usize) -> ActionCodec {
        assert!(n_objects > 0, "cannot act over zero detections");
        ActionCodec { n_objects }
    }

    /// Coordinate 0 picks the primitive by sign, coordinate 1 selects an
    /// index by uniform binning, coordinates 2..4 scale to residual pixels.
    pub fn decode(&self, u: &ContinuousAction) -> StructuredAction {
        let prim = if u[0] > 0.0 { Prim::Place } else { Prim::Pick };
        let n = self.n_objects;
        let raw = (((u[1] + 1.0) / 2.0) * n as f64).floor() as i64;
        let index = raw.clamp(0, n as i64 - 1) as usize;
        let r = CROP_RADIUS as f64;
        StructuredAction::new(prim, index, (u[2] * r, u[3] * r))
    }

    /// Centers each coordinate inside its decode region, so surrogate
    /// actions stored in replay decode back to the same primitive action.
    pub fn encode_action(&self, a: &StructuredAction) -> ContinuousAction {
        assert!(a.index < self.n_objects, "index {} of {}", a.index, self.n_objects);
        let u0 = match a.prim {
            Prim::Pick => -0.5,
            Prim::Place => 0.5,
        };
        let u1 = 2.0 * (a.index as f64 + 0.5) / self.n_objects as f64 - 1.0;
        let r = CROP_RADIUS as f64;
        // 0.999 keeps encoded actions strictly inside the open tanh box
        // while still rounding back to +-radius.
        let clip = |v: f64| (v / r).clamp(-0.999, 0.999);
        [u0, u1, clip(a.residual.0), clip(a.residual.1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_bins_cover_the_interval_evenly() {
        let codec = ActionCodec::new(6);
        // The bin edges are at u1 = -1 + k/3.
        assert_eq!(codec.decode(&[-0.5, -1.0, 0.0, 0.0]).index, 0);
        assert_eq!(codec.decode(&[-0.5, -0.99, 0.0, 0.0]).index, 0);
        assert_eq!(codec.decode(&[-0.5, -0.6, 0.0, 0.0]).index, 1);
        assert_eq!(codec.decode(&[-0.5, 0.0, 0.0, 0.0]).index, 3);
        assert_eq!(codec.decode(&[-0.5, 0.99, 0.0, 0.0]).index, 5);
        // u1 = +1 falls on the closing edge and clamps into the last bin.
        assert_eq!(codec.decode(&[-0.5, 1.0, 0.0, 0.0]).index, 5);
    }

    #[test]
    fn primitive_splits_on_sign() {
        let codec = ActionCodec::new(2);
        assert_eq!(codec.decode(&[-1e-9, 0.0, 0.0, 0.0]).prim, Prim::Pick);
        assert_eq!(codec.decode(&[0.0, 0.0, 0.0, 0.0]).prim, Prim::Pick);
        assert_eq!(codec.decode(&[1e-9, 0.0, 0.0, 0.0]).prim, Prim::Place);
    }

    #[test]
    fn residuals_scale_to_the_crop_radius() {
        let codec = ActionCodec::new(2);
        let a = codec.decode(&[0.5, 0.0, 1.0, -1.0]);
        assert_eq!(a.residual, (12.0, -12.0));
    }

    proptest! {
        /// Structured actions on the integer residual lattice survive
        /// encode-decode with identical rounded placement.
        #[test]
        fn encode_then_decode_preserves_the_grounded_action(
            n in 1usize..9,
            prim_place in any::<bool>(),
            index in 0usize..9,
            dr in -12i32..=12,
            dc in -12i32..=12,
        ) {
            let index = index % n;
            let codec = ActionCodec::new(n);
            let prim = if prim_place { Prim::Place } else { Prim::Pick };
            let a = StructuredAction::new(prim, index, (dr as f64, dc as f64));
            let b = codec.decode(&codec.encode_action(&a));
            prop_assert_eq!(b.prim, a.prim);
            prop_assert_eq!(b.index, a.index);
            prop_assert_eq!(b.residual.0.round() as i32, dr);
            prop_assert_eq!(b.residual.1.round() as i32, dc);
        }

        /// Decode never produces an out-of-range index or an oversized
        /// residual for any point of the box.
        #[test]
        fn decode_is_total_over_the_box(
            n in 1usize..9,
            u0 in -1.0f64..=1.0,
            u1 in -1.0f64..=1.0,
            u2 in -1.0f64..=1.0,
            u3 in -1.0f64..=1.0,
        ) {
            let a = ActionCodec::new(n).decode(&[u0, u1, u2, u3]);
            prop_assert!(a.index < n);
            prop_assert!(a.residual.0.abs() <= 12.0 && a.residual.1.abs() <= 12.0);
        }
    }
}
