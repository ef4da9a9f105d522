use crate::surrogate::command::CommandVector;
use crate::surrogate::detect::DetectionSet;
use crate::WORKSPACE;

/// What the learner actually sees: one row per detected object, each row a
/// crop plus its position, an in-hand flag, and the full command encoding.
/// Object identity is never given as a label; the agent has to read it out
/// of the crop pixels and tie it to the command one-hots.
#[derive(Debug, Clone, PartialEq)]
pub struct ReformulatedObservation {
    /// Channel-major rgb+depth crops, `4 * side * side` each.
    pub crops: Vec<Vec<f64>>,
    /// Detected centers normalized to [-1, 1] per axis.
    pub positions: Vec<(f64, f64)>,
    /// 1.0 for the detection riding in the gripper, else 0.0.
    pub held: Vec<f64>,
    /// Flat command encoding, appended whole to every row.
    pub lang: Vec<f64>,
    pub crop_side: usize,
}

impl ReformulatedObservation {
    pub fn n_objects(&self) -> usize {
        self.crops.len()
    }
}

/// Builds the learner's view from a detection pass and the episode command.
pub fn build_observation(
    detections: &DetectionSet,
    command: &CommandVector,
) -> ReformulatedObservation {
    let half = (WORKSPACE - 1) as f64 / 2.0;
    ReformulatedObservation {
        crops: detections.crops.clone(),
        positions: detections
            .positions
            .iter()
            .map(|&(r, c)| (r / half - 1.0, c / half - 1.0))
            .collect(),
        held: detections
            .labels
            .iter()
            .map(|l| if l.held { 1.0 } else { 0.0 })
            .collect(),
        lang: command.flat(),
        crop_side: 2 * detections.crop_radius,
    }
}

/// Replay-ready form: crop channels quantized to bytes. Every raster value
/// the simulator emits is k/255, so the round trip is value-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactObs {
    crops: Vec<Vec<u8>>,
    positions: Vec<(f64, f64)>,
    held: Vec<f64>,
    lang: Vec<f64>,
    crop_side: usize,
}

impl CompactObs {
    pub fn from_obs(obs: &ReformulatedObservation) -> CompactObs {
        CompactObs {
            crops: obs
                .crops
                .iter()
                .map(|crop| {
                    crop.iter()
                        .map(|&v| {
                            let q = (v * 255.0).round();
                            debug_assert_eq!(q / 255.0, v, "raster value {v} is not k/255");
                            q as u8
                        })
                        .collect()
                })
                .collect(),
            positions: obs.positions.clone(),
            held: obs.held.clone(),
            lang: obs.lang.clone(),
            crop_side: obs.crop_side,
        }
    }

    pub fn to_obs(&self) -> ReformulatedObservation {
        ReformulatedObservation {
            crops: self
                .crops
                .iter()
                .map(|crop| crop.iter().map(|&q| q as f64 / 255.0).collect())
                .collect(),
            positions: self.positions.clone(),
            held: self.held.clone(),
            lang: self.lang.clone(),
            crop_side: self.crop_side,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::sim::reset;
    use crate::surrogate::detect::{detect_objects, DetectorConfig};
    use crate::{ColorId, EpisodeConfig, Glyph, TaskSpec};

    fn live_obs() -> ReformulatedObservation {
        let task = TaskSpec::Sh {
            pick_letter: Glyph::V,
            place_color: ColorId::Red,
            max_steps: 10,
        };
        let (scene, _) = reset(&task, &EpisodeConfig::default()).unwrap();
        let mut rng = stream(3, "obs-test", 0);
        let det = detect_objects(&scene, &DetectorConfig::default(), &mut rng);
        build_observation(&det, &CommandVector::sh(Glyph::V, ColorId::Red))
    }

    #[test]
    fn rows_carry_positions_flags_and_the_whole_command() {
        let obs = live_obs();
        assert_eq!(obs.n_objects(), 6);
        assert_eq!(obs.lang.len(), CommandVector::FLAT_LEN);
        assert_eq!(obs.held, vec![0.0; 6]);
        for &(r, c) in &obs.positions {
            assert!((-1.0..=1.0).contains(&r) && (-1.0..=1.0).contains(&c));
        }
        assert_eq!(obs.crops[0].len(), 4 * obs.crop_side * obs.crop_side);
    }

    #[test]
    fn byte_quantization_round_trips_exactly() {
        let obs = live_obs();
        let back = CompactObs::from_obs(&obs).to_obs();
        assert_eq!(obs, back, "quantization must be lossless on k/255 rasters");
    }
}
