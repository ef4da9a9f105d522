use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DslError {
    #[error("program does not parse: {0}")]
    Parse(String),
    #[error("program {name:?}: {reason}")]
    Invalid { name: String, reason: String },
    #[error("program {name:?}: op {index} ({op}) produced a non-finite value")]
    NonFinite {
        name: String,
        index: usize,
        op: &'static str,
    },
}

/// One image-pipeline op. The working buffer is a single-channel raster the
/// size of the crop.
///
/// Unknown keys inside an op object are rejected by `parse`, not serde:
/// internally tagged enums ignore `deny_unknown_fields`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DslOp {
    /// Occupancy (depth > 0) restricted to the connected component nearest
    /// the crop center.
    ObjectMask,
    /// Enclosed zero regions of the current support (holes).
    InteriorMask,
    GaussianBlur { sigma: f64 },
    /// Chessboard distance from each support cell to the nearest
    /// non-support cell; 0 off support.
    DistanceTransform,
    /// x -> max(buffer) - x.
    Invert,
    Power { gamma: f64 },
    Add { c: f64 },
    /// Overwrites the buffer with a Gaussian bump centered on the crop.
    CenterGaussian { sigma: f64 },
    /// Support cells adjacent to non-support (4-neighborhood).
    Edge,
    /// x -> max(x, 0).
    Clamp0,
    /// Clamp negatives to zero then scale to sum 1; an all-zero buffer
    /// becomes uniform.
    Normalize,
}

impl DslOp {
    pub fn name(&self) -> &'static str {
        match self {
            DslOp::ObjectMask => "object_mask",
            DslOp::InteriorMask => "interior_mask",
            DslOp::GaussianBlur { .. } => "gaussian_blur",
            DslOp::DistanceTransform => "distance_transform",
            DslOp::Invert => "invert",
            DslOp::Power { .. } => "power",
            DslOp::Add { .. } => "add",
            DslOp::CenterGaussian { .. } => "center_gaussian",
            DslOp::Edge => "edge",
            DslOp::Clamp0 => "clamp0",
            DslOp::Normalize => "normalize",
        }
    }
}

/// A declarative affordance pipeline: named, ordered ops, final op
/// `normalize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffordanceProgram {
    pub name: String,
    pub ops: Vec<DslOp>,
}

/// Keys each op may carry besides its tag.
fn reject_unknown_op_keys(v: &serde_json::Value) -> Result<(), DslError> {
    let Some(ops) = v.get("ops").and_then(serde_json::Value::as_array) else {
        return Ok(()); // shape errors are serde's job
    };
    for (i, op) in ops.iter().enumerate() {
        let Some(map) = op.as_object() else { continue };
        let name = map.get("op").and_then(serde_json::Value::as_str).unwrap_or("");
        let allowed: &[&str] = match name {
            "gaussian_blur" | "center_gaussian" => &["op", "sigma"],
            "power" => &["op", "gamma"],
            "add" => &["op", "c"],
            _ => &["op"],
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(DslError::Parse(format!("op {i}: unknown field {key:?}")));
            }
        }
    }
    Ok(())
}

impl AffordanceProgram {
    pub fn parse(json: &str) -> Result<AffordanceProgram, DslError> {
        let v: serde_json::Value =
            serde_json::from_str(json).map_err(|e| DslError::Parse(e.to_string()))?;
        AffordanceProgram::from_value(&v)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<AffordanceProgram, DslError> {
        reject_unknown_op_keys(v)?;
        let prog: AffordanceProgram =
            serde_json::from_value(v.clone()).map_err(|e| DslError::Parse(e.to_string()))?;
        prog.validate()?;
        Ok(prog)
    }

    /// Schema checks beyond shape: parameter ranges and the final-normalize
    /// rule.
    pub fn validate(&self) -> Result<(), DslError> {
        let invalid = |reason: String| DslError::Invalid {
            name: self.name.clone(),
            reason,
        };
        if self.name.is_empty() {
            return Err(DslError::Invalid {
                name: String::new(),
                reason: "empty program name".into(),
            });
        }
        if self.ops.is_empty() {
            return Err(invalid("program has no ops".into()));
        }
        if !matches!(self.ops.last(), Some(DslOp::Normalize)) {
            return Err(invalid("final op must be normalize".into()));
        }
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                DslOp::GaussianBlur { sigma } | DslOp::CenterGaussian { sigma } => {
                    if !(sigma.is_finite() && *sigma > 0.0) {
                        return Err(invalid(format!("op {i}: sigma must be finite and > 0")));
                    }
                }
                DslOp::Power { gamma } => {
                    if !(gamma.is_finite() && *gamma > 0.0) {
                        return Err(invalid(format!("op {i}: gamma must be finite and > 0")));
                    }
                }
                DslOp::Add { c } => {
                    if !c.is_finite() {
                        return Err(invalid(format!("op {i}: c must be finite")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Reference pick program: act anywhere on the object's own pixels.
pub fn reference_letter_pick() -> AffordanceProgram {
    AffordanceProgram {
        name: "mask_pick".into(),
        ops: vec![DslOp::ObjectMask, DslOp::Normalize],
    }
}

/// Reference place program: act inside the bowl's enclosed interior.
pub fn reference_bowl_place() -> AffordanceProgram {
    AffordanceProgram {
        name: "interior_place".into(),
        ops: vec![DslOp::ObjectMask, DslOp::InteriorMask, DslOp::Normalize],
    }
}

/// Deliberately suboptimal candidate: always aims at the crop center, which
/// fails on glyphs with unoccupied centers.
pub fn center_gaussian_candidate() -> AffordanceProgram {
    AffordanceProgram {
        name: "center_gaussian".into(),
        ops: vec![DslOp::CenterGaussian { sigma: 3.0 }, DslOp::Normalize],
    }
}
