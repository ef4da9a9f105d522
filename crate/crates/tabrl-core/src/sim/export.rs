//! Debug exports: scene snapshots as JSON, rasters as binary PGM/PPM.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::types::{ObjectKind, RawObservation, SceneState, WORKSPACE};

#[derive(Debug, Serialize)]
struct ObjectSnapshot {
    id: u8,
    kind: ObjectKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    glyph: Option<char>,
    color: &'static str,
    center: (i32, i32),
}

/// JSON snapshot of object identities, poses, and the held id.
pub fn scene_to_json(scene: &SceneState) -> serde_json::Value {
    let objects: Vec<ObjectSnapshot> = scene
        .objects
        .iter()
        .map(|o| ObjectSnapshot {
            id: o.id,
            kind: o.kind,
            glyph: o.glyph.map(|g| g.as_char()),
            color: o.color.name(),
            center: o.center,
        })
        .collect();
    serde_json::json!({
        "objects": objects,
        "held": scene.held,
        "step_count": scene.step_count,
    })
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Binary PGM (P5, maxval 255) of the depth channel.
pub fn write_depth_pgm(obs: &RawObservation, path: &Path) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", WORKSPACE, WORKSPACE)?;
    let bytes: Vec<u8> = obs.depth.iter().map(|&v| to_u8(v)).collect();
    f.write_all(&bytes)
}

/// Binary PPM (P6, maxval 255) of the RGB channels.
pub fn write_rgb_ppm(obs: &RawObservation, path: &Path) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P6\n{} {}\n255\n", WORKSPACE, WORKSPACE)?;
    let bytes: Vec<u8> = obs.rgb.iter().map(|&v| to_u8(v)).collect();
    f.write_all(&bytes)
}

/// Generic grayscale PGM writer for arbitrary small rasters (affordance
/// heatmaps); values are scaled so the max maps to 255.
pub fn write_scaled_pgm(values: &[f64], h: usize, w: usize, path: &Path) -> io::Result<()> {
    assert_eq!(values.len(), h * w);
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", w, h)?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    f.write_all(&bytes)
}
