//! Render an affordance program to an 8-bit PGM: interpret the program on
//! a clean synthetic crop of one object and scale the probability map so
//! the largest cell is 255.

use std::path::Path;

use tabrl_core::sim::export::write_scaled_pgm;
use tabrl_core::surrogate::detect::{synthetic_bowl_crop, synthetic_letter_crop};
use tabrl_core::surrogate::{interpret_affordance, AffordanceMap, AffordanceProgram, DetectorConfig};
use tabrl_core::{ColorId, Glyph, ObjectKind};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("cannot read program {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("program error: {0}")]
    Program(#[from] tabrl_core::surrogate::DslError),
    #[error("write failed: {0}")]
    Write(std::io::Error),
}

/// Interpret `program` on a clean crop of the given object.
pub fn affordance_on_synthetic(
    program: &AffordanceProgram,
    kind: ObjectKind,
    glyph: Glyph,
    color: ColorId,
) -> Result<AffordanceMap, tabrl_core::surrogate::DslError> {
    let det = DetectorConfig::noiseless();
    let crop = match kind {
        ObjectKind::Letter => synthetic_letter_crop(glyph, color, det.crop_radius),
        ObjectKind::Bowl => synthetic_bowl_crop(color, det.crop_radius),
    };
    interpret_affordance(program, &crop, det.crop_side())
}

/// Load a program file, interpret it on a synthetic object crop, and write
/// the map as a PGM. Returns the map so callers can cross-check the pixels.
pub fn render_affordance(
    program_path: &Path,
    kind: ObjectKind,
    glyph: Glyph,
    color: ColorId,
    out: &Path,
) -> Result<AffordanceMap, RenderError> {
    let text = std::fs::read_to_string(program_path).map_err(|e| RenderError::Io {
        path: program_path.display().to_string(),
        source: e,
    })?;
    let program = AffordanceProgram::parse(&text)?;
    let map = affordance_on_synthetic(&program, kind, glyph, color)?;
    let side = map.side();
    let values: Vec<f64> = (0..side)
        .flat_map(|r| (0..side).map(move |c| (r, c)))
        .map(|(r, c)| map.at(r, c))
        .collect();
    write_scaled_pgm(&values, side, side, out).map_err(RenderError::Write)?;
    Ok(map)
}

/// Parse a binary PGM produced by the renderer back into gray levels.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    let header_end = bytes
        .windows(1)
        .enumerate()
        .filter(|(_, w)| w[0] == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or("truncated header")?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| e.to_string())?;
    let mut lines = header.lines();
    if lines.next() != Some("P5") {
        return Err("not a binary PGM".into());
    }
    let dims: Vec<usize> = lines
        .next()
        .ok_or("missing dimensions")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| format!("bad dimension: {e}")))
        .collect::<Result<_, _>>()?;
    let (w, h) = (dims[0], dims[1]);
    if lines.next() != Some("255") {
        return Err("expected 8-bit maxval".into());
    }
    let data = bytes[header_end + 1..].to_vec();
    if data.len() != w * h {
        return Err(format!("expected {} pixels, got {}", w * h, data.len()));
    }
    Ok((h, w, data))
}
