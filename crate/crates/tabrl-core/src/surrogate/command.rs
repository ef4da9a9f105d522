use regex::Regex;
use thiserror::Error;

use crate::sim::types::{ColorId, Glyph, HorizonKind};

#[derive(Debug, Error, PartialEq)]
pub enum CommandError {
    #[error("command matches no registered template: {0:?}")]
    UnknownTemplate(String),
    #[error("unknown glyph {0:?} in command")]
    UnknownGlyph(String),
    #[error("unknown color {0:?} in command")]
    UnknownColor(String),
}

/// Parsed command: template id plus slot values. The flat encoding is
/// index-free (one-hot over the glyph and color registries), so it is
/// invariant to any reordering of scene objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandVector {
    pub template_id: usize,
    pub pick_slot: Option<Glyph>,
    pub place_slot: Option<ColorId>,
}

impl CommandVector {
    pub const TEMPLATE_COUNT: usize = 2;
    /// Length of [`Self::flat`]: template one-hot + glyph one-hot + color
    /// one-hot.
    pub const FLAT_LEN: usize = Self::TEMPLATE_COUNT + Glyph::ALL.len() + ColorId::ALL.len();

    pub fn sh(pick: Glyph, place: ColorId) -> Self {
        CommandVector {
            template_id: 0,
            pick_slot: Some(pick),
            place_slot: Some(place),
        }
    }

    pub fn lh() -> Self {
        CommandVector {
            template_id: 1,
            pick_slot: None,
            place_slot: None,
        }
    }

    pub fn horizon_kind(&self) -> HorizonKind {
        if self.template_id == 0 {
            HorizonKind::Sh
        } else {
            HorizonKind::Lh
        }
    }

    /// Flat vector consumed by the agent: [template | glyph | color]
    /// one-hots, zeros for absent slots.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; Self::FLAT_LEN];
        v[self.template_id] = 1.0;
        if let Some(g) = self.pick_slot {
            v[Self::TEMPLATE_COUNT + g.index()] = 1.0;
        }
        if let Some(c) = self.place_slot {
            v[Self::TEMPLATE_COUNT + Glyph::ALL.len() + c.index()] = 1.0;
        }
        v
    }

    /// The natural-language form of this command.
    pub fn to_text(&self) -> String {
        match (self.pick_slot, self.place_slot) {
            (Some(g), Some(c)) => format!(
                "Pick the {} and place it in the {} bowl",
                g.as_char(),
                c.name()
            ),
            _ => "Put all letters in the bowl of the corresponding color".to_string(),
        }
    }
}

struct Template {
    id: usize,
    regex: Regex,
    has_slots: bool,
}

/// The two command templates with their slot grammars.
pub struct TemplateRegistry {
    templates: Vec<Template>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        TemplateRegistry {
            templates: vec![
                Template {
                    id: 0,
                    regex: Regex::new(
                        r"(?i)^pick\s+the\s+(\w+)\s+and\s+place\s+it\s+in\s+the\s+(\w+)\s+bowl$",
                    )
                    .unwrap(),
                    has_slots: true,
                },
                Template {
                    id: 1,
                    regex: Regex::new(
                        r"(?i)^put\s+all\s+letters\s+in\s+the\s+bowl\s+of\s+the\s+corresponding\s+color$",
                    )
                    .unwrap(),
                    has_slots: false,
                },
            ],
        }
    }
}

/// Pattern-matches a raw command against the registry; case-insensitive,
/// surrounding whitespace ignored.
pub fn parse_command(l: &str, registry: &TemplateRegistry) -> Result<CommandVector, CommandError> {
    let trimmed = l.trim();
    for t in &registry.templates {
        let Some(caps) = t.regex.captures(trimmed) else {
            continue;
        };
        if !t.has_slots {
            return Ok(CommandVector {
                template_id: t.id,
                pick_slot: None,
                place_slot: None,
            });
        }
        let glyph_str = &caps[1];
        let color_str = &caps[2];
        let glyph = if glyph_str.chars().count() == 1 {
            Glyph::from_char(glyph_str.chars().next().unwrap())
        } else {
            None
        }
        .ok_or_else(|| CommandError::UnknownGlyph(glyph_str.to_string()))?;
        let color = ColorId::from_name(&color_str.to_ascii_lowercase())
            .ok_or_else(|| CommandError::UnknownColor(color_str.to_string()))?;
        return Ok(CommandVector {
            template_id: t.id,
            pick_slot: Some(glyph),
            place_slot: Some(color),
        });
    }
    Err(CommandError::UnknownTemplate(trimmed.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sh_command_extracts_slots() {
        let reg = TemplateRegistry::default();
        let v = parse_command("Pick the V and place it in the red bowl", &reg).unwrap();
        assert_eq!(v, CommandVector::sh(Glyph::V, ColorId::Red));
        // Case-insensitive, whitespace-tolerant.
        let v2 = parse_command("  pick THE v AND PLACE it in the RED bowl ", &reg).unwrap();
        assert_eq!(v, v2);
    }

    #[test]
    fn lh_command_has_no_slots() {
        let reg = TemplateRegistry::default();
        let v = parse_command("Put all letters in the bowl of the corresponding color", &reg)
            .unwrap();
        assert_eq!(v, CommandVector::lh());
        assert_eq!(v.pick_slot, None);
    }

    #[test]
    fn unknown_inputs_are_rejected() {
        let reg = TemplateRegistry::default();
        assert_eq!(
            parse_command("Fold the towel", &reg),
            Err(CommandError::UnknownTemplate("Fold the towel".to_string()))
        );
        assert!(matches!(
            parse_command("Pick the Z and place it in the red bowl", &reg),
            Err(CommandError::UnknownGlyph(_))
        ));
        assert!(matches!(
            parse_command("Pick the V and place it in the maroon bowl", &reg),
            Err(CommandError::UnknownColor(_))
        ));
    }

    #[test]
    fn flat_encoding_is_one_hot_per_populated_slot() {
        let v = CommandVector::sh(Glyph::O, ColorId::Blue).flat();
        assert_eq!(v.len(), CommandVector::FLAT_LEN);
        assert_eq!(v.iter().sum::<f64>(), 3.0);
        assert_eq!(v[0], 1.0); // template 0
        assert_eq!(v[2 + 1], 1.0); // glyph O
        assert_eq!(v[2 + 5 + 2], 1.0); // color blue

        let lh = CommandVector::lh().flat();
        assert_eq!(lh.iter().sum::<f64>(), 1.0);
        assert_eq!(lh[1], 1.0);
    }

    #[test]
    fn round_trip_through_text() {
        let reg = TemplateRegistry::default();
        for g in Glyph::ALL {
            for c in ColorId::ALL {
                let v = CommandVector::sh(g, c);
                assert_eq!(parse_command(&v.to_text(), &reg).unwrap(), v);
            }
        }
        let lh = CommandVector::lh();
        assert_eq!(parse_command(&lh.to_text(), &reg).unwrap(), lh);
    }
}
