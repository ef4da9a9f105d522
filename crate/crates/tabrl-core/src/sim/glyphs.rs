//! Letter and bowl geometry. Letters come from a 5x7 dot font scaled x3
//! (15x21 masks); bowls are annuli with outer radius 10 and interior radius
//! 7 on a 21x21 mask. All masks have odd side lengths.

use super::types::{Glyph, Mask};

/// Integer scale applied to the 5x7 font.
pub const FONT_SCALE: usize = 3;
/// Crop radius used by the detector; covers any object mask.
pub const CROP_RADIUS: usize = 12;
pub const BOWL_OUTER_RADIUS: i32 = 10;
pub const BOWL_INTERIOR_RADIUS: i32 = 7;

/// 5-wide, 7-tall dot matrix per glyph. 'O' (and several others) leave the
/// geometric center unoccupied, which is what makes center-seeking pick
/// policies fail on them.
fn font_rows(g: Glyph) -> [&'static str; 7] {
    match g {
        Glyph::V => [
            "#...#", "#...#", "#...#", "#...#", ".#.#.", ".#.#.", "..#..",
        ],
        Glyph::O => [
            ".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.",
        ],
        Glyph::T => [
            "#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#..",
        ],
        Glyph::C => [
            ".###.", "#...#", "#....", "#....", "#....", "#...#", ".###.",
        ],
        Glyph::M => [
            "#...#", "##.##", "#.#.#", "#...#", "#...#", "#...#", "#...#",
        ],
    }
}

/// Scaled occupancy mask for a letter glyph (15 wide, 21 tall).
pub fn letter_mask(g: Glyph) -> Mask {
    let rows = font_rows(g);
    let h = 7 * FONT_SCALE;
    let w = 5 * FONT_SCALE;
    let mut cells = vec![false; h * w];
    for (fr, row) in rows.iter().enumerate() {
        for (fc, ch) in row.chars().enumerate() {
            if ch == '#' {
                for dr in 0..FONT_SCALE {
                    for dc in 0..FONT_SCALE {
                        cells[(fr * FONT_SCALE + dr) * w + fc * FONT_SCALE + dc] = true;
                    }
                }
            }
        }
    }
    Mask { h, w, cells }
}

/// Bowl rim occupancy: cells with interior_radius < r <= outer_radius.
pub fn bowl_mask() -> Mask {
    let side = (2 * BOWL_OUTER_RADIUS + 1) as usize;
    let mut cells = vec![false; side * side];
    for r in 0..side {
        for c in 0..side {
            let dr = r as i32 - BOWL_OUTER_RADIUS;
            let dc = c as i32 - BOWL_OUTER_RADIUS;
            let d2 = dr * dr + dc * dc;
            if d2 > BOWL_INTERIOR_RADIUS * BOWL_INTERIOR_RADIUS
                && d2 <= BOWL_OUTER_RADIUS * BOWL_OUTER_RADIUS
            {
                cells[r * side + c] = true;
            }
        }
    }
    Mask {
        h: side,
        w: side,
        cells,
    }
}

/// Whether an offset from a bowl center lies in the bowl's interior region.
pub fn in_bowl_interior(dr: i32, dc: i32) -> bool {
    dr * dr + dc * dc <= BOWL_INTERIOR_RADIUS * BOWL_INTERIOR_RADIUS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_have_odd_sides_and_occupancy() {
        for g in Glyph::ALL {
            let m = letter_mask(g);
            assert_eq!(m.w % 2, 1);
            assert_eq!(m.h % 2, 1);
            assert!(m.count() > 0, "{g:?} empty");
        }
        let b = bowl_mask();
        assert_eq!((b.h, b.w), (21, 21));
        assert!(b.count() > 0);
    }

    #[test]
    fn o_center_is_unoccupied() {
        let m = letter_mask(Glyph::O);
        assert!(!m.occupied(m.h / 2, m.w / 2));
        // The whole scaled center cell block is empty.
        for dr in 0..FONT_SCALE {
            for dc in 0..FONT_SCALE {
                assert!(!m.occupied(3 * FONT_SCALE + dr, 2 * FONT_SCALE + dc));
            }
        }
    }

    #[test]
    fn bowl_interior_is_disjoint_from_rim() {
        let b = bowl_mask();
        for r in 0..b.h {
            for c in 0..b.w {
                let dr = r as i32 - BOWL_OUTER_RADIUS;
                let dc = c as i32 - BOWL_OUTER_RADIUS;
                if in_bowl_interior(dr, dc) {
                    assert!(!b.occupied(r, c));
                }
            }
        }
        assert!(!b.occupied(b.h / 2, b.w / 2));
    }

    #[test]
    fn glyphs_are_pairwise_distinct() {
        for (i, a) in Glyph::ALL.iter().enumerate() {
            for b in &Glyph::ALL[i + 1..] {
                assert_ne!(letter_mask(*a).cells, letter_mask(*b).cells);
            }
        }
    }
}
