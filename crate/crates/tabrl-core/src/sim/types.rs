use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Square workspace side length in pixels.
pub const WORKSPACE: usize = 96;

/// Letter glyphs. Order defines the registry used by one-hot encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Glyph {
    V,
    O,
    T,
    C,
    M,
}

impl Glyph {
    pub const ALL: [Glyph; 5] = [Glyph::V, Glyph::O, Glyph::T, Glyph::C, Glyph::M];
    /// Glyphs present in training scenes.
    pub const SEEN: [Glyph; 3] = [Glyph::V, Glyph::O, Glyph::T];
    /// Held-out glyphs used only for generalization evaluation.
    pub const UNSEEN: [Glyph; 2] = [Glyph::C, Glyph::M];

    pub fn index(self) -> usize {
        Glyph::ALL.iter().position(|&g| g == self).unwrap()
    }

    pub fn as_char(self) -> char {
        match self {
            Glyph::V => 'V',
            Glyph::O => 'O',
            Glyph::T => 'T',
            Glyph::C => 'C',
            Glyph::M => 'M',
        }
    }

    pub fn from_char(c: char) -> Option<Glyph> {
        match c.to_ascii_uppercase() {
            'V' => Some(Glyph::V),
            'O' => Some(Glyph::O),
            'T' => Some(Glyph::T),
            'C' => Some(Glyph::C),
            'M' => Some(Glyph::M),
            _ => None,
        }
    }
}

/// Object colors. Order defines the registry used by one-hot encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorId {
    Red,
    Green,
    Blue,
    Yellow,
    Purple,
}

impl ColorId {
    pub const ALL: [ColorId; 5] = [
        ColorId::Red,
        ColorId::Green,
        ColorId::Blue,
        ColorId::Yellow,
        ColorId::Purple,
    ];
    /// Colors present in training scenes.
    pub const SEEN: [ColorId; 3] = [ColorId::Red, ColorId::Green, ColorId::Blue];
    /// Held-out colors used only for generalization evaluation.
    pub const UNSEEN: [ColorId; 2] = [ColorId::Yellow, ColorId::Purple];

    pub fn index(self) -> usize {
        ColorId::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorId::Red => "red",
            ColorId::Green => "green",
            ColorId::Blue => "blue",
            ColorId::Yellow => "yellow",
            ColorId::Purple => "purple",
        }
    }

    pub fn from_name(s: &str) -> Option<ColorId> {
        ColorId::ALL.iter().copied().find(|c| c.name() == s)
    }

    /// RGB in [0,1]; every channel is k/255 for integer k so 8-bit raster
    /// exports are exact.
    pub fn rgb(self) -> [f64; 3] {
        let p = match self {
            ColorId::Red => [204, 0, 0],
            ColorId::Green => [0, 153, 0],
            ColorId::Blue => [0, 0, 204],
            ColorId::Yellow => [230, 204, 0],
            ColorId::Purple => [153, 0, 204],
        };
        [
            p[0] as f64 / 255.0,
            p[1] as f64 / 255.0,
            p[2] as f64 / 255.0,
        ]
    }
}

/// Table background; k/255 for exact 8-bit export.
pub const BACKGROUND_RGB: [f64; 3] = [230.0 / 255.0, 230.0 / 255.0, 230.0 / 255.0];
/// Depth class of a letter pixel (table = 0, bowl rim = 1).
pub const DEPTH_LETTER: f64 = 128.0 / 255.0;
/// Depth class of a bowl-rim pixel.
pub const DEPTH_BOWL_RIM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Letter,
    Bowl,
}

/// Binary occupancy raster in the object's local frame; odd side lengths so
/// the center cell is well defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub h: usize,
    pub w: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn occupied(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.w + c]
    }

    pub fn half_h(&self) -> i32 {
        (self.h as i32 - 1) / 2
    }

    pub fn half_w(&self) -> i32 {
        (self.w as i32 - 1) / 2
    }

    /// Offsets (dr, dc) of occupied cells relative to the center cell.
    pub fn occupied_offsets(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let (hh, hw) = (self.half_h(), self.half_w());
        (0..self.h).flat_map(move |r| {
            (0..self.w).filter_map(move |c| {
                if self.occupied(r, c) {
                    Some((r as i32 - hh, c as i32 - hw))
                } else {
                    None
                }
            })
        })
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: u8,
    pub kind: ObjectKind,
    /// Present exactly for letters.
    pub glyph: Option<Glyph>,
    pub color: ColorId,
    /// (row, col) center in workspace frame.
    pub center: (i32, i32),
    pub mask: Mask,
}

impl ObjectSpec {
    /// Whether the translated mask occupies the given workspace pixel.
    pub fn covers(&self, pos: (i32, i32)) -> bool {
        let r = pos.0 - self.center.0 + self.mask.half_h();
        let c = pos.1 - self.center.1 + self.mask.half_w();
        r >= 0
            && c >= 0
            && (r as usize) < self.mask.h
            && (c as usize) < self.mask.w
            && self.mask.occupied(r as usize, c as usize)
    }
}

/// Ground-truth world state. Reward bookkeeping flags live here so the
/// reward computation stays a pure function of (previous, next) states.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub objects: Vec<ObjectSpec>,
    /// Id of the held letter, if any. Bowls are never held.
    pub held: Option<u8>,
    pub step_count: u32,
    /// Seeded generator state; reserved for stochastic dynamics.
    pub rng: ChaCha8Rng,
    /// Where the gripper last acted; held-object detections report it.
    pub gripper_pos: (i32, i32),
    /// Set once the one-time correct-first-pick bonus has been paid.
    pub first_pick_rewarded: bool,
    /// Letter ids whose placement bonus has been paid (sorted).
    pub scored_letters: Vec<u8>,
}

impl SceneState {
    pub fn object(&self, id: u8) -> &ObjectSpec {
        self.objects.iter().find(|o| o.id == id).expect("valid id")
    }

    pub fn letters(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Letter)
    }

    pub fn bowls(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.iter().filter(|o| o.kind == ObjectKind::Bowl)
    }
}

/// Overhead RGB-D view, all channels in [0,1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    /// len = WORKSPACE * WORKSPACE * 3.
    pub rgb: Vec<f64>,
    /// len = WORKSPACE * WORKSPACE.
    pub depth: Vec<f64>,
    pub ee_holding: bool,
}

impl RawObservation {
    pub fn rgb_at(&self, r: usize, c: usize) -> [f64; 3] {
        let i = (r * WORKSPACE + c) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn depth_at(&self, r: usize, c: usize) -> f64 {
        self.depth[r * WORKSPACE + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prim {
    Pick = 0,
    Place = 1,
}

/// Workspace-coordinate action: grasp at or release at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveAction {
    pub prim: Prim,
    /// (row, col), kept inside workspace bounds by the caller.
    pub position: (i32, i32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub dense: f64,
    pub sparse: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(dense: f64, sparse: f64) -> Self {
        RewardBreakdown {
            dense,
            sparse,
            total: dense + sparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonKind {
    Sh,
    Lh,
}

/// Task definition. Pick/place slots exist exactly for the short-horizon
/// variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "horizon", rename_all = "lowercase")]
pub enum TaskSpec {
    Sh {
        pick_letter: Glyph,
        place_color: ColorId,
        max_steps: u32,
    },
    Lh {
        max_steps: u32,
    },
}

impl TaskSpec {
    pub fn horizon_kind(&self) -> HorizonKind {
        match self {
            TaskSpec::Sh { .. } => HorizonKind::Sh,
            TaskSpec::Lh { .. } => HorizonKind::Lh,
        }
    }

    pub fn max_steps(&self) -> u32 {
        match *self {
            TaskSpec::Sh { max_steps, .. } => max_steps,
            TaskSpec::Lh { max_steps } => max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapMode {
    /// Rejection-sampled placement keeping pairwise mask distance >= 2 px.
    #[serde(rename = "no")]
    NonOverlap,
    /// Uniform placement, overlaps allowed.
    #[serde(rename = "ao")]
    ArbitraryOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub overlap_mode: OverlapMode,
    pub letter_set: Vec<Glyph>,
    pub color_set: Vec<ColorId>,
    pub n_letters: usize,
    pub n_bowls: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            seed: 0,
            overlap_mode: OverlapMode::NonOverlap,
            letter_set: Glyph::SEEN.to_vec(),
            color_set: ColorId::SEEN.to_vec(),
            n_letters: 3,
            n_bowls: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissKind {
    /// Pick landed on no letter-occupied pixel.
    PickMissedLetter,
    /// Pick attempted while already holding a letter.
    PickWhileHolding,
    /// Place landed outside every bowl interior.
    PlaceOutsideBowl,
    /// Place attempted with an empty gripper.
    PlaceWhileEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub executed_ok: bool,
    /// Picked letter id or deposit bowl id for successful primitives.
    pub hit_object_id: Option<u8>,
    pub miss_kind: Option<MissKind>,
}

/// Everything produced by one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub scene: SceneState,
    pub obs: RawObservation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}
