//! Core library for a language-guided tabletop rearrangement stack:
//! a deterministic grid-world simulator, a scripted high/low-level
//! suggestion policy driven by affordance programs, a from-scratch
//! reverse-mode tensor engine, a soft actor-critic agent, and the
//! exploration strategy that interleaves suggested and learned actions.

pub mod agent;
pub mod check;
pub mod explore;
pub mod rng;
pub mod sim;
pub mod surrogate;
pub mod tensor;

pub use sim::types::{
    ColorId, EpisodeConfig, Glyph, HorizonKind, ObjectKind, ObjectSpec, OverlapMode, Prim,
    PrimitiveAction, RawObservation, RewardBreakdown, SceneState, StepInfo, StepOutcome, TaskSpec,
    WORKSPACE,
};
