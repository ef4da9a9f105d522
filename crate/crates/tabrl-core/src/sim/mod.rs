//! Deterministic top-down tabletop world: seeded scene generation, the
//! pick-or-place primitive, reward decomposition, and success checks.

pub mod env;
pub mod export;
pub mod glyphs;
pub mod types;

pub use env::{check_success, compute_reward, correctly_placed, render, reset, step, Env, SimError};
