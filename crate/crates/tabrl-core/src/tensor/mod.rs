//! Dense f64 tensors with a rebuilt-per-step reverse-mode tape.
//!
//! The tape is a flat vec of nodes; forward values are computed eagerly as
//! nodes are pushed, and `backward` runs one reverse sweep that accumulates
//! gradients into a [`params::ParamStore`]. Reductions that feed the
//! permutation-equivariant attention path use value-sorted accumulation so
//! results are bit-identical under input row permutations.

mod adam;
mod gradcheck;
pub mod ops;
mod params;
mod serialize;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use adam::Adam;
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use params::{ParamId, ParamStore};
pub use serialize::{store_from_json, store_to_json, SerializeError};
pub use tape::{NodeId, Tape};
pub use tensor::{sorted_sum, Tensor, TensorError};
