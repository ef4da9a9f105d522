pub mod checkpoint;
pub mod codec;
pub mod networks;
pub mod obs;
pub mod replay;
pub mod sac;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError,
    FORMAT_VERSION,
};
pub use codec::{ActionCodec, ContinuousAction};
pub use networks::{EncoderConfig, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN};
pub use obs::{build_observation, CompactObs, ReformulatedObservation};
pub use replay::{ReplayBuffer, ReplayTransition};
pub use sac::{SacAgent, SacHyperparams, UpdateStats};
