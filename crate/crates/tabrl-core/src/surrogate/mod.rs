pub mod action;
pub mod affordance;
pub mod candidates;
pub mod command;
pub mod detect;
pub mod dsl;
pub mod fetch;
pub mod policy;

pub use action::{compose, StructuredAction};
pub use affordance::{interpret_affordance, sample_from_affordance, AffordanceMap};
pub use candidates::{evaluate_candidates, CandidateEvalReport};
pub use command::{parse_command, CommandError, CommandVector, TemplateRegistry};
pub use detect::{detect_objects, DetectionLabel, DetectionSet, DetectorConfig};
pub use dsl::{AffordanceProgram, DslError, DslOp};
pub use fetch::{accept_proposals, fetch_programs, FetchConfig, FetchError};
pub use policy::{
    high_level_policy, low_level_policy, run_scripted_episode, ProgramSet, ScriptedOutcome,
    SurrogateError,
};
