//! Harness around the core library: configured training runs with metrics
//! CSVs and checkpoints, frozen-policy evaluation grids, epsilon ablations,
//! long-horizon command decomposition, self-verification batteries, and
//! affordance-map rendering.

pub mod ablation;
pub mod config;
pub mod evaluator;
pub mod metrics;
pub mod planner;
pub mod render;
pub mod trainer;
pub mod verify;

pub use ablation::{run_ablation, AblationRow};
pub use config::{ConfigError, RunConfig};
pub use evaluator::{
    condition_protocol, eval_grid, run_eval, ConditionReport, EvalActor, EvalProtocol, EvalStats,
    UnseenKind,
};
pub use metrics::{MetricsRow, METRICS_HEADER};
pub use planner::{
    decompose_and_run, run_compose_suite, ComposeOutcome, ComposeSuiteStats, PlannerError,
};
pub use trainer::{train_all_seeds, train_one_seed, SeedRunResult};
