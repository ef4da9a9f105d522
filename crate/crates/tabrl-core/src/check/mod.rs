//! Self-verification batteries. Each battery returns a list of named
//! pass/fail results so the CLI can print one line per property and exit
//! nonzero when anything fails; the same batteries back the test suite.

pub mod attention;
pub mod env_props;
pub mod fixtures;
pub mod freq;
pub mod gradsuite;
pub mod samplers;
pub mod stats;

pub use attention::run_attention_checks;
pub use env_props::run_env_checks;
pub use freq::run_frequency_checks;
pub use gradsuite::run_gradcheck_suite;
pub use samplers::run_sampler_checks;
pub use stats::{binomial_tol, chi_square_crit_99, chi_square_expected, chi_square_uniform, Z_99};

/// Outcome of one verification property.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}
