//! Self-verification batteries behind the `verify` subcommand: numerical
//! gradients, sampler statistics, exploration frequencies, environment
//! properties, and attention identities. One PASS/FAIL line per check;
//! any failure makes the command exit nonzero.

use tabrl_core::check::{
    run_attention_checks, run_env_checks, run_frequency_checks, run_gradcheck_suite,
    run_sampler_checks, CheckResult,
};

/// Individually addressable batteries, in the order `all` runs them.
pub const BATTERIES: [&str; 5] = ["gradcheck", "samplers", "freq", "env-props", "attention"];

/// Epsilon grid checked by the frequency battery.
pub const FREQ_EPSILONS: [f64; 4] = [0.0, 0.1, 0.2, 0.5];
/// Post-warm-up selections drawn per epsilon.
pub const FREQ_DRAWS: u64 = 100_000;

/// Run one battery by name, or every battery for "all". Unknown names
/// return None.
pub fn run_battery(name: &str) -> Option<Vec<CheckResult>> {
    match name {
        "gradcheck" => Some(run_gradcheck_suite()),
        "samplers" => Some(run_sampler_checks()),
        "freq" => Some(run_frequency_checks(&FREQ_EPSILONS, FREQ_DRAWS)),
        "env-props" => Some(run_env_checks()),
        "attention" => Some(run_attention_checks()),
        "all" => {
            let mut out = Vec::new();
            for b in BATTERIES {
                out.extend(run_battery(b).expect("known battery"));
            }
            Some(out)
        }
        _ => None,
    }
}

/// Format one line per result; true when everything passed.
pub fn report(results: &[CheckResult], mut sink: impl FnMut(&str)) -> bool {
    let mut ok = true;
    for r in results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        sink(&format!("{status} {} - {}", r.name, r.detail));
        ok &= r.pass;
    }
    ok
}
