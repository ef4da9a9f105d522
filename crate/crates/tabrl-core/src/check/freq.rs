//! Monte-Carlo check that the explore/exploit gate hits its configured
//! mixing rate: post-warmup surrogate fraction within a 4-sigma binomial
//! band, zero surrogate actions at rate zero and inside the warmup window.

use super::stats::binomial_tol;
use super::CheckResult;
use crate::explore::{select_action, ActionSource, EpsilonSchedule, ExploreConfig};
use crate::rng::stream;

const WARMUP: u64 = 500;

fn surrogate_fraction(epsilon: f64, draws: u64, seed_idx: u64) -> (f64, u64) {
    let cfg = ExploreConfig {
        epsilon,
        warmup_steps: WARMUP,
        schedule: EpsilonSchedule::Constant,
    };
    cfg.validate().expect("valid explore config");
    let mut rng = stream(41, "freq-check", seed_idx);
    let mut warmup_llm = 0u64;
    for step in 0..WARMUP {
        let (_, src) = select_action(&cfg, step, &mut rng, || Some(1u8), || 0u8);
        if src == ActionSource::Llm {
            warmup_llm += 1;
        }
    }
    let mut llm = 0u64;
    for step in WARMUP..WARMUP + draws {
        let (_, src) = select_action(&cfg, step, &mut rng, || Some(1u8), || 0u8);
        if src == ActionSource::Llm {
            llm += 1;
        }
    }
    (llm as f64 / draws as f64, warmup_llm)
}

pub fn run_frequency_checks(epsilons: &[f64], draws: u64) -> Vec<CheckResult> {
    let mut results = Vec::new();
    for (k, &eps) in epsilons.iter().enumerate() {
        let (fraction, warmup_llm) = surrogate_fraction(eps, draws, k as u64);
        if eps == 0.0 {
            let pass = fraction == 0.0 && warmup_llm == 0;
            results.push(CheckResult {
                name: "freq-epsilon-0".into(),
                pass,
                detail: format!(
                    "surrogate fraction {fraction} (must be exactly 0), warmup hits {warmup_llm}"
                ),
            });
        } else {
            let tol = binomial_tol(eps, draws);
            let gap = (fraction - eps).abs();
            let pass = gap <= tol && warmup_llm == 0;
            results.push(CheckResult {
                name: format!("freq-epsilon-{eps}"),
                pass,
                detail: format!(
                    "fraction {fraction:.5} vs {eps} (|gap| {gap:.5} <= {tol:.5}), warmup hits {warmup_llm}"
                ),
            });
        }
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_epsilons_hit_their_bands() {
        let results = run_frequency_checks(&[0.0, 0.1, 0.2, 0.5], 100_000);
        assert_eq!(results.len(), 4);
        for r in &results {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
