use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the surrogate share of actions evolves after warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonSchedule {
    Constant,
    /// Linear ramp from the configured value at warm-up end down to zero
    /// at `end_step`.
    LinearDecay { end_step: u64 },
}

/// Guided-exploration knobs: with probability epsilon a post-warm-up action
/// comes from the scripted surrogate hierarchy instead of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreConfig {
    pub epsilon: f64,
    pub warmup_steps: u64,
    pub schedule: EpsilonSchedule,
}

impl ExploreConfig {
    pub fn constant(epsilon: f64, warmup_steps: u64) -> ExploreConfig {
        ExploreConfig {
            epsilon,
            warmup_steps,
            schedule: EpsilonSchedule::Constant,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if let EpsilonSchedule::LinearDecay { end_step } = self.schedule {
            if end_step <= self.warmup_steps {
                return Err(format!(
                    "decay end {} must come after warm-up {}",
                    end_step, self.warmup_steps
                ));
            }
        }
        Ok(())
    }

    /// Surrogate probability at a given environment step. Warm-up always
    /// reads zero: early actions come from the learner's own stochastic
    /// policy regardless of the configured value.
    pub fn effective_epsilon(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return 0.0;
        }
        match self.schedule {
            EpsilonSchedule::Constant => self.epsilon,
            EpsilonSchedule::LinearDecay { end_step } => {
                if step >= end_step {
                    0.0
                } else {
                    let span = (end_step - self.warmup_steps) as f64;
                    self.epsilon * (1.0 - (step - self.warmup_steps) as f64 / span)
                }
            }
        }
    }
}

/// Who produced an executed action; logged so surrogate usage is auditable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSource {
    Rl,
    Llm,
}

/// One exploration decision. Draws exactly one uniform sample per call, so
/// the per-step random stream stays aligned across epsilon settings. The
/// surrogate closure may decline (perception failure, absent target); the
/// learner is always the fallback.
pub fn select_action<A>(
    cfg: &ExploreConfig,
    step: u64,
    rng: &mut ChaCha8Rng,
    surrogate: impl FnOnce() -> Option<A>,
    learner: impl FnOnce() -> A,
) -> (A, ActionSource) {
    let eps = cfg.effective_epsilon(step);
    let j: f64 = rng.gen();
    if eps > 0.0 && j <= eps {
        if let Some(action) = surrogate() {
            return (action, ActionSource::Llm);
        }
    }
    (learner(), ActionSource::Rl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn warmup_never_consults_the_surrogate() {
        let cfg = ExploreConfig::constant(0.9, 1000);
        let mut rng = stream(1, "explore-test", 0);
        for step in 0..1000 {
            assert_eq!(cfg.effective_epsilon(step), 0.0);
            let (_, src) = select_action(&cfg, step, &mut rng, || Some(1), || 0);
            assert_eq!(src, ActionSource::Rl);
        }
        assert_eq!(cfg.effective_epsilon(1000), 0.9);
    }

    #[test]
    fn surrogate_share_matches_epsilon() {
        let cfg = ExploreConfig::constant(0.3, 0);
        let mut rng = stream(2, "explore-test", 0);
        let n = 20_000u64;
        let mut hits = 0u64;
        for step in 0..n {
            let (_, src) = select_action(&cfg, step, &mut rng, || Some(1), || 0);
            if src == ActionSource::Llm {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        let tol = 4.0 * (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((f - 0.3).abs() <= tol, "fraction {f} vs 0.3 +- {tol}");
    }

    #[test]
    fn zero_epsilon_is_pure_rl() {
        let cfg = ExploreConfig::constant(0.0, 0);
        let mut rng = stream(3, "explore-test", 0);
        for step in 0..10_000 {
            let (_, src) = select_action(&cfg, step, &mut rng, || Some(1), || 0);
            assert_eq!(src, ActionSource::Rl);
        }
    }

    #[test]
    fn surrogate_decline_falls_back_to_the_learner() {
        let cfg = ExploreConfig::constant(1.0, 0);
        let mut rng = stream(4, "explore-test", 0);
        let (a, src) = select_action(&cfg, 0, &mut rng, || None::<i32>, || 7);
        assert_eq!((a, src), (7, ActionSource::Rl));
    }

    #[test]
    fn linear_decay_interpolates_to_zero() {
        let cfg = ExploreConfig {
            epsilon: 0.8,
            warmup_steps: 100,
            schedule: EpsilonSchedule::LinearDecay { end_step: 1100 },
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.effective_epsilon(99), 0.0);
        assert!((cfg.effective_epsilon(100) - 0.8).abs() < 1e-12);
        assert!((cfg.effective_epsilon(600) - 0.4).abs() < 1e-12);
        assert_eq!(cfg.effective_epsilon(1100), 0.0);
        assert_eq!(cfg.effective_epsilon(5000), 0.0);
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let good = r#"{"epsilon": 0.2, "warmup_steps": 2000, "schedule": {"kind": "constant"}}"#;
        let cfg: ExploreConfig = serde_json::from_str(good).unwrap();
        assert_eq!(cfg.epsilon, 0.2);
        let bad = r#"{"epsilon": 0.2, "warmup_steps": 2000, "schedule": {"kind": "constant"}, "eps": 1}"#;
        assert!(serde_json::from_str::<ExploreConfig>(bad).is_err());
        let decay =
            r#"{"epsilon": 0.5, "warmup_steps": 10, "schedule": {"kind": "linear_decay", "end_step": 20}}"#;
        let cfg: ExploreConfig = serde_json::from_str(decay).unwrap();
        assert_eq!(cfg.schedule, EpsilonSchedule::LinearDecay { end_step: 20 });
    }

    #[test]
    fn bad_configs_fail_validation() {
        assert!(ExploreConfig::constant(1.5, 0).validate().is_err());
        let cfg = ExploreConfig {
            epsilon: 0.5,
            warmup_steps: 100,
            schedule: EpsilonSchedule::LinearDecay { end_step: 100 },
        };
        assert!(cfg.validate().is_err());
    }
}
