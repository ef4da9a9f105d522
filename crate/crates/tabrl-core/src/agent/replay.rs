use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::codec::ContinuousAction;
use super::obs::CompactObs;
use crate::explore::ActionSource;

/// One stored interaction. `terminal` is true only when the episode ended
/// in task success; running out of steps is a truncation, and the target
/// for a truncated step still bootstraps from the next state.
///
/// `source` records which policy produced the action. It is metadata only:
/// storage, sampling, and updates treat both kinds identically.
#[derive(Debug, Clone)]
pub struct ReplayTransition {
    pub obs: CompactObs,
    pub action: ContinuousAction,
    pub reward: f64,
    pub next_obs: CompactObs,
    pub terminal: bool,
    pub source: ActionSource,
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<ReplayTransition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            cursor: 0,
        }
    }

    pub fn push(&mut self, t: ReplayTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample<'a>(
        &'a self,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<&'a ReplayTransition> {
        assert!(!self.items.is_empty(), "cannot sample from an empty buffer");
        (0..batch)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::obs::{build_observation, CompactObs};
    use crate::check::stats::{chi_square_crit_99, chi_square_uniform};
    use crate::rng::stream;
    use crate::sim::reset;
    use crate::surrogate::{detect_objects, CommandVector, DetectorConfig};
    use crate::{EpisodeConfig, TaskSpec};

    fn transition(reward: f64) -> ReplayTransition {
        let mut rng = stream(11, "replay-test", 0);
        let task = TaskSpec::Lh { max_steps: 30 };
        let (scene, _) = reset(&task, &EpisodeConfig::default()).unwrap();
        let d = detect_objects(&scene, &DetectorConfig::noiseless(), &mut rng);
        let cmd = CommandVector::lh();
        let obs = CompactObs::from_obs(&build_observation(&d, &cmd));
        ReplayTransition {
            obs: obs.clone(),
            action: [0.0, 0.0, 0.0, 0.0],
            reward,
            next_obs: obs,
            terminal: false,
            source: ActionSource::Rl,
        }
    }

    #[test]
    fn ring_overwrites_oldest_once_full() {
        let mut buf = ReplayBuffer::new(4);
        for k in 0..6 {
            buf.push(transition(k as f64));
        }
        assert_eq!(buf.len(), 4);
        let mut rewards: Vec<f64> = buf.items.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        // 0 and 1 were overwritten by 4 and 5.
        assert_eq!(rewards, vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn sampling_is_uniform_over_contents() {
        let mut buf = ReplayBuffer::new(10);
        for k in 0..10 {
            buf.push(transition(k as f64));
        }
        let mut rng = stream(11, "replay-test", 1);
        let mut counts = vec![0u64; 10];
        for t in buf.sample(20_000, &mut rng) {
            counts[t.reward as usize] += 1;
        }
        let stat = chi_square_uniform(&counts);
        let crit = chi_square_crit_99(9);
        assert!(stat < crit, "chi^2 {stat:.2} exceeds 99% critical {crit:.2}");
    }

    #[test]
    #[should_panic(expected = "empty buffer")]
    fn sampling_empty_buffer_panics() {
        let buf = ReplayBuffer::new(4);
        let mut rng = stream(11, "replay-test", 2);
        let _ = buf.sample(1, &mut rng);
    }
}
