use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::codec::ContinuousAction;
use super::networks::{
    actor_heads, add_actor, add_critic, critic_q, encode, sample_squashed, squash_mean,
    ActorParams, CriticParams, EncoderConfig, ACTION_DIM,
};
use super::obs::ReformulatedObservation;
use super::replay::ReplayTransition;
use crate::rng::stream;
use crate::tensor::{Adam, NodeId, ParamId, ParamStore, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacHyperparams {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps collected before the first gradient update.
    pub warm_start_steps: usize,
    /// One update round per this many environment steps.
    pub update_every: usize,
    pub target_entropy: f64,
    pub init_alpha: f64,
    pub encoder: EncoderConfig,
}

impl Default for SacHyperparams {
    fn default() -> SacHyperparams {
        SacHyperparams {
            gamma: 0.95,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 64,
            buffer_capacity: 50_000,
            warm_start_steps: 1_000,
            update_every: 1,
            target_entropy: -(ACTION_DIM as f64),
            init_alpha: 0.1,
            encoder: EncoderConfig::default(),
        }
    }
}

impl SacHyperparams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) || self.tau == 0.0 {
            return Err(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(format!("lr {} must be positive", self.lr));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.update_every == 0 {
            return Err("batch_size, buffer_capacity, update_every must be positive".into());
        }
        if self.init_alpha <= 0.0 || !self.init_alpha.is_finite() {
            return Err(format!("init_alpha {} must be positive", self.init_alpha));
        }
        Ok(())
    }
}

/// Diagnostics from one gradient round.
#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub mean_q: f64,
    pub mean_logp: f64,
    pub mean_target: f64,
}

/// Soft actor-critic over set-structured observations.
///
/// Actor and critic keep separate encoders. The twin Q heads share the
/// critic encoder. The target network is a frozen copy of the critic store
/// updated by Polyak averaging; it is never trained directly.
pub struct SacAgent {
    pub hp: SacHyperparams,
    pub(super) actor_store: ParamStore,
    pub(super) actor: ActorParams,
    pub(super) critic_store: ParamStore,
    pub(super) critic: CriticParams,
    pub(super) target_store: ParamStore,
    pub(super) alpha_store: ParamStore,
    pub(super) log_alpha: ParamId,
    pub(super) actor_opt: Adam,
    pub(super) critic_opt: Adam,
    pub(super) alpha_opt: Adam,
    pub(super) total_updates: u64,
}

fn draw_noise(rng: &mut ChaCha8Rng) -> [f64; ACTION_DIM] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

impl SacAgent {
    pub fn new(hp: SacHyperparams, seed: u64) -> SacAgent {
        hp.validate().expect("bad hyperparameters");
        let mut actor_store = ParamStore::new();
        let actor = add_actor(&mut actor_store, &hp.encoder, &mut stream(seed, "sac-actor", 0));
        let mut critic_store = ParamStore::new();
        let critic = add_critic(&mut critic_store, &hp.encoder, &mut stream(seed, "sac-critic", 0));
        let target_store = critic_store.clone();
        let mut alpha_store = ParamStore::new();
        let log_alpha = alpha_store.add("log_alpha", Tensor::scalar(hp.init_alpha.ln()));
        let actor_opt = Adam::new(&actor_store, hp.lr);
        let critic_opt = Adam::new(&critic_store, hp.lr);
        let alpha_opt = Adam::new(&alpha_store, hp.lr);
        SacAgent {
            hp,
            actor_store,
            actor,
            critic_store,
            critic,
            target_store,
            alpha_store,
            log_alpha,
            actor_opt,
            critic_opt,
            alpha_opt,
            total_updates: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_store.value(self.log_alpha).item().exp()
    }

    pub fn total_updates(&self) -> u64 {
        self.total_updates
    }

    /// Policy action in [-1, 1]^4. Deterministic mode squashes the mean and
    /// ignores the rng; stochastic mode reparameterizes a Gaussian draw.
    pub fn act(
        &self,
        obs: &ReformulatedObservation,
        deterministic: bool,
        rng: &mut ChaCha8Rng,
    ) -> ContinuousAction {
        let mut tape = Tape::new();
        let f = encode(&mut tape, &self.actor_store, &self.actor.enc, &self.hp.encoder, obs);
        let (mu, ls) = actor_heads(&mut tape, &self.actor_store, &self.actor, f);
        let node = if deterministic {
            squash_mean(&mut tape, mu)
        } else {
            sample_squashed(&mut tape, mu, ls, &draw_noise(rng)).0
        };
        let v = tape.value(node).data();
        [v[0], v[1], v[2], v[3]]
    }

    /// One gradient round: critic regression to bootstrapped targets, actor
    /// ascent on the entropy-regularized min-Q, temperature tuning toward
    /// the entropy target, then a Polyak step on the target critic.
    pub fn update(&mut self, batch: &[&ReplayTransition], rng: &mut ChaCha8Rng) -> UpdateStats {
        assert!(!batch.is_empty(), "empty update batch");
        let cfg = self.hp.encoder;
        let alpha = self.alpha();

        let obs: Vec<ReformulatedObservation> = batch.iter().map(|t| t.obs.to_obs()).collect();
        let next: Vec<ReformulatedObservation> =
            batch.iter().map(|t| t.next_obs.to_obs()).collect();

        // Targets are plain numbers; nothing in this block is differentiated.
        // A truncated episode (terminal == false at the horizon) still
        // bootstraps, which is what makes the time limit invisible to the
        // value function.
        let mut targets = Vec::with_capacity(batch.len());
        let mut mean_target = 0.0;
        for (t, next_obs) in batch.iter().zip(&next) {
            let mut tape = Tape::new();
            let fa = encode(&mut tape, &self.actor_store, &self.actor.enc, &cfg, next_obs);
            let (mu, ls) = actor_heads(&mut tape, &self.actor_store, &self.actor, fa);
            let (a2, logp2) = sample_squashed(&mut tape, mu, ls, &draw_noise(rng));
            let ft = encode(&mut tape, &self.target_store, &self.critic.enc, &cfg, next_obs);
            let (q1, q2) = critic_q(&mut tape, &self.target_store, &self.critic, ft, a2);
            let qmin = tape.value(q1).item().min(tape.value(q2).item());
            let cont = if t.terminal { 0.0 } else { 1.0 };
            let y = t.reward
                + self.hp.gamma * cont * (qmin - alpha * tape.value(logp2).item());
            mean_target += y;
            targets.push(y);
        }
        mean_target /= batch.len() as f64;

        let critic_items: Vec<CriticItem> = batch
            .iter()
            .zip(&obs)
            .zip(&targets)
            .map(|((t, o), &y)| CriticItem {
                obs: o,
                action: t.action,
                target: y,
            })
            .collect();
        self.critic_store.zero_grads();
        let mut tape = Tape::new();
        let critic_graph = build_critic_loss(
            &mut tape,
            &self.critic_store,
            &self.critic,
            &cfg,
            &critic_items,
        );
        let critic_loss = tape.value(critic_graph.loss).item();
        tape.backward(critic_graph.loss, &mut [&mut self.critic_store]);
        self.critic_opt.step(&mut self.critic_store);
        drop(tape);

        // Fresh reparameterized draws for the actor objective. The critic
        // participates in the graph but its gradients are discarded: only
        // the actor store is passed to backward.
        let noises: Vec<[f64; ACTION_DIM]> = (0..batch.len()).map(|_| draw_noise(rng)).collect();
        let actor_items: Vec<ActorItem> = obs
            .iter()
            .zip(&noises)
            .map(|(o, &noise)| ActorItem { obs: o, noise })
            .collect();
        self.actor_store.zero_grads();
        let mut tape = Tape::new();
        let actor_graph = build_actor_loss(
            &mut tape,
            &self.actor_store,
            &self.actor,
            &self.critic_store,
            &self.critic,
            &cfg,
            alpha,
            &actor_items,
        );
        let actor_loss = tape.value(actor_graph.loss).item();
        tape.backward(actor_graph.loss, &mut [&mut self.actor_store]);
        self.actor_opt.step(&mut self.actor_store);
        drop(tape);

        // Temperature: descend -log_alpha * (E[logp] + target entropy), so
        // alpha grows while the policy is more deterministic than the
        // target and shrinks once it is more random.
        self.alpha_store.zero_grads();
        let mut tape = Tape::new();
        let la = tape.param(&self.alpha_store, self.log_alpha);
        let scaled = tape.scale(la, -(actor_graph.mean_logp + self.hp.target_entropy));
        let alpha_loss = tape.sum_all(scaled);
        tape.backward(alpha_loss, &mut [&mut self.alpha_store]);
        self.alpha_opt.step(&mut self.alpha_store);

        self.target_store.polyak_from(&self.critic_store, self.hp.tau);
        self.total_updates += 1;

        UpdateStats {
            critic_loss,
            actor_loss,
            alpha: self.alpha(),
            mean_q: critic_graph.mean_q,
            mean_logp: actor_graph.mean_logp,
            mean_target,
        }
    }

    /// Twin Q estimates for a given observation and action, no gradients.
    pub fn q_values(&self, obs: &ReformulatedObservation, action: ContinuousAction) -> (f64, f64) {
        let mut tape = Tape::new();
        let f = encode(&mut tape, &self.critic_store, &self.critic.enc, &self.hp.encoder, obs);
        let a = tape.input(Tensor::from_vec(&[ACTION_DIM], action.to_vec()).unwrap());
        let (q1, q2) = critic_q(&mut tape, &self.critic_store, &self.critic, f, a);
        (tape.value(q1).item(), tape.value(q2).item())
    }
}

pub(crate) struct CriticItem<'a> {
    pub obs: &'a ReformulatedObservation,
    pub action: ContinuousAction,
    pub target: f64,
}

pub(crate) struct CriticGraph {
    pub loss: NodeId,
    pub mean_q: f64,
}

/// Mean over items of 0.5 [(q1 - y)^2 + (q2 - y)^2].
pub(crate) fn build_critic_loss(
    tape: &mut Tape,
    store: &ParamStore,
    critic: &CriticParams,
    cfg: &EncoderConfig,
    items: &[CriticItem],
) -> CriticGraph {
    let mut per_item = Vec::with_capacity(items.len());
    let mut mean_q = 0.0;
    for it in items {
        let f = encode(tape, store, &critic.enc, cfg, it.obs);
        let a = tape.input(Tensor::from_vec(&[ACTION_DIM], it.action.to_vec()).unwrap());
        let (q1, q2) = critic_q(tape, store, critic, f, a);
        mean_q += 0.5 * (tape.value(q1).item() + tape.value(q2).item());
        let y = tape.scalar(it.target);
        let d1 = tape.sub(q1, y);
        let d2 = tape.sub(q2, y);
        let s1 = tape.square(d1);
        let s2 = tape.square(d2);
        let s = tape.add(s1, s2);
        per_item.push(tape.scale(s, 0.5));
    }
    let stacked = tape.stack_rows(&per_item);
    CriticGraph {
        loss: tape.mean_all(stacked),
        mean_q: mean_q / items.len() as f64,
    }
}

pub(crate) struct ActorItem<'a> {
    pub obs: &'a ReformulatedObservation,
    pub noise: [f64; ACTION_DIM],
}

pub(crate) struct ActorGraph {
    pub loss: NodeId,
    pub mean_logp: f64,
}

/// Mean over items of alpha * logp - min(q1, q2) under reparameterized
/// draws with the given per-item noise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_actor_loss(
    tape: &mut Tape,
    actor_store: &ParamStore,
    actor: &ActorParams,
    critic_store: &ParamStore,
    critic: &CriticParams,
    cfg: &EncoderConfig,
    alpha: f64,
    items: &[ActorItem],
) -> ActorGraph {
    let mut per_item = Vec::with_capacity(items.len());
    let mut mean_logp = 0.0;
    for it in items {
        let f = encode(tape, actor_store, &actor.enc, cfg, it.obs);
        let (mu, ls) = actor_heads(tape, actor_store, actor, f);
        let (a, logp) = sample_squashed(tape, mu, ls, &it.noise);
        let fc = encode(tape, critic_store, &critic.enc, cfg, it.obs);
        let (q1, q2) = critic_q(tape, critic_store, critic, fc, a);
        let qmin = tape.minimum(q1, q2);
        mean_logp += tape.value(logp).item();
        let ent = tape.scale(logp, alpha);
        per_item.push(tape.sub(ent, qmin));
    }
    let stacked = tape.stack_rows(&per_item);
    ActorGraph {
        loss: tape.mean_all(stacked),
        mean_logp: mean_logp / items.len() as f64,
    }
}
