use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::obs::ReformulatedObservation;
use crate::tensor::{NodeId, ParamId, ParamStore, Tape, Tensor};

/// Shape of the set encoder: per-crop CNN, row-wise feature assembly,
/// single-head self-attention, order-invariant pooling, and an MLP head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub crop_side: usize,
    pub conv_filters: (usize, usize),
    pub mlp_width: usize,
    pub lang_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> EncoderConfig {
        EncoderConfig {
            crop_side: 24,
            conv_filters: (8, 16),
            mlp_width: 128,
            lang_dim: crate::surrogate::command::CommandVector::FLAT_LEN,
        }
    }
}

impl EncoderConfig {
    /// Spatial side after two stride-2, pad-1, 3x3 convolutions.
    pub fn conv_spatial(&self) -> usize {
        let s1 = (self.crop_side + 2 - 3) / 2 + 1;
        (s1 + 2 - 3) / 2 + 1
    }

    /// Flattened per-crop embedding length.
    pub fn embed_dim(&self) -> usize {
        self.conv_filters.1 * self.conv_spatial() * self.conv_spatial()
    }

    /// Row width fed to attention: embedding, position, held flag, command.
    pub fn row_dim(&self) -> usize {
        self.embed_dim() + 2 + 1 + self.lang_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp_width
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderParams {
    pub conv1_w: ParamId,
    pub conv1_b: ParamId,
    pub conv2_w: ParamId,
    pub conv2_b: ParamId,
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub mlp1_w: ParamId,
    pub mlp1_b: ParamId,
    pub mlp2_w: ParamId,
    pub mlp2_b: ParamId,
}

pub fn add_encoder(
    store: &mut ParamStore,
    prefix: &str,
    cfg: &EncoderConfig,
    rng: &mut ChaCha8Rng,
) -> EncoderParams {
    let (f1, f2) = cfg.conv_filters;
    let d = cfg.row_dim();
    let w = cfg.mlp_width;
    let name = |field: &str| format!("{prefix}.{field}");
    EncoderParams {
        conv1_w: store.add_uniform(&name("conv1.w"), &[f1, 4, 3, 3], 4 * 9, rng),
        conv1_b: store.add(&name("conv1.b"), Tensor::zeros(&[f1])),
        conv2_w: store.add_uniform(&name("conv2.w"), &[f2, f1, 3, 3], f1 * 9, rng),
        conv2_b: store.add(&name("conv2.b"), Tensor::zeros(&[f2])),
        wq: store.add_uniform(&name("attn.wq"), &[d, d], d, rng),
        wk: store.add_uniform(&name("attn.wk"), &[d, d], d, rng),
        wv: store.add_uniform(&name("attn.wv"), &[d, d], d, rng),
        mlp1_w: store.add_uniform(&name("mlp1.w"), &[d, w], d, rng),
        mlp1_b: store.add(&name("mlp1.b"), Tensor::zeros(&[w])),
        mlp2_w: store.add_uniform(&name("mlp2.w"), &[w, w], w, rng),
        mlp2_b: store.add(&name("mlp2.b"), Tensor::zeros(&[w])),
    }
}

/// Rebinds ids after a store was loaded from a checkpoint.
pub fn lookup_encoder(store: &ParamStore, prefix: &str) -> EncoderParams {
    let id = |field: &str| {
        store
            .id_by_name(&format!("{prefix}.{field}"))
            .unwrap_or_else(|| panic!("missing parameter {prefix}.{field}"))
    };
    EncoderParams {
        conv1_w: id("conv1.w"),
        conv1_b: id("conv1.b"),
        conv2_w: id("conv2.w"),
        conv2_b: id("conv2.b"),
        wq: id("attn.wq"),
        wk: id("attn.wk"),
        wv: id("attn.wv"),
        mlp1_w: id("mlp1.w"),
        mlp1_b: id("mlp1.b"),
        mlp2_w: id("mlp2.w"),
        mlp2_b: id("mlp2.b"),
    }
}

/// Forward pass over one observation; returns the pooled feature vector
/// (rank 1, `feature_dim`). The object axis is treated as a set: all
/// cross-row reductions are order-invariant, so a permutation of the
/// detection rows leaves the feature bit-identical.
pub fn encode(
    tape: &mut Tape,
    store: &ParamStore,
    p: &EncoderParams,
    cfg: &EncoderConfig,
    obs: &ReformulatedObservation,
) -> NodeId {
    assert_eq!(obs.crop_side, cfg.crop_side, "observation/encoder mismatch");
    assert_eq!(obs.lang.len(), cfg.lang_dim, "command width mismatch");
    let side = cfg.crop_side;
    let d = cfg.embed_dim();
    let (c1w, c1b) = (tape.param(store, p.conv1_w), tape.param(store, p.conv1_b));
    let (c2w, c2b) = (tape.param(store, p.conv2_w), tape.param(store, p.conv2_b));

    let mut rows = Vec::with_capacity(obs.n_objects());
    for k in 0..obs.n_objects() {
        let x = tape.input(Tensor::from_vec(&[4, side, side], obs.crops[k].clone()).unwrap());
        let h1 = tape.conv2d(x, c1w, c1b, 2, 1);
        let h1 = tape.relu(h1);
        let h2 = tape.conv2d(h1, c2w, c2b, 2, 1);
        let h2 = tape.relu(h2);
        let emb = tape.reshape(h2, &[d]);
        let mut extra = Vec::with_capacity(3 + cfg.lang_dim);
        extra.push(obs.positions[k].0);
        extra.push(obs.positions[k].1);
        extra.push(obs.held[k]);
        extra.extend_from_slice(&obs.lang);
        let extras = tape.input(Tensor::from_vec(&[3 + cfg.lang_dim], extra).unwrap());
        rows.push(tape.concat(&[emb, extras]));
    }
    let x = tape.stack_rows(&rows);
    let (wq, wk, wv) = (
        tape.param(store, p.wq),
        tape.param(store, p.wk),
        tape.param(store, p.wv),
    );
    let attended = tape.self_attention(x, wq, wk, wv);
    let pooled = tape.mean_rows(attended);

    let (w1, b1) = (tape.param(store, p.mlp1_w), tape.param(store, p.mlp1_b));
    let (w2, b2) = (tape.param(store, p.mlp2_w), tape.param(store, p.mlp2_b));
    let h = tape.vecmat(pooled, w1);
    let h = tape.add(h, b1);
    let h = tape.relu(h);
    let h = tape.vecmat(h, w2);
    let h = tape.add(h, b2);
    tape.relu(h)
}

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const ACTION_DIM: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct ActorParams {
    pub enc: EncoderParams,
    pub mu_w: ParamId,
    pub mu_b: ParamId,
    pub log_std_w: ParamId,
    pub log_std_b: ParamId,
}

pub fn add_actor(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut ChaCha8Rng) -> ActorParams {
    let enc = add_encoder(store, "actor.enc", cfg, rng);
    let w = cfg.feature_dim();
    ActorParams {
        enc,
        mu_w: store.add_uniform("actor.mu.w", &[w, ACTION_DIM], w, rng),
        mu_b: store.add("actor.mu.b", Tensor::zeros(&[ACTION_DIM])),
        log_std_w: store.add_uniform("actor.log_std.w", &[w, ACTION_DIM], w, rng),
        log_std_b: store.add("actor.log_std.b", Tensor::zeros(&[ACTION_DIM])),
    }
}

pub fn lookup_actor(store: &ParamStore) -> ActorParams {
    let id = |n: &str| store.id_by_name(n).unwrap_or_else(|| panic!("missing {n}"));
    ActorParams {
        enc: lookup_encoder(store, "actor.enc"),
        mu_w: id("actor.mu.w"),
        mu_b: id("actor.mu.b"),
        log_std_w: id("actor.log_std.w"),
        log_std_b: id("actor.log_std.b"),
    }
}

/// Policy heads on a feature vector: mean and clamped log-deviation, both
/// rank-1 `ACTION_DIM`.
pub fn actor_heads(
    tape: &mut Tape,
    store: &ParamStore,
    p: &ActorParams,
    feature: NodeId,
) -> (NodeId, NodeId) {
    let (mw, mb) = (tape.param(store, p.mu_w), tape.param(store, p.mu_b));
    let (sw, sb) = (tape.param(store, p.log_std_w), tape.param(store, p.log_std_b));
    let mu = tape.vecmat(feature, mw);
    let mu = tape.add(mu, mb);
    let ls = tape.vecmat(feature, sw);
    let ls = tape.add(ls, sb);
    let ls = tape.clamp(ls, LOG_STD_MIN, LOG_STD_MAX);
    (mu, ls)
}

/// Reparameterized squashed-Gaussian draw. Returns the bounded action and
/// its log-density under the squashed distribution.
///
/// The tanh volume correction uses log(1 - tanh^2 x) = 2(ln 2 - x -
/// softplus(-2x)), which stays finite for any pre-activation.
pub fn sample_squashed(
    tape: &mut Tape,
    mu: NodeId,
    log_std: NodeId,
    noise: &[f64],
) -> (NodeId, NodeId) {
    let dim = noise.len() as f64;
    let xi = tape.input(Tensor::from_vec(&[noise.len()], noise.to_vec()).unwrap());
    let std = tape.exp(log_std);
    let scaled = tape.mul(std, xi);
    let pre = tape.add(mu, scaled);
    let action = tape.tanh(pre);

    // Gaussian density at pre = mu + std*xi: -xi^2/2 - log_std per
    // coordinate (the ln sqrt(2 pi) constant is folded in at the end).
    let xi_sq = tape.square(xi);
    let half_sq = tape.scale(xi_sq, -0.5);
    let minus_ls = tape.scale(log_std, -1.0);
    let gauss = tape.add(half_sq, minus_ls);

    // -log(1 - tanh^2 x) = 2 softplus(-2x) + 2x - 2 ln 2, also folded.
    let neg2pre = tape.scale(pre, -2.0);
    let sp = tape.softplus(neg2pre);
    let sp2 = tape.scale(sp, 2.0);
    let pre2 = tape.scale(pre, 2.0);
    let jac = tape.add(sp2, pre2);

    let per_coord = tape.add(gauss, jac);
    let sum = tape.sum_all(per_coord);
    let constants =
        -dim * (2.0 * std::f64::consts::LN_2 + 0.5 * (2.0 * std::f64::consts::PI).ln());
    let logp = tape.add_scalar(sum, constants);
    (action, logp)
}

/// Deterministic policy output: tanh of the mean head.
pub fn squash_mean(tape: &mut Tape, mu: NodeId) -> NodeId {
    tape.tanh(mu)
}

#[derive(Debug, Clone, Copy)]
pub struct CriticParams {
    pub enc: EncoderParams,
    pub q1_h_w: ParamId,
    pub q1_h_b: ParamId,
    pub q1_o_w: ParamId,
    pub q1_o_b: ParamId,
    pub q2_h_w: ParamId,
    pub q2_h_b: ParamId,
    pub q2_o_w: ParamId,
    pub q2_o_b: ParamId,
}

pub fn add_critic(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    rng: &mut ChaCha8Rng,
) -> CriticParams {
    let enc = add_encoder(store, "critic.enc", cfg, rng);
    let w = cfg.feature_dim();
    let zin = w + ACTION_DIM;
    CriticParams {
        enc,
        q1_h_w: store.add_uniform("critic.q1.h.w", &[zin, w], zin, rng),
        q1_h_b: store.add("critic.q1.h.b", Tensor::zeros(&[w])),
        q1_o_w: store.add_uniform("critic.q1.o.w", &[w, 1], w, rng),
        q1_o_b: store.add("critic.q1.o.b", Tensor::zeros(&[1])),
        q2_h_w: store.add_uniform("critic.q2.h.w", &[zin, w], zin, rng),
        q2_h_b: store.add("critic.q2.h.b", Tensor::zeros(&[w])),
        q2_o_w: store.add_uniform("critic.q2.o.w", &[w, 1], w, rng),
        q2_o_b: store.add("critic.q2.o.b", Tensor::zeros(&[1])),
    }
}

pub fn lookup_critic(store: &ParamStore) -> CriticParams {
    let id = |n: &str| store.id_by_name(n).unwrap_or_else(|| panic!("missing {n}"));
    CriticParams {
        enc: lookup_encoder(store, "critic.enc"),
        q1_h_w: id("critic.q1.h.w"),
        q1_h_b: id("critic.q1.h.b"),
        q1_o_w: id("critic.q1.o.w"),
        q1_o_b: id("critic.q1.o.b"),
        q2_h_w: id("critic.q2.h.w"),
        q2_h_b: id("critic.q2.h.b"),
        q2_o_w: id("critic.q2.o.w"),
        q2_o_b: id("critic.q2.o.b"),
    }
}

/// Twin Q values for one (feature, action) pair; both heads read the same
/// encoder feature. Rank-1 singletons.
pub fn critic_q(
    tape: &mut Tape,
    store: &ParamStore,
    p: &CriticParams,
    feature: NodeId,
    action: NodeId,
) -> (NodeId, NodeId) {
    let z = tape.concat(&[feature, action]);
    let head = |tape: &mut Tape, hw, hb, ow, ob| {
        let (hw, hb) = (tape.param(store, hw), tape.param(store, hb));
        let (ow, ob) = (tape.param(store, ow), tape.param(store, ob));
        let h = tape.vecmat(z, hw);
        let h = tape.add(h, hb);
        let h = tape.relu(h);
        let q = tape.vecmat(h, ow);
        tape.add(q, ob)
    };
    let q1 = head(tape, p.q1_h_w, p.q1_h_b, p.q1_o_w, p.q1_o_b);
    let q2 = head(tape, p.q2_h_w, p.q2_h_b, p.q2_o_w, p.q2_o_b);
    (q1, q2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::fixtures::{synthetic_observation as synthetic_obs, tiny_encoder_config as tiny_config};
    use crate::rng::stream;

    fn permuted(obs: &ReformulatedObservation, perm: &[usize]) -> ReformulatedObservation {
        ReformulatedObservation {
            crops: perm.iter().map(|&i| obs.crops[i].clone()).collect(),
            positions: perm.iter().map(|&i| obs.positions[i]).collect(),
            held: perm.iter().map(|&i| obs.held[i]).collect(),
            lang: obs.lang.clone(),
            crop_side: obs.crop_side,
        }
    }

    #[test]
    fn config_dimensions_follow_the_conv_arithmetic() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.conv_spatial(), 6);
        assert_eq!(cfg.embed_dim(), 16 * 36);
        assert_eq!(cfg.row_dim(), 576 + 2 + 1 + 12);
        let tiny = tiny_config();
        assert_eq!(tiny.conv_spatial(), 2);
        assert_eq!(tiny.row_dim(), 3 * 4 + 15);
    }

    #[test]
    fn feature_is_bit_identical_under_row_permutation() {
        let cfg = tiny_config();
        let mut rng = stream(9, "net-test", 0);
        let mut store = crate::tensor::ParamStore::new();
        let p = add_encoder(&mut store, "actor.enc", &cfg, &mut rng);
        let obs = synthetic_obs(&cfg, 6, &mut rng);

        let mut tape = Tape::new();
        let f = encode(&mut tape, &store, &p, &cfg, &obs);
        let base = tape.value(f).data().to_vec();

        for perm in [
            vec![5usize, 4, 3, 2, 1, 0],
            vec![2, 0, 1, 5, 3, 4],
            vec![1, 5, 0, 4, 2, 3],
        ] {
            let shuffled = permuted(&obs, &perm);
            let mut tape = Tape::new();
            let f = encode(&mut tape, &store, &p, &cfg, &shuffled);
            assert_eq!(tape.value(f).data(), &base[..], "perm {perm:?} changed bits");
        }
    }

    #[test]
    fn feature_depends_on_rows_positions_and_command() {
        let cfg = tiny_config();
        let mut rng = stream(9, "net-test", 1);
        let mut store = crate::tensor::ParamStore::new();
        let p = add_encoder(&mut store, "actor.enc", &cfg, &mut rng);
        let obs = synthetic_obs(&cfg, 4, &mut rng);

        let run = |o: &ReformulatedObservation, store: &crate::tensor::ParamStore| {
            let mut tape = Tape::new();
            let f = encode(&mut tape, store, &p, &cfg, o);
            tape.value(f).data().to_vec()
        };
        let base = run(&obs, &store);

        let mut moved = obs.clone();
        moved.positions[2] = (0.9, -0.9);
        assert_ne!(run(&moved, &store), base, "positions must matter");

        let mut relabeled = obs.clone();
        relabeled.lang[0] = 1.0 - relabeled.lang[0];
        assert_ne!(run(&relabeled, &store), base, "command must matter");
    }

    #[test]
    fn squashed_sampler_matches_direct_math_and_stays_finite() {
        let mu_v = [0.3, -1.0, 0.0, 2.0];
        let ls_v = [-0.5, 0.0, -3.0, 1.0];
        let noise = [0.7, -0.2, 1.5, -2.0];

        let mut tape = Tape::new();
        let mu = tape.input(Tensor::from_vec(&[4], mu_v.to_vec()).unwrap());
        let ls = tape.input(Tensor::from_vec(&[4], ls_v.to_vec()).unwrap());
        let (a, logp) = sample_squashed(&mut tape, mu, ls, &noise);

        // Direct f64 reference of the same density.
        let mut expect_logp = 0.0;
        for k in 0..4 {
            let std = ls_v[k].exp();
            let pre = mu_v[k] + std * noise[k];
            let t = pre.tanh();
            assert!((tape.value(a).data()[k] - t).abs() < 1e-15);
            expect_logp += -0.5 * noise[k] * noise[k]
                - 0.5 * (2.0 * std::f64::consts::PI).ln()
                - ls_v[k]
                - (1.0 - t * t).ln();
        }
        let got = tape.value(logp).item();
        assert!((got - expect_logp).abs() < 1e-9, "{got} vs {expect_logp}");
    }

    #[test]
    fn squash_correction_survives_extreme_preactivations() {
        // Saturated tanh would make ln(1 - tanh^2) explode if computed
        // naively; the softplus form must stay finite.
        let mut tape = Tape::new();
        let mu = tape.input(Tensor::from_vec(&[4], vec![500.0, -500.0, 30.0, -30.0]).unwrap());
        let ls = tape.input(Tensor::from_vec(&[4], vec![LOG_STD_MAX; 4]).unwrap());
        let (_, logp) = sample_squashed(&mut tape, mu, ls, &[3.0, -3.0, 0.0, 0.0]);
        assert!(tape.value(logp).item().is_finite());
    }

    #[test]
    fn actor_and_critic_shapes_line_up() {
        let cfg = tiny_config();
        let mut rng = stream(9, "net-test", 2);
        let mut actor_store = crate::tensor::ParamStore::new();
        let actor = add_actor(&mut actor_store, &cfg, &mut rng);
        let mut critic_store = crate::tensor::ParamStore::new();
        let critic = add_critic(&mut critic_store, &cfg, &mut rng);
        let obs = synthetic_obs(&cfg, 5, &mut rng);

        let mut tape = Tape::new();
        let fa = encode(&mut tape, &actor_store, &actor.enc, &cfg, &obs);
        let (mu, ls) = actor_heads(&mut tape, &actor_store, &actor, fa);
        assert_eq!(tape.value(mu).shape(), &[ACTION_DIM]);
        let (action, logp) = sample_squashed(&mut tape, mu, ls, &[0.1, 0.2, -0.3, 0.4]);
        assert_eq!(tape.value(action).shape(), &[ACTION_DIM]);
        assert_eq!(tape.value(logp).numel(), 1);
        for &v in tape.value(ls).data() {
            assert!((LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        }

        let fc = encode(&mut tape, &critic_store, &critic.enc, &cfg, &obs);
        let (q1, q2) = critic_q(&mut tape, &critic_store, &critic, fc, action);
        assert_eq!(tape.value(q1).numel(), 1);
        assert!(tape.value(q2).item().is_finite());
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let cfg = tiny_config();
        let mut rng = stream(9, "net-test", 3);
        let mut store = crate::tensor::ParamStore::new();
        let p = add_encoder(&mut store, "actor.enc", &cfg, &mut rng);
        let obs = synthetic_obs(&cfg, 3, &mut rng);

        let loss_of = |s: &crate::tensor::ParamStore| -> f64 {
            let mut tape = Tape::new();
            let f = encode(&mut tape, s, &p, &cfg, &obs);
            let sq = tape.square(f);
            let l = tape.mean_all(sq);
            tape.value(l).item()
        };
        let obs2 = obs.clone();
        let report = crate::tensor::finite_diff_check(
            &mut store,
            |s| {
                let mut tape = Tape::new();
                let f = encode(&mut tape, s, &p, &cfg, &obs2);
                let sq = tape.square(f);
                let l = tape.mean_all(sq);
                tape.backward(l, &mut [&mut *s]);
            },
            loss_of,
            1e-5,
            80,
            &mut stream(9, "net-test", 4),
        );
        assert!(report.passes(1e-4), "worst rel err {}", report.max_rel_err);
    }
}
