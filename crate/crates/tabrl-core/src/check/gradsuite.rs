//! Finite-difference verification of every differentiable layer and of the
//! full training losses on a fixed batch of real transitions.
//!
//! Piecewise-linear ops (relu, clamp, minimum) are probed at points at
//! least 100h away from their kinks so the central difference is valid.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::fixtures::{probe_encoder_config, probe_transitions, synthetic_observation};
use super::CheckResult;
use crate::agent::networks::{add_actor, add_critic, add_encoder, encode};
use crate::agent::sac::{build_actor_loss, build_critic_loss, ActorItem, CriticItem};
use crate::rng::stream;
use crate::tensor::{finite_diff_check, NodeId, ParamStore, Tape, Tensor};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn run_check(
    name: &str,
    mut store: ParamStore,
    coords: usize,
    seed_idx: u64,
    build: impl Fn(&mut Tape, &ParamStore) -> NodeId,
) -> CheckResult {
    let report = finite_diff_check(
        &mut store,
        |s| {
            let mut tape = Tape::new();
            let loss = build(&mut tape, s);
            tape.backward(loss, &mut [&mut *s]);
        },
        |s| {
            let mut tape = Tape::new();
            let loss = build(&mut tape, s);
            tape.value(loss).item()
        },
        H,
        coords,
        &mut stream(31, "gradsuite", seed_idx),
    );
    CheckResult {
        name: name.to_string(),
        pass: report.passes(TOL),
        detail: format!(
            "max rel err {:.3e} over {} coords (worst: {}[{}])",
            report.max_rel_err, report.checked, report.worst_param, report.worst_index
        ),
    }
}

fn random_param(
    store: &mut ParamStore,
    name: &str,
    shape: &[usize],
    lo: f64,
    hi: f64,
    rng: &mut ChaCha8Rng,
) {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(lo..hi);
    }
    store.add(name, t);
}

/// Values bounded away from zero so relu/minimum kinks stay out of reach of
/// the probe step.
fn random_param_off_kink(
    store: &mut ParamStore,
    name: &str,
    shape: &[usize],
    rng: &mut ChaCha8Rng,
) {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        let mag = rng.gen_range(0.05..1.0);
        *v = if rng.gen_bool(0.5) { mag } else { -mag };
    }
    store.add(name, t);
}

fn mean_square(tape: &mut Tape, x: NodeId) -> NodeId {
    let s = tape.square(x);
    tape.mean_all(s)
}

pub fn run_gradcheck_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();
    let mut seed_idx = 0u64;
    let mut next_seed = || {
        seed_idx += 1;
        seed_idx
    };

    // Elementwise layers, each probed through a mean-square readout.
    {
        let mut rng = stream(31, "gradsuite-setup", 0);
        let smooth: [(&str, fn(&mut Tape, NodeId) -> NodeId); 4] = [
            ("layer-tanh", |t, x| t.tanh(x)),
            ("layer-exp", |t, x| t.exp(x)),
            ("layer-softplus", |t, x| t.softplus(x)),
            ("layer-square", |t, x| t.square(x)),
        ];
        for (name, f) in smooth {
            let mut store = ParamStore::new();
            random_param(&mut store, "x", &[12], -1.2, 1.2, &mut rng);
            results.push(run_check(name, store, 12, next_seed(), move |tape, s| {
                let x = tape.param(s, s.id_by_name("x").unwrap());
                let y = f(tape, x);
                mean_square(tape, y)
            }));
        }

        let mut store = ParamStore::new();
        random_param_off_kink(&mut store, "x", &[12], &mut rng);
        results.push(run_check("layer-relu", store, 12, next_seed(), |tape, s| {
            let x = tape.param(s, s.id_by_name("x").unwrap());
            let y = tape.relu(x);
            mean_square(tape, y)
        }));

        // Clamp probed with values inside, above, and below the band, all
        // at least 0.05 from the boundaries.
        let mut store = ParamStore::new();
        store.add(
            "x",
            Tensor::from_vec(&[6], vec![-1.4, -0.6, -0.2, 0.3, 0.8, 1.5]).unwrap(),
        );
        results.push(run_check("layer-clamp", store, 6, next_seed(), |tape, s| {
            let x = tape.param(s, s.id_by_name("x").unwrap());
            let y = tape.clamp(x, -1.0, 1.0);
            mean_square(tape, y)
        }));

        let mut store = ParamStore::new();
        store.add("a", Tensor::from_vec(&[5], vec![0.2, -0.7, 1.1, -0.4, 0.9]).unwrap());
        store.add("b", Tensor::from_vec(&[5], vec![0.7, -0.2, 0.3, -0.9, 1.4]).unwrap());
        results.push(run_check("layer-minimum", store, 10, next_seed(), |tape, s| {
            let a = tape.param(s, s.id_by_name("a").unwrap());
            let b = tape.param(s, s.id_by_name("b").unwrap());
            let y = tape.minimum(a, b);
            mean_square(tape, y)
        }));

        let mut store = ParamStore::new();
        random_param(&mut store, "a", &[8], -1.0, 1.0, &mut rng);
        random_param(&mut store, "b", &[8], -1.0, 1.0, &mut rng);
        results.push(run_check(
            "layer-add-sub-mul-scale",
            store,
            16,
            next_seed(),
            |tape, s| {
                let a = tape.param(s, s.id_by_name("a").unwrap());
                let b = tape.param(s, s.id_by_name("b").unwrap());
                let sum = tape.add(a, b);
                let diff = tape.sub(a, b);
                let prod = tape.mul(sum, diff);
                let scaled = tape.scale(prod, 0.7);
                let shifted = tape.add_scalar(scaled, 0.3);
                mean_square(tape, shifted)
            },
        ));
    }

    // Contractions.
    {
        let mut rng = stream(31, "gradsuite-setup", 1);
        let mut store = ParamStore::new();
        random_param(&mut store, "a", &[3, 4], -1.0, 1.0, &mut rng);
        random_param(&mut store, "b", &[4, 5], -1.0, 1.0, &mut rng);
        results.push(run_check("layer-matmul", store, 27, next_seed(), |tape, s| {
            let a = tape.param(s, s.id_by_name("a").unwrap());
            let b = tape.param(s, s.id_by_name("b").unwrap());
            let y = tape.matmul(a, b);
            mean_square(tape, y)
        }));

        let mut store = ParamStore::new();
        random_param(&mut store, "a", &[3, 4], -1.0, 1.0, &mut rng);
        random_param(&mut store, "b", &[5, 4], -1.0, 1.0, &mut rng);
        results.push(run_check("layer-matmul-nt", store, 27, next_seed(), |tape, s| {
            let a = tape.param(s, s.id_by_name("a").unwrap());
            let b = tape.param(s, s.id_by_name("b").unwrap());
            let y = tape.matmul_nt(a, b);
            mean_square(tape, y)
        }));

        let mut store = ParamStore::new();
        random_param(&mut store, "a", &[4, 3], -1.0, 1.0, &mut rng);
        random_param(&mut store, "b", &[3, 4], -1.0, 1.0, &mut rng);
        results.push(run_check(
            "layer-matmul-sorted",
            store,
            24,
            next_seed(),
            |tape, s| {
                let a = tape.param(s, s.id_by_name("a").unwrap());
                let b = tape.param(s, s.id_by_name("b").unwrap());
                let y = tape.matmul_sorted(a, b);
                mean_square(tape, y)
            },
        ));

        let mut store = ParamStore::new();
        random_param(&mut store, "x", &[4], -1.0, 1.0, &mut rng);
        random_param(&mut store, "w", &[4, 6], -1.0, 1.0, &mut rng);
        results.push(run_check("layer-vecmat", store, 28, next_seed(), |tape, s| {
            let x = tape.param(s, s.id_by_name("x").unwrap());
            let w = tape.param(s, s.id_by_name("w").unwrap());
            let y = tape.vecmat(x, w);
            mean_square(tape, y)
        }));

        let mut store = ParamStore::new();
        random_param(&mut store, "w", &[2, 3, 3, 3], -0.5, 0.5, &mut rng);
        random_param(&mut store, "b", &[2], -0.5, 0.5, &mut rng);
        let mut x = Tensor::zeros(&[3, 6, 6]);
        for v in x.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        results.push(run_check("layer-conv2d", store, 56, next_seed(), move |tape, s| {
            let xn = tape.input(x.clone());
            let w = tape.param(s, s.id_by_name("w").unwrap());
            let b = tape.param(s, s.id_by_name("b").unwrap());
            let y = tape.conv2d(xn, w, b, 2, 1);
            mean_square(tape, y)
        }));
    }

    // Reductions, reshapes, attention.
    {
        let mut rng = stream(31, "gradsuite-setup", 2);
        let mut store = ParamStore::new();
        random_param(&mut store, "x", &[3, 5], -1.5, 1.5, &mut rng);
        results.push(run_check(
            "layer-softmax-rows",
            store,
            15,
            next_seed(),
            |tape, s| {
                let x = tape.param(s, s.id_by_name("x").unwrap());
                let y = tape.softmax_rows(x);
                mean_square(tape, y)
            },
        ));

        let mut store = ParamStore::new();
        random_param(&mut store, "x", &[4, 6], -1.0, 1.0, &mut rng);
        results.push(run_check(
            "layer-mean-rows-sum-all",
            store,
            24,
            next_seed(),
            |tape, s| {
                let x = tape.param(s, s.id_by_name("x").unwrap());
                let pooled = tape.mean_rows(x);
                let sq = tape.square(pooled);
                tape.sum_all(sq)
            },
        ));

        let mut store = ParamStore::new();
        random_param(&mut store, "a", &[3], -1.0, 1.0, &mut rng);
        random_param(&mut store, "b", &[4], -1.0, 1.0, &mut rng);
        random_param(&mut store, "c", &[5], -1.0, 1.0, &mut rng);
        results.push(run_check(
            "layer-concat-stack-reshape",
            store,
            12,
            next_seed(),
            |tape, s| {
                let a = tape.param(s, s.id_by_name("a").unwrap());
                let b = tape.param(s, s.id_by_name("b").unwrap());
                let c = tape.param(s, s.id_by_name("c").unwrap());
                let row = tape.concat(&[a, b, c]);
                let grid = tape.stack_rows(&[row, row]);
                let flat = tape.reshape(grid, &[24]);
                mean_square(tape, flat)
            },
        ));

        let mut store = ParamStore::new();
        random_param(&mut store, "x", &[4, 5], -1.0, 1.0, &mut rng);
        random_param(&mut store, "wq", &[5, 5], -0.7, 0.7, &mut rng);
        random_param(&mut store, "wk", &[5, 5], -0.7, 0.7, &mut rng);
        random_param(&mut store, "wv", &[5, 5], -0.7, 0.7, &mut rng);
        results.push(run_check(
            "layer-self-attention",
            store,
            60,
            next_seed(),
            |tape, s| {
                let x = tape.param(s, s.id_by_name("x").unwrap());
                let wq = tape.param(s, s.id_by_name("wq").unwrap());
                let wk = tape.param(s, s.id_by_name("wk").unwrap());
                let wv = tape.param(s, s.id_by_name("wv").unwrap());
                let y = tape.self_attention(x, wq, wk, wv);
                mean_square(tape, y)
            },
        ));
    }

    // Whole encoder on a synthetic observation.
    {
        let cfg = probe_encoder_config();
        let mut rng = stream(31, "gradsuite-setup", 3);
        let mut store = ParamStore::new();
        let params = add_encoder(&mut store, "enc", &cfg, &mut rng);
        let obs = synthetic_observation(&cfg, 3, &mut rng);
        results.push(run_check("encoder-full", store, 60, next_seed(), move |tape, s| {
            let f = encode(tape, s, &params, &cfg, &obs);
            mean_square(tape, f)
        }));
    }

    // Full losses on a fixed 4-transition batch of real environment data.
    {
        let cfg = probe_encoder_config();
        let batch = probe_transitions(4, 101);
        let obs: Vec<_> = batch.iter().map(|t| t.obs.to_obs()).collect();

        let mut rng = stream(31, "gradsuite-setup", 4);
        let mut critic_store = ParamStore::new();
        let critic = add_critic(&mut critic_store, &cfg, &mut rng);
        let critic_for_actor = critic_store.clone();

        let items: Vec<CriticItem> = batch
            .iter()
            .zip(&obs)
            .enumerate()
            .map(|(k, (t, o))| CriticItem {
                obs: o,
                action: t.action,
                target: [0.8, -0.2, 0.4, 1.1][k],
            })
            .collect();
        results.push(run_check(
            "loss-critic-4-transitions",
            critic_store,
            60,
            next_seed(),
            move |tape, s| build_critic_loss(tape, s, &critic, &cfg, &items).loss,
        ));

        let mut actor_store = ParamStore::new();
        let actor = add_actor(&mut actor_store, &cfg, &mut rng);
        let noises = [
            [0.3, -0.8, 1.2, 0.1],
            [-1.1, 0.4, -0.2, 0.9],
            [0.0, 0.6, -1.4, -0.5],
            [0.7, -0.3, 0.2, 1.6],
        ];
        let actor_items: Vec<ActorItem> = obs
            .iter()
            .zip(noises)
            .map(|(o, noise)| ActorItem { obs: o, noise })
            .collect();
        results.push(run_check(
            "loss-actor-4-transitions",
            actor_store,
            60,
            next_seed(),
            move |tape, s| {
                build_actor_loss(
                    tape,
                    s,
                    &actor,
                    &critic_for_actor,
                    &critic,
                    &cfg,
                    0.2,
                    &actor_items,
                )
                .loss
            },
        ));
    }

    results
}
