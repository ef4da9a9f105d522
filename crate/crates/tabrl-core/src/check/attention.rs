//! Contract checks for the self-attention block: weight rows are a
//! distribution, a single row passes through as its value projection, and
//! row permutations of the input permute the output bit-exactly.

use rand_chacha::ChaCha8Rng;

use super::CheckResult;
use crate::rng::stream;
use crate::tensor::{ParamStore, Tape, Tensor};

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    use rand::Rng;
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(&[rows, cols], data).unwrap()
}

fn attention_setup(n: usize, d: usize, seed_idx: u64) -> (ParamStore, Tensor) {
    let mut rng = stream(23, "attention-check", seed_idx);
    let mut store = ParamStore::new();
    store.add("wq", random_matrix(d, d, &mut rng));
    store.add("wk", random_matrix(d, d, &mut rng));
    store.add("wv", random_matrix(d, d, &mut rng));
    (store, random_matrix(n, d, &mut rng))
}

/// Rebuilds the pre-output stage of the attention block to expose the
/// softmax weights, which `Tape::self_attention` keeps internal.
fn attention_weights(store: &ParamStore, x: &Tensor) -> Tensor {
    let d = x.cols();
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let q = {
        let w = tape.param(store, store.id_by_name("wq").unwrap());
        tape.matmul(xn, w)
    };
    let k = {
        let w = tape.param(store, store.id_by_name("wk").unwrap());
        tape.matmul(xn, w)
    };
    let scores = tape.matmul_nt(q, k);
    let scaled = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let weights = tape.softmax_rows(scaled);
    tape.value(weights).clone()
}

fn run_attention(store: &ParamStore, x: &Tensor) -> Tensor {
    let mut tape = Tape::new();
    let xn = tape.input(x.clone());
    let wq = tape.param(store, store.id_by_name("wq").unwrap());
    let wk = tape.param(store, store.id_by_name("wk").unwrap());
    let wv = tape.param(store, store.id_by_name("wv").unwrap());
    let out = tape.self_attention(xn, wq, wk, wv);
    tape.value(out).clone()
}

pub fn run_attention_checks() -> Vec<CheckResult> {
    let mut results = Vec::new();

    // Every attention row is a probability distribution.
    let (store, x) = attention_setup(7, 10, 0);
    let weights = attention_weights(&store, &x);
    let worst = (0..weights.rows())
        .map(|r| {
            let s: f64 = weights.data()[r * weights.cols()..(r + 1) * weights.cols()]
                .iter()
                .sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let nonneg = weights.data().iter().all(|&w| w >= 0.0);
    results.push(CheckResult {
        name: "attention-rows-sum-to-one".into(),
        pass: worst <= 1e-9 && nonneg,
        detail: format!("worst |row sum - 1| = {worst:.3e}, nonneg = {nonneg}"),
    });

    // A single input row attends only to itself: output = x Wv exactly
    // (its attention weight is exactly 1 by construction of softmax on a
    // single element).
    let (store, x) = attention_setup(1, 9, 1);
    let out = run_attention(&store, &x);
    let expected = {
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let wv = tape.param(&store, store.id_by_name("wv").unwrap());
        let v = tape.matmul(xn, wv);
        tape.value(v).clone()
    };
    let single_ok = out.data() == expected.data();
    results.push(CheckResult {
        name: "attention-single-row-is-value-projection".into(),
        pass: single_ok,
        detail: if single_ok {
            "n=1 output equals V row bit-exactly".into()
        } else {
            "n=1 output differs from V row".into()
        },
    });

    // Permuting input rows permutes output rows with zero drift.
    let (store, x) = attention_setup(6, 11, 2);
    let base = run_attention(&store, &x);
    let mut pass = true;
    let mut detail = String::from("bit-exact under row permutations");
    for perm in [vec![5usize, 4, 3, 2, 1, 0], vec![2, 0, 4, 1, 5, 3]] {
        let mut shuffled = Vec::with_capacity(x.numel());
        for &i in &perm {
            shuffled.extend_from_slice(&x.data()[i * x.cols()..(i + 1) * x.cols()]);
        }
        let xp = Tensor::from_vec(&[x.rows(), x.cols()], shuffled).unwrap();
        let out = run_attention(&store, &xp);
        for (new_row, &old_row) in perm.iter().enumerate() {
            let got = &out.data()[new_row * out.cols()..(new_row + 1) * out.cols()];
            let want = &base.data()[old_row * base.cols()..(old_row + 1) * base.cols()];
            if got != want {
                pass = false;
                detail = format!("row {old_row} changed under permutation {perm:?}");
            }
        }
    }
    results.push(CheckResult {
        name: "attention-permutation-equivariance".into(),
        pass,
        detail,
    });

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_attention_checks_pass() {
        for r in run_attention_checks() {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }
}
