use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let m = store
            .ids()
            .map(|id| vec![0.0; store.value(id).numel()])
            .collect::<Vec<_>>();
        let v = m.clone();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m,
            v,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update from the gradients currently held in `store`. Does not
    /// clear them; callers zero grads before the next accumulation.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let g: Tensor = store.grad(id).clone();
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let theta = store.value_mut(id);
            for ((p, (mi, vi)), &gi) in theta
                .data_mut()
                .iter_mut()
                .zip(m.iter_mut().zip(v.iter_mut()))
                .zip(g.data())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    #[test]
    fn first_step_moves_by_lr_in_sign_direction() {
        // With constant gradient g, bias correction makes the first step
        // exactly lr * g / (|g| + eps') ~ lr * sign(g).
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap());
        store.grad_mut(w).data_mut().copy_from_slice(&[0.5, -3.0]);
        let mut adam = Adam::new(&store, 1e-3);
        adam.step(&mut store);
        let got = store.value(w).data();
        assert!((got[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((got[1] - (-2.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(5.0));
        let mut adam = Adam::new(&store, 0.05);
        for _ in 0..2000 {
            store.zero_grads();
            let mut tape = Tape::new();
            let wn = tape.param(&store, w);
            let shifted = tape.add_scalar(wn, -1.25);
            let loss = tape.square(shifted);
            tape.backward(loss, &mut [&mut store]);
            adam.step(&mut store);
        }
        assert!((store.value(w).data()[0] - 1.25).abs() < 1e-3);
    }

    #[test]
    fn state_survives_json_round_trip() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(0.3));
        store.grad_mut(w).data_mut()[0] = 0.7;
        let mut adam = Adam::new(&store, 1e-2);
        adam.step(&mut store);
        let json = serde_json::to_string(&adam).unwrap();
        let back: Adam = serde_json::from_str(&json).unwrap();
        assert_eq!(back.steps_taken(), 1);
        assert_eq!(back.m, adam.m);
        assert_eq!(back.v, adam.v);
    }
}
