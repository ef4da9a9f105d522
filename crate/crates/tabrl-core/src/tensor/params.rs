use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;

static STORE_TOKEN: AtomicUsize = AtomicUsize::new(0);

/// Handle into a [`ParamStore`]. Ids are dense indices in registration order,
/// so two stores built by the same construction code line up one-to-one
/// (target networks rely on this).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named trainable tensors plus their gradient accumulators.
///
/// Every store carries a process-unique token so a tape can tell apart
/// same-indexed parameters of different stores (clones get a fresh token).
#[derive(Debug)]
pub struct ParamStore {
    token: usize,
    entries: Vec<Entry>,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        ParamStore {
            token: STORE_TOKEN.fetch_add(1, Ordering::Relaxed),
            entries: self.entries.clone(),
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            token: STORE_TOKEN.fetch_add(1, Ordering::Relaxed),
            entries: Vec::new(),
        }
    }

    pub(crate) fn token(&self) -> usize {
        self.token
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        let grad = Tensor::zeros(value.shape());
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad,
        });
        ParamId(self.entries.len() - 1)
    }

    /// Uniform init in [-limit, limit] with limit = sqrt(6 / fan_in).
    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let limit = (6.0 / fan_in as f64).sqrt();
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.gen_range(-limit..limit);
        }
        self.add(name, t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_by_name(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].grad
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            for g in e.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// In-place Polyak update: self <- (1 - tau) * self + tau * src.
    /// Both stores must have been built by the same constructor.
    pub fn polyak_from(&mut self, src: &ParamStore, tau: f64) {
        assert_eq!(self.entries.len(), src.entries.len());
        for (dst, s) in self.entries.iter_mut().zip(&src.entries) {
            assert_eq!(dst.value.shape(), s.value.shape(), "{}", dst.name);
            for (d, &v) in dst.value.data_mut().iter_mut().zip(s.value.data()) {
                *d = (1.0 - tau) * *d + tau * v;
            }
        }
    }

    pub fn copy_values_from(&mut self, src: &ParamStore) {
        self.polyak_from(src, 1.0);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn polyak_moves_values_toward_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = ParamStore::new();
        let mut b = ParamStore::new();
        a.add("w", Tensor::from_vec(&[2], vec![0.0, 10.0]).unwrap());
        b.add("w", Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap());
        a.polyak_from(&b, 0.1);
        let id = a.id_by_name("w").unwrap();
        assert!((a.value(id).data()[0] - 0.1).abs() < 1e-12);
        assert!((a.value(id).data()[1] - 9.0).abs() < 1e-12);
        let _ = rng.gen_range(0.0..1.0);
    }

    #[test]
    fn uniform_init_respects_fan_in_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        let id = s.add_uniform("w", &[6, 100], 6, &mut rng);
        let limit = (6.0f64 / 6.0).sqrt();
        assert!(s.value(id).data().iter().all(|v| v.abs() <= limit));
        // Same seed, same construction => identical values.
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let mut s2 = ParamStore::new();
        let id2 = s2.add_uniform("w", &[6, 100], 6, &mut rng2);
        assert_eq!(s.value(id).data(), s2.value(id2).data());
    }
}
