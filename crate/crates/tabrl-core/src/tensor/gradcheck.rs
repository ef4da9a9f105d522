use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;

/// Outcome of a central finite-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare analytic gradients against central differences.
///
/// `grad` must populate `store` gradients for the same loss that `loss`
/// evaluates. `n_coords` coordinates are sampled uniformly over all scalar
/// parameters; each is perturbed by ±h. The relative error denominator is
/// floored at 1e-6 so exact zero gradients cannot blow up the ratio.
pub fn finite_diff_check(
    store: &mut ParamStore,
    grad: impl FnOnce(&mut ParamStore),
    mut loss: impl FnMut(&ParamStore) -> f64,
    h: f64,
    n_coords: usize,
    rng: &mut ChaCha8Rng,
) -> GradCheckReport {
    store.zero_grads();
    grad(store);
    let analytic: Vec<Vec<f64>> = store
        .ids()
        .map(|id| store.grad(id).data().to_vec())
        .collect();

    let ids: Vec<_> = store.ids().collect();
    let sizes: Vec<usize> = ids.iter().map(|&id| store.value(id).numel()).collect();
    let total: usize = sizes.iter().sum();
    assert!(total > 0, "store has no parameters");

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };

    for _ in 0..n_coords {
        let mut flat = rng.gen_range(0..total);
        let mut pi = 0;
        while flat >= sizes[pi] {
            flat -= sizes[pi];
            pi += 1;
        }
        let id = ids[pi];

        let orig = store.value(id).data()[flat];
        store.value_mut(id).data_mut()[flat] = orig + h;
        let up = loss(store);
        store.value_mut(id).data_mut()[flat] = orig - h;
        let down = loss(store);
        store.value_mut(id).data_mut()[flat] = orig;

        let numeric = (up - down) / (2.0 * h);
        let a = analytic[pi][flat];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_param = store.name(id).to_string();
            report.worst_index = flat;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};
    use rand::SeedableRng;

    fn quadratic_loss(store: &ParamStore) -> f64 {
        let w = store.id_by_name("w").unwrap();
        let mut tape = Tape::new();
        let wn = tape.param(store, w);
        let sq = tape.square(wn);
        let loss = tape.mean_all(sq);
        tape.value(loss).item()
    }

    #[test]
    fn analytic_gradient_of_quadratic_passes() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = finite_diff_check(
            &mut store,
            |s| {
                let w = s.id_by_name("w").unwrap();
                let mut tape = Tape::new();
                let wn = tape.param(s, w);
                let sq = tape.square(wn);
                let loss = tape.mean_all(sq);
                tape.backward(loss, &mut [&mut *s]);
            },
            quadratic_loss,
            1e-5,
            64,
            &mut rng,
        );
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = finite_diff_check(
            &mut store,
            |s| {
                let w = s.id_by_name("w").unwrap();
                let mut tape = Tape::new();
                let wn = tape.param(s, w);
                let sq = tape.square(wn);
                let loss = tape.mean_all(sq);
                tape.backward(loss, &mut [&mut *s]);
                // Deliberate corruption: scale one gradient element.
                let w = s.id_by_name("w").unwrap();
                s.grad_mut(w).data_mut()[1] *= 1.05;
            },
            quadratic_loss,
            1e-5,
            64,
            &mut rng,
        );
        assert!(!report.passes(1e-4), "corruption went unnoticed: {report:?}");
    }
}
