use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::ParamStore;
use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("parameter {0} missing from snapshot")]
    Missing(String),
    #[error("parameter {name}: shape {got:?} does not match expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("snapshot has {extra} entries not present in the store, first: {first}")]
    Extra { extra: usize, first: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorSnapshot {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntrySnapshot {
    name: String,
    tensor: TensorSnapshot,
}

/// Ordered JSON snapshot of all parameter values. f64 values survive the
/// round trip exactly (shortest-representation float formatting).
pub fn store_to_json(store: &ParamStore) -> serde_json::Value {
    let entries: Vec<EntrySnapshot> = store
        .iter()
        .map(|(name, t)| EntrySnapshot {
            name: name.to_string(),
            tensor: TensorSnapshot {
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            },
        })
        .collect();
    serde_json::to_value(entries).expect("parameter snapshot serializes")
}

/// Load values into an already-constructed store. Entry set and shapes must
/// match exactly.
pub fn store_from_json(
    store: &mut ParamStore,
    value: &serde_json::Value,
) -> Result<(), SerializeError> {
    let entries: Vec<EntrySnapshot> =
        serde_json::from_value(value.clone()).map_err(|_| SerializeError::Extra {
            extra: 0,
            first: "malformed snapshot".to_string(),
        })?;
    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    let mut used = vec![false; entries.len()];
    for name in &names {
        let pos = entries
            .iter()
            .position(|e| &e.name == name)
            .ok_or_else(|| SerializeError::Missing(name.clone()))?;
        used[pos] = true;
        let id = store.id_by_name(name).unwrap();
        let expected = store.value(id).shape().to_vec();
        let snap = &entries[pos].tensor;
        if snap.shape != expected {
            return Err(SerializeError::Shape {
                name: name.clone(),
                expected,
                got: snap.shape.clone(),
            });
        }
        let t = Tensor::from_vec(&snap.shape, snap.data.clone()).map_err(|_| {
            SerializeError::Shape {
                name: name.clone(),
                expected: snap.shape.clone(),
                got: vec![snap.data.len()],
            }
        })?;
        *store.value_mut(id) = t;
    }
    let extra = used.iter().filter(|&&u| !u).count();
    if extra > 0 {
        let first = entries[used.iter().position(|&u| !u).unwrap()].name.clone();
        return Err(SerializeError::Extra { extra, first });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_store() -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = ParamStore::new();
        s.add_uniform("enc.w", &[4, 3], 4, &mut rng);
        s.add_uniform("enc.b", &[3], 4, &mut rng);
        s
    }

    #[test]
    fn round_trip_is_value_exact() {
        let src = sample_store();
        let json = store_to_json(&src);
        let text = serde_json::to_string(&json).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut dst = sample_store();
        for id in dst.ids().collect::<Vec<_>>() {
            for v in dst.value_mut(id).data_mut() {
                *v = 0.0;
            }
        }
        store_from_json(&mut dst, &parsed).unwrap();
        for (a, b) in src.ids().zip(dst.ids()) {
            assert_eq!(src.value(a).data(), dst.value(b).data());
        }
    }

    #[test]
    fn missing_and_mismatched_entries_are_rejected() {
        let src = sample_store();
        let json = store_to_json(&src);
        let mut bigger = sample_store();
        bigger.add("extra", Tensor::scalar(1.0));
        assert!(matches!(
            store_from_json(&mut bigger, &json),
            Err(SerializeError::Missing(_))
        ));

        let mut wrong_shape = ParamStore::new();
        wrong_shape.add("enc.w", Tensor::zeros(&[2, 2]));
        wrong_shape.add("enc.b", Tensor::zeros(&[3]));
        assert!(matches!(
            store_from_json(&mut wrong_shape, &json),
            Err(SerializeError::Shape { .. })
        ));
    }
}
