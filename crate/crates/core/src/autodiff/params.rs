//! Named trainable tensors with gradient buffers, Adam moments and a
//! versioned JSON checkpoint format.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AutodiffError, Gradients, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// First/second moment estimates and the step count of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
    pub adam: AdamState,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, AutodiffError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(AutodiffError::DuplicateParam(name));
        }
        let n = value.len();
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.clone(),
            value,
            grad: vec![0.0; n],
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        });
        self.by_name.insert(name, id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    /// Adds `grads` into the accumulated gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.iter() {
            let buf = &mut self.params[id.0].grad;
            for (b, x) in buf.iter_mut().zip(g) {
                *b += x;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Rounds every value to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for x in p.value.data_mut() {
                *x = *x as f32 as f64;
            }
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Serialized parameter map `name -> (shape, row-major values)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub version: u32,
    pub tensors: BTreeMap<String, StoredTensor>,
}

impl ParamSnapshot {
    pub fn new() -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: &Tensor) {
        self.tensors.insert(
            name.into(),
            StoredTensor {
                shape: tensor.shape(),
                values: tensor.data().to_vec(),
            },
        );
    }

    /// Snapshot of every parameter in `store` under its own name.
    pub fn from_store(store: &ParamStore) -> Self {
        let mut snap = Self::new();
        for id in store.ids() {
            let p = store.get(id);
            snap.insert(p.name.clone(), &p.value);
        }
        snap
    }

    /// Copies `name` into parameter `id`, checking the shape.
    pub fn restore(&self, name: &str, store: &mut ParamStore, id: ParamId) -> Result<(), AutodiffError> {
        let stored = self
            .tensors
            .get(name)
            .ok_or_else(|| AutodiffError::MissingParam(name.to_string()))?;
        let target = store.value_mut(id);
        if stored.shape != target.shape() || stored.values.len() != target.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "restore",
                left: target.shape().to_vec(),
                right: stored.shape.to_vec(),
            });
        }
        target.data_mut().copy_from_slice(&stored.values);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AutodiffError> {
        let snap: Self =
            serde_json::from_str(text).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
        if snap.version != CHECKPOINT_VERSION {
            return Err(AutodiffError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                snap.version
            )));
        }
        for (name, t) in &snap.tensors {
            if t.shape[0] * t.shape[1] != t.values.len() {
                return Err(AutodiffError::Checkpoint(format!("`{name}` has inconsistent shape")));
            }
        }
        Ok(snap)
    }
}

impl Default for ParamSnapshot {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::zeros([1, 2])).unwrap();
        assert!(matches!(
            store.add("w", Tensor::zeros([1, 2])),
            Err(AutodiffError::DuplicateParam(_))
        ));
    }

    #[test]
    fn restore_checks_shape() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::zeros([2, 2])).unwrap();
        let mut snap = ParamSnapshot::new();
        snap.insert("w", &Tensor::zeros([1, 4]));
        assert!(snap.restore("w", &mut store, id).is_err());
        assert!(snap.restore("missing", &mut store, id).is_err());
    }

    proptest! {
        #[test]
        fn json_roundtrip_is_bit_exact(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..40)) {
            let n = values.len();
            let mut store = ParamStore::new();
            let id = store.add("p", Tensor::new([1, n], values.clone()).unwrap()).unwrap();
            let text = ParamSnapshot::from_store(&store).to_json();
            let back = ParamSnapshot::from_json(&text).unwrap();
            let mut other = ParamStore::new();
            let oid = other.add("p", Tensor::zeros([1, n])).unwrap();
            back.restore("p", &mut other, oid).unwrap();
            let a: Vec<u64> = store.value(id).data().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = other.value(oid).data().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
