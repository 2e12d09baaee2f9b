use std::collections::HashMap;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `sqrt(6 / (fan_in + fan_out))`
pub fn glorot_bound(fan_out: usize, fan_in: usize) -> f64 {
    if fan_in + fan_out == 0 {
        0.0
    } else {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }
}

/// Handle to an entry of a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Entry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
    pub trainable: bool,
}

/// Named parameters with gradient slots and Adam moments.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
    step: u64,
    grads_ready: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateParam(name));
        }
        let zeros = Tensor::zeros(value.shape());
        let id = self.entries.len();
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry {
            name,
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
            trainable: true,
        });
        Ok(ParamId(id))
    }

    /// Adds a `rows × cols` matrix drawn uniformly from ±sqrt(6 / (rows + cols)).
    pub fn add_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        self.add_uniform(name, rows, cols, glorot_bound(rows, cols), rng)
    }

    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let data = (0..rows * cols)
            .map(|_| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 })
            .collect();
        self.add(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
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

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        let e = &mut self.entries[id.0];
        e.trainable = trainable;
        if !trainable {
            e.grad.data_mut().fill(0.0);
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn has_gradients(&self) -> bool {
        self.grads_ready
    }

    /// Replaces every trainable gradient slot: `Some` entries are copied in,
    /// the rest zeroed. Frozen entries keep a zero gradient.
    pub(crate) fn set_gradients(&mut self, grads: Vec<Option<Tensor>>) {
        for (entry, g) in self.entries.iter_mut().zip(grads) {
            if !entry.trainable {
                continue;
            }
            match g {
                Some(g) => entry.grad = g,
                None => entry.grad.data_mut().fill(0.0),
            }
        }
        self.grads_ready = true;
    }

    pub fn clear_gradients(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().fill(0.0);
        }
        self.grads_ready = false;
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Entry] {
        &mut self.entries
    }

    pub(crate) fn bump_step(&mut self) -> u64 {
        self.step += 1;
        self.grads_ready = false;
        self.step
    }

    /// `(name, value)` pairs in insertion order.
    pub fn named_values(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    /// Overwrites parameter values by name; shapes must agree.
    pub fn load_values<'a, I>(&mut self, values: I) -> Result<usize>
    where
        I: IntoIterator<Item = (&'a str, &'a Tensor)>,
    {
        let mut n = 0;
        for (name, t) in values {
            let id = self.id(name)?;
            let e = &mut self.entries[id.0];
            if e.value.shape() != t.shape() {
                return Err(Error::shape(
                    "load_values",
                    format!("{}: {:?} vs {:?}", name, e.value.shape(), t.shape()),
                ));
            }
            e.value = t.clone();
            n += 1;
        }
        Ok(n)
    }
}
