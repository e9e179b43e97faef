//! Named tensor collections, used for parameters and their gradients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Tensors keyed by dotted names such as `stage2.weight`, iterated in
/// name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, Tensor>);

impl Params {
    pub fn new() -> Self {
        Params(BTreeMap::new())
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.0.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.0.get_mut(name)
    }

    /// Like [`Params::get`] but a missing name is an error.
    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.0
            .get(name)
            .ok_or_else(|| Error::invalid("params", format!("missing parameter `{name}`")))
    }

    pub fn named(&self) -> impl Iterator<Item = (String, &Tensor)> {
        self.0.iter().map(|(k, v)| (k.clone(), v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.0.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds `t` into the entry `name`, creating it if absent.
    pub fn accumulate(&mut self, name: &str, t: &Tensor) -> Result<()> {
        match self.0.get_mut(name) {
            Some(acc) => acc.add_assign(t),
            None => {
                self.0.insert(name.to_string(), t.clone());
                Ok(())
            }
        }
    }

    pub fn scale_all(&mut self, s: f64) {
        for t in self.0.values_mut() {
            *t = t.scale(s);
        }
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.0.values().map(Tensor::len).sum()
    }
}
