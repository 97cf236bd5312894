use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::{RngState, Tensor};

/// Named parameter tensors in creation order. Indices are stable for the
/// lifetime of a model and are how layers refer to their weights.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Rc<Tensor>>,
}

impl ParamStore {
    /// A store holding exactly `named`, in order.
    pub fn from_named(named: Vec<(String, Tensor)>) -> Self {
        let mut p = Self::default();
        for (name, t) in named {
            p.push(name, t);
        }
        p
    }

    pub(crate) fn push(&mut self, name: String, value: Tensor) -> usize {
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(Rc::new(value));
        self.tensors.len() - 1
    }

    pub(crate) fn normal(&mut self, name: String, shape: &[usize], rng: &mut RngState) -> usize {
        self.push(name, Tensor::randn(shape, 0.02, rng))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub(crate) fn shared(&self, i: usize) -> Rc<Tensor> {
        self.tensors[i].clone()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| self.get(i))
    }

    /// Mutable access; copies the tensor first if a graph still holds it.
    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        Rc::make_mut(&mut self.tensors[i])
    }

    /// Replaces a parameter, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("no parameter named '{name}'")))?;
        if value.shape() != self.tensors[i].shape() {
            return Err(Error::Dimension(format!(
                "parameter '{name}' has shape {:?}, got {:?}",
                self.tensors[i].shape(),
                value.shape()
            )));
        }
        self.tensors[i] = Rc::new(value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter().map(|t| &**t))
    }
}
