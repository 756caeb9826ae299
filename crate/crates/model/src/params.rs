//! Named parameter registry.
//!
//! Trainable tensors and non-trainable buffers (batch-norm running
//! statistics) are kept in registration order. A forward pass binds every
//! trainable tensor to a tape leaf; [`ParamId`] indexes into that binding.

use std::collections::HashMap;

use sled_tensor::rng::he_normal;
use sled_tensor::{Tape, Tensor, Var, XorShift64};

use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BufferId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Named {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Named>,
    buffers: Vec<Named>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn params(&self) -> &[Named] {
        &self.params
    }

    pub fn buffers(&self) -> &[Named] {
        &self.buffers
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn param(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor {
        &self.buffers[id.0].value
    }

    pub fn buffer_mut(&mut self, id: BufferId) -> &mut Tensor {
        &mut self.buffers[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.params.iter_mut().map(|p| &mut p.value)
    }

    /// Creates one tape leaf per trainable tensor, in registration order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone(), true)).collect()
    }

    fn register(&mut self, name: String, value: Tensor, buffer: bool) -> Result<usize> {
        if self.index.contains_key(&name) {
            return Err(ModelError::Parameter(format!("duplicate parameter name {name}")));
        }
        let list = if buffer { &mut self.buffers } else { &mut self.params };
        list.push(Named { name: name.clone(), value });
        self.index.insert(name, list.len() - 1);
        Ok(list.len() - 1)
    }

    /// Overwrites values from another store with identical names and shapes.
    pub fn copy_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() || self.buffers.len() != other.buffers.len() {
            return Err(ModelError::Compatibility("parameter count differs".into()));
        }
        let pairs = self.params.iter_mut().zip(&other.params).chain(self.buffers.iter_mut().zip(&other.buffers));
        for (dst, src) in pairs {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(ModelError::Compatibility(format!(
                    "expected {} {:?}, found {} {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub(crate) fn push_named(&mut self, named: Named, buffer: bool) -> Result<()> {
        self.register(named.name, named.value, buffer).map(|_| ())
    }
}

pub enum Init {
    He,
    Zeros,
    Ones,
}

/// Registers parameters under a dotted name prefix while drawing
/// initial values from one seeded stream in registration order.
pub struct Builder {
    store: ParamStore,
    rng: XorShift64,
    prefix: Vec<String>,
}

impl Builder {
    pub fn new(seed: u64) -> Self {
        Builder { store: ParamStore::default(), rng: XorShift64::new(seed), prefix: Vec::new() }
    }

    pub fn scoped<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.prefix.push(name.to_string());
        let out = f(self);
        self.prefix.pop();
        out
    }

    fn full_name(&self, name: &str) -> String {
        let mut parts = self.prefix.clone();
        parts.push(name.to_string());
        parts.join(".")
    }

    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<ParamId> {
        let value = match init {
            Init::He => he_normal(&mut self.rng, shape),
            Init::Zeros => Tensor::zeros(shape.to_vec()),
            Init::Ones => Tensor::ones(shape.to_vec()),
        };
        let name = self.full_name(name);
        self.store.register(name, value, false).map(ParamId)
    }

    pub fn buffer(&mut self, name: &str, value: Tensor) -> Result<BufferId> {
        let name = self.full_name(name);
        self.store.register(name, value, true).map(BufferId)
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }
}
