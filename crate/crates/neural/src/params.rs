//! Named parameter tensors and their placement on a tape.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tape::{Grads, Tape, Var};
use crate::tensor::Tensor;

/// Ordered, named parameters. Order is insertion order and fixes the layout
/// of gradients and optimizer state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
    }

    /// N(0, std²) entries.
    pub fn insert_normal(&mut self, name: impl Into<String>, rows: usize, cols: usize, std: f64, rng: &mut impl Rng) {
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        self.insert(name, Tensor::from_vec(rows, cols, data));
    }

    pub fn insert_filled(&mut self, name: impl Into<String>, rows: usize, cols: usize, v: f64) {
        self.insert(name, Tensor::from_vec(rows, cols, vec![v; rows * cols]));
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[self.expect(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        let i = self.expect(name);
        &mut self.tensors[i]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    fn expect(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    /// Places every parameter on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| tape.leaf(t.clone())).collect(),
            index: self.index.clone(),
        }
    }
}

/// Tape handles for a [`ParamSet`].
pub struct Bound {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl Bound {
    /// Handles for parameters already on a tape, e.g. leaves made by
    /// [`crate::grad_check`].
    pub fn from_vars(names: &[String], vars: &[Var]) -> Self {
        assert_eq!(names.len(), vars.len());
        Bound {
            vars: vars.to_vec(),
            index: names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect(),
        }
    }

    pub fn var(&self, name: &str) -> Var {
        self.vars[*self.index.get(name).unwrap_or_else(|| panic!("no parameter named {name}"))]
    }

    /// Per-parameter gradients in set order; unused parameters get zeros.
    pub fn gradients(&self, params: &ParamSet, grads: &Grads) -> Vec<Tensor> {
        self.vars
            .iter()
            .zip(params.tensors())
            .map(|(v, t)| {
                grads
                    .get(v.index())
                    .and_then(Clone::clone)
                    .unwrap_or_else(|| Tensor::zeros(t.rows, t.cols))
            })
            .collect()
    }
}
