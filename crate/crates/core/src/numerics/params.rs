use serde::{Deserialize, Serialize};

use super::{Matrix, NumericsError, Result};

/// Handle to a tensor inside a [`ParameterSet`]. Stable for the lifetime of
/// the set: parameters are registered once, at network construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of named weight matrices and bias vectors.
///
/// Registration order is the iteration order, which makes seeded
/// initialization and checkpoint layout deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl ParameterSet {
    pub fn new() -> Self {
        ParameterSet {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Registers a named tensor, returning its handle. Names must be unique.
    pub fn register(&mut self, name: &str, tensor: Matrix) -> Result<ParamId> {
        if self.names.iter().any(|n| n == name) {
            return Err(NumericsError::DuplicateParameter(name.to_string()));
        }
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        Ok(ParamId(self.names.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar entries across all tensors.
    pub fn entry_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<(ParamId, &Matrix)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (ParamId(i), &self.tensors[i]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(self.tensors.iter())
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter_mut())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::all_finite)
    }

    /// Sets every entry of every tensor to zero.
    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.as_mut_slice().fill(0.0);
        }
    }
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-parameter gradients, aligned with a [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    grads: Vec<Matrix>,
}

impl ParamGrads {
    /// Zero gradients shaped like `params`.
    pub fn zeros_like(params: &ParameterSet) -> Self {
        ParamGrads {
            grads: params
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.grads.iter()
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &ParamGrads) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            a.add_assign(b);
        }
    }

    /// Scales every gradient entry, e.g. for batch averaging.
    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for v in g.as_mut_slice() {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().all(Matrix::all_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.as_slice().iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
