//! Named parameter tensors and matching gradient buffers.

use crate::error::{Error, Result};
use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// An ordered collection of named parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: IndexMap<String, Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: IndexMap::new(),
        }
    }

    /// Register a matrix initialized uniformly in `[-limit, limit]` with
    /// `limit = sqrt(6 / (rows + cols))`.
    pub fn init_xavier(&mut self, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let m = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..=limit));
        self.insert(name, m);
    }

    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Array2::zeros((rows, cols)));
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) {
        let prev = self.entries.insert(name.to_string(), value);
        assert!(prev.is_none(), "duplicate parameter {name}");
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    /// Error if any parameter contains a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in &self.entries {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!("non-finite values in parameter {name}")));
            }
        }
        Ok(())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Gradient accumulator mirroring a `ParamSet`'s shapes.
#[derive(Debug, Clone)]
pub struct GradSet {
    entries: IndexMap<String, Array2<f64>>,
}

impl GradSet {
    pub fn zeros_like(params: &ParamSet) -> Self {
        GradSet {
            entries: params
                .iter()
                .map(|(k, v)| (k.to_string(), Array2::zeros(v.dim())))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, name: &str, delta: &Array2<f64>) {
        let slot = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown gradient slot {name}"));
        *slot += delta;
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown gradient slot {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Sum of absolute gradient values per parameter, for dead-subnetwork
    /// probes.
    pub fn abs_sum(&self, name: &str) -> f64 {
        self.get(name).iter().map(|v| v.abs()).sum()
    }
}
