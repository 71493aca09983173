//! Nodal scalar and vector fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodal values of a function on a mesh, optionally produced under a cap `|u| ≤ T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub cap: Option<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, cap: None }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![c; n])
    }

    /// Builds a capped field, rejecting values outside `[-cap, cap]`.
    pub fn with_cap(values: Vec<f64>, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::NonPositiveCap(cap));
        }
        if values.iter().any(|v| v.abs() > cap) {
            return Err(Error::InvalidConfig(format!(
                "field exceeds its cap {cap}"
            )));
        }
        Ok(Self {
            values,
            cap: Some(cap),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn shifted(&self, a: f64) -> Self {
        Self::new(self.values.iter().map(|v| v + a).collect())
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Per-node vectors stored node-major with `dim` components each.
///
/// Chart nodes use the chart coordinate basis; a pole node uses the local
/// Cartesian frame of the chart parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub dim: usize,
    pub components: Vec<f64>,
}

impl VectorField {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            dim,
            components: vec![0.0; n * dim],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.components[node * self.dim..(node + 1) * self.dim]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.components[node * self.dim..(node + 1) * self.dim]
    }
}

/// Blow-up classification of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeClass {
    Finite,
    PlusInf,
    MinusInf,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Finite => "FINITE",
            NodeClass::PlusInf => "PLUS_INF",
            NodeClass::MinusInf => "MINUS_INF",
        }
    }
}

/// Counts of each class, in the order finite, plus, minus.
pub fn class_counts(classes: &[NodeClass]) -> [usize; 3] {
    let mut c = [0; 3];
    for k in classes {
        c[match k {
            NodeClass::Finite => 0,
            NodeClass::PlusInf => 1,
            NodeClass::MinusInf => 2,
        }] += 1;
    }
    c
}
