//! Nodal fields on a grid: real scalar samples with one value per node,
//! including the shared vertex dofs and the constrained far endpoints.

use num_complex::Complex64;

use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Scatter free-dof values into a full field (far endpoints zero).
    pub fn from_free(grid: &Grid, free: &[f64]) -> Self {
        let mut values = vec![0.0; grid.n_nodes()];
        for (i, &v) in free.iter().enumerate() {
            values[grid.node_of_free(i)] = v;
        }
        Field { values }
    }

    /// Gather the free-dof values, dropping constrained nodes.
    pub fn to_free(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_free())
            .map(|i| self.values[grid.node_of_free(i)])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn rotated(&self, theta: f64) -> ComplexField {
        let z = Complex64::from_polar(1.0, theta);
        ComplexField {
            values: self.values.iter().map(|&v| z * v).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            values: vec![Complex64::new(0.0, 0.0); grid.n_nodes()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
