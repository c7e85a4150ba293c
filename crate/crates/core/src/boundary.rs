//! Unit-modulus Dirichlet data of prescribed degree on the square domain.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{Grid2D, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub degree: u32,
    pub center: Point,
    /// Boundary node indices, counter-clockwise starting at the lower-left corner.
    pub nodes: Vec<usize>,
    pub samples: Vec<Complex64>,
}

/// Boundary nodes of a non-periodic grid in counter-clockwise order.
pub fn boundary_loop(grid: &Grid2D) -> Vec<usize> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::with_capacity(2 * (nx + ny) - 4);
    out.extend((0..nx).map(|i| grid.idx(i, 0)));
    out.extend((1..ny).map(|j| grid.idx(nx - 1, j)));
    out.extend((0..nx - 1).rev().map(|i| grid.idx(i, ny - 1)));
    out.extend((1..ny - 1).rev().map(|j| grid.idx(0, j)));
    out
}

/// Sum of principal-branch phase increments along a closed loop, over 2π.
pub fn loop_winding(values: &[Complex64]) -> f64 {
    let n = values.len();
    let total: f64 = (0..n).map(|k| (values[(k + 1) % n] * values[k].conj()).arg()).sum();
    total / (2.0 * std::f64::consts::PI)
}

/// `g(x) = (z/|z|)^d` with `z = x - center`, sampled on the boundary nodes.
pub fn make_boundary_degree_d(grid: &Grid2D, d: u32, center: Point) -> Result<BoundaryData> {
    if grid.periodic[0] || grid.periodic[1] {
        return Err(Error::InvalidGrid("boundary data needs a non-periodic grid".into()));
    }
    let (lo, hi) = grid.extent();
    let inside = (0..2).all(|a| center[a] > lo[a] && center[a] < hi[a]);
    if !inside {
        return Err(Error::InvalidArgument(format!("center {center:?} is not strictly inside the domain")));
    }
    let nodes = boundary_loop(grid);
    let samples = nodes.iter().map(|&k| {
        let x = grid.point_of(k);
        let z = Complex64::new(x[0] - center[0], x[1] - center[1]);
        (z / z.norm()).powu(d)
    }).collect();
    Ok(BoundaryData { degree: d, center, nodes, samples })
}

impl BoundaryData {
    pub fn winding(&self) -> f64 {
        loop_winding(&self.samples)
    }

    /// Writes the samples into the boundary nodes of `u`.
    pub fn impose(&self, u: &mut ComplexField) -> Result<()> {
        if let Some(&k) = self.nodes.iter().find(|&&k| k >= u.values.len()) {
            return Err(Error::GridMismatch(format!("boundary node {k} outside field")));
        }
        for (&k, &g) in self.nodes.iter().zip(&self.samples) {
            u.values[k] = g;
            u.boundary_mask[k] = true;
        }
        Ok(())
    }
}
