//! Uniform node-centred grids.
//!
//! The square domain is `[-1, 1]²` with `n` nodes per side, the unit cell `Y`
//! is periodic with `n` nodes per period (no duplicated seam node).

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub h: f64,
    pub periodic: [bool; 2],
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, origin: Point, h: f64, periodic: [bool; 2]) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {nx}x{ny}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        Ok(Grid2D { nx, ny, origin, h, periodic })
    }

    /// `[-1, 1]²` with `n` nodes per side.
    pub fn square_domain(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per side, got {n}")));
        }
        Grid2D::new(n, n, [-1.0, -1.0], 2.0 / (n - 1) as f64, [false, false])
    }

    /// The periodic unit cell `[0, 1[²` with `n` nodes per period.
    pub fn unit_cell(n: usize) -> Result<Self> {
        Grid2D::new(n, n, [0.0, 0.0], 1.0 / n as f64, [true, true])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    #[inline]
    pub fn point_of(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        self.point(i, j)
    }

    /// Upper corner of the covered box (the last node on non-periodic axes,
    /// one full period on periodic axes).
    pub fn extent(&self) -> (Point, Point) {
        let span = |n: usize, p: bool| if p { n as f64 * self.h } else { (n - 1) as f64 * self.h };
        let hi = [self.origin[0] + span(self.nx, self.periodic[0]), self.origin[1] + span(self.ny, self.periodic[1])];
        (self.origin, hi)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        (!self.periodic[0] && (i == 0 || i == self.nx - 1)) || (!self.periodic[1] && (j == 0 || j == self.ny - 1))
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|k| {
            let (i, j) = self.coords(k);
            self.is_boundary(i, j)
        }).collect()
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        let edge = |idx: usize, n: usize, p: bool| if !p && (idx == 0 || idx == n - 1) { 0.5 } else { 1.0 };
        self.h * self.h * edge(i, self.nx, self.periodic[0]) * edge(j, self.ny, self.periodic[1])
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| {
            let (i, j) = self.coords(k);
            self.node_weight(i, j)
        }).collect()
    }

    pub fn lattice(&self) -> Lattice {
        Lattice { nx: self.nx, ny: self.ny, hx: self.h, hy: self.h, periodic: self.periodic }
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.periodic == other.periodic
            && (self.h - other.h).abs() <= 1e-14 * self.h
            && (self.origin[0] - other.origin[0]).abs() <= 1e-14
            && (self.origin[1] - other.origin[1]).abs() <= 1e-14
    }

    pub fn check_same(&self, other: &Grid2D, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {}x{} vs {}x{}", self.nx, self.ny, other.nx, other.ny)))
        }
    }
}

/// Index-space description of a tensor grid, possibly anisotropic.
///
/// Shared by the Cartesian grids and the `(log r, θ)` polar grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub periodic: [bool; 2],
}

impl Lattice {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cells_x(&self) -> usize {
        if self.periodic[0] { self.nx } else { self.nx - 1 }
    }

    #[inline]
    pub fn cells_y(&self) -> usize {
        if self.periodic[1] { self.ny } else { self.ny - 1 }
    }

    /// Control volume of each node: a quarter cell per adjacent cell.
    pub fn volumes(&self) -> Vec<f64> {
        let quarter = 0.25 * self.hx * self.hy;
        let mut vol = vec![0.0; self.len()];
        for j in 0..self.cells_y() {
            let j1 = (j + 1) % self.ny;
            for i in 0..self.cells_x() {
                let i1 = (i + 1) % self.nx;
                for k in [j * self.nx + i, j * self.nx + i1, j1 * self.nx + i, j1 * self.nx + i1] {
                    vol[k] += quarter;
                }
            }
        }
        vol
    }

    pub fn area(&self) -> f64 {
        self.cells_x() as f64 * self.cells_y() as f64 * self.hx * self.hy
    }
}
