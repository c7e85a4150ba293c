use num_complex::Complex64;

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.point_of(k))).collect();
        ScalarField { grid, values }
    }

    /// Trapezoidal `∫ f`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum()
    }

    pub fn gradient(&self) -> Vec<[f64; 2]> {
        nodal_gradient(&self.grid, &self.values)
    }

    pub fn sample(&self, p: Point) -> f64 {
        bilinear(&self.grid, &self.values, p)
    }
}

/// The order parameter `u` on a grid; boundary nodes carry Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
    pub boundary_mask: Vec<bool>,
}

impl ComplexField {
    pub fn new(grid: Grid2D, values: Vec<Complex64>, boundary_mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if boundary_mask.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: boundary_mask.len() });
        }
        Ok(ComplexField { grid, values, boundary_mask })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Point) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.point_of(k))).collect();
        ComplexField { grid, values, boundary_mask: grid.boundary_mask() }
    }

    /// Interior from `f`, boundary nodes from the Dirichlet data.
    pub fn with_boundary(grid: Grid2D, g: &BoundaryData, f: impl Fn(Point) -> Complex64) -> Result<Self> {
        let mut u = ComplexField::from_fn(grid, f);
        g.impose(&mut u)?;
        Ok(u)
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `u/|u|` nodewise; zero nodes stay zero.
    pub fn normalized(&self) -> ComplexField {
        let values = self.values.iter().map(|z| {
            let r = z.norm();
            if r > 0.0 { z / r } else { *z }
        }).collect();
        ComplexField { grid: self.grid, values, boundary_mask: self.boundary_mask.clone() }
    }

    /// Central-difference nodal gradient `(∂₁u, ∂₂u)`, one-sided on non-periodic edges.
    pub fn gradient(&self) -> Vec<[Complex64; 2]> {
        nodal_gradient(&self.grid, &self.values)
    }

    /// Bilinear interpolation at an arbitrary point of the covered box.
    pub fn sample(&self, p: Point) -> Complex64 {
        bilinear(&self.grid, &self.values, p)
    }
}

pub(crate) fn nodal_gradient<T>(grid: &Grid2D, v: &[T]) -> Vec<[T; 2]>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
    let diff = |n: usize, periodic: bool, i: usize, at: &dyn Fn(usize) -> T| -> T {
        if periodic {
            (at((i + 1) % n) - at((i + n - 1) % n)) * (0.5 / h)
        } else if i == 0 {
            (at(1) - at(0)) * (1.0 / h)
        } else if i == n - 1 {
            (at(n - 1) - at(n - 2)) * (1.0 / h)
        } else {
            (at(i + 1) - at(i - 1)) * (0.5 / h)
        }
    };
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let gx = diff(nx, grid.periodic[0], i, &|ii| v[j * nx + ii]);
            let gy = diff(ny, grid.periodic[1], j, &|jj| v[jj * nx + i]);
            out.push([gx, gy]);
        }
    }
    out
}

pub(crate) fn bilinear<T>(grid: &Grid2D, v: &[T], p: Point) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let locate = |x: f64, o: f64, n: usize, periodic: bool| -> (usize, usize, f64) {
        let s = (x - o) / grid.h;
        if periodic {
            let s = s.rem_euclid(n as f64);
            let i0 = (s.floor() as usize).min(n - 1);
            (i0, (i0 + 1) % n, s - i0 as f64)
        } else {
            let s = s.clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n - 2);
            (i0, i0 + 1, s - i0 as f64)
        }
    };
    let (i0, i1, tx) = locate(p[0], grid.origin[0], grid.nx, grid.periodic[0]);
    let (j0, j1, ty) = locate(p[1], grid.origin[1], grid.ny, grid.periodic[1]);
    let at = |i: usize, j: usize| v[j * grid.nx + i];
    at(i0, j0) * ((1.0 - tx) * (1.0 - ty)) + at(i1, j0) * (tx * (1.0 - ty)) + at(i0, j1) * ((1.0 - tx) * ty) + at(i1, j1) * (tx * ty)
}
