//! Symmetric positive-definite coefficient fields `A(y)` and their samples.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point};

const BOUND_TOL: f64 = 1e-12;

/// Symmetric 2×2 matrix stored as `(a11, a12, a22)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Sym2 { a11, a12, a22 }
    }

    pub const fn scalar(c: f64) -> Self {
        Sym2 { a11: c, a12: 0.0, a22: c }
    }

    pub const fn identity() -> Self {
        Sym2::scalar(1.0)
    }

    #[inline]
    pub fn mul(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a12 * v[0] + self.a22 * v[1]]
    }

    #[inline]
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a11 * v[0] * v[0] + 2.0 * self.a12 * v[0] * v[1] + self.a22 * v[1] * v[1]
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half = 0.5 * (self.a11 - self.a22);
        let r = half.hypot(self.a12);
        (mean - r, mean + r)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            _ => self.a12,
        }
    }

    /// `Qᵀ A Q` for the rotation whose columns are `(cos t, sin t)` and `(-sin t, cos t)`.
    pub fn rotated_frame(&self, t: f64) -> Sym2 {
        let (s, c) = t.sin_cos();
        let er = [c, s];
        let et = [-s, c];
        let a_er = self.mul(er);
        let a_et = self.mul(et);
        Sym2 {
            a11: er[0] * a_er[0] + er[1] * a_er[1],
            a12: er[0] * a_et[0] + er[1] * a_et[1],
            a22: et[0] * a_et[0] + et[1] * a_et[1],
        }
    }

    pub fn within(&self, m: f64, big_m: f64, tol: f64) -> bool {
        let (lo, hi) = self.eigenvalues();
        lo >= m - tol && hi <= big_m + tol
    }
}

/// An analytic coefficient field with certified spectral bounds `(m, M)`.
pub trait Material: Send + Sync {
    fn eval(&self, y: Point) -> Sym2;

    /// Certified `(m, M)` with `spectrum(A(y)) ⊂ [m, M]` for every `y`.
    fn bounds(&self) -> (f64, f64);

    /// Whether every value has a vanishing off-diagonal entry.
    fn is_diagonal(&self) -> bool {
        false
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub Sym2);

impl Material for Constant {
    fn eval(&self, _: Point) -> Sym2 {
        self.0
    }

    fn bounds(&self) -> (f64, f64) {
        self.0.eigenvalues()
    }

    fn is_diagonal(&self) -> bool {
        self.0.a12 == 0.0
    }

    fn describe(&self) -> String {
        format!("const({},{},{})", self.0.a11, self.0.a12, self.0.a22)
    }
}

/// `(mean + amp sin 2πy₁) Id`.
#[derive(Debug, Clone, Copy)]
pub struct Laminate {
    pub mean: f64,
    pub amp: f64,
}

impl Material for Laminate {
    fn eval(&self, y: Point) -> Sym2 {
        Sym2::scalar(self.mean + self.amp * (2.0 * PI * y[0]).sin())
    }

    fn bounds(&self) -> (f64, f64) {
        (self.mean - self.amp.abs(), self.mean + self.amp.abs())
    }

    fn is_diagonal(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("laminate({},{})", self.mean, self.amp)
    }
}

/// `(mean + amp sin 2πy₁ sin 2πy₂) Id`.
#[derive(Debug, Clone, Copy)]
pub struct Checkerboard {
    pub mean: f64,
    pub amp: f64,
}

impl Material for Checkerboard {
    fn eval(&self, y: Point) -> Sym2 {
        Sym2::scalar(self.mean + self.amp * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).sin())
    }

    fn bounds(&self) -> (f64, f64) {
        (self.mean - self.amp.abs(), self.mean + self.amp.abs())
    }

    fn is_diagonal(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("checker({},{})", self.mean, self.amp)
    }
}

/// One Fourier mode `amp · sin(2π k·y + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: [i32; 2],
    pub amp: f64,
    pub phase: f64,
}

impl Mode {
    fn eval(&self, y: Point) -> f64 {
        self.amp * (2.0 * PI * (self.k[0] as f64 * y[0] + self.k[1] as f64 * y[1]) + self.phase).sin()
    }
}

/// Smooth anisotropic field `R(φ) diag(λ₁, λ₂) R(φ)ᵀ`.
///
/// The eigenvalues are `m + (M - m)·(1 + s(y))/2` where `s` is a sum of modes
/// with total amplitude at most one, so `(m, M)` is certified by construction.
#[derive(Debug, Clone)]
pub struct Rotated {
    pub m: f64,
    pub big_m: f64,
    pub lambda1: Vec<Mode>,
    pub lambda2: Vec<Mode>,
    pub angle: Vec<Mode>,
}

impl Rotated {
    pub fn new(m: f64, big_m: f64, lambda1: Vec<Mode>, lambda2: Vec<Mode>, angle: Vec<Mode>) -> Result<Self> {
        if !(m > 0.0 && m <= big_m) {
            return Err(Error::InvalidArgument(format!("need 0 < m <= M, got ({m}, {big_m})")));
        }
        for modes in [&lambda1, &lambda2] {
            let total: f64 = modes.iter().map(|md| md.amp.abs()).sum();
            if total > 1.0 + 1e-15 {
                return Err(Error::InvalidArgument(format!("eigenvalue modes have total amplitude {total} > 1")));
            }
        }
        Ok(Rotated { m, big_m, lambda1, lambda2, angle })
    }

    fn eigen(&self, modes: &[Mode], y: Point) -> f64 {
        let s: f64 = modes.iter().map(|md| md.eval(y)).sum();
        let t = (0.5 * (1.0 + s)).clamp(0.0, 1.0);
        self.m + (self.big_m - self.m) * t
    }
}

impl Material for Rotated {
    fn eval(&self, y: Point) -> Sym2 {
        let l1 = self.eigen(&self.lambda1, y);
        let l2 = self.eigen(&self.lambda2, y);
        let phi: f64 = self.angle.iter().map(|md| md.eval(y)).sum();
        let (s, c) = phi.sin_cos();
        Sym2 {
            a11: c * c * l1 + s * s * l2,
            a12: c * s * (l1 - l2),
            a22: s * s * l1 + c * c * l2,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        (self.m, self.big_m)
    }

    fn describe(&self) -> String {
        format!("rotated(m={},M={},modes={})", self.m, self.big_m, self.lambda1.len() + self.lambda2.len() + self.angle.len())
    }
}

/// A closure-backed field with caller-certified bounds.
#[derive(Clone)]
pub struct FnMaterial {
    f: Arc<dyn Fn(Point) -> Sym2 + Send + Sync>,
    bounds: (f64, f64),
    name: String,
}

impl FnMaterial {
    pub fn new(name: impl Into<String>, bounds: (f64, f64), f: impl Fn(Point) -> Sym2 + Send + Sync + 'static) -> Self {
        FnMaterial { f: Arc::new(f), bounds, name: name.into() }
    }
}

impl fmt::Debug for FnMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMaterial").field("name", &self.name).field("bounds", &self.bounds).finish()
    }
}

impl Material for FnMaterial {
    fn eval(&self, y: Point) -> Sym2 {
        (self.f)(y)
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Node samples of a coefficient field, with the certified bounds of its source.
#[derive(Debug, Clone)]
pub struct MatrixField {
    pub grid: Grid2D,
    pub entries: Vec<Sym2>,
    pub m: f64,
    pub big_m: f64,
}

impl MatrixField {
    /// Wraps raw samples after checking them against `(m, M)`.
    pub fn from_entries(grid: Grid2D, entries: Vec<Sym2>, m: f64, big_m: f64) -> Result<Self> {
        if entries.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: entries.len() });
        }
        check_bounds(&entries, m, big_m)?;
        Ok(MatrixField { grid, entries, m, big_m })
    }

    pub fn constant(grid: Grid2D, a: Sym2) -> Result<Self> {
        let (m, big_m) = a.eigenvalues();
        MatrixField::from_entries(grid, vec![a; grid.len()], m, big_m)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|a| a.a12 == 0.0)
    }
}

pub(crate) fn check_bounds(entries: &[Sym2], m: f64, big_m: f64) -> Result<()> {
    // m = M is allowed for constant fields
    if !(m > 0.0 && m <= big_m) {
        return Err(Error::InvalidArgument(format!("need 0 < m <= M, got ({m}, {big_m})")));
    }
    for (node, a) in entries.iter().enumerate() {
        if !(a.a11.is_finite() && a.a12.is_finite() && a.a22.is_finite()) {
            return Err(Error::MaterialBounds { node, reason: "non-finite entry".into() });
        }
        let tol = BOUND_TOL * big_m.max(1.0);
        if !a.within(m, big_m, tol) {
            let (lo, hi) = a.eigenvalues();
            return Err(Error::MaterialBounds { node, reason: format!("eigenvalues ({lo}, {hi}) outside [{m}, {big_m}]") });
        }
    }
    Ok(())
}

/// Samples `A(x/δ)` at every node, or `A(y)` on the cell when `delta` is `None`.
pub fn sample_matrix_field(material: &dyn Material, grid: &Grid2D, delta: Option<f64>) -> Result<MatrixField> {
    let scale = match delta {
        Some(d) if d > 0.0 && d.is_finite() => 1.0 / d,
        Some(d) => return Err(Error::InvalidArgument(format!("delta must be positive, got {d}"))),
        None => 1.0,
    };
    let entries: Vec<Sym2> = (0..grid.len())
        .map(|k| {
            let x = grid.point_of(k);
            material.eval([x[0] * scale, x[1] * scale])
        })
        .collect();
    let (m, big_m) = material.bounds();
    MatrixField::from_entries(*grid, entries, m, big_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_field_is_accepted_with_equal_bounds() {
        let g = Grid2D::square_domain(9).unwrap();
        let f = sample_matrix_field(&Constant(Sym2::identity()), &g, Some(0.3)).unwrap();
        assert_eq!(f.m, 1.0);
        assert_eq!(f.big_m, 1.0);
        assert!(f.entries.iter().all(|a| *a == Sym2::identity()));
    }

    #[test]
    fn laminate_scaled_sample() {
        // node x = (1/8, 0) with δ = 1/4 sees y = (1/2, 0): (2 + sin π)·Id
        let g = Grid2D::new(9, 9, [0.0, 0.0], 1.0 / 8.0, [false, false]).unwrap();
        let f = sample_matrix_field(&Laminate { mean: 2.0, amp: 1.0 }, &g, Some(0.25)).unwrap();
        let a = f.entries[g.idx(1, 0)];
        assert!((a.a11 - 2.0).abs() < 1e-14 && a.a12 == 0.0 && (a.a22 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cell_field_is_periodic() {
        let lam = Laminate { mean: 2.0, amp: 1.0 };
        let r = Rotated::new(0.5, 2.0, vec![Mode { k: [1, 2], amp: 0.7, phase: 0.3 }], vec![], vec![Mode { k: [2, -1], amp: 1.1, phase: 0.0 }]).unwrap();
        for y in [[0.13, 0.7], [0.5, 0.25], [0.91, 0.04]] {
            for mat in [&lam as &dyn Material, &r] {
                let a = mat.eval(y);
                let b = mat.eval([y[0] + 1.0, y[1]]);
                let c = mat.eval([y[0], y[1] - 1.0]);
                assert!((a.a11 - b.a11).abs() < 1e-12 && (a.a12 - c.a12).abs() < 1e-12 && (a.a22 - b.a22).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_bounds_samples_rejected() {
        let g = Grid2D::unit_cell(8).unwrap();
        let liar = FnMaterial::new("liar", (1.0, 2.0), |_| Sym2::scalar(2.5));
        assert!(matches!(sample_matrix_field(&liar, &g, None), Err(Error::MaterialBounds { .. })));
        assert!(sample_matrix_field(&liar, &g, Some(-1.0)).is_err());
    }

    #[test]
    fn rotated_frame_preserves_spectrum() {
        let a = Sym2::new(2.0, 0.4, 1.0);
        let b = a.rotated_frame(0.77);
        let (x, y) = (a.eigenvalues(), b.eigenvalues());
        assert!((x.0 - y.0).abs() < 1e-13 && (x.1 - y.1).abs() < 1e-13);
        let b0 = a.rotated_frame(0.0);
        assert!((b0.a12 - 0.4).abs() < 1e-15);
    }
}
