//! Weak residual of the `A⁰`-harmonic map equation
//! `-div(A⁰∇v) = v (∇v·A⁰∇v)` for `v = u/|u|`, tested against smooth bumps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{nodal_gradient, ComplexField};
use crate::grid::Point;
use crate::material::Sym2;
use crate::vortex::{VortexSet, BAD_SET_THRESHOLD};

/// Half-width of the tensor bumps; centres sit on a lattice of this spacing.
pub const BUMP_HALF_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct BumpPairing {
    pub center: Point,
    /// `⟨R, φ⟩` for the real and imaginary test directions.
    pub pairing: [f64; 2],
    /// The tangential pairing `⟨R, iφv⟩` from the weak form.
    pub tangential: f64,
    /// `⟨div(A⁰∇v ∧ v), φ⟩`.
    pub wedge: f64,
    /// Scale that makes the pairings dimensionless.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `max |⟨R, φe⟩| / norm` over bumps and `e ∈ {1, i}`.
    pub defect: f64,
    /// `max |⟨div(A⁰∇v ∧ v), φ⟩| / norm`.
    pub wedge_defect: f64,
    /// `max |tangential - wedge|`: the two formulations agree identically.
    pub agreement: f64,
    pub bumps: Vec<BumpPairing>,
}

/// `b(t) = exp(1 - 1/(1 - t²))` on `|t| < 1` and its derivative.
fn bump_1d(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let b = (1.0 - 1.0 / s).exp();
    (b, -2.0 * t / (s * s) * b)
}

/// Bump centres on the `BUMP_HALF_WIDTH` lattice whose supports stay inside
/// `[-1, 1]²` and at distance `≥ exclusion` from every vortex.
pub fn bump_centers(vortices: &VortexSet, exclusion: f64) -> Vec<Point> {
    let w = BUMP_HALF_WIDTH;
    let steps = ((1.0 - w) / w).floor() as i64;
    let mut out = Vec::new();
    for j in -steps..=steps {
        for i in -steps..=steps {
            let c = [i as f64 * w, j as f64 * w];
            // strictly inside: the support may not reach the boundary
            if c[0].abs() + w >= 1.0 - 1e-12 || c[1].abs() + w >= 1.0 - 1e-12 {
                continue;
            }
            let clear = vortices.vortices.iter().all(|v| {
                let d = |a: usize| ((v.center[a] - c[a]).abs() - w).max(0.0);
                d(0).hypot(d(1)) >= exclusion
            });
            if clear {
                out.push(c);
            }
        }
    }
    out
}

fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

fn wedge(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn homogenized_residual_check(u: &ComplexField, a0: Sym2, vortices: &VortexSet, exclusion: f64) -> Result<ResidualReport> {
    let centers = bump_centers(vortices, exclusion);
    if centers.is_empty() {
        return Err(Error::NoTestBumps);
    }
    let grid = u.grid;
    let v = u.normalized();
    let grad = nodal_gradient(&grid, &v.values);
    let weights = grid.weights();
    let a_norm = a0.eigenvalues().1;
    let w = BUMP_HALF_WIDTH;
    let mut bumps = Vec::with_capacity(centers.len());
    for c in centers {
        let mut pairing = [0.0; 2];
        let (mut tangential, mut wedge_pair, mut norm) = (0.0, 0.0, 0.0);
        for k in 0..grid.len() {
            let x = grid.point_of(k);
            let (bx, dbx) = bump_1d((x[0] - c[0]) / w);
            let (by, dby) = bump_1d((x[1] - c[1]) / w);
            if bx == 0.0 || by == 0.0 {
                continue;
            }
            let m = u.values[k].norm();
            if m < BAD_SET_THRESHOLD {
                return Err(Error::AnnulusOverlap(m));
            }
            let phi = bx * by;
            let dphi = [dbx * by / w, bx * dby / w];
            let g = grad[k];
            let vk = v.values[k];
            // A⁰∇v as complex pairs: (A⁰∇v)_a = Σ_b A_ab ∂_b v
            let ag = [g[0] * a0.a11 + g[1] * a0.a12, g[0] * a0.a12 + g[1] * a0.a22];
            let energy = dot(g[0], ag[0]) + dot(g[1], ag[1]);
            let wk = weights[k];
            for (slot, e) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                let flux = dot(ag[0], e) * dphi[0] + dot(ag[1], e) * dphi[1];
                pairing[slot] += wk * (flux - phi * dot(vk, e) * energy);
            }
            // ψ = iφv: ∇ψ = i(v∇φ + φ∇v)
            let iv = Complex64::i() * vk;
            let dpsi = [Complex64::i() * (vk * dphi[0] + g[0] * phi), Complex64::i() * (vk * dphi[1] + g[1] * phi)];
            tangential += wk * (dot(ag[0], dpsi[0]) + dot(ag[1], dpsi[1]) - phi * dot(vk, iv) * energy);
            wedge_pair -= wk * (wedge(ag[0], vk) * dphi[0] + wedge(ag[1], vk) * dphi[1]);
            let gnorm = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
            norm += wk * a_norm * (gnorm * dphi[0].hypot(dphi[1]) + phi * gnorm * gnorm);
        }
        bumps.push(BumpPairing { center: c, pairing, tangential, wedge: wedge_pair, norm });
    }
    let ratio = |x: f64, n: f64| if n > 0.0 { x.abs() / n } else { 0.0 };
    let defect = bumps.iter().map(|b| ratio(b.pairing[0], b.norm).max(ratio(b.pairing[1], b.norm))).fold(0.0, f64::max);
    let wedge_defect = bumps.iter().map(|b| ratio(b.wedge, b.norm)).fold(0.0, f64::max);
    let agreement = bumps.iter().map(|b| (b.tangential - b.wedge).abs()).fold(0.0, f64::max);
    Ok(ResidualReport { defect, wedge_defect, agreement, bumps })
}
