//! Browser bindings: the cell problem, a small GL minimization and `μ` against `κ`.
//!
//! Each operation has a plain Rust entry point returning [`homogl::Result`]
//! and a thin `wasm_bindgen` wrapper around it.

use homogl::annulus::{compute_mu, sample_polar, PolarGrid};
use homogl::cell::solve_cell_problem;
use homogl::gl::{minimize, GlProblem, Schedule};
use homogl::grid::Grid2D;
use homogl::material::sample_matrix_field;
use homogl::pipeline::MaterialSpec;
use homogl::vortex::{detect_bad_disks, BAD_SET_THRESHOLD};
use homogl::{Error, Result};
use wasm_bindgen::prelude::*;

/// Largest grids the page may request; keeps a click under a few seconds.
pub const MAX_CELL_GRID: usize = 128;
pub const MAX_DOMAIN_GRID: usize = 129;
pub const MAX_KAPPA: i32 = 8;

const CELL_TOL: f64 = 1e-10;
const MU_TOL: f64 = 1e-10;
const MU_NTHETA: usize = 64;
const MU_PER_OCTAVE: f64 = 8.0;

fn within(what: &str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::InvalidArgument(format!("{what} must lie in [{lo}, {hi}], got {value}")));
    }
    Ok(())
}

#[wasm_bindgen]
pub struct CellView {
    n: usize,
    a0: [f64; 3],
    asymmetry: f64,
    chi: [Vec<f64>; 2],
}

#[wasm_bindgen]
impl CellView {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn a11(&self) -> f64 {
        self.a0[0]
    }

    #[wasm_bindgen(getter)]
    pub fn a12(&self) -> f64 {
        self.a0[1]
    }

    #[wasm_bindgen(getter)]
    pub fn a22(&self) -> f64 {
        self.a0[2]
    }

    #[wasm_bindgen(getter)]
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Corrector `χʲ` (`j` = 1 or 2), row-major `n × n`.
    pub fn chi(&self, j: usize) -> Vec<f64> {
        self.chi.get(j.wrapping_sub(1)).cloned().unwrap_or_default()
    }
}

pub fn cell_view(material: &str, n: usize) -> Result<CellView> {
    within("cell grid", n, 4, MAX_CELL_GRID)?;
    let spec: MaterialSpec = material.parse()?;
    let grid = Grid2D::unit_cell(n)?;
    let sol = solve_cell_problem(&sample_matrix_field(spec.build().as_ref(), &grid, None)?, CELL_TOL)?;
    let [c1, c2] = sol.chi;
    Ok(CellView { n, a0: [sol.a0.a11, sol.a0.a12, sol.a0.a22], asymmetry: sol.asymmetry, chi: [c1.values, c2.values] })
}

#[wasm_bindgen]
pub struct GlView {
    n: usize,
    energy: f64,
    iterations: usize,
    grad_residual: f64,
    modulus: Vec<f64>,
    phase: Vec<f64>,
    vortices: Vec<f64>,
}

#[wasm_bindgen]
impl GlView {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter, js_name = gradResidual)]
    pub fn grad_residual(&self) -> f64 {
        self.grad_residual
    }

    /// `|u|`, row-major `n × n`.
    pub fn modulus(&self) -> Vec<f64> {
        self.modulus.clone()
    }

    /// `arg u` in `(-π, π]`.
    pub fn phase(&self) -> Vec<f64> {
        self.phase.clone()
    }

    /// Flat `[x, y, degree, ...]` triples.
    pub fn vortices(&self) -> Vec<f64> {
        self.vortices.clone()
    }
}

pub fn gl_view(material: &str, n: usize, epsilon: f64, delta: f64, degree: u32, max_iter: usize) -> Result<GlView> {
    within("domain grid", n, 17, MAX_DOMAIN_GRID)?;
    let spec: MaterialSpec = material.parse()?;
    let p = GlProblem::from_material(spec.build().as_ref(), n, epsilon, delta, degree)?;
    let r = minimize(&p, None, Schedule { max_iter, ..Schedule::default() }, 1e-8)?;
    let set = detect_bad_disks(&r.u, epsilon, BAD_SET_THRESHOLD)?;
    let vortices = set.vortices.iter().flat_map(|v| [v.center[0], v.center[1], v.degree as f64]).collect();
    Ok(GlView {
        n,
        energy: r.energy,
        iterations: r.iterations,
        grad_residual: r.grad_residual,
        modulus: r.u.modulus(),
        phase: r.u.values.iter().map(|z| z.arg()).collect(),
        vortices,
    })
}

/// Flat `[κ, μ, lower, upper, ...]` rows for `κ = 1..=kappa_max`.
pub fn mu_rows(material: &str, alpha: f64, beta: f64, kappa_max: i32) -> Result<Vec<f64>> {
    if !(1..=MAX_KAPPA).contains(&kappa_max) {
        return Err(Error::InvalidArgument(format!("kappa_max must lie in [1, {MAX_KAPPA}], got {kappa_max}")));
    }
    let spec: MaterialSpec = material.parse()?;
    if !(alpha > 0.0 && beta > alpha && beta / alpha <= 1024.0) {
        return Err(Error::InvalidArgument(format!("need 0 < alpha < beta <= 1024 alpha, got ({alpha}, {beta})")));
    }
    let steps = (MU_PER_OCTAVE * (beta / alpha).log2()).round().max(2.0) as usize;
    let grid = PolarGrid::new(steps + 1, MU_NTHETA, alpha, beta)?;
    let b = sample_polar(spec.build().as_ref(), &grid)?;
    let mut out = Vec::with_capacity(4 * kappa_max as usize);
    for kappa in 1..=kappa_max {
        let r = compute_mu(&b, kappa, MU_TOL)?;
        out.extend([kappa as f64, r.mu, r.bounds.0, r.bounds.1]);
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = solveCell)]
pub fn solve_cell(material: &str, n: usize) -> std::result::Result<CellView, JsError> {
    cell_view(material, n).map_err(js)
}

#[wasm_bindgen(js_name = minimizeGl)]
pub fn minimize_gl(material: &str, n: usize, epsilon: f64, delta: f64, degree: u32, max_iter: usize) -> std::result::Result<GlView, JsError> {
    gl_view(material, n, epsilon, delta, degree, max_iter).map_err(js)
}

#[wasm_bindgen(js_name = muCurve)]
pub fn mu_curve(material: &str, alpha: f64, beta: f64, kappa_max: i32) -> std::result::Result<Vec<f64>, JsError> {
    mu_rows(material, alpha, beta, kappa_max).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laminate_cell_has_harmonic_and_arithmetic_means() {
        let v = cell_view("laminate:2,1", 32).unwrap();
        let sqrt3 = 3f64.sqrt();
        let (lo, hi) = (v.a11().min(v.a22()), v.a11().max(v.a22()));
        assert!((lo - sqrt3).abs() < 1e-2 && (hi - 2.0).abs() < 1e-2, "{lo} {hi}");
        assert_eq!(v.chi(1).len(), 32 * 32);
        assert!(v.chi(0).is_empty() && v.chi(3).is_empty());
    }

    #[test]
    fn small_minimization_finds_one_vortex() {
        let v = gl_view("identity", 65, 0.15, 0.5, 1, 5000).unwrap();
        assert_eq!(v.modulus().len(), 65 * 65);
        assert!(v.modulus().iter().all(|&m| m <= 1.0 + 1e-12));
        let vort = v.vortices();
        assert_eq!(vort.len(), 3);
        assert_eq!(vort[2], 1.0);
    }

    #[test]
    fn mu_scales_with_kappa_squared() {
        let rows = mu_rows("laminate:2,1", 0.5, 2.0, 3).unwrap();
        assert_eq!(rows.len(), 12);
        let mu1 = rows[1];
        for r in rows.chunks_exact(4) {
            let k = r[0];
            assert!((r[1] / mu1 - k * k).abs() < 1e-6 * k * k);
            assert!(r[2] <= r[1] && r[1] <= r[3]);
        }
    }

    #[test]
    fn oversized_requests_are_rejected() {
        assert!(cell_view("identity", MAX_CELL_GRID + 1).is_err());
        assert!(gl_view("identity", 1025, 0.1, 0.5, 1, 10).is_err());
        assert!(mu_rows("identity", 0.5, 2.0, 0).is_err());
        assert!(mu_rows("nonsense", 0.5, 2.0, 1).is_err());
    }
}
