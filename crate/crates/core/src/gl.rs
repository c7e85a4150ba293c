//! Discrete Ginzburg-Landau energy with oscillating coefficients, its
//! minimizer, and the energy diagnostics built on it.
//!
//! ```text
//! E(u) = ½ Σ_corners w g_c·A g_c  +  (1/4ε²) Σ_nodes w_k (1 - |u_k|²)²
//! ```
//!
//! applied to the real and imaginary parts of `u`. Boundary nodes hold the
//! Dirichlet data and are never updated.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::boundary::{make_boundary_degree_d, BoundaryData};
use crate::dst::ShiftedLaplacian;
use crate::elliptic::DivAGradOperator;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid2D;
use crate::material::{sample_matrix_field, Material, MatrixField};

/// Minimum number of grid spacings per vortex core: `ε ≥ MIN_CORE_NODES·h`.
pub const MIN_CORE_NODES: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct GlProblem {
    a: MatrixField,
    epsilon: f64,
    delta: f64,
    boundary: BoundaryData,
    op: DivAGradOperator,
    weights: Vec<f64>,
}

impl GlProblem {
    pub fn new(a: MatrixField, epsilon: f64, delta: f64, boundary: BoundaryData) -> Result<Self> {
        if !(epsilon > 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon and delta must be positive, got {epsilon}, {delta}")));
        }
        let floor = MIN_CORE_NODES * a.grid.h;
        if epsilon < floor * (1.0 - 1e-12) {
            return Err(Error::UnderResolved { epsilon, h: a.grid.h, floor });
        }
        if a.grid.periodic != [false, false] {
            return Err(Error::InvalidGrid("the energy is posed on a non-periodic domain".into()));
        }
        if boundary.nodes.iter().any(|&k| k >= a.grid.len()) || boundary.nodes.len() != 2 * (a.grid.nx + a.grid.ny) - 4 {
            return Err(Error::GridMismatch("boundary data does not match the grid".into()));
        }
        let op = DivAGradOperator::from_field(&a)?;
        let weights = a.grid.weights();
        Ok(GlProblem { a, epsilon, delta, boundary, op, weights })
    }

    /// Samples `A(x/δ)` on the square domain with degree-`d` data centred at the origin.
    pub fn from_material(material: &dyn Material, n: usize, epsilon: f64, delta: f64, degree: u32) -> Result<Self> {
        let grid = Grid2D::square_domain(n)?;
        let a = sample_matrix_field(material, &grid, Some(delta))?;
        let g = make_boundary_degree_d(&grid, degree, [0.0, 0.0])?;
        GlProblem::new(a, epsilon, delta, g)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.a.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn matrix_field(&self) -> &MatrixField {
        &self.a
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn operator(&self) -> &DivAGradOperator {
        &self.op
    }

    /// Energy, `kx = K x` at every node, and the raw gradient `∂E/∂(re, im)` (zero at boundary nodes).
    fn eval(&self, u: &[[f64; 2]], kx: &mut [[f64; 2]], grad: &mut [[f64; 2]]) -> EnergyParts {
        let dirichlet = self.op.stiffness(u, kx);
        let inv_eps2 = 1.0 / (self.epsilon * self.epsilon);
        let mut pot = 0.0;
        for k in 0..u.len() {
            let z = u[k];
            let s = 1.0 - z[0] * z[0] - z[1] * z[1];
            let w = self.weights[k];
            pot += w * s * s;
            grad[k] = if self.op.fixed()[k] {
                [0.0; 2]
            } else {
                [kx[k][0] - w * inv_eps2 * s * z[0], kx[k][1] - w * inv_eps2 * s * z[1]]
            };
        }
        let potential = 0.25 * inv_eps2 * pot;
        EnergyParts { total: dirichlet + potential, dirichlet, potential }
    }

    fn eval_iterate(&self, it: &mut Iterate) -> EnergyParts {
        self.eval(&it.x, &mut it.kx, &mut it.grad)
    }

    /// `E(b) - E(a)` summed from local increments, accurate where the totals would cancel.
    fn energy_increment(&self, a: &Iterate, b: &Iterate) -> f64 {
        let (mut dir, mut pot) = (0.0, 0.0);
        for k in 0..a.x.len() {
            let (xa, xb) = (a.x[k], b.x[k]);
            let d = [xb[0] - xa[0], xb[1] - xa[1]];
            if d == [0.0; 2] {
                continue;
            }
            // D(b) - D(a) = ½ (b - a)·K(a + b)
            dir += 0.5 * (d[0] * (a.kx[k][0] + b.kx[k][0]) + d[1] * (a.kx[k][1] + b.kx[k][1]));
            let sa = 1.0 - xa[0] * xa[0] - xa[1] * xa[1];
            let sb = 1.0 - xb[0] * xb[0] - xb[1] * xb[1];
            let ds = -(d[0] * (xa[0] + xb[0]) + d[1] * (xa[1] + xb[1]));
            pot += self.weights[k] * ds * (sa + sb);
        }
        dir + 0.25 * pot / (self.epsilon * self.epsilon)
    }

    fn check(&self, u: &ComplexField) -> Result<()> {
        self.grid().check_same(&u.grid, "order parameter")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub total: f64,
    pub dirichlet: f64,
    pub potential: f64,
}

fn pairs(u: &ComplexField) -> Vec<[f64; 2]> {
    u.values.iter().map(|z| [z.re, z.im]).collect()
}

pub fn energy(p: &GlProblem, u: &ComplexField) -> Result<EnergyParts> {
    p.check(u)?;
    let x = pairs(u);
    let (mut kx, mut g) = (vec![[0.0; 2]; x.len()], vec![[0.0; 2]; x.len()]);
    Ok(p.eval(&x, &mut kx, &mut g))
}

/// `∂E/∂u` per node (real and imaginary parts), zero at boundary nodes.
pub fn energy_gradient(p: &GlProblem, u: &ComplexField) -> Result<Vec<Complex64>> {
    p.check(u)?;
    let x = pairs(u);
    let (mut kx, mut g) = (vec![[0.0; 2]; x.len()], vec![[0.0; 2]; x.len()]);
    p.eval(&x, &mut kx, &mut g);
    Ok(g.iter().map(|v| Complex64::new(v[0], v[1])).collect())
}

/// Sup over interior nodes of `|-div(A∇u) - (1/ε²)u(1 - |u|²)|`.
pub fn el_residual(p: &GlProblem, u: &ComplexField) -> Result<f64> {
    let g = energy_gradient(p, u)?;
    Ok(g.iter().zip(p.op.volumes()).zip(p.op.fixed()).filter(|(_, &f)| !f).map(|((g, v), _)| g.norm() / v).fold(0.0, f64::max))
}

/// Sup-norm of the gradient with the outward radial part removed where `|u| = 1`.
fn projected_residual(u: &[[f64; 2]], grad: &[[f64; 2]]) -> f64 {
    u.iter().zip(grad).map(|(z, g)| {
        let r2 = z[0] * z[0] + z[1] * z[1];
        let radial = g[0] * z[0] + g[1] * z[1];
        if r2 >= 1.0 - 1e-12 && radial < 0.0 {
            let t = radial / r2;
            ((g[0] - t * z[0]).powi(2) + (g[1] - t * z[1]).powi(2)).sqrt()
        } else {
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        }
    }).fold(0.0, f64::max)
}

/// `(z/|z|)^d` around the boundary data's centre, with modulus `min(1, r/core)^d`.
pub fn canonical_seed(grid: &Grid2D, g: &BoundaryData, core: f64) -> Result<ComplexField> {
    let (c, d) = (g.center, g.degree);
    ComplexField::with_boundary(*grid, g, |x| {
        let z = Complex64::new(x[0] - c[0], x[1] - c[1]);
        let r = z.norm();
        if d == 0 {
            Complex64::new(1.0, 0.0)
        } else if r == 0.0 {
            Complex64::default()
        } else {
            (z / r).powu(d) * (r / core).min(1.0).powi(d as i32)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub max_iter: usize,
    /// Backtracking gives up below this step (relative to the metric's natural step 1).
    pub min_step: f64,
    /// Measure steps in a fast Poisson metric instead of the lumped mass metric.
    pub precondition: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { max_iter: 20_000, min_step: 1e-14, precondition: true }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub u: ComplexField,
    pub energy: f64,
    pub dirichlet_part: f64,
    pub potential_part: f64,
    /// Strong-form Euler-Lagrange residual, see [`el_residual`].
    pub el_residual: f64,
    /// Projected sup-norm of the raw energy gradient at termination.
    pub grad_residual: f64,
    pub iterations: usize,
    /// Energy after every accepted step, starting with the seed (accumulated from exact increments).
    pub history: Vec<f64>,
}

enum Metric {
    /// `P = diag(vol)·(8M/h² + 2/ε²)`.
    Lumped(Vec<f64>),
    /// `P = c·K₅ + (h²/ε²)·I` on the interior, inverted by sine transforms.
    Poisson { solver: ShiftedLaplacian, interior: Vec<usize> },
}

impl Metric {
    fn new(p: &GlProblem, precondition: bool) -> Metric {
        let grid = p.grid();
        let h2 = grid.h * grid.h;
        let eps2 = p.epsilon * p.epsilon;
        if precondition {
            let scale = p.a.entries.iter().map(|a| 0.5 * a.trace()).sum::<f64>() / grid.len() as f64;
            let interior = (1..grid.ny - 1).flat_map(|j| (1..grid.nx - 1).map(move |i| j * grid.nx + i)).collect();
            Metric::Poisson { solver: ShiftedLaplacian::new(grid.nx - 2, grid.ny - 2, scale, h2 / eps2), interior }
        } else {
            let stiff = 8.0 * p.a.big_m / h2 + 2.0 / eps2;
            Metric::Lumped(p.op.volumes().iter().map(|v| v * stiff).collect())
        }
    }

    /// Writes `P⁻¹ g` into `out`; fixed nodes get zero.
    fn direction(&self, g: &[[f64; 2]], out: &mut [[f64; 2]]) {
        match self {
            Metric::Lumped(diag) => {
                for ((o, g), d) in out.iter_mut().zip(g).zip(diag) {
                    *o = [g[0] / d, g[1] / d];
                }
            }
            Metric::Poisson { solver, interior } => {
                let mut buf: Vec<Complex64> = interior.iter().map(|&k| Complex64::new(g[k][0], g[k][1])).collect();
                solver.solve(&mut buf);
                out.fill([0.0; 2]);
                for (&k, z) in interior.iter().zip(&buf) {
                    out[k] = [z.re, z.im];
                }
            }
        }
    }

    fn norm_sq(&self, d: &[[f64; 2]]) -> f64 {
        match self {
            Metric::Lumped(diag) => d.iter().zip(diag).map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1])).sum(),
            Metric::Poisson { solver, interior } => {
                let x: Vec<Complex64> = interior.iter().map(|&k| Complex64::new(d[k][0], d[k][1])).collect();
                let mut px = vec![Complex64::default(); x.len()];
                solver.apply(&x, &mut px);
                x.iter().zip(&px).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
            }
        }
    }
}

fn dot(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1]).sum()
}

fn to_field(p: &GlProblem, x: &[[f64; 2]]) -> ComplexField {
    let values = x.iter().map(|v| Complex64::new(v[0], v[1])).collect();
    ComplexField { grid: *p.grid(), values, boundary_mask: p.op.fixed().to_vec() }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<[f64; 2]>,
    kx: Vec<[f64; 2]>,
    grad: Vec<[f64; 2]>,
}

impl Iterate {
    fn new(x: Vec<[f64; 2]>) -> Self {
        let n = x.len();
        Iterate { x, kx: vec![[0.0; 2]; n], grad: vec![[0.0; 2]; n] }
    }
}

/// Accelerated projected gradient descent with backtracking.
///
/// Iterates are clipped to `|u| ≤ 1` at every node; a step is accepted only if
/// it lowers the energy, otherwise the momentum is reset. Stops when the
/// projected sup-norm of `∂E/∂u` drops to `tol_grad`.
pub fn minimize(p: &GlProblem, seed: Option<&ComplexField>, schedule: Schedule, tol_grad: f64) -> Result<MinimizeResult> {
    if !(tol_grad > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_grad must be positive, got {tol_grad}")));
    }
    let mut start = match seed {
        Some(s) => {
            p.check(s)?;
            s.clone()
        }
        None => canonical_seed(p.grid(), &p.boundary, p.epsilon)?,
    };
    p.boundary.impose(&mut start)?;
    let fixed = p.op.fixed();
    let n = start.values.len();
    let project = |z: &mut [f64; 2]| {
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        if r > 1.0 {
            z[0] /= r;
            z[1] /= r;
        }
    };
    let mut x0 = pairs(&start);
    for (z, &f) in x0.iter_mut().zip(fixed) {
        if !f {
            project(z);
        }
    }
    let metric = Metric::new(p, schedule.precondition);

    let mut x = Iterate::new(x0);
    // energies are tracked through exact increments so descent stays
    // detectable below the round-off of the totals
    let mut energy_acc = p.eval_iterate(&mut x).total;
    let mut history = vec![energy_acc];
    let mut prev = x.clone();
    let mut y = x.clone();
    let mut trial = x.clone();
    let mut y_above_x = 0.0;
    let mut dir = vec![[0.0; 2]; n];
    let mut step_vec = vec![[0.0; 2]; n];
    let mut theta = 1.0_f64;
    let mut restarted = true;
    let mut s = 1.0_f64;
    let mut iterations = 0;

    loop {
        let residual = projected_residual(&x.x, &x.grad);
        if residual <= tol_grad {
            let u = to_field(p, &x.x);
            let parts = energy(p, &u)?;
            return Ok(MinimizeResult {
                el_residual: el_residual(p, &u)?,
                u,
                energy: parts.total,
                dirichlet_part: parts.dirichlet,
                potential_part: parts.potential,
                grad_residual: residual,
                iterations,
                history,
            });
        }
        if iterations >= schedule.max_iter {
            return Err(Error::MaxIterations { iterations, residual, last: Box::new(to_field(p, &x.x)) });
        }
        iterations += 1;

        metric.direction(&y.grad, &mut dir);
        let rise = loop {
            for k in 0..n {
                let yk = y.x[k];
                let mut z = yk;
                if !fixed[k] {
                    z = [yk[0] - s * dir[k][0], yk[1] - s * dir[k][1]];
                    project(&mut z);
                }
                trial.x[k] = z;
                step_vec[k] = [z[0] - yk[0], z[1] - yk[1]];
            }
            p.eval_iterate(&mut trial);
            let rise = p.energy_increment(&y, &trial);
            let model = dot(&y.grad, &step_vec) + metric.norm_sq(&step_vec) / (2.0 * s);
            if rise <= model && (!restarted || rise <= 0.0) {
                break rise;
            }
            s *= 0.5;
            if s < schedule.min_step {
                return Err(Error::StepCollapse { iterations, residual, last: Box::new(to_field(p, &x.x)) });
            }
        };

        let change = y_above_x + rise;
        if change > 0.0 {
            y.clone_from(&x);
            y_above_x = 0.0;
            theta = 1.0;
            restarted = true;
            continue;
        }

        std::mem::swap(&mut prev, &mut x);
        std::mem::swap(&mut x, &mut trial);
        energy_acc += change;
        history.push(energy_acc);

        // gradient-based restart: the step opposes the momentum direction
        let mut opposing = 0.0;
        for k in 0..n {
            opposing += (y.x[k][0] - x.x[k][0]) * (x.x[k][0] - prev.x[k][0]) + (y.x[k][1] - x.x[k][1]) * (x.x[k][1] - prev.x[k][1]);
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        if opposing > 0.0 || beta == 0.0 {
            theta = 1.0;
            restarted = true;
            y.clone_from(&x);
            y_above_x = 0.0;
        } else {
            theta = theta_next;
            restarted = false;
            for k in 0..n {
                y.x[k] = [x.x[k][0] + beta * (x.x[k][0] - prev.x[k][0]), x.x[k][1] + beta * (x.x[k][1] - prev.x[k][1])];
            }
            p.eval_iterate(&mut y);
            y_above_x = p.energy_increment(&x, &y);
        }
        s = (s * 1.25).min(4.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub slope: f64,
    pub intercept: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Least-squares slope of `E` against `log(1/ε)`, checked against
/// `[mπd(1-θ), Mπd(1+θ)]`.
pub fn energy_bound_check(samples: &[(f64, f64)], h: f64, m: f64, big_m: f64, degree: u32, theta: f64) -> Result<SlopeReport> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 epsilon values, got {}", samples.len())));
    }
    let floor = MIN_CORE_NODES * h;
    if let Some(&(epsilon, _)) = samples.iter().find(|(e, _)| *e < floor * (1.0 - 1e-12)) {
        return Err(Error::UnderResolved { epsilon, h, floor });
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, samples.iter().map(|s| s.1).sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("epsilon values must be distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(samples).map(|(x, s)| (x - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    let d = degree as f64;
    let (lower, upper) = (m * PI * d * (1.0 - theta), big_m * PI * d * (1.0 + theta));
    let pass = slope >= lower - 1e-9 && slope <= upper + 1e-9;
    Ok(SlopeReport { slope, intercept: my - slope * mx, lower, upper, pass })
}

#[derive(Debug, Clone)]
pub struct EpsilonChoice {
    pub delta: f64,
    pub epsilon: f64,
    /// `(1/ε²)∫(1 - |u|²)²` for the accepted candidate.
    pub potential_measure: f64,
    /// Candidates dropped before solving for violating `ε < δ²/n` or the resolution floor.
    pub rejected: Vec<f64>,
    pub result: MinimizeResult,
}

/// For each `δ_n` (n = 1, 2, ...), the largest admissible candidate whose
/// minimizer satisfies `(1/ε²)∫(1 - |u|²)² ≤ 4Mπd`.
pub fn select_epsilon(
    material: &dyn Material,
    grid_n: usize,
    degree: u32,
    deltas: &[f64],
    candidates: &[Vec<f64>],
    schedule: Schedule,
    tol_grad: f64,
) -> Result<Vec<EpsilonChoice>> {
    if candidates.len() != deltas.len() {
        return Err(Error::InvalidArgument(format!("{} candidate lists for {} deltas", candidates.len(), deltas.len())));
    }
    let mut out = Vec::with_capacity(deltas.len());
    for (idx, (&delta, cands)) in deltas.iter().zip(candidates).enumerate() {
        out.push(select_epsilon_at(material, grid_n, degree, delta, idx + 1, cands, schedule, tol_grad)?);
    }
    Ok(out)
}

/// The selection of [`select_epsilon`] for the single index `n`.
#[allow(clippy::too_many_arguments)]
pub fn select_epsilon_at(
    material: &dyn Material,
    grid_n: usize,
    degree: u32,
    delta: f64,
    n: usize,
    candidates: &[f64],
    schedule: Schedule,
    tol_grad: f64,
) -> Result<EpsilonChoice> {
    let grid = Grid2D::square_domain(grid_n)?;
    let bound = 4.0 * material.bounds().1 * PI * degree as f64;
    let (admissible, rejected) = admissible_candidates(candidates, delta, n, grid.h);
    let mut measured = Vec::new();
    for eps in admissible {
        let p = GlProblem::from_material(material, grid_n, eps, delta, degree)?;
        let r = minimize(&p, None, schedule, tol_grad)?;
        let potential_measure = 4.0 * r.potential_part;
        measured.push((eps, potential_measure));
        if potential_measure <= bound + 1e-12 {
            return Ok(EpsilonChoice { delta, epsilon: eps, potential_measure, rejected, result: r });
        }
    }
    Err(Error::NoEpsilonCandidate { bound, measured })
}

/// Splits candidates into admissible ones (descending) and rejected ones:
/// admissible means `ε < δ²/n` and `ε ≥ MIN_CORE_NODES·h`.
pub fn admissible_candidates(cands: &[f64], delta: f64, n: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let ceiling = delta * delta / n as f64;
    let floor = MIN_CORE_NODES * h * (1.0 - 1e-12);
    let (mut ok, bad): (Vec<f64>, Vec<f64>) = cands.iter().partition(|&&e| e < ceiling && e >= floor);
    ok.sort_by(|a, b| b.total_cmp(a));
    (ok, bad)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::material::{Constant, Laminate, Sym2};

    fn problem(n: usize, eps: f64, d: u32, material: &dyn Material) -> GlProblem {
        GlProblem::from_material(material, n, eps, 0.25, d).unwrap()
    }

    #[test]
    fn degree_zero_minimizer_is_one() {
        let p = problem(33, 0.2, 0, &Laminate { mean: 2.0, amp: 1.0 });
        let r = minimize(&p, None, Schedule::default(), 1e-10).unwrap();
        assert_eq!(r.energy, 0.0);
        assert!(r.u.values.iter().all(|z| (z - 1.0).norm() < 1e-12));
    }

    #[test]
    fn energy_parts_add_up_and_match_hand_quadrature() {
        // u = x₁ on a 3x3 grid over [-1, 1]², A = Id: corner gradients all (1, 0)
        let p = problem(3, 3.0, 0, &Constant(Sym2::identity()));
        let u = ComplexField::from_fn(*p.grid(), |x| Complex64::new(x[0], 0.0));
        let e = energy(&p, &u).unwrap();
        // ½·|∇u|²·area = 2; potential: Σ w (1 - x²)² = corners 0, edge mids (w=.5) and centre (w=1)
        let pot = (0.5 * 1.0 + 0.5 * 1.0 + 1.0 * 1.0) / (4.0 * 9.0);
        assert!((e.dirichlet - 2.0).abs() < 1e-14);
        assert!((e.potential - pot).abs() < 1e-14);
        assert_eq!(e.total, e.dirichlet + e.potential);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mat = Laminate { mean: 2.0, amp: 1.0 };
        let p = problem(17, 0.4, 1, &mat);
        let u = canonical_seed(p.grid(), p.boundary(), 0.3).unwrap();
        let g = energy_gradient(&p, &u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let dir: Vec<Complex64> = (0..u.values.len())
                .map(|k| if u.boundary_mask[k] { Complex64::default() } else { Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) })
                .collect();
            let t = 1e-5;
            let shifted = |s: f64| {
                let mut v = u.clone();
                v.values.iter_mut().zip(&dir).for_each(|(z, d)| *z += s * d);
                energy(&p, &v).unwrap().total
            };
            let fd = (shifted(t) - shifted(-t)) / (2.0 * t);
            let exact: f64 = g.iter().zip(&dir).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
            assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} {exact}");
        }
    }

    #[test]
    fn single_vortex_descent_is_monotone_and_bounded() {
        for precondition in [true, false] {
            let p = problem(33, 0.2, 1, &Constant(Sym2::identity()));
            let schedule = Schedule { max_iter: 50_000, precondition, ..Schedule::default() };
            let r = minimize(&p, None, schedule, 1e-8).unwrap();
            assert!(r.u.max_modulus() <= 1.0 + 1e-8);
            assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.energy <= r.history[0]);
            let vol = p.grid().h * p.grid().h;
            assert!(r.el_residual <= 1e-8 / vol * 1.0001);
            assert!((r.energy - r.dirichlet_part - r.potential_part).abs() < 1e-12);
        }
    }

    #[test]
    fn preconditioning_changes_speed_not_answer() {
        let p = problem(33, 0.2, 1, &Laminate { mean: 2.0, amp: 1.0 });
        let a = minimize(&p, None, Schedule { max_iter: 100_000, precondition: false, ..Schedule::default() }, 1e-9).unwrap();
        let b = minimize(&p, None, Schedule::default(), 1e-9).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-6 * a.energy);
        assert!(b.iterations < a.iterations);
    }

    #[test]
    fn iteration_cap_returns_last_iterate() {
        let p = problem(33, 0.2, 1, &Constant(Sym2::identity()));
        match minimize(&p, None, Schedule { max_iter: 2, ..Schedule::default() }, 1e-14) {
            Err(Error::MaxIterations { iterations, last, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last.values.len(), p.grid().len());
            }
            other => panic!("{:?}", other.map(|r| r.iterations)),
        }
    }

    #[test]
    fn under_resolved_epsilon_rejected() {
        let grid = Grid2D::square_domain(33).unwrap();
        let a = MatrixField::constant(grid, Sym2::identity()).unwrap();
        let g = make_boundary_degree_d(&grid, 1, [0.0, 0.0]).unwrap();
        assert!(matches!(GlProblem::new(a, 0.1, 1.0, g), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn slope_fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, PI * (1.0 / e).ln() + 2.0)).collect();
        let r = energy_bound_check(&pts, 0.001, 1.0, 1.0, 1, 0.15).unwrap();
        assert!((r.slope - PI).abs() < 1e-12 && (r.intercept - 2.0).abs() < 1e-12 && r.pass);
        assert!(energy_bound_check(&pts[..2], 0.001, 1.0, 1.0, 1, 0.15).is_err());
        assert!(matches!(energy_bound_check(&pts, 0.01, 1.0, 1.0, 1, 0.15), Err(Error::UnderResolved { .. })));
        let flat: Vec<(f64, f64)> = pts.iter().map(|&(e, _)| (e, 0.0)).collect();
        assert!(energy_bound_check(&flat, 0.001, 1.0, 1.0, 0, 0.15).unwrap().pass);
    }

    #[test]
    fn candidates_filtered_before_solving() {
        let (ok, bad) = admissible_candidates(&[0.02, 0.05, 0.07, 0.001], 0.25, 1, 0.004);
        assert_eq!(ok, vec![0.05, 0.02]);
        assert_eq!(bad, vec![0.07, 0.001]);
    }

    #[test]
    fn degree_zero_selection_takes_first_candidate() {
        let c = select_epsilon(&Constant(Sym2::identity()), 33, 0, &[0.5], &[vec![0.1, 0.2]], Schedule::default(), 1e-10).unwrap();
        assert_eq!(c[0].epsilon, 0.2);
        assert_eq!(c[0].potential_measure, 0.0);
    }
}
