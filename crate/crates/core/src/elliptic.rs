//! Conservative discretization of `div(A ∇f)` and a conjugate-gradient solver.
//!
//! The discrete Dirichlet form is a sum over cells of four corner terms. Each
//! corner uses the two cell edges meeting at that node as its gradient and the
//! node's own matrix:
//!
//! ```text
//! D(f) = Σ_cells Σ_corners (hx·hy/4) · ½ g_c(f)·A_node g_c(f)
//! ```
//!
//! For diagonal `A` this is the 5-point stencil with edge coefficients equal
//! to the arithmetic mean of the two end nodes; the off-diagonal entries give
//! a symmetric 9-point stencil. The operator is defined as
//! `L f = -(1/vol) ∂D/∂f`, so the energy and its Euler-Lagrange operator are
//! exact transposes of each other.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::material::{MatrixField, Sym2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Periodic on both axes.
    Periodic,
    /// Non-periodic on both axes; boundary nodes are fixed.
    Dirichlet,
    /// Natural (Neumann) along x, periodic along y.
    NeumannPeriodic,
}

impl BoundaryKind {
    fn periodic(self) -> [bool; 2] {
        match self {
            BoundaryKind::Periodic => [true, true],
            BoundaryKind::Dirichlet => [false, false],
            BoundaryKind::NeumannPeriodic => [false, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    ZeroMean,
}

#[derive(Debug, Clone)]
pub struct DivAGradOperator {
    lattice: Lattice,
    coeffs: Vec<Sym2>,
    bc: BoundaryKind,
    volumes: Vec<f64>,
    fixed: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `‖L f - rhs‖₂ / ‖rhs‖₂` over the free nodes.
    pub residual: f64,
}

impl DivAGradOperator {
    pub fn new(lattice: Lattice, coeffs: Vec<Sym2>, bc: BoundaryKind) -> Result<Self> {
        if lattice.periodic != bc.periodic() {
            return Err(Error::GridMismatch(format!("{bc:?} needs periodicity {:?}, lattice has {:?}", bc.periodic(), lattice.periodic)));
        }
        if lattice.nx < 3 || lattice.ny < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {}x{}", lattice.nx, lattice.ny)));
        }
        if coeffs.len() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), found: coeffs.len() });
        }
        let volumes = lattice.volumes();
        let fixed = (0..lattice.len())
            .map(|k| {
                let (i, j) = (k % lattice.nx, k / lattice.nx);
                bc == BoundaryKind::Dirichlet && (i == 0 || j == 0 || i == lattice.nx - 1 || j == lattice.ny - 1)
            })
            .collect();
        Ok(DivAGradOperator { lattice, coeffs, bc, volumes, fixed })
    }

    /// Operator for a sampled field; the boundary kind follows the grid's periodicity.
    pub fn from_field(a: &MatrixField) -> Result<Self> {
        let bc = match a.grid.periodic {
            [true, true] => BoundaryKind::Periodic,
            [false, false] => BoundaryKind::Dirichlet,
            [false, true] => BoundaryKind::NeumannPeriodic,
            p => return Err(Error::InvalidGrid(format!("unsupported periodicity {p:?}"))),
        };
        DivAGradOperator::new(a.grid.lattice(), a.entries.clone(), bc)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Sym2] {
        &self.coeffs
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        self.bc
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Writes `K f = ∂D/∂f` into `out` (every node, fixed ones included) and returns `D(f)`.
    pub fn stiffness<const N: usize>(&self, f: &[[f64; N]], out: &mut [[f64; N]]) -> f64 {
        let lat = &self.lattice;
        let (nx, ny) = (lat.nx, lat.ny);
        let w = 0.25 * lat.hx * lat.hy;
        let (ihx, ihy) = (1.0 / lat.hx, 1.0 / lat.hy);
        let (wx, wy) = (w * ihx, w * ihy);
        let a = &self.coeffs;
        out.fill([0.0; N]);
        let mut energy = 0.0;
        for j in 0..lat.cells_y() {
            let j1 = if j + 1 == ny { 0 } else { j + 1 };
            let (r0, r1) = (j * nx, j1 * nx);
            for i in 0..lat.cells_x() {
                let i1 = if i + 1 == nx { 0 } else { i + 1 };
                let (ka, kb, kc, kd) = (r0 + i, r0 + i1, r1 + i, r1 + i1);
                let (ma, mb, mc, md) = (a[ka], a[kb], a[kc], a[kd]);
                let (fa, fb, fc, fd) = (f[ka], f[kb], f[kc], f[kd]);
                let mut da = [0.0; N];
                let mut db = [0.0; N];
                let mut dc = [0.0; N];
                let mut dd = [0.0; N];
                for k in 0..N {
                    let dxb = (fb[k] - fa[k]) * ihx;
                    let dxt = (fd[k] - fc[k]) * ihx;
                    let dyl = (fc[k] - fa[k]) * ihy;
                    let dyr = (fd[k] - fb[k]) * ihy;
                    let qa = ma.mul([dxb, dyl]);
                    let qb = mb.mul([dxb, dyr]);
                    let qc = mc.mul([dxt, dyl]);
                    let qd = md.mul([dxt, dyr]);
                    energy += qa[0] * dxb + qa[1] * dyl + qb[0] * dxb + qb[1] * dyr
                        + qc[0] * dxt + qc[1] * dyl + qd[0] * dxt + qd[1] * dyr;
                    let fxb = wx * (qa[0] + qb[0]);
                    let fxt = wx * (qc[0] + qd[0]);
                    let fyl = wy * (qa[1] + qc[1]);
                    let fyr = wy * (qb[1] + qd[1]);
                    da[k] = -fxb - fyl;
                    db[k] = fxb - fyr;
                    dc[k] = fyl - fxt;
                    dd[k] = fxt + fyr;
                }
                for k in 0..N {
                    out[ka][k] += da[k];
                    out[kb][k] += db[k];
                    out[kc][k] += dc[k];
                    out[kd][k] += dd[k];
                }
            }
        }
        0.5 * w * energy
    }

    /// `D(f)` for a scalar field.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let mut out = vec![0.0; f.len()];
        self.stiffness(as_vec1(f), as_vec1_mut(&mut out))
    }

    /// Corner energies accumulated at the node owning each corner.
    pub fn node_energies<const N: usize>(&self, f: &[[f64; N]]) -> Vec<f64> {
        let lat = &self.lattice;
        let (nx, ny) = (lat.nx, lat.ny);
        let half_w = 0.125 * lat.hx * lat.hy;
        let (ihx, ihy) = (1.0 / lat.hx, 1.0 / lat.hy);
        let mut out = vec![0.0; lat.len()];
        for j in 0..lat.cells_y() {
            let j1 = if j + 1 == ny { 0 } else { j + 1 };
            for i in 0..lat.cells_x() {
                let i1 = if i + 1 == nx { 0 } else { i + 1 };
                let (ka, kb, kc, kd) = (j * nx + i, j * nx + i1, j1 * nx + i, j1 * nx + i1);
                for k in 0..N {
                    let dxb = (f[kb][k] - f[ka][k]) * ihx;
                    let dxt = (f[kd][k] - f[kc][k]) * ihx;
                    let dyl = (f[kc][k] - f[ka][k]) * ihy;
                    let dyr = (f[kd][k] - f[kb][k]) * ihy;
                    out[ka] += half_w * self.coeffs[ka].quad([dxb, dyl]);
                    out[kb] += half_w * self.coeffs[kb].quad([dxb, dyr]);
                    out[kc] += half_w * self.coeffs[kc].quad([dxt, dyl]);
                    out[kd] += half_w * self.coeffs[kd].quad([dxt, dyr]);
                }
            }
        }
        out
    }

    /// `∂/∂f Σ_corners w (A e_j)·g_c(f)`: the discrete divergence of the column `A e_j`,
    /// up to the factor `-vol`.
    pub fn column_load(&self, column: usize) -> Vec<f64> {
        let lat = &self.lattice;
        let (nx, ny) = (lat.nx, lat.ny);
        let w = 0.25 * lat.hx * lat.hy;
        let (wx, wy) = (w / lat.hx, w / lat.hy);
        let col = |m: &Sym2| if column == 0 { [m.a11, m.a12] } else { [m.a12, m.a22] };
        let mut out = vec![0.0; lat.len()];
        for j in 0..lat.cells_y() {
            let j1 = if j + 1 == ny { 0 } else { j + 1 };
            for i in 0..lat.cells_x() {
                let i1 = if i + 1 == nx { 0 } else { i + 1 };
                let (ka, kb, kc, kd) = (j * nx + i, j * nx + i1, j1 * nx + i, j1 * nx + i1);
                let (qa, qb, qc, qd) = (col(&self.coeffs[ka]), col(&self.coeffs[kb]), col(&self.coeffs[kc]), col(&self.coeffs[kd]));
                let fxb = wx * (qa[0] + qb[0]);
                let fxt = wx * (qc[0] + qd[0]);
                let fyl = wy * (qa[1] + qc[1]);
                let fyr = wy * (qb[1] + qd[1]);
                out[ka] += -fxb - fyl;
                out[kb] += fxb - fyr;
                out[kc] += fyl - fxt;
                out[kd] += fxt + fyr;
            }
        }
        out
    }

    /// `Σ_corners w A_c g_c(f)`, the quadrature of `∫ A ∇f`.
    pub fn flux_integral(&self, f: &[f64]) -> [f64; 2] {
        let lat = &self.lattice;
        let (nx, ny) = (lat.nx, lat.ny);
        let w = 0.25 * lat.hx * lat.hy;
        let (ihx, ihy) = (1.0 / lat.hx, 1.0 / lat.hy);
        let mut acc = [0.0; 2];
        for j in 0..lat.cells_y() {
            let j1 = if j + 1 == ny { 0 } else { j + 1 };
            for i in 0..lat.cells_x() {
                let i1 = if i + 1 == nx { 0 } else { i + 1 };
                let (ka, kb, kc, kd) = (j * nx + i, j * nx + i1, j1 * nx + i, j1 * nx + i1);
                let dxb = (f[kb] - f[ka]) * ihx;
                let dxt = (f[kd] - f[kc]) * ihx;
                let dyl = (f[kc] - f[ka]) * ihy;
                let dyr = (f[kd] - f[kb]) * ihy;
                for (k, g) in [(ka, [dxb, dyl]), (kb, [dxb, dyr]), (kc, [dxt, dyl]), (kd, [dxt, dyr])] {
                    let q = self.coeffs[k].mul(g);
                    acc[0] += w * q[0];
                    acc[1] += w * q[1];
                }
            }
        }
        acc
    }

    /// `Σ_corners w A_c`, the quadrature of `∫ A`.
    pub fn coefficient_integral(&self) -> Sym2 {
        let mut s = Sym2::default();
        for (a, v) in self.coeffs.iter().zip(&self.volumes) {
            s.a11 += v * a.a11;
            s.a12 += v * a.a12;
            s.a22 += v * a.a22;
        }
        s
    }

    /// `L f` at free nodes; fixed (Dirichlet) nodes pass `f` through untouched.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        let mut out = vec![0.0; f.len()];
        self.stiffness(as_vec1(f), as_vec1_mut(&mut out));
        for k in 0..f.len() {
            out[k] = if self.fixed[k] { f[k] } else { -out[k] / self.volumes[k] };
        }
        Ok(out)
    }

    pub fn apply_complex(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(f.len())?;
        let pairs: Vec<[f64; 2]> = f.iter().map(|z| [z.re, z.im]).collect();
        let mut out = vec![[0.0; 2]; f.len()];
        self.stiffness(&pairs, &mut out);
        Ok((0..f.len())
            .map(|k| if self.fixed[k] { f[k] } else { Complex64::new(-out[k][0], -out[k][1]) / self.volumes[k] })
            .collect())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::GridMismatch(format!("field has {n} nodes, operator {}", self.len())));
        }
        Ok(())
    }

    /// Solves `L f = rhs` at the free nodes (`f = 0` on fixed nodes).
    pub fn solve_cg(&self, rhs: &[f64], constraint: Constraint, tol: f64, max_iter: usize) -> Result<CgSolution> {
        self.solve_cg_from(rhs, None, constraint, tol, max_iter)
    }

    /// As [`solve_cg`](Self::solve_cg) with an initial iterate.
    pub fn solve_cg_from(&self, rhs: &[f64], x0: Option<&[f64]>, constraint: Constraint, tol: f64, max_iter: usize) -> Result<CgSolution> {
        self.check_len(rhs.len())?;
        if let Some(x0) = x0 {
            self.check_len(x0.len())?;
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let n = self.len();
        let free: Vec<usize> = (0..n).filter(|&k| !self.fixed[k]).collect();
        let rhs_norm = free.iter().map(|&k| rhs[k] * rhs[k]).sum::<f64>().sqrt();
        if rhs_norm == 0.0 {
            return Ok(CgSolution { values: vec![0.0; n], iterations: 0, residual: 0.0 });
        }

        // K x = b with K = -vol·L on the free nodes
        let mut b = vec![0.0; n];
        for &k in &free {
            b[k] = -self.volumes[k] * rhs[k];
        }
        if constraint == Constraint::ZeroMean {
            let total: f64 = b.iter().sum();
            let scale: f64 = b.iter().map(|v| v.abs()).sum();
            if total.abs() > tol.max(1e-13) * scale {
                return Err(Error::IncompatibleRhs { defect: total / scale });
            }
            project_mean(&mut b, &free);
        }

        let mut x = match x0 {
            Some(x0) => free.iter().fold(vec![0.0; n], |mut x, &k| { x[k] = x0[k]; x }),
            None => vec![0.0; n],
        };
        if constraint == Constraint::ZeroMean {
            project_mean(&mut x, &free);
        }

        let weighted_norm = |r: &[f64]| free.iter().map(|&k| (r[k] / self.volumes[k]).powi(2)).sum::<f64>().sqrt();
        let mut kx = vec![0.0; n];
        let mut iterations = 0;
        let mut rel;
        loop {
            // (re)start from the true residual
            self.stiffness(as_vec1(&x), as_vec1_mut(&mut kx));
            let mut r = vec![0.0; n];
            for &k in &free {
                r[k] = b[k] - kx[k];
            }
            if constraint == Constraint::ZeroMean {
                project_mean(&mut r, &free);
            }
            rel = weighted_norm(&r) / rhs_norm;
            if rel <= tol {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NotConverged { iterations, residual: rel });
            }
            let mut p = r.clone();
            let mut rr: f64 = free.iter().map(|&k| r[k] * r[k]).sum();
            let mut kp = vec![0.0; n];
            while iterations < max_iter {
                iterations += 1;
                self.stiffness(as_vec1(&p), as_vec1_mut(&mut kp));
                let pkp: f64 = free.iter().map(|&k| p[k] * kp[k]).sum();
                if !(pkp > 0.0) {
                    break;
                }
                let alpha = rr / pkp;
                for &k in &free {
                    x[k] += alpha * p[k];
                    r[k] -= alpha * kp[k];
                }
                if constraint == Constraint::ZeroMean {
                    project_mean(&mut x, &free);
                    project_mean(&mut r, &free);
                }
                if weighted_norm(&r) / rhs_norm <= 0.5 * tol {
                    break;
                }
                let rr_new: f64 = free.iter().map(|&k| r[k] * r[k]).sum();
                let beta = rr_new / rr;
                rr = rr_new;
                for &k in &free {
                    p[k] = r[k] + beta * p[k];
                }
            }
        }

        if constraint == Constraint::ZeroMean {
            let vol: f64 = free.iter().map(|&k| self.volumes[k]).sum();
            let mean = free.iter().map(|&k| self.volumes[k] * x[k]).sum::<f64>() / vol;
            for &k in &free {
                x[k] -= mean;
            }
        }
        Ok(CgSolution { values: x, iterations, residual: rel })
    }
}

fn project_mean(v: &mut [f64], free: &[usize]) {
    let mean = free.iter().map(|&k| v[k]).sum::<f64>() / free.len() as f64;
    for &k in free {
        v[k] -= mean;
    }
}

pub(crate) fn as_vec1(f: &[f64]) -> &[[f64; 1]] {
    f.as_chunks::<1>().0
}

pub(crate) fn as_vec1_mut(f: &mut [f64]) -> &mut [[f64; 1]] {
    f.as_chunks_mut::<1>().0
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grid::Grid2D;
    use crate::material::{sample_matrix_field, Constant, Mode, Rotated};

    fn random_spd(seed: u64) -> Rotated {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mode = || Mode { k: [rng.gen_range(-2..=2), rng.gen_range(-2..=2)], amp: rng.gen_range(-0.5..0.5), phase: rng.gen_range(0.0..6.0) };
        Rotated::new(0.5, 3.0, vec![mode(), mode()], vec![mode()], vec![mode(), mode()]).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn weighted_dot(op: &DivAGradOperator, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(op.volumes()).map(|((x, y), v)| x * y * v).sum()
    }

    #[test]
    fn constant_is_in_the_kernel() {
        let g = Grid2D::unit_cell(12).unwrap();
        let op = DivAGradOperator::from_field(&sample_matrix_field(&random_spd(1), &g, None).unwrap()).unwrap();
        let lf = op.apply(&vec![3.5; g.len()]).unwrap();
        assert!(lf.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn symmetric_and_negative_semidefinite() {
        for (seed, bc_grid) in [(2, Grid2D::unit_cell(14).unwrap()), (3, Grid2D::new(10, 13, [0.0, 0.0], 0.1, [false, true]).unwrap())] {
            let a = sample_matrix_field(&random_spd(seed), &bc_grid, None).unwrap();
            let op = DivAGradOperator::from_field(&a).unwrap();
            let f = random_vec(bc_grid.len(), seed + 10);
            let g = random_vec(bc_grid.len(), seed + 20);
            let (lf, lg) = (op.apply(&f).unwrap(), op.apply(&g).unwrap());
            let norm = weighted_dot(&op, &f, &f).sqrt() * weighted_dot(&op, &g, &g).sqrt();
            assert!((weighted_dot(&op, &lf, &g) - weighted_dot(&op, &f, &lg)).abs() <= 1e-10 * norm);
            assert!(weighted_dot(&op, &lf, &f) <= 1e-12);
        }
    }

    #[test]
    fn periodic_conservation() {
        let g = Grid2D::unit_cell(16).unwrap();
        let op = DivAGradOperator::from_field(&sample_matrix_field(&random_spd(5), &g, None).unwrap()).unwrap();
        let f = random_vec(g.len(), 6);
        let total: f64 = op.apply(&f).unwrap().iter().zip(op.volumes()).map(|(a, v)| a * v).sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn laplacian_of_quadratic() {
        let g = Grid2D::square_domain(21).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| g.point_of(k)[0].powi(2)).collect();
        let lf = op.apply(&f).unwrap();
        for k in 0..g.len() {
            if op.fixed()[k] {
                assert_eq!(lf[k], f[k]);
            } else {
                assert!((lf[k] - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mixed_derivative_stencil_is_consistent() {
        // A = [[1, .5], [.5, 1]]: div(A∇(xy)) = 2·a12 = 1
        let g = Grid2D::square_domain(17).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::new(1.0, 0.5, 1.0)).unwrap()).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| { let p = g.point_of(k); p[0] * p[1] }).collect();
        let lf = op.apply(&f).unwrap();
        for k in (0..g.len()).filter(|&k| !op.fixed()[k]) {
            assert!((lf[k] - 1.0).abs() < 1e-9, "{}", lf[k]);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid2D::unit_cell(8).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
        let s = op.solve_cg(&vec![0.0; g.len()], Constraint::ZeroMean, 1e-10, 10).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_rhs_rejected() {
        let g = Grid2D::unit_cell(8).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
        assert!(matches!(op.solve_cg(&vec![1.0; g.len()], Constraint::ZeroMean, 1e-10, 100), Err(Error::IncompatibleRhs { .. })));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = Grid2D::square_domain(33).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
        match op.solve_cg(&vec![1.0; g.len()], Constraint::None, 1e-12, 3) {
            Err(Error::NotConverged { iterations, residual }) => assert!(iterations == 3 && residual > 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manufactured_periodic_solution_recovered() {
        let g = Grid2D::unit_cell(24).unwrap();
        let op = DivAGradOperator::from_field(&sample_matrix_field(&random_spd(9), &g, None).unwrap()).unwrap();
        let mut exact: Vec<f64> = (0..g.len()).map(|k| { let p = g.point_of(k); (2.0 * PI * p[0]).sin() + (2.0 * PI * (p[0] + 2.0 * p[1])).cos() }).collect();
        let rhs = op.apply(&exact).unwrap();
        let s = op.solve_cg(&rhs, Constraint::ZeroMean, 1e-12, 5000).unwrap();
        let mean = exact.iter().zip(op.volumes()).map(|(a, v)| a * v).sum::<f64>();
        exact.iter_mut().for_each(|v| *v -= mean);
        let err = s.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let mean_sol: f64 = s.values.iter().zip(op.volumes()).map(|(a, v)| a * v).sum();
        assert!(mean_sol.abs() < 1e-12);
    }

    #[test]
    fn fourier_oracle_for_sine_rhs() {
        // A = Id periodic, rhs = sin 2πy₁ ⇒ f = -sin(2πy₁)/(4π²) + O(h²)
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid2D::unit_cell(n).unwrap();
            let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
            let rhs: Vec<f64> = (0..g.len()).map(|k| (2.0 * PI * g.point_of(k)[0]).sin()).collect();
            let s = op.solve_cg(&rhs, Constraint::ZeroMean, 1e-12, 10_000).unwrap();
            let err = (0..g.len()).map(|k| (s.values[k] + (2.0 * PI * g.point_of(k)[0]).sin() / (4.0 * PI * PI)).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[2] < 1e-4);
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..=5.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn manufactured_dirichlet_second_order() {
        // -div(A∇U) = f with U = sin(πx)sin(πy)·(smooth), variable A
        let mat = random_spd(12);
        let exact = |p: [f64; 2]| (PI * (p[0] + 1.0) / 2.0).sin() * (PI * (p[1] + 1.0) / 2.0).sin() * (1.0 + 0.3 * p[0]);
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let g = Grid2D::square_domain(n).unwrap();
            let fine = Grid2D::square_domain(4 * (n - 1) + 1).unwrap();
            // reference rhs from a 4x finer operator applied to the exact solution
            let op_f = DivAGradOperator::from_field(&sample_matrix_field(&mat, &fine, None).unwrap()).unwrap();
            let ue: Vec<f64> = (0..fine.len()).map(|k| exact(fine.point_of(k))).collect();
            let rf = op_f.apply(&ue).unwrap();
            let op = DivAGradOperator::from_field(&sample_matrix_field(&mat, &g, None).unwrap()).unwrap();
            let rhs: Vec<f64> = (0..g.len()).map(|k| { let (i, j) = g.coords(k); if op.fixed()[k] { 0.0 } else { rf[fine.idx(4 * i, 4 * j)] } }).collect();
            let s = op.solve_cg(&rhs, Constraint::None, 1e-12, 20_000).unwrap();
            let err = (0..g.len()).map(|k| (s.values[k] - exact(g.point_of(k))).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..=5.0).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn node_energies_sum_to_energy() {
        let g = Grid2D::unit_cell(10).unwrap();
        let op = DivAGradOperator::from_field(&sample_matrix_field(&random_spd(3), &g, None).unwrap()).unwrap();
        let f = random_vec(g.len(), 4);
        let total: f64 = op.node_energies(as_vec1(&f)).iter().sum();
        assert!((total - op.energy(&f)).abs() < 1e-12 * total.abs().max(1.0));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g = Grid2D::unit_cell(8).unwrap();
        let op = DivAGradOperator::from_field(&MatrixField::constant(g, Sym2::identity()).unwrap()).unwrap();
        assert!(op.apply(&[0.0; 10]).is_err());
        assert!(DivAGradOperator::new(g.lattice(), vec![Sym2::identity(); g.len()], BoundaryKind::Dirichlet).is_err());
        let _ = Constant(Sym2::identity());
    }
}
