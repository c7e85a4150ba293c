//! Periodic cell problem, the homogenized matrix `A⁰`, and the linear
//! Dirichlet problem used to sanity-check it.

use crate::elliptic::{Constraint, DivAGradOperator};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid2D, Point};
use crate::material::{sample_matrix_field, Material, MatrixField, Sym2};

/// Asymmetry of the assembled `A⁰` above which the correctors are inconsistent.
pub const MAX_ASYMMETRY: f64 = 1e-6;

const CG_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone)]
pub struct CellSolution {
    /// Correctors `χ¹, χ²`, each with zero cell average.
    pub chi: [ScalarField; 2],
    pub a0: Sym2,
    /// `|A⁰₁₂ - A⁰₂₁|` before symmetrization.
    pub asymmetry: f64,
    pub residuals: [f64; 2],
    pub iterations: [usize; 2],
}

/// Solves `div(A∇χʲ) = div(A eⱼ)` with zero mean for `j = 1, 2`, then assembles `A⁰`.
pub fn solve_cell_problem(a: &MatrixField, tol: f64) -> Result<CellSolution> {
    if a.grid.periodic != [true, true] {
        return Err(Error::InvalidGrid("the cell problem needs a grid periodic on both axes".into()));
    }
    let op = DivAGradOperator::from_field(a)?;
    let load_scale = 1e-13 * a.big_m.max(1.0) * a.grid.h;
    let mut chi = Vec::with_capacity(2);
    let mut residuals = [0.0; 2];
    let mut iterations = [0; 2];
    for j in 0..2 {
        let load = op.column_load(j);
        // a vanishing divergence is round-off from the scatter, not data
        if load.iter().all(|v| v.abs() <= load_scale) {
            chi.push(ScalarField::new(a.grid, vec![0.0; a.grid.len()])?);
            continue;
        }
        let rhs: Vec<f64> = load.iter().zip(op.volumes()).map(|(l, v)| -l / v).collect();
        let sol = op.solve_cg(&rhs, Constraint::ZeroMean, tol, CG_MAX_ITER)?;
        residuals[j] = sol.residual;
        iterations[j] = sol.iterations;
        chi.push(ScalarField::new(a.grid, sol.values)?);
    }
    let chi: [ScalarField; 2] = chi.try_into().expect("two correctors");
    let (a0, asymmetry) = assemble_a0(a, &chi)?;
    Ok(CellSolution { chi, a0, asymmetry, residuals, iterations })
}

/// `A⁰ eⱼ = ∫_Y A (eⱼ - ∇χʲ)`, with the same corner quadrature as the operator.
///
/// Returns the symmetrized matrix and the asymmetry it had.
pub fn assemble_a0(a: &MatrixField, chi: &[ScalarField; 2]) -> Result<(Sym2, f64)> {
    for c in chi {
        a.grid.check_same(&c.grid, "corrector")?;
    }
    let op = DivAGradOperator::from_field(a)?;
    let area = op.lattice().area();
    let mean_a = op.coefficient_integral();
    let mut cols = [[0.0; 2]; 2];
    for (j, c) in chi.iter().enumerate() {
        let flux = op.flux_integral(&c.values);
        for i in 0..2 {
            cols[j][i] = (mean_a.get(i, j) - flux[i]) / area;
        }
    }
    let asymmetry = (cols[1][0] - cols[0][1]).abs();
    if asymmetry > MAX_ASYMMETRY {
        return Err(Error::AsymmetricA0(asymmetry));
    }
    Ok((Sym2::new(cols[0][0], 0.5 * (cols[1][0] + cols[0][1]), cols[1][1]), asymmetry))
}

#[derive(Debug, Clone)]
pub struct ParadigmReport {
    pub a0: Sym2,
    /// `(δ, ‖U^δ - U⁰‖_L²)` in the order the scales were given.
    pub gaps: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
}

/// Solves `-div(A(x/δ)∇U) = f`, `U = 0` on the boundary, for each `δ` and for
/// the homogenized matrix, and reports the L² gaps.
pub fn validate_linear_paradigm(
    material: &dyn Material,
    source: &dyn Fn(Point) -> f64,
    deltas: &[f64],
    domain_n: usize,
    cell_n: usize,
    tol: f64,
) -> Result<ParadigmReport> {
    let grid = Grid2D::square_domain(domain_n)?;
    for &d in deltas {
        if !(d > 0.0) || d / grid.h < 8.0 - 1e-9 {
            return Err(Error::InvalidArgument(format!("delta {d} is resolved by fewer than 8 nodes at h = {}", grid.h)));
        }
    }
    let cell = solve_cell_problem(&sample_matrix_field(material, &Grid2D::unit_cell(cell_n)?, None)?, tol)?;
    let (m, big_m) = material.bounds();
    let homogenized = MatrixField::from_entries(grid, vec![cell.a0; grid.len()], m, big_m)?;
    let rhs: Vec<f64> = (0..grid.len()).map(|k| -source(grid.point_of(k))).collect();
    let limit = solve_dirichlet(&homogenized, &rhs, tol)?;
    let weights = grid.weights();
    let mut gaps = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let u = solve_dirichlet(&sample_matrix_field(material, &grid, Some(d))?, &rhs, tol)?;
        let gap = u.iter().zip(&limit).zip(&weights).map(|((a, b), w)| w * (a - b).powi(2)).sum::<f64>().sqrt();
        gaps.push((d, gap));
    }
    let strictly_decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ParadigmReport { a0: cell.a0, gaps, strictly_decreasing })
}

fn solve_dirichlet(a: &MatrixField, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    Ok(DivAGradOperator::from_field(a)?.solve_cg(rhs, Constraint::None, tol, CG_MAX_ITER)?.values)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::material::{Checkerboard, Constant, FnMaterial, Laminate};

    fn cell_of(material: &dyn Material, n: usize) -> (MatrixField, CellSolution) {
        let a = sample_matrix_field(material, &Grid2D::unit_cell(n).unwrap(), None).unwrap();
        let s = solve_cell_problem(&a, 1e-11).unwrap();
        (a, s)
    }

    #[test]
    fn constant_material_has_no_corrector() {
        let c = Sym2::new(2.0, 0.3, 1.5);
        let (_, s) = cell_of(&Constant(c), 16);
        assert!(s.chi.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!((s.a0.get(i, j) - c.get(i, j)).abs() < 1e-14);
        }
    }

    /// Exact corrector of the discrete 1D problem with edge coefficients `(a_i + a_{i+1})/2`.
    fn laminate_oracle(a: impl Fn(f64) -> f64, n: usize) -> (Vec<f64>, f64) {
        let h = 1.0 / n as f64;
        let edge: Vec<f64> = (0..n).map(|i| 0.5 * (a(i as f64 * h) + a(((i + 1) % n) as f64 * h))).collect();
        let harmonic = 1.0 / (edge.iter().map(|e| 1.0 / e).sum::<f64>() / n as f64);
        // flux ā(1 - χ') = harmonic on every edge
        let mut chi = vec![0.0; n];
        for i in 1..n {
            chi[i] = chi[i - 1] + h * (1.0 - harmonic / edge[i - 1]);
        }
        let mean = chi.iter().sum::<f64>() / n as f64;
        chi.iter_mut().for_each(|v| *v -= mean);
        (chi, harmonic)
    }

    #[test]
    fn laminate_matches_one_dimensional_oracle() {
        let n = 64;
        let lam = Laminate { mean: 2.0, amp: 1.0 };
        let (_, s) = cell_of(&lam, n);
        let (chi1, harmonic) = laminate_oracle(|t| 2.0 + (2.0 * PI * t).sin(), n);
        assert!(s.chi[1].values.iter().all(|&v| v == 0.0));
        for j in 0..n {
            for i in 0..n {
                assert!((s.chi[0].values[j * n + i] - chi1[i]).abs() < 1e-8);
            }
        }
        assert!((s.a0.a11 - harmonic).abs() < 1e-9);
        assert!((s.a0.a22 - 2.0).abs() < 1e-12);
        assert!(s.a0.a12.abs() < 1e-12);
    }

    #[test]
    fn harmonic_mean_integral_is_one_over_root_three() {
        let n = 100_000;
        let integral = (0..n).map(|i| 1.0 / (2.0 + (2.0 * PI * (i as f64 + 0.5) / n as f64).sin())).sum::<f64>() / n as f64;
        assert!((integral - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_is_isotropic() {
        let (a, s) = cell_of(&Checkerboard { mean: 2.0, amp: 1.0 }, 48);
        assert!((s.a0.a11 - s.a0.a22).abs() < 1e-6);
        assert!(s.a0.a12.abs() < 1e-6);
        let (lo, hi) = s.a0.eigenvalues();
        assert!(lo >= a.m && hi <= a.big_m);
        // strictly between the harmonic and arithmetic bounds
        assert!(s.a0.a11 < 2.0 && s.a0.a11 > 3f64.sqrt());
    }

    #[test]
    fn correctors_have_zero_mean_and_small_residual() {
        let mat = FnMaterial::new("rotated-lam", (1.0, 3.0), |y| {
            let s = 2.0 + (2.0 * PI * (y[0] + y[1])).sin();
            Sym2::new(0.5 * (s + 2.0), 0.5 * (s - 2.0), 0.5 * (s + 2.0))
        });
        let (a, s) = cell_of(&mat, 32);
        let op = DivAGradOperator::from_field(&a).unwrap();
        for j in 0..2 {
            let mean: f64 = s.chi[j].values.iter().zip(op.volumes()).map(|(c, v)| c * v).sum();
            assert!(mean.abs() < 1e-10);
            let load = op.column_load(j);
            let rhs: Vec<f64> = load.iter().zip(op.volumes()).map(|(l, v)| -l / v).collect();
            let lc = op.apply(&s.chi[j].values).unwrap();
            let num = lc.iter().zip(&rhs).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den = rhs.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!(num <= 1e-10 * den, "{}", num / den);
        }
        assert!(s.asymmetry < 1e-9);
    }

    #[test]
    fn translation_by_a_period_leaves_a0_unchanged() {
        let base = |y: Point| 2.0 + 0.7 * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).cos() + 0.2 * (4.0 * PI * y[1]).sin();
        let a = FnMaterial::new("a", (1.0, 3.0), move |y| Sym2::scalar(base(y)));
        let b = FnMaterial::new("b", (1.0, 3.0), move |y| Sym2::scalar(base([y[0] + 1.0, y[1] - 1.0])));
        let (_, sa) = cell_of(&a, 24);
        let (_, sb) = cell_of(&b, 24);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert!((sa.a0.get(i, j) - sb.a0.get(i, j)).abs() < 1e-8);
        }
    }

    #[test]
    fn non_periodic_grid_rejected() {
        let a = MatrixField::constant(Grid2D::square_domain(9).unwrap(), Sym2::identity()).unwrap();
        assert!(solve_cell_problem(&a, 1e-10).is_err());
    }

    #[test]
    fn paradigm_constant_material_is_exact() {
        let r = validate_linear_paradigm(&Constant(Sym2::scalar(1.5)), &|_| 1.0, &[0.5, 0.25], 65, 8, 1e-11).unwrap();
        assert!(r.gaps.iter().all(|&(_, g)| g < 1e-12));
        let z = validate_linear_paradigm(&Laminate { mean: 2.0, amp: 1.0 }, &|_| 0.0, &[0.5], 33, 8, 1e-11).unwrap();
        assert_eq!(z.gaps[0].1, 0.0);
    }

    #[test]
    fn paradigm_rejects_unresolved_delta() {
        assert!(validate_linear_paradigm(&Constant(Sym2::identity()), &|_| 1.0, &[0.1], 33, 8, 1e-10).is_err());
    }
}
