//! Periodic unfolding `T_δ f(x, y) = f(δ[x/δ] + δy)` on the cells that lie
//! inside the domain, and the per-cell two-scale fit of unfolded gradients.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::field::{bilinear, ComplexField};
use crate::grid::{Grid2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every micro node is a grid node.
    Exact,
    Bilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedCell<T> {
    /// `z` with anchor `δz`.
    pub index: [i64; 2],
    pub anchor: Point,
    /// Values at `y = (a/m, b/m)`, row-major in `b`.
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedField<T> {
    pub delta: f64,
    pub micro: usize,
    pub sampling: Sampling,
    pub cells: Vec<UnfoldedCell<T>>,
}

impl<T> UnfoldedField<T> {
    pub fn micro_point(&self, q: usize) -> Point {
        [(q % self.micro) as f64 / self.micro as f64, (q / self.micro) as f64 / self.micro as f64]
    }
}

impl UnfoldedField<f64> {
    /// `Σ_cells δ²·mean_y |T_δ f|²`.
    pub fn mass(&self) -> f64 {
        let d2 = self.delta * self.delta;
        self.cells.iter().map(|c| d2 * c.values.iter().map(|v| v * v).sum::<f64>() / c.values.len() as f64).sum()
    }
}

/// Indices `z` whose closed cell `δz + δ[0,1]²` lies strictly inside the domain.
///
/// Cells touching the boundary are left out, so they contribute zero.
pub fn contained_cells(grid: &Grid2D, delta: f64) -> Result<Vec<[i64; 2]>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let (lo, hi) = grid.extent();
    let tol = 1e-9 * delta;
    let range = |a: usize| {
        let first = ((lo[a] + tol) / delta).floor() as i64;
        let last = ((hi[a] - tol) / delta).ceil() as i64;
        (first..=last).filter(move |&z| {
            let x0 = z as f64 * delta;
            x0 > lo[a] + tol && x0 + delta < hi[a] - tol
        })
    };
    let xs: Vec<i64> = range(0).collect();
    let cells: Vec<[i64; 2]> = range(1).flat_map(|zy| xs.iter().map(move |&zx| [zx, zy])).collect();
    if cells.is_empty() {
        return Err(Error::DeltaTooLarge { delta });
    }
    Ok(cells)
}

fn near_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() < 1e-9).then_some(r as i64)
}

/// Samples `f(δz + δy)` at the `micro × micro` nodes of every contained cell.
pub fn unfold<T>(grid: &Grid2D, values: &[T], delta: f64, micro: usize) -> Result<UnfoldedField<T>>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    if micro < 2 {
        return Err(Error::InvalidArgument(format!("micro resolution must be at least 2, got {micro}")));
    }
    let index = contained_cells(grid, delta)?;
    let step = delta / micro as f64 / grid.h;
    let aligned = near_integer(step).is_some()
        && index.iter().all(|z| (0..2).all(|a| near_integer((z[a] as f64 * delta - grid.origin[a]) / grid.h).is_some()));
    let sampling = if aligned { Sampling::Exact } else { Sampling::Bilinear };
    let cells = index
        .into_iter()
        .map(|z| {
            let anchor = [z[0] as f64 * delta, z[1] as f64 * delta];
            let values = (0..micro * micro)
                .map(|q| {
                    let p = [anchor[0] + delta * (q % micro) as f64 / micro as f64, anchor[1] + delta * (q / micro) as f64 / micro as f64];
                    if aligned {
                        let i = ((p[0] - grid.origin[0]) / grid.h).round() as usize;
                        let j = ((p[1] - grid.origin[1]) / grid.h).round() as usize;
                        values[grid.idx(i, j)]
                    } else {
                        bilinear(grid, values, p)
                    }
                })
                .collect();
            UnfoldedCell { index: z, anchor, values }
        })
        .collect();
    Ok(UnfoldedField { delta, micro, sampling, cells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientIdentityReport {
    /// `max |∇_y T_δ f - δ·T_δ(∇f)|`.
    pub defect: f64,
    /// The same with the factor on the other side, `max |T_δ(∇f) - δ·∇_y T_δ f|`.
    pub swapped_defect: f64,
    pub cells: usize,
}

/// Checks `∇_y T_δ f = δ·T_δ(∇f)` at the micro nodes of every contained cell.
///
/// `∇_y` is a fourth-order central difference with step `1/micro`.
pub fn unfold_gradient_identity_check(
    grid: &Grid2D,
    f: &dyn Fn(Point) -> f64,
    grad: &dyn Fn(Point) -> [f64; 2],
    delta: f64,
    micro: usize,
) -> Result<GradientIdentityReport> {
    if micro < 2 {
        return Err(Error::InvalidArgument(format!("micro resolution must be at least 2, got {micro}")));
    }
    let cells = contained_cells(grid, delta)?;
    let eta = 1.0 / micro as f64;
    let (mut defect, mut swapped_defect) = (0.0_f64, 0.0_f64);
    for z in &cells {
        let anchor = [z[0] as f64 * delta, z[1] as f64 * delta];
        let unfolded = |y: [f64; 2]| f([anchor[0] + delta * y[0], anchor[1] + delta * y[1]]);
        for q in 0..micro * micro {
            let y = [(q % micro) as f64 * eta, (q / micro) as f64 * eta];
            let mut dy = [0.0; 2];
            for (a, d) in dy.iter_mut().enumerate() {
                let at = |s: f64| {
                    let mut p = y;
                    p[a] += s * eta;
                    unfolded(p)
                };
                *d = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * eta);
            }
            let g = grad([anchor[0] + delta * y[0], anchor[1] + delta * y[1]]);
            for a in 0..2 {
                defect = defect.max((dy[a] - delta * g[a]).abs());
                swapped_defect = swapped_defect.max((g[a] - delta * dy[a]).abs());
            }
        }
    }
    Ok(GradientIdentityReport { defect, swapped_defect, cells: cells.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    pub anchor: Point,
    /// `G = (G₁, G₂)`, the constant part of the unfolded gradient.
    pub macro_gradient: [Complex64; 2],
    /// Coefficients of `∇_y χ¹, ∇_y χ²` (zero for a vanishing corrector).
    pub coefficients: [Complex64; 2],
    /// Least-squares defect `Σ_y |T_δ(∇u) - G - Σ cⱼ∇_y χʲ|²`.
    pub residual: f64,
    /// `Σ_y |T_δ(∇u)|²`.
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleFit {
    pub delta: f64,
    pub micro: usize,
    pub sampling: Sampling,
    pub cells: Vec<CellFit>,
    /// Anchors of cells dropped because the corrector design lost rank.
    pub flagged: Vec<Point>,
    pub excluded_near_vortices: usize,
    /// `Σ residual / Σ observed` over the fitted cells.
    pub relative_residual: f64,
}

/// Per cell, least-squares split of `T_δ(∇u)` into `G + c₁∇_yχ¹ + c₂∇_yχ²`.
///
/// Cells within `R` of an exclusion centre `(c, R)` are skipped.
pub fn extract_two_scale_pair(u: &ComplexField, delta: f64, cell: &CellSolution, exclusions: &[(Point, f64)]) -> Result<TwoScaleFit> {
    let grid = u.grid;
    let micro = ((delta / grid.h).round() as usize).max(4);
    let grad = u.gradient();
    let g1: Vec<Complex64> = grad.iter().map(|g| g[0]).collect();
    let g2: Vec<Complex64> = grad.iter().map(|g| g[1]).collect();
    let t1 = unfold(&grid, &g1, delta, micro)?;
    let t2 = unfold(&grid, &g2, delta, micro)?;

    // corrector gradients by the same central differences on the micro grid
    let mq = micro * micro;
    let mut dchi = vec![[[0.0; 2]; 2]; mq];
    for j in 0..2 {
        let samples: Vec<f64> = (0..mq).map(|q| cell.chi[j].sample(t1.micro_point(q))).collect();
        for (q, d) in dchi.iter_mut().enumerate() {
            let (a, b) = (q % micro, q / micro);
            let at = |a: usize, b: usize| samples[(b % micro) * micro + a % micro];
            let half = 0.5 * micro as f64;
            d[j] = [(at(a + 1, b) - at(a + micro - 1, b)) * half, (at(a, b + 1) - at(a, b + micro - 1)) * half];
        }
    }
    let active: Vec<usize> = (0..2).filter(|&j| dchi.iter().any(|d| d[j][0].abs() > 1e-12 || d[j][1].abs() > 1e-12)).collect();
    // design rows per micro node: [1, 0, ∂₁χ¹, ∂₁χ²] and [0, 1, ∂₂χ¹, ∂₂χ²]
    let cols = 2 + active.len();
    let row = |q: usize, comp: usize| -> Vec<f64> {
        let mut r = vec![0.0; cols];
        r[comp] = 1.0;
        for (c, &j) in active.iter().enumerate() {
            r[2 + c] = dchi[q][j][comp];
        }
        r
    };
    let mut normal = vec![vec![0.0; cols]; cols];
    for q in 0..mq {
        for comp in 0..2 {
            let r = row(q, comp);
            for a in 0..cols {
                for b in 0..cols {
                    normal[a][b] += r[a] * r[b];
                }
            }
        }
    }
    let factor = cholesky(&normal);

    let mut fits = Vec::new();
    let mut flagged = Vec::new();
    let mut excluded = 0;
    for (c1, c2) in t1.cells.iter().zip(&t2.cells) {
        let anchor = c1.anchor;
        if exclusions.iter().any(|&(c, r)| box_distance(anchor, delta, c) < r) {
            excluded += 1;
            continue;
        }
        let Some(l) = &factor else {
            flagged.push(anchor);
            continue;
        };
        let mut rhs = vec![Complex64::default(); cols];
        let mut observed = 0.0;
        for q in 0..mq {
            for (comp, obs) in [(0, c1.values[q]), (1, c2.values[q])] {
                observed += obs.norm_sqr();
                for (a, r) in row(q, comp).into_iter().enumerate() {
                    rhs[a] += obs * r;
                }
            }
        }
        let sol = cholesky_solve(l, &rhs);
        let mut residual = 0.0;
        for q in 0..mq {
            for (comp, obs) in [(0, c1.values[q]), (1, c2.values[q])] {
                let fit: Complex64 = row(q, comp).into_iter().zip(&sol).map(|(r, s)| s * r).sum();
                residual += (obs - fit).norm_sqr();
            }
        }
        let mut coefficients = [Complex64::default(); 2];
        for (c, &j) in active.iter().enumerate() {
            coefficients[j] = sol[2 + c];
        }
        fits.push(CellFit { anchor, macro_gradient: [sol[0], sol[1]], coefficients, residual, observed });
    }
    let total_obs: f64 = fits.iter().map(|f| f.observed).sum();
    let total_res: f64 = fits.iter().map(|f| f.residual).sum();
    let relative_residual = if total_obs > 0.0 { total_res / total_obs } else { 0.0 };
    Ok(TwoScaleFit { delta, micro, sampling: t1.sampling, cells: fits, flagged, excluded_near_vortices: excluded, relative_residual })
}

/// Distance from `p` to the closed box `anchor + δ[0,1]²`.
fn box_distance(anchor: Point, delta: f64, p: Point) -> f64 {
    let d = |a: usize| (anchor[a] - p[a]).max(p[a] - anchor[a] - delta).max(0.0);
    (d(0).powi(2) + d(1).powi(2)).sqrt()
}

/// Lower Cholesky factor, or `None` when a pivot collapses (rank loss).
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i]).fold(0.0, f64::max);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-10 * scale {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[Complex64]) -> Vec<Complex64> {
    let n = l.len();
    let mut y = vec![Complex64::default(); n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| y[k] * l[i][k]).sum::<Complex64>()) / l[i][i];
    }
    let mut x = vec![Complex64::default(); n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| x[k] * l[k][i]).sum::<Complex64>()) / l[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::cell::solve_cell_problem;
    use crate::material::{sample_matrix_field, Constant, Laminate, Sym2};

    fn domain(n: usize) -> Grid2D {
        Grid2D::square_domain(n).unwrap()
    }

    #[test]
    fn contained_cells_exclude_the_boundary_ring() {
        let cells = contained_cells(&domain(33), 0.25).unwrap();
        assert_eq!(cells.len(), 36);
        assert!(cells.iter().all(|z| (-3..=2).contains(&z[0]) && (-3..=2).contains(&z[1])));
        assert!(matches!(contained_cells(&domain(33), 1.5), Err(Error::DeltaTooLarge { .. })));
    }

    #[test]
    fn constant_and_linear_fields() {
        let g = domain(33);
        let c = unfold(&g, &vec![2.5; g.len()], 0.25, 4).unwrap();
        assert!(c.cells.iter().all(|cell| cell.values.iter().all(|&v| v == 2.5)));
        let x1: Vec<f64> = (0..g.len()).map(|k| g.point_of(k)[0]).collect();
        let t = unfold(&g, &x1, 0.25, 4).unwrap();
        assert_eq!(t.sampling, Sampling::Exact);
        for cell in &t.cells {
            for q in 0..16 {
                let y = t.micro_point(q);
                assert!((cell.values[q] - (cell.anchor[0] + 0.25 * y[0])).abs() < 1e-14);
            }
        }
        let b = unfold(&g, &x1, 0.3, 5).unwrap();
        assert_eq!(b.sampling, Sampling::Bilinear);
        assert!((b.cells[0].values[1] - (b.cells[0].anchor[0] + 0.06)).abs() < 1e-12);
    }

    #[test]
    fn isometry_against_direct_summation() {
        let g = domain(65);
        let f: Vec<f64> = (0..g.len()).map(|k| { let p = g.point_of(k); (3.0 * p[0]).sin() * (1.0 + p[1] * p[1]) }).collect();
        for (delta, micro) in [(0.25, 8), (0.125, 4)] {
            let t = unfold(&g, &f, delta, micro).unwrap();
            // oracle: h² Σ |f|² over the nodes of each half-open covered rectangle
            let mut direct = 0.0;
            for z in contained_cells(&g, delta).unwrap() {
                for k in 0..g.len() {
                    let p = g.point_of(k);
                    let inside = (0..2).all(|a| {
                        let s = (p[a] - z[a] as f64 * delta) / g.h;
                        s > -1e-9 && s < delta / g.h - 1e-9
                    });
                    if inside {
                        direct += g.h * g.h * f[k] * f[k];
                    }
                }
            }
            assert!((t.mass() - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn gradient_identity_linear_and_sine() {
        let g = domain(65);
        let r = unfold_gradient_identity_check(&g, &|x| x[0], &|_| [1.0, 0.0], 0.125, 8).unwrap();
        assert!(r.defect < 1e-12);
        let w = 2.0 * PI;
        let r = unfold_gradient_identity_check(&g, &|x| (w * x[0]).sin(), &|x| [w * (w * x[0]).cos(), 0.0], 0.125, 64).unwrap();
        assert!(r.defect < 1e-6, "{}", r.defect);
        assert!(r.swapped_defect > 1.0);
    }

    #[test]
    fn gradient_identity_defect_shrinks_with_micro_resolution() {
        let g = domain(65);
        let f = |x: Point| (5.0 * x[0] + 2.0 * x[1]).sin();
        let df = |x: Point| { let c = (5.0 * x[0] + 2.0 * x[1]).cos(); [5.0 * c, 2.0 * c] };
        let coarse = unfold_gradient_identity_check(&g, &f, &df, 0.5, 4).unwrap().defect;
        let fine = unfold_gradient_identity_check(&g, &f, &df, 0.5, 8).unwrap().defect;
        assert!(fine < coarse / 8.0);
    }

    #[test]
    fn constant_material_gives_zero_coefficients() {
        let cell = solve_cell_problem(&sample_matrix_field(&Constant(Sym2::identity()), &Grid2D::unit_cell(16).unwrap(), None).unwrap(), 1e-10).unwrap();
        let g = domain(65);
        let u = ComplexField::from_fn(g, |x| Complex64::new(x[0], 2.0 * x[1]).exp());
        let fit = extract_two_scale_pair(&u, 0.25, &cell, &[]).unwrap();
        assert!(fit.flagged.is_empty());
        for c in &fit.cells {
            assert_eq!(c.coefficients, [Complex64::default(); 2]);
            assert!(c.residual >= 0.0 && c.residual <= c.observed);
        }
    }

    #[test]
    fn manufactured_two_scale_field() {
        // u = x·ξ + δ χ¹(x/δ) ξ₁ is fitted exactly: G = ξ, c₁ = ξ₁
        let lam = Laminate { mean: 2.0, amp: 1.0 };
        let xi = [0.7, -0.4];
        let cell = solve_cell_problem(&sample_matrix_field(&lam, &Grid2D::unit_cell(64).unwrap(), None).unwrap(), 1e-12).unwrap();
        for (n, delta) in [(65, 0.25), (129, 0.125), (129, 0.3)] {
            let u = ComplexField::from_fn(domain(n), |x| {
                let y = [(x[0] / delta).rem_euclid(1.0), (x[1] / delta).rem_euclid(1.0)];
                Complex64::new(x[0] * xi[0] + x[1] * xi[1] + delta * cell.chi[0].sample(y) * xi[0], 0.0)
            });
            let fit = extract_two_scale_pair(&u, delta, &cell, &[([0.0, 0.0], 0.1)]).unwrap();
            assert!(fit.excluded_near_vortices > 0);
            assert!(fit.flagged.is_empty());
            if fit.sampling == Sampling::Exact {
                assert!(fit.relative_residual < 1e-20);
                for c in &fit.cells {
                    assert!((c.macro_gradient[0].re - xi[0]).abs() < 1e-10);
                    assert!((c.macro_gradient[1].re - xi[1]).abs() < 1e-10);
                    assert!((c.coefficients[0].re - xi[0]).abs() < 1e-10);
                    assert_eq!(c.coefficients[1], Complex64::default());
                }
            } else {
                assert!(fit.relative_residual < 0.05, "{}", fit.relative_residual);
            }
        }
    }
}
