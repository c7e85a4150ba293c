//! Bad disks `{|u| < 1/2}`, their degrees, and the annulus energy comparison
//! between `u` and `u/|u|`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::boundary::loop_winding;
use crate::elliptic::DivAGradOperator;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Point;
use crate::material::MatrixField;

pub const BAD_SET_THRESHOLD: f64 = 0.5;
/// Loops whose modulus dips below this cannot carry a phase.
pub const LOOP_MODULUS_FLOOR: f64 = 0.25;
pub const MAX_WINDING_DEFECT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Vortex {
    pub center: Point,
    pub radius: f64,
    pub degree: i32,
    /// Radius of the loop the degree was read on.
    pub loop_radius: f64,
    pub min_modulus: f64,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexSet {
    pub vortices: Vec<Vortex>,
    pub threshold: f64,
    pub epsilon: f64,
    /// `max radius / ε` over the detected disks (0 when there are none).
    pub lambda: f64,
}

impl VortexSet {
    pub fn total_degree(&self) -> i32 {
        self.vortices.iter().map(|v| v.degree).sum()
    }

    pub fn len(&self) -> usize {
        self.vortices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    /// `(center, radius)` exclusion disks with a common radius.
    pub fn disks(&self, radius: f64) -> Vec<(Point, f64)> {
        self.vortices.iter().map(|v| (v.center, radius)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub degree: i32,
    pub raw: f64,
    pub defect: f64,
}

/// 4-connected components of `{|u| < threshold}` with their degrees.
pub fn detect_bad_disks(u: &ComplexField, epsilon: f64, threshold: f64) -> Result<VortexSet> {
    if !(epsilon > 0.0) || !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("need epsilon > 0 and threshold in (0, 1], got {epsilon}, {threshold}")));
    }
    let grid = u.grid;
    let modulus = u.modulus();
    let bad: Vec<bool> = modulus.iter().map(|&r| r < threshold).collect();
    let mut seen = vec![false; grid.len()];
    let mut components = Vec::new();
    for start in 0..grid.len() {
        if !bad[start] || seen[start] {
            continue;
        }
        let mut nodes = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            nodes.push(k);
            let (i, j) = grid.coords(k);
            if grid.is_boundary(i, j) {
                return Err(Error::BadSetOnBoundary);
            }
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let q = grid.idx((i as i64 + di) as usize, (j as i64 + dj) as usize);
                if bad[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        nodes.sort_unstable();
        components.push(nodes);
    }

    let mut disks: Vec<(Point, f64, f64, Vec<usize>)> = components
        .into_iter()
        .map(|nodes| {
            let (mut sw, mut c) = (0.0, [0.0; 2]);
            for &k in &nodes {
                let w = 1.0 - modulus[k];
                let p = grid.point_of(k);
                sw += w;
                c[0] += w * p[0];
                c[1] += w * p[1];
            }
            let center = [c[0] / sw, c[1] / sw];
            let radius = nodes.iter().map(|&k| dist(grid.point_of(k), center)).fold(0.0, f64::max);
            let min_modulus = nodes.iter().map(|&k| modulus[k]).fold(f64::INFINITY, f64::min);
            (center, radius, min_modulus, nodes)
        })
        .collect();
    disks.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));

    let mut vortices = Vec::with_capacity(disks.len());
    for (idx, (center, radius, min_modulus, nodes)) in disks.iter().enumerate() {
        // the loop must stay clear of the domain edge and of every other disk
        let (lo, hi) = grid.extent();
        let mut room = (0..2).map(|a| (center[a] - lo[a]).min(hi[a] - center[a])).fold(f64::INFINITY, f64::min) - grid.h;
        for (other, (c2, r2, _, _)) in disks.iter().enumerate() {
            if other != idx {
                room = room.min(dist(*center, *c2) - r2 - grid.h);
            }
        }
        let base = (2.0 * radius).max(2.5 * grid.h);
        let mut first_err = None;
        let mut found = None;
        for factor in [1.0, 1.5, 2.0, 3.0] {
            let r = (base * factor).min(room);
            if r <= *radius {
                break;
            }
            match winding_number(u, *center, r) {
                Ok(w) => {
                    found = Some((w, r));
                    break;
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let (w, loop_radius) = match found {
            Some(f) => f,
            None => return Err(first_err.unwrap_or(Error::InvalidArgument(format!("no room for a winding loop around {center:?}")))),
        };
        vortices.push(Vortex { center: *center, radius: *radius, degree: w.degree, loop_radius, min_modulus: *min_modulus, nodes: nodes.clone() });
    }
    let lambda = vortices.iter().map(|v| v.radius).fold(0.0, f64::max) / epsilon;
    Ok(VortexSet { vortices, threshold, epsilon, lambda })
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Degree of `u` along the circle `(center, radius)`, sampled bilinearly.
pub fn winding_number(u: &ComplexField, center: Point, radius: f64) -> Result<Winding> {
    let grid = u.grid;
    let (lo, hi) = grid.extent();
    if !(radius > 0.0) || (0..2).any(|a| center[a] - radius < lo[a] || center[a] + radius > hi[a]) {
        return Err(Error::InvalidArgument(format!("loop ({center:?}, {radius}) leaves the domain")));
    }
    let count = ((2.0 * PI * radius / (0.25 * grid.h)).ceil() as usize).max(64);
    let samples: Vec<Complex64> = (0..count)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / count as f64;
            u.sample([center[0] + radius * t.cos(), center[1] + radius * t.sin()])
        })
        .collect();
    let modulus = samples.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if modulus < LOOP_MODULUS_FLOOR {
        return Err(Error::LoopModulus { modulus, floor: LOOP_MODULUS_FLOOR });
    }
    let raw = loop_winding(&samples);
    let degree = raw.round();
    let defect = (raw - degree).abs();
    if defect > MAX_WINDING_DEFECT {
        return Err(Error::WindingDefect { raw, defect });
    }
    Ok(Winding { degree: degree as i32, raw, defect })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusGap {
    /// Dirichlet energy of `u/|u|` minus that of `u` on the annulus.
    pub gap: f64,
    pub normalized_energy: f64,
    pub field_energy: f64,
    pub nodes: usize,
}

/// Compares `½∫ ∇v·A∇v` for `v = u/|u|` and `v = u` over the nodes with
/// `inner ≤ |x - center| ≤ outer`, using the operator's corner energies.
pub fn annulus_energy_comparison(u: &ComplexField, a: &MatrixField, center: Point, inner: f64, outer: f64) -> Result<AnnulusGap> {
    u.grid.check_same(&a.grid, "matrix field")?;
    if !(0.0 <= inner && inner < outer) {
        return Err(Error::InvalidArgument(format!("annulus radii must satisfy 0 <= inner < outer, got {inner}, {outer}")));
    }
    let nodes: Vec<usize> = (0..u.grid.len())
        .filter(|&k| {
            let r = dist(u.grid.point_of(k), center);
            r >= inner && r <= outer
        })
        .collect();
    let min_modulus = nodes.iter().map(|&k| u.values[k].norm()).fold(f64::INFINITY, f64::min);
    if min_modulus < BAD_SET_THRESHOLD {
        return Err(Error::AnnulusOverlap(min_modulus));
    }
    let op = DivAGradOperator::from_field(a)?;
    let to_pairs = |f: &ComplexField| f.values.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let e_u = op.node_energies(&to_pairs(u));
    let e_v = op.node_energies(&to_pairs(&u.normalized()));
    let field_energy: f64 = nodes.iter().map(|&k| e_u[k]).sum();
    let normalized_energy: f64 = nodes.iter().map(|&k| e_v[k]).sum();
    Ok(AnnulusGap { gap: normalized_energy - field_energy, normalized_energy, field_energy, nodes: nodes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::material::Sym2;

    fn vortex_field(n: usize, centers: &[(Point, u32)], core: f64) -> ComplexField {
        ComplexField::from_fn(Grid2D::square_domain(n).unwrap(), |x| {
            centers.iter().fold(Complex64::new(1.0, 0.0), |acc, &(c, d)| {
                let z = Complex64::new(x[0] - c[0], x[1] - c[1]);
                let r = z.norm();
                if r == 0.0 { Complex64::default() } else { acc * (z / r).powu(d) * (r / core).min(1.0).powi(d as i32) }
            })
        })
    }

    #[test]
    fn unit_field_has_no_vortices() {
        let u = ComplexField::from_fn(Grid2D::square_domain(17).unwrap(), |_| Complex64::new(1.0, 0.0));
        let v = detect_bad_disks(&u, 0.1, 0.5).unwrap();
        assert!(v.is_empty() && v.lambda == 0.0);
    }

    #[test]
    fn single_and_multiple_vortices() {
        let u = vortex_field(129, &[([0.1, -0.2], 1)], 0.1);
        let v = detect_bad_disks(&u, 0.1, 0.5).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.vortices[0].degree, 1);
        assert!(dist(v.vortices[0].center, [0.1, -0.2]) < 0.02);
        // radius ≤ λε by definition
        assert!(v.vortices[0].radius <= v.lambda * v.epsilon + 1e-15);

        let u = vortex_field(129, &[([-0.4, 0.0], 1), ([0.4, 0.1], 2)], 0.08);
        let v = detect_bad_disks(&u, 0.08, 0.5).unwrap();
        assert_eq!(v.vortices.iter().map(|x| x.degree).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(v.total_degree(), 3);
    }

    #[test]
    fn outside_the_disks_modulus_is_at_least_half() {
        let u = vortex_field(65, &[([0.0, 0.0], 1)], 0.2);
        let v = detect_bad_disks(&u, 0.2, 0.5).unwrap();
        let inside: Vec<usize> = v.vortices.iter().flat_map(|x| x.nodes.clone()).collect();
        for k in 0..u.grid.len() {
            if !inside.contains(&k) {
                assert!(u.values[k].norm() >= 0.5);
            }
        }
    }

    #[test]
    fn lower_threshold_shrinks_components() {
        let u = vortex_field(65, &[([0.0, 0.0], 1)], 0.3);
        let a = detect_bad_disks(&u, 0.3, 0.5).unwrap();
        let b = detect_bad_disks(&u, 0.3, 0.3).unwrap();
        assert!(b.vortices[0].nodes.iter().all(|k| a.vortices[0].nodes.contains(k)));
        assert!(b.vortices[0].nodes.len() < a.vortices[0].nodes.len());
    }

    #[test]
    fn bad_set_on_boundary_is_an_error() {
        let u = ComplexField::from_fn(Grid2D::square_domain(17).unwrap(), |x| Complex64::new(x[0].abs(), 0.0));
        assert!(matches!(detect_bad_disks(&u, 0.1, 0.5), Err(Error::BadSetOnBoundary)));
    }

    #[test]
    fn winding_of_canonical_maps_and_radius_invariance() {
        let a = [0.2, 0.1];
        for d in [1u32, 3] {
            let u = vortex_field(129, &[(a, d)], 1e-9);
            for r in [0.1, 0.3, 0.5] {
                assert_eq!(winding_number(&u, a, r).unwrap().degree, d as i32);
            }
        }
        let u = vortex_field(129, &[(a, 1)], 1e-9);
        assert_eq!(winding_number(&u, [-0.5, -0.5], 0.2).unwrap().degree, 0);
    }

    #[test]
    fn loop_through_core_is_rejected() {
        let u = vortex_field(65, &[([0.0, 0.0], 1)], 0.3);
        assert!(matches!(winding_number(&u, [0.0, 0.0], 0.05), Err(Error::LoopModulus { .. })));
    }

    #[test]
    fn annulus_gap_closed_form() {
        let grid = Grid2D::square_domain(129).unwrap();
        let a = MatrixField::constant(grid, Sym2::new(1.5, 0.2, 1.0)).unwrap();
        let unit = vortex_field(129, &[([0.0, 0.0], 1)], 1e-9);
        let g = annulus_energy_comparison(&unit, &a, [0.0, 0.0], 0.2, 0.8).unwrap();
        assert!(g.gap.abs() < 1e-13 * g.field_energy);
        let mut scaled = unit.clone();
        scaled.values.iter_mut().for_each(|z| *z *= 0.9);
        let g = annulus_energy_comparison(&scaled, &a, [0.0, 0.0], 0.2, 0.8).unwrap();
        let expected = (1.0 - 0.81) * g.normalized_energy;
        assert!((g.gap - expected).abs() < 1e-12 * expected);
        assert!((g.gap - (1.0 / 0.81 - 1.0) * g.field_energy).abs() < 1e-12 * expected);
    }

    #[test]
    fn annulus_over_core_rejected() {
        let grid = Grid2D::square_domain(65).unwrap();
        let a = MatrixField::constant(grid, Sym2::identity()).unwrap();
        let u = vortex_field(65, &[([0.0, 0.0], 1)], 0.3);
        assert!(matches!(annulus_energy_comparison(&u, &a, [0.0, 0.0], 0.0, 0.5), Err(Error::AnnulusOverlap(_))));
    }
}
