//! Minimal energy of degree-κ circle-valued maps on annuli, through the lift
//! `f = κθ + h`, and the prescribed-boundary competitor built from it.
//!
//! Grids are uniform in `s = log r`. In `(s, θ)` the form
//! `∫ Df·B̃ Df r dr dθ` becomes `∫ (f_s, f_θ)·B̃ (f_s, f_θ) ds dθ`,
//! so the corner scheme of [`DivAGradOperator`] applies unchanged.

use std::f64::consts::PI;

use crate::elliptic::{BoundaryKind, Constraint, DivAGradOperator};
use crate::error::{Error, Result};
use crate::grid::Lattice;
use crate::material::{check_bounds, Material, Sym2};

const CG_MAX_ITER: usize = 400_000;

/// Relative tolerance on the ring comparison that builds `J`.
const RING_TOL: f64 = 1e-12;

/// Absolute tolerance for the branch agreement at the four seams.
const SEAM_TOL: f64 = 1e-9;

/// Nodes `(i, j)` at `r = α e^{i·hs}`, `θ = 2πj/nθ`; `θ` is periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    pub nr: usize,
    pub ntheta: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl PolarGrid {
    pub fn new(nr: usize, ntheta: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > alpha && beta.is_finite()) {
            return Err(Error::InvalidGrid(format!("need 0 < alpha < beta, got ({alpha}, {beta})")));
        }
        if nr < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 radial nodes, got {nr}")));
        }
        if ntheta < 16 {
            return Err(Error::InvalidGrid(format!("need at least 16 angular nodes, got {ntheta}")));
        }
        Ok(PolarGrid { nr, ntheta, alpha, beta })
    }

    /// A grid with `per_octave` radial steps per doubling of `r`, so that
    /// halving or doubling a node radius lands on another node.
    pub fn octave_aligned(alpha: f64, beta: f64, per_octave: usize, ntheta: usize) -> Result<Self> {
        if per_octave == 0 {
            return Err(Error::InvalidArgument("per_octave must be positive".into()));
        }
        if !(alpha > 0.0 && beta > alpha) {
            return Err(Error::InvalidGrid(format!("need 0 < alpha < beta, got ({alpha}, {beta})")));
        }
        let steps = per_octave as f64 * (beta / alpha).log2();
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta/alpha = {} is not a power of 2^(1/{per_octave})",
                beta / alpha
            )));
        }
        PolarGrid::new(rounded as usize + 1, ntheta, alpha, beta)
    }

    pub fn len(&self) -> usize {
        self.nr * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    pub fn log_step(&self) -> f64 {
        (self.beta / self.alpha).ln() / (self.nr - 1) as f64
    }

    pub fn theta_step(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i + 1 == self.nr {
            self.beta
        } else {
            self.alpha * (i as f64 * self.log_step()).exp()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.theta_step()
    }

    pub fn log_ratio(&self) -> f64 {
        (self.beta / self.alpha).ln()
    }

    pub fn lattice(&self) -> Lattice {
        Lattice { nx: self.nr, ny: self.ntheta, hx: self.log_step(), hy: self.theta_step(), periodic: [false, true] }
    }

    /// Rows `first..=last` as a grid of their own.
    pub fn rows(&self, first: usize, last: usize) -> Result<PolarGrid> {
        if first >= last || last >= self.nr {
            return Err(Error::InvalidArgument(format!("bad row range {first}..={last} of {}", self.nr)));
        }
        PolarGrid::new(last - first + 1, self.ntheta, self.radius(first), self.radius(last))
    }
}

/// `B̃(r, θ)`: the coefficient expressed in the moving frame `(e_r, e_θ)`.
#[derive(Debug, Clone)]
pub struct PolarField {
    pub grid: PolarGrid,
    pub entries: Vec<Sym2>,
    pub m: f64,
    pub big_m: f64,
}

impl PolarField {
    pub fn from_entries(grid: PolarGrid, entries: Vec<Sym2>, m: f64, big_m: f64) -> Result<Self> {
        if entries.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: entries.len() });
        }
        check_bounds(&entries, m, big_m)?;
        Ok(PolarField { grid, entries, m, big_m })
    }

    pub fn operator(&self) -> Result<DivAGradOperator> {
        DivAGradOperator::new(self.grid.lattice(), self.entries.clone(), BoundaryKind::NeumannPeriodic)
    }

    /// Rows `first..=last`, keeping the bounds of the parent field.
    pub fn rows(&self, first: usize, last: usize) -> Result<PolarField> {
        let grid = self.grid.rows(first, last)?;
        let mut entries = Vec::with_capacity(grid.len());
        for j in 0..grid.ntheta {
            for i in first..=last {
                entries.push(self.entries[self.grid.idx(i, j)]);
            }
        }
        Ok(PolarField { grid, entries, m: self.m, big_m: self.big_m })
    }
}

/// Samples `B(r cos θ, r sin θ)` and rotates it into the polar frame.
pub fn sample_polar(material: &dyn Material, grid: &PolarGrid) -> Result<PolarField> {
    let (m, big_m) = material.bounds();
    let mut entries = Vec::with_capacity(grid.len());
    for j in 0..grid.ntheta {
        let t = grid.theta(j);
        let (s, c) = t.sin_cos();
        for i in 0..grid.nr {
            let r = grid.radius(i);
            entries.push(material.eval([r * c, r * s]).rotated_frame(t));
        }
    }
    PolarField::from_entries(*grid, entries, m, big_m)
}

/// `f(r, θ) = κθ + h(r, θ)` with `h` periodic in `θ`.
#[derive(Debug, Clone)]
pub struct LiftedMap {
    pub grid: PolarGrid,
    pub kappa: i32,
    pub h: Vec<f64>,
}

impl LiftedMap {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.kappa as f64 * self.grid.theta(j) + self.h[self.grid.idx(i, j)]
    }
}

#[derive(Debug, Clone)]
pub struct MuResult {
    pub mu: f64,
    pub lift: LiftedMap,
    /// Largest radial conormal flux `|(B̃ Df)·e_r|` on the two boundary circles.
    pub neumann_defect: f64,
    pub residual: f64,
    pub iterations: usize,
    /// `2mπκ² log(β/α)` and `2Mπκ² log(β/α)`.
    pub bounds: (f64, f64),
}

/// Energy of the lift `κθ + h`: `2 D(h) + 2κ l·h + κ² ∫ B̃_θθ`, where `l` is the
/// load of the `θ` column.
fn lifted_energy(op: &DivAGradOperator, load: &[f64], kappa: f64, h: &[f64]) -> f64 {
    let cross: f64 = load.iter().zip(h).map(|(l, x)| l * x).sum();
    2.0 * op.energy(h) + 2.0 * kappa * cross + kappa * kappa * op.coefficient_integral().a22
}

pub fn compute_mu(b: &PolarField, kappa: i32, tol: f64) -> Result<MuResult> {
    compute_mu_from(b, kappa, tol, None)
}

/// [`compute_mu`] with an explicit starting guess for `h`.
pub fn compute_mu_from(b: &PolarField, kappa: i32, tol: f64, seed: Option<&[f64]>) -> Result<MuResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let grid = b.grid;
    let op = b.operator()?;
    let k = kappa as f64;
    let load = op.column_load(1);
    let load_scale = 1e-13 * b.big_m.max(1.0) * grid.log_step().max(grid.theta_step());
    let (h, residual, iterations) = if kappa == 0 || load.iter().all(|l| l.abs() <= load_scale) {
        (vec![0.0; grid.len()], 0.0, 0)
    } else {
        let rhs: Vec<f64> = load.iter().zip(op.volumes()).map(|(l, v)| k * l / v).collect();
        let sol = op.solve_cg_from(&rhs, seed, Constraint::ZeroMean, tol, CG_MAX_ITER)?;
        (sol.values, sol.residual, sol.iterations)
    };
    let mu = lifted_energy(&op, &load, k, &h);
    let scale = 2.0 * PI * k * k * grid.log_ratio();
    let bounds = (b.m * scale, b.big_m * scale);
    let slack = 1e-6 * mu.abs() + 1e-12;
    if mu < bounds.0 - slack || mu > bounds.1 + slack {
        return Err(Error::BoundViolated(format!("mu = {mu} outside [{}, {}]", bounds.0, bounds.1)));
    }
    let lift = LiftedMap { grid, kappa, h };
    let neumann_defect = neumann_defect(b, &lift);
    Ok(MuResult { mu, lift, neumann_defect, residual, iterations, bounds })
}

/// Radial conormal flux `(B̃_rr f_s + B̃_rθ f_θ)/r` at both boundary circles,
/// one-sided in `s` and centred in `θ`.
fn neumann_defect(b: &PolarField, f: &LiftedMap) -> f64 {
    let g = b.grid;
    let (hs, ht) = (g.log_step(), g.theta_step());
    let k = f.kappa as f64;
    let mut worst: f64 = 0.0;
    for (edge, inner) in [(0, 1), (g.nr - 1, g.nr - 2)] {
        let r = g.radius(edge);
        for j in 0..g.ntheta {
            let (jm, jp) = ((j + g.ntheta - 1) % g.ntheta, (j + 1) % g.ntheta);
            let h = |i: usize, j: usize| f.h[g.idx(i, j)];
            let mut fs = (h(inner, j) - h(edge, j)) / hs;
            if edge > inner {
                fs = -fs;
            }
            let ft = k + (h(edge, jp) - h(edge, jm)) / (2.0 * ht);
            let bt = b.entries[g.idx(edge, j)];
            worst = worst.max(((bt.a11 * fs + bt.a12 * ft) / r).abs());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct KappaScaling {
    /// `μ(B, α, β, 1)`.
    pub mu_unit: f64,
    /// `(κ, μ(κ), μ(κ)/μ(1))`.
    pub entries: Vec<(i32, f64, f64)>,
    /// Largest `|μ(κ)/μ(1) - κ²| / κ²` over nonzero `κ`.
    pub max_defect: f64,
    pub pass: bool,
}

/// Relative tolerance of the `κ²` law; the discrete problem satisfies it exactly.
pub const KAPPA_SCALING_TOL: f64 = 1e-6;

pub fn kappa_scaling_check(b: &PolarField, kappas: &[i32], tol: f64) -> Result<KappaScaling> {
    if kappas.len() < 2 {
        return Err(Error::InvalidArgument("the scaling check needs at least two kappa values".into()));
    }
    let mu_unit = compute_mu(b, 1, tol)?.mu;
    let mut entries = Vec::with_capacity(kappas.len());
    let mut max_defect: f64 = 0.0;
    for &kappa in kappas {
        let mu = compute_mu(b, kappa, tol)?.mu;
        let ratio = mu / mu_unit;
        let k2 = (kappa * kappa) as f64;
        if kappa != 0 {
            max_defect = max_defect.max((ratio - k2).abs() / k2);
        }
        entries.push((kappa, mu, ratio));
    }
    Ok(KappaScaling { mu_unit, entries, max_defect, pass: max_defect <= KAPPA_SCALING_TOL })
}

/// Energy per unit `s` carried by each ring: `∫ (f_s, f_θ)·B̃ (f_s, f_θ) dθ`,
/// read off the corners each node owns.
pub fn ring_energies(b: &PolarField, f: &LiftedMap) -> Vec<f64> {
    let g = b.grid;
    let (hs, ht) = (g.log_step(), g.theta_step());
    let w = 0.25 * hs * ht;
    let k = f.kappa as f64;
    let mut ring = vec![0.0; g.nr];
    for j in 0..g.ntheta {
        let j1 = (j + 1) % g.ntheta;
        for i in 0..g.nr - 1 {
            let h = |i: usize, j: usize| f.h[g.idx(i, j)];
            let dsb = (h(i + 1, j) - h(i, j)) / hs;
            let dst = (h(i + 1, j1) - h(i, j1)) / hs;
            let dtl = k + (h(i, j1) - h(i, j)) / ht;
            let dtr = k + (h(i + 1, j1) - h(i + 1, j)) / ht;
            let e = |ii: usize, jj: usize, gr: [f64; 2]| w * b.entries[g.idx(ii, jj)].quad(gr);
            ring[i] += e(i, j, [dsb, dtl]) + e(i, j1, [dst, dtl]);
            ring[i + 1] += e(i + 1, j, [dsb, dtr]) + e(i + 1, j1, [dst, dtr]);
        }
    }
    for (i, e) in ring.iter_mut().enumerate() {
        let width = if i == 0 || i + 1 == g.nr { 0.5 * hs } else { hs };
        *e /= width;
    }
    ring
}

#[derive(Debug, Clone)]
pub struct Competitor {
    /// The assembled map; `f(β, θ) = κθ` and `f(α, θ) = κ(θ + θ₀)` at every node.
    pub lift: LiftedMap,
    pub energy: f64,
    /// `μ(B, α, β, κ)` on the same grid.
    pub mu: f64,
    /// `energy - mu`.
    pub excess: f64,
    pub theta0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Number of grid radii in `J`.
    pub j_size: usize,
}

impl Competitor {
    /// `excess / κ²`, the constant the construction bounds uniformly.
    pub fn normalized_excess(&self) -> f64 {
        let k2 = (self.lift.kappa * self.lift.kappa) as f64;
        if k2 == 0.0 { 0.0 } else { self.excess / k2 }
    }
}

/// Builds the competitor with the prescribed boundary traces on an
/// octave-aligned grid with `per_octave` radial steps per doubling.
pub fn build_boundary_competitor(
    material: &dyn Material,
    alpha: f64,
    beta: f64,
    kappa: i32,
    per_octave: usize,
    ntheta: usize,
    tol: f64,
) -> Result<Competitor> {
    let grid = PolarGrid::octave_aligned(alpha, beta, per_octave, ntheta)?;
    let b = sample_polar(material, &grid)?;
    competitor_on(&b, per_octave, kappa, tol)
}

/// [`build_boundary_competitor`] on a sampled field whose grid has `per_octave`
/// steps per doubling of `r`.
pub fn competitor_on(b: &PolarField, per_octave: usize, kappa: i32, tol: f64) -> Result<Competitor> {
    let grid = b.grid;
    let expected = per_octave as f64 * (grid.beta / grid.alpha).log2();
    if per_octave == 0 || ((grid.nr - 1) as f64 - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(Error::InvalidArgument(format!("grid is not aligned to {per_octave} steps per octave")));
    }
    let k = kappa as f64;
    let op = b.operator()?;
    let load = op.column_load(1);
    let mu = compute_mu(b, kappa, tol)?.mu;
    let last = grid.nr - 1;
    let oct = per_octave;

    // β ≤ 4α: the pure angle is already within the bracket
    if last <= 2 * oct {
        let h = vec![0.0; grid.len()];
        let energy = lifted_energy(&op, &load, k, &h);
        let lift = LiftedMap { grid, kappa, h };
        return Ok(Competitor { lift, energy, mu, excess: energy - mu, theta0: 0.0, r1: grid.alpha, r2: grid.beta, j_size: 0 });
    }

    // inner minimizer on [2α, β/2], unit degree, lifted as θ + h₁
    let inner = b.rows(oct, last - oct)?;
    let f1 = compute_mu(&inner, 1, tol)?.lift;
    let ring = ring_energies(&inner, &f1);
    let angle = ring_energies(&inner, &LiftedMap { grid: inner.grid, kappa: 1, h: vec![0.0; inner.grid.len()] });
    let j_rows: Vec<usize> = (0..inner.grid.nr).filter(|&i| ring[i] <= angle[i] * (1.0 + RING_TOL)).collect();
    let (Some(&i1), Some(&i2)) = (j_rows.first(), j_rows.last()) else {
        return Err(Error::EmptyJ);
    };
    let ig = inner.grid;
    let shift = f1.h[ig.idx(i2, 0)];
    let f1_val = |i: usize, j: usize| ig.theta(j) + f1.h[ig.idx(i, j)] - shift;
    let theta0 = f1_val(i1, 0);

    // rows of r₁/2, r₁, r₂, 2r₂ on the full grid
    let (a1, a2) = (i1 + oct, i2 + oct);
    let (lo, hi) = (a1 - oct, a2 + oct);
    let hs = grid.log_step();
    let outer_blend = |i: usize, j: usize| {
        let t = ((i as f64 - a2 as f64) * hs).exp() - 1.0;
        (1.0 - t) * f1_val(i2, j) + t * grid.theta(j)
    };
    let inner_blend = |i: usize, j: usize| {
        let rho = ((i as f64 - a1 as f64) * hs).exp();
        (2.0 * rho - 1.0) * f1_val(i1, j) + 2.0 * (1.0 - rho) * (grid.theta(j) + theta0)
    };
    let value = |i: usize, j: usize| -> f64 {
        if i >= hi {
            grid.theta(j)
        } else if i > a2 {
            outer_blend(i, j)
        } else if i >= a1 {
            f1_val(i - oct, j)
        } else if i > lo {
            inner_blend(i, j)
        } else {
            grid.theta(j) + theta0
        }
    };

    let mut seam: f64 = 0.0;
    for j in 0..grid.ntheta {
        let t = grid.theta(j);
        seam = seam
            .max((outer_blend(hi, j) - t).abs())
            .max((outer_blend(a2, j) - f1_val(i2, j)).abs())
            .max((inner_blend(a1, j) - f1_val(i1, j)).abs())
            .max((inner_blend(lo, j) - (t + theta0)).abs());
    }
    if seam > SEAM_TOL {
        return Err(Error::SeamMismatch(seam));
    }

    let mut h = vec![0.0; grid.len()];
    for j in 0..grid.ntheta {
        for i in 0..grid.nr {
            h[grid.idx(i, j)] = value(i, j) - grid.theta(j);
        }
    }
    let energy = k * k * lifted_energy(&op, &load, 1.0, &h);
    h.iter_mut().for_each(|x| *x *= k);
    let lift = LiftedMap { grid, kappa, h };
    Ok(Competitor {
        lift,
        energy,
        mu,
        excess: energy - mu,
        theta0,
        r1: grid.radius(a1),
        r2: grid.radius(a2),
        j_size: j_rows.len(),
    })
}
