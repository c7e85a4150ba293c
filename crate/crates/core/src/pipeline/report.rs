//! CSV tables and the text summary.
//!
//! Column orders are fixed; numbers use `{:.12e}` so identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::annulus::{compute_mu, sample_polar, Competitor, PolarGrid};
use crate::error::Result;
use crate::io::FieldFile;

use super::config::ExperimentConfig;
use super::criteria::{self, competitor_sweep, Criterion};
use super::sweep::{run_sweep, ConvergenceReport, Stage, EXCLUSION_RADII};

pub const ENERGY_HEADER: &str = "n,delta,grid,epsilon,log_inv_epsilon,energy,dirichlet,potential,iterations,grad_residual,max_modulus";
pub const MASS_HEADER: &str = "n,delta,radius,mass";
pub const RESIDUAL_HEADER: &str = "n,delta,homogenized_defect,wedge_defect,two_scale_residual,two_scale_cells";
pub const VORTEX_HEADER: &str = "n,index,x,y,radius,degree,loop_radius,min_modulus";
pub const A0_HEADER: &str = "a11,a12,a22,asymmetry";
pub const STAGE_HEADER: &str = "n,delta,status,field,error";
pub const MU_HEADER: &str = "ratio,alpha,beta,kappa,mu,lower,upper,neumann_defect,competitor_energy,excess,normalized_excess,theta0,r1,r2,j_size";

/// One row of the annulus table.
#[derive(Debug, Clone)]
pub struct MuRow {
    pub ratio: f64,
    pub mu: f64,
    pub bounds: (f64, f64),
    pub neumann_defect: f64,
    pub competitor: Competitor,
}

#[derive(Debug, Clone)]
pub struct FullReport {
    pub sweep: Option<ConvergenceReport>,
    pub mu_rows: Vec<MuRow>,
    pub criteria: Vec<Criterion>,
    pub files: Vec<PathBuf>,
}

impl FullReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

fn e(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn field_name(n: usize) -> String {
    format!("u_n{n}.hgl")
}

/// `μ` and the competitor for every ratio of the annulus config.
pub fn mu_table(cfg: &ExperimentConfig) -> Result<Vec<MuRow>> {
    let a = &cfg.annulus;
    let mat = a.material.build();
    competitor_sweep(a)?
        .into_iter()
        .map(|(ratio, competitor)| {
            let grid = PolarGrid::octave_aligned(a.alpha, a.alpha * ratio, a.per_octave, a.ntheta)?;
            let r = compute_mu(&sample_polar(mat.as_ref(), &grid)?, a.kappa, a.tol)?;
            Ok(MuRow { ratio, mu: r.mu, bounds: r.bounds, neumann_defect: r.neumann_defect, competitor })
        })
        .collect()
}

pub fn energy_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{ENERGY_HEADER}\n");
    for r in sweep.into_iter().flat_map(|s| s.rows()) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            e(r.delta),
            r.grid,
            e(r.epsilon),
            e((1.0 / r.epsilon).ln()),
            e(r.energy),
            e(r.dirichlet),
            e(r.potential),
            r.iterations,
            e(r.grad_residual),
            e(r.max_modulus)
        );
    }
    s
}

pub fn mass_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{MASS_HEADER}\n");
    for r in sweep.into_iter().flat_map(|s| s.rows()) {
        for (radius, m) in EXCLUSION_RADII.iter().zip(&r.exterior_mass) {
            let _ = writeln!(s, "{},{},{},{}", r.n, e(r.delta), e(*radius), e(*m));
        }
    }
    s
}

pub fn residual_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{RESIDUAL_HEADER}\n");
    for r in sweep.into_iter().flat_map(|s| s.rows()) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            e(r.delta),
            e(r.residual.defect),
            e(r.residual.wedge_defect),
            e(r.two_scale_residual),
            r.two_scale_cells
        );
    }
    s
}

pub fn vortex_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{VORTEX_HEADER}\n");
    for r in sweep.into_iter().flat_map(|s| s.rows()) {
        for (i, v) in r.vortices.vortices.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.n,
                i,
                e(v.center[0]),
                e(v.center[1]),
                e(v.radius),
                v.degree,
                e(v.loop_radius),
                e(v.min_modulus)
            );
        }
    }
    s
}

pub fn a0_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{A0_HEADER}\n");
    if let Some(rep) = sweep {
        let _ = writeln!(s, "{},{},{},{}", e(rep.a0.a11), e(rep.a0.a12), e(rep.a0.a22), e(rep.a0_asymmetry));
    }
    s
}

pub fn stage_csv(sweep: Option<&ConvergenceReport>) -> String {
    let mut s = format!("{STAGE_HEADER}\n");
    for stage in sweep.into_iter().flat_map(|s| &s.stages) {
        match stage {
            Stage::Done(r) => {
                let _ = writeln!(s, "{},{},ok,{},", r.n, e(r.delta), field_name(r.n));
            }
            Stage::Failed { n, delta, error } => {
                let _ = writeln!(s, "{},{},failed,,\"{}\"", n, e(*delta), error.replace('"', "'"));
            }
        }
    }
    s
}

pub fn mu_csv(cfg: &ExperimentConfig, rows: &[MuRow]) -> String {
    let mut s = format!("{MU_HEADER}\n");
    let a = &cfg.annulus;
    for r in rows {
        let c = &r.competitor;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e(r.ratio),
            e(a.alpha),
            e(a.alpha * r.ratio),
            a.kappa,
            e(r.mu),
            e(r.bounds.0),
            e(r.bounds.1),
            e(r.neumann_defect),
            e(c.energy),
            e(c.excess),
            e(c.normalized_excess()),
            e(c.theta0),
            e(c.r1),
            e(c.r2),
            c.j_size
        );
    }
    s
}

pub fn summary_text(cfg: &ExperimentConfig, report: &FullReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "material: {}", cfg.material);
    let _ = writeln!(s, "degree: {}", cfg.degree);
    let Some(sweep) = &report.sweep else {
        s.push_str("no runs\n");
        return s;
    };
    let _ = writeln!(s, "stages: {} ({} ok)", sweep.stages.len(), sweep.rows().count());
    let v = &sweep.verdicts;
    let yn = |b: bool| if b { "yes" } else { "no" };
    let _ = writeln!(s, "exterior masses bounded: {} (ratios {:?})", yn(v.mass_bounded), v.mass_ratio);
    let _ = writeln!(s, "vortex degrees stable: {}", yn(v.degrees_stable));
    let _ = writeln!(s, "degree sum equals d: {}", yn(v.degree_sum_ok));
    let _ = writeln!(s, "residual non-increasing: {}", yn(v.residual_non_increasing));
    let _ = writeln!(s, "two-scale residual decreasing: {}", yn(v.two_scale_decreasing));
    s.push('\n');
    for c in &report.criteria {
        let _ = writeln!(s, "{c}");
    }
    let _ = writeln!(s, "\noverall: {}", if report.all_pass() { "PASS" } else { "FAIL" });
    s
}

/// Writes every table and the summary into `dir`; returns the paths written.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &FullReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let sweep = report.sweep.as_ref();
    let tables = [
        ("energy.csv", energy_csv(sweep)),
        ("exterior_mass.csv", mass_csv(sweep)),
        ("residual.csv", residual_csv(sweep)),
        ("vortices.csv", vortex_csv(sweep)),
        ("a0.csv", a0_csv(sweep)),
        ("stages.csv", stage_csv(sweep)),
        ("mu.csv", mu_csv(cfg, &report.mu_rows)),
        ("summary.txt", summary_text(cfg, report)),
    ];
    let mut files = Vec::new();
    for (name, body) in tables {
        let path = dir.join(name);
        fs::write(&path, body)?;
        files.push(path);
    }
    for r in sweep.into_iter().flat_map(|s| s.rows()) {
        let path = dir.join(field_name(r.n));
        FieldFile::from(&r.u).write(&path)?;
        files.push(path);
    }
    Ok(files)
}

/// Runs the configured sweep and annulus table, evaluates the criteria and
/// writes everything into the config's output directory.
pub fn full_report(cfg: &ExperimentConfig) -> Result<FullReport> {
    full_report_in(cfg, &cfg.output)
}

pub fn full_report_in(cfg: &ExperimentConfig, dir: &Path) -> Result<FullReport> {
    let mut report = FullReport { sweep: None, mu_rows: Vec::new(), criteria: Vec::new(), files: Vec::new() };
    if !cfg.deltas.is_empty() {
        let start = std::time::Instant::now();
        let sweep = run_sweep(cfg)?;
        let elapsed = start.elapsed().as_secs_f64();
        report.mu_rows = mu_table(cfg)?;
        report.criteria = vec![
            criteria::ac1_cell_problem(),
            criteria::ac2_a0_sanity(),
            criteria::ac3_unfolding(),
            criteria::ac4_energy_law(),
            criteria::ac5_maximum_principle(),
            criteria::ac6_vortices(),
            criteria::ac7_annulus(),
            criteria::ac8_competitor(&cfg.annulus),
            criteria::ac9_from_report(&sweep, elapsed),
            criteria::ac10_linear_paradigm(),
        ];
        report.sweep = Some(sweep);
    }
    report.files = write_report(dir, cfg, &report)?;
    Ok(report)
}
