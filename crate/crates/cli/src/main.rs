//! `homogl`: command-line access to the cell problem, the GL minimizer,
//! unfolding, vortex detection, the annulus energy and the full sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homogl::annulus::{build_boundary_competitor, compute_mu, sample_polar, LiftedMap, PolarGrid};
use homogl::cell::{solve_cell_problem, MAX_ASYMMETRY};
use homogl::gl::{minimize, GlProblem, Schedule};
use homogl::grid::Grid2D;
use homogl::io::{FieldFile, write_field};
use homogl::material::sample_matrix_field;
use homogl::pipeline::report::{self, write_report};
use homogl::pipeline::sweep::DIAGNOSTIC_RADIUS;
use homogl::pipeline::{full_report, run_sweep, ExperimentConfig, FullReport, MaterialSpec};
use homogl::unfolding::extract_two_scale_pair;
use homogl::vortex::{detect_bad_disks, BAD_SET_THRESHOLD};
use homogl::{Error, Result};

#[derive(Parser)]
#[command(name = "homogl", version, about = "Ginzburg-Landau homogenization toolkit")]
struct Cli {
    /// Flat `key = value` experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem; print A⁰ as CSV and write the correctors.
    Cell(CellArgs),
    /// Minimize the GL energy for one (ε, δ).
    Minimize(MinimizeArgs),
    /// Per-cell two-scale fit of a stored field.
    Unfold(UnfoldArgs),
    /// Vortex table of a stored field.
    Vortex(VortexArgs),
    /// μ on an annulus, optionally with the boundary competitor.
    Annulus(AnnulusArgs),
    /// Run the configured (δ, ε) sweep and write its tables.
    Sweep(OutArgs),
    /// Sweep, annulus table and every acceptance criterion.
    Report(OutArgs),
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    material: Option<MaterialSpec>,
    /// Nodes per side of the periodic cell grid.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Directory for `a0.csv`, `chi1.hgl`, `chi2.hgl`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long)]
    material: Option<MaterialSpec>,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    grid: Option<usize>,
    /// Stop once the projected gradient sup-norm is below this.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_name = "PATH")]
    seed_file: Option<PathBuf>,
    #[arg(long, default_value = "u.hgl")]
    out: PathBuf,
}

#[derive(Args)]
struct UnfoldArgs {
    /// Complex field file on the square domain.
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    material: Option<MaterialSpec>,
    #[arg(long)]
    cell_grid: Option<usize>,
    /// Excludes cells near the vortices detected at this ε.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VortexArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = BAD_SET_THRESHOLD)]
    threshold: f64,
    /// Expected total degree; a mismatch is a criterion failure.
    #[arg(long)]
    degree: Option<i32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnnulusArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<i32>,
    /// Coefficient field `B`.
    #[arg(long)]
    field: Option<MaterialSpec>,
    #[arg(long)]
    per_octave: Option<usize>,
    #[arg(long)]
    ntheta: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Also build the boundary competitor (needs β/α a power of 2^(1/per_octave)).
    #[arg(long)]
    competitor: bool,
    /// Polar grid file for the lift `f = κθ + h`.
    #[arg(long, default_value = "lift.hgl")]
    out: PathBuf,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Pass,
    CriterionFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass { Outcome::Pass } else { Outcome::CriterionFailed }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(cli.overrides.iter().map(String::as_str))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cell(cfg: &ExperimentConfig, args: &CellArgs) -> Result<Outcome> {
    let spec = args.material.unwrap_or(cfg.material);
    let material = spec.build();
    let grid = Grid2D::unit_cell(args.grid.unwrap_or(cfg.cell_grid))?;
    let sol = solve_cell_problem(&sample_matrix_field(material.as_ref(), &grid, None)?, args.tol.unwrap_or(cfg.cell_tol))?;
    let a = sol.a0;
    let csv = format!("{:.12e},{:.12e}\n{:.12e},{:.12e}\n", a.a11, a.a12, a.a12, a.a22);
    print!("{csv}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("a0.csv"), &csv)?;
        write_field(&sol.chi[0], dir.join("chi1.hgl"))?;
        write_field(&sol.chi[1], dir.join("chi2.hgl"))?;
    }
    let (lo, hi) = a.eigenvalues();
    let (m, big_m) = material.bounds();
    let slack = 1e-9 * big_m;
    eprintln!("asymmetry = {:.3e}, eigenvalues = ({lo:.6}, {hi:.6})", sol.asymmetry);
    Ok(Outcome::from_pass(sol.asymmetry <= MAX_ASYMMETRY && lo >= m - slack && hi <= big_m + slack))
}

fn minimize_cmd(cfg: &ExperimentConfig, args: &MinimizeArgs) -> Result<Outcome> {
    let spec = args.material.unwrap_or(cfg.material);
    let material = spec.build();
    let n = args.grid.unwrap_or(cfg.grid);
    let degree = args.degree.unwrap_or(cfg.degree);
    let tol = args.tol.unwrap_or(cfg.tol_grad);
    let p = GlProblem::from_material(material.as_ref(), n, args.epsilon, args.delta, degree)?;
    let seed = match &args.seed_file {
        Some(path) => {
            let u = FieldFile::read(path)?.into_complex()?;
            p.grid().check_same(&u.grid, "seed")?;
            Some(u)
        }
        None => None,
    };
    let schedule = Schedule { max_iter: args.max_iter.unwrap_or(cfg.max_iter), ..Schedule::default() };
    let r = minimize(&p, seed.as_ref(), schedule, tol)?;
    write_field(&r.u, &args.out)?;
    let max_modulus = r.u.max_modulus();
    let monotone = r.history.windows(2).all(|w| w[1] <= w[0]);
    let converged = r.grad_residual <= tol;
    let mut s = String::new();
    let _ = writeln!(s, "material = {spec}");
    let _ = writeln!(s, "grid = {n}");
    let _ = writeln!(s, "degree = {degree}");
    let _ = writeln!(s, "delta = {:.12e}", args.delta);
    let _ = writeln!(s, "epsilon = {:.12e}", args.epsilon);
    let _ = writeln!(s, "energy = {:.12e}", r.energy);
    let _ = writeln!(s, "dirichlet = {:.12e}", r.dirichlet_part);
    let _ = writeln!(s, "potential = {:.12e}", r.potential_part);
    let _ = writeln!(s, "el_residual = {:.12e}", r.el_residual);
    let _ = writeln!(s, "grad_residual = {:.12e}", r.grad_residual);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let _ = writeln!(s, "max_modulus = {max_modulus:.12e}");
    let _ = writeln!(s, "monotone = {monotone}");
    let _ = writeln!(s, "converged = {converged}");
    let _ = writeln!(s, "field = {}", args.out.display());
    print!("{s}");
    Ok(Outcome::from_pass(converged && monotone && max_modulus <= 1.0 + 1e-12))
}

fn unfold_cmd(cfg: &ExperimentConfig, args: &UnfoldArgs) -> Result<Outcome> {
    let u = FieldFile::read(&args.field)?.into_complex()?;
    let spec = args.material.unwrap_or(cfg.material);
    let grid = Grid2D::unit_cell(args.cell_grid.unwrap_or(cfg.cell_grid))?;
    let cell = solve_cell_problem(&sample_matrix_field(spec.build().as_ref(), &grid, None)?, cfg.cell_tol)?;
    let exclusions = match args.epsilon {
        Some(eps) => detect_bad_disks(&u, eps, BAD_SET_THRESHOLD)?.disks(DIAGNOSTIC_RADIUS),
        None => Vec::new(),
    };
    let fit = extract_two_scale_pair(&u, args.delta, &cell, &exclusions)?;
    let mut s = String::from("anchor_x,anchor_y,g1_re,g1_im,g2_re,g2_im,c1_re,c1_im,c2_re,c2_im,residual\n");
    for c in &fit.cells {
        let [g1, g2] = c.macro_gradient;
        let [c1, c2] = c.coefficients;
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            c.anchor[0], c.anchor[1], g1.re, g1.im, g2.re, g2.im, c1.re, c1.im, c2.re, c2.im, c.residual
        );
    }
    emit(&s, args.out.as_deref())?;
    eprintln!("cells = {}, relative_residual = {:.6e}, sampling = {:?}", fit.cells.len(), fit.relative_residual, fit.sampling);
    Ok(Outcome::Pass)
}

fn vortex_cmd(args: &VortexArgs) -> Result<Outcome> {
    let u = FieldFile::read(&args.field)?.into_complex()?;
    let set = detect_bad_disks(&u, args.epsilon, args.threshold)?;
    let mut s = String::from("center_x,center_y,radius,degree,lambda\n");
    for v in &set.vortices {
        let _ = writeln!(s, "{:.12e},{:.12e},{:.12e},{},{:.12e}", v.center[0], v.center[1], v.radius, v.degree, v.radius / set.epsilon);
    }
    emit(&s, args.out.as_deref())?;
    Ok(Outcome::from_pass(args.degree.is_none_or(|d| d == set.total_degree())))
}

/// The lift as a polar grid file: rows are radii in `log r` from `ln α` with
/// step `h`, columns the `θ` nodes with step `2π/nθ`.
fn lift_file(lift: &LiftedMap) -> FieldFile {
    let g = lift.grid;
    let data = (0..g.ntheta).flat_map(|j| (0..g.nr).map(move |i| (i, j))).map(|(i, j)| lift.value(i, j)).collect();
    FieldFile { nx: g.nr, ny: g.ntheta, h: g.log_step(), origin: [g.alpha.ln(), 0.0], components: 1, data }
}

fn annulus_cmd(cfg: &ExperimentConfig, args: &AnnulusArgs) -> Result<Outcome> {
    let a = &cfg.annulus;
    let alpha = args.alpha.unwrap_or(a.alpha);
    let kappa = args.kappa.unwrap_or(a.kappa);
    let per_octave = args.per_octave.unwrap_or(a.per_octave);
    let ntheta = args.ntheta.unwrap_or(a.ntheta);
    let tol = args.tol.unwrap_or(a.tol);
    let spec = args.field.unwrap_or(a.material);
    let material = spec.build();
    if !(alpha > 0.0 && args.beta > alpha) {
        return Err(Error::InvalidArgument(format!("need 0 < alpha < beta, got ({alpha}, {})", args.beta)));
    }
    let steps = (per_octave as f64 * (args.beta / alpha).log2()).round().max(1.0) as usize;
    let grid = PolarGrid::new(steps + 1, ntheta, alpha, args.beta)?;
    let b = sample_polar(material.as_ref(), &grid)?;
    let r = compute_mu(&b, kappa, tol)?;
    let mut s = String::new();
    let _ = writeln!(s, "field = {spec}");
    let _ = writeln!(s, "alpha = {alpha:.12e}");
    let _ = writeln!(s, "beta = {:.12e}", args.beta);
    let _ = writeln!(s, "kappa = {kappa}");
    let _ = writeln!(s, "nr = {}", grid.nr);
    let _ = writeln!(s, "ntheta = {ntheta}");
    let _ = writeln!(s, "mu = {:.12e}", r.mu);
    let _ = writeln!(s, "lower = {:.12e}", r.bounds.0);
    let _ = writeln!(s, "upper = {:.12e}", r.bounds.1);
    let _ = writeln!(s, "neumann_defect = {:.12e}", r.neumann_defect);
    let _ = writeln!(s, "residual = {:.12e}", r.residual);
    let _ = writeln!(s, "iterations = {}", r.iterations);
    let slack = 1e-6 * r.mu.abs().max(1.0);
    let mut pass = r.mu >= r.bounds.0 - slack && r.mu <= r.bounds.1 + slack;
    if args.competitor {
        let c = build_boundary_competitor(material.as_ref(), alpha, args.beta, kappa, per_octave, ntheta, tol)?;
        let _ = writeln!(s, "competitor_energy = {:.12e}", c.energy);
        let _ = writeln!(s, "excess = {:.12e}", c.excess);
        let _ = writeln!(s, "normalized_excess = {:.12e}", c.normalized_excess());
        let _ = writeln!(s, "theta0 = {:.12e}", c.theta0);
        let _ = writeln!(s, "r1 = {:.12e}", c.r1);
        let _ = writeln!(s, "r2 = {:.12e}", c.r2);
        let _ = writeln!(s, "j_size = {}", c.j_size);
        pass &= c.excess >= -slack;
    }
    lift_file(&r.lift).write(&args.out)?;
    let _ = writeln!(s, "lift = {}", args.out.display());
    print!("{s}");
    Ok(Outcome::from_pass(pass))
}

fn sweep_cmd(cfg: &ExperimentConfig, args: &OutArgs) -> Result<Outcome> {
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    let sweep = run_sweep(cfg)?;
    let pass = sweep.verdicts.converged();
    let rep = FullReport { sweep: Some(sweep), mu_rows: Vec::new(), criteria: Vec::new(), files: Vec::new() };
    let files = write_report(&dir, cfg, &rep)?;
    print!("{}", report::summary_text(cfg, &rep));
    println!("converged: {}", if pass { "yes" } else { "no" });
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(Outcome::from_pass(pass))
}

fn report_cmd(cfg: &ExperimentConfig, args: &OutArgs) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    if let Some(dir) = &args.out {
        cfg.output = dir.clone();
    }
    let rep = full_report(&cfg)?;
    print!("{}", report::summary_text(&cfg, &rep));
    Ok(Outcome::from_pass(rep.all_pass()))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Cell(a) => cell(&cfg, a),
        Command::Minimize(a) => minimize_cmd(&cfg, a),
        Command::Unfold(a) => unfold_cmd(&cfg, a),
        Command::Vortex(a) => vortex_cmd(a),
        Command::Annulus(a) => annulus_cmd(&cfg, a),
        Command::Sweep(a) => sweep_cmd(&cfg, a),
        Command::Report(a) => report_cmd(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CriterionFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
