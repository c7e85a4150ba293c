//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gl::MIN_CORE_NODES;
use crate::grid::Grid2D;
use crate::material::{Checkerboard, Constant, Laminate, Material, Sym2};

/// Named periodic materials: `identity`, `const:c`, `laminate:mean,amp`, `checker:mean,amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialSpec {
    Identity,
    Const(f64),
    Laminate { mean: f64, amp: f64 },
    Checker { mean: f64, amp: f64 },
}

impl MaterialSpec {
    pub fn build(&self) -> Box<dyn Material> {
        match *self {
            MaterialSpec::Identity => Box::new(Constant(Sym2::identity())),
            MaterialSpec::Const(c) => Box::new(Constant(Sym2::scalar(c))),
            MaterialSpec::Laminate { mean, amp } => Box::new(Laminate { mean, amp }),
            MaterialSpec::Checker { mean, amp } => Box::new(Checkerboard { mean, amp }),
        }
    }
}

impl FromStr for MaterialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = parse_list(args)?;
        let bad = || Error::Config(format!("bad material '{s}'"));
        let spec = match (name, nums.as_slice()) {
            ("identity", []) => MaterialSpec::Identity,
            ("const", &[c]) if c > 0.0 => MaterialSpec::Const(c),
            ("laminate", &[mean, amp]) => MaterialSpec::Laminate { mean, amp },
            ("checker", &[mean, amp]) => MaterialSpec::Checker { mean, amp },
            _ => return Err(bad()),
        };
        if let MaterialSpec::Laminate { mean, amp } | MaterialSpec::Checker { mean, amp } = spec {
            if !(mean - amp.abs() > 0.0) {
                return Err(Error::Config(format!("material '{s}' is not uniformly elliptic")));
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for MaterialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaterialSpec::Identity => write!(f, "identity"),
            MaterialSpec::Const(c) => write!(f, "const:{c}"),
            MaterialSpec::Laminate { mean, amp } => write!(f, "laminate:{mean},{amp}"),
            MaterialSpec::Checker { mean, amp } => write!(f, "checker:{mean},{amp}"),
        }
    }
}

/// Annulus sweep settings: `μ` and the boundary competitor for each `β/α`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusConfig {
    pub material: MaterialSpec,
    pub alpha: f64,
    pub ratios: Vec<f64>,
    pub kappa: i32,
    pub per_octave: usize,
    pub ntheta: usize,
    pub tol: f64,
}

impl Default for AnnulusConfig {
    fn default() -> Self {
        AnnulusConfig {
            material: MaterialSpec::Laminate { mean: 2.0, amp: 1.0 },
            alpha: 0.25,
            ratios: vec![8.0, 32.0, 128.0],
            kappa: 1,
            per_octave: 8,
            ntheta: 1024,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub material: MaterialSpec,
    /// Nodes per side of the domain grid.
    pub grid: usize,
    /// Per-index grid sizes (`grid.N = nodes`), overriding `grid`.
    pub grid_overrides: BTreeMap<usize, usize>,
    pub degree: u32,
    pub deltas: Vec<f64>,
    /// `ε` candidates for each `δ_n`, from the `epsilons.N` keys.
    pub epsilons: Vec<Vec<f64>>,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub cell_grid: usize,
    pub cell_tol: f64,
    pub mass_ratio_ceiling: f64,
    pub residual_slack: f64,
    /// Largest domain grid (in nodes) a stage may allocate.
    pub max_nodes: usize,
    pub output: PathBuf,
    pub annulus: AnnulusConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            material: MaterialSpec::Identity,
            grid: 257,
            grid_overrides: BTreeMap::new(),
            degree: 1,
            deltas: Vec::new(),
            epsilons: Vec::new(),
            tol_grad: 1e-8,
            max_iter: 20_000,
            cell_grid: 64,
            cell_tol: 1e-10,
            mass_ratio_ceiling: 3.0,
            residual_slack: 0.2,
            max_nodes: 1_100_000,
            output: PathBuf::from("homogl-out"),
            annulus: AnnulusConfig::default(),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("'{t}' is not a number"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

impl ExperimentConfig {
    /// Parses and validates a config; unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeMap::new();
        let mut eps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(Error::Config(format!("line {}: repeated key '{key}'", lineno + 1)));
            }
            if let Some(n) = key.strip_prefix("epsilons.") {
                eps.insert(parse_one(key, n)?, parse_list(value)?);
            } else {
                cfg.set(key, value)?;
            }
        }
        if !eps.is_empty() {
            if eps.keys().copied().ne(1..=eps.len()) {
                return Err(Error::Config("epsilons.N keys must be numbered 1, 2, ... without gaps".into()));
            }
            cfg.epsilons = eps.into_values().collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; `epsilons.N` replaces (or appends) the list for index `N`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "material" => self.material = value.parse()?,
            "grid" => self.grid = parse_one(key, value)?,
            "degree" => self.degree = parse_one(key, value)?,
            "deltas" => self.deltas = parse_list(value)?,
            "tol_grad" => self.tol_grad = parse_one(key, value)?,
            "max_iter" => self.max_iter = parse_one(key, value)?,
            "cell_grid" => self.cell_grid = parse_one(key, value)?,
            "cell_tol" => self.cell_tol = parse_one(key, value)?,
            "mass_ratio_ceiling" => self.mass_ratio_ceiling = parse_one(key, value)?,
            "residual_slack" => self.residual_slack = parse_one(key, value)?,
            "max_nodes" => self.max_nodes = parse_one(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            "annulus.material" => self.annulus.material = value.parse()?,
            "annulus.alpha" => self.annulus.alpha = parse_one(key, value)?,
            "annulus.ratios" => self.annulus.ratios = parse_list(value)?,
            "annulus.kappa" => self.annulus.kappa = parse_one(key, value)?,
            "annulus.per_octave" => self.annulus.per_octave = parse_one(key, value)?,
            "annulus.ntheta" => self.annulus.ntheta = parse_one(key, value)?,
            "annulus.tol" => self.annulus.tol = parse_one(key, value)?,
            _ => {
                if let Some(n) = key.strip_prefix("grid.") {
                    let n: usize = parse_one(key, n)?;
                    self.grid_overrides.insert(n, parse_one(key, value)?);
                } else if let Some(n) = key.strip_prefix("epsilons.") {
                    let n: usize = parse_one(key, n)?;
                    if n == 0 || n > self.epsilons.len() + 1 {
                        return Err(Error::Config(format!("'{key}' skips an index")));
                    }
                    let list = parse_list(value)?;
                    if n == self.epsilons.len() + 1 {
                        self.epsilons.push(list);
                    } else {
                        self.epsilons[n - 1] = list;
                    }
                } else {
                    return Err(Error::Config(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }

    /// Applies `key=value` overrides, then revalidates.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        for kv in overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override '{kv}' is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        self.validate()?;
        Ok(self)
    }

    /// Domain grid size for index `n` (1-based).
    pub fn grid_for(&self, n: usize) -> usize {
        self.grid_overrides.get(&n).copied().unwrap_or(self.grid)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.grid < 3 || self.grid_overrides.values().any(|&g| g < 3) {
            return cfg("grids need at least 3 nodes per side".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return cfg(format!("deltas must be positive: {:?}", self.deltas));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return cfg(format!("deltas must be strictly decreasing: {:?}", self.deltas));
        }
        if self.epsilons.len() != self.deltas.len() {
            return cfg(format!("{} epsilon lists for {} deltas", self.epsilons.len(), self.deltas.len()));
        }
        for (idx, (delta, cands)) in self.deltas.iter().zip(&self.epsilons).enumerate() {
            let n = idx + 1;
            if cands.is_empty() {
                return cfg(format!("no epsilon candidates for n = {n}"));
            }
            let h = Grid2D::square_domain(self.grid_for(n))?.h;
            let ceiling = delta * delta / n as f64;
            let floor = MIN_CORE_NODES * h;
            if let Some(e) = cands.iter().find(|&&e| !(e < ceiling)) {
                return cfg(format!("epsilon {e} for n = {n} is not below delta^2/n = {ceiling}"));
            }
            if let Some(e) = cands.iter().find(|&&e| e < floor * (1.0 - 1e-12)) {
                return cfg(format!("epsilon {e} for n = {n} is below the resolution floor {floor}"));
            }
        }
        let positive = [self.tol_grad, self.cell_tol, self.mass_ratio_ceiling, self.annulus.alpha, self.annulus.tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.residual_slack < 0.0 {
            return cfg("tolerances, ceilings and annulus.alpha must be positive".into());
        }
        if self.cell_grid < 4 || self.max_iter == 0 || self.annulus.per_octave == 0 || self.annulus.ntheta < 16 {
            return cfg("cell_grid >= 4, max_iter >= 1, annulus.per_octave >= 1 and annulus.ntheta >= 16 are required".into());
        }
        if self.annulus.ratios.iter().any(|r| !(*r > 1.0)) {
            return cfg("annulus ratios must exceed 1".into());
        }
        Ok(())
    }
}
