//! Run configuration: JSON schema, validation and the objects it describes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

use wforge_core::dirac::{
    analytic_family, solve_fixed_point, Family, Potential, SolverOptions, SpinorSolution, SystemKind,
};
use wforge_core::io::{load_solution, read_field};
use wforge_core::weierstrass::Block;
use wforge_core::{BoundaryMode, ComplexGrid, ScalarField};

/// A configuration problem, reported with the offending field path.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Func {
    Const,
    Cos,
    Sin,
    Exp,
}

/// `amp * func(kx x + ky y + phase)`; `const` ignores the linear form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    #[serde(rename = "fn")]
    pub func: Func,
    pub amp: f64,
    #[serde(default)]
    pub kx: f64,
    #[serde(default)]
    pub ky: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Term {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let arg = self.kx * x + self.ky * y + self.phase;
        self.amp
            * match self.func {
                Func::Const => 1.0,
                Func::Cos => arg.cos(),
                Func::Sin => arg.sin(),
                Func::Exp => arg.exp(),
            }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Sum of whitelisted terms.
    Expr { terms: Vec<Term> },
    /// A stored field; the path is relative to the config file.
    Csv { path: PathBuf },
    /// An exact family, which also supplies the solutions.
    Family { family: Family },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub psi: Complex64,
    pub phi: Complex64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSpec {
    /// Fixed-point solver started from constant seeds.
    Solver {
        seeds: Vec<Seed>,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_damping")]
        damping: f64,
    },
    /// Manifests written by `synth` with `outputs.spinors`.
    Files { manifests: Vec<PathBuf> },
}

fn default_max_iter() -> usize {
    500
}

fn default_damping() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientConfig {
    R3,
    R4,
    Split22,
    /// The R^4 chart read with the metric `diag(1, 1, 1, -1)`.
    Minkowski4,
    S4 { k0: f64 },
    /// Conformally flat metric `e^{2 sigma}`, sigma read from a field file.
    Conformal4 { sigma: PathBuf },
    /// Blocks `[a]` (R^3 from solution a) and `[a, b]` (R^4 from a pair).
    Stacked { plan: Vec<Vec<usize>> },
    Cn { coeffs: Vec<Vec<Vec<Complex64>>> },
}

impl AmbientConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            AmbientConfig::R3 => "r3",
            AmbientConfig::R4 => "r4",
            AmbientConfig::Split22 => "split22",
            AmbientConfig::Minkowski4 => "minkowski4",
            AmbientConfig::S4 { .. } => "s4",
            AmbientConfig::Conformal4 { .. } => "conformal4",
            AmbientConfig::Stacked { .. } => "stacked",
            AmbientConfig::Cn { .. } => "cn",
        }
    }

    pub fn blocks(&self) -> Option<Vec<Block>> {
        match self {
            AmbientConfig::Stacked { plan } => Some(
                plan.iter()
                    .map(|b| match b.as_slice() {
                        [a] => Block::Triple(*a),
                        [a, c] => Block::Quad(*a, *c),
                        _ => unreachable!("validated"),
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_end: f64,
    /// Defaults to the stability limit `cfl h^3`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub record_every: usize,
    #[serde(default)]
    pub allow_large_steps: bool,
    /// Write `p` at every recorded time.
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "yes")]
    pub obj: bool,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub report: bool,
    #[serde(default)]
    pub spinors: bool,
    /// 1-based coordinates shown in OBJ meshes.
    #[serde(default = "default_project")]
    pub project: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            name: None,
            obj: true,
            csv: true,
            report: true,
            spinors: false,
            project: default_project(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_project() -> String {
    "1,2,3".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual at which the fixed-point solver stops.
    #[serde(default = "default_solver_tol")]
    pub solver: f64,
    /// Guard constant `c` in `dt <= c h^3`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Largest degenerate fraction of the grid accepted without a warning.
    #[serde(default)]
    pub masked_fraction: f64,
}

fn default_solver_tol() -> f64 {
    1e-10
}

fn default_cfl() -> f64 {
    wforge_core::flow::DEFAULT_CFL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { solver: default_solver_tol(), cfl: default_cfl(), masked_fraction: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub system: SystemKind,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solutions: Option<SolutionSpec>,
    /// Optional complex matrix; row `k` gives output solution `k` as a
    /// combination of the solutions produced above.
    #[serde(default)]
    pub mix: Option<Vec<Vec<Complex64>>>,
    /// Required by `synth`; `deform` only uses it for snapshot meshes.
    #[serde(default)]
    pub ambient: Option<AmbientConfig>,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A parsed configuration with its location and provenance hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub stem: String,
    pub hash: String,
}

/// SHA-256 of the canonical (key-sorted, whitespace-free) JSON form.
pub fn config_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON value serialises");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse(text: &str) -> Result<(RunConfig, String), ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::new("", format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column())))?;
    let config: RunConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    validate(&config)?;
    Ok((config, config_hash(&value)))
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let (config, hash) = parse(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = config
        .outputs
        .name
        .clone()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "run".into());
    Ok(LoadedConfig { config, base_dir, stem, hash })
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be a positive number, got {v}")))
    }
}

/// Number of solutions the config will produce, when known without solving.
pub fn declared_solutions(c: &RunConfig) -> Option<usize> {
    if let Some(m) = &c.mix {
        return Some(m.len());
    }
    match (&c.potential, &c.solutions) {
        (_, Some(SolutionSpec::Solver { seeds, .. })) => Some(seeds.len()),
        (_, Some(SolutionSpec::Files { manifests })) => Some(manifests.len()),
        (PotentialSpec::Family { family }, None) => Some(match family {
            Family::Minimal { .. } => 1,
            Family::Exponential { solutions, .. } => solutions.len(),
            Family::RadialGaussian { windings, .. } => windings.len(),
        }),
        (_, None) => Some(0),
    }
}

pub fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    if c.grid.nx < 4 || c.grid.ny < 4 {
        return Err(ConfigError::new("grid", "needs at least 4 points per direction"));
    }
    positive("grid.lx", c.grid.lx)?;
    positive("grid.ly", c.grid.ly)?;
    if let PotentialSpec::Expr { terms } = &c.potential {
        if terms.is_empty() {
            return Err(ConfigError::new("potential.terms", "needs at least one term"));
        }
        for (k, t) in terms.iter().enumerate() {
            if ![t.amp, t.kx, t.ky, t.phase].iter().all(|v| v.is_finite()) {
                return Err(ConfigError::new(format!("potential.terms[{k}]"), "values must be finite"));
            }
        }
    }
    if let (PotentialSpec::Family { .. }, Some(_)) = (&c.potential, &c.solutions) {
        return Err(ConfigError::new("solutions", "a family potential supplies its own solutions; remove this block"));
    }
    if let Some(SolutionSpec::Solver { seeds, damping, .. }) = &c.solutions {
        if seeds.is_empty() {
            return Err(ConfigError::new("solutions.seeds", "needs at least one seed"));
        }
        if !(*damping > 0.0 && *damping <= 1.0) {
            return Err(ConfigError::new("solutions.damping", format!("must lie in (0, 1], got {damping}")));
        }
        if c.grid.boundary != BoundaryMode::Periodic {
            return Err(ConfigError::new("solutions", "the solver needs a periodic grid"));
        }
    }
    let count = declared_solutions(c);
    if let Some(ambient) = &c.ambient {
        validate_ambient(c, ambient, count)?;
    }
    if let (Some(m), Some(n)) = (&c.mix, match (&c.potential, &c.solutions) {
        (_, Some(SolutionSpec::Solver { seeds, .. })) => Some(seeds.len()),
        (_, Some(SolutionSpec::Files { manifests })) => Some(manifests.len()),
        _ => None,
    }) {
        if let Some(k) = m.iter().position(|row| row.len() != n) {
            return Err(ConfigError::new(format!("mix[{k}]"), format!("needs {n} coefficients, one per solution")));
        }
    }

    if let Some(f) = &c.flow {
        positive("flow.t_end", f.t_end)?;
        if let Some(dt) = f.dt {
            positive("flow.dt", dt)?;
        }
        if f.record_every == 0 {
            return Err(ConfigError::new("flow.record_every", "must be at least 1"));
        }
    }
    positive("tolerances.solver", c.tolerances.solver)?;
    positive("tolerances.cfl", c.tolerances.cfl)?;
    if !(0.0..=1.0).contains(&c.tolerances.masked_fraction) {
        return Err(ConfigError::new("tolerances.masked_fraction", "must lie in [0, 1]"));
    }
    wforge_core::io::parse_triple(&c.outputs.project).map_err(|e| ConfigError::new("outputs.project", e.to_string()))?;
    Ok(())
}

fn validate_ambient(c: &RunConfig, ambient: &AmbientConfig, count: Option<usize>) -> Result<(), ConfigError> {
    let need = |k: usize| -> Result<(), ConfigError> {
        match count {
            Some(n) if n < k => Err(ConfigError::new(
                "ambient",
                format!("{} needs {k} solution(s), the config declares {n}", ambient.tag()),
            )),
            _ => Ok(()),
        }
    };
    let kind_is = |want: &[SystemKind]| -> Result<(), ConfigError> {
        if want.contains(&c.system) {
            Ok(())
        } else {
            Err(ConfigError::new(
                "system",
                format!("{} ambient needs a {} system", ambient.tag(), want.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" or ")),
            ))
        }
    };
    match ambient {
        AmbientConfig::R3 => {
            kind_is(&[SystemKind::Euclidean])?;
            need(1)?;
        }
        AmbientConfig::R4 | AmbientConfig::Minkowski4 | AmbientConfig::Conformal4 { .. } => {
            kind_is(&[SystemKind::Euclidean])?;
            need(2)?;
        }
        AmbientConfig::S4 { k0 } => {
            kind_is(&[SystemKind::Euclidean])?;
            positive("ambient.k0", *k0)?;
            need(2)?;
        }
        AmbientConfig::Split22 => {
            kind_is(&[SystemKind::Split])?;
            need(2)?;
        }
        AmbientConfig::Stacked { plan } => {
            kind_is(&[SystemKind::Euclidean])?;
            if plan.is_empty() {
                return Err(ConfigError::new("ambient.plan", "needs at least one block"));
            }
            for (k, b) in plan.iter().enumerate() {
                if !(1..=2).contains(&b.len()) {
                    return Err(ConfigError::new(format!("ambient.plan[{k}]"), "a block is [a] or [a, b]"));
                }
                if let Some(&top) = b.iter().max() {
                    need(top + 1).map_err(|e| ConfigError::new(format!("ambient.plan[{k}]"), e.message))?;
                }
            }
        }
        AmbientConfig::Cn { coeffs } => {
            if coeffs.is_empty() {
                return Err(ConfigError::new("ambient.coeffs", "needs at least one coordinate"));
            }
            if let Some(n) = count {
                for (g, a) in coeffs.iter().enumerate() {
                    if a.len() != n || a.iter().any(|row| row.len() != n) {
                        return Err(ConfigError::new(format!("ambient.coeffs[{g}]"), format!("must be {n} x {n}")));
                    }
                }
            }
        }
    }

    Ok(())
}

impl LoadedConfig {
    pub fn grid(&self) -> wforge_core::Result<ComplexGrid> {
        let g = &self.config.grid;
        ComplexGrid::new(g.nx, g.ny, g.x0, g.y0, g.lx, g.ly, g.boundary)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn sigma_field(&self, path: &Path) -> wforge_core::Result<ScalarField> {
        read_field(&self.resolve(path))
    }

    /// Potential and solutions, after solving or loading and mixing.
    pub fn build_system(&self) -> wforge_core::Result<(Potential, Vec<SpinorSolution>)> {
        let c = &self.config;
        let grid = self.grid()?;
        let (p, sols) = match &c.potential {
            PotentialSpec::Family { family } => analytic_family(grid, c.system, family)?,
            PotentialSpec::Expr { terms } => {
                let field = ScalarField::sample_real(grid, |x, y| terms.iter().map(|t| t.eval(x, y)).sum());
                let p = Potential::new(field, c.system)?;
                let sols = self.solutions(&p)?;
                (p, sols)
            }
            PotentialSpec::Csv { path } => {
                let field = read_field(&self.resolve(path))?;
                if !field.grid().same_as(&grid) {
                    return Err(wforge_core::Error::GridMismatch);
                }
                let p = Potential::new(field, c.system)?;
                let sols = self.solutions(&p)?;
                (p, sols)
            }
        };
        let Some(mix) = &c.mix else {
            return Ok((p, sols));
        };
        let mixed = mix
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let terms: Vec<(Complex64, &SpinorSolution)> = row.iter().copied().zip(&sols).collect();
                SpinorSolution::combine(&terms, &p, format!("mix[{k}]"))
            })
            .collect::<wforge_core::Result<Vec<_>>>()?;
        Ok((p, mixed))
    }

    fn solutions(&self, p: &Potential) -> wforge_core::Result<Vec<SpinorSolution>> {
        let Some(spec) = self.config.solutions.as_ref() else {
            return Ok(Vec::new());
        };
        match spec {
            SolutionSpec::Solver { seeds, max_iter, damping } => {
                let opts = SolverOptions { tol: self.config.tolerances.solver, max_iter: *max_iter, damping: *damping };
                seeds
                    .iter()
                    .map(|s| solve_fixed_point(p, &SpinorSolution::constant_seed(*p.grid(), s.psi, s.phi, p.kind()), opts))
                    .collect()
            }
            SolutionSpec::Files { manifests } => manifests
                .iter()
                .map(|m| {
                    let (_, s) = load_solution(&self.resolve(m))?;
                    s.psi.check_grid(p.p())?;
                    // Re-measure against this potential rather than trusting the stored value.
                    SpinorSolution::new(s.psi, s.phi, p, s.label)
                })
                .collect(),
        }
    }
}
