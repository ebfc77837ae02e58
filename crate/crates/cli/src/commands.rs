use serde_json::{json, Value};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use wforge_core::dirac::{Potential, SpinorSolution, SystemKind};
use wforge_core::flow::{run_flow_observed, step_limit, FlowState, Mvn, RunOptions, StepOptions};
use wforge_core::gaussmap::{gauss_map, ho_from_spinors, ho_residuals, kenmotsu_from_spinors, kenmotsu_residuals, residual_report};
use wforge_core::geometry::{analyze, GeometryReport};
use wforge_core::io::{chart_from_csv, chart_to_csv, chart_to_obj, field_to_csv, parse_triple, save_solution, ChartData};
use wforge_core::verify::{self, Level};
use wforge_core::weierstrass::{build_cn, build_r3, build_r4, build_split22, build_stacked, AmbientSpec, ConformalFactor, SurfaceChart};
use wforge_core::Error;

use crate::config::{self, AmbientConfig, ConfigError, LoadedConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(Error),
    /// Degenerate-surface warnings under `--strict`.
    Strict(Vec<String>),
    /// A verification run with failing checks.
    Failed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Failed(_) => 1,
            CliError::Strict(_) => 2,
            CliError::Core(e) => match e {
                Error::NoConvergence { .. } | Error::StepTooLarge { .. } | Error::ImaginaryDrift { .. } => 3,
                Error::DegenerateMetric(_) | Error::AllDegenerate => 2,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Strict(w) => write!(f, "degenerate surface (strict): {}", w.join("; ")),
            CliError::Failed(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn hash_comment(hash: &str) -> Vec<String> {
    vec![format!("config_hash={hash}")]
}

struct Writer {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(cfg: &LoadedConfig, out: Option<&Path>) -> CliResult<Self> {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.config.outputs.dir.clone());
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, stem: cfg.stem.clone(), written: Vec::new() })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn write(&mut self, suffix: &str, text: &str) -> CliResult<()> {
        let p = self.path(suffix);
        fs::write(&p, text)?;
        self.written.push(p);
        Ok(())
    }
}

/// Chart for the configured ambient, with the solutions it was built from.
fn build_chart(
    cfg: &LoadedConfig,
    ambient: &AmbientConfig,
    p: &Potential,
    sols: &[SpinorSolution],
) -> wforge_core::Result<(SurfaceChart, Vec<SpinorSolution>)> {
    let first = |k: usize| sols[..k].to_vec();
    Ok(match ambient {
        AmbientConfig::R3 => (build_r3(&sols[0])?, first(1)),
        AmbientConfig::R4 => (build_r4(p, &sols[0], &sols[1])?, first(2)),
        AmbientConfig::Split22 => (build_split22(p, &sols[0], &sols[1])?, first(2)),
        AmbientConfig::Minkowski4 => (build_r4(p, &sols[0], &sols[1])?.with_ambient(AmbientSpec::Minkowski4)?, first(2)),
        AmbientConfig::S4 { k0 } => {
            let ch = build_r4(p, &sols[0], &sols[1])?;
            (ch.with_ambient(AmbientSpec::Conformal4(ConformalFactor::S4 { k0: *k0 }))?, first(2))
        }
        AmbientConfig::Conformal4 { sigma } => {
            let s = cfg.sigma_field(sigma)?;
            s.check_grid(p.p())?;
            let ch = build_r4(p, &sols[0], &sols[1])?;
            (ch.with_ambient(AmbientSpec::Conformal4(ConformalFactor::Sigma(s)))?, first(2))
        }
        AmbientConfig::Stacked { .. } => {
            (build_stacked(p, sols, &ambient.blocks().expect("stacked plan"))?, sols.to_vec())
        }
        AmbientConfig::Cn { coeffs } => (build_cn(p, sols, coeffs)?, sols.to_vec()),
    })
}

/// Gauss-map, Kenmotsu and Hoffman-Osserman residuals for R^4 pairs.
fn gauss_section(p: &Potential, sols: &[SpinorSolution], warnings: &mut Vec<String>) -> Value {
    if sols.len() < 2 || p.kind() != SystemKind::Euclidean {
        return Value::Null;
    }
    let gm = match gauss_map(&sols[0], &sols[1]) {
        Ok(g) => g,
        Err(e) => return json!({ "error": e.to_string() }),
    };
    let kenmotsu = kenmotsu_from_spinors(&sols[0]).and_then(|d| kenmotsu_residuals(&d, p));
    let ho = ho_from_spinors(&sols[0], &sols[1]).and_then(|d| ho_residuals(&d, p));
    for (name, e) in [("kenmotsu", kenmotsu.as_ref().err()), ("hoffman-osserman", ho.as_ref().err())] {
        if let Some(e) = e {
            warnings.push(format!("{name} data unavailable: {e}"));
        }
    }
    let mut v = residual_report(kenmotsu.as_ref().ok(), ho.as_ref().ok());
    v["quadric_residual"] = json!(gm.quadric_residual);
    v
}

fn degeneracy_warnings(cfg: &LoadedConfig, chart: &SurfaceChart, report: &GeometryReport) -> Vec<String> {
    let mut w = Vec::new();
    let limit = cfg.config.tolerances.masked_fraction;
    let masked = report.masked_fraction().max(chart.masked_fraction());
    if masked > limit {
        w.push(format!("{:.2}% of grid points are degenerate (limit {:.2}%)", 100.0 * masked, 100.0 * limit));
    }
    w
}

pub fn synth(path: &Path, strict: bool, out: Option<&Path>) -> CliResult<()> {
    let cfg = config::load(path)?;
    let ambient = cfg
        .config
        .ambient
        .clone()
        .ok_or_else(|| ConfigError { field: "ambient".into(), message: "required for synth".into() })?;
    let (p, sols) = cfg.build_system()?;
    let (chart, used) = build_chart(&cfg, &ambient, &p, &sols)?;
    let report = analyze(&chart, &used, &p)?;
    let mut warnings = degeneracy_warnings(&cfg, &chart, &report);
    let gauss = match ambient {
        AmbientConfig::R4 | AmbientConfig::S4 { .. } | AmbientConfig::Conformal4 { .. } => {
            gauss_section(&p, &used, &mut warnings)
        }
        _ => Value::Null,
    };

    let o = &cfg.config.outputs;
    let mut w = Writer::new(&cfg, out)?;
    let comments = hash_comment(&cfg.hash);
    let data = ChartData::from_chart(&chart);
    if o.csv {
        w.write(".chart.csv", &chart_to_csv(&data, &comments))?;
        w.write(".p.csv", &field_to_csv(p.p(), &comments))?;
        if let Some(h) = &report.h_scalar {
            w.write(".H.csv", &field_to_csv(h, &comments))?;
        }
    }
    if o.obj {
        w.write(".obj", &chart_to_obj(&data, parse_triple(&o.project)?, &comments)?)?;
    }
    if o.spinors {
        for (k, s) in sols.iter().enumerate() {
            let stem = format!("{}.s{k}", w.stem);
            save_solution(&w.dir, &stem, s, None, Some(&cfg.hash))?;
            w.written.push(w.dir.join(format!("{stem}.json")));
        }
    }
    if o.report {
        let solutions: Vec<Value> =
            sols.iter().map(|s| json!({ "label": s.label, "residual": s.residual_norm() })).collect();
        let doc = json!({
            "config_hash": cfg.hash,
            "system": p.kind().as_str(),
            "grid": chart.grid(),
            "solutions": solutions,
            "max_closedness": chart.max_closedness(),
            "geometry": report.summary_json(),
            "gauss_map": gauss,
            "warnings": warnings,
        });
        w.write(".report.json", &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    }

    println!(
        "{}: {} chart, W = {}, masked {:.2}%",
        cfg.stem,
        chart.ambient.tag(),
        report.w.map_or("n/a".into(), |v| format!("{v:.10}")),
        100.0 * report.masked_fraction()
    );
    for p in &w.written {
        println!("  wrote {}", p.display());
    }
    for msg in &warnings {
        eprintln!("warning: {msg}");
    }
    if strict && !warnings.is_empty() {
        return Err(CliError::Strict(warnings));
    }
    Ok(())
}

pub fn deform(path: &Path, out: Option<&Path>) -> CliResult<()> {
    let cfg = config::load(path)?;
    let flow = cfg
        .config
        .flow
        .clone()
        .ok_or_else(|| ConfigError { field: "flow".into(), message: "required for deform".into() })?;
    if !cfg.grid()?.is_periodic() {
        return Err(ConfigError { field: "grid.boundary".into(), message: "the flow needs a periodic grid".into() }.into());
    }
    let (p, sols) = cfg.build_system()?;
    let state = FlowState::new(p, sols)?;
    let tol = &cfg.config.tolerances;
    let dt = flow.dt.unwrap_or_else(|| step_limit(&state, tol.cfl));
    let opts = RunOptions {
        step: StepOptions { cfl: tol.cfl, allow_large_steps: flow.allow_large_steps },
        keep_snapshots: flow.snapshots,
    };

    let mut w = Writer::new(&cfg, out)?;
    let comments = hash_comment(&cfg.hash);
    let o = cfg.config.outputs.clone();
    let meshes = o.obj && !state.sols.is_empty() && cfg.config.ambient.is_some();
    let triple = parse_triple(&o.project)?;
    let mut frame = 0usize;
    let mut mesh_files = Vec::new();
    let traj = run_flow_observed(&Mvn, state, flow.t_end, dt, flow.record_every, opts, |s| {
        if meshes {
            let ambient = cfg.config.ambient.as_ref().expect("checked");
            let (chart, _) = build_chart(&cfg, ambient, &s.p, &s.sols)?;
            let mut c = comments.clone();
            c.push(format!("t={:.17e}", s.t));
            let file = w.path(&format!(".{frame:04}.obj"));
            fs::write(&file, chart_to_obj(&ChartData::from_chart(&chart), triple, &c)?)?;
            mesh_files.push(file);
        }
        frame += 1;
        Ok(())
    })?;
    w.written.extend(mesh_files);

    w.write(".trajectory.csv", &format!("# config_hash={}\n{}", cfg.hash, traj.to_csv()))?;
    if let Some(snaps) = &traj.p_snapshots {
        for (k, (f, t)) in snaps.iter().zip(&traj.times).enumerate() {
            let mut c = comments.clone();
            c.push(format!("t={t:.17e}"));
            w.write(&format!(".p.{k:04}.csv"), &field_to_csv(f, &c))?;
        }
    }
    let p_first = traj.p_integrals.first().copied().unwrap_or(0.0);
    let p_drift = traj.p_integrals.iter().fold(0.0f64, |m, v| m.max((v - p_first).abs()));
    let sidecar = json!({
        "config_hash": cfg.hash,
        "t_end": flow.t_end,
        "dt": traj.dt,
        "steps": traj.steps,
        "record_every": flow.record_every,
        "cfl": tol.cfl,
        "allow_large_steps": flow.allow_large_steps,
        "grid": traj.final_state.p.grid(),
        "solutions": traj.final_state.sols.len(),
        "relative_w_drift": traj.relative_w_drift(),
        "dirac_residual_growth": traj.residual_growth(),
        "p_integral_drift": p_drift,
    });
    w.write(".run.json", &serde_json::to_string_pretty(&sidecar).map_err(Error::from)?)?;

    println!(
        "{}: {} steps of {:.4e}, relative W drift {:.3e}, residual growth {:.3e}",
        cfg.stem,
        traj.steps,
        traj.dt,
        traj.relative_w_drift(),
        traj.residual_growth()
    );
    for p in &w.written {
        println!("  wrote {}", p.display());
    }
    Ok(())
}

pub fn verify(level: &str, json_out: Option<&Path>) -> CliResult<()> {
    let level = Level::parse(level)?;
    let report = verify::run(level);
    print!("{}", report.table());
    if let Some(p) = json_out {
        fs::write(p, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    }
    match report.failures().count() {
        0 => Ok(()),
        n => Err(CliError::Failed(n)),
    }
}

pub fn export(chart_path: &Path, obj: &Path, project: &str) -> CliResult<()> {
    let text = fs::read_to_string(chart_path)?;
    let data = chart_from_csv(&text)?;
    let comments: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| l.starts_with("config_hash="))
        .map(String::from)
        .collect();
    fs::write(obj, chart_to_obj(&data, parse_triple(project)?, &comments)?)?;
    println!("wrote {} ({} vertices)", obj.display(), data.grid.len());
    Ok(())
}
