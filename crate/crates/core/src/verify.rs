//! Property suites run by `wforge verify`.
//!
//! Every check measures one number and compares it with a fixed threshold.
//! A fixture that fails to build turns into a failed check carrying the
//! error message; the suite itself never aborts.

use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::dirac::{bilinear_identity_residuals, independence_certificate, SolverOptions, SystemKind};
use crate::error::{Error, Result};
use crate::field::{max_abs_diff, ScalarField};
use crate::fixtures;
use crate::flow::{run_flow, step_limit, step_rk4, FlowState};
use crate::gaussmap::{gauss_map, ho_from_spinors, ho_residuals, kenmotsu_from_spinors, kenmotsu_residuals, tangent_consistency};
use crate::geometry::{analyze, conformal_ambient_geometry, willmore, GeometryReport, Signature};
use crate::grid::ComplexGrid;
use crate::io::{field_from_csv, field_to_csv};
use crate::ops::{d_x, d_z, d_zbar, inv_dzbar};
use crate::weierstrass::{build_r3, build_r4, build_split22, build_stacked, Block, ConformalFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    /// Adds grid-refinement and time-step studies.
    Full,
}

impl Level {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::InvalidArgument(format!("unknown verify level {other:?} (expected quick or full)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub group: &'static str,
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub passed: bool,
    /// Error text when the fixture could not be built.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub level: Level,
    pub checks: Vec<Check>,
    pub elapsed_seconds: f64,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.group.len() + c.name.len() + 1).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
            };
            let label = format!("{}/{}", c.group, c.name);
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = write!(out, "{status}  {label:<width$}  {:>11.3e} {op} {:.1e}", c.value, c.tolerance);
            if let Some(e) = &c.error {
                let _ = write!(out, "  ({e})");
            }
            out.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(out, "{passed}/{} checks passed in {:.1} s", self.checks.len(), self.elapsed_seconds);
        out
    }
}

struct Recorder {
    group: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn push(&mut self, name: &str, value: f64, comparison: Comparison, tolerance: f64) {
        // NaN fails both comparisons.
        let passed = match comparison {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
        };
        self.checks.push(Check {
            group: self.group,
            name: name.to_string(),
            value,
            comparison,
            tolerance,
            passed,
            error: None,
        });
    }

    fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, Comparison::AtMost, tolerance);
    }

    fn at_least(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, Comparison::AtLeast, tolerance);
    }

    fn opt_at_most(&mut self, name: &str, value: Option<f64>, tolerance: f64) {
        self.at_most(name, value.unwrap_or(f64::NAN), tolerance);
    }

    /// Runs a block of checks; an error becomes one failed check named `name`.
    fn section(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        if let Err(e) = f(self) {
            self.checks.push(Check {
                group: self.group,
                name: name.to_string(),
                value: f64::NAN,
                comparison: Comparison::AtMost,
                tolerance: 0.0,
                passed: false,
                error: Some(e.to_string()),
            });
        }
    }
}

/// `log2(a / b)`, the observed order when the step is halved.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// `|ratio / target - 1|`.
fn ratio_deviation(ratio: f64, target: f64) -> f64 {
    (ratio / target - 1.0).abs()
}

pub fn relative(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

pub fn run(level: Level) -> SuiteReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    type Group = fn(&mut Recorder, Level);
    let groups: [(&'static str, Group); 6] = [
        ("grid", grid_checks),
        ("dirac", dirac_checks),
        ("weierstrass", weierstrass_checks),
        ("geometry", geometry_checks),
        ("gaussmap", gaussmap_checks),
        ("flow", flow_checks),
    ];
    for (group, f) in groups {
        let mut rec = Recorder { group, checks: Vec::new() };
        f(&mut rec, level);
        checks.append(&mut rec.checks);
    }
    SuiteReport { level, checks, elapsed_seconds: elapsed(start) }
}

fn elapsed(start: Instant) -> f64 {
    Duration::as_secs_f64(&start.elapsed())
}

fn grid_checks(r: &mut Recorder, _level: Level) {
    r.section("spectral", |r| {
        let g = fixtures::torus_grid(32)?;
        let f = ScalarField::sample_real(g, |x, y| (x + 2.0 * y).sin());
        let want = ScalarField::sample(g, |z| {
            let c = (z.re + 2.0 * z.im).cos();
            Complex64::new(0.5 * c, -c)
        });
        r.at_most("d_z of a single mode", max_abs_diff(&d_z(&f), &want, None), 1e-12);
        let back = inv_dzbar(&d_zbar(&f))?;
        r.at_most("inv_dzbar round trip", max_abs_diff(&back, &f, None), 1e-12);
        Ok(())
    });
    r.section("finite differences", |r| {
        let err = |n: usize| -> Result<f64> {
            let g = ComplexGrid::open(n, 0.0, 0.0, 2.0, 2.0)?;
            let f = ScalarField::sample_real(g, |x, y| (1.3 * x + 0.7 * y).sin());
            let want = ScalarField::sample_real(g, |x, y| 1.3 * (1.3 * x + 0.7 * y).cos());
            Ok(max_abs_diff(&d_x(&f), &want, None))
        };
        let (a, b) = (err(33)?, err(65)?);
        r.at_least("open-grid derivative order", observed_order(a, b), 3.5);
        Ok(())
    });
    r.section("field csv", |r| {
        let g = ComplexGrid::open(5, -1.0, 0.0, 2.0, 1.0)?;
        let f = ScalarField::sample(g, |z| z * z + Complex64::new(0.1, 0.0));
        let text = field_to_csv(&f, &[]);
        let back = field_from_csv(&text)?;
        r.at_most("round trip", max_abs_diff(&back, &f, None), 0.0);
        let corrupted = [
            text.replacen("0,0,", "0,0,x", 1),
            text.lines().take(10).collect::<Vec<_>>().join("\n"),
            text.replacen("# nx", "# mx", 1),
            String::new(),
        ];
        let unclean = corrupted.iter().filter(|t| !matches!(field_from_csv(t), Err(Error::Parse { .. }))).count();
        r.at_most("corrupted input gives parse errors", unclean as f64, 0.0);
        Ok(())
    });
}

fn dirac_checks(r: &mut Recorder, _level: Level) {
    r.section("solver identities", |r| {
        let p = fixtures::torus_potential(32, fixtures::TORUS_AMPLITUDE)?;
        let mut rows = Vec::new();
        for tol in [1e-8, 5e-9, 2.5e-9] {
            let opts = SolverOptions { tol, max_iter: 5000, damping: fixtures::TRACKING_DAMPING };
            let (a, b) = fixtures::torus_pair(&p, opts)?;
            let (e1, e2) = bilinear_identity_residuals(&a, &b);
            let closed = build_r4(&p, &a, &b)?.max_closedness();
            rows.push((tol, a.residual_norm().max(b.residual_norm()), e1, e2, closed, independence_certificate(&a, &b)));
        }
        let (_, res, e1, e2, closed, indep) = rows[0];
        r.at_most("residual at tol 1e-8", res, 1e-8);
        r.at_least("independence certificate", indep, 1e-8);
        r.at_most("bilinear identity 1", e1, 1e-7);
        r.at_most("bilinear identity 2", e2, 1e-7);
        r.at_most("r4 form closedness", closed, 1e-7);
        for k in 1..rows.len() {
            let (c, f) = (rows[k - 1], rows[k]);
            let tag = format!("{:.1e}->{:.1e}", c.0, f.0);
            r.at_most(&format!("identity 1 halves ({tag})"), ratio_deviation(c.2 / f.2, 2.0), 0.3);
            r.at_most(&format!("identity 2 halves ({tag})"), ratio_deviation(c.3 / f.3, 2.0), 0.3);
            r.at_most(&format!("closedness halves ({tag})"), ratio_deviation(c.4 / f.4, 2.0), 0.3);
        }
        Ok(())
    });
    r.section("radial family", |r| {
        let (_, s) = fixtures::gaussian(257, 3.0, 0.5, SystemKind::Euclidean)?;
        let worst = s.iter().map(|s| s.residual_norm()).fold(0.0, f64::max);
        r.at_most("open-grid residual", worst, 1e-6);
        Ok(())
    });
}

fn weierstrass_checks(r: &mut Recorder, level: Level) {
    r.section("torus charts", |r| {
        let (p, s) = fixtures::torus_mixed(32, 1e-13)?;
        let r3 = build_r3(&s[0])?;
        let r4 = build_r4(&p, &s[0], &s[1])?;
        r.at_most("r3 closedness", r3.max_closedness(), 1e-10);
        r.at_most("r4 closedness", r4.max_closedness(), 1e-10);
        r.at_most("r3 conformality", analyze(&r3, &s[..1], &p)?.max_conformality_violation, 1e-6);
        let rep = analyze(&r4, &s, &p)?;
        r.at_most("r4 conformality", rep.max_conformality_violation, 1e-6);
        r.opt_at_most("r4 metric identity", rep.metric_identity_error, 1e-6);

        let same = build_r4(&p, &s[0], &s[0])?;
        let diff = (0..3).map(|k| max_abs_diff(&r3.coords[k], &same.coords[k], None)).fold(0.0, f64::max);
        let x4 = &same.coords[3];
        let x4_spread = max_abs_diff(x4, &ScalarField::constant(*x4.grid(), x4.values()[0]), None);
        r.at_most("r4(s,s) matches r3", diff, 1e-9);
        r.at_most("r4(s,s) fourth coordinate constant", x4_spread, 1e-9);

        for (name, plan) in [
            ("r6 metric factor", vec![Block::Triple(0), Block::Triple(1)]),
            ("r10 metric factor", vec![Block::Triple(0), Block::Quad(0, 1), Block::Triple(1)]),
        ] {
            let ch = build_stacked(&p, &s, &plan)?;
            r.opt_at_most(name, analyze(&ch, &s, &p)?.metric_identity_error, 1e-8);
        }
        Ok(())
    });
    r.section("open conformality", |r| {
        let sizes: &[usize] = match level {
            Level::Quick => &[256],
            Level::Full => &[64, 128, 256],
        };
        let mut errs = Vec::new();
        for &n in sizes {
            let (p, s) = fixtures::gaussian(n, 3.0, 0.5, SystemKind::Euclidean)?;
            let e3 = analyze(&build_r3(&s[0])?, &s[..1], &p)?.max_conformality_violation;
            let e4 = analyze(&build_r4(&p, &s[0], &s[1])?, &s, &p)?.max_conformality_violation;
            errs.push((n, e3, e4));
        }
        let &(n, e3, e4) = errs.last().expect("at least one size");
        r.at_most(&format!("r3 at {n}^2"), e3, 1e-6);
        r.at_most(&format!("r4 at {n}^2"), e4, 1e-6);
        for w in errs.windows(2) {
            let tag = format!("{}->{}", w[0].0, w[1].0);
            r.at_least(&format!("r3 refinement order {tag}"), observed_order(w[0].1, w[1].1), 2.0);
            r.at_least(&format!("r4 refinement order {tag}"), observed_order(w[0].2, w[1].2), 2.0);
        }
        Ok(())
    });
}

fn h_error(rep: &GeometryReport, target: f64) -> f64 {
    rep.h_scalar_fd.as_ref().map_or(f64::NAN, |h| {
        max_abs_diff(h, &ScalarField::real_constant(*h.grid(), target), Some(&rep.degeneracy_mask))
    })
}

fn sup(f: &Option<ScalarField>) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.norm_inf())
}

fn geometry_checks(r: &mut Recorder, level: Level) {
    r.section("torus curvature", |r| {
        let (p, s) = fixtures::torus_mixed(32, 1e-13)?;
        let rep = analyze(&build_r4(&p, &s[0], &s[1])?, &s, &p)?;
        r.opt_at_most("H formula vs finite differences", rep.h_discrepancy, 1e-4);
        r.opt_at_most("K formula vs Brioschi", rep.k_discrepancy, 1e-4);
        Ok(())
    });
    r.section("open curvature", |r| {
        let n = if level == Level::Full { 256 } else { 128 };
        let (p, s) = fixtures::gaussian(n, 3.0, 0.5, SystemKind::Euclidean)?;
        let rep = analyze(&build_r4(&p, &s[0], &s[1])?, &s, &p)?;
        let tol = if level == Level::Full { 1e-4 } else { 2e-3 };
        r.opt_at_most(&format!("H formula vs finite differences at {n}^2"), rep.h_discrepancy, tol);
        Ok(())
    });
    r.section("cylinder", |r| {
        let (p, s) = fixtures::cylinder(32)?;
        let rep = analyze(&build_r3(&s[0])?, &s, &p)?;
        r.at_most("|H - 1|", h_error(&rep, 1.0), 1e-6);
        r.at_most("|K|", sup(&rep.k), 1e-6);
        r.at_most("|K| (Brioschi)", sup(&rep.k_brioschi), 1e-6);
        Ok(())
    });
    r.section("enneper", |r| {
        let (p, s) = fixtures::enneper(81)?;
        let rep = analyze(&build_r3(&s[0])?, &s, &p)?;
        r.at_most("|H|", h_error(&rep, 0.0), 1e-6);
        r.at_most("|W|", rep.w.unwrap_or(f64::NAN).abs(), 1e-12);
        Ok(())
    });
    r.section("willmore", |r| {
        let two_pi = 2.0 * std::f64::consts::PI;
        let (p, s) = fixtures::gaussian(257, 6.0, 1.0, SystemKind::Euclidean)?;
        r.at_most("4 int p^2 = 2 pi", relative(willmore(&p, Signature::Euclidean), two_pi), 1e-5);
        let r3 = analyze(&build_r3(&s[0])?, &s[..1], &p)?;
        r.at_most("r3 surface integral", relative(r3.w_direct.unwrap_or(f64::NAN), two_pi), 1e-4);
        let r4 = analyze(&build_r4(&p, &s[0], &s[1])?, &s, &p)?;
        r.at_most("r4 surface integral", relative(r4.w_direct.unwrap_or(f64::NAN), two_pi), 1e-4);
        let (ps, ss) = fixtures::gaussian(257, 6.0, 1.0, SystemKind::Split)?;
        let split = analyze(&build_split22(&ps, &ss[0], &ss[1])?, &ss, &ps)?;
        r.at_most("split signature gives -2 pi", relative(split.w.unwrap_or(f64::NAN), -two_pi), 1e-5);
        r.at_most("split surface integral", relative(split.w_direct.unwrap_or(f64::NAN), -two_pi), 1e-4);
        Ok(())
    });
    r.section("s4", |r| {
        let (p, s) = fixtures::torus_mixed(32, 1e-13)?;
        let chart = build_r4(&p, &s[0], &s[1])?;
        let flat = analyze(&chart, &s, &p)?;
        let sphere = conformal_ambient_geometry(&chart, ConformalFactor::S4 { k0: 1.0 }, &s, &p)?;
        let (Some(sigma), Some(h_s4), Some(h_r4)) = (&sphere.sigma, &sphere.h_scalar, &flat.h_scalar_fd) else {
            return Err(Error::InvalidArgument("s4 report is missing fields".into()));
        };
        let scaled = h_r4.zip_map(sigma, |h, s| h * (-s.re).exp())?;
        r.at_most("H = e^-sigma H_r4", max_abs_diff(h_s4, &scaled, Some(&sphere.degeneracy_mask)), 1e-8);

        let mut dh = Vec::new();
        let mut dk = Vec::new();
        for k0 in [1e-3, 5e-4, 2.5e-4] {
            let rep = conformal_ambient_geometry(&chart, ConformalFactor::S4 { k0 }, &s, &p)?;
            let diff = |a: &Option<ScalarField>, b: &Option<ScalarField>| match (a, b) {
                (Some(a), Some(b)) => max_abs_diff(a, b, Some(&rep.degeneracy_mask)),
                _ => f64::NAN,
            };
            dh.push(diff(&rep.h_scalar, &flat.h_scalar));
            dk.push(diff(&rep.k, &flat.k));
        }
        for k in 1..dh.len() {
            r.at_most(&format!("H -> r4 at rate K0 (step {k})"), (observed_order(dh[k - 1], dh[k]) - 1.0).abs(), 0.2);
            r.at_most(&format!("K -> r4 at rate K0 (step {k})"), (observed_order(dk[k - 1], dk[k]) - 1.0).abs(), 0.2);
        }
        Ok(())
    });
}

fn gaussmap_checks(r: &mut Recorder, _level: Level) {
    r.section("gauss map", |r| {
        let (p, s) = fixtures::torus_mixed(32, 1e-13)?;
        let gm = gauss_map(&s[0], &s[1])?;
        r.at_most("quadric membership", gm.quadric_residual, 1e-8);
        let (misfit, scale) = tangent_consistency(&gm, &build_r4(&p, &s[0], &s[1])?)?;
        r.at_most("proportional to X_z", misfit, 1e-8);
        r.at_most("G = 2 X_z", scale, 1e-8);

        let ho = ho_residuals(&ho_from_spinors(&s[0], &s[1])?, &p)?;
        r.opt_at_most("hoffman-osserman imaginary-part constraint", ho.imag_constraint, 1e-6);
        r.opt_at_most("hoffman-osserman |F1| = |F2|", ho.modulus_balance, 1e-6);
        r.opt_at_most("hoffman-osserman eta^2 relation", ho.eta_square, 1e-6);
        r.opt_at_most("hoffman-osserman log H gradient", ho.log_h_gradient, 1e-6);
        r.at_most("hoffman-osserman recovers p", ho.p_roundtrip_max_err, 1e-6);

        for (k, sol) in s.iter().enumerate() {
            let km = kenmotsu_residuals(&kenmotsu_from_spinors(sol)?, &p)?;
            r.opt_at_most(&format!("kenmotsu eta relation [{k}]"), km.eta_relation, 1e-6);
            r.at_most(&format!("kenmotsu recovers p [{k}]"), km.p_roundtrip_max_err, 1e-6);
        }
        Ok(())
    });
}

fn flow_checks(r: &mut Recorder, level: Level) {
    r.section("fixed point", |r| {
        let mut st = fixtures::flow_constant(32, 0.7)?;
        let p0 = st.p.p().clone();
        let dt = step_limit(&st, crate::flow::DEFAULT_CFL);
        for _ in 0..10 {
            st = step_rk4(&st, dt)?;
        }
        r.at_most("constant p is stationary", max_abs_diff(st.p.p(), &p0, None), 1e-12);
        Ok(())
    });
    r.section("conservation", |r| {
        let n = 128;
        let st = fixtures::flow_bump(n, 0.5)?;
        let dt = step_limit(&st, crate::flow::DEFAULT_CFL);
        let steps = 1000;
        let drift = run_flow(st.clone(), steps as f64 * dt, dt, 100)?.relative_w_drift();
        r.at_most(&format!("W drift over {steps} steps at {n}^2"), drift, 1e-6);
        if level == Level::Full {
            let half = run_flow(st, steps as f64 * dt, dt / 2.0, 200)?.relative_w_drift();
            r.at_most("drift ratio under dt/2 vs 16", ratio_deviation(drift / half, 16.0), 0.3);
        }
        Ok(())
    });
    r.section("surface transport", |r| {
        let st = fixtures::flow_with_spinors(64, 0.2)?;
        let steps = if level == Level::Full { 1000 } else { 200 };
        let dt = step_limit(&st, crate::flow::DEFAULT_CFL);
        let surface_w = |s: &FlowState| -> Result<f64> {
            let rep = analyze(&build_r4(&s.p, &s.sols[0], &s.sols[1])?, &s.sols, &s.p)?;
            Ok(relative(rep.w_direct.unwrap_or(f64::NAN), s.willmore()))
        };
        let w0 = surface_w(&st)?;
        let traj = run_flow(st, steps as f64 * dt, dt, 50)?;
        r.at_most(&format!("dirac residual growth over {steps} steps"), traj.residual_growth(), 1e-6);
        r.at_most(&format!("W drift over {steps} steps"), traj.relative_w_drift(), 1e-6);
        r.at_most("surface W at t = 0", w0, 1e-4);
        r.at_most("surface W at t = T", surface_w(&traj.final_state)?, 1e-4);
        r.at_most("omega constraint at t = T", traj.final_state.omega_defect(), 1e-10);
        Ok(())
    });
}
