//! Acceptance criteria. Prints one PASS/FAIL line per criterion followed by the
//! measured quantities, and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use wforge_core::dirac::{bilinear_identity_residuals, SolverOptions, SystemKind};
use wforge_core::field::max_abs_diff;
use wforge_core::fixtures;
use wforge_core::flow::{run_flow, step_limit, step_rk4, FlowState, DEFAULT_CFL};
use wforge_core::gaussmap::{gauss_map, ho_from_spinors, ho_residuals, kenmotsu_from_spinors, kenmotsu_residuals};
use wforge_core::geometry::{analyze, conformal_ambient_geometry, willmore, Signature};
use wforge_core::verify::{self, Level};
use wforge_core::weierstrass::{build_r3, build_r4, build_split22, build_stacked, Block, ConformalFactor};
use wforge_core::{Result, ScalarField};

/// One measured quantity against a pinned bound.
struct Measure {
    name: String,
    value: f64,
    bound: f64,
    at_least: bool,
}

impl Measure {
    fn ok(&self) -> bool {
        if self.at_least {
            self.value >= self.bound
        } else {
            self.value <= self.bound
        }
    }
}

#[derive(Default)]
struct Sheet(Vec<Measure>);

impl Sheet {
    fn le(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.0.push(Measure { name: name.into(), value, bound, at_least: false });
    }
    fn ge(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.0.push(Measure { name: name.into(), value, bound, at_least: true });
    }
    fn opt(&mut self, name: impl Into<String>, value: Option<f64>, bound: f64) {
        self.le(name, value.unwrap_or(f64::NAN), bound);
    }
}

fn rel(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn dirac_identities(s: &mut Sheet) -> Result<()> {
    let p = fixtures::torus_potential(32, fixtures::TORUS_AMPLITUDE)?;
    let mut rows = Vec::new();
    for tol in [1e-8, 5e-9, 2.5e-9] {
        let opts = SolverOptions { tol, max_iter: 5000, damping: fixtures::TRACKING_DAMPING };
        let (a, b) = fixtures::torus_pair(&p, opts)?;
        let (e1, e2) = bilinear_identity_residuals(&a, &b);
        rows.push([e1, e2, build_r4(&p, &a, &b)?.max_closedness()]);
    }
    for (k, name) in ["identity 1", "identity 2", "closedness"].iter().enumerate() {
        s.le(format!("{name} at tol 1e-8"), rows[0][k], 1e-7);
        for w in rows.windows(2) {
            s.le(format!("{name} halving ratio |r/2 - 1|"), (w[0][k] / w[1][k] / 2.0 - 1.0).abs(), 0.3);
        }
    }
    Ok(())
}

fn conformality(s: &mut Sheet) -> Result<()> {
    let mut rows = Vec::new();
    for n in [64, 128, 256] {
        let (p, sols) = fixtures::gaussian(n, 3.0, 0.5, SystemKind::Euclidean)?;
        let r4 = build_r4(&p, &sols[0], &sols[1])?;
        let e3 = analyze(&build_r3(&sols[0])?, &sols[..1], &p)?.max_conformality_violation;
        let e4 = analyze(&r4, &sols, &p)?.max_conformality_violation;
        let ec = conformal_ambient_geometry(&r4, ConformalFactor::S4 { k0: 1.0 }, &sols, &p)?.max_conformality_violation;
        rows.push((n, [e3, e4, ec]));
    }
    for (k, name) in ["r3", "r4", "s4"].iter().enumerate() {
        s.le(format!("{name} |g_zz|/g_zzbar at 256^2"), rows[2].1[k], 1e-6);
        for w in rows.windows(2) {
            s.ge(format!("{name} order {}->{}", w[0].0, w[1].0), order(w[0].1[k], w[1].1[k]), 2.0);
        }
    }
    Ok(())
}

fn metric_identity(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::torus_mixed(32, 1e-10)?;
    s.opt("torus r4, relative to max u1u2", analyze(&build_r4(&p, &sols[0], &sols[1])?, &sols, &p)?.metric_identity_error, 1e-6);
    let (p, sols) = fixtures::gaussian(256, 3.0, 0.5, SystemKind::Euclidean)?;
    s.opt("open r4, relative to max u1u2", analyze(&build_r4(&p, &sols[0], &sols[1])?, &sols, &p)?.metric_identity_error, 1e-6);
    Ok(())
}

fn masked_sup_error(f: &Option<ScalarField>, target: f64, mask: &[bool]) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| max_abs_diff(f, &ScalarField::real_constant(*f.grid(), target), Some(mask)))
}

fn curvature(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::torus_mixed(32, 1e-13)?;
    let rep = analyze(&build_r4(&p, &sols[0], &sols[1])?, &sols, &p)?;
    s.opt("torus H relative", rep.h_discrepancy, 1e-4);
    s.opt("torus K vs Brioschi relative (|K| > 1e-3)", rep.k_discrepancy, 1e-4);
    let (p, sols) = fixtures::gaussian(256, 3.0, 0.5, SystemKind::Euclidean)?;
    let rep = analyze(&build_r4(&p, &sols[0], &sols[1])?, &sols, &p)?;
    s.opt("open 256^2 H relative", rep.h_discrepancy, 1e-4);

    let (p, sols) = fixtures::cylinder(32)?;
    let rep = analyze(&build_r3(&sols[0])?, &sols, &p)?;
    s.le("cylinder |H - 1|", masked_sup_error(&rep.h_scalar_fd, 1.0, &rep.degeneracy_mask), 1e-6);
    s.le("cylinder |K|", masked_sup_error(&rep.k, 0.0, &rep.degeneracy_mask), 1e-6);
    s.le("cylinder |K| Brioschi", masked_sup_error(&rep.k_brioschi, 0.0, &rep.degeneracy_mask), 1e-6);

    let (p, sols) = fixtures::enneper(81)?;
    let rep = analyze(&build_r3(&sols[0])?, &sols, &p)?;
    s.le("enneper |H|", masked_sup_error(&rep.h_scalar_fd, 0.0, &rep.degeneracy_mask), 1e-6);
    Ok(())
}

fn willmore_gaussian(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::gaussian(257, 6.0, 1.0, SystemKind::Euclidean)?;
    s.le("4 int p^2 vs 2 pi", rel(willmore(&p, Signature::Euclidean), 2.0 * PI), 1e-5);
    let r3 = analyze(&build_r3(&sols[0])?, &sols[..1], &p)?;
    s.le("r3 surface integral vs 2 pi", rel(r3.w_direct.unwrap_or(f64::NAN), 2.0 * PI), 1e-4);
    let r4 = analyze(&build_r4(&p, &sols[0], &sols[1])?, &sols, &p)?;
    s.le("r4 surface integral vs 2 pi", rel(r4.w_direct.unwrap_or(f64::NAN), 2.0 * PI), 1e-4);
    let (p, sols) = fixtures::gaussian(257, 6.0, 1.0, SystemKind::Split)?;
    let sp = analyze(&build_split22(&p, &sols[0], &sols[1])?, &sols, &p)?;
    s.le("split22 vs -2 pi", rel(sp.w.unwrap_or(f64::NAN), -2.0 * PI), 1e-5);
    s.le("split22 surface integral vs -2 pi", rel(sp.w_direct.unwrap_or(f64::NAN), -2.0 * PI), 1e-4);
    Ok(())
}

fn reduction(s: &mut Sheet) -> Result<()> {
    for (label, (p, sols)) in [("torus", fixtures::torus_mixed(32, 1e-13)?), ("open", fixtures::gaussian(128, 3.0, 0.5, SystemKind::Euclidean)?)] {
        let r3 = build_r3(&sols[0])?;
        let same = build_r4(&p, &sols[0], &sols[0])?;
        let diff = (0..3).map(|k| max_abs_diff(&r3.coords[k], &same.coords[k], None)).fold(0.0, f64::max);
        let x4 = &same.coords[3];
        let spread = max_abs_diff(x4, &ScalarField::constant(*x4.grid(), x4.values()[0]), None);
        s.le(format!("{label}: r4(s,s) - r3"), diff, 1e-9);
        s.le(format!("{label}: X4 spread"), spread, 1e-9);
    }
    Ok(())
}

fn gauss_suite(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::torus_mixed(32, 1e-13)?;
    s.le("sum G_i^2 relative", gauss_map(&sols[0], &sols[1])?.quadric_residual, 1e-8);
    let ho = ho_residuals(&ho_from_spinors(&sols[0], &sols[1])?, &p)?;
    s.opt("HO imaginary-part constraint", ho.imag_constraint, 1e-6);
    s.opt("HO modulus balance", ho.modulus_balance, 1e-6);
    s.opt("HO eta^2 relation", ho.eta_square, 1e-6);
    s.opt("HO log H gradient", ho.log_h_gradient, 1e-6);
    s.le("HO recovers p", ho.p_roundtrip_max_err, 1e-6);
    for (k, sol) in sols.iter().enumerate() {
        let km = kenmotsu_residuals(&kenmotsu_from_spinors(sol)?, &p)?;
        s.le(format!("Kenmotsu recovers p [{k}]"), km.p_roundtrip_max_err, 1e-6);
    }
    Ok(())
}

fn conformal_ambient(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::torus_mixed(32, 1e-13)?;
    let chart = build_r4(&p, &sols[0], &sols[1])?;
    let flat = analyze(&chart, &sols, &p)?;
    let sphere = conformal_ambient_geometry(&chart, ConformalFactor::S4 { k0: 1.0 }, &sols, &p)?;
    let pointwise = match (&sphere.sigma, &sphere.h_scalar, &flat.h_scalar_fd) {
        (Some(sigma), Some(h), Some(h_r4)) => {
            let scaled = h_r4.zip_map(sigma, |h, s| h * (-s.re).exp())?;
            max_abs_diff(h, &scaled, Some(&sphere.degeneracy_mask))
        }
        _ => f64::NAN,
    };
    s.le("H_s4 - e^-sigma H_r4 at K0 = 1", pointwise, 1e-8);
    let mut dh = Vec::new();
    let mut dk = Vec::new();
    let k0s = [1e-3, 5e-4, 2.5e-4];
    for k0 in k0s {
        let rep = conformal_ambient_geometry(&chart, ConformalFactor::S4 { k0 }, &sols, &p)?;
        let diff = |a: &Option<ScalarField>, b: &Option<ScalarField>| match (a, b) {
            (Some(a), Some(b)) => max_abs_diff(a, b, Some(&rep.degeneracy_mask)),
            _ => f64::NAN,
        };
        dh.push(diff(&rep.h_scalar, &flat.h_scalar));
        dk.push(diff(&rep.k, &flat.k));
    }
    for k in 1..k0s.len() {
        s.le(format!("H order in K0 |q - 1| ({:.1e})", k0s[k]), (order(dh[k - 1], dh[k]) - 1.0).abs(), 0.2);
        s.le(format!("K order in K0 |q - 1| ({:.1e})", k0s[k]), (order(dk[k - 1], dk[k]) - 1.0).abs(), 0.2);
    }
    Ok(())
}

fn mvn_conservation(s: &mut Sheet) -> Result<()> {
    let st = fixtures::flow_bump(128, 0.5)?;
    let dt = step_limit(&st, DEFAULT_CFL);
    let drift = run_flow(st.clone(), 1000.0 * dt, dt, 100)?.relative_w_drift();
    s.le("128^2, 1000 steps: relative W drift", drift, 1e-6);
    let half = run_flow(st, 1000.0 * dt, dt / 2.0, 200)?.relative_w_drift();
    s.le("drift ratio under dt/2: |r/16 - 1|", (drift / half / 16.0 - 1.0).abs(), 0.3);

    let mut c = fixtures::flow_constant(32, 0.7)?;
    let p0 = c.p.p().clone();
    let dtc = step_limit(&c, DEFAULT_CFL);
    for _ in 0..10 {
        c = step_rk4(&c, dtc)?;
    }
    s.le("constant p stationary", max_abs_diff(c.p.p(), &p0, None), 1e-12);

    let st = fixtures::flow_with_spinors(64, 0.2)?;
    let dt = step_limit(&st, DEFAULT_CFL);
    let surface = |f: &FlowState| -> Result<f64> {
        let rep = analyze(&build_r4(&f.p, &f.sols[0], &f.sols[1])?, &f.sols, &f.p)?;
        Ok(rel(rep.w_direct.unwrap_or(f64::NAN), f.willmore()))
    };
    s.le("surface W vs 4 int p^2 at t = 0", surface(&st)?, 1e-4);
    let traj = run_flow(st, 1000.0 * dt, dt, 100)?;
    s.le("surface W vs 4 int p^2 at t = T", surface(&traj.final_state)?, 1e-4);
    Ok(())
}

fn stacked(s: &mut Sheet) -> Result<()> {
    let (p, sols) = fixtures::torus_mixed(32, 1e-13)?;
    let r6 = build_stacked(&p, &sols, &[Block::Triple(0), Block::Triple(1)])?;
    s.opt("R6 factor u1^2 + u2^2", analyze(&r6, &sols, &p)?.metric_identity_error, 1e-8);
    let r10 = build_stacked(&p, &sols, &[Block::Triple(0), Block::Quad(0, 1), Block::Triple(1)])?;
    s.opt("R10 factor u1^2 + u1u2 + u2^2", analyze(&r10, &sols, &p)?.metric_identity_error, 1e-8);
    Ok(())
}

fn verify_timing(s: &mut Sheet) -> Result<()> {
    for (level, name, limit) in [(Level::Quick, "quick", 60.0), (Level::Full, "full", 600.0)] {
        let t = Instant::now();
        let rep = verify::run(level);
        s.le(format!("{name}: seconds"), t.elapsed().as_secs_f64(), limit);
        s.le(format!("{name}: failing checks of {}", rep.checks.len()), rep.failures().count() as f64, 0.0);
    }
    Ok(())
}

fn main() -> ExitCode {
    type Criterion = fn(&mut Sheet) -> Result<()>;
    let criteria: [(&str, Criterion); 11] = [
        ("Dirac identities and tolerance scaling", dirac_identities),
        ("conformality and refinement order", conformality),
        ("metric identity", metric_identity),
        ("curvature identities and fixtures", curvature),
        ("Willmore energy of the Gaussian bump", willmore_gaussian),
        ("R4 reduces to R3", reduction),
        ("Gauss map suite", gauss_suite),
        ("S4 ambient and K0 limit", conformal_ambient),
        ("mVN conservation", mvn_conservation),
        ("stacked-space metrics", stacked),
        ("verify levels and timing", verify_timing),
    ];
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut sheet = Sheet::default();
        let outcome = f(&mut sheet);
        let ok = outcome.is_ok() && !sheet.0.is_empty() && sheet.0.iter().all(Measure::ok);
        failed += usize::from(!ok);
        println!("{} {:>2}. {title} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, i + 1, t.elapsed().as_secs_f64());
        for m in &sheet.0 {
            let rel = if m.at_least { ">=" } else { "<=" };
            let mark = if m.ok() { " " } else { "!" };
            println!("     {mark} {:<48} {:>12.4e} {rel} {:.1e}", m.name, m.value, m.bound);
        }
        if let Err(e) = outcome {
            println!("     ! error: {e}");
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
