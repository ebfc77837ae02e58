//! Modified Veselov-Novikov deformation of a periodic potential together with
//! its spinor solutions.
//!
//! ```text
//! p_t     = p_zzz + 3 p_z w + (3/2) p w_z + c.c.,   w_zbar = (p^2)_z
//! psi_t   = A psi + B phi
//! phi_t   = C psi + D phi
//! ```
//!
//! `w` is fixed in the zero-mean gauge. Time stepping is classical RK4.

use num_complex::Complex64;

use crate::dirac::{Potential, SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{willmore, Signature};
use crate::ops::{d_z, d_zbar, dealias, inv_dz, inv_dzbar, product_dealiased, quadrature};
use crate::spectral::Spectrum;

/// Default constant in the step guard `dt <= c h^3`.
pub const DEFAULT_CFL: f64 = 0.1;
/// Largest imaginary part of `p_t` tolerated relative to its size.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;

fn require_flow_potential(p: &Potential) -> Result<()> {
    if !p.grid().is_periodic() {
        return Err(Error::NonPeriodicGrid);
    }
    if p.kind() != SystemKind::Euclidean {
        return Err(Error::KindMismatch { expected: "euclidean".into(), found: p.kind().as_str().into() });
    }
    Ok(())
}

/// `w` with `w_zbar = (p^2)_z` and zero mean.
pub fn omega_of(p: &Potential) -> Result<ScalarField> {
    if !p.grid().is_periodic() {
        return Err(Error::NonPeriodicGrid);
    }
    inv_dzbar(&d_z(&product_dealiased(p.p(), p.p())))
}

/// Right-hand side of the potential equation.
///
/// The conjugate half is evaluated independently (with `conj(w)` obtained by
/// inverting `d_z`), so the imaginary part of the sum measures the numerical
/// consistency of the two halves. It is discarded once checked.
pub fn rhs_p(p: &Potential) -> Result<ScalarField> {
    require_flow_potential(p)?;
    let pf = p.p();
    let p2 = product_dealiased(pf, pf);
    let w = inv_dzbar(&d_z(&p2))?;
    let wb = inv_dz(&d_zbar(&p2))?;
    let half = |d: fn(&ScalarField) -> ScalarField, w: &ScalarField| {
        let pd = d(pf);
        let mut out = d(&d(&pd));
        out = &out + &(&product_dealiased(&pd, w) * 3.0);
        &out + &(&product_dealiased(pf, &d(w)) * 1.5)
    };
    let rhs = &half(d_z, &w) + &half(d_zbar, &wb);
    let size = rhs.norm_inf();
    let imag = rhs.max_imag();
    if imag > IMAGINARY_TOLERANCE * size.max(1.0) {
        return Err(Error::ImaginaryDrift { ratio: imag / size.max(f64::MIN_POSITIVE) });
    }
    Ok(rhs.re())
}

/// `(psi_t, phi_t) = (A psi + B phi, C psi + D phi)` with
///
/// ```text
/// A = d_z^3 + d_zbar^3 + 3 conj(w) d_zbar + (3/2) conj(w)_zbar
/// B = -3 p_z d_z + 3 p w
/// C = 3 p_zbar d_zbar - 3 p conj(w)
/// D = d_z^3 + d_zbar^3 + 3 w d_z + (3/2) w_z
/// ```
pub fn apply_abcd(p: &Potential, omega: &ScalarField, s: &SpinorSolution) -> Result<(ScalarField, ScalarField)> {
    let pf = p.p();
    pf.check_grid(omega)?;
    pf.check_grid(&s.psi)?;
    pf.check_grid(&s.phi)?;
    Ok(abcd_fields(pf, omega, &s.psi, &s.phi))
}

fn cube(f: &ScalarField) -> ScalarField {
    &d_z(&d_z(&d_z(f))) + &d_zbar(&d_zbar(&d_zbar(f)))
}

fn abcd_fields(p: &ScalarField, w: &ScalarField, psi: &ScalarField, phi: &ScalarField) -> (ScalarField, ScalarField) {
    let wb = w.conj();
    let (pz, pzb) = (d_z(p), d_zbar(p));
    let pw = product_dealiased(p, w);
    let pwb = pw.conj();
    let psi_zb = d_zbar(psi);
    let phi_z = d_z(phi);

    let a = &(&cube(psi) + &(&(&wb * &psi_zb) * 3.0)) + &(&(&d_zbar(&wb) * psi) * 1.5);
    let b = &(&(&pz * &phi_z) * -3.0) + &(&(&pw * phi) * 3.0);
    let c = &(&(&pzb * &psi_zb) * 3.0) - &(&(&pwb * psi) * 3.0);
    let d = &(&cube(phi) + &(&(w * &phi_z) * 3.0)) + &(&(&d_z(w) * phi) * 1.5);
    (&a + &b, &c + &d)
}

/// One evolution law of the hierarchy: rates for the potential and for each
/// spinor pair at a given stage.
pub trait FlowEquation {
    fn name(&self) -> &str;
    fn rates(&self, p: &Potential, spinors: &[(ScalarField, ScalarField)]) -> Result<StageRates>;
}

#[derive(Debug, Clone)]
pub struct StageRates {
    pub p_t: ScalarField,
    pub spinors_t: Vec<(ScalarField, ScalarField)>,
}

/// The first nonlinear member of the hierarchy.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mvn;

impl FlowEquation for Mvn {
    fn name(&self) -> &str {
        "mvn"
    }

    /// Same arithmetic as [`rhs_p`] and [`apply_abcd`], arranged to reuse
    /// spectra: `p` is real, so `p_zbar = conj(p_z)` and the conjugate half of
    /// `p_t` is taken literally.
    fn rates(&self, p: &Potential, spinors: &[(ScalarField, ScalarField)]) -> Result<StageRates> {
        require_flow_potential(p)?;
        let pf = p.p();
        let sp = Spectrum::new(pf)?;
        let pz = sp.derivative(1, 0);
        let p_zzz = sp.derivative(3, 0);
        let q = Spectrum::new(&(pf * pf))?;
        let ratio = |i: usize, j: usize| {
            let b = q.sym_dzbar(i, j);
            if q.in_band(i, j) && b.norm_sqr() > 0.0 {
                q.sym_dz(i, j) / b
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let w = q.apply(ratio);
        let wz = q.apply(|i, j| ratio(i, j) * q.sym_dz(i, j));

        let n = pointwise(&[pf, &pz, &w, &wz], |v| 3.0 * v[1] * v[2] + 1.5 * v[0] * v[3]);
        let e = &p_zzz + &dealias(&n);
        let p_t = e.map_real(|x| 2.0 * x);

        let pw = dealias(&(pf * &w));
        let spinors_t = spinors
            .iter()
            .map(|(psi, phi)| {
                let sa = Spectrum::new(psi).expect("periodic");
                let sb = Spectrum::new(phi).expect("periodic");
                let cube = |s: &Spectrum| s.apply(|i, j| s.sym_dz(i, j).powu(3) + s.sym_dzbar(i, j).powu(3));
                let (psi3, psi_zb) = (cube(&sa), sa.derivative(0, 1));
                let (phi3, phi_z) = (cube(&sb), sb.derivative(1, 0));
                let f = [psi, phi, &psi3, &psi_zb, &phi3, &phi_z, &pz, &w, &wz, &pw];
                let psi_t = pointwise(&f, |v| {
                    let (psi, phi, psi3, psi_zb, phi_z, pz, w, wz, pw) = (v[0], v[1], v[2], v[3], v[5], v[6], v[7], v[8], v[9]);
                    psi3 + 3.0 * w.conj() * psi_zb + 1.5 * wz.conj() * psi - 3.0 * pz * phi_z + 3.0 * pw * phi
                });
                let phi_t = pointwise(&f, |v| {
                    let (psi, phi, psi_zb, phi3, phi_z, pz, w, wz, pw) = (v[0], v[1], v[3], v[4], v[5], v[6], v[7], v[8], v[9]);
                    3.0 * pz.conj() * psi_zb - 3.0 * pw.conj() * psi + phi3 + 3.0 * w * phi_z + 1.5 * wz * phi
                });
                (psi_t, phi_t)
            })
            .collect();
        Ok(StageRates { p_t, spinors_t })
    }
}

/// Evaluates `f` on the values of several fields at each point.
fn pointwise<const N: usize>(fields: &[&ScalarField; N], f: impl Fn([Complex64; N]) -> Complex64) -> ScalarField {
    let n = fields[0].len();
    let values = (0..n).map(|k| f(std::array::from_fn(|m| fields[m].values()[k]))).collect();
    ScalarField::from_values(*fields[0].grid(), values).expect("same grid")
}

/// Potential and co-evolving solutions at time `t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub p: Potential,
    pub sols: Vec<SpinorSolution>,
    pub omega: ScalarField,
}

impl FlowState {
    pub fn new(p: Potential, sols: Vec<SpinorSolution>) -> Result<Self> {
        require_flow_potential(&p)?;
        for s in &sols {
            if s.kind != p.kind() {
                return Err(Error::KindMismatch { expected: p.kind().as_str().into(), found: s.kind.as_str().into() });
            }
            s.psi.check_grid(p.p())?;
        }
        let omega = omega_of(&p)?;
        Ok(Self { t: 0.0, p, sols, omega })
    }

    /// `4 int p^2`.
    pub fn willmore(&self) -> f64 {
        willmore(&self.p, Signature::Euclidean)
    }

    /// Worst normalised Dirac residual over the solutions (0 without solutions).
    pub fn dirac_residual(&self) -> f64 {
        self.sols.iter().map(|s| s.residual_norm()).fold(0.0, f64::max)
    }

    pub fn p_integral(&self) -> f64 {
        quadrature(self.p.p()).re
    }

    /// `max |w_zbar - (p^2)_z| / (1 + max |(p^2)_z|)`.
    pub fn omega_defect(&self) -> f64 {
        let target = d_z(&product_dealiased(self.p.p(), self.p.p()));
        let diff = &d_zbar(&self.omega) - &target;
        diff.norm_inf() / (1.0 + target.norm_inf())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Guard constant `c` in `dt <= c h^3`.
    pub cfl: f64,
    /// Skip the guard.
    pub allow_large_steps: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { cfl: DEFAULT_CFL, allow_large_steps: false }
    }
}

/// Largest step allowed by the guard on this grid.
pub fn step_limit(state: &FlowState, cfl: f64) -> f64 {
    let g = state.p.grid();
    cfl * g.hx().min(g.hy()).powi(3)
}

pub fn step_rk4(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_rk4_with(&Mvn, state, dt, StepOptions::default())
}

/// One classical RK4 step applied jointly to `p` and every solution.
pub fn step_rk4_with(eq: &dyn FlowEquation, state: &FlowState, dt: f64, opts: StepOptions) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let limit = step_limit(state, opts.cfl);
    if !opts.allow_large_steps && dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let kind = state.p.kind();
    let p0 = state.p.p().clone();
    let s0: Vec<(ScalarField, ScalarField)> = state.sols.iter().map(|s| (s.psi.clone(), s.phi.clone())).collect();

    let advance = |k: &StageRates, a: f64| -> Result<(Potential, Vec<(ScalarField, ScalarField)>)> {
        let p = Potential::new(&p0 + &(&k.p_t * a), kind)?;
        let s = s0
            .iter()
            .zip(&k.spinors_t)
            .map(|((psi, phi), (dpsi, dphi))| (psi + &(dpsi * a), phi + &(dphi * a)))
            .collect();
        Ok((p, s))
    };

    let k1 = eq.rates(&state.p, &s0)?;
    let (p1, s1) = advance(&k1, 0.5 * dt)?;
    let k2 = eq.rates(&p1, &s1)?;
    let (p2, s2) = advance(&k2, 0.5 * dt)?;
    let k3 = eq.rates(&p2, &s2)?;
    let (p3, s3) = advance(&k3, dt)?;
    let k4 = eq.rates(&p3, &s3)?;

    let combine = |a: &ScalarField, b: &ScalarField, c: &ScalarField, d: &ScalarField| {
        let sum = &(&(a + &(b * 2.0)) + &(c * 2.0)) + d;
        &sum * (dt / 6.0)
    };
    let p_new = Potential::new(&p0 + &combine(&k1.p_t, &k2.p_t, &k3.p_t, &k4.p_t), kind)?;
    let mut sols = Vec::with_capacity(s0.len());
    for (n, (psi, phi)) in s0.iter().enumerate() {
        let dpsi = combine(&k1.spinors_t[n].0, &k2.spinors_t[n].0, &k3.spinors_t[n].0, &k4.spinors_t[n].0);
        let dphi = combine(&k1.spinors_t[n].1, &k2.spinors_t[n].1, &k3.spinors_t[n].1, &k4.spinors_t[n].1);
        sols.push(SpinorSolution::new(psi + &dpsi, phi + &dphi, &p_new, state.sols[n].label.clone())?);
    }
    let omega = omega_of(&p_new)?;
    Ok(FlowState { t: state.t + dt, p: p_new, sols, omega })
}

/// Observables recorded along a run.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub w_values: Vec<f64>,
    pub dirac_residuals: Vec<f64>,
    /// `int p`, monitored but not expected to be conserved.
    pub p_integrals: Vec<f64>,
    pub p_snapshots: Option<Vec<ScalarField>>,
    pub steps: usize,
    pub dt: f64,
    pub final_state: FlowState,
}

impl FlowTrajectory {
    /// `max_t |W(t) - W(0)| / |W(0)|` (absolute when `W(0) = 0`).
    pub fn relative_w_drift(&self) -> f64 {
        let w0 = self.w_values[0];
        let scale = if w0 == 0.0 { 1.0 } else { w0.abs() };
        self.w_values.iter().fold(0.0, |m, w| m.max((w - w0).abs() / scale))
    }

    /// Growth of the Dirac residual over the run.
    pub fn residual_growth(&self) -> f64 {
        let r0 = self.dirac_residuals[0];
        self.dirac_residuals.iter().fold(0.0, |m, r| m.max(r - r0))
    }

    /// Rows `t,W,dirac_residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,W,dirac_residual\n");
        for k in 0..self.times.len() {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", self.times[k], self.w_values[k], self.dirac_residuals[k]));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub step: StepOptions,
    pub keep_snapshots: bool,
}

pub fn run_flow(state: FlowState, t_end: f64, dt: f64, record_every: usize) -> Result<FlowTrajectory> {
    run_flow_observed(&Mvn, state, t_end, dt, record_every, RunOptions::default(), |_| Ok(()))
}

/// Steps to `t_end` with `ceil(t_end/dt)` equal steps, recording every
/// `record_every` steps and at the end. `observe` sees every recorded state.
pub fn run_flow_observed(
    eq: &dyn FlowEquation,
    mut state: FlowState,
    t_end: f64,
    dt: f64,
    record_every: usize,
    opts: RunOptions,
    mut observe: impl FnMut(&FlowState) -> Result<()>,
) -> Result<FlowTrajectory> {
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    let t0 = state.t;

    let mut traj = FlowTrajectory {
        times: Vec::new(),
        w_values: Vec::new(),
        dirac_residuals: Vec::new(),
        p_integrals: Vec::new(),
        p_snapshots: opts.keep_snapshots.then(Vec::new),
        steps,
        dt: h,
        final_state: state.clone(),
    };
    let mut record = |s: &FlowState, traj: &mut FlowTrajectory| -> Result<()> {
        traj.times.push(s.t);
        traj.w_values.push(s.willmore());
        traj.dirac_residuals.push(s.dirac_residual());
        traj.p_integrals.push(s.p_integral());
        if let Some(snaps) = traj.p_snapshots.as_mut() {
            snaps.push(s.p.p().clone());
        }
        observe(s)
    };
    record(&state, &mut traj)?;
    for n in 1..=steps {
        state = step_rk4_with(eq, &state, h, opts.step)?;
        // Keep time exact instead of accumulating rounding.
        state.t = t0 + n as f64 * h;
        if n % record_every == 0 || n == steps {
            record(&state, &mut traj)?;
        }
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_abs_diff;
    use crate::grid::ComplexGrid;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn torus(n: usize, l: f64) -> ComplexGrid {
        ComplexGrid::periodic(n, l, l).unwrap()
    }

    fn real_p(g: ComplexGrid, f: impl Fn(f64, f64) -> f64) -> Potential {
        Potential::new(ScalarField::sample_real(g, f), SystemKind::Euclidean).unwrap()
    }

    #[test]
    fn omega_of_constant_and_single_mode() {
        let g = torus(32, 2.0 * PI);
        assert!(omega_of(&real_p(g, |_, _| 0.7)).unwrap().norm_inf() < 1e-14);
        // p = cos x: (p^2)_z = -(1/2) sin 2x = w_zbar = (1/2) w_x, so w = (1/2) cos 2x.
        let p = real_p(g, |x, _| x.cos());
        let w = omega_of(&p).unwrap();
        let want = ScalarField::sample_real(g, |x, _| 0.5 * (2.0 * x).cos());
        assert!(max_abs_diff(&w, &want, None) < 1e-12);
        let st = FlowState::new(p, vec![]).unwrap();
        assert!(st.omega_defect() < 1e-12);
    }

    #[test]
    fn open_grid_is_rejected() {
        let g = ComplexGrid::open(16, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(omega_of(&real_p(g, |_, _| 1.0)), Err(Error::NonPeriodicGrid)));
    }

    #[test]
    fn linear_dispersion_of_a_small_mode() {
        let g = torus(32, 2.0 * PI);
        let eps = 1e-5;
        let k = 2.0;
        let p = real_p(g, |x, _| eps * (k * x).cos());
        let r = rhs_p(&p).unwrap();
        // (d_z^3 + d_zbar^3) cos kx = 2 (1/2)^3 d_x^3 cos kx = (k^3/4) sin kx.
        let want = ScalarField::sample_real(g, |x, _| eps * k.powi(3) / 4.0 * (k * x).sin());
        assert!(max_abs_diff(&r, &want, None) < 1e-8 * eps.max(1e-3));
    }

    #[test]
    fn free_flow_and_exponential_solution() {
        let g = torus(16, 2.0 * PI);
        // p = 1, psi = e^{2ix}, phi = i psi solves psi_z = p phi, phi_zbar = -p psi.
        let p = real_p(g, |_, _| 1.0);
        let psi = ScalarField::sample(g, |z| (c(0.0, 2.0) * z.re).exp());
        let s = SpinorSolution::new(psi.clone(), psi.scale(c(0.0, 1.0)), &p, "exp").unwrap();
        assert!(s.residual_norm() < 1e-13);
        let w = omega_of(&p).unwrap();
        let (pt, ft) = apply_abcd(&p, &w, &s).unwrap();
        // A psi = (i^3 + i^3) psi, B phi = 0 with w = 0.
        assert!(max_abs_diff(&pt, &psi.scale(c(0.0, -2.0)), None) < 1e-11);
        assert!(max_abs_diff(&ft, &s.phi.scale(c(0.0, -2.0)), None) < 1e-11);
    }

    #[test]
    fn constant_potential_is_a_fixed_point() {
        let g = torus(16, 2.0 * PI);
        let p = real_p(g, |_, _| 0.8);
        let st = FlowState::new(p, vec![]).unwrap();
        let dt = step_limit(&st, DEFAULT_CFL);
        let traj = run_flow(st.clone(), 20.0 * dt, dt, 5).unwrap();
        assert!(max_abs_diff(traj.final_state.p.p(), st.p.p(), None) < 1e-12);
        assert!(traj.relative_w_drift() < 1e-12);
        assert_eq!(traj.times.len(), 5);
    }

    #[test]
    fn guard_and_arguments() {
        let st = FlowState::new(real_p(torus(16, 2.0 * PI), |x, _| x.cos()), vec![]).unwrap();
        let lim = step_limit(&st, DEFAULT_CFL);
        assert!(matches!(step_rk4(&st, 2.0 * lim), Err(Error::StepTooLarge { .. })));
        let opts = StepOptions { allow_large_steps: true, ..Default::default() };
        assert!(step_rk4_with(&Mvn, &st, 2.0 * lim, opts).is_ok());
        assert!(matches!(run_flow(st, 1.0, lim, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn abcd_is_linear() {
        let g = torus(16, 2.0 * PI);
        let p = real_p(g, |x, y| 0.3 * x.cos() + 0.2 * (x + y).sin());
        let w = omega_of(&p).unwrap();
        let a = ScalarField::sample(g, |z| (c(0.0, 1.0) * z.re).exp() + z.im.cos());
        let b = ScalarField::sample(g, |z| c(z.im.sin(), (2.0 * z.re).cos()));
        let s1 = SpinorSolution::with_recorded_residual(a.clone(), b.clone(), SystemKind::Euclidean, "a", 0.0).unwrap();
        let s2 = SpinorSolution::with_recorded_residual(b.clone(), a.clone(), SystemKind::Euclidean, "b", 0.0).unwrap();
        let (al, be) = (c(0.3, -1.0), c(2.0, 0.5));
        let mix = SpinorSolution::with_recorded_residual(
            &a.scale(al) + &b.scale(be),
            &b.scale(al) + &a.scale(be),
            SystemKind::Euclidean,
            "mix",
            0.0,
        )
        .unwrap();
        let (x1, y1) = apply_abcd(&p, &w, &s1).unwrap();
        let (x2, y2) = apply_abcd(&p, &w, &s2).unwrap();
        let (xm, ym) = apply_abcd(&p, &w, &mix).unwrap();
        assert!(max_abs_diff(&xm, &(&x1.scale(al) + &x2.scale(be)), None) < 1e-11);
        assert!(max_abs_diff(&ym, &(&y1.scale(al) + &y2.scale(be)), None) < 1e-11);
    }

    #[test]
    fn stage_rates_match_reference_operators() {
        let g = torus(32, 2.0 * PI);
        let p = real_p(g, |x, y| 0.4 * x.cos() + 0.3 * (x - 2.0 * y).sin());
        let psi = ScalarField::sample(g, |z| c(z.im.cos(), (2.0 * z.re).sin()));
        let phi = ScalarField::sample(g, |z| (c(0.0, 1.0) * (z.re + z.im)).exp());
        let s = SpinorSolution::with_recorded_residual(psi.clone(), phi.clone(), SystemKind::Euclidean, "s", 0.0).unwrap();
        let fast = Mvn.rates(&p, &[(psi, phi)]).unwrap();
        assert!(max_abs_diff(&fast.p_t, &rhs_p(&p).unwrap(), None) < 1e-11);
        let (a, b) = apply_abcd(&p, &omega_of(&p).unwrap(), &s).unwrap();
        assert!(max_abs_diff(&fast.spinors_t[0].0, &a, None) < 1e-10);
        assert!(max_abs_diff(&fast.spinors_t[0].1, &b, None) < 1e-10);
    }
}
