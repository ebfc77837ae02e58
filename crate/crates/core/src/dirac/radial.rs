//! Rotationally equivariant solutions for radial potentials.
//!
//! With `psi = a(r) e^{i m theta}` and `phi = b(r) e^{i (m-1) theta}` the
//! system `psi_z = p phi`, `phi_zbar = s p psi` becomes the real ODE pair
//!
//! ```text
//! a' = -(m/r) a + 2 p b,    b' = ((m-1)/r) b + 2 s p a.
//! ```
//!
//! For `m >= 1` the regular solution starts as `b ~ r^(m-1)`, `a ~ (p(0)/m) r^m`;
//! it is integrated with RK4 to each grid radius. Windings `m <= 0` are
//! obtained from `1 - m` through the partner map, `(psi, phi) -> (-conj phi, conj psi)`
//! for `s = -1` and `(psi, phi) -> (conj phi, conj psi)` for `s = +1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;

/// `p(r) = amp * exp(-r^2 / width^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    pub amp: f64,
    pub width: f64,
}

impl GaussianProfile {
    pub fn new(amp: f64, width: f64) -> Result<Self> {
        if !(amp.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::InvalidFamily(format!("bad gaussian profile amp={amp} width={width}")));
        }
        Ok(Self { amp, width })
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.amp * (-(r * r) / (self.width * self.width)).exp()
    }

    /// Coefficients `(p0, p2)` of `p = p0 + p2 r^2 + O(r^4)`.
    fn taylor(&self) -> (f64, f64) {
        (self.amp, -self.amp / (self.width * self.width))
    }
}

/// Largest RK4 step in r.
const MAX_STEP: f64 = 1e-3;
/// Largest step relative to the current radius.
const REL_STEP: f64 = 0.02;
/// Radius where the series start hands over to the integrator.
const R_START: f64 = 1e-3;

struct Ode<'a> {
    profile: &'a GaussianProfile,
    m: f64,
    sign: f64,
}

impl Ode<'_> {
    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let p = self.profile.eval(r);
        [-(self.m / r) * y[0] + 2.0 * p * y[1], ((self.m - 1.0) / r) * y[1] + 2.0 * self.sign * p * y[0]]
    }

    fn step(&self, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
        let add = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
        let k1 = self.rhs(r, y);
        let k2 = self.rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.rhs(r + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Two-term series of the regular solution, normalised by `b ~ r^(m-1)`.
    fn series(&self, r: f64) -> [f64; 2] {
        let (p0, p2) = self.profile.taylor();
        let m = self.m;
        let a0 = p0 / m;
        let beta2 = self.sign * p0 * a0;
        let a2 = (p0 * beta2 + p2) / (m + 1.0);
        let rm1 = r.powi(m as i32 - 1);
        [rm1 * r * (a0 + a2 * r * r), rm1 * (1.0 + beta2 * r * r)]
    }
}

/// Values `(a, b)` of the winding-`m` (`m >= 1`) regular solution at the
/// requested radii.
fn profile_values(profile: &GaussianProfile, m: i32, sign: f64, radii: &[f64]) -> Vec<[f64; 2]> {
    let ode = Ode { profile, m: m as f64, sign };
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&i, &j| radii[i].total_cmp(&radii[j]));
    let mut out = vec![[0.0; 2]; radii.len()];
    let mut r = R_START;
    let mut y = ode.series(R_START);
    for k in order {
        let target = radii[k];
        if target <= R_START {
            out[k] = ode.series(target);
            continue;
        }
        while r < target {
            // Near the origin the 1/r terms dominate; keep h small relative to r.
            let h = (target - r).min(MAX_STEP).min(REL_STEP * r);
            y = ode.step(r, y, h);
            r = if target - r - h < 1e-15 { target } else { r + h };
        }
        out[k] = y;
    }
    out
}

/// Samples the winding-`m` solution `(psi, phi)` of the euclidean system
/// for a gaussian potential.
pub fn radial_solution(grid: ComplexGrid, profile: &GaussianProfile, m: i32) -> (ScalarField, ScalarField) {
    radial_solution_signed(grid, profile, m, -1.0)
}

/// As [`radial_solution`] for `phi_zbar = sign * p * psi` (`sign = -1` euclidean,
/// `+1` split).
pub fn radial_solution_signed(grid: ComplexGrid, profile: &GaussianProfile, m: i32, sign: f64) -> (ScalarField, ScalarField) {
    let (mm, partner) = if m >= 1 { (m, false) } else { (1 - m, true) };
    let pts = grid.points();
    let radii: Vec<f64> = pts.iter().map(|z| z.norm()).collect();
    let ab = profile_values(profile, mm, sign, &radii);
    let phase = |z: Complex64, k: i32| -> Complex64 {
        let r = z.norm();
        if r == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            (z / r).powi(k)
        }
    };
    let psi: Vec<Complex64> = pts.iter().zip(&ab).map(|(&z, v)| phase(z, mm) * v[0]).collect();
    let phi: Vec<Complex64> = pts.iter().zip(&ab).map(|(&z, v)| phase(z, mm - 1) * v[1]).collect();
    let psi = ScalarField::from_values(grid, psi).expect("grid size");
    let phi = ScalarField::from_values(grid, phi).expect("grid size");
    if partner {
        (&phi.conj() * sign, psi.conj())
    } else {
        (psi, phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_integrator_near_origin() {
        let prof = GaussianProfile::new(1.0, 1.0).unwrap();
        for m in 1..=3 {
            let ode = Ode { profile: &prof, m: m as f64, sign: -1.0 };
            let v = profile_values(&prof, m, -1.0, &[0.01]);
            let s = ode.series(0.01);
            // The series drops O(r^4) terms.
            let scale = s[0].abs() + s[1].abs();
            assert!((v[0][0] - s[0]).abs() + (v[0][1] - s[1]).abs() < 1e-7 * scale, "m={m}");
        }
    }

    #[test]
    fn sampled_solutions_solve_the_system() {
        use crate::dirac::{Potential, SpinorSolution, SystemKind};
        let prof = GaussianProfile::new(1.0, 1.0).unwrap();
        let g = ComplexGrid::open(161, -2.0, -2.0, 4.0, 4.0).unwrap();
        let p = Potential::new(ScalarField::sample_real(g, |x, y| prof.eval(x.hypot(y))), SystemKind::Euclidean).unwrap();
        for m in [-1, 0, 1, 2] {
            let (psi, phi) = radial_solution(g, &prof, m);
            let s = SpinorSolution::new(psi, phi, &p, "r").unwrap();
            assert!(s.residual_norm() < 1e-6, "m={m}: {}", s.residual_norm());
        }
        let p = Potential::new(p.p().clone(), SystemKind::Split).unwrap();
        for m in [0, 1, 2] {
            let (psi, phi) = radial_solution_signed(g, &prof, m, 1.0);
            let s = SpinorSolution::new(psi, phi, &p, "r").unwrap();
            assert!(s.residual_norm() < 1e-6, "split m={m}: {}", s.residual_norm());
        }
    }

    #[test]
    fn zero_potential_gives_polynomial_spinors() {
        // With p = 0 the regular winding-2 solution is psi = 0, phi = z.
        let prof = GaussianProfile::new(0.0, 1.0).unwrap();
        let g = ComplexGrid::open(9, -1.0, -1.0, 2.0, 2.0).unwrap();
        let (psi, phi) = radial_solution(g, &prof, 2);
        assert!(psi.norm_inf() < 1e-15);
        let want = ScalarField::sample(g, |z| z);
        assert!(crate::field::max_abs_diff(&phi, &want, None) < 1e-12);
    }
}
