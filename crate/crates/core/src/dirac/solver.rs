//! Neumann-series iteration for periodic Dirac systems.

use super::{Potential, SpinorSolution};
use crate::error::{Error, Result};
use crate::ops::{d_z, d_zbar, inv_dz, inv_dzbar};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, damping: 1.0 }
    }
}

/// Solves the system of `p` starting from a `p = 0` solution `seed`:
///
/// ```text
/// psi <- (1-d) psi + d (psi0 + inv_dz(p phi))
/// phi <- (1-d) phi + d (phi0 -+ inv_dzbar(p psi))
/// ```
///
/// until the residual norm drops below `tol`.
pub fn solve_fixed_point(p: &Potential, seed: &SpinorSolution, opts: SolverOptions) -> Result<SpinorSolution> {
    solve_fixed_point_traced(p, seed, opts).map(|(s, _)| s)
}

/// As [`solve_fixed_point`], also returning the residual after every iteration.
pub fn solve_fixed_point_traced(
    p: &Potential,
    seed: &SpinorSolution,
    opts: SolverOptions,
) -> Result<(SpinorSolution, Vec<f64>)> {
    if !p.grid().is_periodic() {
        return Err(Error::NonPeriodicGrid);
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping {} outside (0, 1]", opts.damping)));
    }
    if p.kind() != seed.kind {
        return Err(Error::KindMismatch { expected: p.kind().as_str().into(), found: seed.kind.as_str().into() });
    }
    seed.psi.check_grid(p.p())?;
    let scale = 1.0 + seed.psi.norm_inf() + seed.phi.norm_inf();
    let seed_defect = d_z(&seed.psi).norm_inf().max(d_zbar(&seed.phi).norm_inf()) / scale;
    if seed_defect > 1e-8 {
        return Err(Error::InvalidSeed(format!(
            "seed must solve the p = 0 system (psi antiholomorphic, phi holomorphic); defect {seed_defect:.3e}"
        )));
    }

    let sign = p.kind().phi_sign();
    let d = opts.damping;
    let pf = p.p();
    let mut psi = seed.psi.clone();
    let mut phi = seed.phi.clone();
    let mut history = Vec::new();
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let new_psi = &seed.psi + &inv_dz(&(pf * &phi))?;
        let new_phi = &seed.phi + &(&inv_dzbar(&(pf * &psi))? * sign);
        psi = &(&psi * (1.0 - d)) + &(&new_psi * d);
        phi = &(&phi * (1.0 - d)) + &(&new_phi * d);
        let sol = SpinorSolution::new(psi.clone(), phi.clone(), p, format!("solved({})", seed.label))?;
        last = sol.residual_norm();
        history.push(last);
        if !last.is_finite() {
            break;
        }
        if last <= opts.tol {
            return Ok((sol, history));
        }
    }
    Err(Error::NoConvergence { iterations: history.len(), residual: last })
}
