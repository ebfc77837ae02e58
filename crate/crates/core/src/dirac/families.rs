//! Closed-form solution families.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::radial::{radial_solution_signed, GaussianProfile};
use super::{Potential, SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;

/// Holomorphic function of `z` used by the minimal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Holomorphic {
    /// `sum_k c_k z^k`.
    Polynomial { coeffs: Vec<Complex64> },
    /// `amp * exp(rate * z)`.
    Exp { amp: Complex64, rate: Complex64 },
}

impl Holomorphic {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Holomorphic::Polynomial { coeffs } => coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c),
            Holomorphic::Exp { amp, rate } => amp * (rate * z).exp(),
        }
    }
}

/// One term `amp * exp(lambda z + mu zbar)` of an exponential solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMode {
    pub amp: Complex64,
    pub lambda: Complex64,
    pub mu: Complex64,
}

/// Descriptor for [`analytic_family`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Family {
    /// `p = 0`, `psi = conj(psi_bar(z))`, `phi = phi(z)`.
    Minimal { psi_bar: Holomorphic, phi: Holomorphic },
    /// Constant `p`; each entry of `solutions` is a sum of modes with
    /// `psi = sum amp e^{lambda z + mu zbar}` and `phi = sum (lambda/p) amp e^{...}`.
    Exponential { p: Complex64, solutions: Vec<Vec<ExpMode>> },
    /// `p = amp exp(-r^2/width^2)` with rotationally equivariant solutions of
    /// the given windings (see [`crate::dirac::radial_solution`]).
    RadialGaussian { amp: f64, width: f64, windings: Vec<i32> },
}

const DISPERSION_TOL: f64 = 1e-12;

/// Samples an exact family on `grid`; every returned solution records its
/// discrete residual.
pub fn analytic_family(grid: ComplexGrid, kind: SystemKind, family: &Family) -> Result<(Potential, Vec<SpinorSolution>)> {
    match family {
        Family::Minimal { psi_bar, phi } => {
            if kind == SystemKind::ComplexP {
                return Err(Error::InvalidFamily("minimal family has p = 0; use euclidean or split".into()));
            }
            let p = Potential::new(ScalarField::real_constant(grid, 0.0), kind)?;
            let psi = ScalarField::sample(grid, |z| psi_bar.eval(z).conj());
            let ph = ScalarField::sample(grid, |z| phi.eval(z));
            let s = SpinorSolution::new(psi, ph, &p, "minimal")?;
            Ok((p, vec![s]))
        }
        Family::Exponential { p: pc, solutions } => {
            if kind.requires_real_potential() && pc.im != 0.0 {
                return Err(Error::NotReal { max_imag: pc.im.abs() });
            }
            if pc.norm() == 0.0 {
                return Err(Error::InvalidFamily("exponential family needs p != 0; use the minimal family".into()));
            }
            let sign = -kind.phi_sign();
            for modes in solutions {
                for m in modes {
                    // euclidean: lambda mu = -p^2; split: lambda mu = +p^2
                    let defect = (m.lambda * m.mu + sign * pc * pc).norm();
                    if defect > DISPERSION_TOL {
                        return Err(Error::BadDispersion { defect });
                    }
                }
            }
            let field = if kind == SystemKind::ComplexP {
                ScalarField::constant(grid, *pc)
            } else {
                ScalarField::real_constant(grid, pc.re)
            };
            let p = Potential::new(field, kind)?;
            let out = solutions
                .iter()
                .enumerate()
                .map(|(k, modes)| {
                    let psi = ScalarField::sample(grid, |z| {
                        modes.iter().map(|m| m.amp * (m.lambda * z + m.mu * z.conj()).exp()).sum()
                    });
                    let phi = ScalarField::sample(grid, |z| {
                        modes.iter().map(|m| m.amp * m.lambda / pc * (m.lambda * z + m.mu * z.conj()).exp()).sum()
                    });
                    SpinorSolution::new(psi, phi, &p, format!("exponential[{k}]"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((p, out))
        }
        Family::RadialGaussian { amp, width, windings } => {
            if kind == SystemKind::ComplexP {
                return Err(Error::InvalidFamily("radial family needs a real potential system".into()));
            }
            let profile = GaussianProfile::new(*amp, *width)?;
            let p = Potential::new(ScalarField::sample_real(grid, |x, y| profile.eval(x.hypot(y))), kind)?;
            let out = windings
                .iter()
                .map(|&m| {
                    let (psi, phi) = radial_solution_signed(grid, &profile, m, kind.phi_sign());
                    SpinorSolution::new(psi, phi, &p, format!("radial[m={m}]"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((p, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn minimal_enneper_seed() {
        let g = ComplexGrid::open(9, -1.0, -1.0, 2.0, 2.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0), c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
        };
        let (p, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        assert_eq!(p.p().norm_inf(), 0.0);
        assert!(s[0].residual_norm() < 1e-12);
        assert!((s[0].psi.at(8, 0) - c(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn exponential_dispersion() {
        let g = ComplexGrid::new(8, 16, 0.0, 0.0, 1.0, PI, crate::grid::BoundaryMode::Periodic).unwrap();
        let ok = Family::Exponential {
            p: c(1.0, 0.0),
            solutions: vec![vec![ExpMode { amp: c(1.0, 0.0), lambda: c(1.0, 0.0), mu: c(-1.0, 0.0) }]],
        };
        let (_, s) = analytic_family(g, SystemKind::Euclidean, &ok).unwrap();
        assert!(s[0].residual_norm() <= 1e-10);
        assert!(s[0].psi.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        assert!(crate::field::max_abs_diff(&s[0].psi, &s[0].phi, None) < 1e-15);

        let bad = Family::Exponential {
            p: c(1.0, 0.0),
            solutions: vec![vec![ExpMode { amp: c(1.0, 0.0), lambda: c(1.0, 0.0), mu: c(1.0, 0.0) }]],
        };
        assert!(matches!(analytic_family(g, SystemKind::Euclidean, &bad), Err(Error::BadDispersion { .. })));
        // The same modes satisfy the split relation lambda mu = p^2.
        assert!(analytic_family(g, SystemKind::Split, &bad).is_ok());
    }
}
