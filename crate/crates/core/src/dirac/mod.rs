//! Two-dimensional Dirac systems `psi_z = p phi`, `phi_zbar = -p psi` and
//! their variants, with analytic families and an iterative solver.

mod families;
mod radial;
mod solver;

pub use families::{analytic_family, ExpMode, Family, Holomorphic};
pub use radial::{radial_solution, radial_solution_signed, GaussianProfile};
pub use solver::{solve_fixed_point, solve_fixed_point_traced, SolverOptions};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;
use crate::ops::{d_z, d_zbar};

/// Which first-order system the spinors satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `psi_z = p phi`, `phi_zbar = -p psi`, real `p`.
    Euclidean,
    /// `psi_z = p phi`, `phi_zbar = p psi`, real `p`.
    Split,
    /// Euclidean shape with complex `p`.
    ComplexP,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Euclidean => "euclidean",
            SystemKind::Split => "split",
            SystemKind::ComplexP => "complex_p",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" => Ok(SystemKind::Euclidean),
            "split" => Ok(SystemKind::Split),
            "complex_p" => Ok(SystemKind::ComplexP),
            other => Err(Error::InvalidArgument(format!("unknown system kind '{other}'"))),
        }
    }

    /// Sign `s` in `phi_zbar = s p psi`.
    pub fn phi_sign(self) -> f64 {
        match self {
            SystemKind::Split => 1.0,
            SystemKind::Euclidean | SystemKind::ComplexP => -1.0,
        }
    }

    pub fn requires_real_potential(self) -> bool {
        !matches!(self, SystemKind::ComplexP)
    }
}

fn kind_mismatch(expected: SystemKind, found: SystemKind) -> Error {
    Error::KindMismatch { expected: expected.as_str().into(), found: found.as_str().into() }
}

/// Potential of a Dirac system.
#[derive(Debug, Clone)]
pub struct Potential {
    p: ScalarField,
    kind: SystemKind,
}

impl Potential {
    /// Real kinds accept a field whose imaginary part is at rounding level and
    /// store it as a real field.
    pub fn new(p: ScalarField, kind: SystemKind) -> Result<Self> {
        let p = if kind.requires_real_potential() { p.to_real(1e-12)? } else { p.as_complex() };
        Ok(Self { p, kind })
    }

    pub fn p(&self) -> &ScalarField {
        &self.p
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn grid(&self) -> &ComplexGrid {
        self.p.grid()
    }
}

/// One solution `(psi, phi)` of a Dirac system.
#[derive(Debug, Clone)]
pub struct SpinorSolution {
    pub psi: ScalarField,
    pub phi: ScalarField,
    pub kind: SystemKind,
    pub label: String,
    residual_norm: f64,
}

/// Pointwise residual fields and their normalised size.
#[derive(Debug, Clone)]
pub struct Residual {
    pub r1: ScalarField,
    pub r2: ScalarField,
    pub norm: f64,
}

fn residual_fields(p: &ScalarField, psi: &ScalarField, phi: &ScalarField, kind: SystemKind) -> Result<Residual> {
    psi.check_grid(p)?;
    phi.check_grid(p)?;
    let r1 = &d_z(psi) - &(p * phi);
    let r2 = &d_zbar(phi) - &(&(p * psi) * kind.phi_sign());
    let norm = r1.norm_inf().max(r2.norm_inf()) / (1.0 + psi.norm_inf() + phi.norm_inf());
    Ok(Residual { r1, r2, norm })
}

/// `r1 = psi_z - p phi`, `r2 = phi_zbar -+ p psi`; the norm is
/// `max(|r1|, |r2|) / (1 + |psi| + |phi|)` in the sup norm.
pub fn residual(p: &Potential, s: &SpinorSolution) -> Result<Residual> {
    if p.kind != s.kind {
        return Err(kind_mismatch(p.kind, s.kind));
    }
    residual_fields(&p.p, &s.psi, &s.phi, s.kind)
}

impl SpinorSolution {
    /// Builds a solution and records its residual against `p`.
    pub fn new(psi: ScalarField, phi: ScalarField, p: &Potential, label: impl Into<String>) -> Result<Self> {
        let psi = psi.as_complex();
        let phi = phi.as_complex();
        let r = residual_fields(&p.p, &psi, &phi, p.kind)?;
        Ok(Self { psi, phi, kind: p.kind, label: label.into(), residual_norm: r.norm })
    }

    /// Builds a solution with a residual value recorded elsewhere (for example
    /// when loading from disk).
    pub fn with_recorded_residual(
        psi: ScalarField,
        phi: ScalarField,
        kind: SystemKind,
        label: impl Into<String>,
        residual_norm: f64,
    ) -> Result<Self> {
        psi.check_grid(&phi)?;
        Ok(Self { psi: psi.as_complex(), phi: phi.as_complex(), kind, label: label.into(), residual_norm })
    }

    /// Constant seed `(psi0, phi0)`, which solves every system with `p = 0`.
    pub fn constant_seed(grid: ComplexGrid, psi0: Complex64, phi0: Complex64, kind: SystemKind) -> Self {
        Self {
            psi: ScalarField::constant(grid, psi0),
            phi: ScalarField::constant(grid, phi0),
            kind,
            label: format!("seed({psi0},{phi0})"),
            residual_norm: 0.0,
        }
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn grid(&self) -> &ComplexGrid {
        self.psi.grid()
    }

    /// `(-conj(phi), conj(psi))`, again a solution of a euclidean system.
    pub fn partner(&self, p: &Potential) -> Result<Self> {
        if self.kind != SystemKind::Euclidean {
            return Err(kind_mismatch(SystemKind::Euclidean, self.kind));
        }
        Self::new(-&self.phi.conj(), self.psi.conj(), p, format!("partner({})", self.label))
    }

    /// Complex linear combination of solutions of the same system.
    pub fn combine(terms: &[(Complex64, &SpinorSolution)], p: &Potential, label: impl Into<String>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidArgument("empty combination".into()))?.1;
        let mut psi = ScalarField::zeros(*first.grid());
        let mut phi = ScalarField::zeros(*first.grid());
        for (c, s) in terms {
            if s.kind != p.kind {
                return Err(kind_mismatch(p.kind, s.kind));
            }
            psi = &psi + &s.psi.scale(*c);
            phi = &phi + &s.phi.scale(*c);
        }
        Self::new(psi, phi, p, label)
    }
}

/// Relative size of `psi1 phi2 - psi2 phi1`; two solutions count as
/// independent when it exceeds [`INDEPENDENCE_THRESHOLD`].
pub fn independence_certificate(s1: &SpinorSolution, s2: &SpinorSolution) -> f64 {
    let det = &(&s1.psi * &s2.phi) - &(&s2.psi * &s1.phi);
    let scale = s1.psi.norm_inf() * s2.phi.norm_inf() + s2.psi.norm_inf() * s1.phi.norm_inf();
    if scale == 0.0 {
        0.0
    } else {
        det.norm_inf() / scale
    }
}

pub const INDEPENDENCE_THRESHOLD: f64 = 1e-8;

pub fn check_independent(s1: &SpinorSolution, s2: &SpinorSolution) -> Result<f64> {
    let c = independence_certificate(s1, s2);
    if c > INDEPENDENCE_THRESHOLD {
        Ok(c)
    } else {
        Err(Error::Dependent { certificate: c })
    }
}

/// Residuals of the bilinear identities `(psi1 psi2)_z + (phi1 phi2)_zbar = 0`
/// and `(psi1 conj(phi2))_z - (phi1 conj(psi2))_zbar = 0` satisfied by any two
/// solutions of a euclidean system, normalised like [`residual`].
pub fn bilinear_identity_residuals(s1: &SpinorSolution, s2: &SpinorSolution) -> (f64, f64) {
    let e1 = &d_z(&(&s1.psi * &s2.psi)) + &d_zbar(&(&s1.phi * &s2.phi));
    let e2 = &d_z(&(&s1.psi * &s2.phi.conj())) - &d_zbar(&(&s1.phi * &s2.psi.conj()));
    let scale = 1.0 + (s1.psi.norm_inf() + s1.phi.norm_inf()) * (s2.psi.norm_inf() + s2.phi.norm_inf());
    (e1.norm_inf() / scale, e2.norm_inf() / scale)
}
