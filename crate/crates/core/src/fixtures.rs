//! Reference surfaces and flow states shared by the verification suite,
//! the command-line tool and the integration tests.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dirac::{
    analytic_family, solve_fixed_point, ExpMode, Family, Holomorphic, Potential, SolverOptions, SpinorSolution,
    SystemKind,
};
use crate::error::Result;
use crate::field::ScalarField;
use crate::flow::FlowState;
use crate::grid::{BoundaryMode, ComplexGrid};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Amplitude of the torus potential `a (cos x + cos y)`.
pub const TORUS_AMPLITUDE: f64 = 0.3;

/// Damping that makes the solver stop close to its tolerance, so the achieved
/// residual tracks the requested one.
pub const TRACKING_DAMPING: f64 = 0.05;

pub fn torus_grid(n: usize) -> Result<ComplexGrid> {
    ComplexGrid::periodic(n, 2.0 * PI, 2.0 * PI)
}

/// `p = a (cos x + cos y)` on the `2 pi` torus.
pub fn torus_potential(n: usize, amp: f64) -> Result<Potential> {
    let g = torus_grid(n)?;
    Potential::new(ScalarField::sample_real(g, |x, y| amp * (x.cos() + y.cos())), SystemKind::Euclidean)
}

/// Solutions grown from the constant seeds `(1, 0)` and `(0, 1)`.
pub fn torus_pair(p: &Potential, opts: SolverOptions) -> Result<(SpinorSolution, SpinorSolution)> {
    let g = *p.grid();
    let a = solve_fixed_point(p, &SpinorSolution::constant_seed(g, ONE, ZERO, p.kind()), opts)?;
    let b = solve_fixed_point(p, &SpinorSolution::constant_seed(g, ZERO, ONE, p.kind()), opts)?;
    Ok((a, b))
}

/// The combinations `a + b` and `a + i b` of [`torus_pair`]; unlike the raw
/// pair, both have `phi` bounded away from zero.
pub fn torus_mixed(n: usize, tol: f64) -> Result<(Potential, Vec<SpinorSolution>)> {
    let p = torus_potential(n, TORUS_AMPLITUDE)?;
    let (a, b) = torus_pair(&p, SolverOptions { tol, ..Default::default() })?;
    let s1 = SpinorSolution::combine(&[(ONE, &a), (ONE, &b)], &p, "a+b")?;
    let s2 = SpinorSolution::combine(&[(ONE, &a), (I, &b)], &p, "a+ib")?;
    Ok((p, vec![s1, s2]))
}

/// `p = amp exp(-r^2)` on the open square `[-half, half]^2` with the radial
/// solutions of winding 1 and 0.
pub fn gaussian(n: usize, half: f64, amp: f64, kind: SystemKind) -> Result<(Potential, Vec<SpinorSolution>)> {
    let g = ComplexGrid::open(n, -half, -half, 2.0 * half, 2.0 * half)?;
    analytic_family(g, kind, &Family::RadialGaussian { amp, width: 1.0, windings: vec![1, 0] })
}

/// `p = 1`, `psi = phi = e^{z - zbar}`: a round cylinder of radius 1/2, so
/// `H = 1` and `K = 0`.
pub fn cylinder(n: usize) -> Result<(Potential, Vec<SpinorSolution>)> {
    let g = ComplexGrid::new(n, n, 0.0, 0.0, 1.0, PI, BoundaryMode::Periodic)?;
    let fam = Family::Exponential {
        p: ONE,
        solutions: vec![vec![ExpMode { amp: ONE, lambda: ONE, mu: -ONE }]],
    };
    analytic_family(g, SystemKind::Euclidean, &fam)
}

/// `p = 0`, `conj(psi) = z`, `phi = 1` on `[-1, 1]^2`: Enneper's surface.
pub fn enneper(n: usize) -> Result<(Potential, Vec<SpinorSolution>)> {
    let g = ComplexGrid::open(n, -1.0, -1.0, 2.0, 2.0)?;
    let fam = Family::Minimal {
        psi_bar: Holomorphic::Polynomial { coeffs: vec![ZERO, ONE] },
        phi: Holomorphic::Polynomial { coeffs: vec![ONE] },
    };
    analytic_family(g, SystemKind::Euclidean, &fam)
}

/// Band-limited potential on a torus of side `16 pi`:
/// `amp (cos kx + 0.5 sin k(x + 2y) + 0.3 cos 2ky)` with `k = 1/8`.
pub fn flow_bump(n: usize, amp: f64) -> Result<FlowState> {
    let l = 16.0 * PI;
    let g = ComplexGrid::periodic(n, l, l)?;
    let k = 0.125;
    let p = ScalarField::sample_real(g, |x, y| {
        amp * ((k * x).cos() + 0.5 * (k * (x + 2.0 * y)).sin() + 0.3 * (2.0 * k * y).cos())
    });
    FlowState::new(Potential::new(p, SystemKind::Euclidean)?, Vec::new())
}

/// `p = amp (cos x + cos y + 0.5 sin(x - y))` on the `2 pi` torus, carrying
/// the solver pair of [`torus_pair`].
pub fn flow_with_spinors(n: usize, amp: f64) -> Result<FlowState> {
    let g = torus_grid(n)?;
    let p = Potential::new(
        ScalarField::sample_real(g, |x, y| amp * (x.cos() + y.cos() + 0.5 * (x - y).sin())),
        SystemKind::Euclidean,
    )?;
    let (a, b) = torus_pair(&p, SolverOptions { tol: 1e-13, ..Default::default() })?;
    FlowState::new(p, vec![a, b])
}

/// Constant potential, a fixed point of the flow.
pub fn flow_constant(n: usize, value: f64) -> Result<FlowState> {
    let g = torus_grid(n)?;
    FlowState::new(Potential::new(ScalarField::real_constant(g, value), SystemKind::Euclidean)?, Vec::new())
}
