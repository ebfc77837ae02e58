//! Complex- and real-valued samples on a [`ComplexGrid`].

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Real => "real",
            FieldKind::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "real" => Ok(FieldKind::Real),
            "complex" => Ok(FieldKind::Complex),
            other => Err(Error::InvalidArgument(format!("unknown field kind '{other}'"))),
        }
    }

    fn join(self, other: FieldKind) -> FieldKind {
        if self == FieldKind::Real && other == FieldKind::Real {
            FieldKind::Real
        } else {
            FieldKind::Complex
        }
    }
}

/// Samples of a function on a grid. Real fields keep their imaginary parts
/// at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: ComplexGrid,
    values: Vec<Complex64>,
    kind: FieldKind,
}

impl ScalarField {
    pub fn from_values(grid: ComplexGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values, kind: FieldKind::Complex })
    }

    pub fn from_real(grid: ComplexGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: values.len() });
        }
        let values = values.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        Ok(Self { grid, values, kind: FieldKind::Real })
    }

    pub fn zeros(grid: ComplexGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()], kind: FieldKind::Complex }
    }

    pub fn constant(grid: ComplexGrid, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.len()], kind: FieldKind::Complex }
    }

    pub fn real_constant(grid: ComplexGrid, c: f64) -> Self {
        Self { grid, values: vec![Complex64::new(c, 0.0); grid.len()], kind: FieldKind::Real }
    }

    /// Samples `f(z)` at every grid point.
    pub fn sample(grid: ComplexGrid, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values, kind: FieldKind::Complex }
    }

    /// Samples a real function of `(x, y)`.
    pub fn sample_real(grid: ComplexGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.points().into_iter().map(|z| Complex64::new(f(z.re, z.im), 0.0)).collect();
        Self { grid, values, kind: FieldKind::Real }
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Drops the imaginary part and marks the field real.
    pub fn re(&self) -> ScalarField {
        let values = self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Real }
    }

    pub fn im(&self) -> ScalarField {
        let values = self.values.iter().map(|v| Complex64::new(v.im, 0.0)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Real }
    }

    /// Largest |imaginary part|.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Converts to a real field if the imaginary part is small relative to the
    /// field magnitude.
    pub fn to_real(&self, rel_tol: f64) -> Result<ScalarField> {
        let scale = self.norm_inf();
        let mi = self.max_imag();
        if mi > rel_tol * scale.max(f64::MIN_POSITIVE) && mi > 0.0 {
            return Err(Error::NotReal { max_imag: mi });
        }
        Ok(self.re())
    }

    /// Reinterprets the field as complex-valued.
    pub fn as_complex(mut self) -> ScalarField {
        self.kind = FieldKind::Complex;
        self
    }

    pub fn conj(&self) -> ScalarField {
        let values = self.values.iter().map(|v| v.conj()).collect();
        Self { grid: self.grid, values, kind: self.kind }
    }

    pub fn abs(&self) -> ScalarField {
        let values = self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Real }
    }

    /// Pointwise |f|^2.
    pub fn norm_sqr(&self) -> ScalarField {
        let values = self.values.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Real }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ScalarField {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Complex }
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|v| Complex64::new(f(v.re), 0.0)).collect();
        Self { grid: self.grid, values, kind: FieldKind::Real }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<ScalarField> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values, kind: FieldKind::Complex })
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scale(&self, c: Complex64) -> ScalarField {
        let kind = if c.im == 0.0 { self.kind } else { FieldKind::Complex };
        let values = self.values.iter().map(|v| v * c).collect();
        Self { grid: self.grid, values, kind }
    }

    pub fn scale_real(&self, c: f64) -> ScalarField {
        let values = self.values.iter().map(|v| v * c).collect();
        Self { grid: self.grid, values, kind: self.kind }
    }

    /// Sup norm.
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Sup norm restricted to points where `mask` is false.
    pub fn norm_inf_masked(&self, mask: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| !m)
            .fold(0.0, |acc, (v, _)| acc.max(v.norm()))
    }

    /// Arithmetic mean of the samples.
    pub fn mean(&self) -> Complex64 {
        let s: Complex64 = self.values.iter().sum();
        s / self.values.len() as f64
    }

    pub fn min_max_real(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)))
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> ScalarField {
        debug_assert_eq!(values.len(), self.values.len());
        Self { grid: self.grid, values, kind: FieldKind::Complex }
    }

    fn binary(&self, other: &ScalarField, f: impl Fn(Complex64, Complex64) -> Complex64) -> ScalarField {
        assert!(self.grid.same_as(&other.grid), "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values, kind: self.kind.join(other.kind) }
    }
}

impl<'a> Add<&'a ScalarField> for &'a ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &'a ScalarField) -> ScalarField {
        self.binary(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a ScalarField> for &'a ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &'a ScalarField) -> ScalarField {
        self.binary(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a ScalarField> for &'a ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &'a ScalarField) -> ScalarField {
        self.binary(rhs, |a, b| a * b)
    }
}

impl Mul<Complex64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Complex64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale_real(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale_real(-1.0)
    }
}

/// Largest `|a - b|` over points not flagged in `mask`.
pub fn max_abs_diff(a: &ScalarField, b: &ScalarField, mask: Option<&[bool]>) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .filter(|(k, _)| mask.map_or(true, |m| !m[*k]))
        .fold(0.0, |acc, (_, (x, y))| acc.max((x - y).norm()))
}
