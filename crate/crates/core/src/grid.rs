//! Rectangular sampling grids on the complex plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grids use spectral operators; open grids use finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Periodic,
    Open,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::Open => "open",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(BoundaryMode::Periodic),
            "open" => Ok(BoundaryMode::Open),
            other => Err(Error::InvalidArgument(format!("unknown boundary mode '{other}'"))),
        }
    }
}

/// Grid of `nx * ny` points covering `[x0, x0+lx] x [y0, y0+ly]`.
///
/// Periodic grids omit the right/top endpoint (point `i` sits at
/// `x0 + i*lx/nx`); open grids include both ends (`h = lx/(nx-1)`).
/// Values are stored with the x index as the slow axis: `idx = i*ny + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
    pub mode: BoundaryMode,
}

/// Smallest supported side length.
pub const MIN_POINTS: usize = 4;

impl ComplexGrid {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, lx: f64, ly: f64, mode: BoundaryMode) -> Result<Self> {
        if nx < MIN_POINTS || ny < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got {lx} x {ly}")));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { nx, ny, x0, y0, lx, ly, mode })
    }

    pub fn periodic(n: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(n, n, 0.0, 0.0, lx, ly, BoundaryMode::Periodic)
    }

    pub fn open(n: usize, x0: f64, y0: f64, lx: f64, ly: f64) -> Result<Self> {
        Self::new(n, n, x0, y0, lx, ly, BoundaryMode::Open)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.mode == BoundaryMode::Periodic
    }

    pub fn hx(&self) -> f64 {
        match self.mode {
            BoundaryMode::Periodic => self.lx / self.nx as f64,
            BoundaryMode::Open => self.lx / (self.nx - 1) as f64,
        }
    }

    pub fn hy(&self) -> f64 {
        match self.mode {
            BoundaryMode::Periodic => self.ly / self.ny as f64,
            BoundaryMode::Open => self.ly / (self.ny - 1) as f64,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy()
    }

    #[inline]
    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x(i), self.y(j))
    }

    /// All sample points in storage order.
    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.push(self.z(i, j));
            }
        }
        out
    }

    /// Grids are compatible when they sample the same points in the same way.
    pub fn same_as(&self, other: &ComplexGrid) -> bool {
        let tol = 1e-12 * (1.0 + self.lx.abs() + self.ly.abs());
        self.nx == other.nx
            && self.ny == other.ny
            && self.mode == other.mode
            && (self.x0 - other.x0).abs() <= tol
            && (self.y0 - other.y0).abs() <= tol
            && (self.lx - other.lx).abs() <= tol
            && (self.ly - other.ly).abs() <= tol
    }

    /// Same domain and boundary mode with a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, self.x0, self.y0, self.lx, self.ly, self.mode)
    }
}
