//! Complex one-forms `a dz + b dzbar` and their primitives.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{BoundaryMode, ComplexGrid};
use crate::ops::{d_z, d_zbar};
use crate::spectral::Spectrum;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// The one-form `a dz + b dzbar`. Its primitive `X` has `X_x = a + b` and
/// `X_y = i(a - b)`; it is closed when `d_zbar a = d_z b`.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub a: ScalarField,
    pub b: ScalarField,
}

impl OneForm {
    pub fn new(a: ScalarField, b: ScalarField) -> Result<Self> {
        a.check_grid(&b)?;
        Ok(Self { a, b })
    }

    /// The real form `a dz + conj(a) dzbar`.
    pub fn real(a: ScalarField) -> Self {
        let b = a.conj();
        Self { a, b }
    }

    pub fn grid(&self) -> &ComplexGrid {
        self.a.grid()
    }

    /// `max |d_zbar a - d_z b| / (max(|a|, |b|) + eps)`.
    pub fn closedness_residual(&self) -> f64 {
        self.closedness_defect() / (self.size() + 1e-300)
    }

    /// `max |d_zbar a - d_z b|`.
    pub fn closedness_defect(&self) -> f64 {
        (&d_zbar(&self.a) - &d_z(&self.b)).norm_inf()
    }

    /// `max(|a|, |b|)`.
    pub fn size(&self) -> f64 {
        self.a.norm_inf().max(self.b.norm_inf())
    }
}

/// Primitive of a one-form together with diagnostics.
///
/// On periodic grids the primitive is `drift.0 (z - z_b) + drift.1 (zbar - zbar_b) + U`
/// with `U` periodic; `drift` is zero on open grids.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub field: ScalarField,
    pub closedness_residual: f64,
    pub drift: (Complex64, Complex64),
}

/// Integrates `w` so that the result vanishes at grid index `base`.
///
/// Periodic grids use the least-squares (Hodge) primitive computed in Fourier
/// space plus the linear part carried by the mean of the form. Open grids use
/// a fourth-order cumulative rule, first along x through the base row, then
/// along y.
pub fn reconstruct_from_form(w: &OneForm, base: (usize, usize)) -> Result<Reconstruction> {
    let g = *w.grid();
    if base.0 >= g.nx || base.1 >= g.ny {
        return Err(Error::InvalidArgument(format!("base index {:?} outside the grid", base)));
    }
    let closedness_residual = w.closedness_residual();
    let (field, drift) = match g.mode {
        BoundaryMode::Periodic => periodic_primitive(w, base),
        BoundaryMode::Open => (open_primitive(w, base, false), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))),
    };
    Ok(Reconstruction { field, closedness_residual, drift })
}

/// Same as the open-grid rule but integrating along y first; used to check
/// path independence.
pub fn reconstruct_open_transposed(w: &OneForm, base: (usize, usize)) -> Result<ScalarField> {
    if w.grid().is_periodic() {
        return Err(Error::InvalidArgument("transposed path is defined for open grids".into()));
    }
    Ok(open_primitive(w, base, true))
}

fn periodic_primitive(w: &OneForm, base: (usize, usize)) -> (ScalarField, (Complex64, Complex64)) {
    let g = *w.grid();
    let a0 = w.a.mean();
    let b0 = w.b.mean();
    let sa = Spectrum::new(&w.a).expect("periodic");
    let sb = Spectrum::new(&w.b).expect("periodic");
    let symbols = |i: usize, j: usize| (sa.sym_dz(i, j), sa.sym_dzbar(i, j));
    let ua = sa.apply(|i, j| {
        let (s, t) = symbols(i, j);
        let d = s.norm_sqr() + t.norm_sqr();
        if d > 0.0 {
            s.conj() / d
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ub = sb.apply(|i, j| {
        let (s, t) = symbols(i, j);
        let d = s.norm_sqr() + t.norm_sqr();
        if d > 0.0 {
            t.conj() / d
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let u = &ua + &ub;
    let zb = g.z(base.0, base.1);
    let ub0 = u.at(base.0, base.1);
    let values = g
        .points()
        .into_iter()
        .zip(u.values())
        .map(|(z, &uv)| a0 * (z - zb) + b0 * (z - zb).conj() + uv - ub0)
        .collect();
    (ScalarField::from_values(g, values).expect("grid size"), (a0, b0))
}

/// Integrals of `f` over each interval `[k, k+1]`, fourth-order accurate.
fn interval_integrals(f: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = f.len();
    let s = h / 24.0;
    (0..n - 1)
        .map(|k| {
            if k == 0 {
                (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * s
            } else if k == n - 2 {
                (f[n - 1] * 9.0 + f[n - 2] * 19.0 - f[n - 3] * 5.0 + f[n - 4]) * s
            } else {
                (-f[k - 1] + f[k] * 13.0 + f[k + 1] * 13.0 - f[k + 2]) * s
            }
        })
        .collect()
}

/// Cumulative integral along a line, zero at index `b`.
fn cumulative(f: &[Complex64], h: f64, b: usize, start: Complex64) -> Vec<Complex64> {
    let iv = interval_integrals(f, h);
    let mut out = vec![start; f.len()];
    for k in b + 1..f.len() {
        out[k] = out[k - 1] + iv[k - 1];
    }
    for k in (0..b).rev() {
        out[k] = out[k + 1] - iv[k];
    }
    out
}

fn open_primitive(w: &OneForm, base: (usize, usize), y_first: bool) -> ScalarField {
    let g = *w.grid();
    let (nx, ny) = (g.nx, g.ny);
    let (a, b) = (w.a.values(), w.b.values());
    let fx = |k: usize| a[k] + b[k];
    let fy = |k: usize| I * (a[k] - b[k]);
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    if !y_first {
        let row: Vec<Complex64> = (0..nx).map(|i| fx(g.idx(i, base.1))).collect();
        let xs = cumulative(&row, g.hx(), base.0, Complex64::new(0.0, 0.0));
        for i in 0..nx {
            let col: Vec<Complex64> = (0..ny).map(|j| fy(g.idx(i, j))).collect();
            let ys = cumulative(&col, g.hy(), base.1, xs[i]);
            for j in 0..ny {
                out[g.idx(i, j)] = ys[j];
            }
        }
    } else {
        let col: Vec<Complex64> = (0..ny).map(|j| fy(g.idx(base.0, j))).collect();
        let ys = cumulative(&col, g.hy(), base.1, Complex64::new(0.0, 0.0));
        for j in 0..ny {
            let row: Vec<Complex64> = (0..nx).map(|i| fx(g.idx(i, j))).collect();
            let xs = cumulative(&row, g.hx(), base.0, ys[j]);
            for i in 0..nx {
                out[g.idx(i, j)] = xs[i];
            }
        }
    }
    ScalarField::from_values(g, out).expect("grid size")
}
