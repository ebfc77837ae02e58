//! Complex derivatives, their periodic inverses, and quadrature.
//!
//! With `z = x + iy`, `d_z = (d_x - i d_y)/2` and `d_zbar = (d_x + i d_y)/2`.
//! Periodic grids are differentiated spectrally; open grids use fourth-order
//! central differences with one-sided fourth-order closures at the edges.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::spectral::Spectrum;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// First derivative of a uniformly sampled line, fourth order everywhere.
pub(crate) fn fd_line(f: &[Complex64], h: f64, out: &mut [Complex64]) {
    let n = f.len();
    if n == 4 {
        // Four points only support the exact-for-cubics stencils.
        let s = 1.0 / (6.0 * h);
        out[0] = (f[0] * -11.0 + f[1] * 18.0 - f[2] * 9.0 + f[3] * 2.0) * s;
        out[1] = (f[0] * -2.0 - f[1] * 3.0 + f[2] * 6.0 - f[3]) * s;
        out[2] = (f[0] - f[1] * 6.0 + f[2] * 3.0 + f[3] * 2.0) * s;
        out[3] = (f[0] * -2.0 + f[1] * 9.0 - f[2] * 18.0 + f[3] * 11.0) * s;
        return;
    }
    let s = 1.0 / (12.0 * h);
    out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * s;
    out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * s;
    for k in 2..n - 2 {
        out[k] = (f[k - 2] - f[k - 1] * 8.0 + f[k + 1] * 8.0 - f[k + 2]) * s;
    }
    out[n - 2] = (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0 - f[n - 5]) * s;
    out[n - 1] = (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0 + f[n - 5] * 3.0) * s;
}

fn fd_x(f: &ScalarField) -> Vec<Complex64> {
    let g = f.grid();
    let (nx, ny, h) = (g.nx, g.ny, g.hx());
    let v = f.values();
    let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
    t.par_chunks_mut(nx).enumerate().for_each(|(j, out)| {
        let line: Vec<Complex64> = (0..nx).map(|i| v[i * ny + j]).collect();
        fd_line(&line, h, out);
    });
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
    out.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            *c = t[j * nx + i];
        }
    });
    out
}

fn fd_y(f: &ScalarField) -> Vec<Complex64> {
    let g = f.grid();
    let (ny, h) = (g.ny, g.hy());
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    out.par_chunks_mut(ny)
        .zip(f.values().par_chunks(ny))
        .for_each(|(o, line)| fd_line(line, h, o));
    out
}

fn real_preserving(f: &ScalarField, out: ScalarField) -> ScalarField {
    if f.kind() == crate::field::FieldKind::Real {
        out.re()
    } else {
        out
    }
}

/// Partial derivative in x.
pub fn d_x(f: &ScalarField) -> ScalarField {
    let out = if f.grid().is_periodic() {
        let s = Spectrum::new(f).expect("periodic");
        s.apply(|i, j| s.sym_dz(i, j) + s.sym_dzbar(i, j))
    } else {
        f.with_values(fd_x(f))
    };
    real_preserving(f, out)
}

/// Partial derivative in y.
pub fn d_y(f: &ScalarField) -> ScalarField {
    let out = if f.grid().is_periodic() {
        let s = Spectrum::new(f).expect("periodic");
        s.apply(|i, j| (s.sym_dzbar(i, j) - s.sym_dz(i, j)) * -I)
    } else {
        f.with_values(fd_y(f))
    };
    real_preserving(f, out)
}

/// `d_z f = (f_x - i f_y) / 2`.
pub fn d_z(f: &ScalarField) -> ScalarField {
    if f.grid().is_periodic() {
        return Spectrum::new(f).expect("periodic").derivative(1, 0);
    }
    let fx = fd_x(f);
    let fy = fd_y(f);
    f.with_values(fx.iter().zip(&fy).map(|(a, b)| (a - I * b) * 0.5).collect())
}

/// `d_zbar f = (f_x + i f_y) / 2`.
pub fn d_zbar(f: &ScalarField) -> ScalarField {
    if f.grid().is_periodic() {
        return Spectrum::new(f).expect("periodic").derivative(0, 1);
    }
    let fx = fd_x(f);
    let fy = fd_y(f);
    f.with_values(fx.iter().zip(&fy).map(|(a, b)| (a + I * b) * 0.5).collect())
}

/// Relative size of the mean above which `inv_dzbar` refuses to solve.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Zero-mean solution `u` of `d_zbar u = f` on a periodic grid.
///
/// Fails with `NonzeroMean` when `f` has a mean component, since such an
/// equation has no periodic solution.
pub fn inv_dzbar(f: &ScalarField) -> Result<ScalarField> {
    let s = Spectrum::new(f)?;
    let mean = s.mean();
    let scale = f.norm_inf();
    if mean.norm() > MEAN_TOLERANCE * scale {
        return Err(Error::NonzeroMean {
            mean: mean.norm() / scale,
            hint: "the potential admits no periodic solution of this form; symmetric potentials \
                   (even, and odd under half-period shift) avoid the obstruction"
                .into(),
        });
    }
    Ok(s.apply(|i, j| {
        let t = s.sym_dzbar(i, j);
        if t.norm_sqr() > 0.0 {
            1.0 / t
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Zero-mean solution of `d_z u = f`, defined as `conj(inv_dzbar(conj f))`.
pub fn inv_dz(f: &ScalarField) -> Result<ScalarField> {
    Ok(inv_dzbar(&f.conj())?.conj().as_complex())
}

/// Integral over the grid domain: rectangle rule on periodic grids,
/// trapezoid rule on open grids.
pub fn quadrature(f: &ScalarField) -> Complex64 {
    let g = f.grid();
    let v = f.values();
    match g.mode {
        crate::grid::BoundaryMode::Periodic => v.iter().sum::<Complex64>() * (g.hx() * g.hy()),
        crate::grid::BoundaryMode::Open => {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..g.nx {
                let wi = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
                for j in 0..g.ny {
                    let wj = if j == 0 || j == g.ny - 1 { 0.5 } else { 1.0 };
                    s += v[g.idx(i, j)] * (wi * wj);
                }
            }
            s * (g.hx() * g.hy())
        }
    }
}

/// Masked integral of a real density, weights as in [`quadrature`].
pub fn quadrature_masked(f: &ScalarField, mask: &[bool]) -> Complex64 {
    let masked = f.with_values(
        f.values()
            .iter()
            .zip(mask)
            .map(|(&v, &m)| if m { Complex64::new(0.0, 0.0) } else { v })
            .collect(),
    );
    quadrature(&masked)
}

/// Removes modes outside the 2/3 band on periodic grids; identity on open grids.
pub fn dealias(f: &ScalarField) -> ScalarField {
    if !f.grid().is_periodic() {
        return f.clone();
    }
    let out = Spectrum::new(f).expect("periodic").dealiased();
    real_preserving(f, out)
}

/// Pointwise product followed by 2/3-rule dealiasing.
pub fn product_dealiased(a: &ScalarField, b: &ScalarField) -> ScalarField {
    dealias(&(a * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_abs_diff;
    use crate::grid::ComplexGrid;
    use std::f64::consts::PI;

    #[test]
    fn fd_line_is_exact_on_quartics() {
        let h = 0.1;
        let f: Vec<Complex64> = (0..9)
            .map(|k| {
                let x = k as f64 * h;
                Complex64::new(x.powi(4) - 2.0 * x * x + 1.0, x.powi(3))
            })
            .collect();
        let mut d = vec![Complex64::new(0.0, 0.0); 9];
        fd_line(&f, h, &mut d);
        for (k, v) in d.iter().enumerate() {
            let x = k as f64 * h;
            let want = Complex64::new(4.0 * x.powi(3) - 4.0 * x, 3.0 * x * x);
            assert!((v - want).norm() < 1e-12, "k={k}: {v} vs {want}");
        }
    }

    #[test]
    fn four_point_lines_are_exact_on_cubics() {
        let h = 0.5;
        let f: Vec<Complex64> = (0..4).map(|k| Complex64::new((k as f64 * h).powi(3), 0.0)).collect();
        let mut d = vec![Complex64::new(0.0, 0.0); 4];
        fd_line(&f, h, &mut d);
        for (k, v) in d.iter().enumerate() {
            assert!((v.re - 3.0 * (k as f64 * h).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_dz_of_plane_wave() {
        let g = ComplexGrid::new(16, 12, 0.0, 0.0, 2.0 * PI, PI, crate::grid::BoundaryMode::Periodic).unwrap();
        // exp(i(2x + 4y)) has d_z symbol (i*2 + 4)/2.
        let f = ScalarField::sample(g, |z| (I * (2.0 * z.re + 4.0 * z.im)).exp());
        let want = f.scale(Complex64::new(2.0, 1.0));
        assert!(max_abs_diff(&d_z(&f), &want, None) < 1e-12);
        let want_bar = f.scale(Complex64::new(-2.0, 1.0));
        assert!(max_abs_diff(&d_zbar(&f), &want_bar, None) < 1e-12);
    }

    #[test]
    fn inverse_rejects_mean_and_inverts_otherwise() {
        let g = ComplexGrid::periodic(16, 2.0 * PI, 2.0 * PI).unwrap();
        assert!(matches!(
            inv_dzbar(&ScalarField::constant(g, Complex64::new(1.0, 0.0))),
            Err(Error::NonzeroMean { .. })
        ));
        let f = ScalarField::sample(g, |z| Complex64::new(z.re.cos() * (2.0 * z.im).sin(), z.im.cos()));
        let u = inv_dzbar(&f).unwrap();
        assert!(max_abs_diff(&d_zbar(&u), &f, None) < 1e-12);
        assert!(u.mean().norm() < 1e-14);
        let v = inv_dz(&f).unwrap();
        assert!(max_abs_diff(&d_z(&v), &f, None) < 1e-12);
    }

    #[test]
    fn quadrature_rules() {
        let g = ComplexGrid::periodic(32, 2.0 * PI, 2.0 * PI).unwrap();
        let f = ScalarField::sample_real(g, |x, y| 1.0 + x.cos() * y.sin());
        assert!((quadrature(&f).re - 4.0 * PI * PI).abs() < 1e-12);
        let o = ComplexGrid::open(11, 0.0, 0.0, 1.0, 2.0).unwrap();
        let lin = ScalarField::sample_real(o, |x, y| x + y);
        assert!((quadrature(&lin).re - 3.0).abs() < 1e-13);
    }

    #[test]
    fn dealias_drops_high_modes() {
        let g = ComplexGrid::periodic(12, 2.0 * PI, 2.0 * PI).unwrap();
        let low = ScalarField::sample_real(g, |x, y| (3.0 * x).cos() + y.sin());
        let high = ScalarField::sample_real(g, |x, _| (5.0 * x).cos());
        assert!(max_abs_diff(&dealias(&low), &low, None) < 1e-13);
        assert!(dealias(&high).norm_inf() < 1e-13);
    }
}
