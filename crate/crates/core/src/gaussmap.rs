//! Gauss-map parameterisations of spinor surfaces and their constraint checks.
//!
//! R^3: `f = i conj(psi)/phi`, `eta = i phi^2` (Kenmotsu data).
//! R^4: `eta = i phi1 phi2`, `f1 = i conj(psi1)/phi1`, `f2 = -i conj(psi2)/phi2`
//! (Hoffman-Osserman data).
//!
//! Logarithms never appear explicitly: `(log g)_z` is evaluated as `g_z / g`.
//! Points where a quotient is undefined are masked and counted.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::dirac::{Potential, SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;
use crate::ops::{d_z, d_zbar};
use crate::weierstrass::{SurfaceChart, DEGENERACY_THRESHOLD};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `|f_zbar|` below this fraction of its maximum (or below the degeneracy
/// threshold) counts as a zero.
pub const ZERO_FZBAR_FRACTION: f64 = 1e-3;

fn require_euclidean(s: &SpinorSolution) -> Result<()> {
    if s.kind != SystemKind::Euclidean {
        return Err(Error::KindMismatch { expected: "euclidean".into(), found: s.kind.as_str().into() });
    }
    Ok(())
}

fn phi_mask(phi: &ScalarField) -> Vec<bool> {
    phi.values().iter().map(|v| !(v.norm_sqr() > DEGENERACY_THRESHOLD)).collect()
}

fn fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

/// Pointwise derivatives of a quotient `f = c N / D` of smooth fields.
///
/// Only `N` and `D` are differentiated numerically; the derivatives of `f`
/// follow from differentiating `f D = c N`, so poles of `f` never enter a
/// spectral or stencil operator. Entries on the mask are zero.
#[derive(Debug, Clone)]
pub struct QuotientJet {
    pub f: Vec<Complex64>,
    pub z: Vec<Complex64>,
    pub zb: Vec<Complex64>,
    pub zzb: Vec<Complex64>,
    pub zbzb: Vec<Complex64>,
    pub zzbzb: Vec<Complex64>,
}

impl QuotientJet {
    fn new(num: &ScalarField, den: &ScalarField, c: Complex64, mask: &[bool]) -> Self {
        let num = num.scale(c);
        let (nz, nzb) = (d_z(&num), d_zbar(&num));
        let (nzzb, nzbzb) = (d_z(&nzb), d_zbar(&nzb));
        let nzzbzb = d_zbar(&nzzb);
        let (dz, dzb) = (d_z(den), d_zbar(den));
        let (dzzb, dzbzb) = (d_z(&dzb), d_zbar(&dzb));
        let dzzbzb = d_zbar(&dzzb);
        let n = num.len();
        let mut j = QuotientJet {
            f: vec![ZERO; n],
            z: vec![ZERO; n],
            zb: vec![ZERO; n],
            zzb: vec![ZERO; n],
            zbzb: vec![ZERO; n],
            zzbzb: vec![ZERO; n],
        };
        for k in 0..n {
            if mask[k] {
                continue;
            }
            let d = den.values()[k];
            let (d1, d2, d11, d22, d122) =
                (dz.values()[k], dzb.values()[k], dzzb.values()[k], dzbzb.values()[k], dzzbzb.values()[k]);
            let f = num.values()[k] / d;
            let fz = (nz.values()[k] - f * d1) / d;
            let fzb = (nzb.values()[k] - f * d2) / d;
            let fzzb = (nzzb.values()[k] - fz * d2 - fzb * d1 - f * d11) / d;
            let fzbzb = (nzbzb.values()[k] - 2.0 * fzb * d2 - f * d22) / d;
            let fzzbzb = (nzzbzb.values()[k] - 2.0 * fzzb * d2 - fz * d22 - fzbzb * d1 - 2.0 * fzb * d11 - f * d122) / d;
            j.f[k] = f;
            j.z[k] = fz;
            j.zb[k] = fzb;
            j.zzb[k] = fzzb;
            j.zbzb[k] = fzbzb;
            j.zzbzb[k] = fzzbzb;
        }
        j
    }

    /// `f_zbar / (1 + |f|^2)`.
    fn big_f(&self) -> Vec<Complex64> {
        self.zb.iter().zip(&self.f).map(|(d, v)| d / (1.0 + v.norm_sqr())).collect()
    }

    /// `Q = f_{z zbar}/f_zbar - 2 conj(f) f_z/(1+|f|^2)` and `Q_zbar`.
    fn q_terms(&self, mask: &[bool]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.f.len();
        let mut q = vec![ZERO; n];
        let mut qzb = vec![ZERO; n];
        for k in 0..n {
            if mask[k] {
                continue;
            }
            let (f, fz, fzb, fzzb, fzbzb, fzzbzb) =
                (self.f[k], self.z[k], self.zb[k], self.zzb[k], self.zbzb[k], self.zzbzb[k]);
            let fbar_zb = fz.conj();
            let den = 1.0 + f.norm_sqr();
            let den_zb = fzb * f.conj() + f * fbar_zb;
            let t = 2.0 * f.conj() * fz / den;
            let t_zb = 2.0 * (fbar_zb * fz + f.conj() * fzzb) / den - 2.0 * f.conj() * fz * den_zb / (den * den);
            q[k] = fzzb / fzb - t;
            qzb[k] = (fzzbzb * fzb - fzzb * fzbzb) / (fzb * fzb) - t_zb;
        }
        (q, qzb)
    }

    fn field(&self, grid: ComplexGrid) -> ScalarField {
        ScalarField::from_values(grid, self.f.clone()).expect("grid size")
    }
}

/// `max |lhs - rhs| / (1 + max |lhs|)` off the mask; `None` when everything is masked.
fn relative_residual(lhs: &[Complex64], rhs: &[Complex64], mask: &[bool]) -> Option<f64> {
    let mut num: Option<f64> = None;
    let mut scale: f64 = 0.0;
    for ((l, r), &m) in lhs.iter().zip(rhs).zip(mask) {
        if m {
            continue;
        }
        num = Some(num.unwrap_or(0.0).max((l - r).norm()));
        scale = scale.max(l.norm());
    }
    num.map(|n| n / (1.0 + scale))
}

/// `max |Im v| / (1 + max |v|)` off the mask.
fn imag_residual(v: &[Complex64], mask: &[bool]) -> Option<f64> {
    let mut out: Option<(f64, f64)> = None;
    for (x, _) in v.iter().zip(mask).filter(|(_, &m)| !m) {
        let (im, size) = out.unwrap_or((0.0, 0.0));
        out = Some((im.max(x.im.abs()), size.max(x.norm())));
    }
    out.map(|(im, size)| im / (1.0 + size))
}

/// Kenmotsu data `(f, eta)` of one solution.
#[derive(Debug, Clone)]
pub struct KenmotsuData {
    pub f: ScalarField,
    pub eta: ScalarField,
    pub jet: QuotientJet,
    /// Zeros of `phi`.
    pub mask: Vec<bool>,
}

pub fn kenmotsu_from_spinors(s: &SpinorSolution) -> Result<KenmotsuData> {
    require_euclidean(s)?;
    let mask = phi_mask(&s.phi);
    if mask.iter().all(|&m| m) {
        return Err(Error::AllDegenerate);
    }
    let jet = QuotientJet::new(&s.psi.conj(), &s.phi, I, &mask);
    let eta = (&s.phi * &s.phi).scale(I);
    Ok(KenmotsuData { f: jet.field(*s.grid()), eta, jet, mask })
}

/// Checks of the Kenmotsu relations against the potential.
#[derive(Debug, Clone)]
pub struct KenmotsuReport {
    /// Residual of `(log eta)_zbar = -2 conj(f) f_zbar / (1 + |f|^2)`.
    pub eta_relation: Option<f64>,
    /// `p = -eta f_zbar / (|eta| (1 + |f|^2))`.
    pub p_recovered: ScalarField,
    pub p_roundtrip_max_err: f64,
    /// `H = -2 conj(f)_z / (eta (1 + |f|^2)^2)`.
    pub h: ScalarField,
    pub masked_fraction: f64,
}

pub fn kenmotsu_residuals(data: &KenmotsuData, p: &Potential) -> Result<KenmotsuReport> {
    p.p().check_grid(&data.f)?;
    let fzb = &data.jet.zb;
    let etazb = d_zbar(&data.eta);
    let n = data.f.len();
    let mut lhs = vec![ZERO; n];
    let mut rhs = vec![ZERO; n];
    let mut pr = vec![ZERO; n];
    let mut h = vec![ZERO; n];
    for k in 0..n {
        if data.mask[k] {
            continue;
        }
        let f = data.f.values()[k];
        let eta = data.eta.values()[k];
        let q = 1.0 + f.norm_sqr();
        lhs[k] = etazb.values()[k] / eta;
        rhs[k] = -2.0 * f.conj() * fzb[k] / q;
        pr[k] = -eta * fzb[k] / (eta.norm() * q);
        h[k] = -2.0 * fzb[k].conj() / (eta * q * q);
    }
    let g = *data.f.grid();
    let p_recovered = ScalarField::from_values(g, pr)?;
    let p_roundtrip_max_err = crate::field::max_abs_diff(&p_recovered, p.p(), Some(&data.mask));
    Ok(KenmotsuReport {
        eta_relation: relative_residual(&lhs, &rhs, &data.mask),
        p_recovered,
        p_roundtrip_max_err,
        h: ScalarField::from_values(g, h)?,
        masked_fraction: fraction(&data.mask),
    })
}

/// Hoffman-Osserman data `(f1, f2, eta)` of a pair of solutions.
#[derive(Debug, Clone)]
pub struct HoffmanOssermanData {
    pub f1: ScalarField,
    pub f2: ScalarField,
    pub eta: ScalarField,
    /// `F_i = f_{i zbar} / (1 + |f_i|^2)`.
    pub big_f1: ScalarField,
    pub big_f2: ScalarField,
    pub jet1: QuotientJet,
    pub jet2: QuotientJet,
    /// `u1 u2`, used for the mean curvature.
    pub u_product: ScalarField,
    pub phi1: ScalarField,
    pub phi2: ScalarField,
    /// Zeros of `phi1` or `phi2`.
    pub mask: Vec<bool>,
}

pub fn ho_from_spinors(s1: &SpinorSolution, s2: &SpinorSolution) -> Result<HoffmanOssermanData> {
    require_euclidean(s1)?;
    require_euclidean(s2)?;
    s1.psi.check_grid(&s2.psi)?;
    let mask: Vec<bool> = phi_mask(&s1.phi).into_iter().zip(phi_mask(&s2.phi)).map(|(a, b)| a || b).collect();
    if mask.iter().all(|&m| m) {
        return Err(Error::AllDegenerate);
    }
    let g = *s1.grid();
    let jet1 = QuotientJet::new(&s1.psi.conj(), &s1.phi, I, &mask);
    let jet2 = QuotientJet::new(&s2.psi.conj(), &s2.phi, -I, &mask);
    let eta = (&s1.phi * &s2.phi).scale(I);
    let big = |j: &QuotientJet| ScalarField::from_values(g, j.big_f()).expect("grid size");
    let u = |s: &SpinorSolution| &s.psi.norm_sqr() + &s.phi.norm_sqr();
    Ok(HoffmanOssermanData {
        big_f1: big(&jet1),
        big_f2: big(&jet2),
        f1: jet1.field(g),
        f2: jet2.field(g),
        jet1,
        jet2,
        eta,
        u_product: &u(s1) * &u(s2),
        phi1: s1.phi.clone(),
        phi2: s2.phi.clone(),
        mask,
    })
}

/// Residuals of the Hoffman-Osserman constraints under the spinor substitution.
#[derive(Debug, Clone)]
pub struct HoReport {
    /// `Im[sum_i (f_{i z zbar}/f_{i zbar} - 2 conj(f_i) f_{iz}/(1+|f_i|^2))_zbar] = 0`.
    pub imag_constraint: Option<f64>,
    /// `|F1| = |F2|`.
    pub modulus_balance: Option<f64>,
    /// `conj(eta)^2 = -4 F1 F2 / (H^2 (1+|f1|^2)(1+|f2|^2))`.
    pub eta_square: Option<f64>,
    /// `2 (log H)_z = sum_i (f_{i z zbar}/f_{i zbar} - 2 conj(f_i) f_{iz}/(1+|f_i|^2))`.
    pub log_h_gradient: Option<f64>,
    /// `p = -i F1 phi1/conj(phi1) = i F2 phi2/conj(phi2)`, worst of both.
    pub p_roundtrip_max_err: f64,
    /// Mask including zeros of `f_{i zbar}` (equivalently of `p`).
    pub mask: Vec<bool>,
    pub masked_fraction: f64,
}

pub fn ho_residuals(data: &HoffmanOssermanData, p: &Potential) -> Result<HoReport> {
    p.p().check_grid(&data.f1)?;
    let n = data.f1.len();
    let (fzb1, fzb2) = (&data.jet1.zb, &data.jet2.zb);
    let sup = |v: &[Complex64]| v.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    let floor = (ZERO_FZBAR_FRACTION * sup(fzb1).max(sup(fzb2))).max(DEGENERACY_THRESHOLD);
    let mask: Vec<bool> = (0..n)
        .map(|k| {
            data.mask[k]
                || !(fzb1[k].norm() > floor)
                || !(fzb2[k].norm() > floor)
        })
        .collect();

    let (q1, q1zb) = data.jet1.q_terms(&mask);
    let (q2, q2zb) = data.jet2.q_terms(&mask);
    let pz = d_z(p.p());
    let uz = d_z(&data.u_product);

    let mut eta_lhs = vec![ZERO; n];
    let mut eta_rhs = vec![ZERO; n];
    let mut grad_lhs = vec![ZERO; n];
    let mut grad_rhs = vec![ZERO; n];
    for k in 0..n {
        if mask[k] {
            continue;
        }
        let pk = p.p().values()[k].re;
        let uu = data.u_product.values()[k].re;
        let h2 = 4.0 * pk * pk / uu;
        let (f1, f2) = (data.f1.values()[k], data.f2.values()[k]);
        eta_lhs[k] = data.eta.values()[k].conj().powi(2);
        eta_rhs[k] = -4.0 * data.big_f1.values()[k] * data.big_f2.values()[k]
            / (h2 * (1.0 + f1.norm_sqr()) * (1.0 + f2.norm_sqr()));
        grad_lhs[k] = 2.0 * pz.values()[k] / pk - uz.values()[k] / uu;
        grad_rhs[k] = q1[k] + q2[k];
    }
    let q_zbar_sum: Vec<Complex64> = (0..n).map(|k| q1zb[k] + q2zb[k]).collect();
    let imag_constraint = imag_residual(&q_zbar_sum, &mask);

    let abs1: Vec<Complex64> = data.big_f1.values().iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
    let abs2: Vec<Complex64> = data.big_f2.values().iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
    let modulus_balance = relative_residual(&abs1, &abs2, &data.mask);

    let mut err: f64 = 0.0;
    for k in 0..n {
        if data.mask[k] {
            continue;
        }
        let (b1, b2) = (data.phi1.values()[k], data.phi2.values()[k]);
        let pk = p.p().values()[k];
        let p1 = -I * data.big_f1.values()[k] * b1 / b1.conj();
        let p2 = I * data.big_f2.values()[k] * b2 / b2.conj();
        err = err.max((p1 - pk).norm()).max((p2 - pk).norm());
    }
    Ok(HoReport {
        imag_constraint,
        modulus_balance,
        eta_square: relative_residual(&eta_lhs, &eta_rhs, &mask),
        log_h_gradient: relative_residual(&grad_lhs, &grad_rhs, &mask),
        p_roundtrip_max_err: err,
        masked_fraction: fraction(&mask),
        mask,
    })
}

/// Residual report in the exported JSON layout.
pub fn residual_report(k: Option<&KenmotsuReport>, ho: Option<&HoReport>) -> Value {
    let p_err = match (k, ho) {
        (Some(a), Some(b)) => Some(a.p_roundtrip_max_err.max(b.p_roundtrip_max_err)),
        (Some(a), None) => Some(a.p_roundtrip_max_err),
        (None, Some(b)) => Some(b.p_roundtrip_max_err),
        (None, None) => None,
    };
    let masked = k.map_or(0.0, |a| a.masked_fraction).max(ho.map_or(0.0, |b| b.masked_fraction));
    json!({
        "eta_relation": k.and_then(|a| a.eta_relation),
        "imag_constraint": ho.and_then(|b| b.imag_constraint),
        "modulus_balance": ho.and_then(|b| b.modulus_balance),
        "eta_square": ho.and_then(|b| b.eta_square),
        "log_h_gradient": ho.and_then(|b| b.log_h_gradient),
        "p_roundtrip_max_err": p_err,
        "masked_fraction": masked,
    })
}

/// Gauss map `G = [i(A + B), A - B, -(C + D), i(C - D)]` with
/// `A = conj(psi1 psi2)`, `B = phi1 phi2`, `C = conj(psi1) phi2`, `D = conj(psi2) phi1`.
#[derive(Debug, Clone)]
pub struct GaussMap {
    pub components: Vec<ScalarField>,
    /// `max |sum G_i^2| / sum |G_i|^2` over points with `G != 0`.
    pub quadric_residual: f64,
}

pub fn gauss_map(s1: &SpinorSolution, s2: &SpinorSolution) -> Result<GaussMap> {
    require_euclidean(s1)?;
    require_euclidean(s2)?;
    s1.psi.check_grid(&s2.psi)?;
    let (pb1, pb2) = (s1.psi.conj(), s2.psi.conj());
    let a = &pb1 * &pb2;
    let b = &s1.phi * &s2.phi;
    let c = &pb1 * &s2.phi;
    let d = &pb2 * &s1.phi;
    let components = vec![(&a + &b).scale(I), &a - &b, -&(&c + &d), (&c - &d).scale(I)];
    let quadric_residual = (0..a.len())
        .filter_map(|k| {
            let sq: Complex64 = components.iter().map(|g| g.values()[k] * g.values()[k]).sum();
            let nn: f64 = components.iter().map(|g| g.values()[k].norm_sqr()).sum();
            (nn > 0.0).then(|| sq.norm() / nn)
        })
        .fold(0.0, f64::max);
    Ok(GaussMap { components, quadric_residual })
}

/// Pointwise least-squares scale `lambda` with `G ~ lambda v` and the worst
/// relative misfit `|G - lambda v| / |G|`, skipping `mask` and zero vectors.
fn projective_fit(g: &[ScalarField], v: &[Vec<Complex64>], mask: &[bool]) -> (f64, Vec<Complex64>) {
    let n = g[0].len();
    let mut worst: f64 = 0.0;
    let mut lambdas = vec![ZERO; n];
    for k in 0..n {
        if mask[k] {
            continue;
        }
        let gv: Vec<Complex64> = g.iter().map(|f| f.values()[k]).collect();
        let vv: Vec<Complex64> = v.iter().map(|f| f[k]).collect();
        let vn: f64 = vv.iter().map(|x| x.norm_sqr()).sum();
        let gn: f64 = gv.iter().map(|x| x.norm_sqr()).sum();
        if !(vn > 0.0 && gn > 0.0) {
            continue;
        }
        let lam: Complex64 = vv.iter().zip(&gv).map(|(x, y)| x.conj() * y).sum::<Complex64>() / vn;
        let mis: f64 = vv.iter().zip(&gv).map(|(x, y)| (y - lam * x).norm_sqr()).sum();
        worst = worst.max((mis / gn).sqrt());
        lambdas[k] = lam;
    }
    (worst, lambdas)
}

/// Proportionality of `G` to the tangent `X_z` of the chart built from the
/// same pair. Returns the worst misfit and the largest `|lambda - 2|`.
pub fn tangent_consistency(gm: &GaussMap, chart: &SurfaceChart) -> Result<(f64, f64)> {
    if chart.dimension() != 4 {
        return Err(Error::DimensionMismatch(format!("gauss map needs a 4-dimensional chart, got {}", chart.dimension())));
    }
    gm.components[0].check_grid(&chart.coords[0])?;
    let xz: Vec<Vec<Complex64>> = chart.coordinate_derivatives().into_iter().map(|(a, _)| a.into_values()).collect();
    let (mis, lam) = projective_fit(&gm.components, &xz, &chart.mask);
    let dev = lam
        .iter()
        .zip(&chart.mask)
        .filter(|(l, &m)| !m && l.norm() > 0.0)
        .fold(0.0f64, |a, (l, _)| a.max((l - 2.0).norm()));
    Ok((mis, dev))
}

/// `[(1 + f1 f2), i(1 - f1 f2), f1 - f2, -i(f1 + f2)]`.
pub fn ho_parameterised(data: &HoffmanOssermanData) -> Vec<Vec<Complex64>> {
    let (f1, f2) = (data.f1.values(), data.f2.values());
    let n = f1.len();
    let mut out = vec![vec![ZERO; n]; 4];
    for k in 0..n {
        let (a, b) = (f1[k], f2[k]);
        out[0][k] = 1.0 + a * b;
        out[1][k] = I * (1.0 - a * b);
        out[2][k] = a - b;
        out[3][k] = -I * (a + b);
    }
    out
}

/// Agreement of `G` with `eta` times the parameterised form, pointwise:
/// worst `|G - eta G_f| / |G|` and worst projective misfit.
pub fn ho_form_consistency(gm: &GaussMap, data: &HoffmanOssermanData) -> (f64, f64) {
    let gf = ho_parameterised(data);
    let n = data.eta.len();
    let mut direct: f64 = 0.0;
    for k in 0..n {
        if data.mask[k] {
            continue;
        }
        let eta = data.eta.values()[k];
        let gn: f64 = gm.components.iter().map(|g| g.values()[k].norm_sqr()).sum();
        if gn == 0.0 {
            continue;
        }
        let d: f64 = gm.components.iter().zip(&gf).map(|(g, f)| (g.values()[k] - eta * f[k]).norm_sqr()).sum();
        direct = direct.max((d / gn).sqrt());
    }
    let (proj, _) = projective_fit(&gm.components, &gf, &data.mask);
    (direct, proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{analytic_family, ExpMode, Family, Holomorphic};
    use crate::field::max_abs_diff;
    use crate::grid::BoundaryMode;
    use crate::weierstrass::build_r4;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn enneper() -> (Potential, Vec<SpinorSolution>) {
        let g = ComplexGrid::open(21, -1.0, -1.0, 2.0, 2.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0), c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
        };
        analytic_family(g, SystemKind::Euclidean, &fam).unwrap()
    }

    #[test]
    fn kenmotsu_data_of_enneper() {
        let (p, s) = enneper();
        let k = kenmotsu_from_spinors(&s[0]).unwrap();
        let want = ScalarField::sample(*p.grid(), |z| I * z);
        assert!(max_abs_diff(&k.f, &want, None) < 1e-15);
        assert!(max_abs_diff(&k.eta, &ScalarField::constant(*p.grid(), I), None) == 0.0);
        let r = kenmotsu_residuals(&k, &p).unwrap();
        assert!(r.eta_relation.unwrap() <= 1e-10);
        assert!(r.p_roundtrip_max_err <= 1e-10);
    }

    #[test]
    fn kenmotsu_on_the_cylinder() {
        let g = ComplexGrid::new(16, 16, 0.0, 0.0, 1.0, PI, BoundaryMode::Periodic).unwrap();
        let fam = Family::Exponential {
            p: c(1.0, 0.0),
            solutions: vec![vec![ExpMode { amp: c(1.0, 0.0), lambda: c(1.0, 0.0), mu: c(-1.0, 0.0) }]],
        };
        let (p, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        let r = kenmotsu_residuals(&kenmotsu_from_spinors(&s[0]).unwrap(), &p).unwrap();
        assert!(r.eta_relation.unwrap() < 1e-12);
        assert!(max_abs_diff(&r.h, &ScalarField::real_constant(g, 1.0), None) < 1e-12);
        assert!(r.p_roundtrip_max_err < 1e-12);
    }

    #[test]
    fn vanishing_phi_is_all_degenerate() {
        let g = ComplexGrid::open(9, 0.0, 0.0, 1.0, 1.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0)] },
        };
        let (_, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        assert!(matches!(kenmotsu_from_spinors(&s[0]), Err(Error::AllDegenerate)));
    }

    #[test]
    fn gauss_map_lies_on_the_quadric_and_matches_tangent() {
        let (p, s) = enneper();
        let s2 = s[0].partner(&p).unwrap();
        let s1 = SpinorSolution::combine(&[(c(1.0, 0.0), &s[0]), (c(0.5, -0.2), &s2)], &p, "mix").unwrap();
        let gm = gauss_map(&s1, &s2).unwrap();
        assert!(gm.quadric_residual < 1e-14);
        let ch = build_r4(&p, &s1, &s2).unwrap();
        let (mis, dev) = tangent_consistency(&gm, &ch).unwrap();
        assert!(mis < 1e-9 && dev < 1e-9, "{mis} {dev}");
    }

    #[test]
    fn minimal_pair_has_vanishing_big_f() {
        let (p, s) = enneper();
        let s2 = SpinorSolution::combine(&[(c(1.0, 0.0), &s[0])], &p, "copy").unwrap();
        let ho = ho_from_spinors(&s[0], &s2).unwrap();
        assert!(ho.big_f1.norm_inf() < 1e-12 && ho.big_f2.norm_inf() < 1e-12);
        assert!(max_abs_diff(&ho.f2, &-&ho.f1, None) == 0.0);
        let r = ho_residuals(&ho, &p).unwrap();
        assert!(r.modulus_balance.unwrap() < 1e-12);
        assert!(r.eta_square.is_none() && r.log_h_gradient.is_none());
        let gm = gauss_map(&s[0], &s2).unwrap();
        let (direct, _) = ho_form_consistency(&gm, &ho);
        assert!(direct < 1e-14);
    }

    #[test]
    fn torus_pair_satisfies_all_constraints() {
        use crate::dirac::{solve_fixed_point, SolverOptions};
        let tp = 2.0 * PI;
        let g = ComplexGrid::periodic(32, tp, tp).unwrap();
        let p = Potential::new(ScalarField::sample_real(g, |x, y| 0.3 * (x.cos() + y.cos())), SystemKind::Euclidean).unwrap();
        let o = SolverOptions { tol: 1e-13, ..Default::default() };
        let seed = |a, b| SpinorSolution::constant_seed(g, c(a, 0.0), c(b, 0.0), SystemKind::Euclidean);
        let a = solve_fixed_point(&p, &seed(1.0, 0.0), o).unwrap();
        let b = solve_fixed_point(&p, &seed(0.0, 1.0), o).unwrap();
        let s1 = SpinorSolution::combine(&[(c(1.0, 0.0), &a), (c(1.0, 0.0), &b)], &p, "s1").unwrap();
        let s2 = SpinorSolution::combine(&[(c(1.0, 0.0), &a), (c(0.0, 1.0), &b)], &p, "s2").unwrap();
        let ho = ho_from_spinors(&s1, &s2).unwrap();
        let r = ho_residuals(&ho, &p).unwrap();
        for v in [r.imag_constraint, r.modulus_balance, r.eta_square, r.log_h_gradient] {
            assert!(v.unwrap() < 1e-10, "{v:?}");
        }
        assert!(r.p_roundtrip_max_err < 1e-10);
        assert!(r.masked_fraction > 0.0 && r.masked_fraction < 0.3);
        let k = kenmotsu_residuals(&kenmotsu_from_spinors(&s1).unwrap(), &p).unwrap();
        assert!(k.eta_relation.unwrap() < 1e-10 && k.p_roundtrip_max_err < 1e-10);
        let json = residual_report(Some(&k), Some(&r));
        assert!(json["eta_square"].as_f64().unwrap() < 1e-10);
    }
}
