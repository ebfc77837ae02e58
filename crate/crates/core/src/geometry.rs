//! Induced metrics, normals, curvatures and the Willmore functional.
//!
//! Curvatures come in two versions. One is evaluated from the spinors, the
//! other from finite differences of the sampled coordinates alone. Comparing
//! them is the main consistency check of a chart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dirac::{Potential, SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;
use crate::ops::{d_x, d_y, d_z, d_zbar, quadrature, quadrature_masked};
use crate::weierstrass::{split_factor, AmbientSpec, Block, ConformalFactor, SurfaceChart, DEGENERACY_THRESHOLD};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Points with `|g_zzbar|` at or below this value are excluded from
/// finite-difference curvature.
pub const METRIC_FLOOR: f64 = 1e-12;

/// Real line element `E dx^2 + 2 F dx dy + G dy^2`.
#[derive(Debug, Clone)]
pub struct LineElement {
    pub e: ScalarField,
    pub f: ScalarField,
    pub g: ScalarField,
}

/// Components of the induced metric in complex coordinates.
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub g_zz: ScalarField,
    pub g_zzbar: ScalarField,
    pub g_zbarzbar: ScalarField,
    /// Present for real charts.
    pub line_element: Option<LineElement>,
}

impl MetricSample {
    /// Largest `|g_zz| / |g_zzbar|` off the mask.
    pub fn conformality_violation(&self, mask: &[bool]) -> f64 {
        self.g_zz
            .values()
            .iter()
            .zip(self.g_zzbar.values())
            .zip(mask)
            .filter(|(_, &m)| !m)
            .fold(0.0, |acc, ((a, b), _)| acc.max(a.norm() / b.norm()))
    }
}

fn bilinear(sig: &[f64], a: &[ScalarField], b: &[ScalarField]) -> ScalarField {
    let g = *a[0].grid();
    let mut out = vec![ZERO; g.len()];
    for ((s, x), y) in sig.iter().zip(a).zip(b) {
        for (o, (u, v)) in out.iter_mut().zip(x.values().iter().zip(y.values())) {
            *o += *s * u * v;
        }
    }
    ScalarField::from_values(g, out).expect("grid size")
}

/// Conformal exponent `sigma` of a conformally flat ambient space.
pub fn conformal_sigma(chart: &SurfaceChart) -> Option<ScalarField> {
    match &chart.ambient {
        AmbientSpec::Conformal4(ConformalFactor::Sigma(s)) => Some(s.re()),
        AmbientSpec::Conformal4(ConformalFactor::S4 { k0 }) => {
            let r2 = chart.coords.iter().fold(ScalarField::real_constant(*chart.grid(), 0.0), |acc, x| &acc + &x.norm_sqr());
            Some(r2.map_real(|r| -(1.0 + k0 * r / 4.0).ln()))
        }
        _ => None,
    }
}

fn metric_with(chart: &SurfaceChart, factor: Option<&ScalarField>) -> MetricSample {
    let sig = chart.ambient.signature();
    let (xz, xzb): (Vec<_>, Vec<_>) = chart.coordinate_derivatives().into_iter().unzip();
    let mut g_zz = bilinear(&sig, &xz, &xz);
    let mut g_zzbar = bilinear(&sig, &xz, &xzb);
    let mut g_zbarzbar = bilinear(&sig, &xzb, &xzb);
    if !chart.ambient.is_complex() {
        g_zzbar = g_zzbar.re();
    }
    if let Some(e2s) = factor {
        g_zz = &g_zz * e2s;
        g_zzbar = &g_zzbar * e2s;
        g_zbarzbar = &g_zbarzbar * e2s;
    }
    let line_element = (!chart.ambient.is_complex()).then(|| {
        let re = g_zz.re();
        LineElement {
            e: &g_zzbar.scale_real(2.0) + &re.scale_real(2.0),
            f: g_zz.im().scale_real(-2.0),
            g: &g_zzbar.scale_real(2.0) - &re.scale_real(2.0),
        }
    });
    MetricSample { g_zz, g_zzbar, g_zbarzbar, line_element }
}

/// Metric induced by the ambient metric (including any conformal factor),
/// from finite differences of the coordinates.
pub fn induced_metric(chart: &SurfaceChart) -> MetricSample {
    let e2s = conformal_sigma(chart).map(|s| s.map_real(|v| (2.0 * v).exp()));
    metric_with(chart, e2s.as_ref())
}

/// Metric induced by the flat part of the ambient metric.
pub fn flat_metric(chart: &SurfaceChart) -> MetricSample {
    metric_with(chart, None)
}

fn u_factor(s: &SpinorSolution) -> ScalarField {
    &s.psi.norm_sqr() + &s.phi.norm_sqr()
}

fn or_masks(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| x || y).collect()
}

fn floor_mask(f: &ScalarField, floor: f64) -> Vec<bool> {
    f.values().iter().map(|v| !(v.norm() > floor)).collect()
}

/// Unit normals of an R^4 chart built from `(s1, s2)`.
#[derive(Debug, Clone)]
pub struct Normals {
    pub n1: Vec<ScalarField>,
    pub n2: Vec<ScalarField>,
    /// Zeros of `phi1`, `phi2` or `u1 u2`; normals are set to zero there.
    pub mask: Vec<bool>,
}

/// `N1 = c Re(A)`, `N2 = c Im(A)` with `c = sqrt(|phi1|^2 |phi2|^2 / (u1 u2))` and
///
/// ```text
/// A = ( i(psi1/conj(phi1) - conj(psi2)/phi2),
///       -psi1/conj(phi1) - conj(psi2)/phi2,
///       1 - psi1 conj(psi2) / (conj(phi1) phi2),
///       -i(1 + psi1 conj(psi2) / (conj(phi1) phi2)) ).
/// ```
pub fn normals_r4(s1: &SpinorSolution, s2: &SpinorSolution) -> Result<Normals> {
    s1.psi.check_grid(&s2.psi)?;
    let g = *s1.grid();
    let n = g.len();
    let mut n1 = vec![vec![ZERO; n]; 4];
    let mut n2 = vec![vec![ZERO; n]; 4];
    let mut mask = vec![false; n];
    for k in 0..n {
        let (a1, b1) = (s1.psi.values()[k], s1.phi.values()[k]);
        let (a2, b2) = (s2.psi.values()[k], s2.phi.values()[k]);
        let uu = (a1.norm_sqr() + b1.norm_sqr()) * (a2.norm_sqr() + b2.norm_sqr());
        let ff = b1.norm_sqr() * b2.norm_sqr();
        if !(ff > DEGENERACY_THRESHOLD && uu > DEGENERACY_THRESHOLD) {
            mask[k] = true;
            continue;
        }
        let r1 = a1 / b1.conj();
        let r2 = a2.conj() / b2;
        let q = a1 * a2.conj() / (b1.conj() * b2);
        let av = [I * (r1 - r2), -r1 - r2, 1.0 - q, -I * (1.0 + q)];
        let c = (ff / uu).sqrt();
        for i in 0..4 {
            n1[i][k] = Complex64::new(c * av[i].re, 0.0);
            n2[i][k] = Complex64::new(c * av[i].im, 0.0);
        }
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::AllDegenerate);
    }
    let to_fields = |v: Vec<Vec<Complex64>>| -> Vec<ScalarField> {
        v.into_iter().map(|c| ScalarField::from_values(g, c).expect("grid size").re()).collect()
    };
    Ok(Normals { n1: to_fields(n1), n2: to_fields(n2), mask })
}

/// Mean curvature of an R^3 or R^4 chart, from the spinors and from the coordinates.
#[derive(Debug, Clone)]
pub struct MeanCurvature {
    /// `(2p/(u1 u2)) Re(-i(psi1 phi2 + psi2 phi1), psi1 phi2 + psi2 phi1,
    /// psi1 conj(psi2) - phi1 conj(phi2), i(psi1 conj(psi2) - phi1 conj(phi2)))`,
    /// truncated to the chart dimension.
    pub h_vec: Vec<ScalarField>,
    /// `X_{z zbar} / g_zzbar` by finite differences.
    pub h_vec_fd: Vec<ScalarField>,
    pub h1: ScalarField,
    pub h2: ScalarField,
    /// `sqrt(h1^2 + h2^2)`; at zeros of `phi1 phi2` the continuous value
    /// `2|p|/sqrt(u1 u2)` is stored.
    pub h_scalar: ScalarField,
    /// `2p / sqrt(u1 u2)` (signed).
    pub h_closed: ScalarField,
    /// Metric degeneracy (chart mask or `g_zzbar <= METRIC_FLOOR`).
    pub mask: Vec<bool>,
    /// Zeros of `phi1 phi2`, where `h1`, `h2` are undefined and stored as zero.
    pub normal_mask: Vec<bool>,
}

fn mean_curvature_formula(s1: &SpinorSolution, s2: &SpinorSolution, p: &ScalarField) -> Vec<ScalarField> {
    let g = *p.grid();
    let n = g.len();
    let mut out = vec![vec![ZERO; n]; 4];
    for k in 0..n {
        let (a1, b1) = (s1.psi.values()[k], s1.phi.values()[k]);
        let (a2, b2) = (s2.psi.values()[k], s2.phi.values()[k]);
        let uu = (a1.norm_sqr() + b1.norm_sqr()) * (a2.norm_sqr() + b2.norm_sqr());
        if !(uu > DEGENERACY_THRESHOLD) {
            continue;
        }
        let c = 2.0 * p.values()[k].re / uu;
        let s = a1 * b2 + a2 * b1;
        let d = a1 * a2.conj() - b1 * b2.conj();
        let v = [-I * s, s, d, I * d];
        for i in 0..4 {
            out[i][k] = Complex64::new(c * v[i].re, 0.0);
        }
    }
    out.into_iter().map(|v| ScalarField::from_values(g, v).expect("grid size").re()).collect()
}

/// `X_{z zbar} / g_zzbar` of the flat metric, zero on `mask`.
fn h_vector_fd(chart: &SurfaceChart, flat: &MetricSample, mask: &[bool]) -> Vec<ScalarField> {
    let g = flat.g_zzbar.values();
    chart
        .coordinate_laplacians()
        .into_iter()
        .map(|lap| {
            let v = lap
                .values()
                .iter()
                .zip(g)
                .zip(mask)
                .map(|((l, gg), &m)| if m { ZERO } else { l / gg })
                .collect();
            let f = ScalarField::from_values(*chart.grid(), v).expect("grid size");
            if chart.ambient.is_complex() {
                f
            } else {
                f.re()
            }
        })
        .collect()
}

/// Mean curvature vector by formula and by finite differences, the normal
/// components `h1, h2` and the scalar `H`.
pub fn mean_curvature(
    s1: &SpinorSolution,
    s2: &SpinorSolution,
    p: &Potential,
    chart: &SurfaceChart,
) -> Result<MeanCurvature> {
    match chart.ambient {
        AmbientSpec::R3 | AmbientSpec::R4 | AmbientSpec::Conformal4(_) => {}
        ref other => {
            return Err(Error::InvalidArgument(format!("mean curvature formula needs an r3/r4 chart, got {}", other.tag())))
        }
    }
    for s in [s1, s2] {
        if s.kind != SystemKind::Euclidean {
            return Err(Error::KindMismatch { expected: "euclidean".into(), found: s.kind.as_str().into() });
        }
        s.psi.check_grid(p.p())?;
    }
    p.p().check_grid(&chart.coords[0])?;
    let flat = flat_metric(chart);
    let mask = or_masks(&chart.mask, &floor_mask(&flat.g_zzbar, METRIC_FLOOR));
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateMetric("g_zzbar vanishes on the whole grid".into()));
    }
    let mut h_vec = mean_curvature_formula(s1, s2, p.p());
    h_vec.truncate(chart.dimension());
    let h_vec_fd = h_vector_fd(chart, &flat, &mask);

    let g = *p.grid();
    let n = g.len();
    let mut h1 = vec![0.0; n];
    let mut h2 = vec![0.0; n];
    let mut hs = vec![0.0; n];
    let mut hc = vec![0.0; n];
    let mut normal_mask = vec![false; n];
    for k in 0..n {
        let (a1, b1) = (s1.psi.values()[k], s1.phi.values()[k]);
        let (a2, b2) = (s2.psi.values()[k], s2.phi.values()[k]);
        let pk = p.p().values()[k].re;
        let uu = (a1.norm_sqr() + b1.norm_sqr()) * (a2.norm_sqr() + b2.norm_sqr());
        if !(uu > DEGENERACY_THRESHOLD) {
            normal_mask[k] = true;
            continue;
        }
        hc[k] = 2.0 * pk / uu.sqrt();
        let ff = b1.norm_sqr() * b2.norm_sqr();
        if !(ff > DEGENERACY_THRESHOLD) {
            normal_mask[k] = true;
            hs[k] = hc[k].abs();
            continue;
        }
        let w = b1 * b2.conj();
        let den = (uu * ff).sqrt();
        h1[k] = -pk * (w + w.conj()).re / den;
        h2[k] = (I * pk * (w - w.conj())).re / den;
        hs[k] = h1[k].hypot(h2[k]);
    }
    let real = |v: Vec<f64>| ScalarField::from_real(g, v).expect("grid size");
    Ok(MeanCurvature {
        h_vec,
        h_vec_fd,
        h1: real(h1),
        h2: real(h2),
        h_scalar: real(hs),
        h_closed: real(hc),
        mask,
        normal_mask,
    })
}

/// Spinor-side prediction of `2 g_zzbar` for the flat part of the ambient metric.
pub fn spinor_metric_factor(ambient: &AmbientSpec, sols: &[SpinorSolution]) -> Result<ScalarField> {
    let need = |k: usize| {
        if sols.len() < k {
            Err(Error::DimensionMismatch(format!("{} needs {k} solutions, got {}", ambient.tag(), sols.len())))
        } else {
            Ok(())
        }
    };
    match ambient {
        AmbientSpec::R3 => {
            need(1)?;
            let u = u_factor(&sols[0]);
            Ok(&u * &u)
        }
        AmbientSpec::R4 | AmbientSpec::Conformal4(_) => {
            need(2)?;
            Ok(&u_factor(&sols[0]) * &u_factor(&sols[1]))
        }
        AmbientSpec::Split22 => {
            need(2)?;
            Ok(split_factor(&sols[0], &sols[1]))
        }
        AmbientSpec::Stacked(plan) => {
            let mut f = ScalarField::real_constant(*sols.first().ok_or(Error::EmptyPlan)?.grid(), 0.0);
            for b in plan {
                let term = match *b {
                    Block::Triple(a) => {
                        need(a + 1)?;
                        let u = u_factor(&sols[a]);
                        &u * &u
                    }
                    Block::Quad(a, c) => {
                        need(a.max(c) + 1)?;
                        &u_factor(&sols[a]) * &u_factor(&sols[c])
                    }
                };
                f = &f + &term;
            }
            Ok(f)
        }
        other => Err(Error::InvalidArgument(format!("no conformal factor formula for {} charts", other.tag()))),
    }
}

/// `(log |f|)_{z zbar} = f_{z zbar}/f - |f_z|^2/f^2` for a real field, zero on `mask`.
fn log_laplacian(f: &ScalarField, mask: &[bool]) -> ScalarField {
    let fz = d_z(f);
    let fzz = d_z(&d_zbar(f));
    let v = f
        .values()
        .iter()
        .zip(fz.values())
        .zip(fzz.values())
        .zip(mask)
        .map(|(((&f, fz), fzz), &m)| {
            if m {
                0.0
            } else {
                fzz.re / f.re - fz.norm_sqr() / (f.re * f.re)
            }
        })
        .collect();
    ScalarField::from_real(*f.grid(), v).expect("grid size")
}

/// `sigma_{z zbar}`; for the round sphere via the chain rule on the coordinates
/// so that no non-periodic field is differentiated spectrally.
fn sigma_laplacian(chart: &SurfaceChart) -> Option<ScalarField> {
    match &chart.ambient {
        AmbientSpec::Conformal4(ConformalFactor::Sigma(s)) => Some(d_z(&d_zbar(&s.re())).re()),
        AmbientSpec::Conformal4(ConformalFactor::S4 { k0 }) => {
            let grid = *chart.grid();
            let n = grid.len();
            let derivs = chart.coordinate_derivatives();
            let laps = chart.coordinate_laplacians();
            let mut q = vec![1.0; n];
            let mut qz = vec![ZERO; n];
            let mut qzz = vec![0.0; n];
            for (i, x) in chart.coords.iter().enumerate() {
                let (xz, xzb) = &derivs[i];
                for k in 0..n {
                    let xv = x.values()[k].re;
                    q[k] += k0 * xv * xv / 4.0;
                    qz[k] += xz.values()[k] * (k0 / 2.0 * xv);
                    qzz[k] += k0 / 2.0 * ((xz.values()[k] * xzb.values()[k]).re + xv * laps[i].values()[k].re);
                }
            }
            let v = (0..n).map(|k| -qzz[k] / q[k] + qz[k].norm_sqr() / (q[k] * q[k])).collect();
            Some(ScalarField::from_real(grid, v).expect("grid size"))
        }
        _ => None,
    }
}

/// Gaussian curvature from the spinors and, where possible, from the
/// finite-difference first fundamental form.
#[derive(Debug, Clone)]
pub struct GaussCurvature {
    /// `-(2/F) (log F)_{z zbar}` with `F = 2 g_zzbar` predicted by the spinors
    /// (times `e^{2 sigma}` in conformal ambients).
    pub k: ScalarField,
    /// Brioschi formula on the sampled line element. Absent for round-sphere
    /// ambients on periodic grids, where the factor is not periodic.
    pub k_brioschi: Option<ScalarField>,
    pub mask: Vec<bool>,
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian curvature of `E dx^2 + 2F dx dy + G dy^2` by the Brioschi formula.
pub fn brioschi(le: &LineElement, mask: &[bool]) -> ScalarField {
    let (e, f, g) = (&le.e, &le.f, &le.g);
    let (ex, ey) = (d_x(e), d_y(e));
    let (fx, fy) = (d_x(f), d_y(f));
    let (gx, gy) = (d_x(g), d_y(g));
    let eyy = d_y(&ey);
    let fxy = d_y(&fx);
    let gxx = d_x(&gx);
    let at = |s: &ScalarField, k: usize| s.values()[k].re;
    let v = (0..e.len())
        .map(|k| {
            if mask[k] {
                return 0.0;
            }
            let (ee, ff, gg) = (at(e, k), at(f, k), at(g, k));
            let m1 = [
                [-0.5 * at(&eyy, k) + at(&fxy, k) - 0.5 * at(&gxx, k), 0.5 * at(&ex, k), at(&fx, k) - 0.5 * at(&ey, k)],
                [at(&fy, k) - 0.5 * at(&gx, k), ee, ff],
                [0.5 * at(&gy, k), ff, gg],
            ];
            let m2 = [[0.0, 0.5 * at(&ey, k), 0.5 * at(&gx, k)], [0.5 * at(&ey, k), ee, ff], [0.5 * at(&gx, k), ff, gg]];
            let den = ee * gg - ff * ff;
            (det3(m1) - det3(m2)) / (den * den)
        })
        .collect();
    ScalarField::from_real(*e.grid(), v).expect("grid size")
}

fn brioschi_available(chart: &SurfaceChart) -> bool {
    !chart.ambient.is_complex()
        && !(chart.grid().is_periodic() && matches!(chart.ambient, AmbientSpec::Conformal4(ConformalFactor::S4 { .. })))
}

pub fn gauss_curvature(sols: &[SpinorSolution], chart: &SurfaceChart) -> Result<GaussCurvature> {
    let f = spinor_metric_factor(&chart.ambient, sols)?;
    f.check_grid(&chart.coords[0])?;
    let mask = or_masks(&chart.mask, &floor_mask(&f, DEGENERACY_THRESHOLD));
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateMetric("conformal factor vanishes on the whole grid".into()));
    }
    let mut lap = log_laplacian(&f, &mask);
    let mut total = f.clone();
    if let (Some(sl), Some(sigma)) = (sigma_laplacian(chart), conformal_sigma(chart)) {
        lap = &lap + &sl.scale_real(2.0);
        total = &total * &sigma.map_real(|s| (2.0 * s).exp());
    }
    let k = lap.zip_map(&total, |l, t| if t.re == 0.0 { ZERO } else { -2.0 * l / t })?.re();
    let k = ScalarField::from_real(
        *k.grid(),
        k.values().iter().zip(&mask).map(|(v, &m)| if m { 0.0 } else { v.re }).collect(),
    )?;
    let k_brioschi = if brioschi_available(chart) {
        let metric = induced_metric(chart);
        let bmask = or_masks(&mask, &floor_mask(&metric.g_zzbar, METRIC_FLOOR));
        metric.line_element.as_ref().map(|le| brioschi(le, &bmask))
    } else {
        None
    };
    Ok(GaussCurvature { k, k_brioschi, mask })
}

/// Sign convention of the Willmore functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Euclidean,
    Split22,
    ConformalEuclidean,
}

impl Signature {
    pub fn for_ambient(a: &AmbientSpec) -> Option<Self> {
        match a {
            AmbientSpec::R3 | AmbientSpec::R4 | AmbientSpec::Stacked(_) => Some(Signature::Euclidean),
            AmbientSpec::Split22 => Some(Signature::Split22),
            AmbientSpec::Conformal4(_) => Some(Signature::ConformalEuclidean),
            _ => None,
        }
    }
}

/// `W = 4 int p^2 dx dy`, negated for split signature.
pub fn willmore(p: &Potential, signature: Signature) -> f64 {
    let p2 = p.p().map(|v| Complex64::new(v.re * v.re, 0.0));
    let w = 4.0 * quadrature(&p2).re;
    match signature {
        Signature::Split22 => -w,
        Signature::Euclidean | Signature::ConformalEuclidean => w,
    }
}

/// `int <H, H> dS` with `dS = 2 g_zzbar dx dy`, both taken in the ambient metric.
///
/// `h_vec` holds the components of the mean curvature vector; in conformal
/// ambients these are `e^{-2 sigma}` times the flat `X_{z zbar}/g_zzbar`.
pub fn willmore_direct(chart: &SurfaceChart, h_vec: &[ScalarField]) -> Result<f64> {
    if chart.ambient.is_complex() {
        return Err(Error::InvalidArgument("willmore_direct needs a real chart".into()));
    }
    if h_vec.len() != chart.dimension() {
        return Err(Error::DimensionMismatch(format!("{} curvature components for a {}-dimensional chart", h_vec.len(), chart.dimension())));
    }
    let metric = induced_metric(chart);
    let mask = or_masks(&chart.mask, &floor_mask(&metric.g_zzbar, METRIC_FLOOR));
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateMetric("g_zzbar vanishes on the whole grid".into()));
    }
    let mut norm = bilinear(&chart.ambient.signature(), h_vec, h_vec);
    if let Some(s) = conformal_sigma(chart) {
        norm = &norm * &s.map_real(|v| (2.0 * v).exp());
    }
    let density = &norm * &metric.g_zzbar.scale_real(2.0);
    Ok(quadrature_masked(&density.re(), &mask).re)
}

/// Everything the analysis pipeline computes for one chart.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub ambient: String,
    pub u_factors: Vec<ScalarField>,
    pub metric: MetricSample,
    pub sigma: Option<ScalarField>,
    /// `|H|` from the spinors.
    pub h_scalar: Option<ScalarField>,
    /// `|H|` from finite differences of the coordinates.
    pub h_scalar_fd: Option<ScalarField>,
    /// Mean curvature vector by finite differences, ambient components.
    pub h_vector: Option<Vec<ScalarField>>,
    pub h_vector_formula: Option<Vec<ScalarField>>,
    pub k: Option<ScalarField>,
    pub k_brioschi: Option<ScalarField>,
    pub w: Option<f64>,
    pub w_direct: Option<f64>,
    pub degeneracy_mask: Vec<bool>,
    pub max_conformality_violation: f64,
    /// `max |2 g_zzbar - F| / max |F|` against the spinor factor `F`.
    pub metric_identity_error: Option<f64>,
    /// `max |H_fd - H| / max |H|` (absolute when `H` vanishes).
    pub h_discrepancy: Option<f64>,
    /// `max |K_brioschi - K| / |K|` over points with `|K| > 1e-3`.
    pub k_discrepancy: Option<f64>,
}

fn min_max_masked(f: &ScalarField, mask: &[bool]) -> [f64; 2] {
    let (lo, hi) = f
        .values()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(v.re), hi.max(v.re)));
    [lo, hi]
}

/// Largest relative pointwise disagreement where `|reference| > floor`.
pub fn relative_discrepancy(reference: &ScalarField, other: &ScalarField, mask: &[bool], floor: f64) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for ((r, o), &m) in reference.values().iter().zip(other.values()).zip(mask) {
        if m || !(r.norm() > floor) {
            continue;
        }
        let d = (r - o).norm() / r.norm();
        worst = Some(worst.map_or(d, |w| w.max(d)));
    }
    worst
}

impl GeometryReport {
    pub fn masked_fraction(&self) -> f64 {
        self.degeneracy_mask.iter().filter(|&&m| m).count() as f64 / self.degeneracy_mask.len() as f64
    }

    pub fn summary_json(&self) -> Value {
        let mm = |f: &Option<ScalarField>| f.as_ref().map(|f| min_max_masked(f, &self.degeneracy_mask));
        json!({
            "ambient": self.ambient,
            "W": self.w,
            "W_direct": self.w_direct,
            "masked_fraction": self.masked_fraction(),
            "max_conformality_violation": self.max_conformality_violation,
            "H_minmax": mm(&self.h_scalar),
            "H_fd_minmax": mm(&self.h_scalar_fd),
            "K_minmax": mm(&self.k),
            "metric_identity_error": self.metric_identity_error,
            "H_discrepancy": self.h_discrepancy,
            "K_discrepancy": self.k_discrepancy,
        })
    }
}

fn check_inputs(chart: &SurfaceChart, sols: &[SpinorSolution], p: &Potential) -> Result<ComplexGrid> {
    let g = *chart.grid();
    p.p().check_grid(&chart.coords[0])?;
    for s in sols {
        s.psi.check_grid(&chart.coords[0])?;
        if s.kind != p.kind() {
            return Err(Error::KindMismatch { expected: p.kind().as_str().into(), found: s.kind.as_str().into() });
        }
    }
    Ok(g)
}

/// Full analysis of a chart built from `sols`, which solve the system of `p`.
///
/// Minkowski and complex charts get the metric only.
pub fn analyze(chart: &SurfaceChart, sols: &[SpinorSolution], p: &Potential) -> Result<GeometryReport> {
    let grid = check_inputs(chart, sols, p)?;
    let metric = induced_metric(chart);
    let flat = flat_metric(chart);
    let sigma = conformal_sigma(chart);
    let u_factors: Vec<ScalarField> = sols.iter().map(u_factor).collect();
    let mask = or_masks(&chart.mask, &floor_mask(&flat.g_zzbar, METRIC_FLOOR));
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateMetric("g_zzbar vanishes on the whole grid".into()));
    }
    let max_conformality_violation = metric.conformality_violation(&mask);
    let metric_identity_error = chart.metric_factor.as_ref().map(|f| {
        let scale = f.norm_inf_masked(&mask).max(f64::MIN_POSITIVE);
        crate::field::max_abs_diff(&flat.g_zzbar.scale_real(2.0), f, Some(&mask)) / scale
    });

    let mut report = GeometryReport {
        ambient: chart.ambient.tag().to_string(),
        u_factors,
        metric,
        sigma: sigma.clone(),
        h_scalar: None,
        h_scalar_fd: None,
        h_vector: None,
        h_vector_formula: None,
        k: None,
        k_brioschi: None,
        w: None,
        w_direct: None,
        degeneracy_mask: mask.clone(),
        max_conformality_violation,
        metric_identity_error,
        h_discrepancy: None,
        k_discrepancy: None,
    };
    let Some(signature) = Signature::for_ambient(&chart.ambient) else {
        return Ok(report);
    };

    let factor = spinor_metric_factor(&chart.ambient, sols)?;
    let e2s = sigma.as_ref().map(|s| s.map_real(|v| (2.0 * v).exp()));
    let scale_down = |f: &ScalarField| match &e2s {
        Some(e) => f.zip_map(e, |a, b| a / b).expect("same grid").re(),
        None => f.clone(),
    };

    // Finite-difference mean curvature, pushed to ambient components.
    let h_flat = h_vector_fd(chart, &flat, &mask);
    let h_amb: Vec<ScalarField> = h_flat.iter().map(scale_down).collect();
    let sig = chart.ambient.signature();
    let h_sq_fd = {
        let s = bilinear(&sig, &h_flat, &h_flat).re();
        scale_down(&s)
    };
    let sign = if signature == Signature::Split22 { -1.0 } else { 1.0 };
    let h_sq = {
        let p2 = p.p().map_real(|v| 4.0 * sign * v * v);
        let v = p2
            .values()
            .iter()
            .zip(factor.values())
            .zip(&mask)
            .map(|((a, f), &m)| if m { 0.0 } else { a.re / f.re })
            .collect();
        scale_down(&ScalarField::from_real(grid, v)?)
    };
    let h_scalar = h_sq.map_real(|v| v.abs().sqrt());
    let h_scalar_fd = h_sq_fd.map_real(|v| v.abs().sqrt());
    let hmax = h_scalar.norm_inf_masked(&mask);
    let dh = crate::field::max_abs_diff(&h_scalar, &h_scalar_fd, Some(&mask));
    report.h_discrepancy = Some(if hmax > 0.0 { dh / hmax } else { dh });
    if matches!(chart.ambient, AmbientSpec::R3 | AmbientSpec::R4 | AmbientSpec::Conformal4(_)) {
        let (s1, s2) = if matches!(chart.ambient, AmbientSpec::R3) { (&sols[0], &sols[0]) } else { (&sols[0], &sols[1]) };
        let mut hv = mean_curvature_formula(s1, s2, p.p());
        hv.truncate(chart.dimension());
        report.h_vector_formula = Some(hv.iter().map(scale_down).collect());
    }
    report.w_direct = Some(willmore_direct(chart, &h_amb)?);
    report.w = Some(willmore(p, signature));
    report.h_vector = Some(h_amb);
    report.h_scalar = Some(h_scalar);
    report.h_scalar_fd = Some(h_scalar_fd);

    let gk = gauss_curvature(sols, chart)?;
    if let Some(kb) = &gk.k_brioschi {
        report.k_discrepancy = relative_discrepancy(&gk.k, kb, &gk.mask, 1e-3);
    }
    report.k = Some(gk.k);
    report.k_brioschi = gk.k_brioschi;
    Ok(report)
}

/// Geometry of an R^4 chart viewed in the conformally flat space with the
/// given factor: `ds^2 = e^{2 sigma} u1 u2 dz dzbar`,
/// `H = 2 e^{-sigma} p / sqrt(u1 u2)` and
/// `K = -2 e^{-2 sigma} (2 sigma + log(u1 u2))_{z zbar} / (u1 u2)`.
pub fn conformal_ambient_geometry(
    chart: &SurfaceChart,
    factor: ConformalFactor,
    sols: &[SpinorSolution],
    p: &Potential,
) -> Result<GeometryReport> {
    if !matches!(chart.ambient, AmbientSpec::R4 | AmbientSpec::Conformal4(_)) {
        return Err(Error::InvalidArgument(format!("conformal ambient needs an r4 chart, got {}", chart.ambient.tag())));
    }
    analyze(&chart.with_ambient(AmbientSpec::Conformal4(factor))?, sols, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{analytic_family, ExpMode, Family, Holomorphic};
    use crate::field::max_abs_diff;
    use crate::grid::BoundaryMode;
    use crate::weierstrass::{build_r3, build_r4};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `p = 1`, `psi = phi = e^{z - zbar}`: a round cylinder of radius 1/2.
    fn cylinder(n: usize) -> (Potential, Vec<SpinorSolution>) {
        let g = ComplexGrid::new(n, n, 0.0, 0.0, 1.0, PI, BoundaryMode::Periodic).unwrap();
        let fam = Family::Exponential {
            p: c(1.0, 0.0),
            solutions: vec![vec![ExpMode { amp: c(1.0, 0.0), lambda: c(1.0, 0.0), mu: c(-1.0, 0.0) }]],
        };
        analytic_family(g, SystemKind::Euclidean, &fam).unwrap()
    }

    #[test]
    fn cylinder_has_unit_mean_curvature_and_is_flat() {
        let (p, s) = cylinder(32);
        let ch = build_r3(&s[0]).unwrap();
        let rep = analyze(&ch, &s, &p).unwrap();
        let h = rep.h_scalar_fd.as_ref().unwrap();
        assert!(max_abs_diff(h, &ScalarField::real_constant(*h.grid(), 1.0), None) < 1e-10);
        assert!(rep.k.as_ref().unwrap().norm_inf() < 1e-10);
        assert!(rep.k_brioschi.as_ref().unwrap().norm_inf() < 1e-8);
        // W = 4 * area * p^2 with area = pi.
        assert!((rep.w.unwrap() - 4.0 * PI).abs() < 1e-10);
        assert!((rep.w_direct.unwrap() - 4.0 * PI).abs() < 1e-8);
        let mc = mean_curvature(&s[0], &s[0], &p, &ch).unwrap();
        assert!(max_abs_diff(&mc.h_scalar, &mc.h_closed, None) < 1e-12);
        for (a, b) in mc.h_vec.iter().zip(&mc.h_vec_fd) {
            assert!(max_abs_diff(a, b, None) < 1e-9);
        }
    }

    #[test]
    fn enneper_curvature_profile() {
        let g = ComplexGrid::open(81, -1.0, -1.0, 2.0, 2.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0), c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
        };
        let (p, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        let ch = build_r3(&s[0]).unwrap();
        let gk = gauss_curvature(&s, &ch).unwrap();
        let profile = ScalarField::sample(g, |z| c(-4.0 / (1.0 + z.norm_sqr()).powi(4), 0.0));
        assert!(max_abs_diff(&gk.k, &profile, None) < 1e-12);
        let rel = relative_discrepancy(&gk.k, gk.k_brioschi.as_ref().unwrap(), &gk.mask, 1e-3).unwrap();
        assert!(rel < 1e-4, "{rel}");
        let rep = analyze(&ch, &s, &p).unwrap();
        assert!(rep.h_scalar_fd.unwrap().norm_inf() < 1e-6);
        assert_eq!(rep.w, Some(0.0));
    }

    #[test]
    fn r4_normals_are_orthonormal_and_normal() {
        let (p, s) = cylinder(32);
        let fam = Family::Exponential {
            p: c(1.0, 0.0),
            solutions: vec![vec![ExpMode { amp: c(1.0, 0.0), lambda: c(1.0, 0.0), mu: c(-1.0, 0.0) }]],
        };
        let (_, s0) = analytic_family(*p.grid(), SystemKind::Euclidean, &fam).unwrap();
        let s2 = s0[0].partner(&p).unwrap();
        let s1 = SpinorSolution::combine(&[(c(1.0, 0.0), &s[0]), (c(0.3, 0.2), &s2)], &p, "mix").unwrap();
        let ch = build_r4(&p, &s1, &s2).unwrap();
        let nm = normals_r4(&s1, &s2).unwrap();
        let dot = |a: &[ScalarField], b: &[ScalarField]| bilinear(&[1.0; 4], a, b);
        let one = ScalarField::real_constant(*p.grid(), 1.0);
        assert!(max_abs_diff(&dot(&nm.n1, &nm.n1), &one, Some(&nm.mask)) < 1e-12);
        assert!(max_abs_diff(&dot(&nm.n2, &nm.n2), &one, Some(&nm.mask)) < 1e-12);
        assert!(dot(&nm.n1, &nm.n2).norm_inf_masked(&nm.mask) < 1e-12);
        let xz: Vec<ScalarField> = ch.coordinate_derivatives().into_iter().map(|d| d.0).collect();
        assert!(dot(&nm.n1, &xz).norm_inf_masked(&nm.mask) < 1e-9);
        assert!(dot(&nm.n2, &xz).norm_inf_masked(&nm.mask) < 1e-9);
    }

    #[test]
    fn zero_phi_is_masked_without_nans() {
        let g = ComplexGrid::open(9, -1.0, -1.0, 2.0, 2.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0), c(1.0, 0.0)] },
        };
        let (_, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        let nm = normals_r4(&s[0], &s[0]).unwrap();
        assert!(nm.mask[g.idx(4, 4)]);
        assert!(nm.n1.iter().all(|f| f.values().iter().all(|v| v.re.is_finite())));
        let zero = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![c(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![c(0.0, 0.0)] },
        };
        let (_, s) = analytic_family(g, SystemKind::Euclidean, &zero).unwrap();
        assert!(matches!(normals_r4(&s[0], &s[0]), Err(Error::AllDegenerate)));
    }

    #[test]
    fn willmore_signs() {
        let g = ComplexGrid::open(9, -1.0, -1.0, 2.0, 2.0).unwrap();
        let p0 = Potential::new(ScalarField::real_constant(g, 0.0), SystemKind::Euclidean).unwrap();
        assert_eq!(willmore(&p0, Signature::Euclidean), 0.0);
        let p1 = Potential::new(ScalarField::real_constant(g, 1.0), SystemKind::Split).unwrap();
        assert!((willmore(&p1, Signature::Split22) + 16.0).abs() < 1e-12);
        assert!((willmore(&p1, Signature::Euclidean) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_reproduces_flat_geometry() {
        let (p, s) = cylinder(32);
        let s2 = s[0].partner(&p).unwrap();
        let s1 = SpinorSolution::combine(&[(c(1.0, 0.0), &s[0]), (c(0.3, 0.2), &s2)], &p, "mix").unwrap();
        let sols = vec![s1.clone(), s2.clone()];
        let ch = build_r4(&p, &s1, &s2).unwrap();
        let flat = analyze(&ch, &sols, &p).unwrap();
        let zero = ScalarField::real_constant(*p.grid(), 0.0);
        let conf = conformal_ambient_geometry(&ch, ConformalFactor::Sigma(zero), &sols, &p).unwrap();
        assert_eq!(flat.k.as_ref().unwrap().values(), conf.k.as_ref().unwrap().values());
        assert_eq!(flat.h_scalar.as_ref().unwrap().values(), conf.h_scalar.as_ref().unwrap().values());
        assert_eq!(flat.w, conf.w);
    }
}
