//! Surface coordinates from spinor solutions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dirac::{residual, Potential, SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::form::{reconstruct_from_form, OneForm};
use crate::grid::ComplexGrid;
use crate::ops::{d_z, d_zbar};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Points whose metric factor (`u^2`, `u1 u2`, `|v|`, ...) is at or below
/// this value are masked as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Conformal factor of a conformally flat four-dimensional ambient space.
#[derive(Debug, Clone)]
pub enum ConformalFactor {
    /// Metric `e^{2 sigma} delta_ik` with `sigma` given on the grid.
    Sigma(ScalarField),
    /// Round sphere of curvature `k0`: `e^sigma = 1 / (1 + k0 |X|^2 / 4)`.
    S4 { k0: f64 },
}

/// One block of a stacked chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Three coordinates built from solution `alpha` alone.
    Triple(usize),
    /// Four coordinates built from the pair `(alpha, beta)`.
    Quad(usize, usize),
}

/// Target space of a chart.
#[derive(Debug, Clone)]
pub enum AmbientSpec {
    R3,
    R4,
    Split22,
    Minkowski4,
    Conformal4(ConformalFactor),
    Stacked(Vec<Block>),
    /// Coefficients `a[gamma][alpha][beta]`, symmetric in `alpha, beta`.
    Cn(Vec<Vec<Vec<Complex64>>>),
    /// `M x M` matrices weighted by one coefficient per potential.
    Glm { m: usize, weights: Vec<Complex64> },
}

impl AmbientSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            AmbientSpec::R3 => "r3",
            AmbientSpec::R4 => "r4",
            AmbientSpec::Split22 => "split22",
            AmbientSpec::Minkowski4 => "minkowski4",
            AmbientSpec::Conformal4(ConformalFactor::S4 { .. }) => "s4",
            AmbientSpec::Conformal4(ConformalFactor::Sigma(_)) => "conformal4",
            AmbientSpec::Stacked(_) => "stacked",
            AmbientSpec::Cn(_) => "cn",
            AmbientSpec::Glm { .. } => "glm",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            AmbientSpec::R3 => 3,
            AmbientSpec::R4 | AmbientSpec::Split22 | AmbientSpec::Minkowski4 | AmbientSpec::Conformal4(_) => 4,
            AmbientSpec::Stacked(plan) => plan
                .iter()
                .map(|b| match b {
                    Block::Triple(_) => 3,
                    Block::Quad(..) => 4,
                })
                .sum(),
            AmbientSpec::Cn(a) => a.len(),
            AmbientSpec::Glm { m, .. } => m * m,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, AmbientSpec::Cn(_) | AmbientSpec::Glm { .. })
    }

    /// Diagonal of the flat ambient metric used for inner products. Conformal
    /// targets return the flat part; the factor is applied separately.
    pub fn signature(&self) -> Vec<f64> {
        match self {
            AmbientSpec::Split22 => vec![1.0, 1.0, -1.0, -1.0],
            AmbientSpec::Minkowski4 => vec![1.0, 1.0, 1.0, -1.0],
            other => vec![1.0; other.dimension()],
        }
    }
}

/// Sampled immersion `z -> X(z)` with the one-forms it was integrated from.
#[derive(Debug, Clone)]
pub struct SurfaceChart {
    pub coords: Vec<ScalarField>,
    pub ambient: AmbientSpec,
    pub sources: Vec<String>,
    /// Closedness defect of the form behind each coordinate, relative to the
    /// largest form of the chart (a form that vanishes by symmetry would make
    /// a per-form ratio meaningless).
    pub closedness: Vec<f64>,
    /// Linear part `(a0, b0)` of each coordinate on periodic grids.
    pub drift: Vec<(Complex64, Complex64)>,
    /// Degenerate points (metric factor at or below [`DEGENERACY_THRESHOLD`]).
    pub mask: Vec<bool>,
    /// Spinor-side prediction of `2 g_zzbar` (`u^2`, `u1 u2`, `v`, ...) when one exists.
    pub metric_factor: Option<ScalarField>,
    /// Largest imaginary part dropped when storing real coordinates.
    pub imag_residue: f64,
    forms: Vec<OneForm>,
    base: (usize, usize),
}

impl SurfaceChart {
    fn from_forms(
        forms: Vec<OneForm>,
        ambient: AmbientSpec,
        sources: Vec<String>,
        metric_factor: Option<ScalarField>,
        base: (usize, usize),
    ) -> Result<Self> {
        if forms.len() != ambient.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "{} forms for a {}-dimensional target",
                forms.len(),
                ambient.dimension()
            )));
        }
        let grid = *forms[0].grid();
        let mut coords = Vec::with_capacity(forms.len());
        let mut closedness = Vec::with_capacity(forms.len());
        let mut drift = Vec::with_capacity(forms.len());
        let mut imag_residue: f64 = 0.0;
        let scale = forms.iter().fold(0.0f64, |m, w| m.max(w.size())) + 1e-300;
        for w in &forms {
            let r = reconstruct_from_form(w, base)?;
            closedness.push(w.closedness_defect() / scale);
            drift.push(r.drift);
            if ambient.is_complex() {
                coords.push(r.field);
            } else {
                imag_residue = imag_residue.max(r.field.max_imag());
                coords.push(r.field.re());
            }
        }
        let mask = match &metric_factor {
            Some(f) => f.values().iter().map(|v| v.norm() <= DEGENERACY_THRESHOLD).collect(),
            None => {
                // Fall back to the size of the forms themselves.
                let mut s = vec![0.0; grid.len()];
                for w in &forms {
                    for (k, (a, b)) in w.a.values().iter().zip(w.b.values()).enumerate() {
                        s[k] += a.norm_sqr() + b.norm_sqr();
                    }
                }
                s.into_iter().map(|v| v <= DEGENERACY_THRESHOLD).collect()
            }
        };
        Ok(Self { coords, ambient, sources, closedness, drift, mask, metric_factor, imag_residue, forms, base })
    }

    pub fn grid(&self) -> &ComplexGrid {
        self.coords[0].grid()
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn forms(&self) -> &[OneForm] {
        &self.forms
    }

    pub fn base(&self) -> (usize, usize) {
        self.base
    }

    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// True when every point is degenerate, for example for a zero solution.
    pub fn is_degenerate(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn max_closedness(&self) -> f64 {
        self.closedness.iter().fold(0.0, |m, &c| m.max(c))
    }

    /// Re-integrates the stored forms from another base index.
    pub fn rebased(&self, base: (usize, usize)) -> Result<Self> {
        Self::from_forms(self.forms.clone(), self.ambient.clone(), self.sources.clone(), self.metric_factor.clone(), base)
    }

    /// Same coordinates viewed in another ambient space of equal dimension,
    /// e.g. an R^4 chart read in Minkowski space or on S^4.
    pub fn with_ambient(&self, ambient: AmbientSpec) -> Result<Self> {
        if ambient.dimension() != self.dimension() || ambient.is_complex() != self.ambient.is_complex() {
            return Err(Error::DimensionMismatch(format!(
                "cannot view a {} chart as {}",
                self.ambient.tag(),
                ambient.tag()
            )));
        }
        let mut out = self.clone();
        out.ambient = ambient;
        Ok(out)
    }

    /// Coordinates with their linear drift removed (periodic part).
    fn periodic_part(&self, k: usize) -> ScalarField {
        let (a0, b0) = self.drift[k];
        if a0 == Complex64::new(0.0, 0.0) && b0 == Complex64::new(0.0, 0.0) {
            return self.coords[k].clone();
        }
        let g = *self.grid();
        let x = &self.coords[k];
        let lin = ScalarField::sample(g, |z| a0 * z + b0 * z.conj());
        let out = x - &lin;
        if self.ambient.is_complex() {
            out
        } else {
            out.re()
        }
    }

    /// `(X_z, X_zbar)` of every coordinate by differentiating the sampled
    /// coordinates (drift handled analytically on periodic grids).
    pub fn coordinate_derivatives(&self) -> Vec<(ScalarField, ScalarField)> {
        (0..self.dimension())
            .map(|k| {
                let y = self.periodic_part(k);
                let (a0, b0) = self.drift[k];
                let xz = &d_z(&y) + &ScalarField::constant(*self.grid(), a0);
                let xzb = &d_zbar(&y) + &ScalarField::constant(*self.grid(), b0);
                (xz, xzb)
            })
            .collect()
    }

    /// `X_{z zbar}` of every coordinate from the sampled coordinates.
    pub fn coordinate_laplacians(&self) -> Vec<ScalarField> {
        (0..self.dimension()).map(|k| d_z(&d_zbar(&self.periodic_part(k)))).collect()
    }

    /// Partial derivatives `(X_x, X_y)` of every coordinate.
    pub fn coordinate_gradients(&self) -> Vec<(ScalarField, ScalarField)> {
        self.coordinate_derivatives()
            .into_iter()
            .map(|(xz, xzb)| {
                let xx = &xz + &xzb;
                let xy = &(&xz - &xzb) * I;
                if self.ambient.is_complex() {
                    (xx, xy)
                } else {
                    (xx.re(), xy.re())
                }
            })
            .collect()
    }
}

fn check_kind(s: &SpinorSolution, kind: SystemKind) -> Result<()> {
    if s.kind != kind {
        return Err(Error::KindMismatch { expected: kind.as_str().into(), found: s.kind.as_str().into() });
    }
    Ok(())
}

/// Verifies that `s` solves the system of `p` about as well as recorded.
fn check_potential(p: &Potential, s: &SpinorSolution) -> Result<()> {
    let r = residual(p, s)?.norm;
    if r > 10.0 * s.residual_norm() + 1e-10 {
        return Err(Error::PotentialMismatch { residual: r });
    }
    Ok(())
}

fn u_factor(s: &SpinorSolution) -> ScalarField {
    &s.psi.norm_sqr() + &s.phi.norm_sqr()
}

fn r3_forms(s: &SpinorSolution) -> Vec<OneForm> {
    let pb = s.psi.conj();
    let pb2 = &pb * &pb;
    let ph2 = &s.phi * &s.phi;
    vec![
        OneForm::real(&(&pb2 + &ph2) * (I * 0.5)),
        OneForm::real(&(&pb2 - &ph2) * 0.5),
        OneForm::real(-&(&pb * &s.phi)),
    ]
}

fn r4_forms(s1: &SpinorSolution, s2: &SpinorSolution) -> Vec<OneForm> {
    let (pb1, pb2) = (s1.psi.conj(), s2.psi.conj());
    let a = &pb1 * &pb2;
    let b = &s1.phi * &s2.phi;
    let c = &pb1 * &s2.phi;
    let d = &pb2 * &s1.phi;
    vec![
        OneForm::real(&(&a + &b) * (I * 0.5)),
        OneForm::real(&(&a - &b) * 0.5),
        OneForm::real(&(&c + &d) * -0.5),
        OneForm::real(&(&c - &d) * (I * 0.5)),
    ]
}

fn split_forms(s1: &SpinorSolution, s2: &SpinorSolution) -> Vec<OneForm> {
    let (pb1, pb2) = (s1.psi.conj(), s2.psi.conj());
    let a = &pb1 * &pb2;
    let b = &s1.phi * &s2.phi;
    let c = &pb1 * &s2.phi;
    let d = &pb2 * &s1.phi;
    vec![
        OneForm::real(&(&a - &b) * (I * 0.5)),
        OneForm::real(&(&a + &b) * 0.5),
        OneForm::real(&(&c + &d) * -0.5),
        OneForm::real(&(&c - &d) * (I * 0.5)),
    ]
}

/// Conformal immersion into R^3 from one euclidean solution.
pub fn build_r3(s: &SpinorSolution) -> Result<SurfaceChart> {
    check_kind(s, SystemKind::Euclidean)?;
    let u = u_factor(s);
    SurfaceChart::from_forms(r3_forms(s), AmbientSpec::R3, vec![s.label.clone()], Some(&u * &u), (0, 0))
}

/// Conformal immersion into R^4 from two solutions of the same euclidean system.
pub fn build_r4(p: &Potential, s1: &SpinorSolution, s2: &SpinorSolution) -> Result<SurfaceChart> {
    for s in [s1, s2] {
        check_kind(s, SystemKind::Euclidean)?;
        check_potential(p, s)?;
    }
    let factor = &u_factor(s1) * &u_factor(s2);
    SurfaceChart::from_forms(
        r4_forms(s1, s2),
        AmbientSpec::R4,
        vec![s1.label.clone(), s2.label.clone()],
        Some(factor),
        (0, 0),
    )
}

/// `v = (|psi1|^2 - |phi1|^2)(|psi2|^2 - |phi2|^2)`.
pub fn split_factor(s1: &SpinorSolution, s2: &SpinorSolution) -> ScalarField {
    let v1 = &s1.psi.norm_sqr() - &s1.phi.norm_sqr();
    let v2 = &s2.psi.norm_sqr() - &s2.phi.norm_sqr();
    &v1 * &v2
}

/// Conformal immersion into the space with metric `diag(1, 1, -1, -1)`.
pub fn build_split22(p: &Potential, s1: &SpinorSolution, s2: &SpinorSolution) -> Result<SurfaceChart> {
    for s in [s1, s2] {
        check_kind(s, SystemKind::Split)?;
        check_potential(p, s)?;
    }
    SurfaceChart::from_forms(
        split_forms(s1, s2),
        AmbientSpec::Split22,
        vec![s1.label.clone(), s2.label.clone()],
        Some(split_factor(s1, s2)),
        (0, 0),
    )
}

/// Concatenation of R^3 and R^4 blocks into R^{3n+4m}.
pub fn build_stacked(p: &Potential, sols: &[SpinorSolution], plan: &[Block]) -> Result<SurfaceChart> {
    if plan.is_empty() {
        return Err(Error::EmptyPlan);
    }
    let get = |k: usize| {
        sols.get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("plan refers to solution {k}, only {} given", sols.len())))
    };
    let mut forms = Vec::new();
    let mut factor = ScalarField::real_constant(*p.grid(), 0.0);
    let mut sources = Vec::new();
    for b in plan {
        match *b {
            Block::Triple(a) => {
                let s = get(a)?;
                check_kind(s, SystemKind::Euclidean)?;
                check_potential(p, s)?;
                let u = u_factor(s);
                factor = &factor + &(&u * &u);
                forms.extend(r3_forms(s));
                sources.push(s.label.clone());
            }
            Block::Quad(a, c) => {
                let (s1, s2) = (get(a)?, get(c)?);
                for s in [s1, s2] {
                    check_kind(s, SystemKind::Euclidean)?;
                    check_potential(p, s)?;
                }
                factor = &factor + &(&u_factor(s1) * &u_factor(s2));
                forms.extend(r4_forms(s1, s2));
                sources.push(format!("{}+{}", s1.label, s2.label));
            }
        }
    }
    SurfaceChart::from_forms(forms, AmbientSpec::Stacked(plan.to_vec()), sources, Some(factor), (0, 0))
}

/// Complex coordinates `X^g = sum_ab A^g_ab int (psi_a psi_b dzbar - phi_a phi_b dz)`.
pub fn build_cn(p: &Potential, sols: &[SpinorSolution], coeffs: &[Vec<Vec<Complex64>>]) -> Result<SurfaceChart> {
    let n = sols.len();
    if coeffs.is_empty() {
        return Err(Error::ShapeMismatch { expected: 1, found: 0 });
    }
    for a in coeffs {
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch { expected: n * n, found: a.iter().map(Vec::len).sum() });
        }
        for i in 0..n {
            for j in 0..n {
                if (a[i][j] - a[j][i]).norm() > 1e-12 * (1.0 + a[i][j].norm()) {
                    return Err(Error::InvalidArgument("coefficient tensor must be symmetric".into()));
                }
            }
        }
    }
    for s in sols {
        if s.kind == SystemKind::Split {
            return Err(Error::KindMismatch { expected: "euclidean or complex_p".into(), found: "split".into() });
        }
        check_potential(p, s)?;
    }
    let g = *p.grid();
    let forms = coeffs
        .iter()
        .map(|a| {
            let mut fa = ScalarField::zeros(g);
            let mut fb = ScalarField::zeros(g);
            for i in 0..n {
                for j in 0..n {
                    if a[i][j] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    fa = &fa - &(&sols[i].phi * &sols[j].phi).scale(a[i][j]);
                    fb = &fb + &(&sols[i].psi * &sols[j].psi).scale(a[i][j]);
                }
            }
            OneForm { a: fa, b: fb }
        })
        .collect();
    SurfaceChart::from_forms(
        forms,
        AmbientSpec::Cn(coeffs.to_vec()),
        sols.iter().map(|s| s.label.clone()).collect(),
        None,
        (0, 0),
    )
}

/// Closed-form metric of a C^N chart: `(g_zz, g_zzbar, g_zbarzbar)` with
/// `X_z = -sum A phi phi` and `X_zbar = sum A psi psi` summed per coordinate.
pub fn cn_metric(sols: &[SpinorSolution], coeffs: &[Vec<Vec<Complex64>>]) -> (ScalarField, ScalarField, ScalarField) {
    let g = *sols[0].grid();
    let n = sols.len();
    let mut gzz = ScalarField::zeros(g);
    let mut gzzb = ScalarField::zeros(g);
    let mut gzbzb = ScalarField::zeros(g);
    for a in coeffs {
        let mut sp = ScalarField::zeros(g);
        let mut sf = ScalarField::zeros(g);
        for i in 0..n {
            for j in 0..n {
                sp = &sp + &(&sols[i].psi * &sols[j].psi).scale(a[i][j]);
                sf = &sf + &(&sols[i].phi * &sols[j].phi).scale(a[i][j]);
            }
        }
        gzz = &gzz + &(&sf * &sf);
        gzzb = &gzzb - &(&sf * &sp);
        gzbzb = &gzbzb + &(&sp * &sp);
    }
    (gzz, gzzb, gzbzb)
}

/// A matrix-valued chart together with sampled invertibility.
#[derive(Debug, Clone)]
pub struct GlmChart {
    pub chart: SurfaceChart,
    pub m: usize,
    /// Fraction of grid points whose matrix has condition number below 1e8.
    pub invertible_fraction: f64,
}

impl GlmChart {
    /// Matrix `X^{ab}` at grid index `k`.
    pub fn matrix_at(&self, k: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.m, self.m, |a, b| self.chart.coords[a * self.m + b].values()[k])
    }
}

/// `X^{ab} = sum_i B_i int (psi_a psi_b dzbar - phi_a phi_b dz)` over solution
/// sets of different potentials.
pub fn build_glm(sets: &[(Potential, Vec<SpinorSolution>)], weights: &[Complex64]) -> Result<GlmChart> {
    if sets.is_empty() {
        return Err(Error::ShapeMismatch { expected: 1, found: 0 });
    }
    if weights.len() != sets.len() {
        return Err(Error::ShapeMismatch { expected: sets.len(), found: weights.len() });
    }
    let m = sets[0].1.len();
    if m == 0 {
        return Err(Error::ShapeMismatch { expected: 1, found: 0 });
    }
    for (p, sols) in sets {
        if sols.len() != m {
            return Err(Error::ShapeMismatch { expected: m, found: sols.len() });
        }
        for s in sols {
            check_kind(s, SystemKind::Euclidean)?;
            check_potential(p, s)?;
        }
    }
    let g = *sets[0].0.grid();
    let mut forms = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let mut fa = ScalarField::zeros(g);
            let mut fb = ScalarField::zeros(g);
            for ((_, sols), w) in sets.iter().zip(weights) {
                fa = &fa - &(&sols[a].phi * &sols[b].phi).scale(*w);
                fb = &fb + &(&sols[a].psi * &sols[b].psi).scale(*w);
            }
            forms.push(OneForm { a: fa, b: fb });
        }
    }
    let sources = sets.iter().flat_map(|(_, s)| s.iter().map(|x| x.label.clone())).collect();
    let chart = SurfaceChart::from_forms(forms, AmbientSpec::Glm { m, weights: weights.to_vec() }, sources, None, (0, 0))?;
    let mut out = GlmChart { chart, m, invertible_fraction: 0.0 };
    let n = g.len();
    let good = (0..n)
        .filter(|&k| {
            let sv = out.matrix_at(k).singular_values();
            let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
            hi > 0.0 && lo > 0.0 && hi / lo < 1e8
        })
        .count();
    out.invertible_fraction = good as f64 / n as f64;
    Ok(out)
}
