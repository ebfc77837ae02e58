//! Text formats: scalar-field CSV, spinor manifests, chart CSV and OBJ meshes.
//!
//! Every writer takes extra comment lines (for example a configuration hash)
//! that readers skip. Numbers are written with 17 significant digits so that
//! a write/read cycle reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::{SpinorSolution, SystemKind};
use crate::error::{Error, Result};
use crate::field::{FieldKind, ScalarField};
use crate::grid::{BoundaryMode, ComplexGrid};
use crate::weierstrass::SurfaceChart;

const FIELD_HEADER: &str = "# nx,ny,x0,y0,lx,ly,boundary_mode,kind";
const CHART_HEADER: &str = "# nx,ny,x0,y0,lx,ly,boundary_mode,dimension,complex,ambient";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(line, format!("{what}: '{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} is not finite")));
    }
    Ok(v)
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| parse_err(line, format!("{what}: '{}' is not a non-negative integer", s.trim())))
}

fn push_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        for l in c.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
}

/// Non-empty lines with their 1-based numbers.
fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(k, l)| (k + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn grid_values(grid: &ComplexGrid) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        grid.nx,
        grid.ny,
        num(grid.x0),
        num(grid.y0),
        num(grid.lx),
        num(grid.ly),
        grid.mode.as_str()
    )
}

/// Reads the two header lines and returns the metadata cells after the grid.
fn read_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    header: &str,
    extra: usize,
) -> Result<(ComplexGrid, Vec<&'a str>, usize)> {
    let (n1, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if first.replace(' ', "") != header.replace(' ', "") {
        return Err(parse_err(n1, format!("expected header '{header}'")));
    }
    let (n2, second) = lines.next().ok_or_else(|| parse_err(n1 + 1, "missing grid line"))?;
    let cells: Vec<&str> = second.trim_start_matches('#').split(',').map(str::trim).collect();
    if cells.len() != 7 + extra {
        return Err(parse_err(n2, format!("expected {} header values, found {}", 7 + extra, cells.len())));
    }
    let grid = ComplexGrid::new(
        parse_usize(cells[0], n2, "nx")?,
        parse_usize(cells[1], n2, "ny")?,
        parse_f64(cells[2], n2, "x0")?,
        parse_f64(cells[3], n2, "y0")?,
        parse_f64(cells[4], n2, "lx")?,
        parse_f64(cells[5], n2, "ly")?,
        BoundaryMode::parse(cells[6]).map_err(|e| parse_err(n2, e.to_string()))?,
    )
    .map_err(|e| parse_err(n2, e.to_string()))?;
    Ok((grid, cells[7..].to_vec(), n2))
}

/// Reads `i,j,...` rows, requiring every grid point exactly once.
fn read_rows<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    grid: &ComplexGrid,
    width: usize,
    last_line: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; grid.len()];
    let mut seen = 0;
    for (n, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != width + 2 {
            return Err(parse_err(n, format!("expected {} columns, found {}", width + 2, cells.len())));
        }
        let i = parse_usize(cells[0], n, "i")?;
        let j = parse_usize(cells[1], n, "j")?;
        if i >= grid.nx || j >= grid.ny {
            return Err(parse_err(n, format!("index ({i},{j}) outside a {}x{} grid", grid.nx, grid.ny)));
        }
        let k = grid.idx(i, j);
        if rows[k].is_some() {
            return Err(parse_err(n, format!("duplicate row for ({i},{j})")));
        }
        let vals = cells[2..].iter().map(|c| parse_f64(c, n, "value")).collect::<Result<Vec<f64>>>()?;
        rows[k] = Some(vals);
        seen += 1;
    }
    if seen != grid.len() {
        return Err(parse_err(last_line, format!("expected {} rows, found {seen}", grid.len())));
    }
    Ok(rows.into_iter().map(|r| r.expect("all rows present")).collect())
}

/// Scalar field as CSV: two header lines, optional comments, then `i,j,re,im`.
pub fn field_to_csv(f: &ScalarField, comments: &[String]) -> String {
    let g = f.grid();
    let mut out = String::with_capacity(64 * g.len());
    let _ = writeln!(out, "{FIELD_HEADER}");
    let _ = writeln!(out, "# {},{}", grid_values(g), f.kind().as_str());
    push_comments(&mut out, comments);
    for i in 0..g.nx {
        for j in 0..g.ny {
            let v = f.at(i, j);
            let _ = writeln!(out, "{i},{j},{},{}", num(v.re), num(v.im));
        }
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let mut lines = numbered(text);
    let (grid, meta, n2) = read_header(&mut lines, FIELD_HEADER, 1)?;
    let kind = FieldKind::parse(meta[0]).map_err(|e| parse_err(n2, e.to_string()))?;
    let last = text.lines().count().max(1);
    let rows = read_rows(lines, &grid, 2, last)?;
    match kind {
        FieldKind::Real => {
            if let Some(k) = rows.iter().position(|r| r[1] != 0.0) {
                return Err(parse_err(n2, format!("real field has a nonzero imaginary part at point {k}")));
            }
            ScalarField::from_real(grid, rows.into_iter().map(|r| r[0]).collect())
        }
        FieldKind::Complex => ScalarField::from_values(grid, rows.into_iter().map(|r| Complex64::new(r[0], r[1])).collect()),
    }
}

pub fn write_field(path: &Path, f: &ScalarField, comments: &[String]) -> Result<()> {
    fs::write(path, field_to_csv(f, comments))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    field_from_csv(&fs::read_to_string(path)?)
}

/// Sidecar describing a stored solution; file names are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorManifest {
    pub kind: SystemKind,
    pub label: String,
    pub residual_norm: f64,
    pub potential_file: Option<String>,
    pub psi_file: String,
    pub phi_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Writes `<stem>.psi.csv`, `<stem>.phi.csv` and `<stem>.json` into `dir`.
pub fn save_solution(
    dir: &Path,
    stem: &str,
    s: &SpinorSolution,
    potential_file: Option<&str>,
    config_hash: Option<&str>,
) -> Result<SpinorManifest> {
    let comments: Vec<String> = config_hash.map(|h| vec![format!("config_hash={h}")]).unwrap_or_default();
    let psi_file = format!("{stem}.psi.csv");
    let phi_file = format!("{stem}.phi.csv");
    write_field(&dir.join(&psi_file), &s.psi, &comments)?;
    write_field(&dir.join(&phi_file), &s.phi, &comments)?;
    let m = SpinorManifest {
        kind: s.kind,
        label: s.label.clone(),
        residual_norm: s.residual_norm(),
        potential_file: potential_file.map(String::from),
        psi_file,
        phi_file,
        config_hash: config_hash.map(String::from),
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&m)?)?;
    Ok(m)
}

pub fn load_solution(manifest: &Path) -> Result<(SpinorManifest, SpinorSolution)> {
    let m: SpinorManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let psi = read_field(&dir.join(&m.psi_file))?;
    let phi = read_field(&dir.join(&m.phi_file))?;
    let s = SpinorSolution::with_recorded_residual(psi, phi, m.kind, m.label.clone(), m.residual_norm)?;
    Ok((m, s))
}

/// Coordinates of a chart as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartData {
    pub grid: ComplexGrid,
    pub ambient: String,
    pub complex: bool,
    /// One vector per coordinate, in storage order.
    pub coords: Vec<Vec<Complex64>>,
}

impl ChartData {
    pub fn from_chart(chart: &SurfaceChart) -> Self {
        Self {
            grid: *chart.grid(),
            ambient: chart.ambient.tag().to_string(),
            complex: chart.ambient.is_complex(),
            coords: chart.coords.iter().map(|c| c.values().to_vec()).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }
}

/// Rows `i,j,X1,...,Xd` (real and imaginary parts interleaved for complex targets).
pub fn chart_to_csv(chart: &ChartData, comments: &[String]) -> String {
    let g = &chart.grid;
    let mut out = String::with_capacity(32 * g.len() * (chart.dimension() + 1));
    let _ = writeln!(out, "{CHART_HEADER}");
    let _ = writeln!(out, "# {},{},{},{}", grid_values(g), chart.dimension(), chart.complex, chart.ambient);
    push_comments(&mut out, comments);
    for i in 0..g.nx {
        for j in 0..g.ny {
            let k = g.idx(i, j);
            let _ = write!(out, "{i},{j}");
            for c in &chart.coords {
                let _ = write!(out, ",{}", num(c[k].re));
                if chart.complex {
                    let _ = write!(out, ",{}", num(c[k].im));
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn chart_from_csv(text: &str) -> Result<ChartData> {
    let mut lines = numbered(text);
    let (grid, meta, n2) = read_header(&mut lines, CHART_HEADER, 3)?;
    let dim = parse_usize(meta[0], n2, "dimension")?;
    if dim == 0 {
        return Err(parse_err(n2, "dimension must be positive"));
    }
    let complex: bool = meta[1].parse().map_err(|_| parse_err(n2, format!("complex flag '{}' is not true/false", meta[1])))?;
    let ambient = meta[2].to_string();
    let width = if complex { 2 * dim } else { dim };
    let rows = read_rows(lines, &grid, width, text.lines().count().max(1))?;
    let coords = (0..dim)
        .map(|d| {
            rows.iter()
                .map(|r| if complex { Complex64::new(r[2 * d], r[2 * d + 1]) } else { Complex64::new(r[d], 0.0) })
                .collect()
        })
        .collect();
    Ok(ChartData { grid, ambient, complex, coords })
}

/// ASCII OBJ mesh of coordinates `triple` (0-based), real parts only.
/// Vertices are row-major in `(i, j)`; each grid cell becomes two triangles.
pub fn chart_to_obj(chart: &ChartData, triple: [usize; 3], comments: &[String]) -> Result<String> {
    if let Some(&bad) = triple.iter().find(|&&t| t >= chart.dimension()) {
        return Err(Error::DimensionMismatch(format!(
            "coordinate {} requested from a {}-dimensional chart",
            bad + 1,
            chart.dimension()
        )));
    }
    let g = &chart.grid;
    let mut out = String::with_capacity(80 * g.len());
    push_comments(&mut out, comments);
    let _ = writeln!(out, "# coordinates {},{},{}", triple[0] + 1, triple[1] + 1, triple[2] + 1);
    for k in 0..g.len() {
        let v = triple.map(|t| chart.coords[t][k].re);
        let _ = writeln!(out, "v {} {} {}", num(v[0]), num(v[1]), num(v[2]));
    }
    let vid = |i: usize, j: usize| g.idx(i, j) + 1;
    for i in 0..g.nx - 1 {
        for j in 0..g.ny - 1 {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            let _ = writeln!(out, "f {a} {b} {c}");
            let _ = writeln!(out, "f {a} {c} {d}");
        }
    }
    Ok(out)
}

/// Parses `"i,j,k"` (1-based) into a 0-based triple.
pub fn parse_triple(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!("expected three comma-separated indices, got '{s}'")));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        let v: usize = p.parse().map_err(|_| Error::InvalidArgument(format!("'{p}' is not a coordinate index")))?;
        if v == 0 {
            return Err(Error::InvalidArgument("coordinate indices start at 1".into()));
        }
        *o = v - 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{analytic_family, Family, Holomorphic, Potential};
    use crate::weierstrass::build_r3;

    fn grid() -> ComplexGrid {
        ComplexGrid::new(5, 4, -0.5, 0.25, 2.0, 1.5, BoundaryMode::Open).unwrap()
    }

    #[test]
    fn field_csv_round_trip_is_exact() {
        let f = ScalarField::sample(grid(), |z| (z * 1.3).exp() / 7.0);
        let text = field_to_csv(&f, &["config_hash=abc".into()]);
        assert!(text.starts_with(FIELD_HEADER));
        assert_eq!(field_from_csv(&text).unwrap(), f);
        let r = ScalarField::sample_real(grid(), |x, y| x.sin() * y);
        assert_eq!(field_from_csv(&field_to_csv(&r, &[])).unwrap(), r);
    }

    #[test]
    fn corrupted_field_csv_gives_parse_errors() {
        let f = ScalarField::sample_real(grid(), |x, _| x);
        let good = field_to_csv(&f, &[]);
        let cases = [
            String::new(),
            good.replacen("nx", "mx", 1),
            good.lines().take(5).collect::<Vec<_>>().join("\n"),
            good.replace("2,1,", "2,1,oops,"),
            good.replacen("4,3,", "9,3,", 1),
            good.replacen("0,0,", "0,1,", 1),
            good.replacen(",real", ",imaginary", 1),
        ];
        for c in &cases {
            assert!(matches!(field_from_csv(c), Err(Error::Parse { .. })), "accepted: {c:.60}");
        }
    }

    #[test]
    fn solution_manifest_round_trip() {
        let dir = std::env::temp_dir().join(format!("wforge-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = grid();
        let p = Potential::new(ScalarField::real_constant(g, 0.0), SystemKind::Euclidean).unwrap();
        let s = SpinorSolution::new(ScalarField::sample(g, |z| z.conj()), ScalarField::sample(g, |z| z * z), &p, "poly").unwrap();
        save_solution(&dir, "s1", &s, Some("p.csv"), Some("feed")).unwrap();
        let (m, back) = load_solution(&dir.join("s1.json")).unwrap();
        assert_eq!(m.potential_file.as_deref(), Some("p.csv"));
        assert_eq!(back.psi, s.psi);
        assert_eq!(back.phi, s.phi);
        assert_eq!(back.residual_norm(), s.residual_norm());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn chart_csv_and_obj() {
        let g = ComplexGrid::open(6, -1.0, -1.0, 2.0, 2.0).unwrap();
        let fam = Family::Minimal {
            psi_bar: Holomorphic::Polynomial { coeffs: vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] },
            phi: Holomorphic::Polynomial { coeffs: vec![Complex64::new(1.0, 0.0)] },
        };
        let (_, s) = analytic_family(g, SystemKind::Euclidean, &fam).unwrap();
        let data = ChartData::from_chart(&build_r3(&s[0]).unwrap());
        let text = chart_to_csv(&data, &[]);
        assert_eq!(chart_from_csv(&text).unwrap(), data);
        let obj = chart_to_obj(&data, [0, 1, 2], &["hash".into()]).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 36);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 50);
        assert!(obj.contains("f 1 7 8"));
        assert!(chart_to_obj(&data, [0, 1, 3], &[]).is_err());
        assert_eq!(parse_triple("2, 3,1").unwrap(), [1, 2, 0]);
        assert!(parse_triple("0,1,2").is_err());
    }
}
