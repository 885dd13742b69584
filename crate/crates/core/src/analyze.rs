//! Principal component analysis for 2-D scatter views of a dataset, and
//! scatter exports (CSV with an optional SVG rendering).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{format_value, Dataset};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unsorted, in diagonal order) and the eigenvectors as
/// columns of a row-major `n x n` matrix. Iterates until the off-diagonal
/// Frobenius norm falls below `tol` times the matrix norm (or `tol` itself
/// for a zero matrix).
pub fn jacobi_eigen(a: &[Vec<f64>], tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-9 * (1.0 + a[i][j].abs()) {
                return Err(Error::InvalidInput("matrix is not symmetric".into()));
            }
        }
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let norm: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = tol * norm.max(1.0);
    let off = |m: &[Vec<f64>]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i][j] * m[i][j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&m) <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    if off(&m) > threshold {
        return Err(Error::InvalidInput("Jacobi iteration did not converge".into()));
    }
    Ok(((0..n).map(|i| m[i][i]).collect(), v))
}

/// Flips `v` so that its largest-magnitude coordinate (first one on ties) is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaMatrix {
    #[default]
    Covariance,
    /// Covariance of standardised features; zero-variance features are left centred.
    Correlation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-feature divisor applied after centring (all ones for covariance).
    pub scale: Vec<f64>,
    /// Unit-norm directions, one per component.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, descending.
    pub eigenvalues: Vec<f64>,
    /// Every eigenvalue of the matrix, descending; their sum is the total variance.
    pub all_eigenvalues: Vec<f64>,
}

/// Sample covariance (divisor `n - 1`) of the rows in `data`.
pub fn covariance(data: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for row in data {
        let c: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

pub fn fit_pca(ds: &Dataset, n_components: usize, matrix: PcaMatrix) -> Result<PcaModel> {
    if ds.len() < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 samples, got {}", ds.len())));
    }
    let d = ds.feature_count();
    if n_components == 0 || n_components > d.min(ds.len() - 1) {
        return Err(Error::Config(format!(
            "{n_components} components requested from {} samples with {d} features",
            ds.len()
        )));
    }
    let rows: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.features.clone()).collect();
    let (mean, mut cov) = covariance(&rows);
    let scale: Vec<f64> = match matrix {
        PcaMatrix::Covariance => vec![1.0; d],
        PcaMatrix::Correlation => (0..d)
            .map(|i| if cov[i][i] > 0.0 { cov[i][i].sqrt() } else { 1.0 })
            .collect(),
    };
    for i in 0..d {
        for j in 0..d {
            cov[i][j] /= scale[i] * scale[j];
        }
    }
    let (values, vectors) = jacobi_eigen(&cov, 1e-12)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|k| {
            let mut v: Vec<f64> = vectors.iter().map(|row| row[k]).collect();
            canonical_sign(&mut v);
            let lambda = if values[k] < 0.0 && values[k] > -1e-9 { 0.0 } else { values[k] };
            (lambda, v)
        })
        .collect();
    // descending eigenvalue; equal eigenvalues keep diagonal order
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let all_eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    pairs.truncate(n_components);
    let (eigenvalues, components) = pairs.into_iter().unzip();
    Ok(PcaModel { mean, scale, components, eigenvalues, all_eigenvalues })
}

impl PcaModel {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Scores of one vector on every component.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found: x.len() });
        }
        let centred: Vec<f64> = x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centred).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maps scores back to feature space.
    pub fn inverse_transform(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        for (c, s) in self.components.iter().zip(scores) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += s * v;
            }
        }
        out.iter().zip(&self.mean).zip(&self.scale).map(|((o, m), sc)| o * sc + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub id: String,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// Scores on the first two components (the second axis is 0 for a 1-component model).
pub fn project(model: &PcaModel, ds: &Dataset) -> Result<Vec<ScatterRow>> {
    ds.samples
        .iter()
        .map(|s| {
            let t = model.transform(&s.features)?;
            Ok(ScatterRow {
                id: s.id.clone(),
                label: s.label.clone(),
                x: t[0],
                y: t.get(1).copied().unwrap_or(0.0),
            })
        })
        .collect()
}

/// Raw values of two 1-based features.
pub fn feature_pair(ds: &Dataset, fx: usize, fy: usize) -> Result<Vec<ScatterRow>> {
    let n = ds.feature_count();
    for f in [fx, fy] {
        if f == 0 || f > n {
            return Err(Error::InvalidInput(format!("feature {f} outside 1..={n}")));
        }
    }
    Ok(ds
        .samples
        .iter()
        .map(|s| ScatterRow {
            id: s.id.clone(),
            label: s.label.clone(),
            x: s.features[fx - 1],
            y: s.features[fy - 1],
        })
        .collect())
}

/// Every unordered pair of the given 1-based features, in order.
pub fn feature_pairs(features: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, &a) in features.iter().enumerate() {
        for &b in &features[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

pub fn write_scatter_csv(rows: &[ScatterRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["sample_id", "label", "x", "y"])?;
    for r in rows {
        w.write_record([r.id.as_str(), r.label.as_str(), &format_value(r.x), &format_value(r.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scatter_csv(input: impl Read) -> Result<Vec<ScatterRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "label", "x", "y"] {
        return Err(Error::Csv("scatter header must be sample_id,label,x,y".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| {
            rec[c].parse::<f64>().map_err(|_| Error::NonNumeric { line: i + 2, column: c + 1, value: rec[c].to_owned() })
        };
        rows.push(ScatterRow { id: rec[0].to_owned(), label: rec[1].to_owned(), x: num(2)?, y: num(3)? });
    }
    Ok(rows)
}

const GLYPHS: [&str; 7] = ["circle", "square", "triangle", "diamond", "cross", "plus", "star"];
const COLOURS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn glyph(kind: &str, x: f64, y: f64, colour: &str) -> String {
    let r = 4.0;
    match kind {
        "circle" => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{colour}"/>"#),
        "square" => format!(
            r#"<rect x="{:.2}" y="{:.2}" width="{}" height="{}" fill="{colour}"/>"#,
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        "triangle" => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{colour}"/>"#,
            x,
            y - r,
            x - r,
            y + r,
            x + r,
            y + r
        ),
        "diamond" => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{colour}"/>"#,
            x,
            y - r,
            x + r,
            y,
            x,
            y + r,
            x - r,
            y
        ),
        "cross" => format!(
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{colour}" stroke-width="2"/>"#,
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        ),
        "plus" => format!(
            r#"<path d="M{:.2},{y:.2}L{:.2},{y:.2}M{x:.2},{:.2}L{x:.2},{:.2}" stroke="{colour}" stroke-width="2"/>"#,
            x - r,
            x + r,
            y - r,
            y + r
        ),
        _ => {
            let pts: Vec<String> = (0..10)
                .map(|i| {
                    let a = std::f64::consts::PI * i as f64 / 5.0 - std::f64::consts::FRAC_PI_2;
                    let rr = if i % 2 == 0 { r * 1.3 } else { r * 0.55 };
                    format!("{:.2},{:.2}", x + rr * a.cos(), y + rr * a.sin())
                })
                .collect();
            format!(r#"<polygon points="{}" fill="{colour}"/>"#, pts.join(" "))
        }
    }
}

/// An 800x800 SVG scatterplot with one marker style per label and a legend.
pub fn render_svg(rows: &[ScatterRow], x_label: &str, y_label: &str) -> String {
    const SIZE: f64 = 800.0;
    const L: f64 = 80.0;
    const R: f64 = 160.0;
    const T: f64 = 40.0;
    const B: f64 = 80.0;
    let labels: Vec<&str> = {
        let mut l: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        l.sort();
        l.dedup();
        l
    };
    let style: BTreeMap<&str, (&str, &str)> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, (GLYPHS[i % GLYPHS.len()], COLOURS[(i / GLYPHS.len() + i) % COLOURS.len()])))
        .collect();
    let range = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(rows.iter().map(|r| r.x).collect());
    let (y0, y1) = range(rows.iter().map(|r| r.y).collect());
    let (pw, ph) = (SIZE - L - R, SIZE - T - B);
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| T + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="800" height="800" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{L}" y="{}" text-anchor="start">{}</text>"#, T + ph + 18.0, format_value(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L + pw, T + ph + 18.0, format_value(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L - 6.0, T + ph, format_value(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, L - 6.0, T + 10.0, format_value(y1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, L + pw / 2.0, SIZE - 30.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        T + ph / 2.0,
        T + ph / 2.0,
        escape(y_label)
    );
    for r in rows {
        let (g, c) = style[r.label.as_str()];
        let _ = writeln!(s, "{}", glyph(g, sx(r.x), sy(r.y), c));
    }
    for (i, l) in labels.iter().enumerate() {
        let (g, c) = style[l];
        let y = T + 10.0 + 20.0 * i as f64;
        let _ = writeln!(s, "{}", glyph(g, SIZE - R + 20.0, y, c));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, SIZE - R + 32.0, y + 4.0, escape(l));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `rows` as CSV and, when `svg` is given, as an SVG plot too.
pub fn export_scatter(
    rows: &[ScatterRow],
    csv_path: impl AsRef<Path>,
    svg: Option<(&Path, &str, &str)>,
) -> Result<()> {
    write_scatter_csv(rows, File::create(csv_path)?)?;
    if let Some((path, xl, yl)) = svg {
        std::fs::write(path, render_svg(rows, xl, yl))?;
    }
    Ok(())
}
