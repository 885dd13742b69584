//! Grey-level granulometries and the size-intensity diagram.
//!
//! The opening granulometry is the normalised volume removed by openings of
//! increasing size, `G(r) = (V[f] - V[open(f, B(r))]) / V[f]`. The closing
//! granulometry mirrors it, normalised by the headroom left under 255.
//!
//! The size-intensity diagram counts, for every size `r` and grey level `k`,
//! the pixels of the threshold set `{f >= k}` that survive a binary opening by
//! `B(r)`. Flat openings commute with thresholding, so the count is read off
//! the cumulative histogram of the grey-level opening at each size.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagecore::GreyImage;
use crate::morphology::{closings, openings, volume, Family};

pub const DEFAULT_R_MAX: usize = 30;
pub const DEFAULT_K_MAX: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Openings,
    Closings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranulometryCurve {
    pub family: Family,
    pub kind: CurveKind,
    /// Volume of the filtered image at each size `0..=r_max`.
    pub volumes: Vec<u64>,
    /// `G(r)` at each size `0..=r_max`.
    pub values: Vec<f64>,
}

impl GranulometryCurve {
    pub fn r_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Cumulative size distribution by openings of increasing size.
pub fn granulometry_openings(f: &GreyImage, family: Family, r_max: usize) -> Result<GranulometryCurve> {
    let total = volume(f);
    if total == 0 {
        return Err(Error::DegenerateImage("opening granulometry of an all-zero image".into()));
    }
    let volumes: Vec<u64> = openings(f, family, r_max).map(|g| volume(&g)).collect();
    let values = volumes.iter().map(|&v| (total - v) as f64 / total as f64).collect();
    Ok(GranulometryCurve { family, kind: CurveKind::Openings, volumes, values })
}

/// Cumulative size distribution of dark structures by closings of increasing size.
pub fn granulometry_closings(f: &GreyImage, family: Family, r_max: usize) -> Result<GranulometryCurve> {
    let total = volume(f);
    let ceiling = 255 * f.len() as u64;
    if total == ceiling {
        return Err(Error::DegenerateImage("closing granulometry of a saturated image".into()));
    }
    let headroom = ceiling - total;
    let volumes: Vec<u64> = closings(f, family, r_max).map(|g| volume(&g)).collect();
    let values = volumes.iter().map(|&v| (v - total) as f64 / headroom as f64).collect();
    Ok(GranulometryCurve { family, kind: CurveKind::Closings, volumes, values })
}

/// `SI(r, k)` for `r` in `0..=r_max` and `k` in a set of grey levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeIntensityDiagram {
    pub family: Family,
    pub r_max: usize,
    /// Sampled grey levels, ascending, each in `1..=255`.
    pub levels: Vec<u8>,
    /// Row-major by size: `cells[r * levels.len() + i]` is `SI(r, levels[i])`.
    pub cells: Vec<u64>,
    pub pixels: u64,
}

impl SizeIntensityDiagram {
    /// `SI(r, k)`, or `None` if `k` was not sampled.
    pub fn get(&self, r: usize, k: u8) -> Option<u64> {
        let i = self.levels.binary_search(&k).ok()?;
        (r <= self.r_max).then(|| self.cells[r * self.levels.len() + i])
    }

    /// The row of sizes at fixed grey level `k`.
    pub fn row(&self, k: u8) -> Option<Vec<u64>> {
        let i = self.levels.binary_search(&k).ok()?;
        Some((0..=self.r_max).map(|r| self.cells[r * self.levels.len() + i]).collect())
    }

    /// The column of grey levels at fixed size `r`.
    pub fn column(&self, r: usize) -> &[u64] {
        let n = self.levels.len();
        &self.cells[r * n..(r + 1) * n]
    }
}

/// Size-intensity diagram at every grey level `1..=k_max`.
pub fn size_intensity(f: &GreyImage, family: Family, r_max: usize, k_max: u8) -> Result<SizeIntensityDiagram> {
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    size_intensity_levels(f, family, r_max, (1..=k_max).collect())
}

/// Size-intensity diagram at grey levels `stride, 2*stride, ...` up to `k_max`.
pub fn size_intensity_strided(
    f: &GreyImage,
    family: Family,
    r_max: usize,
    k_max: u8,
    stride: u8,
) -> Result<SizeIntensityDiagram> {
    if k_max == 0 || stride == 0 {
        return Err(Error::InvalidInput("k_max and stride must be at least 1".into()));
    }
    let levels = (1..=k_max).filter(|k| k % stride == 0 || stride == 1).collect();
    size_intensity_levels(f, family, r_max, levels)
}

fn size_intensity_levels(
    f: &GreyImage,
    family: Family,
    r_max: usize,
    levels: Vec<u8>,
) -> Result<SizeIntensityDiagram> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidInput("grey levels must lie in 1..=255".into()));
    }
    let mut cells = Vec::with_capacity((r_max + 1) * levels.len());
    for opened in openings(f, family, r_max) {
        // survival[k] = #{x : opened(x) >= k}
        let mut counts = [0u64; 257];
        for &v in opened.data() {
            counts[v as usize] += 1;
        }
        let mut survival = [0u64; 257];
        for k in (0..256).rev() {
            survival[k] = survival[k + 1] + counts[k];
        }
        cells.extend(levels.iter().map(|&k| survival[k as usize]));
    }
    Ok(SizeIntensityDiagram { family, r_max, levels, cells, pixels: f.len() as u64 })
}

pub fn write_curve_csv(curve: &GranulometryCurve, out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "r,value")?;
    for (r, v) in curve.values.iter().enumerate() {
        writeln!(out, "{r},{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_diagram_csv(diagram: &SizeIntensityDiagram, out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "r,k,count")?;
    for r in 0..=diagram.r_max {
        for (k, count) in diagram.levels.iter().zip(diagram.column(r)) {
            writeln!(out, "{r},{k},{count}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn export_curve(curve: &GranulometryCurve, path: impl AsRef<Path>) -> Result<()> {
    write_curve_csv(curve, File::create(path)?)
}

pub fn export_diagram(diagram: &SizeIntensityDiagram, path: impl AsRef<Path>) -> Result<()> {
    write_diagram_csv(diagram, File::create(path)?)
}

fn data_lines(input: impl BufRead, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == header => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(Error::Csv(format!("expected header {header:?}"))),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let cells: Vec<String> = line.split(',').map(str::to_owned).collect();
        if cells.len() != width {
            return Err(Error::RaggedRow { line: i + 1, expected: width, found: cells.len() });
        }
        rows.push((i + 1, cells));
    }
    Ok(rows)
}

fn cell<T: std::str::FromStr>(line: usize, column: usize, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::NonNumeric { line, column, value: value.to_owned() })
}

/// Parses `r,value` rows back into `(r, G(r))` pairs.
pub fn read_curve_csv(input: impl BufRead) -> Result<Vec<(usize, f64)>> {
    data_lines(input, "r,value")?
        .into_iter()
        .map(|(line, c)| Ok((cell(line, 1, &c[0])?, cell(line, 2, &c[1])?)))
        .collect()
}

/// Parses `r,k,count` rows.
pub fn read_diagram_csv(input: impl BufRead) -> Result<Vec<(usize, u8, u64)>> {
    data_lines(input, "r,k,count")?
        .into_iter()
        .map(|(line, c)| Ok((cell(line, 1, &c[0])?, cell(line, 2, &c[1])?, cell(line, 3, &c[2])?)))
        .collect()
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    read_curve_csv(BufReader::new(File::open(path)?))
}

pub fn load_diagram(path: impl AsRef<Path>) -> Result<Vec<(usize, u8, u64)>> {
    read_diagram_csv(BufReader::new(File::open(path)?))
}
