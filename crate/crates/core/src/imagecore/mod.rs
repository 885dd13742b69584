//! Raster types, Netpbm I/O and colour reductions.

mod color;
mod pnm;

pub use color::{histogram, histogram_levels, intensity, to_hls, HlsImage, HlsPixel};
pub use pnm::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, read_pgm, read_ppm, write_pgm, write_ppm,
    read_any_grey,
};

use crate::error::{Error, Result};

/// An 8-bit grey-level raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GreyImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GreyImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height} raster",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Pointwise `255 - f`.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 255 - v).collect(),
        }
    }

    /// Pointwise `f <= g`. Images of different shape are never ordered.
    pub fn le(&self, other: &GreyImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(a, b)| a <= b)
    }
}

/// A 24-bit colour raster held as three planes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColorImage {
    width: usize,
    height: usize,
    r: Vec<u8>,
    g: Vec<u8>,
    b: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, r: Vec<u8>, g: Vec<u8>, b: Vec<u8>) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidImage("raster size overflows".into()))?;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(Error::InvalidImage(format!(
                "plane lengths ({}, {}, {}) do not match {width}x{height}",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        Ok(Self { width, height, r, g, b })
    }

    /// Builds a colour image from interleaved RGB triples.
    pub fn from_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if width.checked_mul(height).and_then(|n| n.checked_mul(3)) != Some(rgb.len()) {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height} RGB raster",
                rgb.len()
            )));
        }
        let (mut r, mut g, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for px in rgb.chunks_exact(3) {
            r.push(px[0]);
            g.push(px[1]);
            b.push(px[2]);
        }
        Ok(Self { width, height, r, g, b })
    }

    /// A colour image whose three planes are copies of `grey`.
    pub fn from_grey(grey: &GreyImage) -> Self {
        Self {
            width: grey.width,
            height: grey.height,
            r: grey.data.clone(),
            g: grey.data.clone(),
            b: grey.data.clone(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn red(&self) -> &[u8] {
        &self.r
    }

    pub fn green(&self) -> &[u8] {
        &self.g
    }

    pub fn blue(&self) -> &[u8] {
        &self.b
    }

    pub fn pixel(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let i = y * self.width + x;
        (self.r[i], self.g[i], self.b[i])
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u8, u8, u8)> + '_ {
        self.r.iter().zip(&self.g).zip(&self.b).map(|((&r, &g), &b)| (r, g, b))
    }

    pub fn interleaved(&self) -> Vec<u8> {
        self.pixels().flat_map(|(r, g, b)| [r, g, b]).collect()
    }
}
