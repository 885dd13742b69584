//! Flat grey-scale erosion, dilation, opening and closing.
//!
//! Every structuring element `B(r)` is the ball of radius `r` for a grid
//! metric: chessboard (square), city-block (diamond) or hexagonal distance on
//! a square raster whose even rows are shifted half a pixel to the right.
//! Since each of these metrics is a path metric whose geodesics stay inside
//! any rectangle, `B(r)` is the `r`-fold dilation of the unit ball, even with
//! the neighbourhood clamped to the image frame. The operators below exploit
//! that and iterate the unit operator; [`erode_direct`] and [`dilate_direct`]
//! scan the full ball instead and must agree bit for bit.
//!
//! Pixels outside the frame are ignored, never padded.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::imagecore::GreyImage;

/// Shape of the unit structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// 6-neighbourhood emulated on the square grid with row-parity offsets.
    Hexagon,
    /// 8-neighbourhood.
    Square,
    /// 4-neighbourhood.
    Diamond,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Hexagon, Family::Square, Family::Diamond];

    /// Grid distance between `(x0, y0)` and `(x1, y1)`.
    pub fn distance(self, x0: usize, y0: usize, x1: usize, y1: usize) -> usize {
        let dx = x1 as i64 - x0 as i64;
        let dy = y1 as i64 - y0 as i64;
        let d = match self {
            Family::Square => dx.abs().max(dy.abs()),
            Family::Diamond => dx.abs() + dy.abs(),
            Family::Hexagon => {
                // even-r offset coordinates to axial
                let q0 = x0 as i64 - (y0 as i64 + 1) / 2;
                let q1 = x1 as i64 - (y1 as i64 + 1) / 2;
                let dq = q1 - q0;
                (dq.abs() + dy.abs() + (dq + dy).abs()) / 2
            }
        };
        d as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Hexagon => "hex",
            Family::Square => "square",
            Family::Diamond => "diamond",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hex" | "hexagon" => Ok(Family::Hexagon),
            "square" | "sq" => Ok(Family::Square),
            "diamond" | "cross" => Ok(Family::Diamond),
            other => Err(Error::InvalidInput(format!("unknown structuring element family {other:?}"))),
        }
    }
}

/// The structuring element `B(r)` of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    pub family: Family,
    pub size: usize,
}

impl StructuringElement {
    pub fn new(family: Family, size: usize) -> Self {
        Self { family, size }
    }

    pub fn hexagon(size: usize) -> Self {
        Self::new(Family::Hexagon, size)
    }

    pub fn square(size: usize) -> Self {
        Self::new(Family::Square, size)
    }

    pub fn diamond(size: usize) -> Self {
        Self::new(Family::Diamond, size)
    }

    /// Offsets `(dx, dy)` of `B(r)` centred on a pixel of the given row parity.
    pub fn offsets(&self, row: usize) -> Vec<(i64, i64)> {
        let r = self.size as i64;
        // Centre on a row of the requested parity far enough from zero to
        // keep all coordinates non-negative.
        let cy = 2 * r + (row % 2) as i64;
        let cx = 2 * r;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let d = self.family.distance(
                    cx as usize,
                    cy as usize,
                    (cx + dx) as usize,
                    (cy + dy) as usize,
                );
                if d <= self.size {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    /// Number of pixels in `B(r)` away from the frame.
    pub fn cardinality(&self) -> usize {
        self.offsets(0).len()
    }
}

trait Lattice {
    fn op(a: u8, b: u8) -> u8;
}

struct Inf;
struct Sup;

impl Lattice for Inf {
    #[inline(always)]
    fn op(a: u8, b: u8) -> u8 {
        a.min(b)
    }
}

impl Lattice for Sup {
    #[inline(always)]
    fn op(a: u8, b: u8) -> u8 {
        a.max(b)
    }
}

/// Three-wide window along a row, clamped at the ends.
fn window3<L: Lattice>(row: &[u8], out: &mut [u8]) {
    let n = row.len();
    if n == 1 {
        out[0] = row[0];
        return;
    }
    out[0] = L::op(row[0], row[1]);
    for x in 1..n - 1 {
        out[x] = L::op(L::op(row[x - 1], row[x]), row[x + 1]);
    }
    out[n - 1] = L::op(row[n - 2], row[n - 1]);
}

/// Pair `(x, x+1)` along a row, clamped at the right end.
fn pair_right<L: Lattice>(row: &[u8], out: &mut [u8]) {
    let n = row.len();
    for x in 0..n - 1 {
        out[x] = L::op(row[x], row[x + 1]);
    }
    out[n - 1] = row[n - 1];
}

/// Pair `(x-1, x)` along a row, clamped at the left end.
fn pair_left<L: Lattice>(row: &[u8], out: &mut [u8]) {
    out[0] = row[0];
    for x in 1..row.len() {
        out[x] = L::op(row[x - 1], row[x]);
    }
}

/// One application of the unit ball `B(1)`.
fn unit_pass<L: Lattice>(src: &GreyImage, family: Family) -> GreyImage {
    let (w, h) = (src.width(), src.height());
    let data = src.data();
    let rows = |y: usize| &data[y * w..(y + 1) * w];

    let mut w3 = vec![0u8; w * h];
    for y in 0..h {
        window3::<L>(rows(y), &mut w3[y * w..(y + 1) * w]);
    }
    // What each row contributes to the rows above and below it.
    let vertical: Vec<u8> = match family {
        Family::Square => w3.clone(),
        Family::Diamond => data.to_vec(),
        Family::Hexagon => Vec::new(),
    };
    // Hexagon: a row seen from an even row contributes (x, x+1), seen from an
    // odd row it contributes (x-1, x).
    let (mut right, mut left) = (Vec::new(), Vec::new());
    if family == Family::Hexagon {
        right = vec![0u8; w * h];
        left = vec![0u8; w * h];
        for y in 0..h {
            pair_right::<L>(rows(y), &mut right[y * w..(y + 1) * w]);
            pair_left::<L>(rows(y), &mut left[y * w..(y + 1) * w]);
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        dst.copy_from_slice(&w3[y * w..(y + 1) * w]);
        let adj: &[u8] = match family {
            Family::Hexagon if y % 2 == 0 => &right,
            Family::Hexagon => &left,
            _ => &vertical,
        };
        for ny in [y.wrapping_sub(1), y + 1] {
            if ny < h {
                let src_row = &adj[ny * w..(ny + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src_row) {
                    *d = L::op(*d, s);
                }
            }
        }
    }
    GreyImage::new(w, h, out).expect("same raster size")
}

fn iterate<L: Lattice>(f: &GreyImage, se: StructuringElement) -> GreyImage {
    let mut cur = f.clone();
    for _ in 0..se.size {
        cur = unit_pass::<L>(&cur, se.family);
    }
    cur
}

fn direct<L: Lattice>(f: &GreyImage, se: StructuringElement) -> GreyImage {
    let (w, h) = (f.width() as i64, f.height() as i64);
    let even = se.offsets(0);
    let odd = se.offsets(1);
    GreyImage::from_fn(f.width(), f.height(), |x, y| {
        let offsets = if y % 2 == 0 { &even } else { &odd };
        let mut acc = f.get(x, y);
        for &(dx, dy) in offsets {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if (0..w).contains(&nx) && (0..h).contains(&ny) {
                acc = L::op(acc, f.get(nx as usize, ny as usize));
            }
        }
        acc
    })
}

/// Minimum of `f` over `B(r)` at every pixel.
pub fn erode(f: &GreyImage, se: StructuringElement) -> GreyImage {
    iterate::<Inf>(f, se)
}

/// Maximum of `f` over `B(r)` at every pixel. All families are symmetric, so
/// the reflected element is the element itself.
pub fn dilate(f: &GreyImage, se: StructuringElement) -> GreyImage {
    iterate::<Sup>(f, se)
}

/// Erosion by a single scan over the whole ball.
pub fn erode_direct(f: &GreyImage, se: StructuringElement) -> GreyImage {
    direct::<Inf>(f, se)
}

/// Dilation by a single scan over the whole ball.
pub fn dilate_direct(f: &GreyImage, se: StructuringElement) -> GreyImage {
    direct::<Sup>(f, se)
}

/// Erosion followed by dilation.
pub fn open(f: &GreyImage, se: StructuringElement) -> GreyImage {
    dilate(&erode(f, se), se)
}

/// Dilation followed by erosion.
pub fn close(f: &GreyImage, se: StructuringElement) -> GreyImage {
    erode(&dilate(f, se), se)
}

/// Openings by `B(0)..=B(r_max)`, computed sharing the erosion chain.
pub fn openings(f: &GreyImage, family: Family, r_max: usize) -> impl Iterator<Item = GreyImage> + '_ {
    let mut eroded = f.clone();
    (0..=r_max).map(move |r| {
        if r > 0 {
            eroded = unit_pass::<Inf>(&eroded, family);
        }
        iterate::<Sup>(&eroded, StructuringElement::new(family, r))
    })
}

/// Closings by `B(0)..=B(r_max)`, computed sharing the dilation chain.
pub fn closings(f: &GreyImage, family: Family, r_max: usize) -> impl Iterator<Item = GreyImage> + '_ {
    let mut dilated = f.clone();
    (0..=r_max).map(move |r| {
        if r > 0 {
            dilated = unit_pass::<Sup>(&dilated, family);
        }
        iterate::<Inf>(&dilated, StructuringElement::new(family, r))
    })
}

/// Sum of all grey levels.
pub fn volume(f: &GreyImage) -> u64 {
    f.data().iter().map(|&v| u64::from(v)).sum()
}

/// Number of non-zero pixels.
pub fn area_nonzero(f: &GreyImage) -> usize {
    f.data().iter().filter(|&&v| v != 0).count()
}
