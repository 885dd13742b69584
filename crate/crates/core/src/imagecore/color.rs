use super::{ColorImage, GreyImage};
use crate::error::{Error, Result};

/// Hue in degrees `0..360`, luminance and saturation in `0..=255`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct HlsPixel {
    pub h: u16,
    pub l: u8,
    pub s: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HlsImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<HlsPixel>,
}

impl HlsImage {
    pub fn hue(&self) -> impl Iterator<Item = u32> + '_ {
        self.pixels.iter().map(|p| u32::from(p.h))
    }

    pub fn luminance(&self) -> impl Iterator<Item = u32> + '_ {
        self.pixels.iter().map(|p| u32::from(p.l))
    }

    pub fn saturation(&self) -> impl Iterator<Item = u32> + '_ {
        self.pixels.iter().map(|p| u32::from(p.s))
    }
}

/// `floor(num / den + 1/2)` for a positive denominator.
#[inline]
fn round_half_up(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

/// Per-pixel mean of the three channels, rounded half up.
pub fn intensity(img: &ColorImage) -> GreyImage {
    let data = img
        .pixels()
        .map(|(r, g, b)| {
            let sum = u32::from(r) + u32::from(g) + u32::from(b);
            ((2 * sum + 3) / 6) as u8
        })
        .collect();
    GreyImage::new(img.width(), img.height(), data).expect("planes share the raster size")
}

/// Double-hexcone HLS of a single RGB triple.
///
/// All quantities are computed as exact rationals on the 0..=255 scale, so
/// the rounding to integer ranges is free of floating-point ties.
pub fn rgb_to_hls(r: u8, g: u8, b: u8) -> HlsPixel {
    let (r, g, b) = (i64::from(r), i64::from(g), i64::from(b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = round_half_up(max + min, 2) as u8;
    if max == min {
        return HlsPixel { h: 0, l, s: 0 };
    }
    let d = max - min;
    let denom = if max + min <= 255 { max + min } else { 510 - max - min };
    let s = round_half_up(255 * d, denom) as u8;

    // hue = 60 * sector_offset, with sector_offset a rational over d
    let num = if max == r {
        60 * (g - b)
    } else if max == g {
        60 * (b - r) + 120 * d
    } else {
        60 * (r - g) + 240 * d
    };
    let num = if num < 0 { num + 360 * d } else { num };
    let h = round_half_up(num, d) % 360;
    HlsPixel { h: h as u16, l, s }
}

pub fn to_hls(img: &ColorImage) -> HlsImage {
    HlsImage {
        width: img.width(),
        height: img.height(),
        pixels: img.pixels().map(|(r, g, b)| rgb_to_hls(r, g, b)).collect(),
    }
}

/// Normalised histogram of 8-bit values with `bins` uniform bins over `0..=255`.
pub fn histogram(values: impl IntoIterator<Item = u8>, bins: usize) -> Result<Vec<f64>> {
    histogram_levels(values.into_iter().map(u32::from), bins, 256)
}

/// Normalised histogram of integer values in `0..levels`.
///
/// Value `v` falls into bin `v * bins / levels`, which splits the levels into
/// uniform-width bins with the last one closed.
pub fn histogram_levels(
    values: impl IntoIterator<Item = u32>,
    bins: usize,
    levels: u32,
) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("histogram needs at least one level".into()));
    }
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for v in values {
        if v >= levels {
            return Err(Error::InvalidInput(format!("value {v} outside 0..{levels}")));
        }
        let bin = (u64::from(v) * bins as u64 / u64::from(levels)) as usize;
        counts[bin] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::InvalidInput("histogram of empty input".into()));
    }
    Ok(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(r: u8, g: u8, b: u8) -> ColorImage {
        ColorImage::from_interleaved(1, 1, &[r, g, b]).unwrap()
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(intensity(&one_pixel(100, 150, 200)).data(), &[150]);
        assert_eq!(intensity(&one_pixel(0, 0, 0)).data(), &[0]);
        assert_eq!(intensity(&one_pixel(255, 255, 255)).data(), &[255]);
        assert_eq!(intensity(&one_pixel(1, 1, 2)).data(), &[1]);
        // 5/3 = 1.67 and 3.5 rounds up
        assert_eq!(intensity(&one_pixel(1, 2, 2)).data(), &[2]);
        assert_eq!(intensity(&one_pixel(0, 0, 1)).data(), &[0]);
    }

    #[test]
    fn hls_examples() {
        assert_eq!(rgb_to_hls(90, 90, 90), HlsPixel { h: 0, l: 90, s: 0 });
        assert_eq!(rgb_to_hls(255, 0, 0), HlsPixel { h: 0, l: 128, s: 255 });
        assert_eq!(rgb_to_hls(0, 255, 0).h, 120);
        assert_eq!(rgb_to_hls(0, 0, 255).h, 240);
        assert_eq!(rgb_to_hls(255, 255, 0).h, 60);
        assert_eq!(rgb_to_hls(255, 0, 255).h, 300);
    }

    #[test]
    fn hls_matches_float_formulas() {
        // Independent floating-point evaluation of the textbook formulas.
        fn reference(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
            let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let l = (max + min) / 2.0;
            if max == min {
                return (0.0, l, 0.0);
            }
            let d = max - min;
            let s = if l <= 0.5 { d / (max + min) } else { d / (2.0 - max - min) };
            let h = if max == r {
                60.0 * ((g - b) / d).rem_euclid(6.0)
            } else if max == g {
                60.0 * ((b - r) / d + 2.0)
            } else {
                60.0 * ((r - g) / d + 4.0)
            };
            (h, l, s)
        }
        for r in (0..=255u8).step_by(17) {
            for g in (0..=255u8).step_by(15) {
                for b in (0..=255u8).step_by(51) {
                    let px = rgb_to_hls(r, g, b);
                    let (h, l, s) = reference(r, g, b);
                    assert!((px.l as f64 - l * 255.0).abs() <= 0.5 + 1e-9);
                    assert!((px.s as f64 - s * 255.0).abs() <= 0.5 + 1e-9, "{r} {g} {b}");
                    let dh = (px.h as f64 - h).abs();
                    assert!(dh <= 0.5 + 1e-9 || (360.0 - dh) <= 0.5 + 1e-9, "{r} {g} {b}");
                }
            }
        }
    }

    #[test]
    fn achromatic_iff_zero_saturation() {
        for v in 0..=255u8 {
            assert_eq!(rgb_to_hls(v, v, v).s, 0);
        }
        assert_ne!(rgb_to_hls(10, 10, 11).s, 0);
        assert_ne!(rgb_to_hls(254, 255, 255).s, 0);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(vec![0u8; 25], 9).unwrap();
        assert_eq!(h[0], 1.0);
        assert!(h[1..].iter().all(|&v| v == 0.0));
        assert_eq!(histogram([0u8, 255], 2).unwrap(), vec![0.5, 0.5]);
        // edges 0-63, 64-127, 128-191, 192-255: 200 and 255 share the last bin
        assert_eq!(histogram([0u8, 100, 200, 255], 4).unwrap(), vec![0.25, 0.25, 0.0, 0.5]);
        assert_eq!(histogram([0u8, 100, 150, 255], 4).unwrap(), vec![0.25; 4]);
        // bin edges of the 4-bin layout
        assert_eq!(histogram([63u8], 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(histogram([64u8], 4).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(histogram([191u8], 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(histogram([192u8], 4).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(histogram(Vec::<u8>::new(), 4).is_err());
        assert!(histogram([1u8], 0).is_err());
        assert!(histogram_levels([360u32], 4, 360).is_err());
    }
}
