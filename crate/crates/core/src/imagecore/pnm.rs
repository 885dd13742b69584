//! Netpbm grey (P2/P5) and colour (P3/P6) maps with maxval up to 255.
//!
//! Headers may carry `#` comments on read. Writes are always binary with a
//! comment-free header and maxval 255.

use std::fs;
use std::path::Path;

use super::{intensity, ColorImage, GreyImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    GreyAscii,
    GreyBinary,
    ColorAscii,
    ColorBinary,
}

impl Kind {
    fn channels(self) -> usize {
        match self {
            Kind::GreyAscii | Kind::GreyBinary => 1,
            Kind::ColorAscii | Kind::ColorBinary => 3,
        }
    }

    fn is_binary(self) -> bool {
        matches!(self, Kind::GreyBinary | Kind::ColorBinary)
    }
}

struct Header {
    kind: Kind,
    width: usize,
    height: usize,
    maxval: u32,
    /// Offset of the first payload byte.
    offset: usize,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            let c = self.buf[self.pos];
            if c == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

fn parse_header(buf: &[u8]) -> Result<Header> {
    if buf.len() < 2 {
        return Err(Error::MalformedHeader("file too short for a magic number".into()));
    }
    let kind = match &buf[..2] {
        b"P2" => Kind::GreyAscii,
        b"P5" => Kind::GreyBinary,
        b"P3" => Kind::ColorAscii,
        b"P6" => Kind::ColorBinary,
        other => return Err(Error::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { buf, pos: 2 };
    if cur.pos < buf.len() && !buf[cur.pos].is_ascii_whitespace() && buf[cur.pos] != b'#' {
        return Err(Error::MalformedHeader("magic number not followed by whitespace".into()));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("degenerate size {width}x{height}")));
    }
    if kind.is_binary() {
        match buf.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => {
                return Err(Error::MalformedHeader("maxval not followed by whitespace".into()))
            }
            None => {}
        }
    }
    Ok(Header { kind, width, height, maxval, offset: cur.pos })
}

fn payload(buf: &[u8], header: &Header) -> Result<Vec<u8>> {
    let expected = header.width * header.height * header.kind.channels();
    let samples: Vec<u8> = if header.kind.is_binary() {
        let body = &buf[header.offset.min(buf.len())..];
        if body.len() < expected {
            return Err(Error::TruncatedPayload { expected, found: body.len() });
        }
        body[..expected].to_vec()
    } else {
        let mut cur = Cursor { buf, pos: header.offset };
        let mut out = Vec::with_capacity(expected);
        for _ in 0..expected {
            cur.skip_space_and_comments();
            if cur.pos >= buf.len() {
                return Err(Error::TruncatedPayload { expected, found: out.len() });
            }
            let v = cur.number("sample").map_err(|_| {
                Error::InvalidImage(format!("non-numeric ASCII sample after {} values", out.len()))
            })?;
            if v > 255 {
                return Err(Error::InvalidImage(format!("sample {v} exceeds maxval")));
            }
            out.push(v as u8);
        }
        out
    };
    if let Some(&v) = samples.iter().find(|&&v| u32::from(v) > header.maxval) {
        return Err(Error::InvalidImage(format!(
            "sample {v} exceeds maxval {}",
            header.maxval
        )));
    }
    Ok(samples)
}

/// Decodes an in-memory P2/P5 file.
pub fn decode_pgm(buf: &[u8]) -> Result<GreyImage> {
    let header = parse_header(buf)?;
    if header.kind.channels() != 1 {
        return Err(Error::BadMagic(String::from_utf8_lossy(&buf[..2]).into_owned()));
    }
    let data = payload(buf, &header)?;
    GreyImage::new(header.width, header.height, data)
}

/// Decodes an in-memory P3/P6 file.
pub fn decode_ppm(buf: &[u8]) -> Result<ColorImage> {
    let header = parse_header(buf)?;
    if header.kind.channels() != 3 {
        return Err(Error::BadMagic(String::from_utf8_lossy(&buf[..2]).into_owned()));
    }
    let data = payload(buf, &header)?;
    ColorImage::from_interleaved(header.width, header.height, &data)
}

pub fn encode_pgm(img: &GreyImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.interleaved());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GreyImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ColorImage> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_pgm(img: &GreyImage, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_pgm(img))?)
}

pub fn write_ppm(img: &ColorImage, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, encode_ppm(img))?)
}

/// Reads a grey map directly, or a colour map reduced to its intensity image.
pub fn read_any_grey(path: impl AsRef<Path>) -> Result<GreyImage> {
    let buf = fs::read(path)?;
    match buf.get(..2) {
        Some(b"P3") | Some(b"P6") => Ok(intensity(&decode_ppm(&buf)?)),
        _ => decode_pgm(&buf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_binary_grey() {
        let mut file = b"P5\n2 2\n255\n".to_vec();
        file.extend([0, 128, 255, 7]);
        let img = decode_pgm(&file).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 128, 255, 7]);
        assert_eq!(encode_pgm(&img), file);
    }

    #[test]
    fn decodes_binary_colour() {
        let mut file = b"P6 1 1 255\n".to_vec();
        file.extend([10, 20, 30]);
        let img = decode_ppm(&file).unwrap();
        assert_eq!(img.pixel(0, 0), (10, 20, 30));
    }

    #[test]
    fn comments_and_ascii() {
        let file = b"P2\n# a comment\n3 1 # trailing\n255\n1 2\n# mid\n3\n";
        let img = decode_pgm(file).unwrap();
        assert_eq!(img.data(), &[1, 2, 3]);
        let file = b"P3 1 2 255 1 2 3 4 5 6";
        let img = decode_ppm(file).unwrap();
        assert_eq!(img.pixel(0, 1), (4, 5, 6));
    }

    #[test]
    fn distinct_errors() {
        let mut wide = b"P5\n2 2\n65535\n".to_vec();
        wide.extend([0; 8]);
        assert!(matches!(decode_pgm(&wide), Err(Error::UnsupportedMaxval(65535))));

        let short = b"P5\n2 2\n255\n\x01\x02";
        assert!(matches!(
            decode_pgm(short),
            Err(Error::TruncatedPayload { expected: 4, found: 2 })
        ));

        assert!(matches!(decode_pgm(b"P5\n2 x\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P4\n1 1\n"), Err(Error::BadMagic(_))));
        assert!(matches!(decode_pgm(b"P6\n1 1\n255\nabc"), Err(Error::BadMagic(_))));
        assert!(matches!(decode_pgm(b"P2 2 1 255 4"), Err(Error::TruncatedPayload { .. })));
    }

    #[test]
    fn small_maxval_keeps_raw_samples() {
        let img = decode_pgm(b"P2 2 1 15 3 15").unwrap();
        assert_eq!(img.data(), &[3, 15]);
        assert!(decode_pgm(b"P2 1 1 15 16").is_err());
    }
}
