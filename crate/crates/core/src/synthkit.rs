//! Synthetic granite-like textures from a Boolean disc model.
//!
//! Discs are dropped at Poisson-many uniform positions on a flat background;
//! a later disc paints over earlier ones. Each class tints the grey result
//! per channel. Every image is a pure function of the corpus seed and its
//! position in the corpus, so generation order does not matter.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ini::Ini;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::imagecore::{write_ppm, ColorImage, GreyImage};

#[derive(Debug, Clone, PartialEq)]
pub struct TextureSpec {
    pub label: String,
    /// Inclusive integer radius range.
    pub radius: (u32, u32),
    pub intensity_mean: f64,
    /// Grain intensities are uniform on `mean +- spread`.
    pub intensity_spread: f64,
    pub background: u8,
    /// Expected grains per 1000 square pixels.
    pub density: f64,
    pub tint: [f64; 3],
    /// Number of images of this class in a corpus.
    pub samples: usize,
}

impl TextureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("class {}: {m}", self.label)));
        if self.label.is_empty() || !self.label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return bad("labels may only use letters, digits and '_'".into());
        }
        if self.radius.0 < 1 || self.radius.0 > self.radius.1 {
            return bad(format!("radius range {}-{} is invalid", self.radius.0, self.radius.1));
        }
        if !(0.0..=255.0).contains(&self.intensity_mean) || !(self.intensity_spread >= 0.0) {
            return bad("grain intensity must have a mean in [0, 255] and a non-negative spread".into());
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density {} must be positive", self.density));
        }
        if self.tint.iter().any(|t| !(0.5..=1.5).contains(t)) {
            return bad(format!("tint {:?} outside [0.5, 1.5]", self.tint));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub name: String,
    pub classes: Vec<TextureSpec>,
    pub image_size: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Config("a corpus needs at least 2 classes".into()));
        }
        if self.image_size < 32 {
            return Err(Error::Config(format!("image size {} is below 32", self.image_size)));
        }
        for (i, c) in self.classes.iter().enumerate() {
            c.validate()?;
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::Config(format!("class {} is listed twice", c.label)));
            }
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.classes.iter().map(|c| c.samples).sum()
    }

    /// Parses the `key = value` format: a `[corpus]` section, then one section per class.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("corpus spec: {e}")))?;
        let corpus = ini
            .section(Some("corpus"))
            .ok_or_else(|| Error::Config("corpus spec lacks a [corpus] section".into()))?;
        let get = |sec: &ini::Properties, sname: &str, key: &str| -> Result<String> {
            sec.get(key)
                .map(str::to_owned)
                .ok_or_else(|| Error::Config(format!("[{sname}] is missing `{key}`")))
        };
        fn num<T: std::str::FromStr>(v: String, sname: &str, key: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("[{sname}] {key} = {v:?} is not a valid number")))
        }
        let default_samples: Option<usize> = match corpus.get("samples_per_class") {
            Some(v) => Some(num(v.to_owned(), "corpus", "samples_per_class")?),
            None => None,
        };
        let mut classes = Vec::new();
        for (name, sec) in ini.iter() {
            let Some(name) = name else { continue };
            if name == "corpus" {
                continue;
            }
            let tint: Vec<f64> = get(sec, name, "tint")?
                .split_whitespace()
                .map(|t| num(t.to_owned(), name, "tint"))
                .collect::<Result<_>>()?;
            let tint: [f64; 3] = tint
                .try_into()
                .map_err(|_| Error::Config(format!("[{name}] tint needs three values")))?;
            let samples = match sec.get("samples") {
                Some(v) => num(v.to_owned(), name, "samples")?,
                None => default_samples
                    .ok_or_else(|| Error::Config(format!("[{name}] has no sample count")))?,
            };
            classes.push(TextureSpec {
                label: name.to_owned(),
                radius: (
                    num(get(sec, name, "radius_min")?, name, "radius_min")?,
                    num(get(sec, name, "radius_max")?, name, "radius_max")?,
                ),
                intensity_mean: num(get(sec, name, "intensity_mean")?, name, "intensity_mean")?,
                intensity_spread: num(get(sec, name, "intensity_spread")?, name, "intensity_spread")?,
                background: num(get(sec, name, "background")?, name, "background")?,
                density: num(get(sec, name, "density")?, name, "density")?,
                tint,
                samples,
            });
        }
        let spec = CorpusSpec {
            name: corpus.get("name").unwrap_or("corpus").to_owned(),
            classes,
            image_size: num(get(corpus, "corpus", "image_size")?, "corpus", "image_size")?,
            seed: num(get(corpus, "corpus", "seed")?, "corpus", "seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_ini_str(&text)
    }

    pub fn to_ini_string(&self) -> String {
        let mut s = format!(
            "[corpus]\nname = {}\nimage_size = {}\nseed = {}\n",
            self.name, self.image_size, self.seed
        );
        for c in &self.classes {
            s.push_str(&format!(
                "\n[{}]\nsamples = {}\nradius_min = {}\nradius_max = {}\nintensity_mean = {}\nintensity_spread = {}\nbackground = {}\ndensity = {}\ntint = {} {} {}\n",
                c.label,
                c.samples,
                c.radius.0,
                c.radius.1,
                c.intensity_mean,
                c.intensity_spread,
                c.background,
                c.density,
                c.tint[0],
                c.tint[1],
                c.tint[2]
            ));
        }
        s
    }

    /// The frozen 14-class benchmark corpus (237 images).
    pub fn granite14() -> Self {
        Self::from_ini_str(GRANITE14).expect("built-in corpus spec is valid")
    }
}

/// Text of the built-in benchmark spec, also shipped as `configs/granite14.cfg`.
pub const GRANITE14: &str = include_str!("../../../configs/granite14.cfg");

/// Grey disc field for one image.
pub fn generate_grey(spec: &TextureSpec, size: usize, rng: &mut ChaCha8Rng) -> GreyImage {
    let mut img = GreyImage::filled(size, size, spec.background);
    let lambda = spec.density * (size * size) as f64 / 1000.0;
    let count = Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0);
    for _ in 0..count {
        let cx = rng.random_range(0..size) as i64;
        let cy = rng.random_range(0..size) as i64;
        let r = rng.random_range(spec.radius.0..=spec.radius.1) as i64;
        let v = spec.intensity_mean + spec.intensity_spread * rng.random_range(-1.0..=1.0);
        let v = v.round().clamp(0.0, 255.0) as u8;
        for y in (cy - r).max(0)..=(cy + r).min(size as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(size as i64 - 1) {
                let (dx, dy) = (x - cx, y - cy);
                // r*r + r gives rounder small discs than a strict r*r cut
                if dx * dx + dy * dy <= r * r + r {
                    img.set(x as usize, y as usize, v);
                }
            }
        }
    }
    img
}

pub fn tint(grey: &GreyImage, tint: [f64; 3]) -> ColorImage {
    let channel = |t: f64| grey.data().iter().map(|&v| (v as f64 * t).round().clamp(0.0, 255.0) as u8).collect();
    ColorImage::new(grey.width(), grey.height(), channel(tint[0]), channel(tint[1]), channel(tint[2]))
        .expect("planes match the grey image")
}

/// One textured image, fully determined by `seed`.
pub fn generate_texture(spec: &TextureSpec, size: usize, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tint(&generate_grey(spec, size, &mut rng), spec.tint)
}

/// Seed of the `index`-th image of a corpus: the corpus seed with the
/// index mixed in by a SplitMix64 finaliser.
pub fn image_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub label: String,
    /// Relative to the manifest's directory unless absolute.
    pub path: PathBuf,
}

/// `(id, class index, global index)` for every image, in corpus order.
fn layout(spec: &CorpusSpec) -> Vec<(String, usize, u64)> {
    let mut out = Vec::new();
    let mut global = 0u64;
    for (ci, c) in spec.classes.iter().enumerate() {
        for i in 1..=c.samples {
            out.push((format!("{}-{i}", c.label), ci, global));
            global += 1;
        }
    }
    out
}

/// Every image of the corpus in memory, in corpus order.
pub fn generate_images(spec: &CorpusSpec) -> Result<Vec<(String, String, ColorImage)>> {
    spec.validate()?;
    Ok(layout(spec)
        .into_par_iter()
        .map(|(id, ci, g)| {
            let c = &spec.classes[ci];
            let img = generate_texture(c, spec.image_size, image_seed(spec.seed, g));
            (id, c.label.clone(), img)
        })
        .collect())
}

/// Writes `<id>.ppm` files and `manifest.csv` into `out_dir`. The manifest
/// holds paths relative to `out_dir`; the returned entries are joined onto it.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let entries = layout(spec)
        .into_par_iter()
        .map(|(id, ci, g)| {
            let c = &spec.classes[ci];
            let img = generate_texture(c, spec.image_size, image_seed(spec.seed, g));
            let file = PathBuf::from(format!("{id}.ppm"));
            write_ppm(&img, out_dir.join(&file))?;
            Ok(ManifestEntry { id, label: c.label.clone(), path: file })
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&entries, File::create(out_dir.join("manifest.csv"))?)?;
    Ok(entries
        .into_iter()
        .map(|mut e| {
            e.path = out_dir.join(&e.path);
            e
        })
        .collect())
}

pub fn write_manifest(entries: &[ManifestEntry], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["sample_id", "label", "path"])?;
    for e in entries {
        w.write_record([e.id.as_str(), e.label.as_str(), &e.path.to_string_lossy()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(input: impl Read) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != ["sample_id", "label", "path"] {
        return Err(Error::Csv("manifest header must be sample_id,label,path".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ManifestEntry { id: rec[0].to_owned(), label: rec[1].to_owned(), path: PathBuf::from(&rec[2]) })
        })
        .collect()
}

/// Reads a manifest and resolves relative image paths against its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(read_manifest(File::open(path)?)?
        .into_iter()
        .map(|mut e| {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            e
        })
        .collect())
}

/// A labelled feature table where only the first `informative` features
/// depend on the class; the rest are uniform noise on the same scale.
pub fn informative_dataset(
    classes: usize,
    per_class: usize,
    n_features: usize,
    informative: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<Dataset> {
    if classes < 2 || per_class == 0 || informative > n_features || n_features == 0 {
        return Err(Error::Config("invalid informative-dataset shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // class centres on a lattice over [0, 2]^informative with the smallest
    // base that gives every class its own vertex
    let mut base = 2usize;
    while base.checked_pow(informative as u32).is_some_and(|n| n < classes) {
        base += 1;
    }
    if informative == 0 || base.checked_pow(informative as u32).is_none_or(|n| n < classes) {
        return Err(Error::Config("too few informative features for the class count".into()));
    }
    let step = 2.0 / (base - 1) as f64;
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let mut k = c;
            (0..informative)
                .map(|_| {
                    let d = k % base;
                    k /= base;
                    d as f64 * step
                })
                .collect()
        })
        .collect();
    let mut ds = Dataset::with_features("informative", n_features);
    for i in 0..per_class {
        for (c, centre) in centres.iter().enumerate() {
            let mut v: Vec<f64> = centre.iter().map(|m| m + rng.random_range(-0.2 * step..0.2 * step)).collect();
            v.extend((informative..n_features).map(|_| rng.random_range(0.0..2.0)));
            ds.push(format!("{id_prefix}{c:02}-{i:03}"), format!("k{c:02}"), v)?;
        }
    }
    Ok(ds)
}
