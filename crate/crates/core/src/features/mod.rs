//! Feature recipes: ordered lists of extractors turning a colour image into a
//! fixed-length feature vector.
//!
//! Two recipes are built in. `rgb27` holds 9-bin histograms of the red, green
//! and blue channels. `lot117` holds HLS histograms (hue 32 bins, luminance
//! 32, saturation 28) followed by the hexagonal opening granulometry at sizes
//! 1 to 25. The per-block bin counts of `lot117` are a reconstruction: only
//! the totals of both layouts are fixed.
//!
//! Feature indices are 1-based wherever they are shown to a user.

mod dataset;

pub use dataset::{
    format_value, load_dataset, read_dataset, save_dataset, split, write_dataset, Dataset, MinMaxScaler, Sample,
    SplitResult,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::granulometry::{granulometry_closings, granulometry_openings};
use crate::imagecore::{histogram, histogram_levels, intensity, to_hls, ColorImage, HlsImage};
use crate::morphology::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Red,
    Green,
    Blue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HlsComponent {
    Hue,
    Luminance,
    Saturation,
}

/// One block of consecutive features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extractor {
    ChannelHistogram { channel: Channel, bins: usize },
    HlsHistogram { component: HlsComponent, bins: usize },
    OpeningGranulometry { family: Family, r_min: usize, r_max: usize },
    ClosingGranulometry { family: Family, r_min: usize, r_max: usize },
}

impl Extractor {
    pub fn len(&self) -> usize {
        match *self {
            Extractor::ChannelHistogram { bins, .. } | Extractor::HlsHistogram { bins, .. } => bins,
            Extractor::OpeningGranulometry { r_min, r_max, .. }
            | Extractor::ClosingGranulometry { r_min, r_max, .. } => r_max + 1 - r_min,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Extractor::ChannelHistogram { bins, .. } | Extractor::HlsHistogram { bins, .. } => {
                if bins == 0 {
                    return Err(Error::Config("histogram extractor with zero bins".into()));
                }
            }
            Extractor::OpeningGranulometry { r_min, r_max, .. }
            | Extractor::ClosingGranulometry { r_min, r_max, .. } => {
                if r_min > r_max {
                    return Err(Error::Config(format!("empty size range {r_min}-{r_max}")));
                }
            }
        }
        Ok(())
    }

    /// Human-readable name of the feature at `offset` within this block.
    pub fn describe(&self, offset: usize) -> String {
        match *self {
            Extractor::ChannelHistogram { channel, .. } => {
                let c = match channel {
                    Channel::Red => 'r',
                    Channel::Green => 'g',
                    Channel::Blue => 'b',
                };
                format!("hist:{c}[{offset}]")
            }
            Extractor::HlsHistogram { component, .. } => {
                let c = match component {
                    HlsComponent::Hue => 'h',
                    HlsComponent::Luminance => 'l',
                    HlsComponent::Saturation => 's',
                };
                format!("hist:{c}[{offset}]")
            }
            Extractor::OpeningGranulometry { family, r_min, .. } => {
                format!("open:{family}:r={}", r_min + offset)
            }
            Extractor::ClosingGranulometry { family, r_min, .. } => {
                format!("close:{family}:r={}", r_min + offset)
            }
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Extractor::ChannelHistogram { channel, bins } => {
                let c = match channel {
                    Channel::Red => 'r',
                    Channel::Green => 'g',
                    Channel::Blue => 'b',
                };
                write!(f, "hist:{c}:{bins}")
            }
            Extractor::HlsHistogram { component, bins } => {
                let c = match component {
                    HlsComponent::Hue => 'h',
                    HlsComponent::Luminance => 'l',
                    HlsComponent::Saturation => 's',
                };
                write!(f, "hist:{c}:{bins}")
            }
            Extractor::OpeningGranulometry { family, r_min, r_max } => {
                write!(f, "open:{family}:{r_min}-{r_max}")
            }
            Extractor::ClosingGranulometry { family, r_min, r_max } => {
                write!(f, "close:{family}:{r_min}-{r_max}")
            }
        }
    }
}

/// Parses `hist:<r|g|b|h|l|s>:<bins>` or `<open|close>:<family>:<rmin>-<rmax>`.
impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed extractor {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let ex = match parts[0] {
            "hist" => {
                let bins: usize = parts[2].parse().map_err(|_| bad())?;
                match parts[1] {
                    "r" => Extractor::ChannelHistogram { channel: Channel::Red, bins },
                    "g" => Extractor::ChannelHistogram { channel: Channel::Green, bins },
                    "b" => Extractor::ChannelHistogram { channel: Channel::Blue, bins },
                    "h" => Extractor::HlsHistogram { component: HlsComponent::Hue, bins },
                    "l" => Extractor::HlsHistogram { component: HlsComponent::Luminance, bins },
                    "s" => Extractor::HlsHistogram { component: HlsComponent::Saturation, bins },
                    _ => return Err(bad()),
                }
            }
            kind @ ("open" | "close") => {
                let family: Family = parts[1].parse().map_err(|_| bad())?;
                let (lo, hi) = parts[2].split_once('-').ok_or_else(bad)?;
                let r_min = lo.parse().map_err(|_| bad())?;
                let r_max = hi.parse().map_err(|_| bad())?;
                if kind == "open" {
                    Extractor::OpeningGranulometry { family, r_min, r_max }
                } else {
                    Extractor::ClosingGranulometry { family, r_min, r_max }
                }
            }
            _ => return Err(bad()),
        };
        ex.validate()?;
        Ok(ex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRecipe {
    pub name: String,
    pub extractors: Vec<Extractor>,
}

impl FeatureRecipe {
    pub fn new(name: impl Into<String>, extractors: Vec<Extractor>) -> Result<Self> {
        if extractors.is_empty() {
            return Err(Error::Config("recipe without extractors".into()));
        }
        for ex in &extractors {
            ex.validate()?;
        }
        Ok(Self { name: name.into(), extractors })
    }

    pub fn rgb27() -> Self {
        let hist = |channel| Extractor::ChannelHistogram { channel, bins: 9 };
        Self {
            name: "rgb27".into(),
            extractors: vec![hist(Channel::Red), hist(Channel::Green), hist(Channel::Blue)],
        }
    }

    pub fn lot117() -> Self {
        let hist = |component, bins| Extractor::HlsHistogram { component, bins };
        Self {
            name: "lot117".into(),
            extractors: vec![
                hist(HlsComponent::Hue, 32),
                hist(HlsComponent::Luminance, 32),
                hist(HlsComponent::Saturation, 28),
                Extractor::OpeningGranulometry { family: Family::Hexagon, r_min: 1, r_max: 25 },
            ],
        }
    }

    pub fn total_features(&self) -> usize {
        self.extractors.iter().map(Extractor::len).sum()
    }

    /// Maps a 1-based feature index to its extractor and offset within it.
    pub fn locate(&self, index: usize) -> Option<(&Extractor, usize)> {
        let mut i = index.checked_sub(1)?;
        for ex in &self.extractors {
            if i < ex.len() {
                return Some((ex, i));
            }
            i -= ex.len();
        }
        None
    }

    /// Descriptive names of every feature, in vector order.
    pub fn describe_all(&self) -> Vec<String> {
        self.extractors
            .iter()
            .flat_map(|ex| (0..ex.len()).map(move |i| ex.describe(i)))
            .collect()
    }

    /// Runs every extractor on `img` and concatenates the outputs.
    pub fn extract(&self, img: &ColorImage) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.total_features());
        let mut hls: Option<HlsImage> = None;
        let mut grey = None;
        for ex in &self.extractors {
            match *ex {
                Extractor::ChannelHistogram { channel, bins } => {
                    let plane = match channel {
                        Channel::Red => img.red(),
                        Channel::Green => img.green(),
                        Channel::Blue => img.blue(),
                    };
                    out.extend(histogram(plane.iter().copied(), bins)?);
                }
                Extractor::HlsHistogram { component, bins } => {
                    let hls = hls.get_or_insert_with(|| to_hls(img));
                    let h = match component {
                        HlsComponent::Hue => histogram_levels(hls.hue(), bins, 360)?,
                        HlsComponent::Luminance => histogram_levels(hls.luminance(), bins, 256)?,
                        HlsComponent::Saturation => histogram_levels(hls.saturation(), bins, 256)?,
                    };
                    out.extend(h);
                }
                Extractor::OpeningGranulometry { family, r_min, r_max } => {
                    let grey = grey.get_or_insert_with(|| intensity(img));
                    let curve = granulometry_openings(grey, family, r_max)?;
                    out.extend_from_slice(&curve.values[r_min..=r_max]);
                }
                Extractor::ClosingGranulometry { family, r_min, r_max } => {
                    let grey = grey.get_or_insert_with(|| intensity(img));
                    let curve = granulometry_closings(grey, family, r_max)?;
                    out.extend_from_slice(&curve.values[r_min..=r_max]);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FeatureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.extractors.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// A built-in recipe by name.
pub fn builtin_recipe(name: &str) -> Result<FeatureRecipe> {
    match name {
        "rgb27" => Ok(FeatureRecipe::rgb27()),
        "lot117" => Ok(FeatureRecipe::lot117()),
        other => Err(Error::Config(format!("unknown recipe {other:?}"))),
    }
}

/// A built-in recipe name, or a comma-separated list of extractors.
pub fn parse_recipe(spec: &str) -> Result<FeatureRecipe> {
    if let Ok(r) = builtin_recipe(spec) {
        return Ok(r);
    }
    let extractors = spec
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<Extractor>>>()?;
    FeatureRecipe::new("custom", extractors)
}

/// Extracts every image into a dataset whose rows are ordered by sample id.
///
/// Images are processed in parallel; the output does not depend on the
/// thread count or on the input order.
pub fn extract_batch(recipe: &FeatureRecipe, images: &[(String, String, ColorImage)]) -> Result<Dataset> {
    let rows = images
        .par_iter()
        .map(|(id, _, img)| {
            recipe
                .extract(img)
                .map_err(|e| Error::InvalidImage(format!("{id}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by(|&a, &b| images[a].0.cmp(&images[b].0));
    let mut ds = Dataset::with_features(recipe.name.clone(), recipe.total_features());
    for i in order {
        ds.push(images[i].0.clone(), images[i].1.clone(), rows[i].clone())?;
    }
    Ok(ds)
}
