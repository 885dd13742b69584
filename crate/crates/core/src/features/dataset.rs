use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: String,
    pub features: Vec<f64>,
}

/// A labelled feature matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub recipe: String,
    pub feature_names: Vec<String>,
    pub samples: Vec<Sample>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Column names `f0001, f0002, ...`, widened past 9999 features.
pub fn default_feature_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(4);
    (1..=n).map(|i| format!("f{i:0width$}")).collect()
}

impl Dataset {
    pub fn new(recipe: impl Into<String>, feature_names: Vec<String>) -> Self {
        Self { recipe: recipe.into(), feature_names, samples: Vec::new() }
    }

    pub fn with_features(recipe: impl Into<String>, n: usize) -> Self {
        Self::new(recipe, default_feature_names(n))
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, label: impl Into<String>, features: Vec<f64>) -> Result<()> {
        let (id, label) = (id.into(), label.into());
        if !valid_token(&id) || !valid_token(&label) {
            return Err(Error::InvalidInput(format!(
                "ids and labels must match [A-Za-z0-9_-]+, got {id:?}/{label:?}"
            )));
        }
        if features.len() != self.feature_count() {
            return Err(Error::DimensionMismatch { expected: self.feature_count(), found: features.len() });
        }
        if self.samples.iter().any(|s| s.id == id) {
            return Err(Error::DuplicateId(id));
        }
        self.samples.push(Sample { id, label, features });
        Ok(())
    }

    /// Distinct labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.samples.iter().map(|s| s.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Checks the invariants a loaded or hand-built dataset must satisfy.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.samples {
            if s.features.len() != self.feature_count() {
                return Err(Error::DimensionMismatch { expected: self.feature_count(), found: s.features.len() });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(())
    }

    /// A dataset of the same layout holding the given rows.
    pub fn subset(&self, rows: impl IntoIterator<Item = usize>) -> Dataset {
        Dataset {
            recipe: self.recipe.clone(),
            feature_names: self.feature_names.clone(),
            samples: rows.into_iter().map(|i| self.samples[i].clone()).collect(),
        }
    }

    /// Keeps only the given 0-based feature columns.
    pub fn select_features(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.feature_count()) {
            return Err(Error::InvalidInput(format!("feature {} out of range", c + 1)));
        }
        Ok(Dataset {
            recipe: self.recipe.clone(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    id: s.id.clone(),
                    label: s.label.clone(),
                    features: columns.iter().map(|&c| s.features[c]).collect(),
                })
                .collect(),
        })
    }
}

/// `v` rounded to 12 significant digits, printed in its shortest form.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub fn write_dataset(ds: &Dataset, out: impl Write) -> Result<()> {
    ds.validate()?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["sample_id".to_owned(), "label".to_owned()];
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header)?;
    for s in &ds.samples {
        let mut row = vec![s.id.clone(), s.label.clone()];
        row.extend(s.features.iter().map(|&v| format_value(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(input: impl Read, recipe: impl Into<String>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::Csv("missing header".into())),
    };
    if header.get(0) != Some("sample_id") || header.get(1) != Some("label") {
        return Err(Error::Csv("header must start with sample_id,label".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let width = header.len();
    let mut ds = Dataset::new(recipe, names);
    let mut seen = HashSet::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(Error::RaggedRow { line, expected: width, found: rec.len() });
        }
        let id = rec[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let features = rec
            .iter()
            .enumerate()
            .skip(2)
            .map(|(c, v)| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::NonNumeric { line, column: c + 1, value: v.to_owned() })
            })
            .collect::<Result<Vec<f64>>>()?;
        ds.samples.push(Sample { id, label: rec[1].to_owned(), features });
    }
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, File::create(path)?)
}

/// Loads a dataset; the recipe name is taken from the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_owned();
    read_dataset(File::open(path)?, stem)
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    /// False when some class was too small and rows were drawn globally.
    pub stratified: bool,
}

/// Per-class test quotas by largest remainder, every class keeping at least
/// one training sample (and one test sample when there are enough to go round).
fn allocate(counts: &[usize], n_test: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let floor_min = usize::from(n_test >= counts.len());
    let quota: Vec<f64> = counts.iter().map(|&c| (c * n_test) as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = counts
        .iter()
        .zip(&quota)
        .map(|(&c, &q)| (q.floor() as usize).clamp(floor_min, c - 1))
        .collect();
    let mut assigned: usize = alloc.iter().sum();
    while assigned < n_test {
        let pick = (0..counts.len())
            .filter(|&i| alloc[i] < counts[i] - 1)
            .max_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .total_cmp(&(quota[b] - alloc[b] as f64))
                    .then(b.cmp(&a))
            });
        match pick {
            Some(i) => alloc[i] += 1,
            None => break,
        }
        assigned += 1;
    }
    while assigned > n_test {
        let pick = (0..counts.len())
            .filter(|&i| alloc[i] > floor_min)
            .min_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .total_cmp(&(quota[b] - alloc[b] as f64))
                    .then(b.cmp(&a))
            });
        match pick {
            Some(i) => alloc[i] -= 1,
            None => break,
        }
        assigned -= 1;
    }
    alloc
}

/// Seeded train/test partition, stratified by label when every class has at
/// least two samples. The result depends only on the set of rows and the
/// seed, not on their order.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if ds.len() < 2 {
        return Err(Error::InvalidInput("cannot split fewer than two samples".into()));
    }
    let n_test = ((ds.len() as f64 * test_fraction).round() as usize).clamp(1, ds.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples.iter().enumerate() {
        by_class.entry(s.label.as_str()).or_default().push(i);
    }
    for rows in by_class.values_mut() {
        rows.sort_by(|&a, &b| ds.samples[a].id.cmp(&ds.samples[b].id));
    }

    let stratified = by_class.values().all(|rows| rows.len() >= 2);
    let mut is_test = vec![false; ds.len()];
    if stratified {
        let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
        let alloc = allocate(&counts, n_test);
        for (rows, take) in by_class.values_mut().zip(alloc) {
            rows.shuffle(&mut rng);
            for &i in &rows[..take] {
                is_test[i] = true;
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..ds.len()).collect();
        rows.sort_by(|&a, &b| ds.samples[a].id.cmp(&ds.samples[b].id));
        rows.shuffle(&mut rng);
        for &i in &rows[..n_test] {
            is_test[i] = true;
        }
    }
    let train = ds.subset((0..ds.len()).filter(|&i| !is_test[i]));
    let test = ds.subset((0..ds.len()).filter(|&i| is_test[i]));
    Ok(SplitResult { train, test, stratified })
}

/// Per-feature min-max scaling fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::InvalidInput("cannot fit a scaler on an empty dataset".into()));
        }
        let n = ds.feature_count();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for s in &ds.samples {
            for (j, &v) in s.features.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Maps each feature to `(v - min) / (max - min)`; constant features map to 0.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.feature_count() != self.min.len() {
            return Err(Error::DimensionMismatch { expected: self.min.len(), found: ds.feature_count() });
        }
        let mut out = ds.clone();
        for s in &mut out.samples {
            for (j, v) in s.features.iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 { (*v - self.min[j]) / span } else { 0.0 };
            }
        }
        Ok(out)
    }
}
