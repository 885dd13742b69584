//! Nearest-neighbour rules over Euclidean distance restricted to a feature mask.
//!
//! Neighbours are ranked by squared distance, equal distances by sample id.
//! The k-NN vote is a plurality; when several classes tie, the class of the
//! nearest neighbour among the tied classes wins. The template rule compares
//! the query with per-class mean vectors and breaks ties by the smaller label.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::Dataset;

/// Which features take part in a distance. Bit `n` (0-based) enables feature `n + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureMask(Vec<bool>);

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn all(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn none(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// A mask with the given 1-based features switched on.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in indices {
            if i == 0 || i > n {
                return Err(Error::InvalidInput(format!("feature index {i} outside 1..={n}")));
            }
            bits[i - 1] = true;
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    /// 0-based positions of the set bits.
    pub fn positions(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    /// 1-based, ascending feature numbers of the set bits.
    pub fn selected(&self) -> Vec<usize> {
        self.positions().into_iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("mask character {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(FeatureMask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnConfig {
    pub k: usize,
}

impl KnnConfig {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(Self { k })
    }
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub id: String,
    pub label: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Nearest first.
    pub neighbours: Vec<Neighbour>,
}

fn check_mask(len: usize, mask: &FeatureMask) -> Result<()> {
    if mask.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: mask.len() });
    }
    if !mask.any() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

#[inline]
fn squared_masked(x: &[f64], m: &[f64], mask: &[bool]) -> f64 {
    x.iter()
        .zip(m)
        .zip(mask)
        .filter(|(_, &on)| on)
        .map(|((a, b), _)| (a - b) * (a - b))
        .sum()
}

/// Euclidean distance over the masked coordinates.
pub fn distance(x: &[f64], m: &[f64], mask: &FeatureMask) -> Result<f64> {
    if x.len() != m.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: m.len() });
    }
    check_mask(x.len(), mask)?;
    Ok(squared_masked(x, m, mask.bits()).sqrt())
}

/// Plurality vote over labels given nearest first; ties go to the tied class
/// that appears first.
pub fn vote<'a>(labels: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let labels: Vec<&str> = labels.into_iter().collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = counts.values().copied().max()?;
    labels.into_iter().find(|l| counts[l] == top)
}

/// k-NN by a full scan of the training set.
pub fn classify_knn(train: &Dataset, query: &[f64], cfg: KnnConfig, mask: &FeatureMask) -> Result<Prediction> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if cfg.k == 0 || cfg.k > train.len() {
        return Err(Error::Config(format!("k = {} with {} training samples", cfg.k, train.len())));
    }
    if query.len() != train.feature_count() {
        return Err(Error::DimensionMismatch { expected: train.feature_count(), found: query.len() });
    }
    check_mask(query.len(), mask)?;
    let mut scored: Vec<(f64, usize)> = train
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| (squared_masked(query, &s.features, mask.bits()), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.total_cmp(&b.0).then_with(|| train.samples[a.1].id.cmp(&train.samples[b.1].id))
    };
    if cfg.k < scored.len() {
        scored.select_nth_unstable_by(cfg.k - 1, order);
        scored.truncate(cfg.k);
    }
    scored.sort_by(order);
    let neighbours: Vec<Neighbour> = scored
        .iter()
        .map(|&(d2, i)| Neighbour {
            id: train.samples[i].id.clone(),
            label: train.samples[i].label.clone(),
            distance: d2.sqrt(),
        })
        .collect();
    let label = vote(neighbours.iter().map(|n| n.label.as_str())).expect("k >= 1").to_owned();
    Ok(Prediction { label, neighbours })
}

/// Per-class mean vectors, keyed by label.
pub fn class_templates(train: &Dataset) -> BTreeMap<String, Vec<f64>> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for s in &train.samples {
        let e = sums
            .entry(s.label.clone())
            .or_insert_with(|| (vec![0.0; s.features.len()], 0));
        for (acc, v) in e.0.iter_mut().zip(&s.features) {
            *acc += v;
        }
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(label, (sum, n))| (label, sum.into_iter().map(|v| v / n as f64).collect()))
        .collect()
}

/// Minimum distance to the class templates.
pub fn classify_template(train: &Dataset, query: &[f64], mask: &FeatureMask) -> Result<String> {
    let templates = class_templates(train);
    if templates.is_empty() {
        return Err(Error::InvalidInput("no classes to build templates from".into()));
    }
    classify_against(&templates, query, mask)
}

fn classify_against(templates: &BTreeMap<String, Vec<f64>>, query: &[f64], mask: &FeatureMask) -> Result<String> {
    let mut best: Option<(f64, &str)> = None;
    for (label, m) in templates {
        if m.len() != query.len() {
            return Err(Error::DimensionMismatch { expected: m.len(), found: query.len() });
        }
        check_mask(query.len(), mask)?;
        let d = squared_masked(query, m, mask.bits());
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, label));
        }
    }
    Ok(best.expect("non-empty").1.to_owned())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub id: String,
    pub truth: String,
    pub predicted: String,
    /// Empty for the template rule.
    pub neighbours: Vec<Neighbour>,
}

impl SampleResult {
    pub fn correct(&self) -> bool {
        self.truth == self.predicted
    }

    /// True when the neighbours did not all carry the same label.
    pub fn split_vote(&self) -> bool {
        self.neighbours.windows(2).any(|w| w[0].label != w[1].label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub hits: usize,
    pub total: usize,
    pub recognition_rate: f64,
    /// Sorted by sample id.
    pub per_sample: Vec<SampleResult>,
    /// `(true label, predicted label)` counts.
    pub confusion: BTreeMap<(String, String), usize>,
}

impl EvalReport {
    fn from_results(mut per_sample: Vec<SampleResult>) -> Self {
        per_sample.sort_by(|a, b| a.id.cmp(&b.id));
        let hits = per_sample.iter().filter(|r| r.correct()).count();
        let total = per_sample.len();
        let mut confusion = BTreeMap::new();
        for r in &per_sample {
            *confusion.entry((r.truth.clone(), r.predicted.clone())).or_insert(0) += 1;
        }
        let recognition_rate = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
        Self { hits, total, recognition_rate, per_sample, confusion }
    }

    pub fn errors(&self) -> usize {
        self.total - self.hits
    }
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.feature_count() != test.feature_count() {
        return Err(Error::DimensionMismatch { expected: train.feature_count(), found: test.feature_count() });
    }
    Ok(())
}

/// Classifies every test sample with the k-NN rule.
pub fn evaluate(train: &Dataset, test: &Dataset, cfg: KnnConfig, mask: &FeatureMask) -> Result<EvalReport> {
    check_compatible(train, test)?;
    let results = test
        .samples
        .par_iter()
        .map(|s| {
            let p = classify_knn(train, &s.features, cfg, mask)?;
            Ok(SampleResult {
                id: s.id.clone(),
                truth: s.label.clone(),
                predicted: p.label,
                neighbours: p.neighbours,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_results(results))
}

/// Classifies every test sample with the template (minimum-distance) rule.
pub fn evaluate_template(train: &Dataset, test: &Dataset, mask: &FeatureMask) -> Result<EvalReport> {
    check_compatible(train, test)?;
    let templates = class_templates(train);
    if templates.is_empty() {
        return Err(Error::InvalidInput("no classes to build templates from".into()));
    }
    let results = test
        .samples
        .iter()
        .map(|s| {
            Ok(SampleResult {
                id: s.id.clone(),
                truth: s.label.clone(),
                predicted: classify_against(&templates, &s.features, mask)?,
                neighbours: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_results(results))
}

fn fmt_distance(d: f64) -> String {
    crate::features::format_value(d)
}

/// Per-sample CSV: `sample_id,true,predicted,n1_id,n1_label,n1_dist,...`.
pub fn write_report_csv(report: &EvalReport, out: impl Write) -> Result<()> {
    let k = report.per_sample.iter().map(|r| r.neighbours.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["sample_id".to_owned(), "true".to_owned(), "predicted".to_owned()];
    for i in 1..=k {
        header.extend([format!("n{i}_id"), format!("n{i}_label"), format!("n{i}_dist")]);
    }
    w.write_record(&header)?;
    for r in &report.per_sample {
        let mut row = vec![r.id.clone(), r.truth.clone(), r.predicted.clone()];
        for i in 0..k {
            match r.neighbours.get(i) {
                Some(n) => row.extend([n.id.clone(), n.label.clone(), fmt_distance(n.distance)]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Confusion counts as `true,predicted,count` rows.
pub fn write_confusion_csv(report: &EvalReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "true,predicted,count")?;
    for ((t, p), n) in &report.confusion {
        writeln!(out, "{t},{p},{n}")?;
    }
    Ok(())
}

/// Plain-text listing of the samples that were misclassified or whose
/// neighbours disagreed, one column per neighbour and the decision last.
pub fn write_error_table(report: &EvalReport, title: &str, mut out: impl Write) -> Result<()> {
    let errors = report.errors();
    writeln!(out, "{title}")?;
    writeln!(out, "recognition rate: {:.0} %", report.recognition_rate * 100.0)?;
    writeln!(
        out,
        "errors: {errors} = {:.0} % of {}",
        if report.total == 0 { 0.0 } else { 100.0 * errors as f64 / report.total as f64 },
        report.total
    )?;
    let k = report.per_sample.iter().map(|r| r.neighbours.len()).max().unwrap_or(0);
    let mut header = format!("{:<16}{:<12}", "sample", "true");
    for i in 1..=k {
        header.push_str(&format!("{:<18}", format!("neighbour {i}")));
    }
    header.push_str("decision");
    writeln!(out, "{header}")?;
    for r in report.per_sample.iter().filter(|r| !r.correct() || r.split_vote()) {
        let mut line = format!("{:<16}{:<12}", r.id, r.truth);
        for n in &r.neighbours {
            line.push_str(&format!("{:<18}", n.id));
        }
        line.push_str(&r.predicted);
        if !r.correct() {
            line.push_str("  *");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&str, &str, &[f64])]) -> Dataset {
        let mut d = Dataset::with_features("t", rows[0].2.len());
        for (id, label, v) in rows {
            d.push(*id, *label, v.to_vec()).unwrap();
        }
        d
    }

    #[test]
    fn distance_examples() {
        let full = FeatureMask::all(2);
        assert_eq!(distance(&[1.0, 2.0], &[1.0, 2.0], &full).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0], &full).unwrap(), 5.0);
        let mask: FeatureMask = "110".parse().unwrap();
        assert_eq!(distance(&[3.0, 4.0, 100.0], &[0.0, 0.0, 0.0], &mask).unwrap(), 5.0);
        assert!(matches!(distance(&[0.0], &[0.0, 1.0], &full), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(distance(&[0.0], &[1.0], &FeatureMask::none(1)), Err(Error::EmptyMask)));
    }

    #[test]
    fn mask_text() {
        let m: FeatureMask = "0101".parse().unwrap();
        assert_eq!(m.selected(), vec![2, 4]);
        assert_eq!(m.to_string(), "0101");
        assert_eq!(FeatureMask::from_indices(4, &[4, 2]).unwrap(), m);
        assert!("01x".parse::<FeatureMask>().is_err());
        assert!(FeatureMask::from_indices(4, &[0]).is_err());
    }

    #[test]
    fn knn_examples() {
        let train = ds(&[
            ("a1", "A", &[0.0, 0.0]),
            ("a2", "A", &[1.0, 0.0]),
            ("b1", "B", &[5.0, 5.0]),
            ("c1", "C", &[0.0, 3.0]),
        ]);
        let all = FeatureMask::all(2);
        let p = classify_knn(&train, &[5.0, 5.0], KnnConfig::new(1).unwrap(), &all).unwrap();
        assert_eq!(p.label, "B");
        assert_eq!(p.neighbours[0].distance, 0.0);
        let p = classify_knn(&train, &[0.4, 0.0], KnnConfig::new(3).unwrap(), &all).unwrap();
        assert_eq!(p.label, "A");

        // one vote each: the nearest neighbour's class wins
        let train = ds(&[("x", "A", &[1.0]), ("y", "B", &[2.0]), ("z", "C", &[3.0])]);
        let p = classify_knn(&train, &[0.0], KnnConfig::new(3).unwrap(), &FeatureMask::all(1)).unwrap();
        assert_eq!(p.label, "A");
        let p = classify_knn(&train, &[10.0], KnnConfig::new(3).unwrap(), &FeatureMask::all(1)).unwrap();
        assert_eq!(p.label, "C");
    }

    #[test]
    fn equal_distances_order_by_id() {
        let train = ds(&[("b", "B", &[1.0]), ("a", "A", &[-1.0])]);
        let p = classify_knn(&train, &[0.0], KnnConfig::new(2).unwrap(), &FeatureMask::all(1)).unwrap();
        assert_eq!(p.neighbours[0].id, "a");
        assert_eq!(p.label, "A");
    }

    #[test]
    fn knn_errors() {
        let train = ds(&[("a", "A", &[0.0])]);
        let all = FeatureMask::all(1);
        assert!(classify_knn(&train, &[0.0], KnnConfig { k: 2 }, &all).is_err());
        assert!(classify_knn(&Dataset::with_features("e", 1), &[0.0], KnnConfig::default(), &all).is_err());
        assert!(KnnConfig::new(0).is_err());
    }

    #[test]
    fn vote_rules() {
        assert_eq!(vote(["A", "A", "B"]), Some("A"));
        assert_eq!(vote(["B", "A", "A"]), Some("A"));
        assert_eq!(vote(["C", "B", "A"]), Some("C"));
        assert_eq!(vote(["B", "A", "A", "B"]), Some("B"));
        assert_eq!(vote(Vec::<&str>::new()), None);
    }

    #[test]
    fn template_rule() {
        let train = ds(&[
            ("a1", "A", &[-1.0, 0.0]),
            ("a2", "A", &[1.0, 0.0]),
            ("b1", "B", &[10.0, 10.0]),
        ]);
        let all = FeatureMask::all(2);
        assert_eq!(classify_template(&train, &[1.0, 1.0], &all).unwrap(), "A");
        assert_eq!(classify_template(&train, &[5.0, 5.0], &all).unwrap(), "A");
        let train = ds(&[("a", "B", &[0.0]), ("b", "A", &[2.0])]);
        assert_eq!(classify_template(&train, &[1.0], &FeatureMask::all(1)).unwrap(), "A");
    }

    #[test]
    fn template_equals_1nn_for_singleton_classes() {
        let train = ds(&[
            ("p", "P", &[0.0, 1.0, 2.0]),
            ("q", "Q", &[3.0, -1.0, 0.5]),
            ("r", "R", &[1.5, 1.5, 1.5]),
        ]);
        let all = FeatureMask::all(3);
        for q in [[0.0, 0.0, 0.0], [2.0, 0.0, 1.0], [1.0, 1.0, 2.0], [9.0, 9.0, 9.0]] {
            let a = classify_template(&train, &q, &all).unwrap();
            let b = classify_knn(&train, &q, KnnConfig::default(), &all).unwrap().label;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let train = ds(&[("a", "A", &[0.0, 1.0]), ("b", "B", &[1.0, 0.0]), ("c", "A", &[2.0, 2.0])]);
        let r = evaluate(&train, &train, KnnConfig::default(), &FeatureMask::all(2)).unwrap();
        assert_eq!((r.hits, r.total), (3, 3));
        assert_eq!(r.recognition_rate, 1.0);
    }

    #[test]
    fn rates_from_hit_counts() {
        let mk = |hits: usize| {
            let results = (0..50)
                .map(|i| SampleResult {
                    id: format!("s{i:02}"),
                    truth: "A".into(),
                    predicted: if i < hits { "A".into() } else { "B".into() },
                    neighbours: Vec::new(),
                })
                .collect();
            EvalReport::from_results(results)
        };
        assert_eq!(mk(49).recognition_rate, 0.98);
        assert_eq!(mk(47).recognition_rate, 0.94);
        assert_eq!(mk(48).recognition_rate, 0.96);
        assert_eq!(mk(49).confusion[&("A".to_owned(), "B".to_owned())], 1);
    }

    #[test]
    fn reports_are_stable() {
        let train = ds(&[("a", "A", &[0.0]), ("b", "B", &[1.0]), ("c", "B", &[1.2])]);
        let test = ds(&[("t2", "A", &[0.9]), ("t1", "A", &[0.1])]);
        let r = evaluate(&train, &test, KnnConfig::new(3).unwrap(), &FeatureMask::all(1)).unwrap();
        assert_eq!(r.per_sample[0].id, "t1");
        let mut a = Vec::new();
        write_report_csv(&r, &mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(
            "sample_id,true,predicted,n1_id,n1_label,n1_dist,n2_id,n2_label,n2_dist,n3_id,n3_label,n3_dist\n"
        ));
        assert!(text.contains("t1,A,B,a,A,0.1,b,B,0.9,c,B,1.1\n"));
        let mut table = Vec::new();
        write_error_table(&r, "3-NN", &mut table).unwrap();
        let table = String::from_utf8(table).unwrap();
        assert!(table.contains("recognition rate: 0 %"));
        assert_eq!(table.lines().filter(|l| l.ends_with('*')).count(), 2);
    }
}
