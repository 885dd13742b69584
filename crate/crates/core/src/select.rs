//! Wrapper feature selection with a generational genetic algorithm.
//!
//! An individual is a feature mask. Its fitness is `alpha * hits - beta * nf`,
//! where `hits` counts the evaluation samples a 1-NN classifier restricted to
//! the mask gets right and `nf` is the number of features switched on.
//!
//! Note that when the evaluation set is also the final test set, the selected
//! mask has seen the test labels. Pass a separate held-out set to avoid that.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::FeatureMask;
use crate::error::{Error, Result};
use crate::features::{format_value, Dataset};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 12957;

/// `alpha * hits - beta * nf`.
pub fn fitness(hits: usize, nf: usize, alpha: f64, beta: f64) -> f64 {
    alpha * hits as f64 - beta * nf as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Probability that a child gets exactly one bit flipped.
    pub mutation_prob: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Stop after this many generations without a better best fitness.
    pub stagnation_limit: Option<usize>,
    pub elitism: usize,
    /// Require `alpha + beta = 1`.
    pub check_weights: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 814,
            crossover_prob: 1.0,
            mutation_prob: 0.9,
            alpha: 0.6,
            beta: 0.4,
            seed: DEFAULT_SEED,
            stagnation_limit: None,
            elitism: 1,
            check_weights: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size < 2 {
            return bad(format!("population size {} is below 2", self.population_size));
        }
        for (name, p) in [("crossover", self.crossover_prob), ("mutation", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return bad(format!("weights must be finite and non-negative, got alpha={} beta={}", self.alpha, self.beta));
        }
        if self.check_weights && (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return bad(format!(
                "alpha + beta = {} but must equal 1 (disable the weight check to allow this)",
                self.alpha + self.beta
            ));
        }
        if self.elitism > self.population_size {
            return bad(format!("elitism {} exceeds population size {}", self.elitism, self.population_size));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub hits: usize,
    pub nf: usize,
    /// `-inf` for the empty mask.
    pub fitness: f64,
}

/// 1-NN scoring of masks against a fixed train/eval pair, with a cache keyed
/// by the mask bits.
///
/// The scan reproduces [`crate::classify::evaluate`] with `k = 1` exactly:
/// the same squared-distance summation order, and equal distances resolved
/// in favour of the smaller training id.
pub struct MaskEvaluator<'a> {
    train: &'a Dataset,
    eval: &'a Dataset,
    /// Training rows in id order.
    order: Vec<usize>,
    train_labels: Vec<u32>,
    eval_labels: Vec<u32>,
    alpha: f64,
    beta: f64,
    cache: HashMap<Vec<bool>, Evaluation>,
    runs: usize,
}

impl<'a> MaskEvaluator<'a> {
    pub fn new(train: &'a Dataset, eval: &'a Dataset, alpha: f64, beta: f64) -> Result<Self> {
        if train.is_empty() || eval.is_empty() {
            return Err(Error::InvalidInput("training and evaluation sets must be non-empty".into()));
        }
        if train.feature_count() != eval.feature_count() {
            return Err(Error::DimensionMismatch { expected: train.feature_count(), found: eval.feature_count() });
        }
        let mut names: Vec<&str> = train.samples.iter().chain(&eval.samples).map(|s| s.label.as_str()).collect();
        names.sort();
        names.dedup();
        let code = |l: &str| names.binary_search(&l).expect("label indexed") as u32;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.sort_by(|&a, &b| train.samples[a].id.cmp(&train.samples[b].id));
        Ok(Self {
            train,
            eval,
            train_labels: order.iter().map(|&i| code(&train.samples[i].label)).collect(),
            eval_labels: eval.samples.iter().map(|s| code(&s.label)).collect(),
            order,
            alpha,
            beta,
            cache: HashMap::new(),
            runs: 0,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.train.feature_count()
    }

    /// Number of distinct masks that went through the classifier.
    pub fn classifier_runs(&self) -> usize {
        self.runs
    }

    pub fn cached(&self, bits: &[bool]) -> Option<Evaluation> {
        self.cache.get(bits).copied()
    }

    /// Scores one mask without touching the cache.
    pub fn score(&self, bits: &[bool]) -> Evaluation {
        let positions: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        let nf = positions.len();
        if nf == 0 {
            return Evaluation { hits: 0, nf, fitness: f64::NEG_INFINITY };
        }
        let hits = self
            .eval
            .samples
            .iter()
            .zip(&self.eval_labels)
            .filter(|(q, &truth)| self.nearest_label(&q.features, &positions) == truth)
            .count();
        Evaluation { hits, nf, fitness: fitness(hits, nf, self.alpha, self.beta) }
    }

    fn nearest_label(&self, q: &[f64], positions: &[usize]) -> u32 {
        let mut best = f64::INFINITY;
        let mut label = self.train_labels[0];
        for (rank, &row) in self.order.iter().enumerate() {
            let m = &self.train.samples[row].features;
            let mut d = 0.0;
            for &p in positions {
                let t = q[p] - m[p];
                d += t * t;
                // partial sums only grow, so this row can no longer win
                if d >= best {
                    break;
                }
            }
            if d < best {
                best = d;
                label = self.train_labels[rank];
            }
        }
        label
    }

    /// Cached evaluation of one mask.
    pub fn evaluate(&mut self, bits: &[bool]) -> Evaluation {
        if let Some(e) = self.cache.get(bits) {
            return *e;
        }
        let e = self.score(bits);
        self.runs += 1;
        self.cache.insert(bits.to_vec(), e);
        e
    }

    /// Evaluates a population. Uncached masks are scored in parallel; the
    /// cache is filled in population order.
    pub fn evaluate_all(&mut self, population: &[Vec<bool>]) -> Vec<Evaluation> {
        let mut pending: Vec<&Vec<bool>> = Vec::new();
        for m in population {
            if !self.cache.contains_key(m) && !pending.contains(&m) {
                pending.push(m);
            }
        }
        let scored: Vec<Evaluation> = pending.par_iter().map(|m| self.score(m)).collect();
        for (m, e) in pending.into_iter().zip(scored) {
            self.runs += 1;
            self.cache.insert(m.clone(), e);
        }
        population.iter().map(|m| self.cache[m]).collect()
    }
}

/// Scores a single mask: 1-NN hits on `eval`, feature count and fitness.
pub fn evaluate_individual(mask: &FeatureMask, train: &Dataset, eval: &Dataset, cfg: &GaConfig) -> Result<Evaluation> {
    if mask.len() != train.feature_count() {
        return Err(Error::DimensionMismatch { expected: train.feature_count(), found: mask.len() });
    }
    Ok(MaskEvaluator::new(train, eval, cfg.alpha, cfg.beta)?.score(mask.bits()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    /// Median and minimum ignore individuals with an empty mask.
    pub median: f64,
    pub min: f64,
    pub best_nf: usize,
    pub best_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaRunReport {
    pub config: GaConfig,
    pub history: Vec<GenerationStats>,
    pub best_mask: FeatureMask,
    pub best: Evaluation,
    /// 1-based, ascending.
    pub selected: Vec<usize>,
    pub recognition_rate: f64,
    pub eval_size: usize,
    pub classifier_runs: usize,
    pub stopped_early: bool,
}

impl GaRunReport {
    pub fn generations_run(&self) -> usize {
        self.history.last().map_or(0, |s| s.generation)
    }
}

fn stats(generation: usize, evals: &[Evaluation]) -> GenerationStats {
    let best = evals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.fitness.total_cmp(&b.1.fitness).then(b.0.cmp(&a.0)))
        .map(|(_, e)| *e)
        .expect("non-empty population");
    let mut finite: Vec<f64> = evals.iter().map(|e| e.fitness).filter(|f| f.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let (median, min) = if finite.is_empty() {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    } else {
        let n = finite.len();
        let median = if n % 2 == 1 { finite[n / 2] } else { 0.5 * (finite[n / 2 - 1] + finite[n / 2]) };
        (median, finite[0])
    };
    GenerationStats { generation, best: best.fitness, median, min, best_nf: best.nf, best_hits: best.hits }
}

/// The better of two uniformly drawn individuals; the first draw wins ties.
fn tournament(rng: &mut ChaCha8Rng, evals: &[Evaluation]) -> usize {
    let a = rng.random_range(0..evals.len());
    let b = rng.random_range(0..evals.len());
    if evals[b].fitness > evals[a].fitness {
        b
    } else {
        a
    }
}

/// Runs the GA with a fresh evaluator.
pub fn run_ga(train: &Dataset, eval: &Dataset, cfg: &GaConfig) -> Result<GaRunReport> {
    cfg.validate()?;
    let mut evaluator = MaskEvaluator::new(train, eval, cfg.alpha, cfg.beta)?;
    run_ga_with(&mut evaluator, cfg)
}

/// Runs the GA on an existing evaluator, reusing its cache.
pub fn run_ga_with(evaluator: &mut MaskEvaluator<'_>, cfg: &GaConfig) -> Result<GaRunReport> {
    cfg.validate()?;
    let n = evaluator.feature_count();
    if n == 0 {
        return Err(Error::InvalidInput("dataset has no features".into()));
    }
    let runs_before = evaluator.classifier_runs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population: Vec<Vec<bool>> = (0..cfg.population_size)
        .map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let mut evals = evaluator.evaluate_all(&population);
    let mut history = vec![stats(0, &evals)];

    let best_of = |pop: &[Vec<bool>], ev: &[Evaluation]| {
        let i = (0..ev.len())
            .max_by(|&a, &b| ev[a].fitness.total_cmp(&ev[b].fitness).then(b.cmp(&a)))
            .expect("non-empty population");
        (pop[i].clone(), ev[i])
    };
    let (mut best_mask, mut best) = best_of(&population, &evals);
    let mut stale = 0;
    let mut stopped_early = false;

    for generation in 1..=cfg.generations {
        if cfg.stagnation_limit.is_some_and(|l| stale >= l) {
            stopped_early = true;
            break;
        }
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| evals[b].fitness.total_cmp(&evals[a].fitness).then(a.cmp(&b)));
        let mut next: Vec<Vec<bool>> = ranked[..cfg.elitism].iter().map(|&i| population[i].clone()).collect();
        while next.len() < cfg.population_size {
            let p1 = &population[tournament(&mut rng, &evals)];
            let p2 = &population[tournament(&mut rng, &evals)];
            let (mut c1, mut c2) = (p1.clone(), p2.clone());
            if n > 1 && rng.random_bool(cfg.crossover_prob) {
                let cut = rng.random_range(1..n);
                c1[cut..].copy_from_slice(&p2[cut..]);
                c2[cut..].copy_from_slice(&p1[cut..]);
            }
            for mut child in [c1, c2] {
                if rng.random_bool(cfg.mutation_prob) {
                    let bit = rng.random_range(0..n);
                    child[bit] = !child[bit];
                }
                if next.len() < cfg.population_size {
                    next.push(child);
                }
            }
        }
        population = next;
        evals = evaluator.evaluate_all(&population);
        history.push(stats(generation, &evals));
        let (mask, e) = best_of(&population, &evals);
        if e.fitness > best.fitness {
            best = e;
            best_mask = mask;
            stale = 0;
        } else {
            stale += 1;
        }
    }

    let mask = FeatureMask::new(best_mask);
    Ok(GaRunReport {
        config: cfg.clone(),
        history,
        selected: mask.selected(),
        recognition_rate: best.hits as f64 / evaluator.eval.len() as f64,
        eval_size: evaluator.eval.len(),
        best_mask: mask,
        best,
        classifier_runs: evaluator.classifier_runs() - runs_before,
        stopped_early,
    })
}

/// Per-generation series as `gen,best,median,min,best_nf`.
pub fn write_history_csv(report: &GaRunReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "gen,best,median,min,best_nf")?;
    for s in &report.history {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.generation,
            format_value(s.best),
            format_value(s.median),
            format_value(s.min),
            s.best_nf
        )?;
    }
    Ok(())
}

/// Key/value summary of a run in the layout of a GA parameter table.
pub fn write_summary(report: &GaRunReport, mut out: impl Write) -> Result<()> {
    let c = &report.config;
    let lines = [
        ("population_size", c.population_size.to_string()),
        ("max_generations", c.generations.to_string()),
        ("generations_run", report.generations_run().to_string()),
        ("crossover_prob", format_value(c.crossover_prob)),
        ("mutation_prob", format_value(c.mutation_prob)),
        ("alpha", format_value(c.alpha)),
        ("beta", format_value(c.beta)),
        ("elitism", c.elitism.to_string()),
        ("stagnation_limit", c.stagnation_limit.map_or("none".into(), |l| l.to_string())),
        ("seed", c.seed.to_string()),
        ("initial_features", report.best_mask.len().to_string()),
        ("final_features", report.best.nf.to_string()),
        ("selected_features", join(&report.selected)),
        ("hits", report.best.hits.to_string()),
        ("eval_size", report.eval_size.to_string()),
        ("recognition_rate", format_value(report.recognition_rate)),
        ("best_fitness", format_value(report.best.fitness)),
        ("classifier_runs", report.classifier_runs.to_string()),
        ("stopped_early", report.stopped_early.to_string()),
    ];
    for (k, v) in lines {
        writeln!(out, "{k} = {v}")?;
    }
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes a mask as a single line of 0/1 characters.
pub fn save_mask(mask: &FeatureMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format!("{mask}\n"))?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<FeatureMask> {
    fs::read_to_string(path)?.trim().parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitness_substitution() {
        assert!((fitness(49, 117, 0.6, 0.4) - -17.4).abs() < 1e-12);
        assert!((fitness(50, 3, 0.6, 0.4) - 28.8).abs() < 1e-12);
        assert_eq!(fitness(42, 9, 1.0, 0.0), 42.0);
    }

    #[test]
    fn config_checks() {
        assert!(GaConfig::default().validate().is_ok());
        let c = GaConfig { alpha: 0.6, beta: 0.6, ..GaConfig::default() };
        assert!(c.validate().is_err());
        assert!(GaConfig { check_weights: false, ..c }.validate().is_ok());
        assert!(GaConfig { population_size: 1, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_prob: 1.5, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { elitism: 51, ..GaConfig::default() }.validate().is_err());
    }

    #[test]
    fn median_of_even_count_and_sentinels() {
        let e = |f: f64| Evaluation { hits: 0, nf: 1, fitness: f };
        let s = stats(0, &[e(1.0), e(4.0), e(f64::NEG_INFINITY), e(2.0), e(3.0)]);
        assert_eq!((s.best, s.median, s.min), (4.0, 2.5, 1.0));
    }
}
