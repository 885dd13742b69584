//! The end-to-end workflow: corpus, features, split, baseline k-NN, PCA,
//! GA selection and the reduced-feature classifier, all written to one run
//! directory together with a `summary.txt` of every parameter and result.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ini::{Ini, Properties};
use log::{info, warn};

use granulom_core::analyze::{self, PcaMatrix};
use granulom_core::classify::{self, EvalReport, FeatureMask, KnnConfig};
use granulom_core::features::{self, format_value, FeatureRecipe, MinMaxScaler};
use granulom_core::select::{self, GaConfig};
use granulom_core::synthkit::{self, CorpusSpec};

use crate::commands::{extract_entries, write_pairs};
use crate::{CliError, CliResult, PipelineArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EvalSet {
    Test,
    Validation,
}

#[derive(Debug)]
struct Plan {
    config_name: String,
    seed: u64,
    corpus_source: String,
    corpus: CorpusSpec,
    recipe: FeatureRecipe,
    test_count: Option<usize>,
    test_fraction: f64,
    normalize: bool,
    ks: Vec<usize>,
    template: bool,
    pca: bool,
    pca_matrix: PcaMatrix,
    svg: bool,
    ga: Option<GaConfig>,
    eval_set: EvalSet,
    validation_fraction: f64,
}

fn usage(msg: impl Display) -> CliError {
    CliError::Usage(format!("config: {msg}"))
}

fn value<T: std::str::FromStr>(sec: Option<&Properties>, section: &str, key: &str, default: T) -> CliResult<T> {
    match sec.and_then(|s| s.get(key)) {
        None => Ok(default),
        Some(v) => v.trim().parse().map_err(|_| usage(format!("[{section}] {key} = {v:?} is not valid"))),
    }
}

fn flag(sec: Option<&Properties>, section: &str, key: &str, default: bool) -> CliResult<bool> {
    match sec.and_then(|s| s.get(key)).map(str::trim) {
        None => Ok(default),
        Some("true" | "yes" | "on" | "1") => Ok(true),
        Some("false" | "no" | "off" | "0") => Ok(false),
        Some(v) => Err(usage(format!("[{section}] {key} = {v:?} is not a boolean"))),
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    ("run", &["seed", "corpus", "corpus_seed", "recipe", "test_count", "test_fraction", "normalize", "k", "template"]),
    ("pca", &["enabled", "svg", "matrix"]),
    (
        "ga",
        &[
            "enabled",
            "population",
            "generations",
            "crossover",
            "mutation",
            "alpha",
            "beta",
            "elitism",
            "stagnation",
            "weight_check",
            "eval",
            "validation_fraction",
        ],
    ),
];

fn plan(path: &Path, seed_override: Option<u64>) -> CliResult<Plan> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let ini = Ini::load_from_str(&text).map_err(|e| usage(e))?;
    for (name, props) in ini.iter() {
        let name = name.unwrap_or("");
        let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
            if props.is_empty() && name.is_empty() {
                continue;
            }
            return Err(usage(format!("unknown section [{name}]")));
        };
        for (k, _) in props.iter() {
            if !keys.contains(&k) {
                return Err(usage(format!("unknown key `{k}` in [{name}]")));
            }
        }
    }
    let run = ini.section(Some("run"));
    let seed = match seed_override {
        Some(s) => s,
        None => value(run, "run", "seed", select::DEFAULT_SEED)?,
    };
    let corpus_source: String = value(run, "run", "corpus", "granite14".to_owned())?;
    let mut corpus = if corpus_source == "granite14" {
        CorpusSpec::granite14()
    } else {
        let p = path.parent().unwrap_or(Path::new(".")).join(&corpus_source);
        CorpusSpec::load(&p).map_err(|e| CliError::from(e).context(&p.display().to_string()))?
    };
    if let Some(s) = run.and_then(|r| r.get("corpus_seed")) {
        corpus.seed = s.trim().parse().map_err(|_| usage(format!("[run] corpus_seed = {s:?} is not valid")))?;
    }
    let recipe = features::parse_recipe(&value(run, "run", "recipe", "lot117".to_owned())?).map_err(usage)?;
    let test_count = match run.and_then(|r| r.get("test_count")) {
        Some(v) => Some(v.trim().parse().map_err(|_| usage(format!("[run] test_count = {v:?} is not valid")))?),
        None => None,
    };
    let test_fraction = value(run, "run", "test_fraction", 0.211)?;
    if test_count.is_none() && !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(usage("test_fraction must lie in (0, 1)"));
    }
    if test_count == Some(0) || test_count.is_some_and(|c| c >= corpus.total_samples()) {
        return Err(usage("test_count must leave samples on both sides"));
    }
    let ks: Vec<usize> = value::<String>(run, "run", "k", "1,3".into())?
        .split(',')
        .map(|k| k.trim().parse().map_err(|_| usage(format!("[run] k list entry {k:?} is not valid"))))
        .collect::<CliResult<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(usage("k values must be positive"));
    }

    let pca_sec = ini.section(Some("pca"));
    let pca_matrix = match value::<String>(pca_sec, "pca", "matrix", "covariance".into())?.as_str() {
        "covariance" => PcaMatrix::Covariance,
        "correlation" => PcaMatrix::Correlation,
        other => return Err(usage(format!("[pca] matrix = {other:?} is not covariance or correlation"))),
    };

    let ga_sec = ini.section(Some("ga"));
    let ga = if flag(ga_sec, "ga", "enabled", true)? {
        let d = GaConfig::default();
        let stagnation = match ga_sec.and_then(|s| s.get("stagnation")).map(str::trim) {
            None | Some("" | "none") => None,
            Some(v) => Some(v.parse().map_err(|_| usage(format!("[ga] stagnation = {v:?} is not valid")))?),
        };
        let cfg = GaConfig {
            population_size: value(ga_sec, "ga", "population", d.population_size)?,
            generations: value(ga_sec, "ga", "generations", d.generations)?,
            crossover_prob: value(ga_sec, "ga", "crossover", d.crossover_prob)?,
            mutation_prob: value(ga_sec, "ga", "mutation", d.mutation_prob)?,
            alpha: value(ga_sec, "ga", "alpha", d.alpha)?,
            beta: value(ga_sec, "ga", "beta", d.beta)?,
            seed,
            stagnation_limit: stagnation,
            elitism: value(ga_sec, "ga", "elitism", d.elitism)?,
            check_weights: flag(ga_sec, "ga", "weight_check", true)?,
        };
        cfg.validate().map_err(usage)?;
        Some(cfg)
    } else {
        None
    };
    let eval_set = match value::<String>(ga_sec, "ga", "eval", "test".into())?.as_str() {
        "test" => EvalSet::Test,
        "validation" => EvalSet::Validation,
        other => return Err(usage(format!("[ga] eval = {other:?} is not test or validation"))),
    };
    let validation_fraction = value(ga_sec, "ga", "validation_fraction", 0.2)?;
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(usage("validation_fraction must lie in (0, 1)"));
    }
    Ok(Plan {
        config_name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        seed,
        corpus_source,
        corpus,
        recipe,
        test_count,
        test_fraction,
        normalize: flag(run, "run", "normalize", false)?,
        ks,
        template: flag(run, "run", "template", true)?,
        pca: flag(pca_sec, "pca", "enabled", true)?,
        pca_matrix,
        svg: flag(pca_sec, "pca", "svg", true)?,
        ga,
        eval_set,
        validation_fraction,
    })
}

/// Ordered `key = value` lines for summary.txt.
struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, k: &str, v: impl Display) {
        self.0.push((k.to_owned(), v.to_string()));
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.context(&format!("stage {name}")))?;
    info!("stage {name} done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(out)
}

fn write_eval(dir: &Path, stem: &str, title: &str, report: &EvalReport) -> CliResult {
    classify::write_report_csv(report, fs::File::create(dir.join(format!("{stem}_report.csv")))?)?;
    classify::write_error_table(report, title, fs::File::create(dir.join(format!("{stem}_table.txt")))?)?;
    classify::write_confusion_csv(report, fs::File::create(dir.join(format!("{stem}_confusion.csv")))?)?;
    Ok(())
}

fn rate(r: &EvalReport) -> String {
    format_value(r.recognition_rate)
}

pub fn run(a: PipelineArgs, seed: Option<u64>) -> CliResult {
    let p = plan(&a.config, seed)?;
    let out: PathBuf = a.out.clone();
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut s = Summary(Vec::new());
    s.put("config", &p.config_name);
    s.put("seed", p.seed);

    let entries = stage("corpus", || {
        let entries = synthkit::generate_corpus(&p.corpus, out.join("corpus"))?;
        fs::write(out.join("corpus.cfg"), p.corpus.to_ini_string())?;
        Ok(entries)
    })?;
    s.put("corpus", &p.corpus_source);
    s.put("corpus_seed", p.corpus.seed);
    s.put("image_size", p.corpus.image_size);
    s.put("images", entries.len());
    s.put("classes", p.corpus.classes.len());

    let ds = stage("features", || {
        let ds = extract_entries(&p.recipe, &entries)?;
        features::save_dataset(&ds, out.join("features.csv"))?;
        Ok(ds)
    })?;
    s.put("recipe", &p.recipe.name);
    s.put("recipe_extractors", &p.recipe);
    s.put("features", ds.feature_count());

    let (mut train, mut test, mut validation) = stage("split", || {
        let fraction = p.test_count.map_or(p.test_fraction, |c| c as f64 / ds.len() as f64);
        let sp = features::split(&ds, fraction, p.seed)?;
        if !sp.stratified {
            warn!("split was not stratified");
        }
        let (train, validation) = if p.ga.is_some() && p.eval_set == EvalSet::Validation {
            let inner = features::split(&sp.train, p.validation_fraction, p.seed.wrapping_add(1))?;
            (inner.train, Some(inner.test))
        } else {
            (sp.train, None)
        };
        features::save_dataset(&train, out.join("train.csv"))?;
        features::save_dataset(&sp.test, out.join("test.csv"))?;
        if let Some(v) = &validation {
            features::save_dataset(v, out.join("validation.csv"))?;
        }
        Ok((train, sp.test, validation))
    })?;
    s.put("train", train.len());
    s.put("test", test.len());
    if let Some(v) = &validation {
        s.put("validation", v.len());
    }
    s.put("normalize", p.normalize);
    if p.normalize {
        let scaler = MinMaxScaler::fit(&train)?;
        test = scaler.apply(&test)?;
        validation = validation.map(|v| scaler.apply(&v)).transpose()?;
        train = scaler.apply(&train)?;
    }

    let all = FeatureMask::all(train.feature_count());
    stage("baseline", || {
        for &k in &p.ks {
            let r = classify::evaluate(&train, &test, KnnConfig::new(k)?, &all)?;
            let title = format!("{k}-NN rule, all {} features ({})", all.count(), p.recipe.name);
            write_eval(&out, &format!("baseline_k{k}"), &title, &r)?;
            s.put(&format!("baseline_k{k}_hits"), r.hits);
            s.put(&format!("baseline_k{k}_rate"), rate(&r));
        }
        if p.template {
            let r = classify::evaluate_template(&train, &test, &all)?;
            write_eval(&out, "baseline_template", "template rule, all features", &r)?;
            s.put("baseline_template_rate", rate(&r));
        }
        Ok(())
    })?;

    if p.pca {
        stage("pca", || {
            let model = analyze::fit_pca(&train, 2, p.pca_matrix)?;
            let rows = analyze::project(&model, &train)?;
            analyze::write_scatter_csv(&rows, fs::File::create(out.join("pca.csv"))?)?;
            if p.svg {
                fs::write(out.join("pca.svg"), analyze::render_svg(&rows, "PC1", "PC2"))?;
            }
            let total: f64 = model.all_eigenvalues.iter().sum();
            let explained = if total > 0.0 { (model.eigenvalues[0] + model.eigenvalues[1]) / total } else { 0.0 };
            s.put("pca_matrix", format!("{:?}", p.pca_matrix).to_lowercase());
            s.put("pca_explained_variance", format_value(explained));
            Ok(())
        })?;
    }

    if let Some(cfg) = &p.ga {
        let eval = validation.as_ref().unwrap_or(&test);
        let report = stage("select", || {
            let report = select::run_ga(&train, eval, cfg)?;
            select::save_mask(&report.best_mask, out.join("mask.txt"))?;
            select::write_history_csv(&report, fs::File::create(out.join("ga.csv"))?)?;
            select::write_summary(&report, fs::File::create(out.join("ga_summary.txt"))?)?;
            Ok(report)
        })?;
        s.put("ga_eval_set", if validation.is_some() { "validation" } else { "test" });
        s.put("ga_population", cfg.population_size);
        s.put("ga_generations", cfg.generations);
        s.put("ga_generations_run", report.generations_run());
        s.put("ga_crossover", format_value(cfg.crossover_prob));
        s.put("ga_mutation", format_value(cfg.mutation_prob));
        s.put("alpha", format_value(cfg.alpha));
        s.put("beta", format_value(cfg.beta));
        s.put("ga_elitism", cfg.elitism);
        s.put("ga_seed", cfg.seed);
        s.put("ga_initial_features", train.feature_count());
        s.put("ga_final_features", report.best.nf);
        s.put(
            "ga_selected",
            report.selected.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        );
        s.put("ga_best_fitness", format_value(report.best.fitness));

        stage("reduced", || {
            let mask = &report.best_mask;
            for &k in &p.ks {
                let r = classify::evaluate(&train, &test, KnnConfig::new(k)?, mask)?;
                let title = format!("{k}-NN rule, {} GA-selected features", mask.count());
                write_eval(&out, &format!("selected_k{k}"), &title, &r)?;
                s.put(&format!("selected_k{k}_hits"), r.hits);
                s.put(&format!("selected_k{k}_rate"), rate(&r));
            }
            let feats = &report.selected;
            if (2..=10).contains(&feats.len()) {
                let files = write_pairs(&train, feats, &out.join("scatter"), false, p.svg)?;
                s.put("scatter_files", files.len());
            } else {
                info!("{} selected features; pairwise scatterplots skipped", feats.len());
            }
            Ok(())
        })?;
    }

    fs::write(out.join("summary.txt"), s.render())?;
    println!("{}", s.render().trim_end());
    Ok(())
}
