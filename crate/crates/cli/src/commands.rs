use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};

use granulom_core::analyze::{self, PcaMatrix};
use granulom_core::classify::{self, FeatureMask, KnnConfig};
use granulom_core::features::{self, Dataset, MinMaxScaler};
use granulom_core::granulometry::{self, DEFAULT_K_MAX};
use granulom_core::imagecore::{decode_pgm, decode_ppm, read_any_grey, write_pgm, ColorImage};
use granulom_core::morphology::{self, StructuringElement};
use granulom_core::select::{self, GaConfig};
use granulom_core::synthkit::{self, CorpusSpec, ManifestEntry};

use crate::{CliError, CliResult, ExtractArgs, GranuloArgs, KnnArgs, MorphArgs, MorphOp, PcaArgs, ScatterArgs, SelectArgs, SiArgs, SplitArgs, SynthArgs};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    features::load_dataset(path).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

/// A 0/1 string, or the path of a file holding one.
pub fn parse_mask(arg: &str, n: usize) -> CliResult<FeatureMask> {
    let mask: FeatureMask = if !arg.is_empty() && arg.chars().all(|c| c == '0' || c == '1') {
        arg.parse()?
    } else {
        select::load_mask(arg).map_err(|e| CliError::from(e).context(arg))?
    };
    if mask.len() != n {
        return Err(CliError::Data(format!("mask has {} bits but the dataset has {n} features", mask.len())));
    }
    Ok(mask)
}

/// Colour image from any PNM file; grey images are replicated into three channels.
pub fn read_colour(path: &Path) -> CliResult<ColorImage> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let img = if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes).map(|g| ColorImage::from_grey(&g))
    } else {
        decode_ppm(&bytes)
    };
    img.map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn normalized(train: Dataset, others: Vec<Dataset>) -> CliResult<(Dataset, Vec<Dataset>)> {
    let scaler = MinMaxScaler::fit(&train)?;
    let others = others.iter().map(|d| scaler.apply(d)).collect::<Result<Vec<_>, _>>()?;
    Ok((scaler.apply(&train)?, others))
}

pub fn synth(a: SynthArgs, seed: Option<u64>) -> CliResult {
    let mut spec = match &a.spec {
        Some(p) => CorpusSpec::load(p).map_err(|e| CliError::from(e).context(&p.display().to_string()))?,
        None => CorpusSpec::granite14(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let entries = synthkit::generate_corpus(&spec, &a.out)?;
    info!("wrote {} images of {} classes to {}", entries.len(), spec.classes.len(), a.out.display());
    println!("images = {}\nclasses = {}\nseed = {}", entries.len(), spec.classes.len(), spec.seed);
    Ok(())
}

/// Manifest entries for a directory: its manifest.csv, or `<label>-<n>.p?m` file names.
fn scan_dir(dir: &Path) -> CliResult<Vec<ManifestEntry>> {
    let manifest = dir.join("manifest.csv");
    if manifest.is_file() {
        return Ok(synthkit::load_manifest(&manifest)?);
    }
    let mut entries = Vec::new();
    let listing = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for item in listing {
        let path = item?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !matches!(ext, "ppm" | "pgm") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_owned();
        let label = stem
            .rsplit_once('-')
            .map(|(l, _)| l.to_owned())
            .ok_or_else(|| CliError::Data(format!("cannot infer a label from file name {stem:?}")))?;
        entries.push(ManifestEntry { id: stem, label, path });
    }
    if entries.is_empty() {
        return Err(CliError::Data(format!("no PNM images in {}", dir.display())));
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(entries)
}

pub fn extract_entries(recipe: &features::FeatureRecipe, entries: &[ManifestEntry]) -> CliResult<Dataset> {
    let images = entries
        .iter()
        .map(|e| Ok((e.id.clone(), e.label.clone(), read_colour(&e.path)?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(features::extract_batch(recipe, &images)?)
}

pub fn extract(a: ExtractArgs) -> CliResult {
    let recipe = features::parse_recipe(&a.recipe)?;
    let entries = match (&a.dir, &a.manifest) {
        (_, Some(m)) => synthkit::load_manifest(m).map_err(|e| CliError::from(e).context(&m.display().to_string()))?,
        (Some(d), None) => scan_dir(d)?,
        (None, None) => return Err(CliError::Usage("give --dir or --manifest".into())),
    };
    let ds = extract_entries(&recipe, &entries)?;
    features::write_dataset(&ds, create(&a.out)?)?;
    info!("{} samples x {} features ({}) -> {}", ds.len(), ds.feature_count(), recipe.name, a.out.display());
    Ok(())
}

pub fn split(a: SplitArgs, seed: Option<u64>) -> CliResult {
    let ds = load_dataset(&a.dataset)?;
    let fraction = match a.test_count {
        Some(0) => return Err(CliError::Usage("--test-count must be positive".into())),
        Some(c) if c >= ds.len() => {
            return Err(CliError::Data(format!("--test-count {c} leaves no training samples out of {}", ds.len())))
        }
        Some(c) => c as f64 / ds.len() as f64,
        None => a.test_fraction,
    };
    let seed = seed.unwrap_or(select::DEFAULT_SEED);
    let s = features::split(&ds, fraction, seed)?;
    if !s.stratified {
        warn!("some class has fewer than 2 samples; split was not stratified");
    }
    features::write_dataset(&s.train, create(&a.train_out)?)?;
    features::write_dataset(&s.test, create(&a.test_out)?)?;
    println!("train = {}\ntest = {}\nstratified = {}\nseed = {seed}", s.train.len(), s.test.len(), s.stratified);
    Ok(())
}

pub fn knn(a: KnnArgs) -> CliResult {
    let train = load_dataset(&a.train)?;
    let test = load_dataset(&a.test)?;
    if train.feature_count() != test.feature_count() {
        return Err(CliError::Data(format!(
            "training set has {} features, test set {}",
            train.feature_count(),
            test.feature_count()
        )));
    }
    let mask = match &a.mask {
        Some(m) => parse_mask(m, train.feature_count())?,
        None => FeatureMask::all(train.feature_count()),
    };
    let cfg = KnnConfig::new(a.k)?;
    let (train, test) = if a.normalize {
        let (t, mut o) = normalized(train, vec![test])?;
        (t, o.remove(0))
    } else {
        (train, test)
    };
    let report = if a.template {
        classify::evaluate_template(&train, &test, &mask)?
    } else {
        classify::evaluate(&train, &test, cfg, &mask)?
    };
    classify::write_report_csv(&report, create(&a.report)?)?;
    let title = if a.template {
        format!("template rule, {} features", mask.count())
    } else {
        format!("{}-NN rule, {} features", a.k, mask.count())
    };
    if let Some(p) = &a.table {
        classify::write_error_table(&report, &title, create(p)?)?;
    }
    if let Some(p) = &a.confusion {
        classify::write_confusion_csv(&report, create(p)?)?;
    }
    println!(
        "hits = {}\ntotal = {}\nrecognition_rate = {}",
        report.hits,
        report.total,
        features::format_value(report.recognition_rate)
    );
    Ok(())
}

pub fn ga_config(a: &SelectArgs, seed: Option<u64>) -> GaConfig {
    GaConfig {
        population_size: a.pop,
        generations: a.gens,
        crossover_prob: a.pc,
        mutation_prob: a.pm,
        alpha: a.alpha,
        beta: a.beta,
        seed: seed.unwrap_or(select::DEFAULT_SEED),
        stagnation_limit: a.stagnation,
        elitism: a.elitism,
        check_weights: !a.no_weight_check,
    }
}

pub fn select(a: SelectArgs, seed: Option<u64>) -> CliResult {
    let cfg = ga_config(&a, seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let train = load_dataset(&a.train)?;
    let eval = load_dataset(&a.eval)?;
    let (train, eval) = if a.normalize {
        let (t, mut o) = normalized(train, vec![eval])?;
        (t, o.remove(0))
    } else {
        (train, eval)
    };
    let report = select::run_ga(&train, &eval, &cfg)?;
    select::save_mask(&report.best_mask, &a.out)?;
    if let Some(p) = &a.report {
        select::write_history_csv(&report, create(p)?)?;
    }
    if let Some(p) = &a.summary {
        select::write_summary(&report, create(p)?)?;
    }
    println!(
        "selected = {}\nhits = {}\nrecognition_rate = {}\ngenerations = {}\nseed = {}",
        report.selected.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        report.best.hits,
        features::format_value(report.recognition_rate),
        report.generations_run(),
        cfg.seed
    );
    Ok(())
}

pub fn pca(a: PcaArgs) -> CliResult {
    let ds = load_dataset(&a.dataset)?;
    let ds = match &a.mask {
        Some(m) => ds.select_features(&parse_mask(m, ds.feature_count())?.positions())?,
        None => ds,
    };
    let matrix = if a.correlation { PcaMatrix::Correlation } else { PcaMatrix::Covariance };
    let model = analyze::fit_pca(&ds, 2, matrix)?;
    let rows = analyze::project(&model, &ds)?;
    analyze::write_scatter_csv(&rows, create(&a.out)?)?;
    if let Some(p) = &a.svg {
        fs::write(p, analyze::render_svg(&rows, "PC1", "PC2"))?;
    }
    if let Some(p) = &a.eigenvalues {
        let mut text = String::from("component,eigenvalue\n");
        for (i, l) in model.all_eigenvalues.iter().enumerate() {
            text.push_str(&format!("{},{}\n", i + 1, features::format_value(*l)));
        }
        fs::write(p, text)?;
    }
    Ok(())
}

/// Writes one CSV (and optionally SVG) per feature pair.
pub fn write_pairs(ds: &Dataset, feats: &[usize], out: &Path, single_file: bool, svg: bool) -> CliResult<Vec<PathBuf>> {
    let pairs = analyze::feature_pairs(feats);
    if !single_file {
        fs::create_dir_all(out)?;
    }
    let mut written = Vec::new();
    for (fx, fy) in pairs {
        let rows = analyze::feature_pair(ds, fx, fy)?;
        let path = if single_file { out.to_path_buf() } else { out.join(format!("f{fx}_f{fy}.csv")) };
        analyze::write_scatter_csv(&rows, create(&path)?)?;
        if svg {
            fs::write(path.with_extension("svg"), analyze::render_svg(&rows, &format!("f{fx}"), &format!("f{fy}")))?;
        }
        written.push(path);
    }
    Ok(written)
}

pub fn scatter(a: ScatterArgs) -> CliResult {
    let ds = load_dataset(&a.dataset)?;
    let feats = match &a.mask {
        Some(m) => parse_mask(m, ds.feature_count())?.selected(),
        None => a.features.clone(),
    };
    if feats.len() < 2 {
        return Err(CliError::Usage("scatter needs at least two features".into()));
    }
    let files = write_pairs(&ds, &feats, &a.out, feats.len() == 2, a.svg)?;
    info!("wrote {} scatter file(s)", files.len());
    Ok(())
}

fn read_grey(path: &Path) -> CliResult<granulom_core::imagecore::GreyImage> {
    read_any_grey(path).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

pub fn si(a: SiArgs) -> CliResult {
    let f = read_grey(&a.image)?;
    let d = granulometry::size_intensity(&f, a.family, a.r_max, a.k_max.min(DEFAULT_K_MAX))?;
    granulometry::write_diagram_csv(&d, create(&a.out)?)?;
    Ok(())
}

pub fn granulo(a: GranuloArgs) -> CliResult {
    let f = read_grey(&a.image)?;
    let curve = if a.closing {
        granulometry::granulometry_closings(&f, a.family, a.r_max)?
    } else {
        granulometry::granulometry_openings(&f, a.family, a.r_max)?
    };
    granulometry::write_curve_csv(&curve, create(&a.out)?)?;
    Ok(())
}

pub fn morph(a: MorphArgs) -> CliResult {
    let f = read_grey(&a.image)?;
    let se = StructuringElement::new(a.family, a.size);
    let g = match a.op {
        MorphOp::Erode => morphology::erode(&f, se),
        MorphOp::Dilate => morphology::dilate(&f, se),
        MorphOp::Open => morphology::open(&f, se),
        MorphOp::Close => morphology::close(&f, se),
    };
    write_pgm(&g, &a.out)?;
    Ok(())
}
