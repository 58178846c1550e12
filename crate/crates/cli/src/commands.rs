use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use dsc_core::classify::{threshold_sweep, SweepRecord, SWEEP_THRESHOLDS};
use dsc_core::data::{
    engineer_features, engineered_feature_names, generate_synthetic, load_csv, split_scale, undersample_train, Dataset,
    FeatureSpec, FeatureTable, SyntheticConfig,
};
use dsc_core::expr::{ConstStyle, ExprTree, Library};
use dsc_core::pareto::{elbow, format_table, pareto_front, read_points, write_points, ParetoPoint};
use dsc_core::policy::write_checkpoint;
use dsc_core::rules::{extract_rules, Boundary, RuleOptions};
use dsc_core::trainer::{train as run_training, write_run_log, TrainError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Failure, ResultExt};
use crate::{EvalArgs, ExplainArgs, IngestArgs, ParetoArgs, SimulateArgs, TrainArgs};

/// Feature names with their rule-extraction metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub features: Vec<String>,
    /// Units the metadata refers to: `raw` or `standardised`.
    pub units: String,
    pub spec: FeatureSpec,
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).runtime_ctx(|| format!("cannot create {}", dir.display()))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .runtime_ctx(|| format!("cannot create {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .runtime_ctx(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).runtime_ctx(|| "cannot serialise".to_string())?;
    write_text(path, &(text + "\n"))
}

pub fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let cfg = SyntheticConfig {
        rows: a.rows,
        fraud_rate: a.fraud_rate,
        seed: a.seed,
        label_noise: a.label_noise,
    };
    cfg.validate().usage_ctx(|| "invalid generator settings")?;
    let rows = generate_synthetic(&cfg).runtime_ctx(|| "generation failed")?;
    let mut w = create(&a.out)?;
    dsc_core::data::write_csv(&rows, &mut w).runtime_ctx(|| format!("cannot write {}", a.out.display()))?;
    w.flush().runtime_ctx(|| format!("cannot write {}", a.out.display()))?;
    let fraud = rows.iter().filter(|r| r.is_fraud).count();
    println!(
        "wrote {} transactions ({fraud} fraudulent) to {}",
        rows.len(),
        a.out.display()
    );
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".spec.json");
    PathBuf::from(s)
}

pub fn ingest(a: IngestArgs) -> Result<(), Failure> {
    let rows = load_csv(&a.input).data_ctx(|| format!("cannot load {}", a.input.display()))?;
    let mut cfg = dsc_core::data::EngineerConfig::default();
    if let Some(s) = a.noise_scale {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Failure::usage(format!("noise scale {s} must be non-negative")));
        }
        cfg.noise_scale = s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let table = engineer_features(&rows, &cfg, &mut rng);
    let mut w = create(&a.out)?;
    table
        .write_csv(&mut w)
        .runtime_ctx(|| format!("cannot write {}", a.out.display()))?;
    w.flush().runtime_ctx(|| format!("cannot write {}", a.out.display()))?;
    let meta = FeatureMeta {
        features: table.names.clone(),
        units: "raw".into(),
        spec: FeatureSpec::for_table(&table),
    };
    write_json(&sidecar(&a.out), &meta)?;
    let fraud = table.labels.iter().filter(|&&y| y).count();
    println!(
        "engineered {} rows x {} features ({fraud} fraudulent) into {}",
        table.n_rows(),
        table.names.len(),
        a.out.display()
    );
    Ok(())
}

fn is_raw_csv(path: &Path) -> Result<bool, Failure> {
    let mut head = String::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).take(64 * 1024).read_to_string(&mut head))
        .data_ctx(|| format!("cannot read {}", path.display()))?;
    let header = head.lines().next().unwrap_or("");
    Ok(header.split(',').any(|c| c.trim().trim_matches('"') == "nameOrig"))
}

/// Loads the configured data and runs the split/scale/undersample pipeline.
/// Returns the dataset and its feature metadata in raw units.
pub fn build_dataset(rc: &RunConfig) -> Result<(Dataset, FeatureSpec), Failure> {
    let path = rc
        .data
        .as_ref()
        .ok_or_else(|| Failure::usage("no data path given (--data or `data` in the config)"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    let table = if is_raw_csv(path)? {
        let rows = load_csv(path).data_ctx(|| format!("cannot load {}", path.display()))?;
        engineer_features(&rows, &rc.engineer, &mut rng)
    } else {
        let f = File::open(path).data_ctx(|| format!("cannot open {}", path.display()))?;
        FeatureTable::read_csv(BufReader::new(f)).data_ctx(|| format!("cannot load {}", path.display()))?
    };
    let spec = FeatureSpec::for_table(&table);
    rc.split.validate().usage_ctx(|| "invalid split fractions")?;
    let mut ds = split_scale(&table, rc.split, &mut rng).data_ctx(|| "cannot split the data")?;
    if rc.undersample {
        undersample_train(&mut ds, &mut rng).data_ctx(|| "cannot balance the training split")?;
    }
    Ok((ds, spec))
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::ConfigInvalid(_) | TrainError::Gp(_) => Failure::Usage(e.into()),
        TrainError::DataInvalid(_) => Failure::Data(e.into()),
        _ => Failure::Runtime(anyhow::Error::from(e).context("training failed")),
    }
}

#[derive(Serialize)]
struct BestRecord<'a> {
    #[serde(flatten)]
    candidate: &'a dsc_core::trainer::Candidate,
    infix: String,
    threshold: f64,
}

pub fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut rc = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.data {
        rc.data = Some(v);
    }
    if let Some(v) = a.out {
        rc.out = Some(v);
    }
    if let Some(v) = a.seed {
        rc.seed = v;
    }
    let t = &mut rc.train;
    if let Some(v) = a.iterations {
        t.iterations = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.threshold {
        t.threshold = v;
    }
    if let Some(v) = a.epsilon {
        t.epsilon = v;
    }
    if let Some(v) = a.reward {
        t.reward = v;
    }
    if let Some(v) = a.generations {
        t.gp.generations = v;
    }
    if let Some(v) = a.population {
        t.gp.population_size = v;
    }
    if let Some(v) = a.credit {
        t.credit = v;
    }
    if let Some(v) = a.train_subsample {
        t.train_subsample = Some(v);
    }
    let rc = rc.finalize();
    rc.train.validate().map_err(train_failure)?;
    let out = rc
        .out
        .clone()
        .ok_or_else(|| Failure::usage("no output directory given (--out or `out` in the config)"))?;
    if rc.data.as_ref().is_some_and(|p| !p.exists()) {
        return Err(Failure::Data(anyhow::anyhow!(
            "data file {} does not exist",
            rc.data.as_ref().expect("checked").display()
        )));
    }
    fs::create_dir_all(&out).runtime_ctx(|| format!("cannot create {}", out.display()))?;
    write_text(&out.join("config.toml"), &rc.to_toml()?)?;

    let (ds, spec) = build_dataset(&rc)?;
    log::info!(
        "train {} rows ({} fraud), validation {} rows",
        ds.train.len(),
        ds.train.n_fraud(),
        ds.validation.len()
    );
    let result = run_training(&rc.train, &ds).map_err(train_failure)?;

    let mut w = create(&out.join("runlog.jsonl"))?;
    write_run_log(&result.log, &mut w).runtime_ctx(|| "cannot write run log")?;
    w.flush().runtime_ctx(|| "cannot write run log")?;
    let mut timing = String::new();
    for (i, s) in result.seconds.iter().enumerate() {
        timing.push_str(&format!("{{\"iteration\":{i},\"seconds\":{s}}}\n"));
    }
    write_text(&out.join("timings.jsonl"), &timing)?;

    let best_tree = result
        .best
        .tree(&result.library)
        .runtime_ctx(|| "cannot parse best expression")?;
    write_text(&out.join("best.txt"), &format!("{}\n", result.best.expression))?;
    write_json(
        &out.join("best.json"),
        &BestRecord {
            candidate: &result.best,
            infix: best_tree.render_infix(&result.library, ConstStyle::Fixed(4)),
            threshold: rc.train.threshold,
        },
    )?;
    let points = result.pareto_points();
    let mut w = create(&out.join("archive.tsv"))?;
    write_points(&points, &mut w).runtime_ctx(|| "cannot write archive")?;
    w.flush().runtime_ctx(|| "cannot write archive")?;
    let front = pareto_front(&points).runtime_ctx(|| "empty archive")?;
    let mut w = create(&out.join("front.tsv"))?;
    write_points(&front, &mut w).runtime_ctx(|| "cannot write front")?;
    w.flush().runtime_ctx(|| "cannot write front")?;
    let mut w = create(&out.join("policy.bin"))?;
    write_checkpoint(&result.policy, &mut w).runtime_ctx(|| "cannot write policy")?;
    w.flush().runtime_ctx(|| "cannot write policy")?;
    let scaled = spec
        .scaled(&ds.scaler)
        .runtime_ctx(|| "cannot scale feature metadata")?;
    write_json(
        &out.join("features.json"),
        &FeatureMeta {
            features: ds.feature_names.clone(),
            units: "standardised".into(),
            spec: scaled,
        },
    )?;

    println!(
        "best validation F1 {:.4} (complexity {}): {}",
        result.best.validation.f1,
        result.best.complexity,
        best_tree.render_infix(&result.library, ConstStyle::Fixed(4))
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

fn read_expression(inline: Option<String>, file: Option<&Path>) -> Result<Option<String>, Failure> {
    if let Some(e) = inline {
        return Ok(Some(e));
    }
    match file {
        Some(p) => {
            let text = fs::read_to_string(p).usage_ctx(|| format!("cannot read {}", p.display()))?;
            let line = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'));
            line.map(|l| Some(l.to_string()))
                .ok_or_else(|| Failure::usage(format!("{} holds no expression", p.display())))
        }
        None => Ok(None),
    }
}

#[derive(Debug, Serialize)]
struct EvalRecord {
    split: String,
    rows: usize,
    #[serde(flatten)]
    sweep: SweepRecord,
}

pub fn eval(a: EvalArgs) -> Result<(), Failure> {
    let config_path = match (&a.config, &a.run) {
        (Some(c), _) => c.clone(),
        (None, Some(r)) => r.join("config.toml"),
        (None, None) => return Err(Failure::usage("eval needs --run or --config")),
    };
    let mut rc = RunConfig::load(&config_path)?;
    if let Some(d) = a.data {
        rc.data = Some(d);
    }
    let default_file = a.run.as_ref().map(|r| r.join("best.txt"));
    let file = a.expression_file.as_deref().or(default_file.as_deref());
    let expr = read_expression(a.expression, file)?.ok_or_else(|| Failure::usage("no expression given"))?;
    let (ds, _) = build_dataset(&rc)?;
    let lib = rc.train.library(&ds.feature_names).map_err(train_failure)?;
    let tree = ExprTree::parse_line(&lib, &expr).usage_ctx(|| "cannot parse expression")?;
    let split = ds
        .split(&a.split)
        .ok_or_else(|| Failure::usage(format!("unknown split {:?}", a.split)))?;
    let thresholds: Vec<f64> = if a.sweep {
        SWEEP_THRESHOLDS.to_vec()
    } else {
        vec![a.threshold.unwrap_or(rc.train.threshold)]
    };
    let records = threshold_sweep(&tree, split, &thresholds).usage_ctx(|| "cannot evaluate")?;
    if !a.json {
        println!("expression: {}", tree.render_infix(&lib, ConstStyle::Fixed(4)));
        println!(
            "{:>9}  {:>10}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
            "threshold", "split", "flagged", "accuracy", "precision", "recall", "f1"
        );
    }
    for r in records {
        let m = r.metrics;
        if a.json {
            let rec = EvalRecord {
                split: a.split.clone(),
                rows: split.len(),
                sweep: r,
            };
            println!("{}", serde_json::to_string(&rec).runtime_ctx(|| "cannot serialise")?);
        } else {
            println!(
                "{:>9.2}  {:>10}  {:>9}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}",
                r.threshold, a.split, r.predicted_fraud, m.accuracy, m.precision, m.recall, m.f1
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ParetoReport<'a> {
    front: &'a [ParetoPoint],
    elbow: &'a ParetoPoint,
    min_gain: f64,
}

pub fn pareto(a: ParetoArgs) -> Result<(), Failure> {
    let path = match (a.archive, a.run) {
        (Some(p), _) => p,
        (None, Some(r)) => r.join("archive.tsv"),
        (None, None) => return Err(Failure::usage("pareto needs --archive or --run")),
    };
    let f = File::open(&path).data_ctx(|| format!("cannot open {}", path.display()))?;
    let points = read_points(BufReader::new(f)).data_ctx(|| format!("cannot read {}", path.display()))?;
    let front = pareto_front(&points).data_ctx(|| format!("no scored expressions in {}", path.display()))?;
    let knee = elbow(&front, a.min_gain).runtime_ctx(|| "empty front")?;
    if a.json {
        let report = ParetoReport {
            front: &front,
            elbow: knee,
            min_gain: a.min_gain,
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&report).runtime_ctx(|| "cannot serialise")?
        );
    } else {
        print!("{}", format_table(&front));
        println!(
            "elbow (min gain {}): complexity {}, f1 {:.4}: {}",
            a.min_gain, knee.complexity, knee.f1, knee.expression
        );
    }
    Ok(())
}

fn default_meta() -> FeatureMeta {
    FeatureMeta {
        features: engineered_feature_names(),
        units: "raw".into(),
        spec: FeatureSpec::paysim(),
    }
}

pub fn explain(a: ExplainArgs) -> Result<(), Failure> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Failure::usage(format!("threshold {} is outside (0, 1)", a.threshold)));
    }
    let meta: FeatureMeta = match (&a.run, &a.spec) {
        (Some(r), _) => read_meta(&r.join("features.json"))?,
        (None, Some(p)) => read_meta(p)?,
        (None, None) => default_meta(),
    };
    let default_file = a.run.as_ref().map(|r| r.join("best.txt"));
    let file = a.expression_file.as_deref().or(default_file.as_deref());
    let expr = read_expression(a.expression, file)?.ok_or_else(|| Failure::usage("no expression given"))?;
    let lib = Library::standard(&meta.features).usage_ctx(|| "invalid feature list")?;
    let tree = ExprTree::parse_line(&lib, &expr).usage_ctx(|| "cannot parse expression")?;
    let opts = RuleOptions {
        boundary: if a.strict {
            Boundary::Strict
        } else {
            Boundary::Inclusive
        },
    };
    let rules = extract_rules(&tree, &lib, a.threshold, &meta.spec, opts).runtime_ctx(|| "cannot derive rules")?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rules).runtime_ctx(|| "cannot serialise")?
        );
    } else {
        println!("expression: {}", tree.render_infix(&lib, ConstStyle::Fixed(4)));
        println!("features in {} units", meta.units);
        print!("{}", rules.to_text());
    }
    Ok(())
}

fn read_meta(path: &Path) -> Result<FeatureMeta, Failure> {
    let text = fs::read_to_string(path).usage_ctx(|| format!("cannot read {}", path.display()))?;
    let meta: FeatureMeta =
        serde_json::from_str(&text).usage_ctx(|| format!("invalid feature metadata {}", path.display()))?;
    if meta.features.is_empty() {
        return Err(Failure::usage(format!("{} lists no features", path.display())));
    }
    Ok(meta)
}
