use std::io::Write as _;
use std::path::{Path, PathBuf};

use userprior::corpus::{
    activity_distribution, distribution_tsv, fuse_datasets, infer_scheme, load_dataset,
    load_timelines, synth_corpus, write_dataset, write_timelines, Dataset, LabelScheme, SynthConfig,
};
use userprior::eval::{bin_by_timeline_length, load_predictions, run_experiment, train_phase_one};
use userprior::gbdt::fit_gbdt_with_classes;
use userprior::output::write_atomic;
use userprior::profile::{featurize_all, write_features_tsv};
use userprior::recurrent::{extract_embeddings, save_checkpoint};
use userprior::Error;

use crate::config::RunConfig;

pub enum Failure {
    /// Bad invocation or unusable config; exit status 2.
    Usage(String),
    /// Anything that fails while running; exit status 1.
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn emit(output: Option<&Path>, contents: &str) -> CmdResult {
    match output {
        Some(path) => write_atomic(path, contents.as_bytes())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(())
}

pub fn synth(config: Option<&Path>, out_dir: &Path, seed: Option<u64>) -> CmdResult {
    let mut cfg = match config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<SynthConfig>(&raw)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dataset = synth_corpus(&cfg)?;
    create_dir(out_dir)?;
    write_dataset(&out_dir.join("tweets.jsonl"), &dataset)?;
    write_timelines(&out_dir.join("timelines.jsonl"), dataset.timelines())?;
    Ok(())
}

fn scheme_for(path: &Path, scheme: Option<&str>) -> Result<LabelScheme, Error> {
    match scheme {
        Some(name) => LabelScheme::builtin(name),
        None => infer_scheme(path, "inferred"),
    }
}

pub fn dist(input: &Path, hate_class: Option<&str>, scheme: Option<&str>, output: Option<&Path>) -> CmdResult {
    let scheme = scheme_for(input, scheme)?;
    let dataset = load_dataset(input, &scheme)?;
    let dist = activity_distribution(&dataset, hate_class)?;
    emit(output, &distribution_tsv(&dist))
}

pub struct FuseInputs<'a> {
    pub base: &'a Path,
    pub base_scheme: &'a str,
    pub base_timelines: Option<&'a Path>,
    pub donor: &'a Path,
    pub donor_scheme: &'a str,
    pub donor_timelines: Option<&'a Path>,
    pub hate_class: &'a str,
    pub cap: usize,
    pub out_dir: &'a Path,
}

fn load_with_timelines(path: &Path, scheme: &str, timelines: Option<&Path>) -> Result<Dataset, Error> {
    let dataset = load_dataset(path, &LabelScheme::builtin(scheme)?)?;
    Ok(match timelines {
        Some(t) => dataset.with_timelines(load_timelines(t)?),
        None => dataset,
    })
}

pub fn fuse(args: &FuseInputs) -> CmdResult {
    let base = load_with_timelines(args.base, args.base_scheme, args.base_timelines)?;
    let donor = load_with_timelines(args.donor, args.donor_scheme, args.donor_timelines)?;
    let fused = fuse_datasets(&base, &donor, args.hate_class, args.cap)?;
    create_dir(args.out_dir)?;
    write_dataset(&args.out_dir.join("tweets.jsonl"), &fused)?;
    if !fused.timelines().is_empty() {
        write_timelines(&args.out_dir.join("timelines.jsonl"), fused.timelines())?;
    }
    Ok(())
}

/// Loads a run config, applying command-line overrides.
pub fn run_config(path: &Path, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<RunConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    let mut cfg = RunConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    Ok(cfg)
}

/// Fits both phases on every tweet and writes `recurrent.json`, `gbdt.json`
/// and, when requested, `features.tsv`.
pub fn train(cfg: &RunConfig) -> CmdResult {
    let dataset = cfg.load_dataset()?;
    let n_classes = dataset.scheme().n_classes();
    let tweets: Vec<_> = dataset.tweets().iter().collect();
    let (vocab, model) = train_phase_one(&tweets, n_classes, &cfg.experiment, cfg.seed)?;
    let emb = extract_embeddings(&model);
    let features = featurize_all(dataset.tweets(), dataset.timelines(), cfg.mode, &vocab, &emb);
    let labels: Vec<usize> = dataset.tweets().iter().map(|t| t.label).collect();
    let gbdt = fit_gbdt_with_classes(&features, &labels, n_classes, &cfg.experiment.gbdt)?;

    create_dir(&cfg.out_dir)?;
    save_checkpoint(&cfg.out_dir.join("recurrent.json"), &model, &vocab)?;
    write_atomic(&cfg.out_dir.join("gbdt.json"), (gbdt.to_json()? + "\n").as_bytes())?;
    if cfg.export_features {
        write_features_tsv(&cfg.out_dir.join("features.tsv"), dataset.tweets(), &features)?;
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> CmdResult {
    let dataset = cfg.load_dataset()?;
    let report = run_experiment(&dataset, cfg.mode, &cfg.experiment, cfg.seed)?;
    report.write(&cfg.out_dir)?;
    Ok(())
}

pub fn bins(predictions: &Path, scheme: &str, output: Option<&Path>) -> CmdResult {
    let scheme = LabelScheme::builtin(scheme).map_err(|e| Failure::Usage(e.to_string()))?;
    let records = load_predictions(predictions, &scheme)?;
    let report = bin_by_timeline_length(&records, scheme.n_classes())?;
    emit(output, &report.to_tsv())
}
