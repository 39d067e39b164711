use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::bins::{bin_by_timeline_length, BinReport, PredictionRecord};
use super::folds::{split, user_overlap, FoldPlan, SplitMode};
use super::metrics::{metrics_from_confusion, micro_macro, ConfusionMatrix, MetricsReport};
use crate::corpus::{Dataset, Tweet};
use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt_with_classes, predict_class, GbdtConfig};
use crate::profile::{featurize_all, ProfileMode};
use crate::recurrent::{extract_embeddings, train_recurrent, RecurrentConfig, RecurrentModel};
use crate::rng::derive_seed;
use crate::text::{build_vocab, load_pretrained_embeddings, tokenize, EmbeddingMatrix, Vocabulary};

const SPLIT_TAG: u64 = 1;
const FOLD_TAG_BASE: u64 = 1000;
const EMBED_TAG: u64 = 1;
const RECURRENT_TAG: u64 = 2;
const GBDT_TAG: u64 = 3;

/// Everything but the dataset, profile mode and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub split: SplitMode,
    pub k: usize,
    /// Minimum training-fold frequency for a token to enter the vocabulary.
    pub min_count: usize,
    /// Optional GloVe-style text file of pretrained vectors.
    pub embeddings: Option<PathBuf>,
    pub recurrent: RecurrentConfig,
    pub gbdt: GbdtConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split: SplitMode::ByTweet,
            k: 10,
            min_count: 1,
            embeddings: None,
            recurrent: RecurrentConfig::default(),
            gbdt: GbdtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub vocab_size: usize,
    /// Users present in both the training and the test side.
    pub shared_users: usize,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: ProfileMode,
    pub split: SplitMode,
    pub k: usize,
    pub seed: u64,
    pub classes: Vec<String>,
    pub metrics: MetricsReport,
    pub bins: BinReport,
    pub folds: Vec<FoldReport>,
    /// In dataset order.
    pub predictions: Vec<PredictionRecord>,
}

/// Phase one on a set of training tweets: builds the vocabulary from their
/// texts, initialises embeddings and fine-tunes them with the recurrent
/// classifier.
pub fn train_phase_one(
    train: &[&Tweet],
    n_classes: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Vocabulary, RecurrentModel)> {
    let texts: Vec<&str> = train.iter().map(|t| t.text.as_str()).collect();
    let vocab = build_vocab(&texts, config.min_count)?;
    let dim = config.recurrent.embed_dim;
    let embed_seed = derive_seed(seed, EMBED_TAG);
    let init = match &config.embeddings {
        Some(path) => load_pretrained_embeddings(path, &vocab, dim, embed_seed)?,
        None => EmbeddingMatrix::random(vocab.len(), dim, embed_seed),
    };
    let rec_config = RecurrentConfig {
        n_classes,
        seed: derive_seed(seed, RECURRENT_TAG),
        ..config.recurrent.clone()
    };
    let examples: Vec<(Vec<usize>, usize)> = train
        .iter()
        .map(|t| (vocab.encode(&tokenize(&t.text)), t.label))
        .collect();
    let model = train_recurrent(&examples, &rec_config, &init)?;
    Ok((vocab, model))
}

fn gbdt_config(config: &ExperimentConfig, seed: u64) -> GbdtConfig {
    GbdtConfig {
        seed: derive_seed(seed, GBDT_TAG),
        ..config.gbdt.clone()
    }
}

struct FoldOutcome {
    test: Vec<usize>,
    preds: Vec<Vec<usize>>,
    n_train: usize,
    vocab_size: usize,
    shared_users: usize,
}

fn run_fold(
    dataset: &Dataset,
    plan: &FoldPlan,
    fold: usize,
    modes: &[ProfileMode],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let tweets = dataset.tweets();
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let fold_seed = derive_seed(seed, FOLD_TAG_BASE + fold as u64);
    let train: Vec<&Tweet> = train_idx.iter().map(|&i| &tweets[i]).collect();
    let n_classes = dataset.scheme().n_classes();
    let (vocab, model) = train_phase_one(&train, n_classes, config, fold_seed)?;
    let emb = extract_embeddings(&model);

    let train_tweets: Vec<Tweet> = train.iter().map(|&t| t.clone()).collect();
    let test_tweets: Vec<Tweet> = test_idx.iter().map(|&i| tweets[i].clone()).collect();
    let labels: Vec<usize> = train_tweets.iter().map(|t| t.label).collect();
    let gbdt_cfg = gbdt_config(config, fold_seed);
    let mut preds = Vec::with_capacity(modes.len());
    for &mode in modes {
        let x_train = featurize_all(&train_tweets, dataset.timelines(), mode, &vocab, &emb);
        let gbdt = fit_gbdt_with_classes(&x_train, &labels, n_classes, &gbdt_cfg)?;
        let x_test = featurize_all(&test_tweets, dataset.timelines(), mode, &vocab, &emb);
        preds.push(
            x_test
                .iter()
                .map(|x| predict_class(&gbdt, x))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(FoldOutcome {
        shared_users: user_overlap(dataset, plan, fold),
        test: test_idx,
        preds,
        n_train: train_idx.len(),
        vocab_size: vocab.len(),
    })
}

/// Cross-validates the two-phase model once per profile mode. Phase one is
/// trained once per fold and shared by all modes, so each mode's report is
/// identical to a separate [`run_experiment`] call.
pub fn run_experiment_modes(
    dataset: &Dataset,
    modes: &[ProfileMode],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<ExperimentReport>> {
    if modes.is_empty() {
        return Err(Error::Input("no profile modes requested".into()));
    }
    let dataset = dataset.drop_rare_classes(config.k)?;
    let classes = dataset.scheme().classes().to_vec();
    if classes.len() < 2 {
        return Err(Error::Input(format!(
            "fewer than 2 classes have at least k = {} tweets",
            config.k
        )));
    }
    let plan = split(&dataset, config.split, config.k, derive_seed(seed, SPLIT_TAG))?;
    let tweets = dataset.tweets();
    let n_classes = classes.len();

    let mut cms = vec![ConfusionMatrix::new(n_classes); modes.len()];
    let mut folds = vec![Vec::with_capacity(config.k); modes.len()];
    let mut predictions: Vec<Vec<Option<PredictionRecord>>> = vec![vec![None; tweets.len()]; modes.len()];
    for fold in 0..config.k {
        let outcome = run_fold(&dataset, &plan, fold, modes, config, seed).map_err(|e| e.in_fold(fold))?;
        for (m, preds) in outcome.preds.iter().enumerate() {
            let mut fold_cm = ConfusionMatrix::new(n_classes);
            for (&i, &pred) in outcome.test.iter().zip(preds) {
                let t = &tweets[i];
                fold_cm.add(t.label, pred);
                predictions[m][i] = Some(PredictionRecord {
                    id: t.id.clone(),
                    user_id: t.user_id.clone(),
                    fold,
                    gold: t.label,
                    pred,
                    timeline_len: dataset.timeline(&t.user_id).map_or(0, |tl| tl.len()),
                });
            }
            cms[m].merge(&fold_cm);
            let (micro, macro_avg) = micro_macro(&fold_cm);
            folds[m].push(FoldReport {
                fold,
                n_train: outcome.n_train,
                n_test: outcome.test.len(),
                vocab_size: outcome.vocab_size,
                shared_users: outcome.shared_users,
                micro_f1: micro.f1,
                macro_f1: macro_avg.f1,
            });
        }
    }

    modes
        .iter()
        .zip(cms)
        .zip(folds)
        .zip(predictions)
        .map(|(((&mode, cm), folds), preds)| {
            let predictions: Vec<PredictionRecord> = preds
                .into_iter()
                .map(|p| p.expect("folds partition the dataset"))
                .collect();
            Ok(ExperimentReport {
                mode,
                split: config.split,
                k: config.k,
                seed,
                metrics: metrics_from_confusion(&cm, &classes)?,
                bins: bin_by_timeline_length(&predictions, n_classes)?,
                classes: classes.clone(),
                folds,
                predictions,
            })
        })
        .collect()
}

/// Cross-validates the two-phase model in one profile mode.
pub fn run_experiment(
    dataset: &Dataset,
    mode: ProfileMode,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    Ok(run_experiment_modes(dataset, &[mode], config, seed)?.remove(0))
}
