//! Stratified k-fold experiments over the orig / aug / aug-qual arms.
//!
//! Each fold's split is handed to an [`Augmenter`] by value and must come
//! back with a validation set whose hash matches the one taken before the
//! hand-off. Featurizers are fit on the (possibly augmented) training rows
//! only.

mod folds;
mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{augment_dataset, AugmentConfig, AugmentDiagnostics, AugmentModels};
use crate::corpus::LabeledDataset;
use crate::embeddings::{DocEmbeddingModel, EmbeddingModel};
use crate::error::{Error, Result};
use crate::features::{EmbeddingSource, FeatureMethod, FeatureSpec, DEFAULT_MAX_FEATURES};
use crate::models::{Classifier, ClassifierKind, TrainOptions};
use crate::rng::derive_seed;

pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{confusion_matrix, mean_std, per_class_metrics, weighted_f1, ClassMetrics};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "orig")]
    Orig,
    #[serde(rename = "aug")]
    Aug,
    #[serde(rename = "aug-qual")]
    AugQual,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Orig, Arm::Aug, Arm::AugQual];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Orig => "orig",
            Arm::Aug => "aug",
            Arm::AugQual => "aug-qual",
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig" => Ok(Arm::Orig),
            "aug" => Ok(Arm::Aug),
            "aug-qual" | "aug_qual" => Ok(Arm::AugQual),
            _ => Err(Error::config(format!("unknown arm `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
}

/// Produces the training set for one (fold, arm). Implementations receive
/// the whole split by value and must return it; the harness rejects any
/// change to the validation half.
pub trait Augmenter: Sync {
    fn augment(&self, arm: Arm, split: FoldSplit, cfg: &AugmentConfig) -> Result<(FoldSplit, Option<AugmentDiagnostics>)>;
}

/// No augmentation in any arm.
pub struct Identity;

impl Augmenter for Identity {
    fn augment(&self, _: Arm, split: FoldSplit, _: &AugmentConfig) -> Result<(FoldSplit, Option<AugmentDiagnostics>)> {
        Ok((split, None))
    }
}

/// Word-replacement augmentation. `aug` skips the quality gate but still
/// measures similarities when a document model is present; `aug-qual`
/// requires the document model.
pub struct EmbeddingAugmenter {
    pub words: Arc<EmbeddingModel>,
    pub docs: Option<Arc<DocEmbeddingModel>>,
}

impl Augmenter for EmbeddingAugmenter {
    fn augment(&self, arm: Arm, split: FoldSplit, cfg: &AugmentConfig) -> Result<(FoldSplit, Option<AugmentDiagnostics>)> {
        if arm == Arm::Orig {
            return Ok((split, None));
        }
        let models = AugmentModels {
            words: &self.words,
            docs: self.docs.as_deref(),
        };
        let cfg = AugmentConfig {
            quality_check: arm == Arm::AugQual,
            ..cfg.clone()
        };
        let (train, diag) = augment_dataset(&split.train, models, &cfg)?;
        Ok((
            FoldSplit {
                train,
                validation: split.validation,
            },
            Some(diag),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub seed: u64,
    pub arms: Vec<Arm>,
    pub features: Vec<FeatureMethod>,
    pub classifiers: Vec<ClassifierKind>,
    pub max_features: usize,
    /// Base augmentation settings; the seed is replaced per fold and the
    /// quality flag per arm.
    pub augment: AugmentConfig,
    pub train_options: BTreeMap<ClassifierKind, TrainOptions>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 5,
            seed: 1,
            arms: Arm::ALL.to_vec(),
            features: vec![FeatureMethod::Tfidf],
            classifiers: vec![ClassifierKind::Logreg],
            max_features: DEFAULT_MAX_FEATURES,
            augment: AugmentConfig::default(),
            train_options: ClassifierKind::ALL
                .into_iter()
                .map(|k| (k, TrainOptions::for_kind(k)))
                .collect(),
        }
    }
}

impl ExperimentConfig {
    fn options(&self, kind: ClassifierKind) -> TrainOptions {
        let mut opts = self.train_options.get(&kind).cloned().unwrap_or_else(|| TrainOptions::for_kind(kind));
        opts.seed = self.seed;
        opts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows and columns follow the report's `labels`.
    pub confusion: Vec<Vec<u64>>,
}

/// Results of one (arm, feature, classifier) cell across all folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub arm: Arm,
    pub feature: FeatureMethod,
    pub classifier: ClassifierKind,
    pub per_fold: Vec<FoldResult>,
    pub mean_f1: f64,
    /// Population standard deviation over folds.
    pub std_f1: f64,
}

impl EvalReport {
    /// Confusion matrices summed over folds.
    pub fn total_confusion(&self) -> Vec<Vec<u64>> {
        let n = self.per_fold.first().map_or(0, |f| f.confusion.len());
        let mut total = vec![vec![0; n]; n];
        for f in &self.per_fold {
            for (row, frow) in total.iter_mut().zip(&f.confusion) {
                for (t, v) in row.iter_mut().zip(frow) {
                    *t += v;
                }
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: Arm,
    /// Per-fold augmentation diagnostics; absent when nothing was augmented.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<Vec<AugmentDiagnostics>>,
    /// Mean similarity over all accepted copies in all folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_accepted_similarity: Option<f64>,
    pub cells: Vec<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub stratified: bool,
    pub config: ExperimentConfig,
    pub labels: Vec<String>,
    pub fold_sizes: Vec<usize>,
    pub arms: Vec<ArmReport>,
}

impl ExperimentReport {
    pub fn cell(&self, arm: Arm, feature: FeatureMethod, classifier: ClassifierKind) -> Option<&EvalReport> {
        self.arms
            .iter()
            .find(|a| a.name == arm)?
            .cells
            .iter()
            .find(|c| c.feature == feature && c.classifier == classifier)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `arm,feature,classifier,fold,f1`, one row per fold.
    pub fn tidy_csv(&self) -> String {
        let mut out = String::from("arm,feature,classifier,fold,f1\n");
        for arm in &self.arms {
            for cell in &arm.cells {
                for f in &cell.per_fold {
                    writeln!(out, "{},{},{},{},{}", arm.name, cell.feature, cell.classifier, f.fold, f.weighted_f1).unwrap();
                }
            }
        }
        out
    }

    /// Label header row, then one row of counts per true label.
    pub fn confusion_csv(&self, cell: &EvalReport) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for row in cell.total_confusion() {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `report.json`, `folds.csv` and one
    /// `confusion_{arm}_{feature}_{classifier}.csv` per cell into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: String, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))
        };
        write("report.json".into(), self.to_json()?)?;
        write("folds.csv".into(), self.tidy_csv())?;
        for arm in &self.arms {
            for cell in &arm.cells {
                write(
                    format!("confusion_{}_{}_{}.csv", arm.name, cell.feature, cell.classifier),
                    self.confusion_csv(cell),
                )?;
            }
        }
        Ok(())
    }
}

fn dataset_hash(data: &LabeledDataset) -> [u8; 32] {
    let mut h = Sha256::new();
    for r in data.records() {
        h.update(r.label.as_bytes());
        h.update(b"\t");
        h.update(r.sentence.text().as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

struct FoldArmOutput {
    diagnostics: Option<AugmentDiagnostics>,
    cells: Vec<FoldResult>,
}

#[allow(clippy::too_many_arguments)]
fn run_fold_arm(
    data: &LabeledDataset,
    plan: &FoldPlan,
    fold: usize,
    arm: Arm,
    cfg: &ExperimentConfig,
    augmenter: &dyn Augmenter,
    embeddings: Option<&Arc<EmbeddingModel>>,
) -> Result<FoldArmOutput> {
    let validation = data.subset(&plan.validation_indices(fold))?;
    let expected = dataset_hash(&validation);
    let split = FoldSplit {
        train: data.subset(&plan.training_indices(fold))?,
        validation,
    };
    let aug_cfg = AugmentConfig {
        seed: derive_seed(cfg.seed, fold as u64),
        ..cfg.augment.clone()
    };
    let (split, diagnostics) = augmenter.augment(arm, split, &aug_cfg)?;
    if dataset_hash(&split.validation) != expected {
        return Err(Error::ValidationMutated {
            fold,
            arm: arm.name().to_string(),
        });
    }

    let train_sentences = split.train.sentences();
    let train_labels = split.train.label_column();
    let val_sentences = split.validation.sentences();
    let val_labels = split.validation.label_column();
    let mut cells = Vec::with_capacity(cfg.features.len() * cfg.classifiers.len());
    for &method in &cfg.features {
        let mut spec = FeatureSpec::new(method).with_max_features(cfg.max_features);
        if let Some(m) = embeddings {
            spec = spec.with_embeddings(EmbeddingSource::Model(Arc::clone(m)));
        }
        let fitted = spec.fit(&train_sentences)?;
        let x_train = fitted.transform(&train_sentences)?;
        let x_val = fitted.transform(&val_sentences)?;
        for &kind in &cfg.classifiers {
            let clf = Classifier::fit(kind, &x_train, &train_labels, &cfg.options(kind))?;
            let predicted = clf.predict(&x_val)?;
            let per_class = per_class_metrics(&val_labels, &predicted)?;
            cells.push(FoldResult {
                fold,
                train_size: split.train.len(),
                validation_size: split.validation.len(),
                weighted_f1: metrics::weighted_from(&per_class, val_labels.len()),
                per_class,
                confusion: confusion_matrix(&val_labels, &predicted, data.labels())?,
            });
        }
    }
    Ok(FoldArmOutput { diagnostics, cells })
}

/// Runs every (arm, fold, feature, classifier) combination. Fold/arm pairs
/// run on the current rayon pool; the report does not depend on the thread
/// count.
pub fn run_experiment(
    data: &LabeledDataset,
    cfg: &ExperimentConfig,
    augmenter: &dyn Augmenter,
    embeddings: Option<Arc<EmbeddingModel>>,
) -> Result<ExperimentReport> {
    cfg.augment.validate()?;
    if cfg.arms.is_empty() || cfg.features.is_empty() || cfg.classifiers.is_empty() {
        return Err(Error::config("arms, features and classifiers must be non-empty"));
    }
    let plan = stratified_kfold(data, cfg.k, cfg.seed)?;
    let jobs: Vec<(Arm, usize)> = cfg.arms.iter().flat_map(|&a| (0..cfg.k).map(move |f| (a, f))).collect();
    let outputs: Vec<FoldArmOutput> = jobs
        .par_iter()
        .map(|&(arm, fold)| {
            run_fold_arm(data, &plan, fold, arm, cfg, augmenter, embeddings.as_ref()).map_err(|e| match e {
                e @ Error::ValidationMutated { .. } => e,
                e => Error::InFold {
                    fold,
                    source: Box::new(e),
                },
            })
        })
        .collect::<Result<_>>()?;

    let mut outputs = outputs.into_iter();
    let mut arms = Vec::with_capacity(cfg.arms.len());
    for &arm in &cfg.arms {
        let fold_outputs: Vec<FoldArmOutput> = outputs.by_ref().take(cfg.k).collect();
        let mut cells = Vec::new();
        let mut idx = 0;
        for &feature in &cfg.features {
            for &classifier in &cfg.classifiers {
                let per_fold: Vec<FoldResult> = fold_outputs.iter().map(|o| o.cells[idx].clone()).collect();
                let scores: Vec<f64> = per_fold.iter().map(|f| f.weighted_f1).collect();
                let (mean_f1, std_f1) = mean_std(&scores);
                cells.push(EvalReport {
                    arm,
                    feature,
                    classifier,
                    per_fold,
                    mean_f1,
                    std_f1,
                });
                idx += 1;
            }
        }
        let diagnostics: Option<Vec<AugmentDiagnostics>> =
            fold_outputs.iter().map(|o| o.diagnostics.clone()).collect();
        let mean_accepted_similarity = diagnostics.as_ref().and_then(|ds| {
            let weighted: Vec<(f64, usize)> = ds
                .iter()
                .filter_map(|d| d.mean_similarity.map(|m| (m, d.accepted)))
                .collect();
            let n: usize = weighted.iter().map(|w| w.1).sum();
            (n > 0).then(|| weighted.iter().map(|(m, c)| m * *c as f64).sum::<f64>() / n as f64)
        });
        arms.push(ArmReport {
            name: arm,
            augmentation: diagnostics,
            mean_accepted_similarity,
            cells,
        });
    }

    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        stratified: true,
        config: cfg.clone(),
        labels: data.labels().to_vec(),
        fold_sizes: plan.fold_sizes(),
        arms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Record};

    fn toy() -> LabeledDataset {
        let mut records = Vec::new();
        for i in 0..12 {
            records.push(Record {
                sentence: tokenize(&format!("goal match team w{i}")).unwrap(),
                label: "sport".into(),
            });
            records.push(Record {
                sentence: tokenize(&format!("vote party election w{i}")).unwrap(),
                label: "politics".into(),
            });
        }
        LabeledDataset::new(records).unwrap()
    }

    struct Tamper;

    impl Augmenter for Tamper {
        fn augment(&self, arm: Arm, mut split: FoldSplit, _: &AugmentConfig) -> Result<(FoldSplit, Option<AugmentDiagnostics>)> {
            if arm == Arm::Aug {
                let mut records = split.validation.into_records();
                records[0].label = if records[0].label == "sport" { "politics".into() } else { "sport".into() };
                split.validation = LabeledDataset::new(records)?;
            }
            Ok((split, None))
        }
    }

    #[test]
    fn separable_toy_scores_perfectly() {
        let cfg = ExperimentConfig {
            arms: vec![Arm::Orig],
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&toy(), &cfg, &Identity, None).unwrap();
        let cell = report.cell(Arm::Orig, FeatureMethod::Tfidf, ClassifierKind::Logreg).unwrap();
        assert_eq!(cell.per_fold.len(), 5);
        assert_eq!(cell.mean_f1, 1.0);
        assert_eq!(cell.std_f1, 0.0);
        assert!(report.arms[0].augmentation.is_none());
        let total: u64 = cell.total_confusion().iter().flatten().sum();
        assert_eq!(total, 24);
    }

    #[test]
    fn tampering_is_detected() {
        let cfg = ExperimentConfig::default();
        let err = run_experiment(&toy(), &cfg, &Tamper, None).unwrap_err();
        assert!(matches!(err, Error::ValidationMutated { arm, .. } if arm == "aug"));
    }

    #[test]
    fn component_errors_carry_the_fold() {
        let cfg = ExperimentConfig {
            features: vec![FeatureMethod::W2vMean],
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_experiment(&toy(), &cfg, &Identity, None), Err(Error::InFold { .. })));
    }

    #[test]
    fn tidy_csv_matches_report() {
        let cfg = ExperimentConfig {
            arms: vec![Arm::Orig, Arm::Aug],
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&toy(), &cfg, &Identity, None).unwrap();
        let csv = report.tidy_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 5);
        assert!(csv.starts_with("arm,feature,classifier,fold,f1\norig,tfidf,logreg,0,"));
        let conf = report.confusion_csv(&report.arms[0].cells[0]);
        assert!(conf.starts_with("politics,sport\n"));
    }

    #[test]
    fn arm_names_round_trip() {
        for arm in Arm::ALL {
            assert_eq!(arm.name().parse::<Arm>().unwrap(), arm);
            assert_eq!(serde_json::to_string(&arm).unwrap(), format!("\"{}\"", arm.name()));
        }
    }
}
