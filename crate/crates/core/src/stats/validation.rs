use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{select_k_best, train_classifier, ClassifierConfig, ClassifierKind, MeanStd, MosatsAssessment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Mean score rounded half up, 1 to 5.
    MulticlassMosats,
    /// Novice (0) or expert (1).
    BinarySkill,
}

impl Task {
    pub fn labels(self, assessments: &[MosatsAssessment]) -> Vec<usize> {
        assessments
            .iter()
            .map(|a| match self {
                Task::MulticlassMosats => a.mean_rounded() as usize,
                Task::BinarySkill => a.skill_label.as_index(),
            })
            .collect()
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "multiclass" | "multiclass_mosats" | "multi" => Ok(Self::MulticlassMosats),
            "binary" | "binary_skill" => Ok(Self::BinarySkill),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::MulticlassMosats => "multiclass_mosats",
            Task::BinarySkill => "binary_skill",
        })
    }
}

/// Accuracy of always predicting the most frequent label, in percent.
pub fn dominant_class_baseline(labels: &[usize]) -> Option<f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let best = counts.values().max()?;
    Some(100.0 * *best as f64 / labels.len() as f64)
}

/// Deterministic video-to-fold assignment that spreads every label across
/// folds: samples are ordered by label and dealt round-robin.
pub fn stratified_folds(labels: &[usize], folds: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| (labels[i], i));
    let mut out = vec![0; labels.len()];
    for (slot, i) in order.into_iter().enumerate() {
        out[i] = slot % folds.max(1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kind: ClassifierKind,
    pub k_features: usize,
    /// Percent accuracy per fold; `None` for skipped folds.
    pub fold_accuracy: Vec<Option<f64>>,
    /// Selected feature indices per fold, best first.
    pub selected: Vec<Vec<usize>>,
    pub skipped: Vec<usize>,
    /// Mean ± population std over evaluated folds.
    pub accuracy: Option<MeanStd>,
}

/// Leave-one-fold-out evaluation. Feature selection and the classifier are
/// fitted on the training folds only. Folds whose training part holds a
/// single class, or whose test part is empty, are skipped with a warning.
pub fn cross_validate(
    x: &DMatrix<f64>,
    labels: &[usize],
    folds: &[usize],
    kind: ClassifierKind,
    k_features: usize,
    config: &ClassifierConfig,
) -> Result<CvReport> {
    if x.nrows() != labels.len() || labels.len() != folds.len() {
        return Err(Error::InvalidInput(
            "features, labels and folds must have equal length".into(),
        ));
    }
    let fold_ids: BTreeSet<usize> = folds.iter().copied().collect();
    let mut report = CvReport {
        kind,
        k_features,
        fold_accuracy: Vec::new(),
        selected: Vec::new(),
        skipped: Vec::new(),
        accuracy: None,
    };
    for &fold in &fold_ids {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == fold).collect();
        let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let classes: BTreeSet<usize> = train_y.iter().copied().collect();
        if classes.len() < 2 || test.is_empty() {
            log::warn!("fold {fold}: training data has a single class, skipped");
            report.fold_accuracy.push(None);
            report.selected.push(Vec::new());
            report.skipped.push(fold);
            continue;
        }
        let train_x = x.select_rows(&train);
        let selection = select_k_best(&train_x, &train_y, k_features)?;
        let mut columns = selection.indices.clone();
        columns.sort_unstable();
        let model = train_classifier(kind, &train_x.select_columns(&columns), &train_y, config)?;
        let predicted = model.predict_all(&x.select_rows(&test).select_columns(&columns))?;
        let correct = predicted
            .iter()
            .zip(&test)
            .filter(|(p, &i)| **p == labels[i])
            .count();
        report.fold_accuracy.push(Some(100.0 * correct as f64 / test.len() as f64));
        report.selected.push(selection.indices);
    }
    let scored: Vec<f64> = report.fold_accuracy.iter().flatten().copied().collect();
    report.accuracy = MeanStd::of(&scored);
    Ok(report)
}
