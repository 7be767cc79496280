//! Correlation, agreement, feature selection and skill classification.

mod classify;
mod folds;
mod mosats;
mod validation;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use classify::{train_classifier, ClassifierConfig, ClassifierKind, ClassifierModel};
pub use folds::{build_folds, FoldConfig, FoldSpec, ImageRef, VideoCounts};
pub use mosats::{correlate, CorrelationTable, MosatsAssessment, SkillLabel, ASPECTS};
pub use validation::{cross_validate, dominant_class_baseline, stratified_folds, CvReport, Task};

use crate::error::{Error, Result};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}±{:.1}", self.mean, self.std)
    }
}

/// Sample Pearson correlation. `Ok(None)` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "correlation needs at least two points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Cohen's kappa from a square confusion matrix (rows: rater A).
/// When chance agreement is 1 both raters used one identical category and
/// kappa is defined as 1.
pub fn cohen_kappa_from_confusion(confusion: &[Vec<u64>]) -> Result<f64> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput("confusion matrix must be square".into()));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InvalidInput("no ratings".into()));
    }
    let n = total as f64;
    let observed = (0..k).map(|i| confusion[i][i]).sum::<u64>() as f64 / n;
    let expected = (0..k)
        .map(|i| {
            let row: u64 = confusion[i].iter().sum();
            let col: u64 = confusion.iter().map(|r| r[i]).sum();
            row as f64 * col as f64
        })
        .sum::<f64>()
        / (n * n);
    if expected >= 1.0 {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Cohen's kappa between two raters' categorical labels.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput(
            "ratings must be non-empty and of equal length".into(),
        ));
    }
    let mut categories: BTreeMap<&T, usize> = BTreeMap::new();
    for v in a.iter().chain(b) {
        let next = categories.len();
        categories.entry(v).or_insert(next);
    }
    let k = categories.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (x, y) in a.iter().zip(b) {
        confusion[categories[x]][categories[y]] += 1;
    }
    cohen_kappa_from_confusion(&confusion)
}

/// One-way ANOVA F statistic of `values` grouped by `labels`.
///
/// Zero within-group and zero between-group variation gives 0; zero within
/// and nonzero between gives `f64::INFINITY`.
pub fn anova_f(values: &[f64], labels: &[usize]) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::InvalidInput("values and labels differ in length".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ANOVA input"));
    }
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&v, &l) in values.iter().zip(labels) {
        groups.entry(l).or_default().push(v);
    }
    let k = groups.len();
    if k < 2 {
        return Err(Error::InvalidInput("ANOVA needs at least two groups".into()));
    }
    let constant_groups = groups.values().all(|g| g.iter().all(|&v| v == g[0]));
    if constant_groups {
        let first = groups.values().next().map(|g| g[0]);
        let all_equal = groups.values().all(|g| Some(g[0]) == first);
        return Ok(if all_equal { 0.0 } else { f64::INFINITY });
    }
    let n = values.len() as f64;
    let grand = values.iter().sum::<f64>() / n;
    let (mut ss_between, mut ss_within) = (0.0, 0.0);
    for g in groups.values() {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df_between = (k - 1) as f64;
    let df_within = n - k as f64;
    Ok((ss_between / df_between) / (ss_within / df_within))
}

/// Result of ANOVA-F feature ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Selected column indices, best first.
    pub indices: Vec<usize>,
    /// F score of every column.
    pub scores: Vec<f64>,
}

/// Keeps the `k` columns with the largest F score; ties go to the lower
/// index. `k` is clamped to the number of columns.
pub fn select_k_best(x: &DMatrix<f64>, labels: &[usize], k: usize) -> Result<FeatureSelection> {
    if x.nrows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let scores = (0..x.ncols())
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            anova_f(&col, labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k.min(scores.len()));
    Ok(FeatureSelection {
        indices: order,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_std_population() {
        let m = MeanStd::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m.mean, 5.0);
        assert_eq!(m.std, 2.0);
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        let r = pearson(&x, &[4.0, 7.0, 10.0]).unwrap().unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let r = pearson(&x, &[-1.0, -2.0, -3.0]).unwrap().unwrap();
        assert!((r + 1.0).abs() < 1e-15);
        let r = pearson(&x, &[2.0, 4.0, 7.0]).unwrap().unwrap();
        assert!((r - 15.0 / 228f64.sqrt()).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0, 1.0, 1.0]).unwrap(), None);
        assert!(pearson(&x, &[1.0]).is_err());
    }

    #[test]
    fn kappa_examples() {
        let k = cohen_kappa_from_confusion(&[vec![20, 5], vec![10, 15]]).unwrap();
        assert!((k - 0.4).abs() < 1e-12);
        assert_eq!(cohen_kappa(&[1, 2, 2, 3], &[1, 2, 2, 3]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[7, 7], &[7, 7]).unwrap(), 1.0);
        // agreement exactly at chance
        let k = cohen_kappa(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!(k.abs() < 1e-15);
    }

    #[test]
    fn anova_examples() {
        let f = anova_f(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((f - 13.5).abs() < 1e-9);
        assert_eq!(anova_f(&[3.0; 6], &[0, 0, 0, 1, 1, 1]).unwrap(), 0.0);
        assert_eq!(
            anova_f(&[1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1]).unwrap(),
            f64::INFINITY
        );
        assert!(anova_f(&[1.0, 2.0], &[0, 0]).is_err());
    }

    #[test]
    fn selection_prefers_separators_and_lower_index() {
        let x = DMatrix::from_row_slice(4, 3, &[5.0, 0.0, 1.0, 5.0, 0.0, 1.0, 5.0, 1.0, 2.0, 5.0, 1.0, 2.0]);
        let s = select_k_best(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.indices, vec![1, 2]);
        assert_eq!(s.scores[0], 0.0);
    }

    proptest! {
        #[test]
        fn pearson_symmetry_and_affine(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Some(r) = pearson(&x, &y).unwrap() {
                prop_assert!((pearson(&y, &x).unwrap().unwrap() - r).abs() < 1e-12);
                let up: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let down: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson(&up, &y).unwrap().unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&down, &y).unwrap().unwrap() + r).abs() < 1e-9);
            }
        }

        #[test]
        fn kappa_self_agreement(r in prop::collection::vec(0u8..4, 2..40)) {
            prop_assume!(r.iter().any(|&v| v != r[0]));
            prop_assert!((cohen_kappa(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn anova_affine_invariant(
            vals in prop::collection::vec(-10.0f64..10.0, 8),
            a in 0.5f64..4.0,
            b in -5.0f64..5.0,
        ) {
            let labels = [0, 0, 0, 0, 1, 1, 1, 1];
            let f = anova_f(&vals, &labels).unwrap();
            let g: Vec<f64> = vals.iter().map(|v| -a * v + b).collect();
            let f2 = anova_f(&g, &labels).unwrap();
            prop_assert!((f - f2).abs() <= 1e-8 * f.abs().max(1.0));
        }
    }
}
