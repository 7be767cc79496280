use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Multinomial logistic regression.
    Linear,
    /// Linear soft-margin SVM, one-vs-rest.
    Svm,
    /// Random forest of CART trees.
    Rf,
    /// One-hidden-layer perceptron.
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [Self::Linear, Self::Svm, Self::Rf, Self::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Svm => "svm",
            Self::Rf => "rf",
            Self::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "svm" => Ok(Self::Svm),
            "rf" => Ok(Self::Rf),
            "mlp" => Ok(Self::Mlp),
            other => Err(Error::Config(format!("unknown classifier '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub seed: u64,
    pub linear_epochs: usize,
    pub linear_learning_rate: f64,
    pub l2: f64,
    pub svm_epochs: usize,
    pub svm_learning_rate: f64,
    /// Regularisation strength of the SVM objective.
    pub svm_lambda: f64,
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_samples_split: usize,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            linear_epochs: 1000,
            linear_learning_rate: 0.1,
            l2: 1e-4,
            svm_epochs: 1000,
            svm_learning_rate: 0.01,
            svm_lambda: 1e-3,
            rf_trees: 100,
            rf_max_depth: 16,
            rf_min_samples_split: 2,
            mlp_hidden: 16,
            mlp_epochs: 500,
            mlp_learning_rate: 1e-2,
        }
    }
}

/// Z-score parameters from training data. Constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            mean.push(m);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Self { mean, scale }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.scale[j]
        })
    }

    fn apply_row(&self, row: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            row.len(),
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - self.mean[j]) / self.scale[j]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &DVector<f64>) -> usize {
        match self {
            Node::Leaf(c) => *c,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Params {
    Constant,
    /// One weight row per class; last column is the bias.
    Scores(DMatrix<f64>),
    Forest(Vec<Node>),
    Mlp {
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
    },
}

/// A trained classifier. Labels are arbitrary integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub seed: u64,
    /// Distinct training labels, ascending; model outputs index into this.
    labels: Vec<usize>,
    standardizer: Standardizer,
    params: Params,
}

impl ClassifierModel {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// True when training saw a single class.
    pub fn is_constant(&self) -> bool {
        matches!(self.params, Params::Constant)
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.standardizer.mean.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.standardizer.mean.len(),
                row.len()
            )));
        }
        let x = self.standardizer.apply_row(row);
        let class = match &self.params {
            Params::Constant => 0,
            Params::Scores(w) => argmax(&(w.columns(0, x.len()) * &x + w.column(x.len()))),
            Params::Forest(trees) => {
                let mut votes = vec![0usize; self.labels.len()];
                for t in trees {
                    votes[t.predict(&x)] += 1;
                }
                // ties go to the lower label
                let best = *votes.iter().max().unwrap_or(&0);
                votes.iter().position(|&v| v == best).unwrap_or(0)
            }
            Params::Mlp { w1, b1, w2, b2 } => {
                let h = (w1 * &x + b1).map(f64::tanh);
                argmax(&(w2 * h + b2))
            }
        };
        Ok(self.labels[class])
    }

    pub fn predict_all(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        x.row_iter()
            .map(|r| self.predict(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let e = z.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Fits a classifier. Features are standardised with training statistics.
/// A single-class training set yields a constant classifier.
pub fn train_classifier(
    kind: ClassifierKind,
    x: &DMatrix<f64>,
    y: &[usize],
    config: &ClassifierConfig,
) -> Result<ClassifierModel> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() || x.ncols() == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    let mut labels: Vec<usize> = y.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let index: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let targets: Vec<usize> = y.iter().map(|l| index[l]).collect();
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.apply(x);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let params = if labels.len() == 1 {
        Params::Constant
    } else {
        match kind {
            ClassifierKind::Linear => fit_logistic(&xs, &targets, labels.len(), config),
            ClassifierKind::Svm => fit_svm(&xs, &targets, labels.len(), config),
            ClassifierKind::Rf => fit_forest(&xs, &targets, labels.len(), config, &mut rng),
            ClassifierKind::Mlp => fit_mlp(&xs, &targets, labels.len(), config, &mut rng),
        }
    };
    Ok(ClassifierModel {
        kind,
        seed: config.seed,
        labels,
        standardizer,
        params,
    })
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// Full-batch gradient descent on softmax cross-entropy with L2 on weights.
fn fit_logistic(x: &DMatrix<f64>, y: &[usize], k: usize, c: &ClassifierConfig) -> Params {
    let xb = with_bias(x);
    let (n, d) = xb.shape();
    let mut w = DMatrix::<f64>::zeros(k, d);
    for _ in 0..c.linear_epochs {
        let logits = &xb * w.transpose();
        let mut grad_logits = DMatrix::<f64>::zeros(n, k);
        for i in 0..n {
            let p = softmax(&logits.row(i).transpose());
            for j in 0..k {
                grad_logits[(i, j)] = p[j] - if y[i] == j { 1.0 } else { 0.0 };
            }
        }
        let mut grad = grad_logits.transpose() * &xb / n as f64;
        let mut reg = w.clone() * c.l2;
        reg.column_mut(d - 1).fill(0.0);
        grad += reg;
        w -= grad * c.linear_learning_rate;
    }
    Params::Scores(w)
}

/// One-vs-rest hinge loss, full-batch subgradient descent.
fn fit_svm(x: &DMatrix<f64>, y: &[usize], k: usize, c: &ClassifierConfig) -> Params {
    let xb = with_bias(x);
    let (n, d) = xb.shape();
    let mut w = DMatrix::<f64>::zeros(k, d);
    for class in 0..k {
        let sign: Vec<f64> = y.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let mut wc = DVector::<f64>::zeros(d);
        for _ in 0..c.svm_epochs {
            let margins = &xb * &wc;
            let mut grad = wc.clone() * c.svm_lambda;
            grad[d - 1] = 0.0;
            for i in 0..n {
                if sign[i] * margins[i] < 1.0 {
                    grad -= xb.row(i).transpose() * (sign[i] / n as f64);
                }
            }
            wc -= grad * c.svm_learning_rate;
        }
        w.set_row(class, &wc.transpose());
    }
    Params::Scores(w)
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(y: &[usize], rows: &[usize], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    for &r in rows {
        counts[y[r]] += 1;
    }
    let best = *counts.iter().max().unwrap_or(&0);
    counts.iter().position(|&c| c == best).unwrap_or(0)
}

struct TreeBuilder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    k: usize,
    max_features: usize,
    max_depth: usize,
    min_split: usize,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        if pure || depth >= self.max_depth || rows.len() < self.min_split {
            return Node::Leaf(majority(self.y, rows, self.k));
        }
        let mut features: Vec<usize> = (0..self.x.ncols()).collect();
        features.shuffle(rng);
        features.truncate(self.max_features);
        features.sort_unstable();

        let mut parent = vec![0usize; self.k];
        for &r in rows {
            parent[self.y[r]] += 1;
        }
        let parent_impurity = gini(&parent, rows.len());
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features {
            let mut sorted = rows.to_vec();
            sorted.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]));
            let mut left = vec![0usize; self.k];
            let mut right = parent.clone();
            for i in 0..sorted.len() - 1 {
                let c = self.y[sorted[i]];
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x[(sorted[i], f)], self.x[(sorted[i + 1], f)]);
                if a == b {
                    continue;
                }
                let nl = i + 1;
                let nr = sorted.len() - nl;
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr))
                    / sorted.len() as f64;
                let gain = parent_impurity - impurity;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (a + b)));
                }
            }
        }
        match best {
            Some((gain, feature, threshold)) if gain > 0.0 => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| self.x[(row, feature)] <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&l, depth + 1, rng)),
                    right: Box::new(self.build(&r, depth + 1, rng)),
                }
            }
            _ => Node::Leaf(majority(self.y, rows, self.k)),
        }
    }
}

fn fit_forest(
    x: &DMatrix<f64>,
    y: &[usize],
    k: usize,
    c: &ClassifierConfig,
    rng: &mut ChaCha8Rng,
) -> Params {
    let n = x.nrows();
    let builder = TreeBuilder {
        x,
        y,
        k,
        max_features: ((x.ncols() as f64).sqrt().ceil() as usize).max(1),
        max_depth: c.rf_max_depth.max(1),
        min_split: c.rf_min_samples_split.max(2),
    };
    let trees = (0..c.rf_trees.max(1))
        .map(|_| {
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            builder.build(&rows, 0, rng)
        })
        .collect();
    Params::Forest(trees)
}

/// Tanh hidden layer, softmax output, per-sample SGD over shuffled epochs.
fn fit_mlp(
    x: &DMatrix<f64>,
    y: &[usize],
    k: usize,
    c: &ClassifierConfig,
    rng: &mut ChaCha8Rng,
) -> Params {
    let (n, d) = x.shape();
    let h = c.mlp_hidden.max(1);
    let glorot = |fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit))
    };
    let mut w1 = glorot(d, h, rng);
    let mut b1 = DVector::<f64>::zeros(h);
    let mut w2 = glorot(h, k, rng);
    let mut b2 = DVector::<f64>::zeros(k);
    let mut order: Vec<usize> = (0..n).collect();
    let lr = c.mlp_learning_rate;
    for _ in 0..c.mlp_epochs {
        order.shuffle(rng);
        for &i in &order {
            let xi = x.row(i).transpose();
            let hidden = (&w1 * &xi + &b1).map(f64::tanh);
            let mut delta2 = softmax(&(&w2 * &hidden + &b2));
            delta2[y[i]] -= 1.0;
            let back = w2.transpose() * &delta2;
            let delta1 = back.component_mul(&hidden.map(|a| 1.0 - a * a));
            w2 -= &delta2 * hidden.transpose() * lr;
            b2 -= &delta2 * lr;
            w1 -= &delta1 * xi.transpose() * lr;
            b1 -= delta1 * lr;
        }
    }
    Params::Mlp { w1, b1, w2, b2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    /// Two Gaussian clusters `sep` standard deviations apart in every feature.
    fn clusters(per: usize, dims: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut data = Vec::new();
        let mut y = Vec::new();
        for label in 0..2 {
            for _ in 0..per {
                for _ in 0..dims {
                    data.push(label as f64 * sep + noise.sample(&mut rng));
                }
                y.push(label * 3 + 1);
            }
        }
        (DMatrix::from_row_slice(2 * per, dims, &data), y)
    }

    fn accuracy(m: &ClassifierModel, x: &DMatrix<f64>, y: &[usize]) -> f64 {
        let p = m.predict_all(x).unwrap();
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let (x, y) = clusters(20, 5, 10.0, 3);
        for kind in ClassifierKind::ALL {
            let m = train_classifier(kind, &x, &y, &ClassifierConfig::default()).unwrap();
            assert_eq!(accuracy(&m, &x, &y), 1.0, "{kind}");
            assert_eq!(m.labels(), &[1, 4]);
        }
    }

    #[test]
    fn single_class_is_constant() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        for kind in ClassifierKind::ALL {
            let m = train_classifier(kind, &x, &[7, 7, 7], &ClassifierConfig::default()).unwrap();
            assert!(m.is_constant());
            assert_eq!(m.predict(&[100.0, -100.0]).unwrap(), 7);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = clusters(10, 4, 1.0, 9);
        for kind in ClassifierKind::ALL {
            let c = ClassifierConfig {
                seed: 42,
                ..Default::default()
            };
            let a = train_classifier(kind, &x, &y, &c).unwrap();
            let b = train_classifier(kind, &x, &y, &c).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn three_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centres = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let mut data = Vec::new();
        let mut y = Vec::new();
        for (label, (cx, cy)) in centres.iter().enumerate() {
            for _ in 0..15 {
                data.push(cx + noise.sample(&mut rng));
                data.push(cy + noise.sample(&mut rng));
                y.push(label);
            }
        }
        let x = DMatrix::from_row_slice(45, 2, &data);
        for kind in ClassifierKind::ALL {
            let m = train_classifier(kind, &x, &y, &ClassifierConfig::default()).unwrap();
            assert_eq!(accuracy(&m, &x, &y), 1.0, "{kind}");
        }
    }

    #[test]
    fn rejects_wrong_width() {
        let (x, y) = clusters(5, 3, 10.0, 1);
        let m = train_classifier(ClassifierKind::Linear, &x, &y, &ClassifierConfig::default()).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }
}
