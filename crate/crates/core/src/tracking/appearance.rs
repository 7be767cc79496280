//! Appearance embeddings: cosine distance, the EMA updater and a bounded
//! FIFO gallery.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::InvalidDetection(format!(
            "embedding norm {n} is not 1"
        )));
    }
    Ok(())
}

/// `1 - a.b` for unit vectors, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::EmbeddingDimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot).clamp(0.0, 2.0))
}

/// `alpha * feature + (1 - alpha) * new`, renormalised. A zero resultant
/// keeps the previous feature.
pub fn ema_update(feature: &[f64], new: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if feature.len() != new.len() {
        return Err(Error::EmbeddingDimension {
            expected: feature.len(),
            found: new.len(),
        });
    }
    if alpha == 1.0 {
        return Ok(feature.to_vec());
    }
    let mixed: Vec<f64> = feature
        .iter()
        .zip(new)
        .map(|(f, n)| alpha * f + (1.0 - alpha) * n)
        .collect();
    let n = norm(&mixed);
    if n <= f64::EPSILON || !n.is_finite() {
        return Ok(feature.to_vec());
    }
    Ok(mixed.into_iter().map(|x| x / n).collect())
}

/// Bounded FIFO of past embeddings; distance is the minimum over members.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureGallery {
    capacity: usize,
    features: VecDeque<Vec<f64>>,
}

impl FeatureGallery {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            features: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, f: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        if self.features.len() == self.capacity {
            self.features.pop_front();
        }
        self.features.push_back(f);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn min_distance(&self, query: &[f64]) -> Result<Option<f64>> {
        let mut best: Option<f64> = None;
        for f in &self.features {
            let d = cosine_distance(f, query)?;
            best = Some(best.map_or(d, |b| b.min(d)));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_extremes() {
        let a = [1.0, 0.0];
        assert_eq!(cosine_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(cosine_distance(&a, &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&a, &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(cosine_distance(&a, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ema_limits() {
        let f = [0.6, 0.8];
        let n = [1.0, 0.0];
        assert_eq!(ema_update(&f, &n, 1.0).unwrap(), f.to_vec());
        let zero = ema_update(&f, &n, 0.0).unwrap();
        assert!((zero[0] - 1.0).abs() < 1e-15 && zero[1].abs() < 1e-15);
        let fixed = ema_update(&f, &f, 0.9).unwrap();
        assert!(fixed.iter().zip(f).all(|(a, b)| (a - b).abs() < 1e-15));
        let mixed = ema_update(&f, &n, 0.9).unwrap();
        assert!((norm(&mixed) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ema_zero_resultant_keeps_previous() {
        let f = [1.0, 0.0];
        assert_eq!(ema_update(&f, &[-1.0, 0.0], 0.5).unwrap(), f.to_vec());
    }

    #[test]
    fn gallery_is_fifo() {
        let mut g = FeatureGallery::new(2);
        assert_eq!(g.min_distance(&[1.0, 0.0]).unwrap(), None);
        g.push(vec![1.0, 0.0]);
        g.push(vec![0.0, 1.0]);
        g.push(vec![-1.0, 0.0]);
        assert_eq!(g.len(), 2);
        // the first entry fell out, so the closest remaining is orthogonal
        assert_eq!(g.min_distance(&[1.0, 0.0]).unwrap(), Some(1.0));
    }

    #[test]
    fn unit_check() {
        assert!(check_unit(&[0.6, 0.8]).is_ok());
        assert!(check_unit(&[0.6, 0.9]).is_err());
    }
}
