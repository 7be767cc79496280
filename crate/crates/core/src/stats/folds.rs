use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::error::{Error, Result};

/// Per-class image counts of one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoCounts {
    pub video_id: String,
    pub counts: BTreeMap<ClassId, u64>,
}

impl VideoCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldConfig {
    pub folds: usize,
    /// Images removed (negative) or duplicated (positive) per fold and class.
    pub resample: BTreeMap<ClassId, i64>,
    /// Largest video count solved by exhaustive search.
    pub exact_limit: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self {
            folds: 4,
            resample: BTreeMap::from([
                (ClassId::BLUNT_DISSECTOR, -600),
                (ClassId::CUP_FORCEPS, 400),
                (ClassId::KERRISONS, -1200),
                (ClassId::PITUITARY_RONGEURS, 400),
            ]),
            exact_limit: 10,
        }
    }
}

/// One annotated image: the `index`-th image of `class_id` in a video.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageRef {
    pub video_id: String,
    pub class_id: ClassId,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub assignment: BTreeMap<String, usize>,
    /// Per-fold class counts before resampling.
    pub fold_counts: Vec<BTreeMap<ClassId, u64>>,
    /// Per-fold image multisets after resampling; duplicates appear twice.
    pub images: Vec<Vec<ImageRef>>,
    /// Balance objective `Σ_c Σ_f (F·n_fc − T_c)²` of the assignment.
    pub imbalance: u128,
    pub warnings: Vec<String>,
}

impl FoldSpec {
    /// Fold index of each video, in the given video order.
    pub fn fold_of(&self, videos: &[VideoCounts]) -> Vec<usize> {
        videos.iter().map(|v| self.assignment[&v.video_id]).collect()
    }

    pub fn resampled_counts(&self) -> Vec<BTreeMap<ClassId, u64>> {
        self.images
            .iter()
            .map(|imgs| {
                let mut m = BTreeMap::new();
                for i in imgs {
                    *m.entry(i.class_id).or_insert(0) += 1;
                }
                m
            })
            .collect()
    }
}

struct Balance {
    classes: Vec<ClassId>,
    /// `counts[v][c]`
    counts: Vec<Vec<i128>>,
    totals: Vec<i128>,
    folds: usize,
}

impl Balance {
    fn new(videos: &[VideoCounts], folds: usize) -> Self {
        let mut classes: Vec<ClassId> = videos.iter().flat_map(|v| v.counts.keys().copied()).collect();
        classes.sort_unstable();
        classes.dedup();
        let counts: Vec<Vec<i128>> = videos
            .iter()
            .map(|v| classes.iter().map(|c| i128::from(*v.counts.get(c).unwrap_or(&0))).collect())
            .collect();
        let totals = (0..classes.len()).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Self {
            classes,
            counts,
            totals,
            folds,
        }
    }

    fn objective(&self, fold_sums: &[Vec<i128>]) -> u128 {
        let f = self.folds as i128;
        fold_sums
            .iter()
            .flat_map(|sums| sums.iter().zip(&self.totals).map(move |(&n, &t)| (f * n - t).pow(2) as u128))
            .sum()
    }

    fn sums(&self, assignment: &[usize]) -> Vec<Vec<i128>> {
        let mut sums = vec![vec![0i128; self.classes.len()]; self.folds];
        for (v, &f) in assignment.iter().enumerate() {
            for (c, &n) in self.counts[v].iter().enumerate() {
                sums[f][c] += n;
            }
        }
        sums
    }

    fn score(&self, assignment: &[usize]) -> u128 {
        self.objective(&self.sums(assignment))
    }

    fn feasible(&self, assignment: &[usize]) -> bool {
        let used = assignment.iter().fold(vec![false; self.folds], |mut u, &f| {
            u[f] = true;
            u
        });
        assignment.len() < self.folds || used.iter().all(|&u| u)
    }

    /// Exhaustive search over canonically labelled assignments; the first
    /// optimum in lexicographic order wins.
    fn exact(&self) -> Vec<usize> {
        let n = self.counts.len();
        let mut best: Option<(u128, Vec<usize>)> = None;
        let mut current = Vec::with_capacity(n);
        self.search(&mut current, 0, &mut best);
        best.map(|(_, a)| a).unwrap_or_default()
    }

    fn search(&self, current: &mut Vec<usize>, used: usize, best: &mut Option<(u128, Vec<usize>)>) {
        let n = self.counts.len();
        if current.len() == n {
            if self.feasible(current) {
                let s = self.score(current);
                if best.as_ref().is_none_or(|(b, _)| s < *b) {
                    *best = Some((s, current.clone()));
                }
            }
            return;
        }
        let remaining = n - current.len();
        for f in 0..(used + 1).min(self.folds) {
            let next_used = used.max(f + 1);
            // leave enough videos to fill the remaining empty folds
            if self.folds.min(n) > next_used + remaining - 1 {
                continue;
            }
            current.push(f);
            self.search(current, next_used, best);
            current.pop();
        }
    }

    /// Greedy placement by descending size, then single moves and pairwise
    /// swaps while they strictly improve the objective.
    fn heuristic(&self, order: &[usize]) -> Vec<usize> {
        let n = self.counts.len();
        let mut assignment = vec![0usize; n];
        let mut placed: Vec<usize> = Vec::new();
        for (rank, &v) in order.iter().enumerate() {
            let empty_folds = self.folds.saturating_sub(rank);
            let must_open = empty_folds > 0 && n - rank <= empty_folds;
            let mut best: Option<(u128, usize)> = None;
            for f in 0..self.folds {
                if must_open && placed.iter().any(|&p| assignment[p] == f) {
                    continue;
                }
                assignment[v] = f;
                let mut trial: Vec<usize> = placed.clone();
                trial.push(v);
                let mut sums = vec![vec![0i128; self.classes.len()]; self.folds];
                for &p in &trial {
                    for (c, &k) in self.counts[p].iter().enumerate() {
                        sums[assignment[p]][c] += k;
                    }
                }
                let s = self.objective(&sums);
                if best.is_none_or(|(b, _)| s < b) {
                    best = Some((s, f));
                }
            }
            assignment[v] = best.map_or(0, |(_, f)| f);
            placed.push(v);
        }
        let mut score = self.score(&assignment);
        loop {
            let mut improved = false;
            for v in 0..n {
                for f in 0..self.folds {
                    if assignment[v] == f {
                        continue;
                    }
                    let old = assignment[v];
                    assignment[v] = f;
                    let s = self.score(&assignment);
                    if s < score && self.feasible(&assignment) {
                        score = s;
                        improved = true;
                    } else {
                        assignment[v] = old;
                    }
                }
            }
            for a in 0..n {
                for b in a + 1..n {
                    if assignment[a] == assignment[b] {
                        continue;
                    }
                    assignment.swap(a, b);
                    let s = self.score(&assignment);
                    if s < score {
                        score = s;
                        improved = true;
                    } else {
                        assignment.swap(a, b);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        canonical(&assignment)
    }
}

/// Relabels folds in order of first appearance.
fn canonical(assignment: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    assignment
        .iter()
        .map(|f| {
            let next = map.len();
            *map.entry(*f).or_insert(next)
        })
        .collect()
}

/// Splits videos into folds with balanced per-class image counts, then
/// resamples each fold's images with a seeded generator.
pub fn build_folds(videos: &[VideoCounts], seed: u64, config: &FoldConfig) -> Result<FoldSpec> {
    if config.folds == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for v in videos {
        if !seen.insert(&v.video_id) {
            return Err(Error::InvalidInput(format!("duplicate video '{}'", v.video_id)));
        }
    }
    let balance = Balance::new(videos, config.folds);
    let assignment = if videos.len() <= config.exact_limit {
        balance.exact()
    } else {
        let mut order: Vec<usize> = (0..videos.len()).collect();
        order.sort_by(|&a, &b| {
            videos[b]
                .total()
                .cmp(&videos[a].total())
                .then_with(|| videos[a].video_id.cmp(&videos[b].video_id))
        });
        balance.heuristic(&order)
    };
    let imbalance = balance.score(&assignment);

    let mut fold_counts = vec![BTreeMap::new(); config.folds];
    let mut pools: Vec<BTreeMap<ClassId, Vec<ImageRef>>> = vec![BTreeMap::new(); config.folds];
    for (v, &f) in videos.iter().zip(&assignment) {
        for (&c, &n) in &v.counts {
            *fold_counts[f].entry(c).or_insert(0u64) += n;
            let pool = pools[f].entry(c).or_default();
            pool.extend((0..n).map(|index| ImageRef {
                video_id: v.video_id.clone(),
                class_id: c,
                index,
            }));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut images = Vec::with_capacity(config.folds);
    for (f, pool) in pools.into_iter().enumerate() {
        let mut fold_images = Vec::new();
        for (c, mut imgs) in pool {
            imgs.sort();
            let delta = config.resample.get(&c).copied().unwrap_or(0);
            let available = imgs.len();
            if delta < 0 {
                let want = delta.unsigned_abs() as usize;
                let remove = if want > available {
                    let msg = format!(
                        "fold {f}: cannot remove {want} images of class {c}, only {available} present; removing all"
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                    available
                } else {
                    want
                };
                let mut drop = vec![false; available];
                for i in sample(&mut rng, available, remove) {
                    drop[i] = true;
                }
                fold_images.extend(imgs.into_iter().zip(drop).filter(|(_, d)| !d).map(|(i, _)| i));
            } else {
                let want = delta as usize;
                let mut extra = Vec::with_capacity(want);
                if want > 0 && available == 0 {
                    let msg = format!("fold {f}: no images of class {c} to duplicate");
                    log::warn!("{msg}");
                    warnings.push(msg);
                } else if want > 0 {
                    // without replacement, in rounds when the pool is small
                    let mut left = want;
                    while left > 0 {
                        let take = left.min(available);
                        extra.extend(sample(&mut rng, available, take).into_iter().map(|i| imgs[i].clone()));
                        left -= take;
                    }
                }
                fold_images.extend(imgs);
                fold_images.extend(extra);
            }
        }
        fold_images.sort();
        images.push(fold_images);
    }

    Ok(FoldSpec {
        assignment: videos
            .iter()
            .zip(&assignment)
            .map(|(v, &f)| (v.video_id.clone(), f))
            .collect(),
        fold_counts,
        images,
        imbalance,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(id: &str, counts: [u64; 4]) -> VideoCounts {
        VideoCounts {
            video_id: id.into(),
            counts: ClassId::INSTRUMENTS.iter().copied().zip(counts).collect(),
        }
    }

    fn no_resample() -> FoldConfig {
        FoldConfig {
            resample: BTreeMap::new(),
            ..Default::default()
        }
    }

    #[test]
    fn identical_videos_balance() {
        let vids: Vec<_> = (0..4).map(|i| video(&format!("v{i}"), [10, 5, 20, 3])).collect();
        let spec = build_folds(&vids, 0, &no_resample()).unwrap();
        assert_eq!(spec.imbalance, 0);
        let mut folds = spec.fold_of(&vids);
        folds.sort_unstable();
        assert_eq!(folds, vec![0, 1, 2, 3]);
    }

    #[test]
    fn clamps_downsampling() {
        let vids: Vec<_> = (0..4).map(|i| video(&format!("v{i}"), [100, 10, 100, 10])).collect();
        let spec = build_folds(&vids, 1, &FoldConfig::default()).unwrap();
        let counts = spec.resampled_counts();
        for c in &counts {
            assert_eq!(c.get(&ClassId::BLUNT_DISSECTOR), None);
            assert_eq!(c[&ClassId::CUP_FORCEPS], 410);
        }
        assert_eq!(spec.warnings.len(), 8);
    }

    #[test]
    fn resampling_amounts() {
        let vids: Vec<_> = (0..8).map(|i| video(&format!("v{i}"), [800, 300, 1600, 200])).collect();
        let spec = build_folds(&vids, 3, &FoldConfig::default()).unwrap();
        for (before, after) in spec.fold_counts.iter().zip(spec.resampled_counts()) {
            assert_eq!(after[&ClassId::BLUNT_DISSECTOR], before[&ClassId::BLUNT_DISSECTOR] - 600);
            assert_eq!(after[&ClassId::CUP_FORCEPS], before[&ClassId::CUP_FORCEPS] + 400);
            assert_eq!(after[&ClassId::KERRISONS], before[&ClassId::KERRISONS] - 1200);
            assert_eq!(after[&ClassId::PITUITARY_RONGEURS], before[&ClassId::PITUITARY_RONGEURS] + 400);
        }
        assert!(spec.warnings.is_empty());
    }

    #[test]
    fn images_stay_in_their_video_fold() {
        let vids: Vec<_> = (0..12)
            .map(|i| video(&format!("v{i:02}"), [50 + i * 13, 20 + i, 70 + i * 7, 9 + i % 4]))
            .collect();
        let spec = build_folds(&vids, 5, &FoldConfig::default()).unwrap();
        let mut owner: BTreeMap<&ImageRef, usize> = BTreeMap::new();
        for (f, imgs) in spec.images.iter().enumerate() {
            for img in imgs {
                assert_eq!(spec.assignment[&img.video_id], f);
                if let Some(prev) = owner.insert(img, f) {
                    assert_eq!(prev, f);
                }
            }
        }
        assert_eq!(spec, build_folds(&vids, 5, &FoldConfig::default()).unwrap());
        assert!(spec.fold_of(&vids).iter().all(|&f| f < 4));
        let used: std::collections::BTreeSet<_> = spec.fold_of(&vids).into_iter().collect();
        assert_eq!(used.len(), 4);
    }

    #[test]
    fn rejects_duplicates() {
        let vids = vec![video("a", [1, 1, 1, 1]), video("a", [1, 1, 1, 1])];
        assert!(build_folds(&vids, 0, &no_resample()).is_err());
    }
}
