use serde::{Deserialize, Serialize};

use super::pearson;
use crate::error::{Error, Result};
use crate::skill::{SkillMetricVector, METRIC_COUNT};

/// Number of assessed aspects.
pub const ASPECTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillLabel {
    Novice,
    Expert,
}

impl SkillLabel {
    pub fn as_index(self) -> usize {
        match self {
            Self::Novice => 0,
            Self::Expert => 1,
        }
    }
}

impl std::str::FromStr for SkillLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "novice" => Ok(Self::Novice),
            "expert" => Ok(Self::Expert),
            other => Err(Error::InvalidInput(format!("unknown skill label '{other}'"))),
        }
    }
}

impl std::fmt::Display for SkillLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Novice => "novice",
            Self::Expert => "expert",
        })
    }
}

/// Ten aspect scores (1 to 5) for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosatsAssessment {
    pub video_id: String,
    pub aspects: [u8; ASPECTS],
    pub skill_label: SkillLabel,
}

impl MosatsAssessment {
    pub fn new(video_id: impl Into<String>, aspects: [u8; ASPECTS], skill_label: SkillLabel) -> Result<Self> {
        if let Some(bad) = aspects.iter().find(|a| !(1..=5).contains(*a)) {
            return Err(Error::InvalidInput(format!("aspect score {bad} outside 1..=5")));
        }
        Ok(Self {
            video_id: video_id.into(),
            aspects,
            skill_label,
        })
    }

    /// Sum of the aspects, 10 to 50.
    pub fn summed(&self) -> u32 {
        self.aspects.iter().map(|&a| u32::from(a)).sum()
    }

    /// `summed / 10` rounded half up.
    pub fn mean_rounded(&self) -> u32 {
        (self.summed() + 5) / 10
    }
}

/// Pearson correlation of every metric against every aspect and the summed
/// score. `None` marks an undefined correlation (a constant column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub metrics: Vec<String>,
    /// `aspect_1` .. `aspect_10`, then `summed`.
    pub targets: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationTable {
    /// Column holding the correlation with the summed score.
    pub fn summed_column(&self) -> Vec<Option<f64>> {
        self.values.iter().map(|row| row[ASPECTS]).collect()
    }
}

/// Correlates metric vectors with assessments, pairing them by video id.
pub fn correlate(
    metrics: &[SkillMetricVector],
    assessments: &[MosatsAssessment],
) -> Result<CorrelationTable> {
    let mut pairs = Vec::new();
    for m in metrics {
        let a = assessments
            .iter()
            .find(|a| a.video_id == m.video_id)
            .ok_or_else(|| Error::InvalidInput(format!("no assessment for video '{}'", m.video_id)))?;
        pairs.push((m, a));
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least two videos".into()));
    }
    let mut targets: Vec<String> = (1..=ASPECTS).map(|i| format!("aspect_{i}")).collect();
    targets.push("summed".into());
    let target_columns: Vec<Vec<f64>> = (0..=ASPECTS)
        .map(|t| {
            pairs
                .iter()
                .map(|(_, a)| {
                    if t < ASPECTS {
                        f64::from(a.aspects[t])
                    } else {
                        f64::from(a.summed())
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(METRIC_COUNT);
    for i in 0..METRIC_COUNT {
        let column: Vec<f64> = pairs.iter().map(|(m, _)| m.values[i]).collect();
        let row = target_columns
            .iter()
            .map(|t| pearson(&column, t))
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    Ok(CorrelationTable {
        metrics: SkillMetricVector::column_names(),
        targets,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_rounding() {
        let a = MosatsAssessment::new("v", [1, 1, 1, 1, 1, 2, 2, 2, 2, 2], SkillLabel::Novice).unwrap();
        assert_eq!(a.summed(), 15);
        assert_eq!(a.mean_rounded(), 2);
        let b = MosatsAssessment::new("v", [1, 1, 1, 1, 1, 1, 2, 2, 2, 2], SkillLabel::Novice).unwrap();
        assert_eq!(b.mean_rounded(), 1);
        let c = MosatsAssessment::new("v", [5; 10], SkillLabel::Expert).unwrap();
        assert_eq!((c.summed(), c.mean_rounded()), (50, 5));
        assert!(MosatsAssessment::new("v", [0; 10], SkillLabel::Expert).is_err());
        assert!(MosatsAssessment::new("v", [6; 10], SkillLabel::Expert).is_err());
    }

    #[test]
    fn labels_parse() {
        assert_eq!("Expert".parse::<SkillLabel>().unwrap(), SkillLabel::Expert);
        assert!("guru".parse::<SkillLabel>().is_err());
    }
}
