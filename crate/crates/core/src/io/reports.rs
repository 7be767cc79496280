use std::io::{Read, Write};

use std::collections::BTreeMap;

use crate::classes::ClassRegistry;
use crate::error::{Error, Result};
use crate::skill::{SkillMetricVector, METRIC_COUNT, METRIC_NAMES};
use crate::stats::{CorrelationTable, VideoCounts};

/// One row per video: `video_id`, then the 34 named metrics.
pub fn write_metrics_csv<W: Write>(w: W, rows: &[SkillMetricVector]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["video_id"];
    header.extend(METRIC_NAMES);
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.video_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(reader: R, path: &str) -> Result<Vec<SkillMetricVector>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("video_id").chain(METRIC_NAMES).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            message: "header does not match the metric catalogue".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| Error::Parse {
            path: path.to_string(),
            line,
            message: m,
        };
        let values = (1..=METRIC_COUNT)
            .map(|k| {
                let raw = rec.get(k).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("{}: '{raw}' is not a finite number", METRIC_NAMES[k - 1])))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(SkillMetricVector {
            video_id: rec.get(0).unwrap_or("").to_string(),
            values,
        });
    }
    Ok(out)
}

pub(crate) fn csv_error(path: &str, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Metric rows against aspect columns; undefined correlations are empty.
pub fn write_correlation_csv<W: Write>(w: W, table: &CorrelationTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["metric".to_string()];
    header.extend(table.targets.iter().cloned());
    wtr.write_record(&header)?;
    for (name, row) in table.metrics.iter().zip(&table.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.map_or(String::new(), |r| format!("{r:.6}"))));
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `video_id,class,count` rows (class by name or index) into
/// per-video counts, videos in order of first appearance. Repeated rows add.
pub fn read_video_counts<R: Read>(reader: R, path: &str, registry: &ClassRegistry) -> Result<Vec<VideoCounts>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["video_id", "class", "count"] {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            message: "expected header video_id,class,count".into(),
        });
    }
    let mut out: Vec<VideoCounts> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| Error::Parse {
            path: path.to_string(),
            line,
            message: m,
        };
        let class = registry.lookup(&rec[1])?;
        let count: u64 = rec[2].parse().map_err(|_| err(format!("'{}' is not a count", &rec[2])))?;
        let video_id = &rec[0];
        let idx = match out.iter().position(|v| v.video_id == video_id) {
            Some(i) => i,
            None => {
                out.push(VideoCounts {
                    video_id: video_id.to_string(),
                    counts: BTreeMap::new(),
                });
                out.len() - 1
            }
        };
        *out[idx].counts.entry(class).or_insert(0) += count;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts() {
        let text = "video_id,class,count\nv1,Kerrisons,10\nv1,1,5\nv2, CupForceps ,3\nv1,3,2\n";
        let v = read_video_counts(text.as_bytes(), "c", &ClassRegistry::default()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].counts[&crate::ClassId::KERRISONS], 12);
        assert_eq!(v[0].total(), 17);
        assert!(read_video_counts("video_id,class,count\nv,Drill,1\n".as_bytes(), "c", &ClassRegistry::default())
            .unwrap_err()
            .is_invariant_violation());
        assert!(matches!(
            read_video_counts("video_id,class,count\nv,1,x\n".as_bytes(), "c", &ClassRegistry::default()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![SkillMetricVector {
            video_id: "v".into(),
            values: (0..METRIC_COUNT).map(|i| i as f64 * 0.1 + 1.0 / 3.0).collect(),
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_metrics_csv(buf.as_slice(), "m").unwrap(), rows);
        assert!(read_metrics_csv("video_id,M01\nv,1\n".as_bytes(), "m").is_err());
        let mut commented = b"# provenance\n".to_vec();
        commented.extend(&buf);
        assert_eq!(read_metrics_csv(commented.as_slice(), "m").unwrap(), rows);
    }
}
