use std::io::{Read, Write};
use std::path::Path;

use super::file_error;
use crate::error::{Error, Result};
use crate::stats::{MosatsAssessment, ASPECTS};

fn header() -> Vec<String> {
    let mut h = vec!["video_id".to_string()];
    h.extend((1..=ASPECTS).map(|i| format!("aspect_{i}")));
    h.push("skill_label".into());
    h
}

/// Reads `video_id, aspect_1..aspect_10, skill_label`. Columns are matched
/// by header name, so their order is free.
pub fn read_mosats<R: Read>(reader: R, path: &str) -> Result<Vec<MosatsAssessment>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let wanted = header();
    let idx = wanted.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| super::reports::csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |m: String| Error::Parse {
            path: path.to_string(),
            line,
            message: m,
        };
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let mut aspects = [0u8; ASPECTS];
        for (a, slot) in aspects.iter_mut().enumerate() {
            let raw = field(a + 1);
            *slot = raw
                .parse()
                .map_err(|_| err(format!("{} is not an integer: '{raw}'", wanted[a + 1])))?;
        }
        let label = field(ASPECTS + 1).parse().map_err(|e: Error| err(e.to_string()))?;
        out.push(MosatsAssessment::new(field(0), aspects, label).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_mosats_file(path: &Path) -> Result<Vec<MosatsAssessment>> {
    let f = std::fs::File::open(path).map_err(|e| file_error(path, e))?;
    read_mosats(f, &path.display().to_string())
}

pub fn write_mosats<W: Write>(w: W, rows: &[MosatsAssessment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header())?;
    for r in rows {
        let mut rec = vec![r.video_id.clone()];
        rec.extend(r.aspects.iter().map(u8::to_string));
        rec.push(r.skill_label.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SkillLabel;

    #[test]
    fn round_trip() {
        let rows = vec![
            MosatsAssessment::new("v01", [3, 3, 4, 2, 3, 3, 4, 4, 3, 2], SkillLabel::Novice).unwrap(),
            MosatsAssessment::new("v02", [5; 10], SkillLabel::Expert).unwrap(),
        ];
        let mut buf = Vec::new();
        write_mosats(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("video_id,aspect_1,"));
        assert_eq!(read_mosats(buf.as_slice(), "m").unwrap(), rows);
    }

    #[test]
    fn reports_bad_rows() {
        let h = header().join(",");
        let bad = format!("{h}\nv,1,2,3,4,5,1,2,3,4,5,novice\nw,1,2,3,4,5,1,2,3,4,9,expert\n");
        match read_mosats(bad.as_bytes(), "m") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = format!("# note\n{h}\nv,1,2,3,4,5,1,2,3,4,5,novice\nw,1,2,3,4,5,1,2,3,4,9,expert\n");
        match read_mosats(bad.as_bytes(), "m") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let bad = format!("{h}\nv,1,2,3,4,5,1,2,3,4,5,master\n");
        assert!(read_mosats(bad.as_bytes(), "m").is_err());
        assert!(read_mosats("video_id,aspect_1\n".as_bytes(), "m").is_err());
    }
}
