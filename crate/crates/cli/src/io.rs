//! Line-delimited CSV formats. UTF-8, `.` decimal separator, LF line
//! endings; floats are written with shortest round-trip precision so a
//! write-then-read reproduces the in-memory values exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use noisydet_core::geom::BBox;
use noisydet_core::mining::ScoredProposal;
use noisydet_core::noise::Annotation;
use noisydet_core::froc::Detection;

use crate::error::{CliError, Result};

/// One annotation row: `image_id,lesion_id,x1,y1,x2,y2,image_width,
/// image_height,case_id`. `case_id` may be empty; it is only required
/// when bootstrapping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub image_id: String,
    pub lesion_id: String,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub image_width: f64,
    pub image_height: f64,
    #[serde(default)]
    pub case_id: String,
}

/// A parsed dataset row: the validated annotation plus its case tag.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub annotation: Annotation,
    pub case_id: String,
}

/// One detection row: `image_id,x1,y1,x2,y2,score`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

/// One proposal row: `x1,y1,x2,y2,true_label,predicted_prob` with
/// `true_label` in {0, 1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub true_label: u8,
    pub predicted_prob: f64,
}

fn context(path: &Path, line: usize, err: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{}:{line}: {err}", path.display()))
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut reader = open_reader(path)?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let line = i + 2; // header is line 1
        rows.push((line, row.map_err(|e| context(path, line, e))?));
    }
    Ok(rows)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetEntry>> {
    read_records::<DatasetRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let bbox = BBox::new(r.x1, r.y1, r.x2, r.y2).map_err(|e| context(path, line, e))?;
            let annotation =
                Annotation::new(r.image_id, r.lesion_id, bbox, r.image_width, r.image_height)
                    .map_err(|e| context(path, line, e))?;
            Ok(DatasetEntry {
                annotation,
                case_id: r.case_id,
            })
        })
        .collect()
}

pub fn write_dataset(path: &Path, entries: &[DatasetEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    for e in entries {
        let a = &e.annotation;
        let b = a.bbox();
        writer
            .serialize(DatasetRecord {
                image_id: a.image_id().to_owned(),
                lesion_id: a.lesion_id().to_owned(),
                x1: b.x1(),
                y1: b.y1(),
                x2: b.x2(),
                y2: b.y2(),
                image_width: a.image_width(),
                image_height: a.image_height(),
                case_id: e.case_id.clone(),
            })
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    read_records::<DetectionRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let bbox = BBox::new(r.x1, r.y1, r.x2, r.y2).map_err(|e| context(path, line, e))?;
            Detection::new(r.image_id, bbox, r.score).map_err(|e| context(path, line, e))
        })
        .collect()
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    for d in detections {
        let b = d.bbox();
        writer
            .serialize(DetectionRecord {
                image_id: d.image_id().to_owned(),
                x1: b.x1(),
                y1: b.y1(),
                x2: b.x2(),
                y2: b.y2(),
                score: d.score(),
            })
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_proposals(path: &Path) -> Result<Vec<ScoredProposal>> {
    read_records::<ProposalRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let bbox = BBox::new(r.x1, r.y1, r.x2, r.y2).map_err(|e| context(path, line, e))?;
            let label = match r.true_label {
                0 => false,
                1 => true,
                other => {
                    return Err(context(path, line, format!("true_label must be 0 or 1, got {other}")))
                }
            };
            ScoredProposal::new(bbox, label, r.predicted_prob).map_err(|e| context(path, line, e))
        })
        .collect()
}

/// Writes rows of already-formatted cells under a header. Used for the
/// small report formats (census table, curve points, histograms, selected
/// ROIs).
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    writer
        .write_record(header)
        .map_err(|e| CliError::validation(e.to_string()))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
