//! CSV interchange for annotations, frame labels, probabilities and detections.
//!
//! | file          | header                 |
//! |---------------|------------------------|
//! | annotations   | `start_s,end_s,label`  |
//! | frame labels  | `frame,label`          |
//! | probabilities | `frame,p_intake`       |
//! | detections    | `frame,time_s`         |
//!
//! Frame columns are absolute frame indices; label and probability files must
//! list consecutive frames. Floats are written in shortest round-trip form, so
//! reading back a written file yields identical values.

use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::detector::DetectionList;
use crate::timeline::{AnnotationInterval, FrameLabel, FrameLabelSeries, GestureLabel, ProbabilitySeries};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("expected header '{expected}', found '{found}'")]
    Header { expected: String, found: String },
    #[error("{0}")]
    Content(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CsvError>;

const ANNOTATION_HEADER: [&str; 3] = ["start_s", "end_s", "label"];
const LABEL_HEADER: [&str; 2] = ["frame", "label"];
const PROB_HEADER: [&str; 2] = ["frame", "p_intake"];
const DETECTION_HEADER: [&str; 2] = ["frame", "time_s"];

/// Slack allowed between a detection's `time_s` and `frame / fps`.
const TIME_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    start_s: f64,
    end_s: f64,
    label: String,
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    frame: u64,
    label: String,
}

#[derive(Debug, Deserialize)]
struct ProbRow {
    frame: u64,
    p_intake: f64,
}

#[derive(Debug, Deserialize)]
struct DetectionRow {
    frame: u64,
    time_s: f64,
}

fn row_error(line: u64, message: impl Into<String>) -> CsvError {
    CsvError::Row {
        line,
        message: message.into(),
    }
}

/// Parses every row after checking the header; the callback gets the 1-based line number.
fn read_rows<R, T, F>(reader: R, header: &[&str], mut on_row: F) -> Result<()>
where
    R: Read,
    T: for<'de> Deserialize<'de>,
    F: FnMut(u64, T) -> Result<()>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CsvError::Header {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(row_error(line, e.to_string())),
        }
        let line = record.position().map_or(line, |p| p.line());
        let row: T = record
            .deserialize(Some(&found))
            .map_err(|e| row_error(line, e.to_string()))?;
        on_row(line, row)?;
    }
    Ok(())
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationInterval>> {
    let mut out = Vec::new();
    read_rows(reader, &ANNOTATION_HEADER, |line, row: AnnotationRow| {
        let label: GestureLabel = row.label.parse().map_err(|e: String| row_error(line, e))?;
        let interval = AnnotationInterval::new(row.start_s, row.end_s, label)
            .map_err(|_| row_error(line, format!("invalid interval [{}, {}]", row.start_s, row.end_s)))?;
        out.push(interval);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_annotations<W: Write>(writer: W, intervals: &[AnnotationInterval]) -> Result<()> {
    write_rows(
        writer,
        &ANNOTATION_HEADER,
        intervals
            .iter()
            .map(|a| vec![a.start_s.to_string(), a.end_s.to_string(), a.label.as_str().to_string()]),
    )
}

/// Reads consecutive `frame,value` rows, returning the first frame and the values.
fn read_consecutive<R, T, V, F>(reader: R, header: &[&str], mut split: F) -> Result<(u64, Vec<V>)>
where
    R: Read,
    T: for<'de> Deserialize<'de>,
    F: FnMut(u64, T) -> Result<(u64, V)>,
{
    let mut start = None;
    let mut values = Vec::new();
    read_rows(reader, header, |line, row: T| {
        let (frame, value) = split(line, row)?;
        let first = *start.get_or_insert(frame);
        let expected = first + values.len() as u64;
        if frame != expected {
            return Err(row_error(line, format!("expected frame {expected}, found {frame}")));
        }
        values.push(value);
        Ok(())
    })?;
    match start {
        Some(first) => Ok((first, values)),
        None => Err(CsvError::Content("file has no data rows".into())),
    }
}

pub fn read_labels<R: Read>(reader: R, fps: f64) -> Result<FrameLabelSeries> {
    let (start, labels) = read_consecutive(reader, &LABEL_HEADER, |line, row: LabelRow| {
        let label: FrameLabel = row.label.parse().map_err(|e: String| row_error(line, e))?;
        Ok((row.frame, label))
    })?;
    FrameLabelSeries::new(fps, labels, start).map_err(|e| CsvError::Content(e.to_string()))
}

pub fn write_labels<W: Write>(writer: W, series: &FrameLabelSeries) -> Result<()> {
    write_rows(
        writer,
        &LABEL_HEADER,
        series
            .iter()
            .map(|(frame, label)| vec![frame.to_string(), label.as_str().to_string()]),
    )
}

pub fn read_probabilities<R: Read>(reader: R, fps: f64) -> Result<ProbabilitySeries> {
    let (start, probs) = read_consecutive(reader, &PROB_HEADER, |line, row: ProbRow| {
        if !(0.0..=1.0).contains(&row.p_intake) {
            return Err(row_error(line, format!("probability {} outside [0, 1]", row.p_intake)));
        }
        Ok((row.frame, row.p_intake))
    })?;
    ProbabilitySeries::new(fps, probs, start).map_err(|e| CsvError::Content(e.to_string()))
}

pub fn write_probabilities<W: Write>(writer: W, series: &ProbabilitySeries) -> Result<()> {
    let start = series.start_frame();
    write_rows(
        writer,
        &PROB_HEADER,
        series
            .probs()
            .iter()
            .enumerate()
            .map(|(i, p)| vec![(start + i as u64).to_string(), p.to_string()]),
    )
}

/// Reads detections, rejecting rows whose `time_s` disagrees with `frame / fps`.
pub fn read_detections<R: Read>(reader: R, fps: f64) -> Result<DetectionList> {
    let mut frames = Vec::new();
    read_rows(reader, &DETECTION_HEADER, |line, row: DetectionRow| {
        let expected = row.frame as f64 / fps;
        let close = (row.time_s - expected).abs() <= TIME_TOLERANCE_S;
        if !close {
            return Err(row_error(
                line,
                format!(
                    "time {} s does not match frame {} at {} fps ({} s)",
                    row.time_s, row.frame, fps, expected
                ),
            ));
        }
        if frames.last().is_some_and(|&prev| prev >= row.frame) {
            return Err(row_error(line, format!("frame {} is not after the previous row", row.frame)));
        }
        frames.push(row.frame);
        Ok(())
    })?;
    DetectionList::new(frames, fps).map_err(|e| CsvError::Content(e.to_string()))
}

pub fn write_detections<W: Write>(writer: W, detections: &DetectionList) -> Result<()> {
    write_rows(
        writer,
        &DETECTION_HEADER,
        detections
            .frames()
            .iter()
            .zip(detections.times_s())
            .map(|(f, t)| vec![f.to_string(), t.to_string()]),
    )
}
