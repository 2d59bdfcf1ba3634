//! On-disk format for one recorded calibration session.
//!
//! A session log is CSV with `# key: value` header comments:
//!
//! ```text
//! # sample_rate: 104
//! # full_scale: 245
//! # device: LSM9DS1
//! # theta_total: 360
//! stage,t,m_x,m_y,m_z
//! static,0,0.031,-0.012,0.004
//! ...
//! rotate:x,3.0,85.2,0.4,-1.1
//! ```
//!
//! Rows with the same stage tag that follow each other form one segment. A
//! valid log has exactly one `static` segment, first, and then at least three
//! `rotate:<axis>` segments. Rates are deg/s, time is seconds. The estimator
//! uses `1 / sample_rate` as the sample period; timestamps are only checked for
//! monotonicity.

use std::fmt;
use std::io::{self, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{Axis, RawSample, RotationObservation, Session, StaticObservation};

pub const DEFAULT_THETA_TOTAL: f64 = 360.0;
const COLUMNS: [&str; 5] = ["stage", "t", "m_x", "m_y", "m_z"];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("header: {0}")]
    Header(String),
    #[error("protocol violation in {stage} stage: {message}")]
    Protocol { stage: String, message: String },
    #[error("protocol violation: {0}")]
    Sequence(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Static,
    Rotate(Axis),
}

impl Stage {
    fn parse(tag: &str) -> Option<Self> {
        match tag.trim() {
            "static" => Some(Stage::Static),
            "rotate:x" => Some(Stage::Rotate(Axis::X)),
            "rotate:y" => Some(Stage::Rotate(Axis::Y)),
            "rotate:z" => Some(Stage::Rotate(Axis::Z)),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Static => f.write_str("static"),
            Stage::Rotate(axis) => write!(f, "rotate:{axis}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub sample_rate: f64,
    pub full_scale: Option<f64>,
    pub device: String,
    pub theta_total: f64,
}

impl LogHeader {
    pub fn new(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            full_scale: None,
            device: String::new(),
            theta_total: DEFAULT_THETA_TOTAL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub stage: Stage,
    /// Line number of the first row, when parsed from text.
    pub line: Option<u64>,
    pub rows: Vec<LogRow>,
}

impl Segment {
    pub fn samples(&self) -> Vec<RawSample<f64>> {
        self.rows.iter().map(|r| RawSample(r.m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    stage: String,
    t: f64,
    m_x: f64,
    m_y: f64,
    m_z: f64,
}

impl SessionLog {
    pub fn parse(text: &str) -> Result<Self, LogError> {
        let mut sample_rate = None;
        let mut header = LogHeader::new(0.0);
        for (i, line) in text.lines().enumerate() {
            let Some(comment) = line.trim_start().strip_prefix('#') else {
                continue;
            };
            let Some((key, value)) = comment.split_once(':') else {
                continue;
            };
            let line_no = i as u64 + 1;
            let number = |v: &str| {
                v.trim().parse::<f64>().map_err(|e| LogError::Parse {
                    line: line_no,
                    message: format!("header `{}`: {e}", key.trim()),
                })
            };
            match key.trim() {
                "sample_rate" => sample_rate = Some(number(value)?),
                "full_scale" => header.full_scale = Some(number(value)?),
                "theta_total" => header.theta_total = number(value)?,
                "device" => header.device = value.trim().to_string(),
                _ => {}
            }
        }
        header.sample_rate =
            sample_rate.ok_or_else(|| LogError::Header("missing `# sample_rate: <Hz>`".into()))?;
        if !(header.sample_rate > 0.0) || !header.sample_rate.is_finite() {
            return Err(LogError::Header(format!(
                "sample_rate must be positive, got {}",
                header.sample_rate
            )));
        }
        if !(header.theta_total > 0.0) || !header.theta_total.is_finite() {
            return Err(LogError::Header(format!(
                "theta_total must be positive, got {}",
                header.theta_total
            )));
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        if columns.iter().collect::<Vec<_>>() != COLUMNS {
            return Err(LogError::Header(format!(
                "expected columns `{}`, found `{}`",
                COLUMNS.join(","),
                columns.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut segments: Vec<Segment> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let row: CsvRow = record
                .deserialize(Some(&columns))
                .map_err(|e| LogError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            let stage = Stage::parse(&row.stage).ok_or_else(|| LogError::Parse {
                line,
                message: format!(
                    "unknown stage tag `{}` (expected static or rotate:x|y|z)",
                    row.stage
                ),
            })?;
            let m = [row.m_x, row.m_y, row.m_z];
            if !row.t.is_finite() || m.iter().any(|v| !v.is_finite()) {
                return Err(LogError::Parse {
                    line,
                    message: "non-finite value".into(),
                });
            }
            if let Some(prev) = segments.last().and_then(|s| s.rows.last()) {
                if row.t <= prev.t {
                    return Err(LogError::Parse {
                        line,
                        message: format!(
                            "timestamp {} does not increase (previous {})",
                            row.t, prev.t
                        ),
                    });
                }
            }
            let log_row = LogRow { t: row.t, m };
            match segments.last_mut() {
                Some(seg) if seg.stage == stage => seg.rows.push(log_row),
                _ => segments.push(Segment {
                    stage,
                    line: Some(line),
                    rows: vec![log_row],
                }),
            }
        }
        Ok(Self { header, segments })
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# sample_rate: {}", self.header.sample_rate)?;
        if let Some(fs) = self.header.full_scale {
            writeln!(w, "# full_scale: {fs}")?;
        }
        if !self.header.device.is_empty() {
            writeln!(w, "# device: {}", self.header.device)?;
        }
        writeln!(w, "# theta_total: {}", self.header.theta_total)?;
        writeln!(w, "{}", COLUMNS.join(","))?;
        for seg in &self.segments {
            for r in &seg.rows {
                writeln!(w, "{},{},{},{},{}", seg.stage, r.t, r.m[0], r.m[1], r.m[2])?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("log text is utf-8")
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.header.sample_rate
    }

    /// Static segment followed by the rotation segments, after checking the
    /// stage sequence.
    pub fn protocol(&self) -> Result<(&Segment, Vec<&Segment>), LogError> {
        let Some((first, rest)) = self.segments.split_first() else {
            return Err(LogError::Sequence("log contains no samples".into()));
        };
        if first.stage != Stage::Static {
            return Err(LogError::Sequence(format!(
                "log must start with a static stage, found {}",
                first.stage
            )));
        }
        if let Some(extra) = rest.iter().find(|s| s.stage == Stage::Static) {
            return Err(LogError::Sequence(format!(
                "second static stage{}; exactly one is allowed",
                extra
                    .line
                    .map(|l| format!(" at line {l}"))
                    .unwrap_or_default()
            )));
        }
        if rest.len() < 3 {
            return Err(LogError::Sequence(format!(
                "at least 3 rotation stages are required, found {}",
                rest.len()
            )));
        }
        for seg in &self.segments {
            if seg.rows.len() < 2 {
                return Err(LogError::Protocol {
                    stage: seg.stage.to_string(),
                    message: format!("only {} sample(s); at least 2 are required", seg.rows.len()),
                });
            }
        }
        Ok((first, rest.iter().collect()))
    }

    /// Rotation axes in the order they were recorded.
    pub fn rotation_axes(&self) -> Vec<Axis> {
        self.segments
            .iter()
            .filter_map(|s| match s.stage {
                Stage::Rotate(a) => Some(a),
                Stage::Static => None,
            })
            .collect()
    }

    /// Number of samples at or beyond the declared full-scale range.
    pub fn saturated_samples(&self) -> usize {
        let Some(fs) = self.header.full_scale else {
            return 0;
        };
        self.segments
            .iter()
            .flat_map(|s| &s.rows)
            .filter(|r| !RawSample(r.m).is_within(Some(fs)))
            .count()
    }

    pub fn to_session(&self) -> Result<Session<f64>, LogError> {
        let (stat, rotations) = self.protocol()?;
        let protocol_err = |seg: &Segment, e: crate::CalibrationError| LogError::Protocol {
            stage: seg.stage.to_string(),
            message: e.to_string(),
        };
        let static_stage =
            StaticObservation::from_samples(&stat.samples()).map_err(|e| protocol_err(stat, e))?;
        let dt = self.sample_period();
        let rotations = rotations
            .iter()
            .map(|seg| {
                RotationObservation::from_samples(&seg.samples(), dt, self.header.theta_total)
                    .map_err(|e| protocol_err(seg, e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Session::new(static_stage, rotations, self.header.sample_rate)
            .map_err(|e| LogError::Sequence(e.to_string()))
    }
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> LogError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("expected {expected_len} fields, found {len} (truncated row?)")
        }
        _ => e.to_string(),
    };
    LogError::Parse { line, message }
}
