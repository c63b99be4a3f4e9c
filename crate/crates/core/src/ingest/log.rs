//! Raw sensor logs and their CSV representation.
//!
//! One file holds one recording. `#` lines are comments; two of them carry
//! metadata:
//!
//! ```text
//! # placement: leg
//! # subject: s03
//! t,gyro_x,gyro_y,gyro_z,acce_x,acce_y,acce_z,grav_x,grav_y,grav_z,ori_w,ori_x,ori_y,ori_z
//! ```
//!
//! Ground-truth columns `pos_x,pos_y,pos_z,gt_ori_w,gt_ori_x,gt_ori_y,gt_ori_z`
//! are optional. Quaternions are scalar first and map device to world.
//! Floats are written in shortest round-trip form, so a file produced by
//! [`write_csv`] reads back and rewrites byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::IngestError;
use crate::sequence::{Placement, Sequence};

/// Timestamped samples of one channel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Channel<const D: usize> {
    pub t: Vec<f64>,
    pub v: Vec<[f64; D]>,
}

impl<const D: usize> Channel<D> {
    pub fn new() -> Self {
        Self {
            t: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: [f64; D]) {
        self.t.push(t);
        self.v.push(v);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.t.first()?, *self.t.last()?))
    }
}

/// Per-channel sample lists with independent timestamps.
///
/// Quaternion channels keep the raw `[w, x, y, z]` text values; they are
/// normalized during [`synchronize`](super::synchronize).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawLog {
    pub gyro: Channel<3>,
    pub linacc: Channel<3>,
    pub gravity: Channel<3>,
    pub orientation: Channel<4>,
    pub gt_position: Option<Channel<3>>,
    pub gt_orientation: Option<Channel<4>>,
    pub placement: Option<Placement>,
    pub subject: String,
}

impl RawLog {
    /// Number of rows per channel, in the order gyro, linacc, gravity, orientation.
    pub fn row_counts(&self) -> [usize; 4] {
        [
            self.gyro.len(),
            self.linacc.len(),
            self.gravity.len(),
            self.orientation.len(),
        ]
    }

    /// Lossless conversion of a sequence back into channels on its own grid.
    pub fn from_sequence(seq: &Sequence) -> RawLog {
        let mut log = RawLog {
            placement: seq.placement,
            subject: seq.subject.clone(),
            ..RawLog::default()
        };
        let gt = seq.has_ground_truth();
        let mut pos = Channel::new();
        let mut gt_ori = Channel::new();
        for f in seq.frames() {
            log.gyro.push(f.timestamp, f.gyro.to_array());
            log.linacc.push(f.timestamp, f.linacc.to_array());
            log.gravity.push(f.timestamp, f.gravity.to_array());
            log.orientation.push(f.timestamp, f.orientation.rotation().wxyz());
            if gt {
                pos.push(f.timestamp, f.gt_position.unwrap_or_default().to_array());
                let o = f.gt_orientation.unwrap_or(f.orientation);
                gt_ori.push(f.timestamp, o.rotation().wxyz());
            }
        }
        if gt {
            log.gt_position = Some(pos);
            log.gt_orientation = Some(gt_ori);
        }
        log
    }
}

const REQUIRED: [&str; 14] = [
    "t", "gyro_x", "gyro_y", "gyro_z", "acce_x", "acce_y", "acce_z", "grav_x", "grav_y", "grav_z",
    "ori_w", "ori_x", "ori_y", "ori_z",
];

const GROUND_TRUTH: [&str; 7] = [
    "pos_x", "pos_y", "pos_z", "gt_ori_w", "gt_ori_x", "gt_ori_y", "gt_ori_z",
];

pub fn parse_csv(path: impl AsRef<Path>) -> Result<RawLog, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv_str(&text)
}

pub fn parse_csv_str(text: &str) -> Result<RawLog, IngestError> {
    let mut log = RawLog::default();
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = comment.split_once(':') else {
            continue;
        };
        match key.trim() {
            "placement" => {
                log.placement = Some(value.parse().map_err(|e| IngestError::Schema {
                    line: Some(i as u64 + 1),
                    message: format!("{e}"),
                })?)
            }
            "subject" => log.subject = value.trim().to_string(),
            _ => {}
        }
    }

    let mut reader = ::csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| IngestError::Parse {
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| header.iter().position(|h| h == name);
    let mut required = [0usize; 14];
    for (slot, name) in required.iter_mut().zip(REQUIRED) {
        *slot = column(name).ok_or_else(|| IngestError::Schema {
            line: None,
            message: format!("missing required column {name:?}"),
        })?;
    }
    let gt_cols: Vec<Option<usize>> = GROUND_TRUTH.iter().map(|n| column(n)).collect();
    let gt_count = gt_cols.iter().flatten().count();
    if gt_count != 0 && gt_count != GROUND_TRUTH.len() {
        let missing: Vec<&str> = GROUND_TRUTH
            .iter()
            .zip(&gt_cols)
            .filter(|(_, c)| c.is_none())
            .map(|(n, _)| *n)
            .collect();
        return Err(IngestError::Schema {
            line: None,
            message: format!("incomplete ground-truth columns, missing {missing:?}"),
        });
    }
    let gt_cols: Option<Vec<usize>> = gt_cols.into_iter().collect();
    let mut pos = Channel::new();
    let mut gt_ori = Channel::new();

    let mut previous: Option<f64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> Result<f64, IngestError> {
            let raw = record.get(idx).ok_or_else(|| IngestError::Parse {
                line,
                message: format!("missing field {:?}", header.get(idx).unwrap_or("?")),
            })?;
            let v: f64 = raw.parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{:?} is not a number in column {:?}", raw, &header[idx]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(IngestError::Parse {
                    line,
                    message: format!("non-finite value in column {:?}", &header[idx]),
                })
            }
        };
        let t = field(required[0])?;
        if let Some(p) = previous {
            if t <= p {
                return Err(IngestError::Schema {
                    line: Some(line),
                    message: format!("timestamp {t} does not increase (previous {p})"),
                });
            }
        }
        previous = Some(t);
        let v3 = |a: usize| -> Result<[f64; 3], IngestError> {
            Ok([field(required[a])?, field(required[a + 1])?, field(required[a + 2])?])
        };
        log.gyro.push(t, v3(1)?);
        log.linacc.push(t, v3(4)?);
        log.gravity.push(t, v3(7)?);
        log.orientation.push(
            t,
            [
                field(required[10])?,
                field(required[11])?,
                field(required[12])?,
                field(required[13])?,
            ],
        );
        if let Some(c) = &gt_cols {
            pos.push(t, [field(c[0])?, field(c[1])?, field(c[2])?]);
            gt_ori.push(t, [field(c[3])?, field(c[4])?, field(c[5])?, field(c[6])?]);
        }
    }
    if gt_cols.is_some() {
        log.gt_position = Some(pos);
        log.gt_orientation = Some(gt_ori);
    }
    Ok(log)
}

/// Canonical text form of a log whose channels share timestamps.
pub fn to_csv_string(log: &RawLog) -> Result<String, IngestError> {
    let t = &log.gyro.t;
    let same = |other: &[f64]| other == t.as_slice();
    let gt = match (&log.gt_position, &log.gt_orientation) {
        (Some(p), Some(o)) => Some((p, o)),
        (None, None) => None,
        _ => {
            return Err(IngestError::Schema {
                line: None,
                message: "ground-truth position and orientation must both be present".into(),
            })
        }
    };
    if !same(&log.linacc.t)
        || !same(&log.gravity.t)
        || !same(&log.orientation.t)
        || gt.is_some_and(|(p, o)| !same(&p.t) || !same(&o.t))
    {
        return Err(IngestError::MixedTimestamps);
    }

    let mut out = String::new();
    if let Some(p) = log.placement {
        writeln!(out, "# placement: {p}").unwrap();
    }
    if !log.subject.is_empty() {
        writeln!(out, "# subject: {}", log.subject).unwrap();
    }
    let mut header: Vec<&str> = REQUIRED.to_vec();
    if gt.is_some() {
        header.extend(GROUND_TRUTH);
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..t.len() {
        let mut row = vec![t[i]];
        row.extend(log.gyro.v[i]);
        row.extend(log.linacc.v[i]);
        row.extend(log.gravity.v[i]);
        row.extend(log.orientation.v[i]);
        if let Some((p, o)) = gt {
            row.extend(p.v[i]);
            row.extend(o.v[i]);
        }
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(log: &RawLog, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let text = to_csv_string(log)?;
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a sequence as a canonical CSV.
pub fn write_sequence_csv(seq: &Sequence, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_csv(&RawLog::from_sequence(seq), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# placement: hand
# subject: s07
t,gyro_x,gyro_y,gyro_z,acce_x,acce_y,acce_z,grav_x,grav_y,grav_z,ori_w,ori_x,ori_y,ori_z
0,0.1,0.2,0.3,1,2,3,0,9.81,0,1,0,0,0
0.005,0.1,0.2,0.3,1,2,3,0,9.81,0,1,0,0,0
0.01,-0.5,0.25,0.0000001,1,2,3,0.5,9.8,0.1,0.7071067811865476,0,0.7071067811865476,0
";

    #[test]
    fn parses_three_rows() {
        let log = parse_csv_str(SMALL).unwrap();
        assert_eq!(log.row_counts(), [3, 3, 3, 3]);
        assert_eq!(log.placement, Some(Placement::Hand));
        assert_eq!(log.subject, "s07");
        assert_eq!(log.gyro.v[2], [-0.5, 0.25, 1e-7]);
        assert!(log.gt_position.is_none());
    }

    #[test]
    fn non_monotonic_timestamp_names_line() {
        let text = SMALL.replace("0.01,-0.5", "0.004,-0.5");
        match parse_csv_str(&text) {
            Err(IngestError::Schema { line: Some(6), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let text = SMALL.replace(",ori_z", "");
        assert!(matches!(
            parse_csv_str(&text),
            Err(IngestError::Schema { line: None, .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = SMALL.replace("0.005,0.1", "0.005,abc");
        match parse_csv_str(&text) {
            Err(IngestError::Parse { line: 5, message }) => assert!(message.contains("abc")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let log = parse_csv_str(SMALL).unwrap();
        let text = to_csv_string(&log).unwrap();
        assert_eq!(text, SMALL);
    }
}
