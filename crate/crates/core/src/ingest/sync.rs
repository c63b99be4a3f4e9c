//! Resampling of asynchronous channels onto a uniform grid.

use crate::error::IngestError;
use crate::frame::{FrameRotation, Rotation, Vec3};
use crate::sequence::{SensorFrame, Sequence};

use super::log::{Channel, RawLog};

/// Largest tolerated spacing between consecutive samples of one channel.
pub const MAX_GAP_S: f64 = 0.5;

/// Bracketing samples for `t`: `(i, j, s)` with `value = v[i] + s (v[j] - v[i])`.
///
/// An exact timestamp hit returns `(i, i, 0)` so existing samples are copied
/// without arithmetic.
fn bracket(ts: &[f64], t: f64) -> (usize, usize, f64) {
    let j = ts.partition_point(|&x| x < t);
    if j >= ts.len() {
        let last = ts.len() - 1;
        return (last, last, 0.0);
    }
    if ts[j] == t || j == 0 {
        return (j, j, 0.0);
    }
    let i = j - 1;
    (i, j, (t - ts[i]) / (ts[j] - ts[i]))
}

fn lerp<const D: usize>(c: &Channel<D>, t: f64) -> [f64; D] {
    let (i, j, s) = bracket(&c.t, t);
    if i == j {
        return c.v[i];
    }
    let mut out = [0.0; D];
    for d in 0..D {
        out[d] = c.v[i][d] + s * (c.v[j][d] - c.v[i][d]);
    }
    out
}

fn quaternion(name: &'static str, t: f64, q: [f64; 4]) -> Result<Rotation, IngestError> {
    Rotation::from_wxyz(q[0], q[1], q[2], q[3]).ok_or_else(|| IngestError::Schema {
        line: None,
        message: format!("{name} quaternion at t={t} has zero norm"),
    })
}

fn slerp(name: &'static str, c: &Channel<4>, t: f64) -> Result<Rotation, IngestError> {
    let (i, j, s) = bracket(&c.t, t);
    let a = quaternion(name, c.t[i], c.v[i])?;
    if i == j {
        return Ok(a);
    }
    let b = quaternion(name, c.t[j], c.v[j])?;
    Ok(a.slerp(&b, s))
}

fn check_channel<const D: usize>(name: &'static str, c: &Channel<D>) -> Result<(), IngestError> {
    if c.t.len() != c.v.len() {
        return Err(IngestError::Schema {
            line: None,
            message: format!("{name} channel has mismatched timestamp and value counts"),
        });
    }
    if c.is_empty() {
        return Err(IngestError::Schema {
            line: None,
            message: format!("{name} channel is empty"),
        });
    }
    for w in c.t.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(IngestError::Schema {
                line: None,
                message: format!("{name} timestamps not increasing at t={}", w[1]),
            });
        }
        if gap > MAX_GAP_S {
            return Err(IngestError::Gap {
                channel: name,
                at: w[0],
                gap,
            });
        }
    }
    Ok(())
}

/// Interpolates every channel onto `t0 + k / rate` over the common time span.
///
/// Vector channels are interpolated linearly, orientations by slerp.
/// Grid points that coincide with a sample copy it exactly, which makes the
/// operation idempotent.
pub fn synchronize(raw: &RawLog, target_rate: f64) -> Result<Sequence, IngestError> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(IngestError::InvalidRate(target_rate));
    }
    check_channel("gyro", &raw.gyro)?;
    check_channel("linacc", &raw.linacc)?;
    check_channel("gravity", &raw.gravity)?;
    check_channel("orientation", &raw.orientation)?;
    let mut spans = vec![
        raw.gyro.span(),
        raw.linacc.span(),
        raw.gravity.span(),
        raw.orientation.span(),
    ];
    let gt = match (&raw.gt_position, &raw.gt_orientation) {
        (Some(p), Some(o)) => {
            check_channel("gt_position", p)?;
            check_channel("gt_orientation", o)?;
            spans.push(p.span());
            spans.push(o.span());
            Some((p, o))
        }
        (None, None) => None,
        _ => {
            return Err(IngestError::Schema {
                line: None,
                message: "ground-truth position and orientation must both be present".into(),
            })
        }
    };
    let spans: Vec<(f64, f64)> = spans.into_iter().flatten().collect();
    let t0 = spans.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let t1 = spans.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if t1 < t0 {
        return Err(IngestError::NoOverlap);
    }
    let n = ((t1 - t0) * target_rate + 1e-9).floor() as usize + 1;

    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = t0 + k as f64 / target_rate;
        let (gt_position, gt_orientation) = match gt {
            Some((p, o)) => (
                Some(Vec3::from_array(lerp(p, t))),
                Some(FrameRotation::new(slerp("gt_orientation", o, t)?)),
            ),
            None => (None, None),
        };
        frames.push(SensorFrame {
            timestamp: t,
            gyro: Vec3::from_array(lerp(&raw.gyro, t)),
            linacc: Vec3::from_array(lerp(&raw.linacc, t)),
            gravity: Vec3::from_array(lerp(&raw.gravity, t)),
            orientation: FrameRotation::new(slerp("orientation", &raw.orientation, t)?),
            gt_position,
            gt_orientation,
        });
    }
    Ok(Sequence::new(
        frames,
        target_rate,
        raw.placement,
        raw.subject.clone(),
    )?)
}
