//! Motion scripts and their analytic body kinematics.

use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::sequence::Placement;

/// Fastest speed a script may request, m/s.
pub const MAX_SPEED: f64 = 3.0;

/// Shortest allowed script, s.
pub const MIN_DURATION: f64 = 10.0;

/// One piece of a walk. Headings are yaw angles about world `+y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Constant speed along the current heading.
    Straight { speed: f64, duration: f64 },
    /// Constant turn rate at the current speed (rad/s, positive turns left).
    Turn { rate: f64, duration: f64 },
    /// Standing still.
    Pause { duration: f64 },
    /// Smooth speed change along the current heading.
    SpeedRamp { from: f64, to: f64, duration: f64 },
    /// Smoothly change how the device faces relative to the travel direction,
    /// keeping speed and heading. `offset = π` walks backwards.
    Face { offset: f64, duration: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Straight { duration, .. }
            | Segment::Turn { duration, .. }
            | Segment::Pause { duration }
            | Segment::SpeedRamp { duration, .. }
            | Segment::Face { duration, .. } => duration,
        }
    }
}

/// A walk plus how the phone is carried.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionScript {
    pub name: String,
    pub placement: Placement,
    /// Fixed yaw between travel direction and device forward axis, rad.
    #[serde(default)]
    pub yaw_offset: f64,
    /// Overlay the placement's gait oscillation. Off gives the bare body path.
    #[serde(default = "default_true")]
    pub gait: bool,
    pub segments: Vec<Segment>,
}

fn default_true() -> bool {
    true
}

/// Body state at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState {
    /// Horizontal position `(x, z)` of the body path, m.
    pub position: [f64; 2],
    /// Travel heading, rad. Direction `(cos θ, 0, -sin θ)` in world.
    pub heading: f64,
    pub speed: f64,
    /// Device yaw relative to the travel heading (without the fixed offset).
    pub face: f64,
}

/// Travel direction for heading `theta` as world `(x, z)`.
pub fn heading_dir(theta: f64) -> [f64; 2] {
    [theta.cos(), -theta.sin()]
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// `∫_0^x smoothstep`, for `x` in `[0, 1]`.
fn smoothstep_integral(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x - 0.5 * x * x * x * x
}

impl MotionScript {
    pub fn new(name: impl Into<String>, placement: Placement, segments: Vec<Segment>) -> Self {
        Self {
            name: name.into(),
            placement,
            yaw_offset: 0.0,
            gait: true,
            segments,
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    fn invalid(&self, message: String) -> SynthError {
        SynthError::Script {
            name: self.name.clone(),
            message,
        }
    }

    /// Checks durations, speed bounds and speed continuity between segments.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.segments.is_empty() {
            return Err(self.invalid("no segments".into()));
        }
        if !self.yaw_offset.is_finite() {
            return Err(self.invalid("yaw_offset must be finite".into()));
        }
        let mut speed: Option<f64> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            let d = seg.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(self.invalid(format!("segment {i}: duration must be positive")));
            }
            let (start, end) = match *seg {
                Segment::Straight { speed: s, .. } => (s, s),
                Segment::Pause { .. } => (0.0, 0.0),
                Segment::SpeedRamp { from, to, .. } => (from, to),
                Segment::Turn { rate, .. } => {
                    if !rate.is_finite() {
                        return Err(self.invalid(format!("segment {i}: turn rate must be finite")));
                    }
                    let s = speed.unwrap_or(0.0);
                    (s, s)
                }
                Segment::Face { offset, .. } => {
                    if !offset.is_finite() {
                        return Err(self.invalid(format!("segment {i}: offset must be finite")));
                    }
                    let s = speed.unwrap_or(0.0);
                    (s, s)
                }
            };
            for v in [start, end] {
                if !(0.0..=MAX_SPEED).contains(&v) {
                    return Err(self.invalid(format!(
                        "segment {i}: speed {v} outside [0, {MAX_SPEED}] m/s"
                    )));
                }
            }
            if let Some(prev) = speed {
                if (prev - start).abs() > 1e-12 {
                    return Err(self.invalid(format!(
                        "segment {i} starts at {start} m/s but the previous one ends at {prev} m/s"
                    )));
                }
            }
            speed = Some(end);
        }
        let total = self.duration();
        if total < MIN_DURATION - 1e-9 {
            return Err(self.invalid(format!(
                "total duration {total} s is shorter than {MIN_DURATION} s"
            )));
        }
        Ok(())
    }

    /// Body path sampled analytically.
    pub fn kinematics(&self) -> Result<Kinematics, SynthError> {
        self.validate()?;
        let mut starts = Vec::with_capacity(self.segments.len());
        let mut state = BodyState {
            position: [0.0, 0.0],
            heading: 0.0,
            speed: match self.segments[0] {
                Segment::Straight { speed, .. } => speed,
                Segment::SpeedRamp { from, .. } => from,
                _ => 0.0,
            },
            face: 0.0,
        };
        let mut t0 = 0.0;
        for seg in &self.segments {
            starts.push((t0, state));
            state = advance(seg, &state, seg.duration());
            t0 += seg.duration();
        }
        Ok(Kinematics {
            segments: self.segments.clone(),
            starts,
            end: (t0, state),
        })
    }
}

/// Analytic state `tau` seconds into `seg`, starting from `s0`.
fn advance(seg: &Segment, s0: &BodyState, tau: f64) -> BodyState {
    let [x0, z0] = s0.position;
    let mut out = *s0;
    match *seg {
        Segment::Straight { speed, .. } => {
            let [ux, uz] = heading_dir(s0.heading);
            out.position = [x0 + speed * tau * ux, z0 + speed * tau * uz];
            out.speed = speed;
        }
        Segment::Pause { .. } => out.speed = 0.0,
        Segment::Turn { rate, .. } => {
            let s = s0.speed;
            let th = s0.heading + rate * tau;
            if rate.abs() < 1e-12 {
                let [ux, uz] = heading_dir(s0.heading);
                out.position = [x0 + s * tau * ux, z0 + s * tau * uz];
            } else {
                out.position = [
                    x0 + s / rate * (th.sin() - s0.heading.sin()),
                    z0 + s / rate * (th.cos() - s0.heading.cos()),
                ];
            }
            out.heading = th;
        }
        Segment::SpeedRamp { from, to, duration } => {
            let u = tau / duration;
            let dist = from * tau + (to - from) * duration * smoothstep_integral(u);
            let [ux, uz] = heading_dir(s0.heading);
            out.position = [x0 + dist * ux, z0 + dist * uz];
            out.speed = from + (to - from) * smoothstep(u);
        }
        Segment::Face { offset, duration } => {
            let s = s0.speed;
            let [ux, uz] = heading_dir(s0.heading);
            out.position = [x0 + s * tau * ux, z0 + s * tau * uz];
            out.face = s0.face + (offset - s0.face) * smoothstep(tau / duration);
        }
    }
    out
}

/// Precomputed segment boundaries for fast state queries.
#[derive(Clone, Debug)]
pub struct Kinematics {
    segments: Vec<Segment>,
    starts: Vec<(f64, BodyState)>,
    end: (f64, BodyState),
}

impl Kinematics {
    pub fn duration(&self) -> f64 {
        self.end.0
    }

    /// Body state at time `t` (clamped to the script span).
    pub fn state(&self, t: f64) -> BodyState {
        if t >= self.end.0 {
            return self.end.1;
        }
        let i = self
            .starts
            .partition_point(|(t0, _)| *t0 <= t)
            .saturating_sub(1);
        let (t0, s0) = self.starts[i];
        advance(&self.segments[i], &s0, (t - t0).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn script(segments: Vec<Segment>) -> MotionScript {
        MotionScript::new("t", Placement::Body, segments)
    }

    #[test]
    fn straight_endpoint_is_exact() {
        let k = script(vec![Segment::Straight {
            speed: 1.0,
            duration: 10.0,
        }])
        .kinematics()
        .unwrap();
        assert_eq!(k.state(10.0).position, [10.0, 0.0]);
    }

    #[test]
    fn turn_rotates_heading_by_rate_times_time() {
        let k = script(vec![
            Segment::Straight { speed: 1.0, duration: 1.0 },
            Segment::Turn { rate: PI / 10.0, duration: 10.0 },
        ])
        .kinematics()
        .unwrap();
        assert!((k.state(11.0).heading - PI).abs() < 1e-12);
    }

    #[test]
    fn square_loop_closes() {
        let mut segs = Vec::new();
        for _ in 0..4 {
            segs.push(Segment::Straight { speed: 1.3, duration: 4.0 });
            segs.push(Segment::Turn { rate: PI / 4.0, duration: 2.0 });
        }
        let k = script(segs).kinematics().unwrap();
        let [x, z] = k.state(k.duration()).position;
        assert!(x.hypot(z) < 1e-9, "closure {x} {z}");
    }

    #[test]
    fn ramp_distance_is_mean_speed_times_time() {
        let k = script(vec![
            Segment::SpeedRamp { from: 0.0, to: 2.0, duration: 4.0 },
            Segment::Straight { speed: 2.0, duration: 6.0 },
        ])
        .kinematics()
        .unwrap();
        assert!((k.state(4.0).position[0] - 4.0).abs() < 1e-12);
        assert_eq!(k.state(4.0).speed, 2.0);
    }

    #[test]
    fn rejects_speed_jumps_and_short_scripts() {
        let jump = script(vec![
            Segment::Straight { speed: 1.0, duration: 5.0 },
            Segment::Straight { speed: 1.5, duration: 5.0 },
        ]);
        assert!(jump.validate().is_err());
        let short = script(vec![Segment::Pause { duration: 3.0 }]);
        assert!(short.validate().is_err());
        let fast = script(vec![Segment::Straight { speed: 3.5, duration: 20.0 }]);
        assert!(fast.validate().is_err());
    }

    #[test]
    fn face_changes_only_device_yaw() {
        let k = script(vec![
            Segment::Straight { speed: 1.0, duration: 5.0 },
            Segment::Face { offset: PI, duration: 2.0 },
            Segment::Straight { speed: 1.0, duration: 5.0 },
        ])
        .kinematics()
        .unwrap();
        let s = k.state(12.0);
        assert!((s.face - PI).abs() < 1e-12);
        assert!((s.position[0] - 12.0).abs() < 1e-12);
        assert_eq!(s.heading, 0.0);
    }
}
