//! Trajectories and the Euler double integrator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::correction::CorrectionKnots;
use crate::error::EvalError;
use crate::frame::{Vec3, World};
use crate::sequence::{SensorFrame, Sequence};

/// Per-frame world positions and velocities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub timestamps: Vec<f64>,
    pub positions: Vec<Vec3<World>>,
    pub velocities: Vec<Vec3<World>>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            timestamps: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            velocities: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, p: Vec3<World>, v: Vec3<World>) {
        self.timestamps.push(t);
        self.positions.push(p);
        self.velocities.push(v);
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Horizontal `(x, z)` positions.
    pub fn planar(&self) -> Vec<[f64; 2]> {
        self.positions.iter().map(|p| [p.x(), p.z()]).collect()
    }

    pub fn last_position(&self) -> Option<Vec3<World>> {
        self.positions.last().copied()
    }

    /// CSV `t,x,y,z,vx,vy,vz`, 9 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,x,y,z,vx,vy,vz\n");
        for i in 0..self.len() {
            let p = self.positions[i];
            let v = self.velocities[i];
            let vals = [self.timestamps[i], p.x(), p.y(), p.z(), v.x(), v.y(), v.z()];
            for (k, x) in vals.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{x:.8e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Trajectory, EvalError> {
        let path = path.as_ref();
        let bad = |msg: String| EvalError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| bad(e.to_string()))?;
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let expected = ["t", "x", "y", "z", "vx", "vy", "vz"];
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(bad(format!("expected header {}", expected.join(","))));
        }
        let mut traj = Trajectory::default();
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("line {line}: {e}")))?;
            if v.len() != 7 {
                return Err(bad(format!("line {line}: expected 7 fields")));
            }
            traj.push(
                v[0],
                Vec3::new(v[1], v[2], v[3]),
                Vec3::new(v[4], v[5], v[6]),
            );
        }
        Ok(traj)
    }

    /// Ground-truth trajectory of a sequence (positions only, velocities zero).
    pub fn ground_truth(seq: &Sequence) -> Option<Trajectory> {
        let p = seq.gt_positions()?;
        let mut t = Trajectory::with_capacity(p.len());
        for (f, p) in seq.frames().iter().zip(p) {
            t.push(f.timestamp, p, Vec3::zeros());
        }
        Some(t)
    }
}

/// Integrator switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntegrationOptions {
    /// Zero the world vertical velocity after every step (flat floor).
    pub zero_vertical: bool,
    /// Advance position with the updated velocity instead of the previous one.
    pub semi_implicit: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            zero_vertical: true,
            semi_implicit: false,
        }
    }
}

/// Position and velocity at one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
}

/// One Euler step from frame `f` to `f + 1` with bias `bias` (device frame).
pub fn step(s: &State, frame: &SensorFrame, bias: &Vector3<f64>, dt: f64, opts: &IntegrationOptions) -> State {
    let a = frame.orientation.rotation().rotate(&(frame.linacc.raw() + bias));
    let mut v = s.v + a * dt;
    if opts.zero_vertical {
        v.y = 0.0;
    }
    let p = if opts.semi_implicit {
        s.p + v * dt
    } else {
        s.p + s.v * dt
    };
    State { p, v }
}

/// Integrates corrected accelerations from rest at the origin.
pub fn double_integrate(seq: &Sequence, knots: &CorrectionKnots) -> Trajectory {
    double_integrate_with(seq, knots, &IntegrationOptions::default())
}

pub fn double_integrate_with(seq: &Sequence, knots: &CorrectionKnots, opts: &IntegrationOptions) -> Trajectory {
    let frames = seq.frames();
    let mut traj = Trajectory::with_capacity(frames.len());
    let mut s = State::default();
    for (f, frame) in frames.iter().enumerate() {
        traj.push(frame.timestamp, Vec3::from_raw(s.p), Vec3::from_raw(s.v));
        let b = knots.interpolate(f);
        s = step(&s, frame, b.raw(), seq.dt(), opts);
    }
    traj
}

/// Integrates a world velocity track directly: `p_{f+1} = p_f + v_f Δt`.
pub fn integrate_velocities(timestamps: &[f64], velocities: &[Vec3<World>], dt: f64) -> Trajectory {
    let mut traj = Trajectory::with_capacity(timestamps.len());
    let mut p = Vec3::<World>::zeros();
    for (t, v) in timestamps.iter().zip(velocities) {
        traj.push(*t, p, *v);
        p += *v * dt;
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameRotation;
    use crate::sequence::GRAVITY;

    fn seq(n: usize, acc: [f64; 3]) -> Sequence {
        let frames = (0..n)
            .map(|i| SensorFrame {
                timestamp: i as f64 / 200.0,
                gyro: Vec3::zeros(),
                linacc: Vec3::from_array(acc),
                gravity: Vec3::new(0.0, GRAVITY, 0.0),
                orientation: FrameRotation::identity(),
                gt_position: None,
                gt_orientation: None,
            })
            .collect();
        Sequence::new(frames, 200.0, None, "").unwrap()
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        let s = seq(500, [0.0; 3]);
        let t = double_integrate(&s, &CorrectionKnots::zeros(500));
        assert!(t.positions.iter().all(|p| p.to_array() == [0.0; 3]));
        assert!(t.velocities.iter().all(|v| v.to_array() == [0.0; 3]));
    }

    #[test]
    fn constant_acceleration_matches_kinematics() {
        let s = seq(401, [1.0, 0.0, 0.0]);
        let opts = IntegrationOptions {
            zero_vertical: false,
            semi_implicit: false,
        };
        let t = double_integrate_with(&s, &CorrectionKnots::zeros(401), &opts);
        let p = t.last_position().unwrap();
        assert!((p.x() - 2.0).abs() <= 1.0 * 2.0 * 0.005);
        assert_eq!(t.positions[0].to_array(), [0.0; 3]);
    }

    #[test]
    fn vertical_velocity_is_zeroed() {
        let s = seq(100, [0.0, 3.0, 0.0]);
        let t = double_integrate(&s, &CorrectionKnots::zeros(100));
        assert!(t.positions.iter().all(|p| p.y() == 0.0));
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits() {
        let s = seq(50, [0.3, 0.0, -0.2]);
        let t = double_integrate(&s, &CorrectionKnots::zeros(50));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let back = Trajectory::read_csv(&path).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in back.positions.iter().zip(&t.positions) {
            assert!((*a - *b).norm() <= 1e-8 * b.norm().max(1e-300));
        }
    }
}
