//! Velocity-only baselines built from the regressed constraints.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::correction::{constraint_frames, Constraint, KNOT_SPACING};
use crate::error::{EvalError, IntegratorError};
use crate::features::{ground_truth_velocity, stabilized_from_world};
use crate::frame::{Vec3, World};
use crate::ingest::SmoothingConfig;
use crate::integrator::{integrate_velocities, regress_constraints, Trajectory};
use crate::regression::VelocityRegressor;
use crate::sequence::Sequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "RIDI")]
    Ridi,
    #[serde(rename = "RAW")]
    Raw,
    #[serde(rename = "RIDI-MAG")]
    RidiMag,
    #[serde(rename = "RIDI-ORI")]
    RidiOri,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Ridi, Baseline::Raw, Baseline::RidiMag, Baseline::RidiOri];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Ridi => "RIDI",
            Baseline::Raw => "RAW",
            Baseline::RidiMag => "RIDI-MAG",
            Baseline::RidiOri => "RIDI-ORI",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown baseline {s:?} (expected RIDI, RAW, RIDI-MAG or RIDI-ORI)"))
    }
}

/// Stabilized-frame velocity per frame, linear between constraints and held at the ends.
fn per_frame(constraints: &[Constraint], n: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; n];
    if constraints.is_empty() {
        return out;
    }
    let at = |c: &Constraint| [c.velocity.x(), c.velocity.z()];
    let mut k = 0;
    for (f, o) in out.iter_mut().enumerate() {
        while k + 1 < constraints.len() && constraints[k + 1].frame <= f {
            k += 1;
        }
        let a = &constraints[k];
        *o = if f <= a.frame || k + 1 == constraints.len() {
            at(a)
        } else {
            let b = &constraints[k + 1];
            let s = (f - a.frame) as f64 / (b.frame - a.frame) as f64;
            let (va, vb) = (at(a), at(b));
            [va[0] + s * (vb[0] - va[0]), va[1] + s * (vb[1] - va[1])]
        };
    }
    out
}

fn horizontal(v: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, 0.0, v.z)
}

fn velocity_baseline(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    velocity: impl Fn(usize, [f64; 2], &dyn Fn(Vector3<f64>) -> Vector3<f64>) -> Vector3<f64>,
) -> Result<Trajectory, EvalError> {
    if seq.is_empty() {
        return Ok(Trajectory::default());
    }
    let frames = constraint_frames(seq.len(), KNOT_SPACING);
    let (constraints, _) = regress_constraints(seq, model, &frames, SmoothingConfig::default().sigma_imu)?;
    let vs = per_frame(&constraints, seq.len());
    let mut vel = Vec::with_capacity(seq.len());
    for (f, (frame, v)) in seq.frames().iter().zip(&vs).enumerate() {
        let r = stabilized_from_world(&frame.gravity, &frame.orientation)
            .map_err(IntegratorError::from)?
            .inverse();
        let to_world = |s: Vector3<f64>| r.rotation().rotate(&s);
        vel.push(Vec3::<World>::from_raw(horizontal(velocity(f, *v, &to_world))));
    }
    Ok(integrate_velocities(&seq.timestamps(), &vel, seq.dt()))
}

/// Regressed speed along the device heading.
pub fn baseline_ridi_mag(seq: &Sequence, model: &dyn VelocityRegressor) -> Result<Trajectory, EvalError> {
    velocity_baseline(seq, model, |_, v, to_world| {
        let speed = v[0].hypot(v[1]);
        let heading = horizontal(to_world(Vector3::x()));
        let n = heading.norm();
        if n > 0.0 {
            heading * (speed / n)
        } else {
            Vector3::zeros()
        }
    })
}

/// Regressed direction at a constant speed.
pub fn baseline_ridi_ori(seq: &Sequence, model: &dyn VelocityRegressor, gt_speed: f64) -> Result<Trajectory, EvalError> {
    velocity_baseline(seq, model, |_, v, to_world| {
        let d = horizontal(to_world(Vector3::new(v[0], 0.0, v[1])));
        let n = d.norm();
        if n > 1e-9 {
            d * (gt_speed / n)
        } else {
            Vector3::zeros()
        }
    })
}

/// Mean horizontal ground-truth speed over the sequence.
pub fn mean_gt_speed(seq: &Sequence) -> Result<f64, EvalError> {
    if !seq.has_ground_truth() {
        return Err(EvalError::MissingGroundTruth);
    }
    let v = ground_truth_velocity(seq).map_err(|_| EvalError::MissingGroundTruth)?;
    Ok(v.iter().map(|v| v[0].hypot(v[1])).sum::<f64>() / v.len() as f64)
}
