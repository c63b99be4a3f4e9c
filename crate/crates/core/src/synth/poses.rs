//! Ground-truth pose tracks from motion scripts.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::SynthError;
use crate::frame::{Device, FrameRotation, Rotation, Vec3, World};
use crate::sequence::Placement;

use super::script::{heading_dir, MotionScript};
use super::signature::{activity, Signature, TiltAxis};

/// Sampled positions and orientations in the world frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrack {
    pub name: String,
    pub placement: Placement,
    pub rate: f64,
    pub timestamps: Vec<f64>,
    pub positions: Vec<Vec3<World>>,
    pub orientations: Vec<FrameRotation<World, Device>>,
}

impl PoseTrack {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Horizontal length of the sampled path.
    pub fn path_length(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| (w[1].x() - w[0].x()).hypot(w[1].z() - w[0].z()))
            .sum()
    }
}

/// Samples the script at `rate` Hz, frames `0..=round(duration * rate)`.
///
/// The body path is overlaid with the placement's gait oscillation (scaled by
/// walking activity, so none while standing). Device yaw is the travel
/// heading plus the facing offset and the script's fixed yaw offset; pitch or
/// roll comes from the placement signature. The idle tilt oscillation is not
/// scaled by activity and persists while standing.
pub fn generate_poses(script: &MotionScript, rate: f64) -> Result<PoseTrack, SynthError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SynthError::Script {
            name: script.name.clone(),
            message: format!("rate must be positive, got {rate}"),
        });
    }
    let kin = script.kinematics()?;
    let sig = Signature::for_placement(script.placement);
    let n = (kin.duration() * rate).round() as usize + 1;
    let tilt_axis = match sig.tilt_axis {
        TiltAxis::X => Vector3::x(),
        TiltAxis::Z => Vector3::z(),
    };

    let mut track = PoseTrack {
        name: script.name.clone(),
        placement: script.placement,
        rate,
        timestamps: Vec::with_capacity(n),
        positions: Vec::with_capacity(n),
        orientations: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = k as f64 / rate;
        let s = kin.state(t);
        let [ux, uz] = heading_dir(s.heading);
        let (nx, nz) = (uz, -ux);
        let mut p = Vector3::new(s.position[0], 0.0, s.position[1]);
        let mut yaw = s.heading + s.face + script.yaw_offset;
        let mut tilt = sig.tilt;
        if script.gait {
            let a = activity(s.speed);
            let phase = TAU * sig.cadence * t;
            let (bob, half) = (phase.sin(), (0.5 * phase).sin());
            let fore = sig.fore_aft * s.speed * bob;
            p += a * Vector3::new(
                fore * ux + sig.sway * half * nx,
                sig.bob * bob,
                fore * uz + sig.sway * half * nz,
            );
            yaw += a * sig.yaw_sway * (0.5 * phase + 0.7).sin();
            tilt += a * sig.swing * half + sig.idle * (TAU * sig.idle_freq * t + 0.3).sin();
        }
        let r = Rotation::from_axis_angle(&Vector3::y(), yaw)
            .compose(&Rotation::from_axis_angle(&tilt_axis, tilt));
        track.timestamps.push(t);
        track.positions.push(Vec3::from_raw(p));
        track.orientations.push(FrameRotation::new(r));
    }
    Ok(track)
}
