//! Stabilized-frame signals, windowed feature vectors and velocity targets.

use nalgebra::{Unit, UnitQuaternion, Vector3};

use crate::error::FeatureError;
use crate::frame::{Device, FrameRotation, Rotation, Stabilized, Vec3, World};
use crate::ingest::{GaussianKernel, SmoothingConfig};
use crate::sequence::{Placement, Sequence, WINDOW_FRAMES};

/// Channels per frame in a feature window: gyro xyz then linacc xyz.
pub const CHANNELS: usize = 6;

/// Length of a feature vector.
pub const FEATURE_DIM: usize = CHANNELS * WINDOW_FRAMES;

/// Default spacing between training samples, in frames.
pub const DEFAULT_STRIDE: usize = 10;

/// Sanity bound on target speed for walking data, m/s.
pub const MAX_TARGET_SPEED: f64 = 5.0;

/// Angle from `-y` below which the stabilizing rotation is degenerate.
const ANTIPARALLEL_TOL: f64 = 1e-6;

/// One labelled regression sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// [`FEATURE_DIM`] values, oldest frame first, `[gx, gy, gz, ax, ay, az]` per frame.
    pub feature: Vec<f64>,
    /// Horizontal velocity `(v_x, v_z)` in the stabilized frame, m/s.
    pub target: [f64; 2],
    pub placement: Placement,
    /// Frame index the sample was taken at (last frame of its window).
    pub frame: usize,
}

/// Minimal rotation taking the gravity direction onto `+y`.
///
/// The rotation axis is orthogonal to both gravity and `+y`, so the device
/// heading survives. Gravity pointing along `-y` (within 1e-6 rad) has no
/// unique minimal rotation; a half turn about `+x` is used.
pub fn stabilizing_rotation(
    gravity: &Vec3<Device>,
) -> Result<FrameRotation<Stabilized, Device>, FeatureError> {
    stabilizing_rotation_at(gravity, 0)
}

fn stabilizing_rotation_at(
    gravity: &Vec3<Device>,
    frame: usize,
) -> Result<FrameRotation<Stabilized, Device>, FeatureError> {
    let magnitude = gravity.norm();
    if !(magnitude > 1.0) {
        return Err(FeatureError::WeakGravity { frame, magnitude });
    }
    let g = gravity.raw() / magnitude;
    let y = Vector3::y();
    let cross = g.cross(&y);
    let s = cross.norm();
    let c = g.dot(&y);
    let angle = s.atan2(c);
    let rot = if std::f64::consts::PI - angle < ANTIPARALLEL_TOL {
        Rotation::from_axis_angle(&Vector3::x(), std::f64::consts::PI)
    } else if s == 0.0 {
        Rotation::identity()
    } else {
        Rotation::from_unit_quaternion(UnitQuaternion::from_axis_angle(
            &Unit::new_unchecked(cross / s),
            angle,
        ))
    };
    Ok(FrameRotation::new(rot))
}

/// Per-frame gyro and linear acceleration rotated into the stabilized frame.
///
/// No smoothing is applied.
pub fn to_stabilized(
    seq: &Sequence,
) -> Result<(Vec<Vec3<Stabilized>>, Vec<Vec3<Stabilized>>), FeatureError> {
    let mut gyro = Vec::with_capacity(seq.len());
    let mut linacc = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let r = stabilizing_rotation_at(&f.gravity, i)?;
        gyro.push(r.apply(&f.gyro));
        linacc.push(r.apply(&f.linacc));
    }
    Ok((gyro, linacc))
}

/// `R_SW` for one frame: world into device, then device into stabilized.
pub fn stabilized_from_world(
    gravity: &Vec3<Device>,
    orientation: &FrameRotation<World, Device>,
) -> Result<FrameRotation<Stabilized, World>, FeatureError> {
    Ok(stabilizing_rotation(gravity)?.compose(&orientation.inverse()))
}

/// Stabilized gyro and linacc of one frame packed as a 6-vector.
pub fn stabilized_channels(
    gyro: &Vec3<Device>,
    linacc: &Vec3<Device>,
    gravity: &Vec3<Device>,
    frame: usize,
) -> Result<[f64; CHANNELS], FeatureError> {
    let r = stabilizing_rotation_at(gravity, frame)?;
    let g = r.apply(gyro).to_array();
    let a = r.apply(linacc).to_array();
    Ok([g[0], g[1], g[2], a[0], a[1], a[2]])
}

/// Builds the feature vector whose window ends at `frame`.
///
/// `raw` holds unsmoothed stabilized channels; samples after `frame` are read
/// only by the smoothing kernel, so any buffer that extends at least
/// `kernel.radius()` frames past `frame` (or to the end of the recording)
/// yields bit-identical features.
pub fn window_feature(
    raw: &[[f64; CHANNELS]],
    kernel: &GaussianKernel,
    frame: usize,
) -> Result<Vec<f64>, FeatureError> {
    if frame + 1 < WINDOW_FRAMES || frame >= raw.len() {
        return Err(FeatureError::NoWindow {
            frame,
            start: frame as isize + 1 - WINDOW_FRAMES as isize,
        });
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for j in frame + 1 - WINDOW_FRAMES..=frame {
        out.extend_from_slice(&kernel.smooth_at(raw, j));
    }
    Ok(out)
}

/// Stabilized signals of a whole sequence with the smoothing already applied.
#[derive(Clone, Debug)]
pub struct StabilizedSignals {
    pub raw: Vec<[f64; CHANNELS]>,
    pub smoothed: Vec<[f64; CHANNELS]>,
}

impl StabilizedSignals {
    /// Rotates every frame into `S`, then smooths each channel.
    pub fn compute(seq: &Sequence, sigma_imu: f64) -> Result<Self, FeatureError> {
        let kernel = imu_kernel(sigma_imu);
        let raw = seq
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| stabilized_channels(&f.gyro, &f.linacc, &f.gravity, i))
            .collect::<Result<Vec<_>, _>>()?;
        let smoothed = kernel.smooth(&raw);
        Ok(Self { raw, smoothed })
    }

    /// Feature vector for the window ending at `frame`.
    pub fn feature(&self, frame: usize) -> Result<Vec<f64>, FeatureError> {
        if frame + 1 < WINDOW_FRAMES || frame >= self.smoothed.len() {
            return Err(FeatureError::NoWindow {
                frame,
                start: frame as isize + 1 - WINDOW_FRAMES as isize,
            });
        }
        Ok(self.smoothed[frame + 1 - WINDOW_FRAMES..=frame]
            .iter()
            .flatten()
            .copied()
            .collect())
    }
}

pub(crate) fn imu_kernel(sigma: f64) -> GaussianKernel {
    GaussianKernel::new(sigma).unwrap_or_else(|_| {
        GaussianKernel::new(SmoothingConfig::default().sigma_imu).expect("default sigma is valid")
    })
}

/// Feature vectors for every window of a sequence ending at the given frames.
pub fn features_at(
    seq: &Sequence,
    frames: &[usize],
    sigma_imu: f64,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    let signals = StabilizedSignals::compute(seq, sigma_imu)?;
    frames.iter().map(|&f| signals.feature(f)).collect()
}

/// Unsmoothed ground-truth velocity in `S`, all three axes.
///
/// Central differences in `W` (one-sided at the ends), rotated by `R_SW`.
pub fn ground_truth_velocity_3d(seq: &Sequence) -> Result<Vec<Vec3<Stabilized>>, FeatureError> {
    let p = seq.gt_positions().ok_or(FeatureError::MissingGroundTruth)?;
    let n = p.len();
    let dt = seq.dt();
    let mut out = Vec::with_capacity(n);
    for (f, frame) in seq.frames().iter().enumerate() {
        let v_w: Vec3<World> = if n < 2 {
            Vec3::zeros()
        } else if f == 0 {
            (p[1] - p[0]) * (1.0 / dt)
        } else if f == n - 1 {
            (p[n - 1] - p[n - 2]) * (1.0 / dt)
        } else {
            (p[f + 1] - p[f - 1]) * (0.5 / dt)
        };
        let r_sw = stabilizing_rotation_at(&frame.gravity, f)?.compose(&frame.orientation.inverse());
        out.push(r_sw.apply(&v_w));
    }
    Ok(out)
}

/// Smoothed horizontal ground-truth velocity `(v_x, v_z)` in `S`.
pub fn ground_truth_velocity(seq: &Sequence) -> Result<Vec<[f64; 2]>, FeatureError> {
    ground_truth_velocity_with(seq, SmoothingConfig::default().sigma_velocity)
}

pub fn ground_truth_velocity_with(
    seq: &Sequence,
    sigma_velocity: f64,
) -> Result<Vec<[f64; 2]>, FeatureError> {
    let v: Vec<[f64; 2]> = ground_truth_velocity_3d(seq)?
        .iter()
        .map(|v| [v.x(), v.z()])
        .collect();
    Ok(imu_kernel(sigma_velocity).smooth(&v))
}

/// Number of samples [`make_samples`] produces for `len` frames.
pub fn sample_count(len: usize, stride: usize) -> usize {
    if len < WINDOW_FRAMES || stride == 0 {
        0
    } else {
        (len - WINDOW_FRAMES) / stride + 1
    }
}

/// One sample per `stride` frames, starting with the first full window.
///
/// A sequence shorter than one window yields no samples and logs a warning.
pub fn make_samples(seq: &Sequence, stride: usize) -> Result<Vec<TrainingSample>, FeatureError> {
    make_samples_with(seq, stride, &SmoothingConfig::default())
}

pub fn make_samples_with(
    seq: &Sequence,
    stride: usize,
    smoothing: &SmoothingConfig,
) -> Result<Vec<TrainingSample>, FeatureError> {
    let placement = seq.placement.ok_or(FeatureError::MissingPlacement)?;
    let count = sample_count(seq.len(), stride);
    if count == 0 {
        log::warn!(
            "sequence {:?} has {} frames, fewer than one {}-frame window; no samples",
            seq.subject,
            seq.len(),
            WINDOW_FRAMES
        );
        return Ok(Vec::new());
    }
    let targets = ground_truth_velocity_with(seq, smoothing.sigma_velocity)?;
    let signals = StabilizedSignals::compute(seq, smoothing.sigma_imu)?;
    (0..count)
        .map(|k| {
            let frame = WINDOW_FRAMES - 1 + k * stride;
            let target = targets[frame];
            let speed = target[0].hypot(target[1]);
            if !(speed <= MAX_TARGET_SPEED) {
                return Err(FeatureError::TargetOutOfRange { frame, speed });
            }
            Ok(TrainingSample {
                feature: signals.feature(frame)?,
                target,
                placement,
                frame,
            })
        })
        .collect()
}
