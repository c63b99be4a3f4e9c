//! Sensor frames and uniformly sampled sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SequenceError;
use crate::frame::{Device, FrameRotation, Vec3, World};

/// Nominal IMU rate of every processed sequence.
pub const SAMPLE_RATE_HZ: f64 = 200.0;

/// Frames in one feature window (one second at 200 Hz).
pub const WINDOW_FRAMES: usize = 200;

/// Standard gravity used by synthetic data.
pub const GRAVITY: f64 = 9.81;

/// How the phone is carried.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Leg,
    Bag,
    Hand,
    Body,
}

impl Placement {
    /// Enumeration order, also the classifier tie-break order.
    pub const ALL: [Placement; 4] = [
        Placement::Leg,
        Placement::Bag,
        Placement::Hand,
        Placement::Body,
    ];

    pub fn index(self) -> usize {
        match self {
            Placement::Leg => 0,
            Placement::Bag => 1,
            Placement::Hand => 2,
            Placement::Body => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Placement> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Placement::Leg => "leg",
            Placement::Bag => "bag",
            Placement::Hand => "hand",
            Placement::Body => "body",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Placement {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "leg" => Ok(Placement::Leg),
            "bag" => Ok(Placement::Bag),
            "hand" => Ok(Placement::Hand),
            "body" => Ok(Placement::Body),
            other => Err(SequenceError::UnknownPlacement(other.to_string())),
        }
    }
}

/// One timestamped IMU record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorFrame {
    /// Seconds.
    pub timestamp: f64,
    /// Angular velocity, rad/s.
    pub gyro: Vec3<Device>,
    /// Accelerometer reading minus gravity, m/s².
    pub linacc: Vec3<Device>,
    /// Gravity as reported by the platform (points up, magnitude ~9.81), m/s².
    pub gravity: Vec3<Device>,
    /// Device orientation, world from device.
    pub orientation: FrameRotation<World, Device>,
    pub gt_position: Option<Vec3<World>>,
    pub gt_orientation: Option<FrameRotation<World, Device>>,
}

/// Uniformly sampled stream of frames plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    frames: Vec<SensorFrame>,
    sample_rate: f64,
    pub placement: Option<Placement>,
    pub subject: String,
}

impl Sequence {
    /// Validates strictly increasing, uniformly spaced timestamps.
    pub fn new(
        frames: Vec<SensorFrame>,
        sample_rate: f64,
        placement: Option<Placement>,
        subject: impl Into<String>,
    ) -> Result<Self, SequenceError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(SequenceError::InvalidRate(sample_rate));
        }
        let dt = 1.0 / sample_rate;
        for (i, w) in frames.windows(2).enumerate() {
            let step = w[1].timestamp - w[0].timestamp;
            if step <= 0.0 {
                return Err(SequenceError::NonMonotonic { index: i + 1 });
            }
            if (step - dt).abs() > 1e-6 {
                return Err(SequenceError::NonUniform {
                    index: i + 1,
                    step,
                    expected: dt,
                });
            }
        }
        Ok(Self {
            frames,
            sample_rate,
            placement,
            subject: subject.into(),
        })
    }

    pub fn frames(&self) -> &[SensorFrame] {
        &self.frames
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// At least one full feature window is available.
    pub fn has_full_window(&self) -> bool {
        self.frames.len() >= WINDOW_FRAMES
    }

    pub fn has_ground_truth(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.gt_position.is_some())
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// Ground-truth positions, if every frame has one.
    pub fn gt_positions(&self) -> Option<Vec<Vec3<World>>> {
        self.frames.iter().map(|f| f.gt_position).collect()
    }

    /// Consecutive slice `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Sequence {
        Sequence {
            frames: self.frames[start..end.min(self.frames.len())].to_vec(),
            sample_rate: self.sample_rate,
            placement: self.placement,
            subject: self.subject.clone(),
        }
    }

    pub fn into_frames(self) -> Vec<SensorFrame> {
        self.frames
    }
}
