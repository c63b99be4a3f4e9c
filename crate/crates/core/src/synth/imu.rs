//! IMU channels implied by a pose track, with seeded noise and bias.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::frame::{Device, Rotation, Vec3};
use crate::sequence::{SensorFrame, Sequence, GRAVITY};

use super::poses::PoseTrack;

/// Sensor noise and low-frequency acceleration bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// White gyro noise, rad/s.
    pub gyro_std: f64,
    /// White linear acceleration noise, m/s².
    pub linacc_std: f64,
    /// White tilt of the reported gravity direction, rad.
    pub gravity_std: f64,
    /// Magnitude of the constant bias, m/s², in a random device direction.
    pub bias_constant: f64,
    /// Sinusoids per axis.
    pub bias_sinusoids: usize,
    /// Amplitude of each sinusoid, m/s².
    pub bias_amplitude: f64,
    /// Sinusoid periods are drawn uniformly from this range, s.
    pub bias_period_min: f64,
    pub bias_period_max: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gyro_std: 0.005,
            linacc_std: 0.03,
            gravity_std: 0.002,
            bias_constant: 0.15,
            bias_sinusoids: 2,
            bias_amplitude: 0.05,
            bias_period_min: 5.0,
            bias_period_max: 30.0,
            seed: 0,
        }
    }
}

/// Shortest permitted bias period: 0.2 Hz.
pub const MIN_BIAS_PERIOD: f64 = 5.0;

impl NoiseSpec {
    /// No noise, no bias.
    pub fn clean() -> Self {
        Self {
            gyro_std: 0.0,
            linacc_std: 0.0,
            gravity_std: 0.0,
            bias_constant: 0.0,
            bias_sinusoids: 0,
            bias_amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let non_negative = [
            ("gyro_std", self.gyro_std),
            ("linacc_std", self.linacc_std),
            ("gravity_std", self.gravity_std),
            ("bias_constant", self.bias_constant),
            ("bias_amplitude", self.bias_amplitude),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::Noise(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.bias_sinusoids > 0
            && !(self.bias_period_min >= MIN_BIAS_PERIOD
                && self.bias_period_max >= self.bias_period_min
                && self.bias_period_max.is_finite())
        {
            return Err(SynthError::Noise(format!(
                "bias periods must satisfy {MIN_BIAS_PERIOD} <= min <= max, got [{}, {}]",
                self.bias_period_min, self.bias_period_max
            )));
        }
        Ok(())
    }
}

/// Device-frame bias as constant plus per-axis sinusoids.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasModel {
    pub constant: [f64; 3],
    /// `(amplitude, period, phase)` per axis.
    pub terms: [Vec<(f64, f64, f64)>; 3],
}

impl BiasModel {
    pub fn at(&self, t: f64) -> [f64; 3] {
        let mut b = self.constant;
        for (axis, terms) in self.terms.iter().enumerate() {
            for &(a, p, ph) in terms {
                b[axis] += a * (TAU * t / p + ph).sin();
            }
        }
        b
    }
}

/// A synthesized recording and the bias injected into it.
#[derive(Clone, Debug)]
pub struct SynthRecording {
    pub sequence: Sequence,
    /// Injected device-frame bias per frame, m/s².
    pub bias: Vec<Vec3<Device>>,
    pub bias_model: BiasModel,
}

/// Derives gyro, linear acceleration and gravity from poses, then adds noise.
///
/// Linear acceleration is the central second difference of positions rotated
/// into the device frame; gyro is the rotation vector of
/// `q_{f-1}^{-1} q_{f+1}` over `2 Δt`. The end frames copy their neighbours.
pub fn derive_imu(track: &PoseTrack, noise: &NoiseSpec) -> Result<SynthRecording, SynthError> {
    noise.validate()?;
    let n = track.len();
    if n < 3 {
        return Err(SynthError::Script {
            name: track.name.clone(),
            message: "pose track needs at least 3 frames".into(),
        });
    }
    let dt = 1.0 / track.rate;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);

    let dir: [f64; 3] = UnitSphere.sample(&mut rng);
    let mut model = BiasModel {
        constant: dir.map(|c| c * noise.bias_constant),
        terms: Default::default(),
    };
    for axis in 0..3 {
        for _ in 0..noise.bias_sinusoids {
            let period = rng.random_range(noise.bias_period_min..=noise.bias_period_max);
            let phase = rng.random_range(0.0..TAU);
            model.terms[axis].push((noise.bias_amplitude, period, phase));
        }
    }
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let draw3 = |rng: &mut ChaCha8Rng, std: f64| -> Vector3<f64> {
        let v = Vector3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng));
        v * std
    };

    let mut frames = Vec::with_capacity(n);
    let mut bias = Vec::with_capacity(n);
    for f in 0..n {
        let c = f.clamp(1, n - 2);
        let p = &track.positions;
        let acc_w = (p[c + 1].raw() - 2.0 * p[c].raw() + p[c - 1].raw()) / (dt * dt);
        let r_wd = track.orientations[f];
        let r_dw = r_wd.inverse();
        let linacc = r_dw.rotation().rotate(&acc_w);

        let q_prev = track.orientations[c - 1].rotation();
        let q_next = track.orientations[c + 1].rotation();
        let gyro = q_prev.inverse().compose(q_next).rotation_vector() / (2.0 * dt);

        let mut gravity = r_dw.rotation().rotate(&Vector3::new(0.0, GRAVITY, 0.0));

        let g_noise = draw3(&mut rng, noise.gyro_std);
        let a_noise = draw3(&mut rng, noise.linacc_std);
        let tilt = draw3(&mut rng, noise.gravity_std);
        if noise.gravity_std > 0.0 {
            let g_hat = gravity / gravity.norm();
            let tilt = tilt - g_hat * g_hat.dot(&tilt);
            gravity = Rotation::from_rotation_vector(&tilt).rotate(&gravity);
            gravity *= GRAVITY / gravity.norm();
        }
        let b = Vector3::from(model.at(track.timestamps[f]));

        bias.push(Vec3::from_raw(b));
        frames.push(SensorFrame {
            timestamp: track.timestamps[f],
            gyro: Vec3::from_raw(gyro + g_noise),
            linacc: Vec3::from_raw(linacc + a_noise + b),
            gravity: Vec3::from_raw(gravity),
            orientation: r_wd,
            gt_position: Some(track.positions[f]),
            gt_orientation: Some(r_wd),
        });
    }
    let sequence = Sequence::new(frames, track.rate, Some(track.placement), track.name.clone())
        .map_err(|e| SynthError::Script {
            name: track.name.clone(),
            message: e.to_string(),
        })?;
    Ok(SynthRecording {
        sequence,
        bias,
        bias_model: model,
    })
}
