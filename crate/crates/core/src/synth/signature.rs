//! Parametric carriage oscillations, one per placement.

use crate::sequence::Placement;

/// Device axis a tilt rotates about. Both lie in the device's horizontal plane
/// when the device is untilted, so the tilt is pure pitch or pure roll.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiltAxis {
    X,
    Z,
}

/// Gait overlay for one placement. Lengths in m, angles in rad.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Signature {
    /// Step frequency, Hz.
    pub cadence: f64,
    /// Vertical bob amplitude.
    pub bob: f64,
    /// Fore-aft amplitude per m/s of speed, in phase with the bob. The sign
    /// sets which way the device lags or leads.
    pub fore_aft: f64,
    /// Lateral sway amplitude, at half the step frequency.
    pub sway: f64,
    pub tilt_axis: TiltAxis,
    /// Static tilt.
    pub tilt: f64,
    /// Tilt oscillation amplitude at half the step frequency.
    pub swing: f64,
    /// Yaw oscillation amplitude at half the step frequency.
    pub yaw_sway: f64,
    /// Tilt oscillation present even when standing (tremor, pendulum, breathing).
    pub idle: f64,
    /// Frequency of the idle oscillation, Hz.
    pub idle_freq: f64,
}

/// Minimum normalized parameter distance between any two signatures.
pub const SEPARATION_MARGIN: f64 = 0.5;

impl Signature {
    pub fn for_placement(p: Placement) -> Signature {
        match p {
            Placement::Leg => Signature {
                cadence: 1.85,
                bob: 0.025,
                fore_aft: 0.010,
                sway: 0.004,
                tilt_axis: TiltAxis::Z,
                tilt: 80f64.to_radians(),
                swing: 0.35,
                yaw_sway: 0.02,
                idle: 0.0,
                idle_freq: 0.0,
            },
            Placement::Bag => Signature {
                cadence: 1.75,
                bob: 0.012,
                fore_aft: -0.008,
                sway: 0.012,
                tilt_axis: TiltAxis::X,
                tilt: 40f64.to_radians(),
                swing: 0.05,
                yaw_sway: 0.15,
                idle: 0.04,
                idle_freq: 0.9,
            },
            Placement::Hand => Signature {
                cadence: 1.95,
                bob: 0.018,
                fore_aft: 0.006,
                sway: 0.0025,
                tilt_axis: TiltAxis::Z,
                tilt: (-60f64).to_radians(),
                swing: 0.08,
                yaw_sway: 0.03,
                idle: 0.03,
                idle_freq: 3.5,
            },
            Placement::Body => Signature {
                cadence: 1.65,
                bob: 0.014,
                fore_aft: -0.008,
                sway: 0.007,
                tilt_axis: TiltAxis::Z,
                tilt: 5f64.to_radians(),
                swing: 0.02,
                yaw_sway: 0.02,
                idle: 0.015,
                idle_freq: 0.3,
            },
        }
    }

    /// Parameters scaled to comparable magnitudes: cadence in 0.1 Hz,
    /// lengths in cm, angles in rad (idle in 0.1 rad), tilt axis as a unit offset.
    fn normalized(&self) -> [f64; 10] {
        [
            self.cadence * 10.0,
            self.bob * 100.0,
            self.fore_aft * 100.0,
            self.sway * 100.0,
            if self.tilt_axis == TiltAxis::X { 1.0 } else { 0.0 },
            self.tilt,
            self.swing,
            self.yaw_sway,
            self.idle * 10.0,
            self.idle_freq,
        ]
    }

    pub fn distance(&self, other: &Signature) -> f64 {
        self.normalized()
            .iter()
            .zip(other.normalized())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Fraction of the gait overlay present at speed `s`: zero when standing,
/// full from 0.5 m/s.
pub fn activity(speed: f64) -> f64 {
    let x = (speed / 0.5).clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signatures_are_pairwise_separated() {
        for (i, a) in Placement::ALL.iter().enumerate() {
            for b in &Placement::ALL[i + 1..] {
                let d = Signature::for_placement(*a).distance(&Signature::for_placement(*b));
                assert!(d > SEPARATION_MARGIN, "{a} vs {b}: {d}");
            }
        }
    }

    #[test]
    fn activity_ramps_from_rest() {
        assert_eq!(activity(0.0), 0.0);
        assert_eq!(activity(0.5), 1.0);
        assert_eq!(activity(2.0), 1.0);
        assert!((activity(0.25) - 0.5).abs() < 1e-12);
    }
}
