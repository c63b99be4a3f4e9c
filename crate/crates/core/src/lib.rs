//! Learned inertial dead reckoning.
//!
//! Velocity is regressed from one-second IMU windows in a gravity-stabilized
//! frame by a placement classifier feeding per-placement support vector
//! regressors. A regularized least-squares solve then estimates a piecewise
//! linear acceleration bias so the integrated velocity follows the regressed
//! one, and double integration yields a metric planar trajectory.

pub mod correction;
pub mod error;
pub mod eval;
pub mod features;
pub mod frame;
pub mod ingest;
pub mod integrator;
pub mod sequence;
pub mod regression;
pub mod synth;

pub use error::*;
pub use frame::{Device, Frame, FrameRotation, FrameTag, Rotation, Stabilized, Vec3, World};
pub use sequence::{Placement, SensorFrame, Sequence, GRAVITY, SAMPLE_RATE_HZ, WINDOW_FRAMES};
