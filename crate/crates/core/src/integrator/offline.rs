//! Whole-sequence correction followed by double integration.

use rayon::prelude::*;

use crate::correction::{
    constraint_frames, knot_frames, Constraint, CorrectionKnots, CorrectionProblem, ResidualMode,
    DEFAULT_LAMBDA, KNOT_SPACING,
};
use crate::error::IntegratorError;
use crate::features::StabilizedSignals;
use crate::frame::Vec3;
use crate::ingest::SmoothingConfig;
use crate::integrator::trajectory::{double_integrate_with, IntegrationOptions, Trajectory};
use crate::regression::VelocityRegressor;
use crate::sequence::{Placement, Sequence, WINDOW_FRAMES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfflineConfig {
    pub lambda: f64,
    pub knot_spacing: usize,
    pub mode: ResidualMode,
    pub sigma_imu: f64,
    pub integration: IntegrationOptions,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            knot_spacing: KNOT_SPACING,
            mode: ResidualMode::Full3D,
            sigma_imu: SmoothingConfig::default().sigma_imu,
            integration: IntegrationOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OfflineResult {
    pub trajectory: Trajectory,
    pub knots: CorrectionKnots,
    pub constraints: Vec<Constraint>,
    /// Placement chosen for each constraint.
    pub placements: Vec<Placement>,
}

/// Regresses a velocity target at each of `frames`.
pub fn regress_constraints(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    frames: &[usize],
    sigma_imu: f64,
) -> Result<(Vec<Constraint>, Vec<Placement>), IntegratorError> {
    let signals = StabilizedSignals::compute(seq, sigma_imu)?;
    let out = frames
        .par_iter()
        .map(|&f| -> Result<_, IntegratorError> {
            let feature = signals.feature(f)?;
            let ([vx, vz], p) = model.predict(&feature)?;
            Ok((
                Constraint {
                    frame: f,
                    velocity: Vec3::new(vx, 0.0, vz),
                },
                p,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(out.into_iter().unzip())
}

/// Full pipeline: regress, solve once, integrate.
pub fn run_offline(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    lambda: f64,
) -> Result<OfflineResult, IntegratorError> {
    run_offline_with(
        seq,
        model,
        &OfflineConfig {
            lambda,
            ..OfflineConfig::default()
        },
    )
}

pub fn run_offline_with(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    cfg: &OfflineConfig,
) -> Result<OfflineResult, IntegratorError> {
    if seq.len() < WINDOW_FRAMES {
        return Err(IntegratorError::TooShort {
            len: seq.len(),
            needed: WINDOW_FRAMES,
        });
    }
    let frames = constraint_frames(seq.len(), cfg.knot_spacing);
    let (constraints, placements) = regress_constraints(seq, model, &frames, cfg.sigma_imu)?;
    let mut out = correct_with_constraints(seq, constraints, cfg)?;
    out.placements = placements;
    Ok(out)
}

/// Solves for knots against given targets and integrates.
///
/// With no constraints the knots are zero and the result is the raw integration.
pub fn correct_with_constraints(
    seq: &Sequence,
    constraints: Vec<Constraint>,
    cfg: &OfflineConfig,
) -> Result<OfflineResult, IntegratorError> {
    let knots = if constraints.is_empty() {
        log::warn!("no velocity constraints; integrating without correction");
        CorrectionKnots::zeros(seq.len())
    } else {
        CorrectionProblem::from_frames(
            seq.frames(),
            0,
            seq.dt(),
            nalgebra::Vector3::zeros(),
            constraints.clone(),
            knot_frames(seq.len(), cfg.knot_spacing),
            cfg.lambda,
            cfg.mode,
        )?
        .solve()?
    };
    let trajectory = double_integrate_with(seq, &knots, &cfg.integration);
    Ok(OfflineResult {
        trajectory,
        knots,
        constraints,
        placements: Vec::new(),
    })
}

/// Uncorrected double integration.
pub fn baseline_raw(seq: &Sequence) -> Trajectory {
    double_integrate_with(seq, &CorrectionKnots::zeros(seq.len()), &IntegrationOptions::default())
}
