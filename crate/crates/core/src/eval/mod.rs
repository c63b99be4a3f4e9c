//! Trajectory alignment, positional error and baselines.

mod align;
mod baselines;
mod report;

pub use align::{
    align, align_points, evaluate_trajectory, mpe, path_length, windowed_ssd, EvalReport, RigidTransform2D,
    ALIGN_WINDOW,
};
pub use baselines::{baseline_ridi_mag, baseline_ridi_ori, mean_gt_speed, Baseline};
pub use report::{overlay_svg, report_csv, report_table, ReportRow};

use rayon::prelude::*;

use crate::error::EvalError;
use crate::integrator::{baseline_raw, run_offline_with, OfflineConfig, Trajectory};
use crate::regression::VelocityRegressor;
use crate::sequence::Sequence;

/// Trajectory of one baseline.
pub fn baseline_trajectory(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    baseline: Baseline,
    cfg: &OfflineConfig,
) -> Result<Trajectory, EvalError> {
    match baseline {
        Baseline::Ridi => Ok(run_offline_with(seq, model, cfg)?.trajectory),
        Baseline::Raw => Ok(baseline_raw(seq)),
        Baseline::RidiMag => baseline_ridi_mag(seq, model),
        Baseline::RidiOri => baseline_ridi_ori(seq, model, mean_gt_speed(seq)?),
    }
}

/// Evaluates each baseline against the sequence's ground truth.
pub fn evaluate_sequence(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    baselines: &[Baseline],
    cfg: &OfflineConfig,
) -> Result<Vec<(EvalReport, Trajectory)>, EvalError> {
    let gt = Trajectory::ground_truth(seq).ok_or(EvalError::MissingGroundTruth)?;
    baselines
        .par_iter()
        .map(|&b| {
            let traj = baseline_trajectory(seq, model, b, cfg)?;
            Ok((evaluate_trajectory(&traj, &gt, b.name())?, traj))
        })
        .collect()
}

/// MPE ratio of the offline pipeline for each `lambda`, in input order.
pub fn lambda_sweep(
    seq: &Sequence,
    model: &dyn VelocityRegressor,
    lambdas: &[f64],
) -> Result<Vec<(f64, EvalReport)>, EvalError> {
    let gt = Trajectory::ground_truth(seq).ok_or(EvalError::MissingGroundTruth)?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let cfg = OfflineConfig {
                lambda,
                ..OfflineConfig::default()
            };
            let traj = run_offline_with(seq, model, &cfg)?.trajectory;
            Ok((lambda, evaluate_trajectory(&traj, &gt, &format!("RIDI λ={lambda:e}"))?))
        })
        .collect()
}
