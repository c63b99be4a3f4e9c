use std::path::PathBuf;

use thiserror::Error;

use crate::sequence::Placement;

fn names(p: &[Placement]) -> String {
    if p.is_empty() {
        return "none".into();
    }
    p.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("timestamps not strictly increasing at frame {index}")]
    NonMonotonic { index: usize },
    #[error("non-uniform spacing at frame {index}: step {step} s, expected {expected} s")]
    NonUniform {
        index: usize,
        step: f64,
        expected: f64,
    },
    #[error("unknown placement {0:?} (expected leg, bag, hand or body)")]
    UnknownPlacement(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Schema { line: Option<u64>, message: String },
    #[error("{channel} channel has a {gap:.3} s gap after t={at:.6}; refusing to interpolate across it")]
    Gap { channel: &'static str, at: f64, gap: f64 },
    #[error("channels do not overlap in time")]
    NoOverlap,
    #[error("smoothing sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("target rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("channels do not share timestamps; cannot write a single CSV")]
    MixedTimestamps,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("gravity magnitude {magnitude:.4} m/s² at frame {frame} is too small to define a vertical axis")]
    WeakGravity { frame: usize, magnitude: f64 },
    #[error("sequence has no ground-truth positions")]
    MissingGroundTruth,
    #[error("sequence has no placement label")]
    MissingPlacement,
    #[error("ground-truth speed {speed:.3} m/s at frame {frame} exceeds the 5 m/s sanity bound")]
    TargetOutOfRange { frame: usize, speed: f64 },
    #[error("frame {frame} has no full feature window (need frames {start}..={frame})")]
    NoWindow { frame: usize, start: isize },
    #[error("feature vector must have {expected} finite entries")]
    BadFeature { expected: usize },
}

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("classifier needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("placement {placement} has {count} samples; at least {needed} required")]
    TooFewPerClass {
        placement: Placement,
        count: usize,
        needed: usize,
    },
    #[error("no training data for placement(s) {}; present: {}", names(missing), names(present))]
    MissingPlacements {
        missing: Vec<Placement>,
        present: Vec<Placement>,
    },
    #[error("solver did not converge after {iterations} iterations (last dual objective {objective})")]
    NonConvergence { iterations: usize, objective: f64 },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("model format version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("model file truncated")]
    Truncated,
    #[error("model checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt model: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error("regularization weight must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("correction problem has no velocity constraints")]
    NoConstraints,
    #[error("knot frames must be non-empty and strictly increasing")]
    BadKnots,
    #[error("constraint at frame {frame} lies outside the {frames}-frame problem")]
    ConstraintOutOfRange { frame: usize, frames: usize },
    #[error("normal equations are rank deficient (rank {rank} of {unknowns}); use a positive lambda")]
    RankDeficient { rank: usize, unknowns: usize },
    #[error("correction inputs are inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("frame with timestamp {got} arrived after {previous}; frames must be in timestamp order")]
    OutOfOrder { previous: f64, got: f64 },
    #[error("sequence has {len} frames; at least {needed} required")]
    TooShort { len: usize, needed: usize },
    #[error("invalid online configuration: {0}")]
    Config(String),
    #[error("correction worker stopped unexpectedly")]
    WorkerGone,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory has {traj} frames but ground truth has {gt}")]
    LengthMismatch { traj: usize, gt: usize },
    #[error("sequence has no ground truth")]
    MissingGroundTruth,
    #[error("ground-truth path length is zero")]
    ZeroPathLength,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid motion script {name:?}: {message}")]
    Script { name: String, message: String },
    #[error("invalid noise spec: {0}")]
    Noise(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
}
