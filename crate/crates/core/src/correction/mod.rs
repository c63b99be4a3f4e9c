//! Piecewise-linear acceleration bias estimation.
//!
//! The bias is a device-frame 3-vector at knot frames, linearly interpolated in
//! between. Given regressed velocities in the stabilized frame at constraint
//! frames, the knots minimize
//!
//! ```text
//! Σ_c |v_C(c) - v_R(c)|² + λ Σ_k |x_k|²
//! v_C(f) = R_SW(f) (v0 + Σ_{f' < f} R_WI(f') (a(f') + x(f')) Δt)
//! ```
//!
//! which is linear least squares in the knot values. The vertical component of
//! every `v_R` is zero for regressed data (flat floor).

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::CorrectionError;
use crate::features::stabilized_from_world;
use crate::frame::{Device, Rotation, Stabilized, Vec3};
use crate::sequence::{SensorFrame, Sequence, WINDOW_FRAMES};

mod prior;

pub use prior::{solve_window, CorrectionFilter, WindowPrior, WindowSolution};

/// Frames between bias knots and between velocity constraints.
pub const KNOT_SPACING: usize = 50;

/// Default regularization weight.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Solved knot components smaller than this (m/s²) are stored as exact zeros.
pub const KNOT_FLUSH: f64 = 1e-8;

/// Knot frames `0, spacing, 2·spacing, …` up to the first one at or past `len - 1`.
pub fn knot_frames(len: usize, spacing: usize) -> Vec<usize> {
    knot_frames_between(0, len, spacing)
}

/// Knots on the global `spacing` grid covering frames `start..end`.
pub fn knot_frames_between(start: usize, end: usize, spacing: usize) -> Vec<usize> {
    let first = start / spacing * spacing;
    let last_frame = end.saturating_sub(1).max(start);
    let mut out = vec![first];
    while *out.last().unwrap() < last_frame {
        out.push(out.last().unwrap() + spacing);
    }
    out
}

/// Constraint frames: multiples of `spacing` with a full feature window, below `len`.
///
/// There are `ceil((len - 200) / spacing)` of them.
pub fn constraint_frames(len: usize, spacing: usize) -> Vec<usize> {
    let first = WINDOW_FRAMES.div_ceil(spacing) * spacing;
    (first..len).step_by(spacing).collect()
}

/// Piecewise-linear device-frame bias.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionKnots {
    frames: Vec<usize>,
    values: Vec<Vec3<Device>>,
}

impl CorrectionKnots {
    pub fn new(frames: Vec<usize>, values: Vec<Vec3<Device>>) -> Result<Self, CorrectionError> {
        if frames.is_empty() || frames.len() != values.len() || frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CorrectionError::BadKnots);
        }
        Ok(Self { frames, values })
    }

    /// Zero bias on the default knot grid of a `len`-frame sequence.
    pub fn zeros(len: usize) -> Self {
        let frames = knot_frames(len, KNOT_SPACING);
        let values = vec![Vec3::zeros(); frames.len()];
        Self { frames, values }
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn values(&self) -> &[Vec3<Device>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.to_array() == [0.0; 3])
    }

    /// Bracketing knots and weights `(k, w_k, k + 1, w_{k+1})`.
    ///
    /// Frames outside the knot span clamp to the nearest knot.
    pub fn weights(&self, f: usize) -> (usize, f64, usize, f64) {
        interp_weights(&self.frames, f)
    }

    /// Bias at frame `f`.
    pub fn interpolate(&self, f: usize) -> Vec3<Device> {
        let (i, wi, j, wj) = self.weights(f);
        if wj == 0.0 {
            return self.values[i];
        }
        self.values[i] * wi + self.values[j] * wj
    }

    /// Knots restricted to those at or after `frame`.
    pub fn tail_from(&self, frame: usize) -> Option<CorrectionKnots> {
        let i = self.frames.iter().position(|&f| f >= frame)?;
        Some(Self {
            frames: self.frames[i..].to_vec(),
            values: self.values[i..].to_vec(),
        })
    }
}

fn interp_weights(frames: &[usize], f: usize) -> (usize, f64, usize, f64) {
    let last = frames.len() - 1;
    if f <= frames[0] {
        return (0, 1.0, 0, 0.0);
    }
    if f >= frames[last] {
        return (last, 1.0, last, 0.0);
    }
    let j = frames.partition_point(|&k| k <= f);
    let i = j - 1;
    if frames[i] == f {
        return (i, 1.0, i, 0.0);
    }
    let wj = (f - frames[i]) as f64 / (frames[j] - frames[i]) as f64;
    (i, 1.0 - wj, j, wj)
}

/// Which velocity components enter the data term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualMode {
    /// All three stabilized components, vertical target included.
    #[default]
    Full3D,
    /// Horizontal `x` and `z` only.
    Horizontal2D,
}

impl ResidualMode {
    pub(crate) fn axes(self) -> &'static [usize] {
        match self {
            ResidualMode::Full3D => &[0, 1, 2],
            ResidualMode::Horizontal2D => &[0, 2],
        }
    }
}

/// A velocity target at one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    /// Global frame index.
    pub frame: usize,
    pub velocity: Vec3<Stabilized>,
}

/// Acceleration data and targets for one solve over frames `start..start + len`.
#[derive(Clone, Debug)]
pub struct CorrectionProblem {
    /// Global index of the first frame.
    pub start: usize,
    pub dt: f64,
    /// `R_WI` per frame.
    pub rotations: Vec<Rotation>,
    /// Raw device-frame linear acceleration per frame.
    pub accel: Vec<Vector3<f64>>,
    /// World velocity at `start`.
    pub initial_velocity: Vector3<f64>,
    pub constraints: Vec<Constraint>,
    /// `R_SW` at each constraint, same order as `constraints`.
    pub constraint_rotations: Vec<Rotation>,
    pub knot_frames: Vec<usize>,
    pub lambda: f64,
    pub mode: ResidualMode,
}

impl CorrectionProblem {
    /// Whole-sequence problem from zero initial velocity on the default knot grid.
    pub fn from_sequence(
        seq: &Sequence,
        constraints: Vec<Constraint>,
        lambda: f64,
    ) -> Result<Self, CorrectionError> {
        Self::from_frames(
            seq.frames(),
            0,
            seq.dt(),
            Vector3::zeros(),
            constraints,
            knot_frames(seq.len(), KNOT_SPACING),
            lambda,
            ResidualMode::Full3D,
        )
    }

    /// Problem over `frames`, whose first element is global frame `start`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_frames(
        frames: &[SensorFrame],
        start: usize,
        dt: f64,
        initial_velocity: Vector3<f64>,
        constraints: Vec<Constraint>,
        knot_frames: Vec<usize>,
        lambda: f64,
        mode: ResidualMode,
    ) -> Result<Self, CorrectionError> {
        let end = start + frames.len();
        let mut constraint_rotations = Vec::with_capacity(constraints.len());
        for c in &constraints {
            if c.frame < start || c.frame >= end {
                return Err(CorrectionError::ConstraintOutOfRange {
                    frame: c.frame,
                    frames: end,
                });
            }
            let fr = &frames[c.frame - start];
            constraint_rotations.push(*stabilized_from_world(&fr.gravity, &fr.orientation)?.rotation());
        }
        let problem = Self {
            start,
            dt,
            rotations: frames.iter().map(|f| *f.orientation.rotation()).collect(),
            accel: frames.iter().map(|f| *f.linacc.raw()).collect(),
            initial_velocity,
            constraints,
            constraint_rotations,
            knot_frames,
            lambda,
            mode,
        };
        problem.check()?;
        Ok(problem)
    }

    fn check(&self) -> Result<(), CorrectionError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CorrectionError::InvalidLambda(self.lambda));
        }
        if self.constraints.is_empty() {
            return Err(CorrectionError::NoConstraints);
        }
        if self.knot_frames.is_empty() || self.knot_frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CorrectionError::BadKnots);
        }
        if self.rotations.len() != self.accel.len()
            || self.constraint_rotations.len() != self.constraints.len()
        {
            return Err(CorrectionError::Inconsistent(
                "per-frame arrays differ in length".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }

    /// Assembles the dense linear system `A x ≈ b`.
    pub fn system(&self) -> Result<CorrectionSystem, CorrectionError> {
        self.check()?;
        let k = self.knot_frames.len();
        let axes = self.mode.axes();
        let rows = axes.len() * self.constraints.len();
        let mut a = DMatrix::<f64>::zeros(rows, 3 * k);
        let mut b = DVector::<f64>::zeros(rows);

        let mut order: Vec<usize> = (0..self.constraints.len()).collect();
        order.sort_by_key(|&i| self.constraints[i].frame);

        // Running sums over frames f' < f: velocity without bias, and each
        // knot's accumulated R_WI·w·Δt block.
        let mut vel = self.initial_velocity;
        let mut blocks = vec![Matrix3::<f64>::zeros(); k];
        let mut next = 0;
        for local in 0..=self.len() {
            let f = self.start + local;
            while next < order.len() && self.constraints[order[next]].frame == f {
                let ci = order[next];
                let r_sw = self.constraint_rotations[ci].to_matrix();
                let target = self.constraints[ci].velocity.raw();
                let v_s = r_sw * vel;
                for (ri, &axis) in axes.iter().enumerate() {
                    let row = ci * axes.len() + ri;
                    b[row] = target[axis] - v_s[axis];
                    let r_row = r_sw.row(axis);
                    for (kk, blk) in blocks.iter().enumerate() {
                        let v = r_row * blk;
                        a[(row, 3 * kk)] = v[0];
                        a[(row, 3 * kk + 1)] = v[1];
                        a[(row, 3 * kk + 2)] = v[2];
                    }
                }
                next += 1;
            }
            if local == self.len() {
                break;
            }
            let r = self.rotations[local].to_matrix();
            vel += r * self.accel[local] * self.dt;
            let (i, wi, j, wj) = interp_weights(&self.knot_frames, f);
            blocks[i] += r * (wi * self.dt);
            if wj != 0.0 {
                blocks[j] += r * (wj * self.dt);
            }
        }
        Ok(CorrectionSystem::new(a, b, self.knot_frames.clone()))
    }

    /// Minimizer of the regularized objective.
    pub fn solve(&self) -> Result<CorrectionKnots, CorrectionError> {
        self.system()?.solve(self.lambda)
    }

    /// Objective value for given knots on this problem's grid.
    pub fn objective(&self, knots: &CorrectionKnots) -> Result<f64, CorrectionError> {
        let sys = self.system()?;
        Ok(sys.objective(&knots_to_vector(knots), self.lambda))
    }
}

/// Dense least-squares system for a fixed set of constraints; reusable across λ.
#[derive(Clone, Debug)]
pub struct CorrectionSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    ata: DMatrix<f64>,
    atb: DVector<f64>,
    knot_frames: Vec<usize>,
}

impl CorrectionSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, knot_frames: Vec<usize>) -> Self {
        let ata = a.tr_mul(&a);
        let atb = a.tr_mul(&b);
        Self {
            a,
            b,
            ata,
            atb,
            knot_frames,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.a.ncols()
    }

    /// `|A x - b|² + λ |x|²`.
    pub fn objective(&self, x: &DVector<f64>, lambda: f64) -> f64 {
        (&self.a * x - &self.b).norm_squared() + lambda * x.norm_squared()
    }

    /// `2 (Aᵀ(A x - b) + λ x)`.
    pub fn gradient(&self, x: &DVector<f64>, lambda: f64) -> DVector<f64> {
        (&self.ata * x - &self.atb + x * lambda) * 2.0
    }

    /// Solves the normal equations by Cholesky, falling back to QR on the
    /// stacked system `[A; √λ I]`.
    pub fn solve_vector(&self, lambda: f64) -> Result<DVector<f64>, CorrectionError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CorrectionError::InvalidLambda(lambda));
        }
        let n = self.unknowns();
        if lambda > 0.0 {
            let mut h = self.ata.clone();
            for i in 0..n {
                h[(i, i)] += lambda;
            }
            if let Some(ch) = h.cholesky() {
                return Ok(ch.solve(&self.atb));
            }
            log::debug!("Cholesky failed at lambda={lambda}, falling back to QR");
        }
        let rows = self.a.nrows();
        let mut stacked = DMatrix::<f64>::zeros(rows + n, n);
        stacked.rows_mut(0, rows).copy_from(&self.a);
        let mut rhs = DVector::<f64>::zeros(rows + n);
        rhs.rows_mut(0, rows).copy_from(&self.b);
        let s = lambda.sqrt();
        for i in 0..n {
            stacked[(rows + i, i)] = s;
        }
        if stacked.nrows() < n {
            return Err(CorrectionError::RankDeficient {
                rank: stacked.nrows(),
                unknowns: n,
            });
        }
        let qr = stacked.qr();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = scale * 1e-12 * (n as f64);
        let rank = r.diagonal().iter().filter(|v| v.abs() > tol).count();
        if rank < n {
            return Err(CorrectionError::RankDeficient { rank, unknowns: n });
        }
        let qtb = qr.q().tr_mul(&rhs);
        r.solve_upper_triangular(&qtb)
            .ok_or(CorrectionError::RankDeficient { rank, unknowns: n })
    }

    pub fn solve(&self, lambda: f64) -> Result<CorrectionKnots, CorrectionError> {
        let x = self.solve_vector(lambda)?;
        Ok(vector_to_knots(&x, &self.knot_frames))
    }
}

fn flush(v: f64) -> f64 {
    if v.abs() < KNOT_FLUSH {
        0.0
    } else {
        v
    }
}

fn vector_to_knots(x: &DVector<f64>, frames: &[usize]) -> CorrectionKnots {
    let values = (0..frames.len())
        .map(|k| Vec3::new(flush(x[3 * k]), flush(x[3 * k + 1]), flush(x[3 * k + 2])))
        .collect();
    CorrectionKnots {
        frames: frames.to_vec(),
        values,
    }
}

pub fn knots_to_vector(knots: &CorrectionKnots) -> DVector<f64> {
    DVector::from_iterator(
        3 * knots.len(),
        knots.values().iter().flat_map(|v| v.to_array()),
    )
}

/// Integrated velocity at frame `f` in the stabilized frame, from rest at frame 0.
pub fn corrected_velocity(
    seq: &Sequence,
    knots: &CorrectionKnots,
    f: usize,
) -> Result<Vec3<Stabilized>, CorrectionError> {
    let frames = seq.frames();
    if f >= frames.len() {
        return Err(CorrectionError::ConstraintOutOfRange {
            frame: f,
            frames: frames.len(),
        });
    }
    let mut v = Vector3::zeros();
    for (i, fr) in frames[..f].iter().enumerate() {
        let a = fr.linacc + knots.interpolate(i);
        v += fr.orientation.rotation().rotate(a.raw()) * seq.dt();
    }
    let r_sw = stabilized_from_world(&frames[f].gravity, &frames[f].orientation)?;
    Ok(r_sw.apply(&Vec3::from_raw(v)))
}
