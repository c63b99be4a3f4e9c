//! Sliding-window solves that stay equivalent to the whole-sequence solve.
//!
//! Everything before a window's first frame is summarized as a quadratic in
//! `z = (δv, x_0)`: the velocity correction at that frame and the first knot.
//! The summary is built knot interval by knot interval by
//! [`CorrectionFilter`], eliminating older knots as it goes. A window solve
//! with this prior returns the same knots as a global solve over all data up
//! to the window end.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};

use super::{vector_to_knots, Constraint, CorrectionKnots, CorrectionProblem, ResidualMode};
use crate::error::CorrectionError;
use crate::features::stabilized_from_world;
use crate::sequence::SensorFrame;

type M6 = SMatrix<f64, 6, 6>;
type V6 = SVector<f64, 6>;
type M9 = SMatrix<f64, 9, 9>;
type V9 = SVector<f64, 9>;

/// Quadratic `zᵀ H z - 2 gᵀ z` over `(δv, x_0)`, up to a constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowPrior {
    pub info: M6,
    pub vector: V6,
}

/// Summary of all data before the current knot frame.
#[derive(Clone, Debug)]
pub struct CorrectionFilter {
    frame: usize,
    spacing: usize,
    lambda: f64,
    mode: ResidualMode,
    dt: f64,
    raw_velocity: Vector3<f64>,
    prior: Option<WindowPrior>,
}

impl CorrectionFilter {
    /// Starts at frame 0 with zero velocity.
    pub fn new(spacing: usize, lambda: f64, mode: ResidualMode, dt: f64) -> Result<Self, CorrectionError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CorrectionError::InvalidLambda(lambda));
        }
        if spacing == 0 {
            return Err(CorrectionError::BadKnots);
        }
        Ok(Self {
            frame: 0,
            spacing,
            lambda,
            mode,
            dt,
            raw_velocity: Vector3::zeros(),
            prior: None,
        })
    }

    /// Knot frame the summary is positioned at.
    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Uncorrected world velocity at [`frame`](Self::frame).
    pub fn raw_velocity(&self) -> Vector3<f64> {
        self.raw_velocity
    }

    /// `None` at frame 0, where the velocity is exactly zero.
    pub fn prior(&self) -> Option<&WindowPrior> {
        self.prior.as_ref()
    }

    /// Moves the summary forward to knot frame `to`.
    ///
    /// `frames[0]` is global frame [`frame`](Self::frame) and the slice must
    /// reach frame `to`. Constraints in `(frame, to]` are absorbed; others
    /// are ignored.
    pub fn advance(
        &mut self,
        frames: &[SensorFrame],
        to: usize,
        constraints: &[Constraint],
    ) -> Result<(), CorrectionError> {
        if to < self.frame || !to.is_multiple_of(self.spacing) {
            return Err(CorrectionError::BadKnots);
        }
        if frames.len() < to - self.frame + 1 {
            return Err(CorrectionError::ConstraintOutOfRange {
                frame: to,
                frames: self.frame + frames.len(),
            });
        }
        let base = self.frame;
        while self.frame < to {
            let lo = self.frame - base;
            let hi = lo + self.spacing;
            let cs: Vec<&Constraint> = constraints
                .iter()
                .filter(|c| c.frame > self.frame && c.frame <= self.frame + self.spacing)
                .collect();
            self.step(&frames[lo..=hi], &cs)?;
        }
        Ok(())
    }

    fn step(&mut self, frames: &[SensorFrame], constraints: &[&Constraint]) -> Result<(), CorrectionError> {
        let sp = self.spacing;
        let dt = self.dt;
        let axes = self.mode.axes();

        // Partial sums over the interval: knot weights and raw velocity.
        let mut s_k = Matrix3::zeros();
        let mut s_n = Matrix3::zeros();
        let mut a_sum = Vector3::zeros();
        let mut h = M9::zeros();
        let mut g = V9::zeros();
        match &self.prior {
            Some(p) => {
                h.fixed_view_mut::<6, 6>(0, 0).copy_from(&p.info);
                g.fixed_rows_mut::<6>(0).copy_from(&p.vector);
            }
            None => {
                for i in 3..6 {
                    h[(i, i)] += self.lambda;
                }
            }
        }
        for i in 6..9 {
            h[(i, i)] += self.lambda;
        }
        let mut sorted: Vec<&Constraint> = constraints.to_vec();
        sorted.sort_by_key(|c| c.frame);
        let mut next = 0;
        for (local, fr) in frames.iter().enumerate().take(sp + 1) {
            let f = self.frame + local;
            while next < sorted.len() && sorted[next].frame == f {
                let c = sorted[next];
                let r_sw = stabilized_from_world(&fr.gravity, &fr.orientation)?.to_matrix();
                let v_raw = self.raw_velocity + a_sum;
                let target = c.velocity.raw();
                let pred = r_sw * v_raw;
                for &axis in axes {
                    let row = r_sw.row(axis);
                    let mut j = SVector::<f64, 9>::zeros();
                    let rk = row * s_k;
                    let rn = row * s_n;
                    for d in 0..3 {
                        j[d] = row[d];
                        j[3 + d] = rk[d];
                        j[6 + d] = rn[d];
                    }
                    let y = target[axis] - pred[axis];
                    h += j * j.transpose();
                    g += j * y;
                }
                next += 1;
            }
            if local == sp {
                break;
            }
            let r = fr.orientation.rotation().to_matrix();
            let w = local as f64 / sp as f64;
            s_k += r * ((1.0 - w) * dt);
            s_n += r * (w * dt);
            a_sum += r * fr.linacc.raw() * dt;
        }

        let (info, vector) = match &self.prior {
            Some(_) => {
                // δv_k = δv_{k+1} - B x_k - C x_{k+1}, then eliminate x_k.
                let mut t = M9::identity();
                t.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-s_k));
                t.fixed_view_mut::<3, 3>(0, 6).copy_from(&(-s_n));
                let h = t.transpose() * h * t;
                let g = t.transpose() * g;
                let keep = [0, 1, 2, 6, 7, 8];
                let drop = [3, 4, 5];
                let pick = |rows: &[usize], cols: &[usize]| {
                    DMatrix::from_fn(rows.len(), cols.len(), |i, j| h[(rows[i], cols[j])])
                };
                let haa = pick(&keep, &keep);
                let hab = pick(&keep, &drop);
                let hbb = pick(&drop, &drop);
                let ga = DVector::from_fn(6, |i, _| g[keep[i]]);
                let gb = DVector::from_fn(3, |i, _| g[drop[i]]);
                let ch = hbb.cholesky().ok_or(CorrectionError::RankDeficient { rank: 0, unknowns: 3 })?;
                let info = &haa - &hab * ch.solve(&hab.transpose());
                let vector = &ga - &hab * ch.solve(&gb);
                (M6::from_iterator(info.iter().copied()), V6::from_iterator(vector.iter().copied()))
            }
            None => {
                // δv_0 = 0, so x_0 = B⁻¹ (δv_1 - C x_1).
                let b_inv = s_k.try_inverse().ok_or(CorrectionError::RankDeficient { rank: 0, unknowns: 3 })?;
                let mut u = SMatrix::<f64, 6, 6>::zeros();
                u.fixed_view_mut::<3, 3>(0, 0).copy_from(&b_inv);
                u.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-b_inv * s_n));
                u.fixed_view_mut::<3, 3>(3, 3).copy_from(&Matrix3::identity());
                let h6: M6 = h.fixed_view::<6, 6>(3, 3).into();
                let g6: V6 = g.fixed_rows::<6>(3).into();
                (u.transpose() * h6 * u, u.transpose() * g6)
            }
        };
        let info = (info + info.transpose()) * 0.5;
        self.prior = Some(WindowPrior { info, vector });
        self.raw_velocity += a_sum;
        self.frame += sp;
        Ok(())
    }
}

/// Knots of a window solve plus the velocity correction at its first frame.
#[derive(Clone, Debug)]
pub struct WindowSolution {
    pub knots: CorrectionKnots,
    pub velocity_correction: Vector3<f64>,
}

/// Solves `problem` with its first knot and initial velocity tied to `prior`.
///
/// `problem.initial_velocity` must be the uncorrected velocity at the first
/// frame and `problem.knot_frames[0]` the prior's knot. Without a prior the
/// plain solve is used and the velocity correction is zero.
pub fn solve_window(
    problem: &CorrectionProblem,
    prior: Option<&WindowPrior>,
) -> Result<WindowSolution, CorrectionError> {
    let Some(prior) = prior else {
        return Ok(WindowSolution {
            knots: problem.solve()?,
            velocity_correction: Vector3::zeros(),
        });
    };
    if problem.knot_frames.first() != Some(&problem.start) {
        return Err(CorrectionError::Inconsistent(
            "window must start on its first knot".into(),
        ));
    }
    let sys = problem.system()?;
    let axes = problem.mode.axes();
    let rows = sys.a.nrows();
    let n = sys.unknowns() + 3;
    let mut a = DMatrix::<f64>::zeros(rows, n);
    a.columns_mut(3, n - 3).copy_from(&sys.a);
    for (ci, rot) in problem.constraint_rotations.iter().enumerate() {
        let r = rot.to_matrix();
        for (ri, &axis) in axes.iter().enumerate() {
            let row = ci * axes.len() + ri;
            for d in 0..3 {
                a[(row, d)] = r[(axis, d)];
            }
        }
    }
    let mut h = a.tr_mul(&a);
    let mut rhs = a.tr_mul(&sys.b);
    for i in 0..6 {
        for j in 0..6 {
            h[(i, j)] += prior.info[(i, j)];
        }
        rhs[i] += prior.vector[i];
    }
    for i in 6..n {
        h[(i, i)] += problem.lambda;
    }
    let ch = h.cholesky().ok_or(CorrectionError::RankDeficient { rank: 0, unknowns: n })?;
    let z = ch.solve(&rhs);
    let x = z.rows(3, n - 3).into_owned();
    Ok(WindowSolution {
        knots: vector_to_knots(&x, &problem.knot_frames),
        velocity_correction: Vector3::new(z[0], z[1], z[2]),
    })
}
