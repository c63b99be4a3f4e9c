//! Planar rigid alignment and positional error.

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::integrator::Trajectory;

/// Frames used for alignment (ten seconds at 200 Hz).
pub const ALIGN_WINDOW: usize = 2000;

/// Rotation about world `+y` followed by a horizontal translation, on `(x, z)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub angle: f64,
    pub translation: [f64; 2],
}

impl RigidTransform2D {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [
            c * p[0] + s * p[1] + self.translation[0],
            -s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let back = RigidTransform2D {
            angle: -self.angle,
            translation: [0.0, 0.0],
        };
        let t = back.apply(self.translation);
        RigidTransform2D {
            angle: -self.angle,
            translation: [-t[0], -t[1]],
        }
    }
}

/// Least-squares rigid transform taking `traj` onto `gt` over the first `window` frames.
///
/// Uses all frames when either path is shorter than the window. Coincident
/// points give the identity rotation and a centroid translation.
pub fn align_points(traj: &[[f64; 2]], gt: &[[f64; 2]], window: usize) -> RigidTransform2D {
    let n = window.min(traj.len()).min(gt.len());
    if n == 0 {
        return RigidTransform2D::identity();
    }
    let centroid = |pts: &[[f64; 2]]| {
        let s = pts[..n].iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n as f64, s[1] / n as f64]
    };
    let (ca, cb) = (centroid(traj), centroid(gt));
    let (mut cc, mut ss) = (0.0, 0.0);
    for (a, b) in traj[..n].iter().zip(&gt[..n]) {
        let (ax, az) = (a[0] - ca[0], a[1] - ca[1]);
        let (bx, bz) = (b[0] - cb[0], b[1] - cb[1]);
        cc += bx * ax + bz * az;
        ss += bx * az - bz * ax;
    }
    let angle = ss.atan2(cc);
    let rotated = RigidTransform2D {
        angle,
        translation: [0.0, 0.0],
    }
    .apply(ca);
    RigidTransform2D {
        angle,
        translation: [cb[0] - rotated[0], cb[1] - rotated[1]],
    }
}

pub fn align(traj: &Trajectory, gt: &Trajectory, window: usize) -> Result<RigidTransform2D, EvalError> {
    if traj.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            traj: traj.len(),
            gt: gt.len(),
        });
    }
    Ok(align_points(&traj.planar(), &gt.planar(), window))
}

/// Sum of squared distances over the first `window` frames after `t`.
pub fn windowed_ssd(traj: &[[f64; 2]], gt: &[[f64; 2]], t: &RigidTransform2D, window: usize) -> f64 {
    traj.iter()
        .zip(gt)
        .take(window)
        .map(|(a, b)| {
            let p = t.apply(*a);
            (p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2)
        })
        .sum()
}

pub fn path_length(points: &[[f64; 2]]) -> f64 {
    points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

/// Positional error of one estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub baseline: String,
    /// Mean positional error, m.
    pub mpe: f64,
    /// `mpe` over the ground-truth path length.
    pub ratio: f64,
    pub path_length: f64,
    pub transform: RigidTransform2D,
    #[serde(skip)]
    pub errors: Vec<f64>,
}

/// Mean horizontal distance between aligned `traj` and `gt`.
pub fn mpe(traj: &Trajectory, gt: &Trajectory, transform: &RigidTransform2D, baseline: &str) -> Result<EvalReport, EvalError> {
    if traj.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            traj: traj.len(),
            gt: gt.len(),
        });
    }
    let (a, b) = (traj.planar(), gt.planar());
    let length = path_length(&b);
    if !(length > 0.0) {
        return Err(EvalError::ZeroPathLength);
    }
    let errors: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(p, q)| {
            let p = transform.apply(*p);
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .collect();
    let mpe = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(EvalReport {
        baseline: baseline.to_string(),
        mpe,
        ratio: mpe / length,
        path_length: length,
        transform: *transform,
        errors,
    })
}

/// Aligns over [`ALIGN_WINDOW`] frames, then measures.
pub fn evaluate_trajectory(traj: &Trajectory, gt: &Trajectory, baseline: &str) -> Result<EvalReport, EvalError> {
    let t = align(traj, gt, ALIGN_WINDOW)?;
    mpe(traj, gt, &t, baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn curve(n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|i| {
            let t = i as f64 * 0.01;
            [t + 0.3 * (2.0 * t).sin(), 0.5 * t * t - (t).cos()]
        }).collect()
    }

    #[test]
    fn identical_paths_align_to_identity() {
        let a = curve(300);
        let t = align_points(&a, &a, 2000);
        assert!(t.angle.abs() < 1e-12 && t.translation.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn recovers_a_constructed_transform() {
        let a = curve(500);
        let truth = RigidTransform2D {
            angle: 30f64.to_radians(),
            translation: [1.0, 2.0],
        };
        let b: Vec<_> = a.iter().map(|p| truth.apply(*p)).collect();
        let t = align_points(&a, &b, 2000);
        assert!((t.angle - truth.angle).abs() < 1e-9);
        assert!((t.translation[0] - 1.0).abs() < 1e-9 && (t.translation[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_points_give_centroid_translation() {
        let a = vec![[1.0, 1.0]; 10];
        let b = vec![[3.0, -2.0]; 10];
        let t = align_points(&a, &b, 2000);
        assert_eq!(t.angle, 0.0);
        assert_eq!(t.translation, [2.0, -3.0]);
    }

    #[test]
    fn alignment_beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = curve(400);
        let a: Vec<_> = b
            .iter()
            .map(|p| {
                let q = RigidTransform2D { angle: 1.1, translation: [-4.0, 0.5] }.apply(*p);
                [q[0] + rng.random_range(-0.2..0.2), q[1] + rng.random_range(-0.2..0.2)]
            })
            .collect();
        let best = align_points(&a, &b, 300);
        let opt = windowed_ssd(&a, &b, &best, 300);
        assert!(opt <= windowed_ssd(&a, &b, &RigidTransform2D::identity(), 300));
        for _ in 0..10_000 {
            let c = RigidTransform2D {
                angle: best.angle + rng.random_range(-0.5..0.5),
                translation: [
                    best.translation[0] + rng.random_range(-1.0..1.0),
                    best.translation[1] + rng.random_range(-1.0..1.0),
                ],
            };
            assert!(windowed_ssd(&a, &b, &c, 300) >= opt - 1e-9);
        }
    }

    proptest! {
        #[test]
        fn inverse_undoes_apply(angle in -7.0f64..7.0, tx in -50.0f64..50.0, tz in -50.0f64..50.0, x in -100.0f64..100.0, z in -100.0f64..100.0) {
            let t = RigidTransform2D { angle, translation: [tx, tz] };
            let back = t.inverse().apply(t.apply([x, z]));
            prop_assert!((back[0] - x).abs() < 1e-9 && (back[1] - z).abs() < 1e-9);
        }

        #[test]
        fn mpe_is_invariant_to_a_shared_transform(angle in -3.0f64..3.0, tx in -5.0f64..5.0, tz in -5.0f64..5.0) {
            let b = curve(300);
            let a: Vec<_> = b.iter().enumerate().map(|(i, p)| [p[0] + 0.01 * i as f64, p[1] - 0.2]).collect();
            let g = RigidTransform2D { angle, translation: [tx, tz] };
            let err = |a: &[[f64; 2]], b: &[[f64; 2]]| {
                let t = align_points(a, b, 100);
                a.iter().zip(b).map(|(p, q)| { let p = t.apply(*p); (p[0] - q[0]).hypot(p[1] - q[1]) }).sum::<f64>()
            };
            let ga: Vec<_> = a.iter().map(|p| g.apply(*p)).collect();
            let gb: Vec<_> = b.iter().map(|p| g.apply(*p)).collect();
            prop_assert!((err(&a, &b) - err(&ga, &gb)).abs() < 1e-8);
        }
    }
}
