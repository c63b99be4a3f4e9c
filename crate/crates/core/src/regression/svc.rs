//! One-vs-rest placement classifier.

use nalgebra::DMatrix;

use super::kernel::Kernel;
use super::smo::{max_iterations, SmoProblem, SMO_TOLERANCE};
use crate::error::RegressionError;
use crate::sequence::Placement;

/// Fewest training samples per present class.
pub const MIN_PER_CLASS: usize = 10;

/// Default soft-margin weight.
pub const DEFAULT_CLASSIFIER_C: f64 = 10.0;

/// One binary machine: `f(x) = Σ coef_r k(s_r, x) + bias`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BinarySvc {
    pub rows: Vec<usize>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvc {
    pub fn decision_from_row(&self, krow: &[f64]) -> f64 {
        self.rows.iter().zip(&self.coef).map(|(&r, c)| c * krow[r]).sum::<f64>() + self.bias
    }
}

/// Placement-vs-rest machines; a placement absent from training never wins.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementClassifier {
    pub kernel: Kernel,
    pub c: f64,
    pub machines: [Option<BinarySvc>; 4],
    pub training_accuracy: f64,
}

impl PlacementClassifier {
    /// Trains on a precomputed kernel over all samples.
    pub fn train_gram(
        k: &DMatrix<f64>,
        labels: &[Placement],
        c: f64,
        kernel: Kernel,
    ) -> Result<Self, RegressionError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(RegressionError::InvalidHyperparams(format!("C must be positive, got {c}")));
        }
        let n = labels.len();
        if k.nrows() != n {
            return Err(RegressionError::Dimension {
                expected: k.nrows(),
                got: n,
            });
        }
        let mut counts = [0usize; 4];
        for l in labels {
            counts[l.index()] += 1;
        }
        let present = counts.iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(RegressionError::SingleClass(present));
        }
        for p in Placement::ALL {
            let count = counts[p.index()];
            if count > 0 && count < MIN_PER_CLASS {
                return Err(RegressionError::TooFewPerClass {
                    placement: p,
                    count,
                    needed: MIN_PER_CLASS,
                });
            }
        }
        let mut machines: [Option<BinarySvc>; 4] = Default::default();
        for p in Placement::ALL {
            if counts[p.index()] == 0 {
                continue;
            }
            let y: Vec<f64> = labels.iter().map(|&l| if l == p { 1.0 } else { -1.0 }).collect();
            let sol = SmoProblem {
                k,
                y: y.clone(),
                p: vec![-1.0; n],
                c: vec![c; n],
            }
            .solve(SMO_TOLERANCE, max_iterations(n))?;
            let mut m = BinarySvc {
                bias: -sol.rho,
                ..Default::default()
            };
            for (i, a) in sol.alpha.iter().enumerate() {
                if *a != 0.0 {
                    m.rows.push(i);
                    m.coef.push(a * y[i]);
                }
            }
            machines[p.index()] = Some(m);
        }
        let mut clf = Self {
            kernel,
            c,
            machines,
            training_accuracy: 0.0,
        };
        let correct = (0..n)
            .filter(|&i| clf.decide(k.column(i).as_slice()) == labels[i])
            .count();
        clf.training_accuracy = correct as f64 / n as f64;
        Ok(clf)
    }

    /// Trains on the columns of `x`.
    pub fn train(x: &DMatrix<f64>, labels: &[Placement], c: f64, kernel: Kernel) -> Result<Self, RegressionError> {
        Self::train_gram(&kernel.gram(x), labels, c, kernel)
    }

    /// Decision values per placement (`-inf` for untrained ones).
    pub fn scores(&self, krow: &[f64]) -> [f64; 4] {
        let mut s = [f64::NEG_INFINITY; 4];
        for (i, m) in self.machines.iter().enumerate() {
            if let Some(m) = m {
                s[i] = m.decision_from_row(krow);
            }
        }
        s
    }

    /// Argmax of the scores; ties go to the earlier placement.
    pub fn decide(&self, krow: &[f64]) -> Placement {
        argmax(&self.scores(krow))
    }
}

/// Index of the largest score, first one on ties.
pub fn argmax(scores: &[f64; 4]) -> Placement {
    let mut best = 0;
    for i in 1..4 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Placement::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clusters(per: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<Placement>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[sep, 0.0], [-sep, 0.0], [0.0, sep], [0.0, -sep]];
        let mut x = DMatrix::zeros(2, 4 * per);
        let mut labels = Vec::new();
        for (ci, c) in centers.iter().enumerate() {
            for k in 0..per {
                let col = ci * per + k;
                x[(0, col)] = c[0] + rng.random_range(-1.0..1.0);
                x[(1, col)] = c[1] + rng.random_range(-1.0..1.0);
                labels.push(Placement::ALL[ci]);
            }
        }
        (x, labels)
    }

    #[test]
    fn separable_clusters_are_learned() {
        let (x, labels) = clusters(30, 5.0, 1);
        let clf = PlacementClassifier::train(&x, &labels, 10.0, Kernel::Poly2 { gamma: 0.5 }).unwrap();
        assert_eq!(clf.training_accuracy, 1.0);
        let two: Vec<Placement> = labels.iter().map(|l| if l.index() % 2 == 0 { Placement::Leg } else { Placement::Bag }).collect();
        let x2 = DMatrix::from_fn(1, x.ncols(), |_, j| if two[j] == Placement::Leg { 2.0 + x[(0, j)] * 0.01 } else { -2.0 });
        let lin = PlacementClassifier::train(&x2, &two, 10.0, Kernel::Linear).unwrap();
        assert_eq!(lin.training_accuracy, 1.0);
    }

    #[test]
    fn ties_go_to_enumeration_order() {
        assert_eq!(argmax(&[1.0, 1.0, 1.0, 1.0]), Placement::Leg);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), Placement::Bag);
        assert_eq!(argmax(&[f64::NEG_INFINITY, -3.0, -1.0, -1.0]), Placement::Hand);
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let (x, labels) = clusters(15, 2.0, 2);
        let k = Kernel::Rbf { gamma: 0.5 };
        let clf = PlacementClassifier::train(&x, &labels, 1.0, k).unwrap();
        let g = k.gram(&x);
        for j in 0..x.ncols() {
            let s = clf.scores(g.column(j).as_slice());
            for scale in [0.01, 3.0, 1e6] {
                assert_eq!(argmax(&s.map(|v| v * scale)), argmax(&s));
            }
        }
    }

    #[test]
    fn rejects_degenerate_labels() {
        let (x, _) = clusters(15, 2.0, 3);
        let one = vec![Placement::Hand; x.ncols()];
        assert!(matches!(
            PlacementClassifier::train(&x, &one, 10.0, Kernel::Linear),
            Err(RegressionError::SingleClass(1))
        ));
        let mut few = vec![Placement::Leg; x.ncols()];
        for l in few.iter_mut().take(5) {
            *l = Placement::Body;
        }
        assert!(matches!(
            PlacementClassifier::train(&x, &few, 10.0, Kernel::Linear),
            Err(RegressionError::TooFewPerClass { count: 5, .. })
        ));
    }
}
