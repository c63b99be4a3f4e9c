//! Placement classifier dispatching to per-placement velocity regressors.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{grid_search_gram, GridResult, DEFAULT_FOLDS};
use super::kernel::{Kernel, KernelKind};
use super::normalizer::Normalizer;
use super::smo::SMO_TOLERANCE;
use super::svc::{PlacementClassifier, DEFAULT_CLASSIFIER_C};
use super::svr::{train_kernel, train_linear, Axis, Hyperparams, SvrModel, SvrWeights, MIN_SVR_SAMPLES};
use super::VelocityRegressor;
use crate::error::RegressionError;
use crate::features::TrainingSample;
use crate::sequence::Placement;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kernel: KernelKind,
    /// Kernel scale; `None` uses `1 / dim`.
    pub gamma: Option<f64>,
    pub classifier_c: f64,
    /// Per placement, in enumeration order. Used when `grid_search` is off.
    pub hyperparams: [Hyperparams; 4],
    /// Training samples kept per placement.
    pub pool_per_placement: usize,
    pub seed: u64,
    pub grid_search: bool,
    pub folds: usize,
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::default(),
            gamma: None,
            classifier_c: DEFAULT_CLASSIFIER_C,
            hyperparams: Placement::ALL.map(Hyperparams::for_placement),
            pool_per_placement: 600,
            seed: 0,
            grid_search: false,
            folds: DEFAULT_FOLDS,
            tolerance: SMO_TOLERANCE,
        }
    }
}

impl TrainConfig {
    pub fn kernel_for(&self, dim: usize) -> Kernel {
        match self.gamma {
            Some(g) => self.kernel.with_gamma(g),
            None => self.kernel.for_dim(dim),
        }
    }
}

/// Per-regressor training summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorReport {
    pub placement: Placement,
    pub axis: char,
    pub samples: usize,
    pub hyperparams: Hyperparams,
    pub support: usize,
    pub train_mse: f64,
    /// Cross-validated MSE of the chosen cell, when grid searched.
    pub cv_mse: Option<f64>,
    #[serde(skip)]
    pub grid: Option<GridResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub samples: usize,
    pub pooled: usize,
    pub support_columns: usize,
    pub classifier_accuracy: f64,
    pub regressors: Vec<RegressorReport>,
}

/// One classifier plus eight regressors over a shared support pool.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel {
    pub normalizer: Normalizer,
    pub kernel: Kernel,
    /// Normalized support features, one per column.
    pub support: DMatrix<f64>,
    pub classifier: PlacementClassifier,
    /// `[placement][axis]`.
    pub regressors: [[SvrModel; 2]; 4],
    /// Seed of pool selection and fold assignment.
    pub seed: u64,
}

/// Single regressor pair ignoring placement.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalModel {
    pub normalizer: Normalizer,
    pub kernel: Kernel,
    pub support: DMatrix<f64>,
    pub regressors: [SvrModel; 2],
}

struct Pool {
    normalizer: Normalizer,
    kernel: Kernel,
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    labels: Vec<Placement>,
    targets: Vec<[f64; 2]>,
    by_placement: [Vec<usize>; 4],
    total: usize,
}

impl Pool {
    fn build(samples: &[TrainingSample], cfg: &TrainConfig, need_all: bool) -> Result<Pool, RegressionError> {
        let mut groups: [Vec<usize>; 4] = Default::default();
        for (i, s) in samples.iter().enumerate() {
            groups[s.placement.index()].push(i);
        }
        let present: Vec<Placement> = Placement::ALL.into_iter().filter(|p| !groups[p.index()].is_empty()).collect();
        if need_all && present.len() < 4 {
            let missing = Placement::ALL.into_iter().filter(|p| groups[p.index()].is_empty()).collect();
            return Err(RegressionError::MissingPlacements { missing, present });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut chosen = Vec::new();
        for g in groups.iter_mut() {
            g.shuffle(&mut rng);
            g.truncate(cfg.pool_per_placement);
            g.sort_unstable();
            chosen.extend_from_slice(g);
        }
        let normalizer = Normalizer::fit(samples.iter().map(|s| s.feature.as_slice()))?;
        let dim = normalizer.dim();
        let mut x = DMatrix::zeros(dim, chosen.len());
        for (col, &i) in chosen.iter().enumerate() {
            let f = normalizer.apply(&samples[i].feature)?;
            x.column_mut(col).copy_from_slice(&f);
        }
        let kernel = cfg.kernel_for(dim);
        let gram = kernel.gram(&x);
        let labels: Vec<Placement> = chosen.iter().map(|&i| samples[i].placement).collect();
        let targets = chosen.iter().map(|&i| samples[i].target).collect();
        let mut by_placement: [Vec<usize>; 4] = Default::default();
        for (col, l) in labels.iter().enumerate() {
            by_placement[l.index()].push(col);
        }
        Ok(Pool {
            normalizer,
            kernel,
            x,
            gram,
            labels,
            targets,
            by_placement,
            total: samples.len(),
        })
    }

    fn train_regressor(
        &self,
        idx: &[usize],
        axis: Axis,
        hp: Hyperparams,
        cfg: &TrainConfig,
        placement: Placement,
    ) -> Result<(SvrModel, RegressorReport), RegressionError> {
        if idx.len() < MIN_SVR_SAMPLES {
            return Err(RegressionError::TooFewSamples {
                needed: MIN_SVR_SAMPLES,
                got: idx.len(),
            });
        }
        let y: Vec<f64> = idx.iter().map(|&i| self.targets[i][axis.index()]).collect();
        let grid = if cfg.grid_search {
            Some(grid_search_gram(&self.gram, idx, &y, self.kernel, cfg.folds, cfg.seed, cfg.tolerance)?)
        } else {
            None
        };
        let hp = grid.as_ref().map_or(hp, |g| g.best);
        let m = if self.kernel == Kernel::Linear {
            train_linear(&self.x, idx, &y, hp, cfg.tolerance)?
        } else {
            train_kernel(&self.gram, idx, &y, hp, self.kernel, cfg.tolerance)?
        };
        let train_mse = idx
            .iter()
            .zip(&y)
            .map(|(&i, t)| (m.predict_from_row(self.gram.column(i).as_slice(), self.x.column(i).as_slice()) - t).powi(2))
            .sum::<f64>()
            / idx.len() as f64;
        let report = RegressorReport {
            placement,
            axis: if axis == Axis::X { 'x' } else { 'z' },
            samples: idx.len(),
            hyperparams: hp,
            support: m.support_count(),
            train_mse,
            cv_mse: grid.as_ref().map(|g| g.best_mse),
            grid,
        };
        Ok((m, report))
    }
}

/// Keeps only referenced pool columns and renumbers the references.
fn compact(x: &DMatrix<f64>, classifier: &mut PlacementClassifier, regressors: &mut [&mut SvrModel]) -> DMatrix<f64> {
    let mut used = vec![false; x.ncols()];
    for m in classifier.machines.iter().flatten() {
        for &r in &m.rows {
            used[r] = true;
        }
    }
    for m in regressors.iter() {
        if let SvrWeights::Dual { rows, .. } = &m.weights {
            for &r in rows {
                used[r] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..x.ncols()).filter(|&i| used[i]).collect();
    let mut map = vec![usize::MAX; x.ncols()];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = new;
    }
    for m in classifier.machines.iter_mut().flatten() {
        m.rows.iter_mut().for_each(|r| *r = map[*r]);
    }
    for m in regressors.iter_mut() {
        if let SvrWeights::Dual { rows, .. } = &mut m.weights {
            rows.iter_mut().for_each(|r| *r = map[*r]);
        }
    }
    x.select_columns(&keep)
}

impl CascadeModel {
    /// Trains the classifier and all eight regressors.
    pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<(CascadeModel, TrainReport), RegressionError> {
        let pool = Pool::build(samples, cfg, true)?;
        log::info!(
            "training cascade on {} pooled samples ({} total), kernel {}",
            pool.x.ncols(),
            pool.total,
            pool.kernel.kind().name()
        );
        let classifier = PlacementClassifier::train_gram(&pool.gram, &pool.labels, cfg.classifier_c, pool.kernel)?;
        let jobs: Vec<(Placement, Axis)> = Placement::ALL
            .into_iter()
            .flat_map(|p| Axis::BOTH.map(|a| (p, a)))
            .collect();
        let trained = jobs
            .par_iter()
            .map(|&(p, a)| pool.train_regressor(&pool.by_placement[p.index()], a, cfg.hyperparams[p.index()], cfg, p))
            .collect::<Result<Vec<_>, _>>()?;
        let mut it = trained.into_iter();
        let mut reports = Vec::new();
        let mut regressors: [[SvrModel; 2]; 4] = std::array::from_fn(|_| {
            std::array::from_fn(|_| {
                let (m, r) = it.next().expect("eight regressors");
                reports.push(r);
                m
            })
        });
        let mut classifier = classifier;
        let support = {
            let mut refs: Vec<&mut SvrModel> = regressors.iter_mut().flatten().collect();
            compact(&pool.x, &mut classifier, &mut refs)
        };
        let report = TrainReport {
            samples: pool.total,
            pooled: pool.x.ncols(),
            support_columns: support.ncols(),
            classifier_accuracy: classifier.training_accuracy,
            regressors: reports,
        };
        Ok((
            CascadeModel {
                normalizer: pool.normalizer,
                kernel: pool.kernel,
                support,
                classifier,
                regressors,
                seed: cfg.seed,
            },
            report,
        ))
    }

    pub fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    fn prepare(&self, feature: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RegressionError> {
        let z = self.normalizer.apply(feature)?;
        let row = self.kernel.row(&self.support, &z);
        Ok((z, row.as_slice().to_vec()))
    }

    /// Classifier decision values.
    pub fn scores(&self, feature: &[f64]) -> Result<[f64; 4], RegressionError> {
        let (_, row) = self.prepare(feature)?;
        Ok(self.classifier.scores(&row))
    }

    pub fn classify(&self, feature: &[f64]) -> Result<Placement, RegressionError> {
        let (_, row) = self.prepare(feature)?;
        Ok(self.classifier.decide(&row))
    }

    /// Velocity from the regressors of a given placement.
    pub fn regress(&self, feature: &[f64], placement: Placement) -> Result<[f64; 2], RegressionError> {
        let (z, row) = self.prepare(feature)?;
        Ok(self.regress_prepared(&z, &row, placement))
    }

    fn regress_prepared(&self, z: &[f64], row: &[f64], placement: Placement) -> [f64; 2] {
        self.regressors[placement.index()].each_ref().map(|m| m.predict_from_row(row, z))
    }

    /// Classifies, then regresses with that placement's pair.
    pub fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError> {
        let (z, row) = self.prepare(feature)?;
        let p = self.classifier.decide(&row);
        Ok((self.regress_prepared(&z, &row, p), p))
    }
}

impl VelocityRegressor for CascadeModel {
    fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError> {
        CascadeModel::predict(self, feature)
    }
}

impl GlobalModel {
    /// One regressor per axis over all placements with shared hyperparameters.
    pub fn train(samples: &[TrainingSample], cfg: &TrainConfig, hp: Hyperparams) -> Result<GlobalModel, RegressionError> {
        let pool = Pool::build(samples, cfg, false)?;
        let all: Vec<usize> = (0..pool.x.ncols()).collect();
        let cfg = TrainConfig {
            grid_search: false,
            ..cfg.clone()
        };
        let vx = pool.train_regressor(&all, Axis::X, hp, &cfg, Placement::Leg)?.0;
        let vz = pool.train_regressor(&all, Axis::Z, hp, &cfg, Placement::Leg)?.0;
        let mut models = [vx, vz];
        let mut classifier = PlacementClassifier {
            kernel: pool.kernel,
            c: 0.0,
            machines: Default::default(),
            training_accuracy: 0.0,
        };
        let support = {
            let mut refs: Vec<&mut SvrModel> = models.iter_mut().collect();
            compact(&pool.x, &mut classifier, &mut refs)
        };
        Ok(GlobalModel {
            normalizer: pool.normalizer,
            kernel: pool.kernel,
            support,
            regressors: models,
        })
    }

    pub fn regress(&self, feature: &[f64]) -> Result<[f64; 2], RegressionError> {
        let z = self.normalizer.apply(feature)?;
        let row = self.kernel.row(&self.support, &z);
        Ok(self.regressors.each_ref().map(|m| m.predict_from_row(row.as_slice(), &z)))
    }
}

impl VelocityRegressor for GlobalModel {
    fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError> {
        Ok((self.regress(feature)?, Placement::Leg))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Four clusters in 8 dimensions, targets a placement-specific linear map.
    pub(crate) fn toy_samples(per: usize, seed: u64) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for p in Placement::ALL {
            for k in 0..per {
                let mut f: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
                f[p.index()] += 4.0;
                let s = 0.3 * (p.index() as f64 + 1.0);
                out.push(TrainingSample {
                    target: [s * f[4], -s * f[5]],
                    feature: f,
                    placement: p,
                    frame: k,
                });
            }
        }
        out
    }

    #[test]
    fn dispatch_matches_direct_regression() {
        let samples = toy_samples(60, 1);
        let (m, report) = CascadeModel::train(&samples, &TrainConfig::default()).unwrap();
        assert_eq!(report.regressors.len(), 8);
        assert_eq!(report.classifier_accuracy, 1.0);
        for s in samples.iter().step_by(7) {
            let (v, p) = m.predict(&s.feature).unwrap();
            assert_eq!(p, s.placement);
            assert_eq!(v, m.regress(&s.feature, p).unwrap());
            assert_eq!(argmax_of(&m, &s.feature), p);
        }
    }

    fn argmax_of(m: &CascadeModel, f: &[f64]) -> Placement {
        super::super::svc::argmax(&m.scores(f).unwrap())
    }

    #[test]
    fn training_is_deterministic() {
        let samples = toy_samples(55, 2);
        let cfg = TrainConfig {
            pool_per_placement: 50,
            ..TrainConfig::default()
        };
        let (a, _) = CascadeModel::train(&samples, &cfg).unwrap();
        let (b, _) = CascadeModel::train(&samples, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.support.ncols() <= 200);
    }

    #[test]
    fn fits_training_targets() {
        let samples = toy_samples(80, 3);
        for kernel in [KernelKind::Linear, KernelKind::Poly2] {
            let cfg = TrainConfig {
                kernel,
                hyperparams: [Hyperparams { c: 10.0, epsilon: 0.01 }; 4],
                ..TrainConfig::default()
            };
            let (m, report) = CascadeModel::train(&samples, &cfg).unwrap();
            for r in &report.regressors {
                assert!(r.train_mse < 1e-3, "{kernel:?} {r:?}");
            }
            let worst = samples
                .iter()
                .map(|s| {
                    let (v, _) = m.predict(&s.feature).unwrap();
                    (v[0] - s.target[0]).abs().max((v[1] - s.target[1]).abs())
                })
                .fold(0.0, f64::max);
            assert!(worst < 0.05, "{kernel:?} worst residual {worst}");
        }
    }

    #[test]
    fn missing_placement_is_reported() {
        let samples: Vec<_> = toy_samples(60, 4).into_iter().filter(|s| s.placement != Placement::Hand).collect();
        match CascadeModel::train(&samples, &TrainConfig::default()) {
            Err(RegressionError::MissingPlacements { missing, .. }) => assert_eq!(missing, vec![Placement::Hand]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (m, _) = CascadeModel::train(&toy_samples(60, 5), &TrainConfig::default()).unwrap();
        assert!(matches!(m.predict(&[0.0; 3]), Err(RegressionError::Dimension { expected: 8, got: 3 })));
    }

    #[test]
    fn global_model_ignores_placement() {
        let samples = toy_samples(60, 6);
        let g = GlobalModel::train(&samples, &TrainConfig::default(), Hyperparams { c: 10.0, epsilon: 0.01 }).unwrap();
        let v = g.regress(&samples[0].feature).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }
}
