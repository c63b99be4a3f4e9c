//! Sequential minimal optimization with second-order working set selection.
//!
//! Solves `min ½ αᵀQα + pᵀα` subject to `yᵀα = 0`, `0 ≤ α_t ≤ c_t`, where
//! `Q_ts = y_t y_s K(t mod n, s mod n)` for a precomputed `n × n` kernel.

use nalgebra::DMatrix;

use crate::error::RegressionError;

const TAU: f64 = 1e-12;

/// Default stopping tolerance on the maximal KKT violation.
pub const SMO_TOLERANCE: f64 = 1e-3;

pub(crate) struct SmoProblem<'a> {
    pub k: &'a DMatrix<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub objective: f64,
}

impl SmoProblem<'_> {
    fn n(&self) -> usize {
        self.k.nrows()
    }

    fn q_row(&self, i: usize, out: &mut [f64]) {
        let n = self.n();
        let col = self.k.column(i % n);
        let yi = self.y[i];
        for (t, o) in out.iter_mut().enumerate() {
            *o = yi * self.y[t] * col[t % n];
        }
    }

    pub fn solve(&self, eps: f64, max_iter: usize) -> Result<SmoSolution, RegressionError> {
        let m = self.y.len();
        let n = self.n();
        let qd: Vec<f64> = (0..m).map(|t| self.k[(t % n, t % n)]).collect();
        let mut alpha = vec![0.0; m];
        let mut g = self.p.clone();
        let mut qi = vec![0.0; m];
        let mut qj = vec![0.0; m];
        let upper = |a: &[f64], t: usize| a[t] >= self.c[t];
        let lower = |a: &[f64], t: usize| a[t] <= 0.0;

        let mut iter = 0;
        loop {
            // Maximal violating index i.
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..m {
                if self.y[t] > 0.0 {
                    if !upper(&alpha, t) && -g[t] >= gmax {
                        gmax = -g[t];
                        i = t;
                    }
                } else if !lower(&alpha, t) && g[t] >= gmax {
                    gmax = g[t];
                    i = t;
                }
            }
            if i == usize::MAX {
                break;
            }
            self.q_row(i, &mut qi);
            let mut gmax2 = f64::NEG_INFINITY;
            let mut best = f64::INFINITY;
            let mut j = usize::MAX;
            for t in 0..m {
                if self.y[t] > 0.0 {
                    if !lower(&alpha, t) {
                        let diff = gmax + g[t];
                        if g[t] >= gmax2 {
                            gmax2 = g[t];
                        }
                        if diff > 0.0 {
                            let mut quad = qd[i] + qd[t] - 2.0 * self.y[i] * qi[t];
                            if quad <= 0.0 {
                                quad = TAU;
                            }
                            let obj = -(diff * diff) / quad;
                            if obj <= best {
                                best = obj;
                                j = t;
                            }
                        }
                    }
                } else if !upper(&alpha, t) {
                    let diff = gmax - g[t];
                    if -g[t] >= gmax2 {
                        gmax2 = -g[t];
                    }
                    if diff > 0.0 {
                        let mut quad = qd[i] + qd[t] + 2.0 * self.y[i] * qi[t];
                        if quad <= 0.0 {
                            quad = TAU;
                        }
                        let obj = -(diff * diff) / quad;
                        if obj <= best {
                            best = obj;
                            j = t;
                        }
                    }
                }
            }
            if gmax + gmax2 < eps || j == usize::MAX {
                break;
            }
            if iter >= max_iter {
                return Err(RegressionError::NonConvergence {
                    iterations: iter,
                    objective: objective(&alpha, &g, &self.p),
                });
            }
            iter += 1;
            self.q_row(j, &mut qj);

            let (ci, cj) = (self.c[i], self.c[j]);
            let (oi, oj) = (alpha[i], alpha[j]);
            let (mut ai, mut aj) = (oi, oj);
            if self.y[i] != self.y[j] {
                let mut quad = qd[i] + qd[j] + 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-g[i] - g[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > ci - cj {
                    if ai > ci {
                        ai = ci;
                        aj = ci - diff;
                    }
                } else if aj > cj {
                    aj = cj;
                    ai = cj + diff;
                }
            } else {
                let mut quad = qd[i] + qd[j] - 2.0 * qi[j];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (g[i] - g[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > ci {
                    if ai > ci {
                        ai = ci;
                        aj = sum - ci;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > cj {
                    if aj > cj {
                        aj = cj;
                        ai = sum - cj;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            alpha[i] = ai;
            alpha[j] = aj;
            let (di, dj) = (ai - oi, aj - oj);
            for t in 0..m {
                g[t] += qi[t] * di + qj[t] * dj;
            }
        }

        let rho = rho(&alpha, &g, &self.y, &self.c);
        Ok(SmoSolution {
            objective: objective(&alpha, &g, &self.p),
            alpha,
            rho,
            iterations: iter,
        })
    }
}

fn objective(alpha: &[f64], g: &[f64], p: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(g.iter().zip(p)).map(|(a, (g, p))| a * (g + p)).sum::<f64>()
}

fn rho(alpha: &[f64], g: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum = 0.0;
    for t in 0..alpha.len() {
        let yg = y[t] * g[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Iteration cap scaled to problem size.
pub(crate) fn max_iterations(vars: usize) -> usize {
    1_000_000usize.max(200 * vars)
}
