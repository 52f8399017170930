//! Binary C-SVM trained by sequential minimal optimization.
//!
//! The dual is solved in its minimization form
//! `min ½αᵀQα − eᵀα  s.t. 0 ≤ α ≤ C, yᵀα = 0` with `Q_ij = y_i y_j k(x_i, x_j)`,
//! choosing the maximal KKT-violating pair each step.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(−γ‖x − z‖²)`
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                Error::InvalidParams(format!("RBF gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_updates: usize,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            tol: 1e-3,
            max_updates: 1_000_000,
            parallelism: Parallelism::default(),
        }
    }
}

impl SvmParams {
    pub fn new(c: f64, kernel: Kernel) -> Self {
        Self {
            c,
            kernel,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        self.kernel.validate()
    }
}

/// Trained kernel SVM. `coef[i]` is `α_i y_i` for support vector `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub dim: usize,
    pub support_vectors: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    /// `f(x) = Σ α_i y_i k(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Lazily computed kernel rows over a fixed sample set, with a FIFO budget.
pub struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    kernel: Kernel,
    diag: Vec<f64>,
    rows: Vec<Option<Arc<[f64]>>>,
    order: VecDeque<usize>,
    max_rows: usize,
    parallelism: Parallelism,
}

const CACHE_BYTES: usize = 512 << 20;

impl<'a> KernelCache<'a> {
    pub fn new(x: &'a [Vec<f64>], kernel: Kernel, parallelism: Parallelism) -> Self {
        let n = x.len();
        let diag = x.iter().map(|v| kernel.eval(v, v)).collect();
        Self {
            x,
            kernel,
            diag,
            rows: vec![None; n],
            order: VecDeque::new(),
            max_rows: (CACHE_BYTES / (8 * n.max(1))).max(2),
            parallelism,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = &self.rows[i] {
            return r.clone();
        }
        let xi = &self.x[i];
        let mut row = vec![0.0; self.x.len()];
        let kernel = self.kernel;
        let x = self.x;
        let mode = if x.len() >= 2048 {
            self.parallelism
        } else {
            Parallelism::Sequential
        };
        mode.fill(&mut row, |j| kernel.eval(xi, &x[j]));
        let row: Arc<[f64]> = row.into();
        if self.order.len() >= self.max_rows {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        self.order.push_back(i);
        self.rows[i] = Some(row.clone());
        row
    }
}

/// Raw solver output, before support vectors are extracted.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    /// Unsigned multipliers, one per training sample.
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective `Σα − ½αᵀQα` (maximization form).
    pub dual_objective: f64,
    pub updates: usize,
    pub converged: bool,
    /// Dual objective after each pair update, when requested.
    pub trace: Vec<f64>,
    /// `f(x_i)` on every training sample.
    pub training_decision: Vec<f64>,
}

impl SmoSolution {
    pub fn into_model(self, x: &[Vec<f64>], y: &[bool], kernel: Kernel, c: f64) -> SvmModel {
        let mut support_vectors = Vec::new();
        let mut coef = Vec::new();
        for (i, &a) in self.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(x[i].clone());
                coef.push(if y[i] { a } else { -a });
            }
        }
        SvmModel {
            kernel,
            c,
            dim: x.first().map_or(0, Vec::len),
            support_vectors,
            coef,
            bias: self.bias,
        }
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[bool]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParams(format!(
            "{} samples but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn smo_train(x: &[Vec<f64>], y: &[bool], params: &SvmParams, seed: u64) -> Result<SvmModel> {
    check_inputs(x, y)?;
    let mut cache = KernelCache::new(x, params.kernel, params.parallelism);
    let sol = smo_solve(&mut cache, y, params, seed, false)?;
    Ok(sol.into_model(x, y, params.kernel, params.c))
}

/// Runs SMO over the samples behind `cache`. Ties in pair selection go to
/// the earliest sample in a seed-shuffled scan order.
pub fn smo_solve(
    cache: &mut KernelCache<'_>,
    y: &[bool],
    params: &SvmParams,
    seed: u64,
    record_trace: bool,
) -> Result<SmoSolution> {
    params.validate()?;
    check_inputs(cache.x, y)?;
    if params.kernel != cache.kernel {
        return Err(Error::InvalidParams("kernel cache built for another kernel".into()));
    }
    let n = y.len();
    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));

    let in_up = |a: f64, yy: f64| (yy > 0.0 && a < c) || (yy < 0.0 && a > 0.0);
    let in_low = |a: f64, yy: f64| (yy > 0.0 && a > 0.0) || (yy < 0.0 && a < c);
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut updates = 0;
    let mut converged = false;
    while updates < params.max_updates {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for &t in &order {
            let v = -ys[t] * grad[t];
            if in_up(alpha[t], ys[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], ys[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tol {
            converged = true;
            break;
        }

        let qi = cache.row(i);
        let qj = cache.row(j);
        let (kii, kjj, kij) = (cache.diag[i], cache.diag[j], qi[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        const TAU: f64 = 1e-12;
        if ys[i] != ys[j] {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let (yi, yj) = (ys[i], ys[j]);
        for k in 0..n {
            grad[k] += ys[k] * (yi * qi[k] * di + yj * qj[k] * dj);
        }
        updates += 1;
        if record_trace {
            trace.push(objective(&alpha, &grad));
        }
    }

    // Bias from free support vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for k in 0..n {
        let yg = ys[k] * grad[k];
        if alpha[k] >= c {
            if ys[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if ys[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let training_decision = (0..n).map(|k| ys[k] * (grad[k] + 1.0) - rho).collect();
    Ok(SmoSolution {
        dual_objective: objective(&alpha, &grad),
        training_decision,
        alpha,
        bias: -rho,
        updates,
        converged,
        trace,
    })
}
