//! MI-ACE: a single target signature learned from bag labels and scored
//! with the adaptive cosine estimator in a background-whitened space.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_bags, MilBag};
use crate::error::{Error, Result};
use crate::exec::Parallelism;

const MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceModel {
    pub dim: usize,
    /// Unit-norm signature in whitened coordinates.
    pub signature: Vec<f64>,
    pub background_mean: Vec<f64>,
    /// Row-major symmetric `Σ_b^{-1/2}`.
    pub whitener: Vec<f64>,
    /// Eigenvalue floor applied to `Σ_b`.
    pub regularizer: f64,
}

impl AceModel {
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        whiten(&self.whitener, &self.background_mean, x)
    }

    /// `ŝᵀx̂ / ‖x̂‖` with `x̂ = W(x − μ_b)`; zero when `x̂ = 0`.
    pub fn confidence(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.confidence_unchecked(x))
    }

    pub(crate) fn confidence_unchecked(&self, x: &[f64]) -> f64 {
        let xh = self.whiten(x);
        let norm = dot(&xh, &xh).sqrt();
        if norm == 0.0 {
            0.0
        } else {
            dot(&self.signature, &xh) / norm
        }
    }
}

pub fn ace_confidence(model: &AceModel, x: &[f64]) -> Result<f64> {
    model.confidence(x)
}

/// Training output with the objective trace and the final selection.
#[derive(Debug, Clone)]
pub struct AceFit {
    pub model: AceModel,
    /// `J` at initialization and after each refinement step.
    pub objective_trace: Vec<f64>,
    /// Selected instance index per positive bag (in bag order), from the
    /// last refinement.
    pub selected: Vec<usize>,
    pub iterations: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn whiten(w: &[f64], mu: &[f64], x: &[f64]) -> Vec<f64> {
    let d = mu.len();
    let centered: Vec<f64> = x.iter().zip(mu).map(|(a, m)| a - m).collect();
    (0..d).map(|r| dot(&w[r * d..(r + 1) * d], &centered)).collect()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// Background statistics from negative instances: mean, `Σ^{-1/2}` and the
/// eigenvalue floor `ε = 1e−6·tr(Σ)/d`.
pub(crate) fn background(negatives: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let n = negatives.len() as f64;
    let mut mu = vec![0.0; dim];
    for x in negatives {
        for k in 0..dim {
            mu[k] += x[k];
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for x in negatives {
        let c = DVector::from_iterator(dim, x.iter().zip(&mu).map(|(a, m)| a - m));
        cov.ger(1.0, &c, &c, 1.0);
    }
    let denom = if negatives.len() > 1 { n - 1.0 } else { 1.0 };
    cov /= denom;
    cov = (&cov + cov.transpose()) * 0.5;
    let eps = (1e-6 * cov.trace() / dim as f64).max(1e-12);
    let eig = SymmetricEigen::new(cov);
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(eps).sqrt());
    let w = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let flat = (0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .map(|(r, c)| w[(r, c)])
        .collect();
    (mu, flat, eps)
}

struct Whitened {
    /// Whitened positive instances, per positive bag.
    pos: Vec<Vec<Vec<f64>>>,
    /// Unit-normalized versions of `pos`.
    pos_unit: Vec<Vec<Vec<f64>>>,
    neg_mean: Vec<f64>,
    neg_unit_mean: Vec<f64>,
}

impl Whitened {
    /// `J(s) = mean over positive bags of max_j D(x̂_j, s) − mean over negatives of D(x̂, s)`.
    fn objective(&self, s: &[f64]) -> f64 {
        let pos: f64 = self
            .pos_unit
            .iter()
            .map(|bag| {
                bag.iter()
                    .map(|u| dot(s, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum::<f64>()
            / self.pos_unit.len() as f64;
        pos - dot(s, &self.neg_unit_mean)
    }

    /// Index of the highest-confidence instance per bag; ties go to the lowest index.
    fn select(&self, s: &[f64]) -> Vec<usize> {
        self.pos_unit
            .iter()
            .map(|bag| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (j, u) in bag.iter().enumerate() {
                    let v = dot(s, u);
                    if v > best.0 {
                        best = (v, j);
                    }
                }
                best.1
            })
            .collect()
    }

    fn mean_selected(&self, sel: &[usize], unit: bool) -> Vec<f64> {
        let src = if unit { &self.pos_unit } else { &self.pos };
        let d = self.neg_mean.len();
        let mut m = vec![0.0; d];
        for (bag, &j) in src.iter().zip(sel) {
            for k in 0..d {
                m[k] += bag[j][k];
            }
        }
        m.iter_mut().for_each(|v| *v /= sel.len() as f64);
        m
    }
}

pub fn miace_train(bags: &[MilBag]) -> Result<AceFit> {
    miace_train_with(bags, Parallelism::default())
}

pub fn miace_train_with(bags: &[MilBag], parallelism: Parallelism) -> Result<AceFit> {
    let dim = check_bags(bags)?;
    let negatives: Vec<&[f64]> = bags
        .iter()
        .filter(|b| !b.label)
        .flat_map(|b| b.instances.iter().map(Vec::as_slice))
        .collect();
    let (mu, w, eps) = background(&negatives, dim);

    let neg_white: Vec<Vec<f64>> = negatives.iter().map(|x| whiten(&w, &mu, x)).collect();
    let mean_of = |vs: &mut dyn Iterator<Item = Vec<f64>>| {
        let mut m = vec![0.0; dim];
        let mut n = 0.0;
        for v in vs {
            for k in 0..dim {
                m[k] += v[k];
            }
            n += 1.0;
        }
        m.iter_mut().for_each(|x| *x /= n);
        m
    };
    let neg_mean = mean_of(&mut neg_white.iter().cloned());
    let neg_unit_mean = mean_of(&mut neg_white.iter().map(|v| normalized(v)));
    let pos: Vec<Vec<Vec<f64>>> = bags
        .iter()
        .filter(|b| b.label)
        .map(|b| b.instances.iter().map(|x| whiten(&w, &mu, x)).collect())
        .collect();
    let pos_unit = pos
        .iter()
        .map(|bag: &Vec<Vec<f64>>| bag.iter().map(|v| normalized(v)).collect())
        .collect();
    let wd = Whitened {
        pos,
        pos_unit,
        neg_mean,
        neg_unit_mean,
    };

    // Initialization: best single positive instance as the signature.
    let candidates: Vec<&Vec<f64>> = wd.pos_unit.iter().flatten().collect();
    let scores = parallelism.map(&candidates, |u| {
        if dot(u, u) == 0.0 {
            f64::NEG_INFINITY
        } else {
            wd.objective(u)
        }
    });
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    let mut signature = if scores[best].is_finite() {
        candidates[best].clone()
    } else {
        // Every positive instance sits exactly on the background mean.
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    };
    let mut objective = wd.objective(&signature);
    let mut trace = vec![objective];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut selected = wd.select(&signature);
    let mut iterations = 0;

    while iterations < MAX_ITERS {
        let sel = wd.select(&signature);
        if !seen.insert(sel.clone()) {
            break;
        }
        selected = sel;
        iterations += 1;

        // Mean-difference step; if it lowers J, fall back to the step on
        // unit-normalized vectors, which maximizes a lower bound of J that is
        // tight at the current signature.
        let direct = difference_direction(&wd.mean_selected(&selected, false), &wd.neg_mean);
        let mut next = direct.map(|s| (wd.objective(&s), s));
        if next.as_ref().is_none_or(|(j, _)| *j < objective) {
            next = difference_direction(&wd.mean_selected(&selected, true), &wd.neg_unit_mean)
                .map(|s| (wd.objective(&s), s));
        }
        match next {
            Some((j, s)) if j >= objective => {
                objective = j;
                signature = s;
                trace.push(j);
            }
            _ => break,
        }
    }

    Ok(AceFit {
        model: AceModel {
            dim,
            signature,
            background_mean: mu,
            whitener: w,
            regularizer: eps,
        },
        objective_trace: trace,
        selected,
        iterations,
    })
}

fn difference_direction(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let t: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = dot(&t, &t).sqrt();
    (n > 0.0 && n.is_finite()).then(|| t.iter().map(|v| v / n).collect())
}
