//! miSVM: alternate SVM training with relabeling of positive-bag instances.

use super::{check_bags, flatten, MilBag};
use crate::error::Result;
use crate::learners::{smo_solve, KernelCache, SvmModel, SvmParams};
use crate::seed;

#[derive(Debug, Clone)]
pub struct MiSvmFit {
    pub model: SvmModel,
    /// Final instance labels, per bag in input order.
    pub labels: Vec<Vec<bool>>,
    /// Number of SVM trainings performed.
    pub iterations: usize,
    pub converged: bool,
}

pub fn misvm_train(
    bags: &[MilBag],
    params: &SvmParams,
    max_iters: usize,
    seed: u64,
) -> Result<MiSvmFit> {
    check_bags(bags)?;
    let (x, mut y) = flatten(bags);
    let mut offsets = Vec::with_capacity(bags.len());
    let mut start = 0;
    for b in bags {
        offsets.push(start..start + b.instances.len());
        start += b.instances.len();
    }

    // One cache serves every retraining: only the labels change.
    let mut cache = KernelCache::new(&x, params.kernel, params.parallelism);
    let mut iterations = 0;
    let mut converged = false;
    let mut model;
    loop {
        let sol = smo_solve(&mut cache, &y, params, seed::child(seed, iterations as u64), false)?;
        iterations += 1;
        let f = sol.training_decision.clone();
        model = sol.into_model(&x, &y, params.kernel, params.c);

        let mut next = y.clone();
        for (bag, range) in bags.iter().zip(&offsets) {
            if !bag.label {
                continue;
            }
            let mut any = false;
            for i in range.clone() {
                next[i] = f[i] > 0.0;
                any |= next[i];
            }
            if !any {
                let mut best = range.start;
                for i in range.clone() {
                    if f[i] > f[best] {
                        best = i;
                    }
                }
                next[best] = true;
            }
        }
        if next == y {
            converged = true;
            break;
        }
        y = next;
        if iterations >= max_iters.max(1) {
            break;
        }
    }

    let labels = offsets.iter().map(|r| y[r.clone()].to_vec()).collect();
    Ok(MiSvmFit {
        model,
        labels,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{smo_train, Kernel};

    fn toy() -> Vec<MilBag> {
        vec![
            MilBag::new(false, vec![vec![0.0], vec![0.1]]),
            MilBag::new(false, vec![vec![0.0], vec![0.1]]),
            MilBag::new(true, vec![vec![0.0], vec![1.0]]),
            MilBag::new(true, vec![vec![0.0], vec![1.0]]),
        ]
    }

    #[test]
    fn one_dimensional_toy_separates_planted_instances() {
        let params = SvmParams::new(10.0, Kernel::Linear);
        let fit = misvm_train(&toy(), &params, 50, 1).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.labels[2], vec![false, true]);
        assert_eq!(fit.labels[3], vec![false, true]);
        assert!(fit.labels[0].iter().chain(&fit.labels[1]).all(|&l| !l));
    }

    #[test]
    fn singleton_bags_reduce_to_plain_svm() {
        let bags: Vec<MilBag> = (0..12)
            .map(|i| {
                let v = i as f64 / 11.0;
                MilBag::new(i % 3 == 0 || v > 0.7, vec![vec![v, (i * 7 % 5) as f64 / 4.0]])
            })
            .collect();
        let params = SvmParams::default();
        let fit = misvm_train(&bags, &params, 50, 9).unwrap();
        let (x, y) = flatten(&bags);
        let plain = smo_train(&x, &y, &params, seed::child(9, 0)).unwrap();
        for xi in &x {
            let a = fit.model.decision(xi).unwrap();
            let b = plain.decision(xi).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(fit.labels.iter().flatten().copied().collect::<Vec<_>>(), y);
    }
}
