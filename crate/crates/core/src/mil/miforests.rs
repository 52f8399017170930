//! MIForests: random forests over latent instance labels, optimized by
//! deterministic annealing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_bags, flatten, MilBag};
use crate::error::{Error, Result};
use crate::learners::{forest_train, ForestModel, ForestParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    /// Multiplicative cooling factor per step.
    pub cooling: f64,
    pub steps: usize,
    pub retrains_per_step: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling: 0.5,
            steps: 10,
            retrains_per_step: 1,
        }
    }
}

impl AnnealSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0)
            || !(self.cooling > 0.0 && self.cooling < 1.0)
            || self.retrains_per_step == 0
        {
            return Err(Error::InvalidParams(format!(
                "annealing schedule needs T0 > 0, 0 < cooling < 1, retrains >= 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Probability of drawing label 1 at temperature `t`: `p^(1/t)` normalized
/// against `(1−p)^(1/t)`.
pub fn anneal_probability(p: f64, t: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let z = (p.ln() - (1.0 - p).ln()) / t;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct MiForestsFit {
    pub model: ForestModel,
    /// Final instance labels, per bag in input order.
    pub labels: Vec<Vec<bool>>,
    /// Temperature used at each annealing step.
    pub temperatures: Vec<f64>,
}

pub fn miforests_train(
    bags: &[MilBag],
    params: &ForestParams,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<MiForestsFit> {
    check_bags(bags)?;
    schedule.validate()?;
    let (x, mut y) = flatten(bags);
    let mut ranges = Vec::with_capacity(bags.len());
    let mut start = 0;
    for b in bags {
        ranges.push(start..start + b.instances.len());
        start += b.instances.len();
    }
    let positive: Vec<_> = bags
        .iter()
        .zip(&ranges)
        .filter(|(b, _)| b.label)
        .map(|(_, r)| r.clone())
        .collect();

    let predict_positives = |forest: &ForestModel| -> Vec<(usize, f64)> {
        let idx: Vec<usize> = positive.iter().flat_map(|r| r.clone()).collect();
        let probs = params
            .parallelism
            .map(&idx, |&i| forest.predict_unchecked(&x[i]));
        idx.into_iter().zip(probs).collect()
    };
    // Forces the most probable instance of any all-negative positive bag.
    let enforce = |y: &mut [bool], p: &[f64]| {
        for r in &positive {
            if !y[r.clone()].iter().any(|&l| l) {
                let mut best = r.start;
                for i in r.clone() {
                    if p[i] > p[best] {
                        best = i;
                    }
                }
                y[best] = true;
            }
        }
    };

    let mut draw_rng = seed::rng(seed::child(seed, u64::MAX));
    let mut p = vec![0.0; x.len()];
    let mut t = schedule.initial_temperature;
    let mut temperatures = Vec::with_capacity(schedule.steps);
    let mut round = 0u64;
    let mut forest = None;
    for _ in 0..schedule.steps {
        temperatures.push(t);
        for _ in 0..schedule.retrains_per_step {
            let f = forest_train(&x, &y, params, seed::child(seed, round))?;
            round += 1;
            for (i, prob) in predict_positives(&f) {
                p[i] = prob;
                y[i] = draw_rng.random::<f64>() < anneal_probability(prob, t);
            }
            enforce(&mut y, &p);
            forest = Some(f);
        }
        t *= schedule.cooling;
    }

    // Hard labels from the last forest, then one final fit.
    if let Some(f) = &forest {
        for (i, prob) in predict_positives(f) {
            p[i] = prob;
            y[i] = prob > 0.5;
        }
        enforce(&mut y, &p);
    }
    let model = forest_train(&x, &y, params, seed::child(seed, round))?;
    let labels = ranges.iter().map(|r| y[r.clone()].to_vec()).collect();
    Ok(MiForestsFit {
        model,
        labels,
        temperatures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annealing_probability_limits() {
        assert_eq!(anneal_probability(0.7, 1.0), 0.7);
        assert!((anneal_probability(0.3, 1.0) - 0.3).abs() < 1e-12);
        assert_eq!(anneal_probability(0.0, 0.1), 0.0);
        assert_eq!(anneal_probability(1.0, 0.1), 1.0);
        assert_eq!(anneal_probability(0.5, 1e-6), 0.5);
        for p in [0.01, 0.2, 0.49, 0.51, 0.8, 0.999] {
            let q = anneal_probability(p, 1e-6);
            assert_eq!(q, if p > 0.5 { 1.0 } else { 0.0 });
        }
        // sharpening moves probabilities away from 1/2
        assert!(anneal_probability(0.7, 0.5) > 0.7);
        assert!(anneal_probability(0.3, 0.5) < 0.3);
    }

    #[test]
    fn unambiguous_bags_are_fully_positive() {
        let mut bags = Vec::new();
        for i in 0..4 {
            let v = vec![10.0, 10.0];
            bags.push(MilBag::new(true, vec![v; 3]));
            let n = i as f64 * 0.1;
            bags.push(MilBag::new(false, vec![vec![n, 0.0], vec![0.0, n + 0.05]]));
        }
        let fit = miforests_train(&bags, &ForestParams::new(20, 2), &AnnealSchedule::default(), 4)
            .unwrap();
        for (b, l) in bags.iter().zip(&fit.labels) {
            assert!(l.iter().all(|&v| v == b.label));
            for inst in &b.instances {
                let p = fit.model.predict(inst).unwrap();
                assert_eq!(p > 0.5, b.label);
            }
        }
        assert_eq!(fit.temperatures.len(), 10);
        assert!((fit.temperatures[9] - 0.5f64.powi(9)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_schedule() {
        let bags = vec![
            MilBag::new(true, vec![vec![1.0]]),
            MilBag::new(false, vec![vec![0.0]]),
        ];
        let bad = AnnealSchedule {
            cooling: 1.5,
            ..AnnealSchedule::default()
        };
        assert!(miforests_train(&bags, &ForestParams::new(3, 1), &bad, 0).is_err());
    }
}
