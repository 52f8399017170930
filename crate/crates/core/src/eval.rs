//! Pixel ROC curves, TPR at fixed FPR, F-score and multi-run aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::ConfidenceMap;
use crate::raster::Mask;

/// FPR values reported in aggregate tables.
pub const FPR_GRID: [f64; 6] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06];

/// One operating point: everything with confidence `≥ threshold` is called root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Points by decreasing threshold, from (0, 0) at `+∞` to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        s
    }
}

/// Exact ROC over the distinct confidence values, ties grouped, with
/// trapezoidal AUC accumulated in integers.
pub fn roc_curve(confidences: &[f64], gt: &[bool]) -> Result<RocCurve> {
    if confidences.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            got: confidences.len(),
        });
    }
    if confidences.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParams("NaN confidence".into()));
    }
    let pos = gt.iter().filter(|&&g| g).count() as u64;
    let neg = gt.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area, in units of 1/(pos·neg).
    let mut area2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let v = confidences[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && confidences[order[k]] == v {
            if gt[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            threshold: v,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { points, auc })
}

/// ROC of pixels pooled over several maps.
pub fn pooled_roc(maps: &[(&ConfidenceMap, &Mask)]) -> Result<RocCurve> {
    let mut conf = Vec::new();
    let mut gt = Vec::new();
    for (map, mask) in maps {
        if (map.height(), map.width()) != (mask.height(), mask.width()) {
            return Err(Error::InvalidImage("confidence map and mask shapes differ".into()));
        }
        conf.extend_from_slice(map.values());
        gt.extend_from_slice(mask.bits());
    }
    roc_curve(&conf, &gt)
}

/// Vertical average of per-image curves, sampled at FPR steps of 1/1000.
/// Images lacking either root or soil pixels are skipped.
pub fn averaged_roc(maps: &[(&ConfidenceMap, &Mask)]) -> Result<RocCurve> {
    let curves: Vec<RocCurve> = maps
        .iter()
        .filter_map(|(map, mask)| roc_curve(map.values(), mask.bits()).ok())
        .collect();
    if curves.is_empty() {
        return Err(Error::SingleClass);
    }
    const STEPS: usize = 1000;
    let mut points = Vec::with_capacity(STEPS + 2);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    for s in 0..=STEPS {
        let fpr = s as f64 / STEPS as f64;
        let tpr = curves.iter().map(|c| tpr_at_fpr(c, fpr)).sum::<f64>() / curves.len() as f64;
        points.push(RocPoint {
            threshold: f64::NAN,
            fpr,
            tpr,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Largest TPR among points whose FPR does not exceed `fpr` (step rule).
pub fn tpr_at_fpr(curve: &RocCurve, fpr: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.fpr <= fpr)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}

/// F1 of a predicted mask; 0 when precision and recall are both 0.
pub fn f_score(pred: &Mask, gt: &Mask) -> Result<f64> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::InvalidImage("prediction and ground truth shapes differ".into()));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok(f_score_counts(tp, fp, fneg))
}

pub fn f_score_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fneg) as f64;
    2.0 * p * r / (p + r)
}

/// Mean and unbiased variance of TPR on [`FPR_GRID`] across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub runs: usize,
    pub mean: [f64; 6],
    pub variance: [f64; 6],
}

pub fn aggregate_runs(curves: &[RocCurve]) -> Result<RunAggregate> {
    if curves.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "aggregation needs at least 2 runs, got {}",
            curves.len()
        )));
    }
    let n = curves.len() as f64;
    let mut mean = [0.0; 6];
    let mut variance = [0.0; 6];
    for (g, &q) in FPR_GRID.iter().enumerate() {
        let vals: Vec<f64> = curves.iter().map(|c| tpr_at_fpr(c, q)).collect();
        let m = vals.iter().sum::<f64>() / n;
        mean[g] = m;
        variance[g] = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    }
    Ok(RunAggregate {
        runs: curves.len(),
        mean,
        variance,
    })
}

/// Table with one row per algorithm and a mean / variance column pair per
/// grid FPR.
pub fn aggregate_csv(rows: &[(String, RunAggregate)]) -> String {
    let mut s = String::from("algorithm,runs");
    for q in FPR_GRID {
        let _ = write!(s, ",mean@{q},var@{q}");
    }
    s.push('\n');
    for (name, agg) in rows {
        let _ = write!(s, "{name},{}", agg.runs);
        for g in 0..FPR_GRID.len() {
            let _ = write!(s, ",{:.6},{:.6e}", agg.mean[g], agg.variance[g]);
        }
        s.push('\n');
    }
    s
}
