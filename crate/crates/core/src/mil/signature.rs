//! Signature reports for MI-ACE models.

use std::io::Write;
use std::path::Path;

use super::{ModelPayload, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;

/// Signature entries paired with feature names, in feature order
/// (means, then variances, then entropies).
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureReport {
    pub rows: Vec<(&'static str, f64)>,
}

fn group(name: &str) -> &'static str {
    match name.split('-').next() {
        Some("mean") => "mean",
        Some("var") => "variance",
        _ => "entropy",
    }
}

impl SignatureReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,group,value\n");
        for (name, v) in &self.rows {
            s.push_str(&format!("{name},{},{v}\n", group(name)));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|(n, _)| *n == name).map(|r| r.1)
    }
}

pub fn report_signature(model: &TrainedModel) -> Result<SignatureReport> {
    let ModelPayload::Ace(ace) = &model.payload else {
        return Err(Error::NotAce(model.algo.name().into()));
    };
    let rows = model
        .feature_mask
        .indices()
        .iter()
        .zip(&ace.signature)
        .map(|(&i, &v)| (FEATURE_NAMES[i], v))
        .collect();
    Ok(SignatureReport { rows })
}

/// Per-feature mean and unbiased variance across repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSpread {
    pub rows: Vec<(&'static str, f64, f64)>,
}

impl SignatureSpread {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "feature,group,mean,variance")?;
        for (name, m, v) in &self.rows {
            writeln!(w, "{name},{},{m},{v}", group(name))?;
        }
        Ok(())
    }
}

pub fn signature_spread(reports: &[SignatureReport]) -> Result<SignatureSpread> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidParams("no signature reports".into()))?;
    if reports.iter().any(|r| {
        r.rows.len() != first.rows.len() || r.rows.iter().zip(&first.rows).any(|(a, b)| a.0 != b.0)
    }) {
        return Err(Error::InvalidParams(
            "signature reports use different feature sets".into(),
        ));
    }
    let n = reports.len() as f64;
    let rows = (0..first.rows.len())
        .map(|k| {
            let vals: Vec<f64> = reports.iter().map(|r| r.rows[k].1).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = if reports.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (first.rows[k].0, mean, var)
        })
        .collect();
    Ok(SignatureSpread { rows })
}
