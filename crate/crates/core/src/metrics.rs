//! Evaluation metrics: voxel IoU, per-class mIoU, step-wise action accuracy
//! and placement legality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tree::ActionRecord;
use crate::voxel::VoxelGrid;

/// Intersection-over-union of the occupied cell sets. Two empty grids are
/// defined to match perfectly.
pub fn iou(c: &VoxelGrid, t: &VoxelGrid) -> Result<f64> {
    if c.size() != t.size() {
        return Err(CoreError::SizeMismatch { a: c.size(), b: t.size() });
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (a, b) in c.values().iter().zip(t.values()) {
        let a = *a != 0.0;
        let b = *b != 0.0;
        inter += (a && b) as u64;
        union += (a || b) as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Per-class means plus their unweighted mean.
pub fn miou(per_class: &BTreeMap<String, Vec<f64>>) -> Result<(BTreeMap<String, f64>, f64)> {
    if per_class.is_empty() || per_class.values().any(|v| v.is_empty()) {
        return Err(CoreError::EmptyInput("per-class IoU lists"));
    }
    let means: BTreeMap<String, f64> = per_class
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let mean = means.values().sum::<f64>() / means.len() as f64;
    Ok((means, mean))
}

/// Fraction of steps whose predicted up and down sets both match the label
/// exactly.
pub fn step_accuracy(pred: &[ActionRecord], label: &[ActionRecord]) -> Result<f64> {
    if pred.len() != label.len() {
        return Err(CoreError::LengthMismatch { a: pred.len(), b: label.len() });
    }
    if pred.is_empty() {
        return Err(CoreError::EmptyInput("action sequences"));
    }
    let hits = pred.iter().zip(label).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Running tally of emitted placements vs validator failures. Decodes mask
/// illegal placements up front, so real runs stay at rate 1.0; the counter
/// exists to prove it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LegalityAudit {
    pub emitted: usize,
    pub illegal: usize,
}

impl LegalityAudit {
    pub fn record(&mut self, legal: bool) {
        self.emitted += 1;
        if !legal {
            self.illegal += 1;
        }
    }

    pub fn merge(&mut self, other: LegalityAudit) {
        self.emitted += other.emitted;
        self.illegal += other.illegal;
    }

    pub fn rate(&self) -> f64 {
        if self.emitted == 0 {
            1.0
        } else {
            1.0 - self.illegal as f64 / self.emitted as f64
        }
    }
}

/// The JSON report emitted by the evaluation command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_mean: f64,
    pub per_class: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    pub legality: f64,
}
