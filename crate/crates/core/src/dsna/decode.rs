//! Turning sparse coefficients into a label.

use std::collections::BTreeMap;

use super::cluster::consensus;
use crate::data::{Label, TaskKind};
use crate::error::{ensure, Result};

/// Regression: `yᵀα`. Classification: coefficients with magnitude at
/// least `vote_fraction` of the largest vote for their label with weight
/// `|α_i|`; ties go to the smallest class id. An all-zero `α` yields the
/// consensus label of `labels`.
pub fn decode_label(alpha: &[f64], labels: &[Label], task: TaskKind, vote_fraction: f64) -> Result<Label> {
    ensure!(alpha.len() == labels.len(), Contract, "{} coefficients for {} labels", alpha.len(), labels.len());
    ensure!(!labels.is_empty(), Contract, "cannot decode from an empty cluster");
    ensure!(labels.iter().all(|l| l.task() == task), Contract, "labels do not match task {task}");
    let top = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if top == 0.0 {
        return Ok(consensus(labels));
    }
    match task {
        TaskKind::Regression => Ok(Label::Numeric(alpha.iter().zip(labels).map(|(a, y)| a * y.value()).sum())),
        TaskKind::Classification => {
            let cut = vote_fraction * top;
            let mut votes: BTreeMap<u32, f64> = BTreeMap::new();
            for (a, y) in alpha.iter().zip(labels) {
                if a.abs() >= cut {
                    *votes.entry(y.class().expect("checked")).or_default() += a.abs();
                }
            }
            let mut best: Option<(u32, f64)> = None;
            for (c, v) in votes {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((c, v));
                }
            }
            Ok(Label::Class(best.expect("the largest coefficient always votes").0))
        }
    }
}
