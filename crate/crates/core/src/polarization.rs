//! Adaptive E-I polarization index of a two-group partition of leaders, and
//! its weekly dynamics against a label-reshuffle null.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chambers::OverlapMatrix;
use crate::spectral::Group;
use crate::stats;

/// Why a week has no polarization value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    /// No member of this group has a defined overlap that week.
    GroupAbsent(Group),
    /// All off-diagonal strength is zero.
    ZeroStrength,
}

/// Within- and cross-group strength; the diagonal is excluded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Strengths {
    pub within: f64,
    pub cross: f64,
}

fn present(q: &OverlapMatrix, i: usize) -> bool {
    (0..q.dim()).any(|j| q.get(i, j).is_some())
}

pub fn strengths(q: &OverlapMatrix, labels: &[Group]) -> Strengths {
    assert_eq!(labels.len(), q.dim(), "one label per leader");
    let mut s = Strengths::default();
    for (i, j, v) in q.pairs() {
        if labels[i] == labels[j] {
            s.within += 2.0 * v;
        } else {
            s.cross += 2.0 * v;
        }
    }
    s
}

/// `Φ = (n_αα + n_ββ − n_αβ − n_βα) / (n_αα + n_ββ + n_αβ + n_βα)`.
pub fn ei_index(q: &OverlapMatrix, labels: &[Group]) -> Result<f64, Undefined> {
    for g in [Group::Alpha, Group::Beta] {
        if !(0..q.dim()).any(|i| labels[i] == g && present(q, i)) {
            return Err(Undefined::GroupAbsent(g));
        }
    }
    let s = strengths(q, labels);
    let total = s.within + s.cross;
    if total > 0.0 {
        Ok((s.within - s.cross) / total)
    } else {
        Err(Undefined::ZeroStrength)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekPolarization {
    pub week: u32,
    pub phi: Option<f64>,
    pub undefined: Option<Undefined>,
    pub null_mean: Option<f64>,
    pub null_sd: Option<f64>,
    /// Null realisations with a defined value.
    pub null_defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSeries {
    pub weeks: Vec<WeekPolarization>,
    /// Mean Φ over defined weeks.
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Mean of every defined null value over weeks and realisations.
    pub null_mean: Option<f64>,
    /// Mean of `|Φ|` over the same null values.
    pub null_mean_abs: Option<f64>,
}

fn summary(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    match xs.len() {
        0 => (None, None),
        1 => (Some(xs[0]), None),
        _ => (Some(stats::mean(xs)), Some(stats::sample_sd(xs))),
    }
}

/// Weekly Φ of `labels` plus the null band from `null` (one label vector per
/// realisation, e.g. from [`crate::nullmodel::reshuffle_labels`]).
pub fn polarization_dynamics(weekly: &[(u32, OverlapMatrix)], labels: &[Group], null: &[Vec<Group>]) -> PolarizationSeries {
    let per_week: Vec<(WeekPolarization, Vec<f64>)> = weekly
        .par_iter()
        .map(|(week, q)| {
            let phi = ei_index(q, labels);
            let nulls: Vec<f64> = null.iter().filter_map(|l| ei_index(q, l).ok()).collect();
            let (null_mean, null_sd) = summary(&nulls);
            let row = WeekPolarization {
                week: *week,
                phi: phi.ok(),
                undefined: phi.err(),
                null_mean,
                null_sd,
                null_defined: nulls.len(),
            };
            (row, nulls)
        })
        .collect();
    let defined: Vec<f64> = per_week.iter().filter_map(|(w, _)| w.phi).collect();
    let all_null: Vec<f64> = per_week.iter().flat_map(|(_, n)| n.iter().copied()).collect();
    let (mean, sd) = summary(&defined);
    let abs: Vec<f64> = all_null.iter().map(|x| x.abs()).collect();
    PolarizationSeries {
        weeks: per_week.into_iter().map(|(w, _)| w).collect(),
        mean,
        sd,
        null_mean: summary(&all_null).0,
        null_mean_abs: summary(&abs).0,
    }
}

/// Two partitions evaluated on the same weekly matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionComparison {
    pub first: Vec<Option<f64>>,
    pub second: Vec<Option<f64>>,
    /// Mean `|Φ_first − Φ_second|` over weeks where both are defined.
    pub mean_abs_difference: Option<f64>,
    /// Fraction of leaders placed together, up to renaming the groups.
    pub label_agreement: f64,
}

pub fn compare_partitions(weekly: &[(u32, OverlapMatrix)], first: &[Group], second: &[Group]) -> PartitionComparison {
    assert_eq!(first.len(), second.len());
    let a: Vec<Option<f64>> = weekly.iter().map(|(_, q)| ei_index(q, first).ok()).collect();
    let b: Vec<Option<f64>> = weekly.iter().map(|(_, q)| ei_index(q, second).ok()).collect();
    let diffs: Vec<f64> = a.iter().zip(&b).filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).abs())).collect();
    let same = first.iter().zip(second).filter(|(x, y)| x == y).count() as f64;
    let n = first.len().max(1) as f64;
    PartitionComparison {
        first: a,
        second: b,
        mean_abs_difference: summary(&diffs).0,
        label_agreement: (same / n).max(1.0 - same / n),
    }
}
