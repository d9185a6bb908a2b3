use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{TemporalRetweetNetwork, WeeklyGraph};
use crate::error::{Error, Result};

/// Weighted in-degree of every active user in one week, with ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekImpact {
    pub week: u32,
    /// Global ids of active users (same order as the week's local ids).
    pub users: Vec<u32>,
    /// Retweets received, indexed by local id.
    pub impact: Vec<u64>,
    /// Local ids by decreasing impact; ties go to the lower id.
    pub order: Vec<u32>,
}

impl WeekImpact {
    fn from_graph(g: &WeeklyGraph) -> Self {
        let n = g.n_users();
        let mut impact = vec![0u64; n];
        for s in 0..n as u32 {
            for (&t, &c) in g.out_neighbors(s).iter().zip(g.out_counts(s)) {
                impact[t as usize] += u64::from(c);
            }
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| impact[b as usize].cmp(&impact[a as usize]).then(a.cmp(&b)));
        WeekImpact {
            week: g.week(),
            users: g.nodes().to_vec(),
            impact,
            order,
        }
    }

    pub fn total(&self) -> u64 {
        self.impact.iter().sum()
    }

    /// Impact of a global user id; 0 when the user is absent this week.
    pub fn of(&self, user: u32) -> u64 {
        self.users
            .binary_search(&user)
            .map(|l| self.impact[l])
            .unwrap_or(0)
    }

    /// 1-based rank of a global user id; `None` when absent this week.
    pub fn rank(&self, user: u32) -> Option<usize> {
        let local = self.users.binary_search(&user).ok()? as u32;
        self.order.iter().position(|&l| l == local).map(|p| p + 1)
    }

    /// Global ids of the `n` top-ranked users (fewer if the week is smaller).
    pub fn top(&self, n: usize) -> Vec<u32> {
        self.order
            .iter()
            .take(n)
            .map(|&l| self.users[l as usize])
            .collect()
    }
}

/// Per-week impact vectors for a whole network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactProfile {
    pub weeks: Vec<WeekImpact>,
}

impl ImpactProfile {
    pub fn week(&self, week: u32) -> Option<&WeekImpact> {
        self.weeks
            .binary_search_by_key(&week, |w| w.week)
            .ok()
            .map(|p| &self.weeks[p])
    }

    /// Weekly Gini index over active users; `None` for weeks where nobody was
    /// retweeted.
    pub fn gini_series(&self) -> Vec<(u32, Option<f64>)> {
        self.weeks
            .iter()
            .map(|w| (w.week, gini_counts(&w.impact).ok()))
            .collect()
    }
}

/// Weighted in-degree per user and week.
pub fn impact(net: &TemporalRetweetNetwork) -> ImpactProfile {
    ImpactProfile {
        weeks: net.weeks().par_iter().map(WeekImpact::from_graph).collect(),
    }
}

/// Gini index of non-negative integer wealth.
///
/// Uses the sorted form `Σ (2i − n − 1) x₍ᵢ₎ / (n Σ x)` of the mean absolute
/// difference `Σᵢⱼ |xᵢ − xⱼ| / (2 n² x̄)`, without small-sample correction.
pub fn gini_counts(values: &[u64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedInput("gini of an empty vector".into()));
    }
    let total: u128 = values.iter().map(|&v| u128::from(v)).sum();
    if total == 0 {
        return Err(Error::UndefinedInput("gini of an all-zero vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as i128;
    let numerator: i128 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2 * (i as i128 + 1) - n - 1) * x as i128)
        .sum();
    Ok(numerator as f64 / total as f64 / n as f64)
}

/// Gini index of a non-negative real vector (same estimator as [`gini_counts`]).
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedInput("gini of an empty vector".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("gini needs finite non-negative values".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedInput("gini of an all-zero vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let numerator: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * (x / total))
        .sum();
    Ok(numerator / n)
}
