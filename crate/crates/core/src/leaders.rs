//! High-impact users per week, persistence, and the leading-user board.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::ImpactProfile;
use crate::sets::IdSet;

/// The `n` most retweeted users of every week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighImpactSets {
    pub n: usize,
    /// `(week, members in rank order)`.
    pub weeks: Vec<(u32, Vec<u32>)>,
}

impl HighImpactSets {
    /// Members of week `week` as a set; empty if the week is unknown.
    pub fn set(&self, week: u32) -> IdSet {
        self.ranked(week)
            .map(|m| IdSet::from_unsorted(m.to_vec()))
            .unwrap_or_default()
    }

    pub fn ranked(&self, week: u32) -> Option<&[u32]> {
        self.weeks
            .binary_search_by_key(&week, |(w, _)| *w)
            .ok()
            .map(|p| self.weeks[p].1.as_slice())
    }
}

pub fn high_impact(profile: &ImpactProfile, n: usize) -> HighImpactSets {
    assert!(n >= 1, "N must be positive");
    HighImpactSets {
        n,
        weeks: profile.weeks.iter().map(|w| (w.week, w.top(n))).collect(),
    }
}

/// Share of each week's retweets received by that week's high-impact set.
pub fn coverage(hi: &HighImpactSets, profile: &ImpactProfile) -> Vec<(u32, Option<f64>)> {
    profile
        .weeks
        .iter()
        .map(|w| {
            let total = w.total();
            let captured: u64 = hi
                .ranked(w.week)
                .unwrap_or(&[])
                .iter()
                .map(|&u| w.of(u))
                .sum();
            (w.week, (total > 0).then(|| captured as f64 / total as f64))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderOptions {
    pub m: usize,
    /// Also admit users tied with the M-th leader on persistence.
    pub extend_ties: bool,
}

/// One row of the leader table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderRow {
    pub user: u32,
    pub persistence: u32,
    pub total_impact: u64,
    pub median_impact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderBoard {
    pub m: usize,
    /// Weeks in the high-impact set, for every user that was ever in it.
    pub persistence: BTreeMap<u32, u32>,
    /// Leading users ordered by (persistence desc, total impact desc, id asc).
    pub leaders: Vec<u32>,
    /// `(week, leaders present in that week's high-impact set)`.
    pub weekly: Vec<(u32, IdSet)>,
    pub table: Vec<LeaderRow>,
}

impl LeaderBoard {
    pub fn persistence_of(&self, user: u32) -> u32 {
        self.persistence.get(&user).copied().unwrap_or(0)
    }

    pub fn leader_set(&self) -> IdSet {
        IdSet::from_unsorted(self.leaders.clone())
    }

    pub fn weekly_set(&self, week: u32) -> IdSet {
        self.weekly
            .binary_search_by_key(&week, |(w, _)| *w)
            .map(|p| self.weekly[p].1.clone())
            .unwrap_or_default()
    }
}

pub fn leading_users(hi: &HighImpactSets, profile: &ImpactProfile, opts: LeaderOptions) -> LeaderBoard {
    assert!(opts.m >= 1, "M must be positive");
    let mut persistence: BTreeMap<u32, u32> = BTreeMap::new();
    for (_, members) in &hi.weeks {
        for &u in members {
            *persistence.entry(u).or_default() += 1;
        }
    }
    let mut weekly_impacts: HashMap<u32, Vec<u64>> = HashMap::new();
    for w in &profile.weeks {
        for (&u, &x) in w.users.iter().zip(&w.impact) {
            if persistence.contains_key(&u) {
                weekly_impacts.entry(u).or_default().push(x);
            }
        }
    }
    let total = |u: u32| weekly_impacts.get(&u).map_or(0, |v| v.iter().sum::<u64>());

    let mut candidates: Vec<(u32, u32, u64)> = persistence.iter().map(|(&u, &d)| (u, d, total(u))).collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
    let mut cut = opts.m.min(candidates.len());
    if opts.extend_ties && cut > 0 {
        let boundary = candidates[cut - 1].1;
        while cut < candidates.len() && candidates[cut].1 == boundary {
            cut += 1;
        }
    }
    candidates.truncate(cut);

    let leaders: Vec<u32> = candidates.iter().map(|c| c.0).collect();
    let leader_set = IdSet::from_unsorted(leaders.clone());
    let weekly = hi
        .weeks
        .iter()
        .map(|(w, members)| {
            (
                *w,
                IdSet::from_unsorted(members.iter().copied().filter(|&u| leader_set.contains(u)).collect()),
            )
        })
        .collect();
    let table = candidates
        .iter()
        .map(|&(user, persistence, total_impact)| LeaderRow {
            user,
            persistence,
            total_impact,
            median_impact: median(weekly_impacts.get(&user).map_or(&[][..], Vec::as_slice)),
        })
        .collect();

    LeaderBoard {
        m: opts.m,
        persistence,
        leaders,
        weekly,
        table,
    }
}

fn median(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    }
}
