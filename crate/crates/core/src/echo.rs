//! Echo chambers of the two leader groups, ideology scores of the remaining
//! high-impact users, augmented echo chambers, and week-to-week flux.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chambers::{chamber_of, local_mask};
use crate::graph::TemporalRetweetNetwork;
use crate::leaders::{HighImpactSets, LeaderBoard};
use crate::sets::{jaccard, IdSet};
use crate::spectral::Group;
use crate::stats;

/// Group of every leading user.
pub type LeaderLabels = BTreeMap<u32, Group>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoOptions {
    /// Use every leading user active in the week, not only those in that
    /// week's high-impact set.
    pub all_leaders: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoChamber {
    pub group: Group,
    pub week: u32,
    /// Leaders of the group that contributed this week.
    pub leaders: Vec<u32>,
    pub members: IdSet,
}

impl EchoChamber {
    /// True when no leader of the group contributed.
    pub fn is_empty(&self) -> bool {
        self.leaders.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekEcho {
    pub week: u32,
    pub alpha: EchoChamber,
    pub beta: EchoChamber,
    /// Users retweeting or retweeted this week.
    pub active_users: usize,
    pub intersection: usize,
    pub alpha_fraction: Option<f64>,
    pub beta_fraction: Option<f64>,
    pub intersection_fraction: Option<f64>,
}

impl WeekEcho {
    pub fn chamber(&self, g: Group) -> &EchoChamber {
        match g {
            Group::Alpha => &self.alpha,
            Group::Beta => &self.beta,
        }
    }
}

fn fraction(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| part as f64 / whole as f64)
}

/// Echo chambers of one week: per group, the union of its contributing
/// leaders with their audiences and chambers.
pub fn build_echo_chambers(
    net: &TemporalRetweetNetwork,
    hi: &HighImpactSets,
    board: &LeaderBoard,
    labels: &LeaderLabels,
    week: u32,
    opts: EchoOptions,
) -> WeekEcho {
    let empty = |group| EchoChamber {
        group,
        week,
        leaders: Vec::new(),
        members: IdSet::new(),
    };
    let Some(g) = net.week(week) else {
        return WeekEcho {
            week,
            alpha: empty(Group::Alpha),
            beta: empty(Group::Beta),
            active_users: 0,
            intersection: 0,
            alpha_fraction: None,
            beta_fraction: None,
            intersection_fraction: None,
        };
    };
    let contributing: Vec<u32> = if opts.all_leaders {
        board.leaders.iter().copied().filter(|&l| g.local(l).is_some()).collect()
    } else {
        board.weekly_set(week).into_vec()
    };
    let exclude = local_mask(g, &hi.set(week));
    let mut scratch = Vec::new();
    let mut parts: BTreeMap<Group, (Vec<u32>, Vec<IdSet>)> = BTreeMap::new();
    for leader in contributing {
        let Some(&group) = labels.get(&leader) else {
            continue;
        };
        let l = g.local(leader).expect("contributing leader is active");
        let aud = g.in_neighbors(l);
        let entry = parts.entry(group).or_default();
        entry.0.push(leader);
        entry.1.push(IdSet::from_sorted(vec![leader]));
        entry.1.push(g.to_global(aud));
        entry.1.push(g.to_global(&chamber_of(g, aud, &exclude, &mut scratch)));
    }
    let mut chamber = |group| match parts.remove(&group) {
        Some((mut leaders, sets)) => {
            leaders.sort_unstable();
            EchoChamber {
                group,
                week,
                leaders,
                members: IdSet::union_all(&sets),
            }
        }
        None => empty(group),
    };
    let (alpha, beta) = (chamber(Group::Alpha), chamber(Group::Beta));
    let intersection = alpha.members.intersection_len(&beta.members);
    let n = g.n_users();
    WeekEcho {
        week,
        alpha_fraction: fraction(alpha.members.len(), n),
        beta_fraction: fraction(beta.members.len(), n),
        intersection_fraction: fraction(intersection, n),
        alpha,
        beta,
        active_users: n,
        intersection,
    }
}

/// Echo chambers for every week of the network.
pub fn echo_chambers(
    net: &TemporalRetweetNetwork,
    hi: &HighImpactSets,
    board: &LeaderBoard,
    labels: &LeaderLabels,
    opts: EchoOptions,
) -> Vec<WeekEcho> {
    net.weeks()
        .par_iter()
        .map(|g| build_echo_chambers(net, hi, board, labels, g.week(), opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Alpha,
    Beta,
    Unclassified,
}

/// Ideology score of one non-leading high-impact user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub user: u32,
    pub week: u32,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// `(n_α − n_β) / (n_α + n_β)`; `None` when the audience misses both.
    pub score: Option<f64>,
    pub class: Classification,
}

/// `(n_α, n_β, s)` for an audience against the two echo chambers.
pub fn ideology_score(audience: &IdSet, alpha: &IdSet, beta: &IdSet) -> (usize, usize, Option<f64>) {
    let (a, b) = (audience.intersection_len(alpha), audience.intersection_len(beta));
    let s = (a + b > 0).then(|| (a as f64 - b as f64) / (a + b) as f64);
    (a, b, s)
}

pub fn classify(score: Option<f64>, eta: f64) -> Classification {
    match score {
        Some(s) if s >= eta => Classification::Alpha,
        Some(s) if -s >= eta => Classification::Beta,
        _ => Classification::Unclassified,
    }
}

/// Scores of every user in the week's high-impact set who is not one of that
/// week's leaders, against the base echo chambers.
pub fn ideology_scores(
    net: &TemporalRetweetNetwork,
    hi: &HighImpactSets,
    board: &LeaderBoard,
    echo: &WeekEcho,
    eta: f64,
) -> Vec<ScoreRecord> {
    assert!(eta > 0.0 && eta <= 1.0, "eta must be in (0, 1]");
    let Some(g) = net.week(echo.week) else {
        return Vec::new();
    };
    let leaders = board.weekly_set(echo.week);
    hi.set(echo.week)
        .difference(&leaders)
        .iter()
        .map(|user| {
            let aud = g.to_global(g.in_neighbors(g.local(user).expect("high-impact user is active")));
            let (n_alpha, n_beta, score) = ideology_score(&aud, &echo.alpha.members, &echo.beta.members);
            ScoreRecord {
                user,
                week: echo.week,
                n_alpha,
                n_beta,
                score,
                class: classify(score, eta),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub alpha: usize,
    pub beta: usize,
    pub unclassified: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.alpha + self.beta + self.unclassified
    }

    pub fn add(&mut self, other: Census) {
        self.alpha += other.alpha;
        self.beta += other.beta;
        self.unclassified += other.unclassified;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedWeek {
    pub week: u32,
    pub alpha: IdSet,
    pub beta: IdSet,
    pub census: Census,
    pub active_users: usize,
}

impl AugmentedWeek {
    pub fn chamber(&self, g: Group) -> &IdSet {
        match g {
            Group::Alpha => &self.alpha,
            Group::Beta => &self.beta,
        }
    }
}

/// Adds every classified user and their audience to their group's chamber.
pub fn augment(net: &TemporalRetweetNetwork, echo: &WeekEcho, scores: &[ScoreRecord]) -> AugmentedWeek {
    let mut census = Census::default();
    let mut extra: [Vec<IdSet>; 2] = [vec![echo.alpha.members.clone()], vec![echo.beta.members.clone()]];
    let g = net.week(echo.week);
    for r in scores {
        let slot = match r.class {
            Classification::Alpha => {
                census.alpha += 1;
                0
            }
            Classification::Beta => {
                census.beta += 1;
                1
            }
            Classification::Unclassified => {
                census.unclassified += 1;
                continue;
            }
        };
        let g = g.expect("scored week exists");
        let l = g.local(r.user).expect("scored user is active");
        extra[slot].push(IdSet::from_sorted(vec![r.user]));
        extra[slot].push(g.to_global(g.in_neighbors(l)));
    }
    AugmentedWeek {
        week: echo.week,
        alpha: IdSet::union_all(&extra[0]),
        beta: IdSet::union_all(&extra[1]),
        census,
        active_users: echo.active_users,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSummary {
    pub lag: u32,
    pub pairs: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoOverlap {
    /// `(t, τ, q)` for every pair of non-empty weeks with `t ≤ τ`.
    pub pairs: Vec<(u32, u32, f64)>,
    pub lags: Vec<LagSummary>,
    /// Weeks left out because the chamber was empty.
    pub excluded_weeks: Vec<u32>,
}

/// Jaccard overlap of a group's chambers across all pairs of weeks,
/// summarised by lag `τ − t`.
pub fn auto_overlap(series: &[(u32, IdSet)]) -> AutoOverlap {
    let (kept, excluded): (Vec<_>, Vec<_>) = series.iter().partition(|(_, s)| !s.is_empty());
    let index: Vec<(usize, usize)> = (0..kept.len()).flat_map(|a| (a..kept.len()).map(move |b| (a, b))).collect();
    let mut pairs: Vec<(u32, u32, f64)> = index
        .par_iter()
        .map(|&(a, b)| {
            let (ta, sa) = kept[a];
            let (tb, sb) = kept[b];
            let (t, tau) = if ta <= tb { (*ta, *tb) } else { (*tb, *ta) };
            (t, tau, jaccard(sa, sb).expect("non-empty chambers"))
        })
        .collect();
    pairs.sort_by_key(|x| (x.0, x.1));
    let mut by_lag: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &(t, tau, q) in &pairs {
        by_lag.entry(tau - t).or_default().push(q);
    }
    let lags = by_lag
        .into_iter()
        .map(|(lag, mut qs)| {
            qs.sort_by(f64::total_cmp);
            LagSummary {
                lag,
                pairs: qs.len(),
                mean: stats::mean(&qs),
                sd: (qs.len() > 1).then(|| stats::sample_sd(&qs)),
                median: stats::quantile_sorted(&qs, 0.5),
                q25: stats::quantile_sorted(&qs, 0.25),
                q75: stats::quantile_sorted(&qs, 0.75),
            }
        })
        .collect();
    AutoOverlap {
        pairs,
        lags,
        excluded_weeks: excluded.iter().map(|(w, _)| *w).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub week: u32,
    pub alpha: usize,
    pub beta: usize,
    pub intersection: usize,
    pub active_users: usize,
    /// `|β| / |α|`; `None` when either chamber is empty.
    pub ratio: Option<f64>,
}

pub fn size_series(weeks: &[AugmentedWeek]) -> Vec<SizeRow> {
    weeks
        .iter()
        .map(|w| {
            let (a, b) = (w.alpha.len(), w.beta.len());
            SizeRow {
                week: w.week,
                alpha: a,
                beta: b,
                intersection: w.alpha.intersection_len(&w.beta),
                active_users: w.active_users,
                ratio: (a > 0 && b > 0).then(|| b as f64 / a as f64),
            }
        })
        .collect()
}
