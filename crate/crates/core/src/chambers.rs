//! Audiences, chambers, and chamber-overlap matrices.
//!
//! The audience of a leader in a week is the set of users who retweeted them.
//! The chamber is every user retweeted by that audience, minus the week's
//! high-impact users. Chamber overlap is the Jaccard similarity of two
//! chambers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TemporalRetweetNetwork, WeeklyGraph};
use crate::leaders::{HighImpactSets, LeaderBoard};
use crate::sets::{jaccard, Bitmap, IdSet, PackedSet};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceSet {
    pub leader: u32,
    pub week: u32,
    pub members: IdSet,
    /// The leader did not appear in this week at all.
    pub absent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChamberSet {
    pub leader: u32,
    pub week: u32,
    pub members: IdSet,
}

pub fn audience(net: &TemporalRetweetNetwork, leader: u32, week: u32) -> AudienceSet {
    let found = net
        .week(week)
        .and_then(|g| g.local(leader).map(|l| g.to_global(g.in_neighbors(l))));
    AudienceSet {
        leader,
        week,
        absent: found.is_none(),
        members: found.unwrap_or_default(),
    }
}

pub fn chamber(net: &TemporalRetweetNetwork, leader: u32, week: u32, hi: &HighImpactSets) -> ChamberSet {
    let members = match net.week(week) {
        Some(g) => {
            let exclude = local_mask(g, &hi.set(week));
            match g.local(leader) {
                Some(l) => g.to_global(&chamber_of(g, g.in_neighbors(l), &exclude, &mut Vec::new())),
                None => IdSet::new(),
            }
        }
        None => IdSet::new(),
    };
    ChamberSet { leader, week, members }
}

/// Bitmap over a week's local ids for the given global ids (absent ids ignored).
pub fn local_mask(g: &WeeklyGraph, globals: &IdSet) -> Bitmap {
    let mut mask = Bitmap::with_universe(g.n_users());
    for u in globals.iter() {
        if let Some(l) = g.local(u) {
            mask.insert(l);
        }
    }
    mask
}

/// Local-id chamber of an arbitrary audience: union of the audience's
/// out-neighbourhoods, minus `exclude`. `scratch` is reusable marker storage.
pub fn chamber_of(g: &WeeklyGraph, audience: &[u32], exclude: &Bitmap, scratch: &mut Vec<bool>) -> Vec<u32> {
    scratch.clear();
    scratch.resize(g.n_users(), false);
    let mut out = Vec::new();
    for &k in audience {
        for &j in g.out_neighbors(k) {
            if !scratch[j as usize] && !exclude.contains(j) {
                scratch[j as usize] = true;
                out.push(j);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Audience and chamber of one leader in one week, in global ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderSets {
    pub leader: u32,
    pub audience: IdSet,
    pub chamber: IdSet,
}

/// Audiences and chambers of every leader present in one week.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekChambers {
    pub week: u32,
    pub leaders: Vec<LeaderSets>,
}

impl WeekChambers {
    pub fn get(&self, leader: u32) -> Option<&LeaderSets> {
        self.leaders
            .binary_search_by_key(&leader, |s| s.leader)
            .ok()
            .map(|p| &self.leaders[p])
    }
}

/// Builds audiences and chambers for every weekly-present leader.
pub fn build_chambers(net: &TemporalRetweetNetwork, hi: &HighImpactSets, board: &LeaderBoard) -> Vec<WeekChambers> {
    net.weeks().par_iter().map(|g| week_chambers(g, hi, board)).collect()
}

/// Audiences and chambers of the leaders present in one week.
pub fn week_chambers(g: &WeeklyGraph, hi: &HighImpactSets, board: &LeaderBoard) -> WeekChambers {
    let exclude = local_mask(g, &hi.set(g.week()));
    let present = board.weekly_set(g.week());
    let leaders = present
        .as_slice()
        .par_iter()
        .map_init(Vec::new, |scratch, &leader| {
            let l = g.local(leader).expect("high-impact leader is active");
            let aud = g.in_neighbors(l);
            LeaderSets {
                leader,
                audience: g.to_global(aud),
                chamber: g.to_global(&chamber_of(g, aud, &exclude, scratch)),
            }
        })
        .collect();
    WeekChambers {
        week: g.week(),
        leaders,
    }
}

/// Symmetric leader-by-leader overlap matrix with masked entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub leaders: Vec<u32>,
    /// Row-major, `None` where undefined.
    pub values: Vec<Option<f64>>,
}

impl OverlapMatrix {
    pub fn masked(leaders: Vec<u32>) -> Self {
        let n = leaders.len();
        OverlapMatrix {
            leaders,
            values: vec![None; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.leaders.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Option<f64>) {
        let n = self.dim();
        self.values[i * n + j] = v;
        self.values[j * n + i] = v;
    }

    /// Defined off-diagonal values `(i, j, q)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.dim();
        (0..n).flat_map(move |i| ((i + 1)..n).filter_map(move |j| self.get(i, j).map(|q| (i, j, q))))
    }

    /// Dense matrix with masked entries replaced by `fill`.
    pub fn dense(&self, fill: f64) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(fill)).collect()
    }
}

/// Weekly chamber-overlap matrix over the full leader list; leaders absent
/// that week (or pairs of empty chambers) are masked.
pub fn overlap_matrix(week: &WeekChambers, leaders: &[u32]) -> OverlapMatrix {
    let universe = week.leaders.iter().map(|s| max_id(&s.chamber)).max().unwrap_or(0);
    let packed: Vec<Option<PackedSet>> = leaders
        .iter()
        .map(|&l| week.get(l).map(|s| PackedSet::pack(&s.chamber, universe)))
        .collect();
    let n = leaders.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| match (&packed[i], &packed[j]) {
            (Some(a), Some(b)) => a.jaccard(b),
            _ => None,
        })
        .collect();
    let mut m = OverlapMatrix::masked(leaders.to_vec());
    for (&(i, j), v) in pairs.iter().zip(values) {
        m.set(i, j, v);
    }
    m
}

fn max_id(s: &IdSet) -> usize {
    s.as_slice().last().map_or(0, |&m| m as usize + 1)
}

/// Mean of each entry over the weeks in which it is defined.
pub fn aggregate(weekly: &[OverlapMatrix]) -> OverlapMatrix {
    let leaders = weekly.first().map(|m| m.leaders.clone()).unwrap_or_default();
    assert!(weekly.iter().all(|m| m.leaders == leaders), "leader lists differ between weeks");
    let mut sums = vec![(0.0f64, 0usize); leaders.len() * leaders.len()];
    for m in weekly {
        for (acc, v) in sums.iter_mut().zip(&m.values) {
            if let Some(q) = v {
                acc.0 += q;
                acc.1 += 1;
            }
        }
    }
    OverlapMatrix {
        leaders,
        values: sums.into_iter().map(|(s, c)| (c > 0).then(|| s / c as f64)).collect(),
    }
}

/// Overlap of chambers rebuilt after removing the common audience of `i`
/// and `j`. `None` when either reduced audience is empty or both rebuilt
/// chambers are empty.
pub fn subchamber_overlap(
    net: &TemporalRetweetNetwork,
    i: u32,
    j: u32,
    week: u32,
    hi: &HighImpactSets,
) -> Option<f64> {
    let g = net.week(week)?;
    let exclude = local_mask(g, &hi.set(week));
    subchamber_overlap_in(g, g.local(i)?, g.local(j)?, &exclude, &mut Vec::new())
}

pub(crate) fn subchamber_overlap_in(
    g: &WeeklyGraph,
    li: u32,
    lj: u32,
    exclude: &Bitmap,
    scratch: &mut Vec<bool>,
) -> Option<f64> {
    let ai = IdSet::from_sorted(g.in_neighbors(li).to_vec());
    let aj = IdSet::from_sorted(g.in_neighbors(lj).to_vec());
    let (only_i, only_j) = (ai.difference(&aj), aj.difference(&ai));
    if only_i.is_empty() || only_j.is_empty() {
        return None;
    }
    let ci = IdSet::from_sorted(chamber_of(g, only_i.as_slice(), exclude, scratch));
    let cj = IdSet::from_sorted(chamber_of(g, only_j.as_slice(), exclude, scratch));
    jaccard(&ci, &cj)
}

/// Subchamber overlaps for every pair of leaders present in a week.
pub fn subchamber_overlaps(
    net: &TemporalRetweetNetwork,
    week: &WeekChambers,
    hi: &HighImpactSets,
) -> Vec<(u32, u32, Option<f64>)> {
    let Some(g) = net.week(week.week) else {
        return Vec::new();
    };
    let exclude = local_mask(g, &hi.set(week.week));
    let ids: Vec<u32> = week.leaders.iter().map(|s| s.leader).collect();
    let pairs: Vec<(u32, u32)> = ids
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| ids[a + 1..].iter().map(move |&j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map_init(Vec::new, |scratch, &(i, j)| {
            let q = subchamber_overlap_in(g, g.local(i).unwrap(), g.local(j).unwrap(), &exclude, scratch);
            (i, j, q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub mean: f64,
    pub sd: f64,
    /// Empirical CDF as `(size, fraction of samples ≤ size)`.
    pub cdf: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDiagnostics {
    pub samples: usize,
    pub audience: SizeSummary,
    pub chamber: SizeSummary,
    /// Pearson correlation of paired sizes; `None` when either side is constant.
    pub rho: Option<f64>,
}

/// Distribution summaries of paired `(audience size, chamber size)` samples.
pub fn size_diagnostics(pairs: &[(usize, usize)]) -> Result<SizeDiagnostics> {
    if pairs.len() < 2 {
        return Err(Error::UndefinedInput("size diagnostics need at least two samples".into()));
    }
    let aud: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let cha: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    let summary = |sizes: Vec<usize>, xs: &[f64]| SizeSummary {
        mean: stats::mean(xs),
        sd: stats::sample_sd(xs),
        cdf: stats::ecdf(sizes),
    };
    Ok(SizeDiagnostics {
        samples: pairs.len(),
        audience: summary(pairs.iter().map(|p| p.0).collect(), &aud),
        chamber: summary(pairs.iter().map(|p| p.1).collect(), &cha),
        rho: stats::pearson(&aud, &cha),
    })
}
