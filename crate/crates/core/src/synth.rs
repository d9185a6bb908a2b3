//! Planted two-group temporal retweet networks with ground-truth labels.
//!
//! Every group has persistent leaders, each with its own followers ("fans").
//! Each week a fan retweets its leader and a handful of content users drawn
//! from pools: one per leader, one per group, and a neutral pool shared by
//! both groups. Each endorsement crosses to the other group with probability
//! `mixing`. All non-leader slots are replaced by fresh users each week
//! unless they survive (probability `survival`), and a few one-week "hot"
//! users per group receive a burst of retweets from their group's fans.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TemporalRetweetNetwork, UserIndex, WeeklyGraph};
use crate::nullmodel::substream;
use crate::sets::IdSet;

const SECONDS_PER_WEEK: i64 = 7 * 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Alpha,
    Beta,
    Neutral,
}

impl Truth {
    pub fn as_str(self) -> &'static str {
        match self {
            Truth::Alpha => "alpha",
            Truth::Beta => "beta",
            Truth::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedConfig {
    pub weeks: u32,
    /// Leaders per group `[alpha, beta]`.
    pub leaders: [usize; 2],
    /// Alpha leaders whose fans draw from a separate shared pool.
    pub satellites: usize,
    pub fans_per_leader: usize,
    pub leader_pool: usize,
    pub group_pool: usize,
    pub neutral_pool: usize,
    /// Content retweets per fan per week.
    pub retweets_per_fan: usize,
    /// Relative weight of leader, group and neutral pools in content retweets.
    pub pool_shares: [f64; 3],
    /// Share of group-pool draws a satellite fan sends to the regular group pool.
    pub satellite_leak: f64,
    /// One-week burst users per group.
    pub hot_users: [usize; 2],
    /// Chance that a fan retweets a given hot user of its group.
    pub hot_reach: f64,
    /// Power-law exponent of the per-leader retweet intensity.
    pub impact_exponent: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    /// Chance that a leader is active in a given week.
    pub presence: f64,
    /// Cross-group endorsement probability.
    pub mixing: f64,
    /// Weekly survival probability of every non-leader slot.
    pub survival: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            weeks: 39,
            leaders: [37, 13],
            satellites: 4,
            fans_per_leader: 60,
            leader_pool: 135,
            group_pool: 200,
            neutral_pool: 40,
            retweets_per_fan: 8,
            pool_shares: [0.47, 0.52, 0.01],
            satellite_leak: 0.05,
            hot_users: [9, 4],
            hot_reach: 0.15,
            impact_exponent: 2.2,
            intensity_min: 3.0,
            intensity_max: 60.0,
            presence: 0.7,
            mixing: 0.02,
            survival: 0.1,
            seed: 1,
        }
    }
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("planted config: {m}")));
        if self.weeks == 0 || self.leaders.contains(&0) {
            return bad("weeks and leaders per group must be positive");
        }
        if self.fans_per_leader == 0 || self.leader_pool == 0 || self.group_pool == 0 || self.neutral_pool == 0 {
            return bad("fan and pool sizes must be positive");
        }
        if self.satellites >= self.leaders[0] {
            return bad("satellites must leave at least one regular alpha leader");
        }
        for (name, p) in [
            ("mixing", self.mixing),
            ("survival", self.survival),
            ("presence", self.presence),
            ("hot_reach", self.hot_reach),
            ("satellite_leak", self.satellite_leak),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must be in [0, 1]"));
            }
        }
        if self.pool_shares.iter().any(|&s| !(s >= 0.0)) || self.pool_shares.iter().sum::<f64>() <= 0.0 {
            return bad("pool shares must be non-negative with a positive sum");
        }
        if !(self.impact_exponent > 1.0) || !(self.intensity_min >= 1.0) || self.intensity_max < self.intensity_min {
            return bad("need impact_exponent > 1 and 1 <= intensity_min <= intensity_max");
        }
        Ok(())
    }
}

/// Ground truth of a generated network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Group of every user id.
    pub labels: Vec<Truth>,
    /// Leader ids per group.
    pub leaders: [Vec<u32>; 2],
    pub satellites: Vec<u32>,
    /// Per week, the non-leader member ids of each group.
    pub members: Vec<[IdSet; 2]>,
    /// Per week, the hot users of each group.
    pub hot: Vec<[Vec<u32>; 2]>,
}

impl GroundTruth {
    pub fn label(&self, user: u32) -> Truth {
        self.labels[user as usize]
    }
}

pub struct Planted {
    pub network: TemporalRetweetNetwork,
    pub truth: GroundTruth,
}

/// Slot layout of one group: fans and leader pools per leader, then the group pool.
struct Layout {
    fans: usize,
    leader_pool: usize,
    group_pool: usize,
}

impl Layout {
    fn fan(&self, leader: usize, k: usize) -> usize {
        leader * self.fans + k
    }
    fn leader_pool(&self, n_leaders: usize, leader: usize, k: usize) -> usize {
        n_leaders * self.fans + leader * self.leader_pool + k
    }
    fn group_pool(&self, n_leaders: usize, k: usize) -> usize {
        n_leaders * (self.fans + self.leader_pool) + k
    }
    fn satellite_pool(&self, n_leaders: usize, k: usize) -> usize {
        self.group_pool(n_leaders, self.group_pool + k)
    }
    fn slots(&self, n_leaders: usize, satellites: bool) -> usize {
        self.group_pool(n_leaders, self.group_pool * if satellites { 2 } else { 1 })
    }
}

fn intensity<R: Rng>(cfg: &PlantedConfig, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    (cfg.intensity_min * u.powf(-1.0 / (cfg.impact_exponent - 1.0))).min(cfg.intensity_max)
}

pub fn generate(cfg: &PlantedConfig) -> Result<Planted> {
    cfg.validate()?;
    let layout = Layout {
        fans: cfg.fans_per_leader,
        leader_pool: cfg.leader_pool,
        group_pool: cfg.group_pool,
    };
    let weeks = cfg.weeks as usize;
    let mut labels: Vec<Truth> = Vec::new();
    let fresh = |labels: &mut Vec<Truth>, t: Truth| {
        labels.push(t);
        (labels.len() - 1) as u32
    };

    let groups = [Truth::Alpha, Truth::Beta];
    let leaders: [Vec<u32>; 2] = [0, 1].map(|g| (0..cfg.leaders[g]).map(|_| fresh(&mut labels, groups[g])).collect());
    let satellites: Vec<u32> = leaders[0][cfg.leaders[0] - cfg.satellites..].to_vec();

    // Slot ids per week; churn is sequential, so it runs on one stream.
    let mut rng = substream(cfg.seed, 0);
    let slot_counts = [0, 1].map(|g| layout.slots(cfg.leaders[g], g == 0 && cfg.satellites > 0));
    let mut slots: [Vec<u32>; 2] = [0, 1].map(|g| (0..slot_counts[g]).map(|_| fresh(&mut labels, groups[g])).collect());
    let mut neutral: Vec<u32> = (0..cfg.neutral_pool).map(|_| fresh(&mut labels, Truth::Neutral)).collect();
    let mut slot_history: Vec<[Vec<u32>; 2]> = Vec::with_capacity(weeks);
    let mut neutral_history: Vec<Vec<u32>> = Vec::with_capacity(weeks);
    let mut hot: Vec<[Vec<u32>; 2]> = Vec::with_capacity(weeks);
    let mut present: Vec<[Vec<bool>; 2]> = Vec::with_capacity(weeks);
    for t in 0..weeks {
        if t > 0 {
            for g in 0..2 {
                for s in slots[g].iter_mut() {
                    if !rng.random_bool(cfg.survival) {
                        *s = fresh(&mut labels, groups[g]);
                    }
                }
            }
            for s in neutral.iter_mut() {
                if !rng.random_bool(cfg.survival) {
                    *s = fresh(&mut labels, Truth::Neutral);
                }
            }
        }
        slot_history.push(slots.clone());
        neutral_history.push(neutral.clone());
        hot.push([0, 1].map(|g| (0..cfg.hot_users[g]).map(|_| fresh(&mut labels, groups[g])).collect()));
        present.push([0, 1].map(|g| (0..cfg.leaders[g]).map(|_| rng.random_bool(cfg.presence)).collect()));
    }
    let mut irng = substream(cfg.seed, 1);
    let intensities: [Vec<f64>; 2] = [0, 1].map(|g| (0..cfg.leaders[g]).map(|_| intensity(cfg, &mut irng)).collect());

    let graphs: Vec<WeeklyGraph> = (0..weeks)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(cfg.seed, 2 + t as u64);
            let triples = week_edges(
                cfg,
                &layout,
                &leaders,
                &intensities,
                &present[t],
                &slot_history[t],
                &neutral_history[t],
                &hot[t],
                &mut rng,
            );
            WeeklyGraph::from_triples(t as u32, triples).0
        })
        .collect();

    let mut index = UserIndex::new();
    for id in 0..labels.len() {
        index.intern(&format!("u{id}"));
    }
    let members = slot_history
        .iter()
        .map(|s| [0, 1].map(|g| IdSet::from_unsorted(s[g].clone())))
        .collect();
    Ok(Planted {
        network: TemporalRetweetNetwork::new(index, graphs),
        truth: GroundTruth {
            labels,
            leaders,
            satellites,
            members,
            hot,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn week_edges<R: Rng>(
    cfg: &PlantedConfig,
    layout: &Layout,
    leaders: &[Vec<u32>; 2],
    intensities: &[Vec<f64>; 2],
    present: &[Vec<bool>; 2],
    slots: &[Vec<u32>; 2],
    neutral: &[u32],
    hot: &[Vec<u32>; 2],
    rng: &mut R,
) -> Vec<(u32, u32, u32)> {
    let mut triples = Vec::new();
    let shares_total: f64 = cfg.pool_shares.iter().sum();
    let present_ids: [Vec<usize>; 2] = [0, 1].map(|g| (0..leaders[g].len()).filter(|&i| present[g][i]).collect());
    let mut active_fans: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
    for g in 0..2 {
        let other = 1 - g;
        let n_leaders = leaders[g].len();
        for &i in &present_ids[g] {
            let satellite = g == 0 && i >= n_leaders - cfg.satellites;
            let counts = Poisson::new(intensities[g][i] - 1.0).ok();
            for k in 0..layout.fans {
                let fan = slots[g][layout.fan(i, k)];
                active_fans[g].push(fan);
                let count = 1 + counts.as_ref().map_or(0, |p| p.sample(rng) as u32);
                let target = if rng.random_bool(cfg.mixing) && !present_ids[other].is_empty() {
                    let j = present_ids[other][rng.random_range(0..present_ids[other].len())];
                    leaders[other][j]
                } else {
                    leaders[g][i]
                };
                triples.push((fan, target, count));
                for _ in 0..cfg.retweets_per_fan {
                    // A crossing retweet draws content as a fan of a random
                    // leader of the other group would.
                    let (src, leader, satellite) = if rng.random_bool(cfg.mixing) {
                        let j = rng.random_range(0..leaders[other].len());
                        (other, j, other == 0 && j >= leaders[other].len() - cfg.satellites)
                    } else {
                        (g, i, satellite)
                    };
                    let n_src = leaders[src].len();
                    let x = rng.random::<f64>() * shares_total;
                    let author = if x < cfg.pool_shares[0] {
                        slots[src][layout.leader_pool(n_src, leader, rng.random_range(0..layout.leader_pool))]
                    } else if x < cfg.pool_shares[0] + cfg.pool_shares[1] {
                        let k = rng.random_range(0..layout.group_pool);
                        if satellite && !rng.random_bool(cfg.satellite_leak) {
                            slots[src][layout.satellite_pool(n_src, k)]
                        } else {
                            slots[src][layout.group_pool(n_src, k)]
                        }
                    } else {
                        neutral[rng.random_range(0..neutral.len())]
                    };
                    triples.push((fan, author, 1));
                }
            }
        }
    }
    for (g, group) in hot.iter().enumerate() {
        for &h in group {
            for (source, p) in [(g, cfg.hot_reach), (1 - g, cfg.hot_reach * cfg.mixing)] {
                let fans = &active_fans[source];
                if fans.is_empty() || p <= 0.0 {
                    continue;
                }
                let n = Binomial::new(fans.len() as u64, p).expect("valid binomial").sample(rng) as usize;
                for k in sample(rng, fans.len(), n) {
                    triples.push((fans[k], h, 1));
                }
            }
        }
    }
    triples
}

/// Writes `timestamp  retweeter  author  count` rows, one per weekly edge,
/// with timestamps at the start of each week plus one hour.
pub fn write_edges(net: &TemporalRetweetNetwork, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "timestamp\tretweeter\tauthor\tcount").map_err(io)?;
    let names = net.user_index();
    for g in net.weeks() {
        let ts = i64::from(g.week()) * SECONDS_PER_WEEK + 3600;
        for e in g.edges() {
            writeln!(
                w,
                "{ts}\t{}\t{}\t{}",
                names.name(e.retweeter).expect("known user"),
                names.name(e.author).expect("known user"),
                e.count
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Writes `user  group` rows for every user that appears in the network.
pub fn write_labels(planted: &Planted, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "user\tgroup").map_err(io)?;
    let mut seen = vec![false; planted.truth.labels.len()];
    for g in planted.network.weeks() {
        for &u in g.nodes() {
            seen[u as usize] = true;
        }
    }
    let names = planted.network.user_index();
    for (u, label) in planted.truth.labels.iter().enumerate() {
        if seen[u] {
            writeln!(w, "{}\t{}", names.name(u as u32).expect("known user"), label.as_str()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a `user  group` label file into a name → group map.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Truth>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let mut parts = line.split('\t');
        let (Some(user), Some(group)) = (parts.next(), parts.next()) else {
            return Err(Error::MalformedRecord {
                line: n + 1,
                reason: "expected user and group".into(),
            });
        };
        let truth = match group {
            "alpha" => Truth::Alpha,
            "beta" => Truth::Beta,
            "neutral" => Truth::Neutral,
            other => {
                return Err(Error::MalformedRecord {
                    line: n + 1,
                    reason: format!("unknown group {other:?}"),
                })
            }
        };
        out.insert(user.to_owned(), truth);
    }
    Ok(out)
}
