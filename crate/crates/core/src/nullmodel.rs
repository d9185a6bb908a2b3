//! Soft configuration-model baselines for chamber and audience overlaps, and
//! the label-reshuffle baseline used for polarization.
//!
//! In the soft model every directed edge `r → t` (`r ≠ t`) exists
//! independently with probability `k_t / N`, so in-degrees match the target
//! sequence in expectation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chambers::{chamber_of, local_mask};
use crate::error::{Error, Result};
use crate::graph::WeeklyGraph;
use crate::sets::{jaccard, IdSet};
use crate::stats;

/// Deterministic RNG for substream `stream` of `seed`.
pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSequence {
    pub k: Vec<f64>,
    pub mean: f64,
    pub mean_sq: f64,
    pub k_max: f64,
}

impl DegreeSequence {
    pub fn new(k: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::InvalidArgument("empty degree sequence".into()));
        }
        if k.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidArgument("degrees must be finite and non-negative".into()));
        }
        let n = k.len() as f64;
        let mean = k.iter().sum::<f64>() / n;
        let mean_sq = k.iter().map(|x| x * x).sum::<f64>() / n;
        let k_max = k.iter().copied().fold(0.0, f64::max);
        Ok(DegreeSequence { k, mean, mean_sq, k_max })
    }

    /// Distinct-retweeter in-degree of every active user in a week.
    pub fn from_week(g: &WeeklyGraph) -> Self {
        let k = (0..g.n_users() as u32).map(|l| g.in_neighbors(l).len() as f64).collect();
        DegreeSequence::new(k).expect("weekly degrees are valid")
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    /// `k_max / N`; the closed-form approximation assumes this is small.
    pub fn sparsity(&self) -> f64 {
        self.k_max / self.n() as f64
    }
}

/// Probability that a user of degree `k_ell` is in the chamber of a user of
/// degree `k_i`: `1 − (1 − k_i k_ℓ / N²)^N`.
pub fn prob_in_chamber(k_i: f64, k_ell: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let x = k_i * k_ell / (nf * nf);
    if n == 0 || !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "k_i k_l / N^2 = {x} is outside [0, 1]"
        )));
    }
    Ok(-(nf * (-x).ln_1p()).exp_m1())
}

/// Expected audience overlap `k_i k_j / (N (k_i + k_j))`; `None` if both are 0.
pub fn expected_audience_overlap(k_i: f64, k_j: f64, n: usize) -> Option<f64> {
    let s = k_i + k_j;
    (s > 0.0).then(|| k_i * k_j / (n as f64 * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOverlap {
    /// `⟨P_i P_j⟩ / ⟨P_i + P_j⟩` averaged over the degree sequence.
    pub ratio: Option<f64>,
    /// `k_i k_j / (N (k_i + k_j)) · ⟨k²⟩ / ⟨k⟩`.
    pub approx: Option<f64>,
}

/// Expected chamber overlap of users with degrees `k_i`, `k_j` under the soft
/// configuration model of `deg`.
pub fn expected_chamber_overlap(k_i: f64, k_j: f64, deg: &DegreeSequence) -> Result<ExpectedOverlap> {
    let n = deg.n();
    let (mut num, mut den) = (0.0, 0.0);
    for &k in &deg.k {
        let pi = prob_in_chamber(k_i, k, n)?;
        let pj = prob_in_chamber(k_j, k, n)?;
        num += pi * pj;
        den += pi + pj;
    }
    let ratio = (den > 0.0).then(|| num / den);
    let approx = expected_audience_overlap(k_i, k_j, n)
        .filter(|_| deg.mean > 0.0)
        .map(|a| a * deg.mean_sq / deg.mean);
    Ok(ExpectedOverlap { ratio, approx })
}

/// Expected Jaccard overlap of the chambers of sequence entries `i` and `j`
/// under the sampler of [`sample_configuration_graph`], with `i` and `j`
/// excluded from every chamber (as when both are high-impact users).
///
/// Unlike [`expected_chamber_overlap`] this keeps the correlation between
/// `ℓ ∈ C_i` and `ℓ ∈ C_j` induced by shared retweeters, divides by the
/// union rather than the sum of chamber sizes, and averages the ratio rather
/// than taking a ratio of averages. Given the audience sizes `a = |A_i|`,
/// `b = |A_j|` and `c = |A_i ∩ A_j|`, chamber membership is independent
/// across `ℓ`, so the conditional mean Jaccard follows from a second-order
/// expansion in the per-user indicator sums; the average over `(a, b, c)` is
/// a second-order expansion around their means using the exact multinomial
/// covariance of the audience counts.
pub fn expected_chamber_jaccard(deg: &DegreeSequence, i: usize, j: usize) -> Option<f64> {
    expected_chamber_jaccards(deg, &[(i, j)], &[])[0]
}

/// [`expected_chamber_jaccard`] for many pairs of the same sequence, with the
/// entries in `excluded` also barred from every chamber (they still retweet).
pub fn expected_chamber_jaccards(deg: &DegreeSequence, pairs: &[(usize, usize)], excluded: &[usize]) -> Vec<Option<f64>> {
    let nf = deg.n() as f64;
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &k in &deg.k {
        *counts.entry(k.to_bits()).or_default() += 1.0;
    }
    let mut barred = excluded.to_vec();
    barred.sort_unstable();
    barred.dedup();
    for &e in &barred {
        *counts.get_mut(&deg.k[e].to_bits()).expect("excluded entry is in the sequence") -= 1.0;
    }
    let distinct: Vec<(f64, f64)> = counts.into_iter().map(|(b, w)| (f64::from_bits(b), w)).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            assert!(i != j && i < deg.n() && j < deg.n());
            let own = |k: f64| {
                [i, j]
                    .iter()
                    .filter(|&&v| deg.k[v] == k && barred.binary_search(&v).is_err())
                    .count() as f64
            };
            // log(1 - k_l / N) with multiplicity, over every candidate chamber member
            let logs: Vec<(f64, f64)> = distinct
                .iter()
                .map(|&(k, w)| ((-(k / nf)).ln_1p(), w - own(k)))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            pair_jaccard(&logs, nf, deg.k[i] / nf, deg.k[j] / nf)
        })
        .collect()
}

fn pair_jaccard(logs: &[(f64, f64)], nf: f64, pi: f64, pj: f64) -> Option<f64> {
    let m = nf - 2.0;
    let mu = [(nf - 1.0) * pi, (nf - 1.0) * pj, m * pi * pj];
    let cov = [
        [(nf - 1.0) * pi * (1.0 - pi), 0.0, m * pi * pj * (1.0 - pi)],
        [0.0, (nf - 1.0) * pj * (1.0 - pj), m * pi * pj * (1.0 - pj)],
        [m * pi * pj * (1.0 - pi), m * pi * pj * (1.0 - pj), m * pi * pj * (1.0 - pi * pj)],
    ];
    let g = |x: [f64; 3]| conditional_jaccard(logs, nf, x);
    let centre = g(mu)?;
    let h = 0.5;
    let mut correction = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            if cov[p][q] == 0.0 {
                continue;
            }
            let at = |sp: f64, sq: f64| {
                let mut x = mu;
                x[p] += sp * h;
                x[q] += sq * h;
                g(x)
            };
            let hess = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * h * h);
            correction += 0.5 * hess * cov[p][q];
        }
    }
    Some(centre + correction)
}

/// Mean Jaccard of the two chambers given audience sizes `(a, b, c)`.
fn conditional_jaccard(logs: &[(f64, f64)], nf: f64, x: [f64; 3]) -> Option<f64> {
    // Audiences are drawn from N - 1 candidates, one of which may be ℓ itself.
    let s = (nf - 2.0) / (nf - 1.0);
    let (a, b, c) = (x[0] * s, x[1] * s, x[2] * s);
    let u = a + b - c;
    let (mut ex, mut ey, mut vy, mut cxy) = (0.0, 0.0, 0.0, 0.0);
    for &(lq, w) in logs {
        let (pa, pb, pu) = (-(a * lq).exp_m1(), -(b * lq).exp_m1(), -(u * lq).exp_m1());
        let px = pa + pb - pu;
        ex += w * px;
        ey += w * pu;
        vy += w * pu * (1.0 - pu);
        cxy += w * px * (1.0 - pu);
    }
    (ey > 0.0).then(|| ex / ey - cxy / (ey * ey) + ex * vy / (ey * ey * ey))
}

/// One random graph from the soft configuration model; node `v` of the
/// sequence becomes global id `v`.
pub fn sample_configuration_graph(deg: &DegreeSequence, seed: u64) -> Result<WeeklyGraph> {
    sample_with(deg, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_with<R: Rng>(deg: &DegreeSequence, rng: &mut R) -> Result<WeeklyGraph> {
    let n = deg.n();
    if deg.k_max > n as f64 {
        return Err(Error::InvalidArgument(format!(
            "degree {} exceeds N = {n}",
            deg.k_max
        )));
    }
    let mut triples = Vec::new();
    for (t, &k) in deg.k.iter().enumerate() {
        let p = k / n as f64;
        if p <= 0.0 {
            continue;
        }
        // Candidates are every r != t; walk them with geometric skips.
        let candidates = n - 1;
        let mut pos = 0usize;
        let log_q = (-p).ln_1p();
        loop {
            if p < 1.0 {
                let u: f64 = 1.0 - rng.random::<f64>();
                let skip = (u.ln() / log_q).floor();
                if !skip.is_finite() || skip >= (candidates - pos) as f64 {
                    break;
                }
                pos += skip as usize;
            }
            if pos >= candidates {
                break;
            }
            let r = if pos < t { pos } else { pos + 1 };
            triples.push((r as u32, t as u32, 1));
            pos += 1;
        }
    }
    Ok(WeeklyGraph::from_triples(0, triples).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub samples: usize,
    pub mean: f64,
    pub sd: f64,
    pub std_error: f64,
}

impl EnsembleSummary {
    pub fn from_values(xs: &[f64]) -> Self {
        let sd = stats::sample_sd(xs);
        EnsembleSummary {
            samples: xs.len(),
            mean: stats::mean(xs),
            sd,
            std_error: sd / (xs.len() as f64).sqrt(),
        }
    }
}

/// Monte-Carlo chamber overlap of sequence entries `i` and `j`, measured with
/// the regular chamber construction; `i`, `j` and `excluded` are treated as
/// high-impact users.
pub fn monte_carlo_chamber_overlap(
    deg: &DegreeSequence,
    i: usize,
    j: usize,
    excluded: &[usize],
    samples: usize,
    seed: u64,
) -> Result<EnsembleSummary> {
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let g = sample_with(deg, &mut substream(seed, rep))?;
            let barred = IdSet::from_unsorted(excluded.iter().chain([&i, &j]).map(|&v| v as u32).collect());
            let mask = local_mask(&g, &barred);
            let mut scratch = Vec::new();
            let mut chamber = |v: usize| match g.local(v as u32) {
                Some(l) => g.to_global(&chamber_of(&g, g.in_neighbors(l), &mask, &mut scratch)),
                None => IdSet::new(),
            };
            let (ci, cj) = (chamber(i), chamber(j));
            Ok(jaccard(&ci, &cj).unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleSummary::from_values(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullPair {
    pub k_i: f64,
    pub k_j: f64,
    pub exact: Option<f64>,
    pub approx: Option<f64>,
}

/// Expected chamber overlap for every unordered pair of the given degrees.
pub fn null_overlap_distribution(deg: &DegreeSequence, leader_degrees: &[f64]) -> Result<Vec<NullPair>> {
    let pairs: Vec<(f64, f64)> = leader_degrees
        .iter()
        .enumerate()
        .flat_map(|(a, &ki)| leader_degrees[a + 1..].iter().map(move |&kj| (ki, kj)))
        .collect();
    pairs
        .par_iter()
        .map(|&(k_i, k_j)| {
            let e = expected_chamber_overlap(k_i, k_j, deg)?;
            Ok(NullPair {
                k_i,
                k_j,
                exact: e.ratio,
                approx: e.approx,
            })
        })
        .collect()
}

/// `reps` uniformly random permutations of `labels`, each from its own
/// substream of `seed`.
pub fn reshuffle_labels<T: Clone + Send + Sync>(labels: &[T], seed: u64, reps: usize) -> Vec<Vec<T>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut v = labels.to_vec();
            v.shuffle(&mut substream(seed, rep));
            v
        })
        .collect()
}
