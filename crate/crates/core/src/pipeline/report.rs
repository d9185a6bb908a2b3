use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stages::{ChambersArtifact, ClusterArtifact, EchoArtifact, FlowArtifact, NullArtifact, OverlapArtifact};
use super::{create, Pipeline, Stage, SCHEMA_VERSION};
use crate::chambers::SizeDiagnostics;
use crate::density::PeakSummary;
use crate::echo::{size_series, AugmentedWeek, Census, LagSummary};
use crate::error::{Error, Result};
use crate::polarization::{PolarizationSeries, Undefined};
use crate::spectral::Group;

const SCORE_BINS: usize = 20;

/// Rounds to 10 significant digits and prints the shortest decimal form.
pub fn format_number(x: f64) -> String {
    let r = round10(x);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn round10(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x.is_finite() { 0.0 } else { x };
    }
    format!("{x:.9e}").parse().expect("formatted float parses")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), format_number)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub weeks: usize,
    pub users: usize,
    pub edges: usize,
    pub retweets: u64,
    pub high_impact_per_week: usize,
    pub leaders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRow {
    pub week: u32,
    pub users: usize,
    pub edges: usize,
    pub gini: Option<f64>,
    pub coverage: Option<f64>,
    pub leaders_present: usize,
    pub phi: Option<f64>,
    pub phi_undefined: Option<Undefined>,
    pub phi_null_mean: Option<f64>,
    pub phi_null_sd: Option<f64>,
    pub null_overlap_mean: Option<f64>,
    pub alpha: usize,
    pub beta: usize,
    pub intersection: usize,
    pub ratio: Option<f64>,
    pub census: Census,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderEntry {
    pub user: String,
    pub persistence: u32,
    pub total_impact: u64,
    pub median_impact: f64,
    pub group: Group,
    pub component: f64,
    /// Position when ordered by component, largest first.
    pub spectral_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub observed: usize,
    pub expected_null: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSection {
    pub pairs: usize,
    pub mean: Option<f64>,
    pub peaks: Option<PeakSummary>,
    pub null_ensemble_mean: Option<f64>,
    pub null_peaks: Option<PeakSummary>,
    pub histogram: Vec<Bin>,
    pub chamber_sizes: Option<SizeDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSection {
    pub chosen: usize,
    pub eigenvalues: Vec<f64>,
    pub alpha: usize,
    pub beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSection {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub null_mean: Option<f64>,
    pub null_mean_abs: Option<f64>,
    pub undefined_weeks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSection {
    pub scored: usize,
    pub undefined: usize,
    pub census: Census,
    pub histogram: Vec<ScoreBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub group: Group,
    pub lag: u32,
    pub pairs: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub summary: Summary,
    pub weekly: Vec<WeekRow>,
    pub leaders: Vec<LeaderEntry>,
    pub overlap: OverlapSection,
    pub cluster: ClusterSection,
    pub polarization: PolarizationSection,
    pub scores: ScoreSection,
    pub decay: Vec<DecayRow>,
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    (((x - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

impl Report {
    pub fn build(p: &Pipeline) -> Result<Report> {
        let net = p.network()?;
        let l = p.leaders()?;
        let ch: ChambersArtifact = p.load(Stage::Chambers, "chambers.json")?;
        let ov: OverlapArtifact = p.load(Stage::Overlap, "overlap.json")?;
        let null: NullArtifact = p.load(Stage::Null, "null.json")?;
        let cl: ClusterArtifact = p.load(Stage::Cluster, "cluster.json")?;
        let pol: PolarizationSeries = p.load(Stage::Polarize, "polarization.json")?;
        let echo: EchoArtifact = p.load(Stage::Echo, "echo.json")?;
        let aug: Vec<AugmentedWeek> = p.load(Stage::Augment, "augment.json")?;
        let flow: FlowArtifact = p.load(Stage::Flow, "flow.json")?;
        if cl.leaders != ov.leaders || cl.leaders != l.board.leaders {
            return Err(Error::StaleArtifact {
                stage: Stage::Cluster.name().into(),
                reason: "leader list differs from the leaders stage".into(),
            });
        }

        let by_week = |xs: &[(u32, Option<f64>)]| -> BTreeMap<u32, Option<f64>> { xs.iter().copied().collect() };
        let (gini, cov) = (by_week(&l.gini), by_week(&l.coverage));
        let pol_week: BTreeMap<u32, _> = pol.weeks.iter().map(|w| (w.week, w)).collect();
        let null_week: BTreeMap<u32, Option<f64>> = null.weeks.iter().map(|w| (w.week, w.mean)).collect();
        let sizes: BTreeMap<u32, _> = size_series(&aug).into_iter().map(|s| (s.week, s)).collect();
        let census: BTreeMap<u32, Census> = aug.iter().map(|a| (a.week, a.census)).collect();
        let weekly: Vec<WeekRow> = l
            .activity
            .iter()
            .map(|a| {
                let w = a.week;
                let pw = pol_week.get(&w);
                let s = sizes.get(&w);
                WeekRow {
                    week: w,
                    users: a.users,
                    edges: a.edges,
                    gini: gini.get(&w).copied().flatten(),
                    coverage: cov.get(&w).copied().flatten(),
                    leaders_present: l.board.weekly_set(w).len(),
                    phi: pw.and_then(|x| x.phi),
                    phi_undefined: pw.and_then(|x| x.undefined),
                    phi_null_mean: pw.and_then(|x| x.null_mean),
                    phi_null_sd: pw.and_then(|x| x.null_sd),
                    null_overlap_mean: null_week.get(&w).copied().flatten(),
                    alpha: s.map_or(0, |s| s.alpha),
                    beta: s.map_or(0, |s| s.beta),
                    intersection: s.map_or(0, |s| s.intersection),
                    ratio: s.and_then(|s| s.ratio),
                    census: census.get(&w).copied().unwrap_or_default(),
                }
            })
            .collect();

        let name = |u: u32| net.user_index().name(u).unwrap_or("?").to_owned();
        let components = cl.result.components();
        let mut spectral_rank = vec![0; cl.leaders.len()];
        for (r, &i) in cl.result.rank.iter().enumerate() {
            spectral_rank[i] = r;
        }
        let leaders: Vec<LeaderEntry> = l
            .board
            .table
            .iter()
            .enumerate()
            .map(|(i, row)| LeaderEntry {
                user: name(row.user),
                persistence: row.persistence,
                total_impact: row.total_impact,
                median_impact: row.median_impact,
                group: cl.result.labels[i],
                component: components[i],
                spectral_rank: spectral_rank[i],
            })
            .collect();

        let bins = p.config().overlap.histogram_bins;
        let mut histogram: Vec<Bin> = (0..bins)
            .map(|b| Bin {
                lo: b as f64 / bins as f64,
                hi: (b + 1) as f64 / bins as f64,
                observed: 0,
                expected_null: 0,
            })
            .collect();
        let observed: Vec<f64> = ov.aggregate.pairs().map(|(_, _, v)| v).collect();
        for &v in &observed {
            histogram[bin_index(v, 0.0, 1.0, bins)].observed += 1;
        }
        for (_, _, v) in null.expected.pairs() {
            histogram[bin_index(v, 0.0, 1.0, bins)].expected_null += 1;
        }
        let overlap = OverlapSection {
            pairs: observed.len(),
            mean: (!observed.is_empty()).then(|| crate::stats::mean(&observed)),
            peaks: ov.peaks,
            null_ensemble_mean: null.ensemble_mean,
            null_peaks: null.peaks,
            histogram,
            chamber_sizes: ch.diagnostics,
        };

        let alpha = cl.result.labels.iter().filter(|&&g| g == Group::Alpha).count();
        let cluster = ClusterSection {
            chosen: cl.result.chosen,
            eigenvalues: cl.result.eigenvalues.iter().take(10).copied().collect(),
            alpha,
            beta: cl.result.labels.len() - alpha,
        };

        let polarization = PolarizationSection {
            mean: pol.mean,
            sd: pol.sd,
            null_mean: pol.null_mean,
            null_mean_abs: pol.null_mean_abs,
            undefined_weeks: pol.weeks.iter().filter(|w| w.phi.is_none()).count(),
        };

        let mut score_hist: Vec<ScoreBin> = (0..SCORE_BINS)
            .map(|b| ScoreBin {
                lo: -1.0 + 2.0 * b as f64 / SCORE_BINS as f64,
                hi: -1.0 + 2.0 * (b + 1) as f64 / SCORE_BINS as f64,
                count: 0,
            })
            .collect();
        let mut undefined = 0;
        for r in &echo.scores {
            match r.score {
                Some(s) => score_hist[bin_index(s, -1.0, 1.0, SCORE_BINS)].count += 1,
                None => undefined += 1,
            }
        }
        let mut total = Census::default();
        for a in &aug {
            total.add(a.census);
        }
        let scores = ScoreSection {
            scored: echo.scores.len(),
            undefined,
            census: total,
            histogram: score_hist,
        };

        let decay_rows = |group: Group, lags: &[LagSummary]| -> Vec<DecayRow> {
            lags.iter()
                .map(|s| DecayRow {
                    group,
                    lag: s.lag,
                    pairs: s.pairs,
                    mean: s.mean,
                    median: s.median,
                    q25: s.q25,
                    q75: s.q75,
                })
                .collect()
        };
        let mut decay = decay_rows(Group::Alpha, &flow.alpha.lags);
        decay.extend(decay_rows(Group::Beta, &flow.beta.lags));

        let summary = Summary {
            weeks: l.activity.len(),
            users: net.user_index().len(),
            edges: l.activity.iter().map(|a| a.edges).sum(),
            retweets: l.activity.iter().map(|a| a.retweets).sum(),
            high_impact_per_week: l.high_impact.n,
            leaders: l.board.leaders.len(),
        };
        Ok(Report {
            schema_version: SCHEMA_VERSION,
            summary,
            weekly,
            leaders,
            overlap,
            cluster,
            polarization,
            scores,
            decay,
        })
    }

    /// Pretty JSON with every float rounded to 10 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        round_floats(&mut value);
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        Ok(text)
    }
}

fn round_floats(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round10(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(if x == 0.0 { 0.0 } else { x }).map_or(Value::Null, Value::Number);
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_floats),
        Value::Object(m) => m.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn group_name(g: Group) -> &'static str {
    match g {
        Group::Alpha => "alpha",
        Group::Beta => "beta",
    }
}

fn undefined_name(u: Option<Undefined>) -> &'static str {
    match u {
        None => "",
        Some(Undefined::GroupAbsent(Group::Alpha)) => "alpha_absent",
        Some(Undefined::GroupAbsent(Group::Beta)) => "beta_absent",
        Some(Undefined::ZeroStrength) => "zero_strength",
    }
}

fn tsv(dir: &Path, file: &'static str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<&'static str> {
    let path = dir.join(file);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", header.join("\t")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join("\t")).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(file)
}

pub(super) fn write(p: &Pipeline, dir: &Path) -> Result<Vec<&'static str>> {
    let r = Report::build(p)?;
    let path = dir.join("report.json");
    std::fs::write(&path, r.to_json()?).map_err(|e| Error::io(&path, e))?;
    let n = |x: f64| format_number(x);
    let ov: OverlapArtifact = p.load(Stage::Overlap, "overlap.json")?;
    let mut files = vec!["report.json"];
    files.push(tsv(
        dir,
        "weekly.tsv",
        &[
            "week", "users", "edges", "gini", "coverage", "leaders_present", "phi", "phi_undefined", "phi_null_mean",
            "phi_null_sd", "null_overlap_mean", "alpha", "beta", "intersection", "ratio", "classified_alpha",
            "classified_beta", "unclassified",
        ],
        r.weekly.iter().map(|w| {
            vec![
                w.week.to_string(),
                w.users.to_string(),
                w.edges.to_string(),
                opt(w.gini),
                opt(w.coverage),
                w.leaders_present.to_string(),
                opt(w.phi),
                undefined_name(w.phi_undefined).into(),
                opt(w.phi_null_mean),
                opt(w.phi_null_sd),
                opt(w.null_overlap_mean),
                w.alpha.to_string(),
                w.beta.to_string(),
                w.intersection.to_string(),
                opt(w.ratio),
                w.census.alpha.to_string(),
                w.census.beta.to_string(),
                w.census.unclassified.to_string(),
            ]
        }),
    )?);
    files.push(tsv(
        dir,
        "leaders.tsv",
        &["user", "persistence", "total_impact", "median_impact", "group", "component", "spectral_rank"],
        r.leaders.iter().map(|e| {
            vec![
                e.user.clone(),
                e.persistence.to_string(),
                e.total_impact.to_string(),
                n(e.median_impact),
                group_name(e.group).into(),
                n(e.component),
                e.spectral_rank.to_string(),
            ]
        }),
    )?);
    files.push(tsv(
        dir,
        "overlap_histogram.tsv",
        &["lo", "hi", "observed", "expected_null"],
        r.overlap
            .histogram
            .iter()
            .map(|b| vec![n(b.lo), n(b.hi), b.observed.to_string(), b.expected_null.to_string()]),
    )?);
    let density: Vec<(f64, f64)> = ov
        .density
        .as_ref()
        .map(|d| d.grid.iter().copied().zip(d.values.iter().copied()).collect())
        .unwrap_or_default();
    files.push(tsv(
        dir,
        "overlap_density.tsv",
        &["overlap", "density"],
        density.into_iter().map(|(x, y)| vec![n(x), n(y)]),
    )?);
    files.push(tsv(
        dir,
        "scores.tsv",
        &["lo", "hi", "count"],
        r.scores.histogram.iter().map(|b| vec![n(b.lo), n(b.hi), b.count.to_string()]),
    )?);
    files.push(tsv(
        dir,
        "decay.tsv",
        &["group", "lag", "pairs", "mean", "median", "q25", "q75"],
        r.decay.iter().map(|d| {
            vec![
                group_name(d.group).into(),
                d.lag.to_string(),
                d.pairs.to_string(),
                n(d.mean),
                n(d.median),
                n(d.q25),
                n(d.q75),
            ]
        }),
    )?);
    Ok(files)
}
