use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create, write_json, Pipeline, Stage};
use crate::chambers::{aggregate, overlap_matrix, size_diagnostics, week_chambers, OverlapMatrix, SizeDiagnostics};
use crate::density::{kde, split_peaks, Density, PeakSummary};
use crate::echo::{augment, auto_overlap, echo_chambers, ideology_scores, AugmentedWeek, AutoOverlap, EchoOptions, LeaderLabels, ScoreRecord, WeekEcho};
use crate::error::{Error, Result};
use crate::graph::{impact, ingest_paths, read_snapshot, write_snapshot, IngestReport, TemporalRetweetNetwork};
use crate::leaders::{coverage, high_impact, leading_users, HighImpactSets, LeaderBoard};
use crate::nullmodel::{expected_chamber_jaccards, reshuffle_labels, DegreeSequence};
use crate::polarization::{polarization_dynamics, PolarizationSeries};
use crate::sets::IdSet;
use crate::spectral::{spectral_partition, SpectralResult};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekActivity {
    pub week: u32,
    pub users: usize,
    pub edges: usize,
    pub retweets: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadersArtifact {
    pub activity: Vec<WeekActivity>,
    pub high_impact: HighImpactSets,
    pub board: LeaderBoard,
    pub gini: Vec<(u32, Option<f64>)>,
    pub coverage: Vec<(u32, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamberSize {
    pub week: u32,
    pub leader: u32,
    pub audience: usize,
    pub chamber: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChambersArtifact {
    pub sizes: Vec<ChamberSize>,
    pub diagnostics: Option<SizeDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapArtifact {
    pub leaders: Vec<u32>,
    pub weekly: Vec<(u32, OverlapMatrix)>,
    /// Mean of each entry over the weeks in which it is defined.
    pub aggregate: OverlapMatrix,
    pub density: Option<Density>,
    pub peaks: Option<PeakSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullWeek {
    pub week: u32,
    pub users: usize,
    /// `k_max / N` of the week's in-degree sequence.
    pub sparsity: f64,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullArtifact {
    pub weeks: Vec<NullWeek>,
    /// Expected overlap of each leader pair, averaged over the same weeks as the observed matrix.
    pub expected: OverlapMatrix,
    pub ensemble_mean: Option<f64>,
    pub peaks: Option<PeakSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub leaders: Vec<u32>,
    pub result: SpectralResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoArtifact {
    pub weeks: Vec<WeekEcho>,
    pub scores: Vec<ScoreRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowArtifact {
    pub alpha: AutoOverlap,
    pub beta: AutoOverlap,
}

const NETWORK: &str = "network.rtnet";

impl Pipeline {
    /// The ingested network.
    pub fn network(&self) -> Result<TemporalRetweetNetwork> {
        let path = self.artifact(Stage::Ingest, NETWORK);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        read_snapshot(BufReader::with_capacity(1 << 20, file))
    }

    pub fn leaders(&self) -> Result<LeadersArtifact> {
        self.load(Stage::Leaders, "leaders.json")
    }
}

fn samples(q: &OverlapMatrix) -> Vec<f64> {
    q.pairs().map(|(_, _, v)| v).collect()
}

fn modes(p: &Pipeline, xs: &[f64]) -> (Option<Density>, Option<PeakSummary>) {
    match kde(xs, &p.config().kde_options()) {
        Ok(d) => {
            let peaks = split_peaks(&d, &p.config().peak_options());
            (Some(d), Some(peaks))
        }
        Err(_) => (None, None),
    }
}

fn put<T: Serialize>(dir: &Path, file: &'static str, value: &T) -> Result<&'static str> {
    write_json(&dir.join(file), value, false)?;
    Ok(file)
}

/// Runs one stage and returns the artifact file names it wrote.
pub(super) fn execute(p: &Pipeline, stage: Stage) -> Result<Vec<&'static str>> {
    let cfg = p.config();
    let dir = p.stage_dir(stage);
    match stage {
        Stage::Synth => {
            let planted = synth::generate(&cfg.synth)?;
            synth::write_edges(&planted.network, &dir.join("edges.tsv"))?;
            synth::write_labels(&planted, &dir.join("labels.tsv"))?;
            Ok(vec!["edges.tsv", "labels.tsv"])
        }
        Stage::Ingest => {
            let paths = if cfg.input.is_empty() {
                vec![p.artifact(Stage::Synth, "edges.tsv")]
            } else {
                cfg.input.clone()
            };
            let (net, report): (_, IngestReport) = ingest_paths(&paths, &cfg.ingest_options())?;
            if net.is_empty() {
                return Err(Error::UndefinedInput("the input contains no retweets".into()));
            }
            let path = dir.join(NETWORK);
            write_snapshot(&net, create(&path)?).map_err(|e| Error::io(&path, e))?;
            Ok(vec![NETWORK, put(&dir, "ingest.json", &report)?])
        }
        Stage::Leaders => {
            let net = p.network()?;
            let profile = impact(&net);
            let hi = high_impact(&profile, cfg.leaders.n);
            let board = leading_users(&hi, &profile, cfg.leader_options());
            let activity = net
                .weeks()
                .iter()
                .map(|g| WeekActivity {
                    week: g.week(),
                    users: g.n_users(),
                    edges: g.n_edges(),
                    retweets: g.total_weight(),
                })
                .collect();
            let artifact = LeadersArtifact {
                activity,
                gini: profile.gini_series(),
                coverage: coverage(&hi, &profile),
                high_impact: hi,
                board,
            };
            Ok(vec![put(&dir, "leaders.json", &artifact)?])
        }
        Stage::Chambers => {
            let net = p.network()?;
            let l = p.leaders()?;
            let sizes: Vec<ChamberSize> = net
                .weeks()
                .par_iter()
                .flat_map_iter(|g| {
                    week_chambers(g, &l.high_impact, &l.board).leaders.into_iter().map(move |s| ChamberSize {
                        week: g.week(),
                        leader: s.leader,
                        audience: s.audience.len(),
                        chamber: s.chamber.len(),
                    })
                })
                .collect();
            let pairs: Vec<(usize, usize)> = sizes.iter().map(|s| (s.audience, s.chamber)).collect();
            let artifact = ChambersArtifact {
                diagnostics: size_diagnostics(&pairs).ok(),
                sizes,
            };
            Ok(vec![put(&dir, "chambers.json", &artifact)?])
        }
        Stage::Overlap => {
            let net = p.network()?;
            let l = p.leaders()?;
            let leaders = l.board.leaders.clone();
            let weekly: Vec<(u32, OverlapMatrix)> = net
                .weeks()
                .par_iter()
                .map(|g| (g.week(), overlap_matrix(&week_chambers(g, &l.high_impact, &l.board), &leaders)))
                .collect();
            let mats: Vec<OverlapMatrix> = weekly.iter().map(|(_, q)| q.clone()).collect();
            let agg = if mats.is_empty() { OverlapMatrix::masked(leaders.clone()) } else { aggregate(&mats) };
            let (density, peaks) = modes(p, &samples(&agg));
            let artifact = OverlapArtifact {
                leaders,
                weekly,
                aggregate: agg,
                density,
                peaks,
            };
            Ok(vec![put(&dir, "overlap.json", &artifact)?])
        }
        Stage::Null => {
            let net = p.network()?;
            let l = p.leaders()?;
            let leaders = &l.board.leaders;
            let position: BTreeMap<u32, usize> = leaders.iter().enumerate().map(|(i, &u)| (u, i)).collect();
            let weekly: Vec<(NullWeek, OverlapMatrix)> = net
                .weeks()
                .iter()
                .map(|g| {
                    let deg = DegreeSequence::from_week(g);
                    let present: Vec<u32> = l.board.weekly_set(g.week()).iter().collect();
                    let mut q = OverlapMatrix::masked(leaders.clone());
                    let mut index = Vec::new();
                    for (a, &u) in present.iter().enumerate() {
                        q.set(position[&u], position[&u], Some(1.0));
                        for &v in &present[a + 1..] {
                            index.push((u, v));
                        }
                    }
                    let local: Vec<(usize, usize)> = index
                        .iter()
                        .map(|&(u, v)| (g.local(u).unwrap() as usize, g.local(v).unwrap() as usize))
                        .collect();
                    let barred: Vec<usize> =
                        l.high_impact.set(g.week()).iter().filter_map(|u| g.local(u)).map(|u| u as usize).collect();
                    let values = expected_chamber_jaccards(&deg, &local, &barred);
                    for (&(u, v), x) in index.iter().zip(&values) {
                        q.set(position[&u], position[&v], *x);
                    }
                    let defined: Vec<f64> = values.iter().flatten().copied().collect();
                    let week = NullWeek {
                        week: g.week(),
                        users: deg.n(),
                        sparsity: deg.sparsity(),
                        mean: (!defined.is_empty()).then(|| crate::stats::mean(&defined)),
                    };
                    (week, q)
                })
                .collect();
            let mats: Vec<OverlapMatrix> = weekly.iter().map(|(_, q)| q.clone()).collect();
            let expected = if mats.is_empty() { OverlapMatrix::masked(leaders.clone()) } else { aggregate(&mats) };
            let xs = samples(&expected);
            let (_, peaks) = modes(p, &xs);
            let artifact = NullArtifact {
                weeks: weekly.into_iter().map(|(w, _)| w).collect(),
                ensemble_mean: (!xs.is_empty()).then(|| crate::stats::mean(&xs)),
                expected,
                peaks,
            };
            Ok(vec![put(&dir, "null.json", &artifact)?])
        }
        Stage::Cluster => {
            let ov: OverlapArtifact = p.load(Stage::Overlap, "overlap.json")?;
            let result = spectral_partition(&ov.aggregate, cfg.cluster.imputation, cfg.cluster.vector)?;
            let artifact = ClusterArtifact {
                leaders: ov.leaders,
                result,
            };
            Ok(vec![put(&dir, "cluster.json", &artifact)?])
        }
        Stage::Polarize => {
            let ov: OverlapArtifact = p.load(Stage::Overlap, "overlap.json")?;
            let cl: ClusterArtifact = p.load(Stage::Cluster, "cluster.json")?;
            let labels = &cl.result.labels;
            let null = reshuffle_labels(labels, cfg.null.seed, cfg.null.reps);
            let series: PolarizationSeries = polarization_dynamics(&ov.weekly, labels, &null);
            Ok(vec![put(&dir, "polarization.json", &series)?])
        }
        Stage::Echo => {
            let net = p.network()?;
            let l = p.leaders()?;
            let cl: ClusterArtifact = p.load(Stage::Cluster, "cluster.json")?;
            let labels: LeaderLabels = cl.leaders.iter().copied().zip(cl.result.labels.iter().copied()).collect();
            let opts = EchoOptions {
                all_leaders: cfg.echo.all_leaders,
            };
            let weeks = echo_chambers(&net, &l.high_impact, &l.board, &labels, opts);
            let scores: Vec<ScoreRecord> = weeks
                .par_iter()
                .flat_map_iter(|e| ideology_scores(&net, &l.high_impact, &l.board, e, cfg.echo.eta))
                .collect();
            Ok(vec![put(&dir, "echo.json", &EchoArtifact { weeks, scores })?])
        }
        Stage::Augment => {
            let net = p.network()?;
            let echo: EchoArtifact = p.load(Stage::Echo, "echo.json")?;
            let mut by_week: BTreeMap<u32, Vec<ScoreRecord>> = BTreeMap::new();
            for r in echo.scores {
                by_week.entry(r.week).or_default().push(r);
            }
            let weeks: Vec<AugmentedWeek> = echo
                .weeks
                .par_iter()
                .map(|e| augment(&net, e, by_week.get(&e.week).map_or(&[], Vec::as_slice)))
                .collect();
            Ok(vec![put(&dir, "augment.json", &weeks)?])
        }
        Stage::Flow => {
            let weeks: Vec<AugmentedWeek> = p.load(Stage::Augment, "augment.json")?;
            let series = |f: fn(&AugmentedWeek) -> &IdSet| -> Vec<(u32, IdSet)> {
                weeks.iter().map(|w| (w.week, f(w).clone())).collect()
            };
            let artifact = FlowArtifact {
                alpha: auto_overlap(&series(|w| &w.alpha)),
                beta: auto_overlap(&series(|w| &w.beta)),
            };
            Ok(vec![put(&dir, "flow.json", &artifact)?])
        }
        Stage::Report => super::report::write(p, &dir),
    }
}
