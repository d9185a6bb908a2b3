//! Staged, cached execution of the full analysis with per-stage manifests.
//!
//! Every stage writes its artifacts to `<output>/<stage>/` followed by a
//! `manifest.json` recording the stage parameters, the hashes of everything
//! it read and the hashes of everything it wrote. A stage is skipped when its
//! manifest still matches; a dependency whose manifest is missing, was
//! written with other parameters, or whose artifacts changed on disk is an
//! error naming the stage to rerun.

mod config;
mod report;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use config::{
    ClusterConfig, EchoConfig, IngestConfig, LeaderConfig, NullConfig, OverlapConfig, PipelineConfig, OUTPUT_ENV,
    SCHEMA_VERSION, THREADS_ENV,
};
pub use report::{format_number, Report};
pub use stages::{
    ChamberSize, ChambersArtifact, ClusterArtifact, EchoArtifact, FlowArtifact, LeadersArtifact, NullArtifact, NullWeek,
    OverlapArtifact, WeekActivity,
};

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Ingest,
    Leaders,
    Chambers,
    Overlap,
    Null,
    Cluster,
    Polarize,
    Echo,
    Augment,
    Flow,
    Report,
}

impl Stage {
    /// Stages in execution order; `synth` only runs for `all` without inputs.
    pub const ALL: [Stage; 12] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Leaders,
        Stage::Chambers,
        Stage::Overlap,
        Stage::Null,
        Stage::Cluster,
        Stage::Polarize,
        Stage::Echo,
        Stage::Augment,
        Stage::Flow,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Leaders => "leaders",
            Stage::Chambers => "chambers",
            Stage::Overlap => "overlap",
            Stage::Null => "null",
            Stage::Cluster => "cluster",
            Stage::Polarize => "polarize",
            Stage::Echo => "echo",
            Stage::Augment => "augment",
            Stage::Flow => "flow",
            Stage::Report => "report",
        }
    }

    pub fn dependencies(self, cfg: &PipelineConfig) -> Vec<Stage> {
        use Stage::*;
        match self {
            Synth => vec![],
            Ingest if cfg.input.is_empty() => vec![Synth],
            Ingest => vec![],
            Leaders => vec![Ingest],
            Chambers | Overlap | Null => vec![Ingest, Leaders],
            Cluster => vec![Overlap],
            Polarize => vec![Overlap, Cluster],
            Echo => vec![Ingest, Leaders, Cluster],
            Augment => vec![Ingest, Echo],
            Flow => vec![Augment],
            Report => vec![Ingest, Leaders, Chambers, Overlap, Null, Cluster, Polarize, Echo, Augment, Flow],
        }
    }

    /// The configuration slice that determines this stage's output.
    fn params(self, cfg: &PipelineConfig) -> serde_json::Value {
        use serde_json::json;
        match self {
            Stage::Synth => json!({ "synth": cfg.synth }),
            Stage::Ingest => json!({ "ingest": cfg.ingest }),
            Stage::Leaders => json!({ "leaders": cfg.leaders }),
            Stage::Chambers | Stage::Null | Stage::Augment | Stage::Flow => json!({}),
            Stage::Overlap | Stage::Report => json!({ "overlap": cfg.overlap }),
            Stage::Cluster => json!({ "cluster": cfg.cluster }),
            Stage::Polarize => json!({ "null": cfg.null }),
            Stage::Echo => json!({ "echo": cfg.echo }),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

/// What to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    All,
    Stage(Stage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub stage: Stage,
    pub params_hash: String,
    pub params: serde_json::Value,
    /// Input file (external path, or `stage/file` for upstream artifacts) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Pipeline {
    cfg: PipelineConfig,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.cfg.output.join(stage.name())
    }

    /// Runs `target` on a pool of `threads` workers.
    pub fn run(&self, target: Target) -> Result<Vec<(Stage, Outcome)>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| match target {
            Target::Stage(stage) => Ok(vec![(stage, self.run_stage(stage)?)]),
            Target::All => Stage::ALL
                .into_iter()
                .filter(|&s| s != Stage::Synth || self.cfg.input.is_empty())
                .map(|s| Ok((s, self.run_stage(s)?)))
                .collect(),
        })
    }

    fn params_hash(&self, stage: Stage) -> (serde_json::Value, String) {
        let params = stage.params(&self.cfg);
        let hash = sha256_bytes(&serde_json::to_vec(&params).expect("params serialize"));
        (params, hash)
    }

    pub fn read_manifest(&self, stage: Stage) -> Result<Option<Manifest>> {
        let path = self.stage_dir(stage).join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let m: Manifest = read_json(&path).map_err(|_| Error::StaleArtifact {
            stage: stage.name().into(),
            reason: format!("unreadable manifest {}", path.display()),
        })?;
        Ok(Some(m))
    }

    /// Checks that `stage` has current artifacts and returns their hashes.
    fn verify(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let stale = |reason: String| Error::StaleArtifact {
            stage: stage.name().into(),
            reason,
        };
        let Some(m) = self.read_manifest(stage)? else {
            return Err(Error::MissingUpstream {
                stage: stage.name().into(),
                artifact: self.stage_dir(stage).join(MANIFEST).display().to_string(),
            });
        };
        if m.schema_version != SCHEMA_VERSION {
            return Err(stale(format!("written with schema version {}", m.schema_version)));
        }
        if m.params_hash != self.params_hash(stage).1 {
            return Err(stale("configuration differs from the one it was built with".into()));
        }
        let dir = self.stage_dir(stage);
        for (file, hash) in &m.outputs {
            let path = dir.join(file);
            if !path.exists() {
                return Err(stale(format!("artifact {} is missing", path.display())));
            }
            if &sha256_file(&path)? != hash {
                return Err(stale(format!("artifact {} was modified", path.display())));
            }
        }
        if stage == Stage::Ingest {
            let external: BTreeMap<String, String> = m.inputs.into_iter().filter(|(k, _)| !k.starts_with("synth/")).collect();
            if external != self.external_inputs()? {
                return Err(stale("input files changed".into()));
            }
        }
        Ok(m.outputs)
    }

    fn external_inputs(&self) -> Result<BTreeMap<String, String>> {
        self.cfg
            .input
            .iter()
            .map(|path| Ok((path.display().to_string(), sha256_file(path)?)))
            .collect()
    }

    fn inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let direct = stage.dependencies(&self.cfg);
        let mut upstream: Vec<Stage> = direct.clone();
        let mut i = 0;
        while i < upstream.len() {
            for d in upstream[i].dependencies(&self.cfg) {
                if !upstream.contains(&d) {
                    upstream.push(d);
                }
            }
            i += 1;
        }
        upstream.sort();
        let mut inputs = BTreeMap::new();
        for dep in upstream {
            let outputs = self.verify(dep)?;
            if direct.contains(&dep) {
                for (file, hash) in outputs {
                    inputs.insert(format!("{}/{file}", dep.name()), hash);
                }
            }
        }
        if stage == Stage::Ingest {
            inputs.extend(self.external_inputs()?);
        }
        Ok(inputs)
    }

    fn run_stage(&self, stage: Stage) -> Result<Outcome> {
        let inputs = self.inputs(stage)?;
        let (params, params_hash) = self.params_hash(stage);
        if let Some(m) = self.read_manifest(stage)? {
            if m.params_hash == params_hash && m.inputs == inputs && self.verify(stage).is_ok() {
                return Ok(Outcome::Cached);
            }
        }
        let dir = self.stage_dir(stage);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest_path = dir.join(MANIFEST);
        if manifest_path.exists() {
            fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        }
        let files = stages::execute(self, stage)?;
        let mut outputs = BTreeMap::new();
        for file in files {
            outputs.insert(file.to_owned(), sha256_file(&dir.join(file))?);
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            stage,
            params_hash,
            params,
            inputs,
            outputs,
        };
        write_json(&manifest_path, &manifest, true)?;
        Ok(Outcome::Ran)
    }

    pub fn artifact(&self, stage: Stage, file: &str) -> PathBuf {
        self.stage_dir(stage).join(file)
    }

    /// Reads a JSON artifact written by `stage`.
    pub fn load<T: DeserializeOwned>(&self, stage: Stage, file: &str) -> Result<T> {
        read_json(&self.artifact(stage, file)).map_err(|e| Error::StaleArtifact {
            stage: stage.name().into(),
            reason: format!("cannot read {file}: {e}"),
        })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    if pretty {
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    } else {
        serde_json::to_writer(&mut w, value)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
