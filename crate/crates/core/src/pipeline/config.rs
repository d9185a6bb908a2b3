use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::density::{KdeOptions, PeakOptions};
use crate::error::{Error, Result};
use crate::graph::{parse_timestamp, ErrorPolicy, IngestOptions, TimeFormat};
use crate::leaders::LeaderOptions;
use crate::spectral::{Imputation, VectorChoice};
use crate::synth::PlantedConfig;

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides [`PipelineConfig::output`].
pub const OUTPUT_ENV: &str = "CHAMBERS_OUTPUT";
/// Overrides [`PipelineConfig::threads`].
pub const THREADS_ENV: &str = "CHAMBERS_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Edge lists; when empty the output of the `synth` stage is used.
    pub input: Vec<PathBuf>,
    pub output: PathBuf,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub threads: usize,
    pub ingest: IngestConfig,
    pub leaders: LeaderConfig,
    pub overlap: OverlapConfig,
    pub null: NullConfig,
    pub cluster: ClusterConfig,
    pub echo: EchoConfig,
    pub synth: PlantedConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            input: Vec::new(),
            output: PathBuf::from("chambers-out"),
            threads: 0,
            ingest: IngestConfig::default(),
            leaders: LeaderConfig::default(),
            overlap: OverlapConfig::default(),
            null: NullConfig::default(),
            cluster: ClusterConfig::default(),
            echo: EchoConfig::default(),
            synth: PlantedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Start of week 0: integer Unix seconds or an ISO-8601 date/time.
    pub epoch: String,
    pub week_days: u32,
    pub time_format: TimeFormat,
    pub on_error: ErrorPolicy,
    pub delimiter: char,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            epoch: "0".into(),
            week_days: 7,
            time_format: TimeFormat::Timestamp,
            on_error: ErrorPolicy::FailFast,
            delimiter: '\t',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaderConfig {
    /// High-impact users per week.
    pub n: usize,
    /// Leading users kept by persistence.
    pub m: usize,
    pub extend_ties: bool,
}

impl Default for LeaderConfig {
    fn default() -> Self {
        LeaderConfig {
            n: 50,
            m: 50,
            extend_ties: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapConfig {
    pub grid_points: usize,
    pub reflect_boundary: bool,
    pub min_peak_height: f64,
    pub min_valley_depth: f64,
    pub histogram_bins: usize,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        let (kde, peaks) = (KdeOptions::default(), PeakOptions::default());
        OverlapConfig {
            grid_points: kde.grid_points,
            reflect_boundary: kde.reflect_lo,
            min_peak_height: peaks.min_height,
            min_valley_depth: peaks.min_valley_depth,
            histogram_bins: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullConfig {
    /// Label-reshuffle realisations for the polarization baseline.
    pub reps: usize,
    pub seed: u64,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig { reps: 100, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub vector: VectorChoice,
    pub imputation: Imputation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoConfig {
    /// Classification threshold on the ideology score.
    pub eta: f64,
    pub all_leaders: bool,
}

impl Default for EchoConfig {
    fn default() -> Self {
        EchoConfig {
            eta: 0.5,
            all_leaders: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// Applies the output-path and thread-count environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(out) = std::env::var(OUTPUT_ENV) {
            self.output = PathBuf::from(out);
        }
        if let Ok(raw) = std::env::var(THREADS_ENV) {
            self.threads = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}=`{raw}` is not a thread count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if parse_timestamp(&self.ingest.epoch).is_none() {
            return bad(format!("ingest.epoch `{}` is not a timestamp", self.ingest.epoch));
        }
        if self.ingest.week_days == 0 {
            return bad("ingest.week_days must be positive".into());
        }
        if !self.ingest.delimiter.is_ascii() {
            return bad("ingest.delimiter must be an ASCII character".into());
        }
        if self.leaders.n == 0 || self.leaders.m == 0 {
            return bad("leaders.n and leaders.m must be positive".into());
        }
        let o = &self.overlap;
        if o.grid_points < 3 || o.histogram_bins == 0 {
            return bad("overlap.grid_points must be at least 3 and overlap.histogram_bins positive".into());
        }
        if !(0.0..1.0).contains(&o.min_peak_height) || !(0.0..1.0).contains(&o.min_valley_depth) {
            return bad("overlap peak knobs must lie in [0, 1)".into());
        }
        if self.null.reps == 0 {
            return bad("null.reps must be positive".into());
        }
        match self.cluster.vector {
            VectorChoice::Auto { min_fraction } if !(0.0..=0.5).contains(&min_fraction) => {
                return bad("cluster.vector.min_fraction must lie in [0, 0.5]".into())
            }
            VectorChoice::Index { index: 0 } => return bad("cluster.vector.index 0 is the constant vector".into()),
            _ => {}
        }
        if !(self.echo.eta > 0.0 && self.echo.eta <= 1.0) {
            return bad("echo.eta must lie in (0, 1]".into());
        }
        self.synth.validate()
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            delimiter: self.ingest.delimiter as u8,
            epoch: parse_timestamp(&self.ingest.epoch).expect("validated epoch"),
            week_days: self.ingest.week_days,
            time_format: self.ingest.time_format,
            on_error: self.ingest.on_error,
        }
    }

    pub fn leader_options(&self) -> LeaderOptions {
        LeaderOptions {
            m: self.leaders.m,
            extend_ties: self.leaders.extend_ties,
        }
    }

    pub fn kde_options(&self) -> KdeOptions {
        KdeOptions {
            grid_points: self.overlap.grid_points,
            reflect_lo: self.overlap.reflect_boundary,
            ..KdeOptions::default()
        }
    }

    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions {
            min_height: self.overlap.min_peak_height,
            min_valley_depth: self.overlap.min_valley_depth,
        }
    }
}
