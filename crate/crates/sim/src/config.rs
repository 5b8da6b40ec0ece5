//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize, Serializer};
use slabfix_core::dynamics::EngineMode;
use slabfix_core::VerticalBc;

use crate::{Error, Result};

/// Upper bound on sites per replica, checked before anything is allocated.
pub const MAX_SITES: u64 = 1 << 28;

/// Flags shared by `run` and `sweep`. Every field is optional so that a
/// config file can supply it.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// Number of levels.
    #[arg(long)]
    pub k: Option<u32>,
    /// Vertical boundary condition: free or periodic.
    #[arg(long)]
    pub bc: Option<String>,
    #[arg(long)]
    pub lx: Option<u32>,
    #[arg(long)]
    pub ly: Option<u32>,
    /// Density of +1 spins in the initial product measure.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Simulation engine: full or thinned.
    #[arg(long)]
    pub engine: Option<String>,
    /// Pattern file to embed at the centre of the lattice.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// States are recorded at times base^j.
    #[arg(long)]
    pub snapshot_base: Option<u32>,
    /// Times at which every replica writes a checkpoint.
    #[arg(long, value_delimiter = ',')]
    pub checkpoint_at: Option<Vec<f64>>,
    /// TOML file with any of the above (kebab-case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub k: Option<u32>,
    pub bc: Option<String>,
    pub lx: Option<u32>,
    pub ly: Option<u32>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub t_max: Option<f64>,
    pub replicas: Option<u64>,
    pub engine: Option<String>,
    pub pattern: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub snapshot_base: Option<u32>,
    pub checkpoint_at: Option<Vec<f64>>,
    pub k_list: Option<Vec<u32>>,
    pub p_list: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }
}

fn ser_bc<S: Serializer>(bc: &VerticalBc, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(bc.as_str())
}

fn ser_engine<S: Serializer>(m: &EngineMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(m.as_str())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub lx: u32,
    pub ly: u32,
    pub k: u32,
    #[serde(serialize_with = "ser_bc")]
    pub bc: VerticalBc,
    pub p: f64,
    pub seed: u64,
    pub t_max: f64,
    #[serde(serialize_with = "ser_engine")]
    pub engine: EngineMode,
    pub replicas: u64,
    pub snapshot_base: u32,
    pub checkpoint_at: Vec<f64>,
    pub pattern: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lx: 64,
            ly: 64,
            k: 3,
            bc: VerticalBc::Periodic,
            p: 0.5,
            seed: 1,
            t_max: 4096.0,
            engine: EngineMode::Thinned,
            replicas: 1,
            snapshot_base: 2,
            checkpoint_at: Vec::new(),
            pattern: None,
            out: PathBuf::from("."),
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

impl RunConfig {
    /// Flags win over the file; anything missing from both gets the default,
    /// except `k`, which is required.
    pub fn resolve(args: &ConfigArgs, file: &FileConfig) -> Result<Self> {
        let d = RunConfig::default();
        let k = args.k.or(file.k).ok_or_else(|| usage("missing --k"))?;
        Self::resolve_with_k(args, file, k, d)
    }

    fn resolve_with_k(args: &ConfigArgs, file: &FileConfig, k: u32, d: RunConfig) -> Result<Self> {
        let bc = match args.bc.as_ref().or(file.bc.as_ref()) {
            Some(s) => s
                .parse()
                .map_err(|_| usage(format!("unknown boundary condition `{s}`")))?,
            None => d.bc,
        };
        let engine = match args.engine.as_ref().or(file.engine.as_ref()) {
            Some(s) => s
                .parse()
                .map_err(|_| usage(format!("unknown engine `{s}`")))?,
            None => d.engine,
        };
        let cfg = RunConfig {
            lx: args.lx.or(file.lx).unwrap_or(d.lx),
            ly: args.ly.or(file.ly).unwrap_or(d.ly),
            k,
            bc,
            p: args.p.or(file.p).unwrap_or(d.p),
            seed: args.seed.or(file.seed).unwrap_or(d.seed),
            t_max: args.t_max.or(file.t_max).unwrap_or(d.t_max),
            engine,
            replicas: args.replicas.or(file.replicas).unwrap_or(d.replicas),
            snapshot_base: args
                .snapshot_base
                .or(file.snapshot_base)
                .unwrap_or(d.snapshot_base),
            checkpoint_at: args
                .checkpoint_at
                .clone()
                .or_else(|| file.checkpoint_at.clone())
                .unwrap_or_default(),
            pattern: args.pattern.clone().or_else(|| file.pattern.clone()),
            out: args
                .out
                .clone()
                .or_else(|| file.out.clone())
                .unwrap_or(d.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(usage("--k must be at least 2"));
        }
        if self.lx < 2 || self.ly < 2 {
            return Err(usage("--lx and --ly must be at least 2"));
        }
        let sites = self.lx as u64 * self.ly as u64 * self.k as u64;
        if sites > MAX_SITES {
            return Err(usage(format!(
                "{sites} sites exceeds the limit of {MAX_SITES}"
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(usage("--p must lie strictly between 0 and 1"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(usage("--t-max must be positive and finite"));
        }
        if self.replicas == 0 {
            return Err(usage("--replicas must be at least 1"));
        }
        if self.snapshot_base < 2 {
            return Err(usage("--snapshot-base must be at least 2"));
        }
        if let Some(t) = self
            .checkpoint_at
            .iter()
            .find(|t| !(**t > 0.0 && **t <= self.t_max))
        {
            return Err(usage(format!("checkpoint time {t} outside (0, t-max]")));
        }
        Ok(())
    }

    /// Recording times: powers of the snapshot base up to `t_max`, and
    /// `t_max` itself.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = 1.0;
        while t <= self.t_max {
            out.push(t);
            t *= self.snapshot_base as f64;
        }
        if out.last() != Some(&self.t_max) {
            out.push(self.t_max);
        }
        out
    }
}

/// Cells of a sweep: every combination of the k-list and the p-list.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub ks: Vec<u32>,
    pub ps: Vec<f64>,
}

impl SweepConfig {
    pub fn resolve(
        args: &ConfigArgs,
        k_list: Option<&[u32]>,
        p_list: Option<&[f64]>,
        file: &FileConfig,
    ) -> Result<Self> {
        let ks: Vec<u32> = match k_list.map(<[u32]>::to_vec).or_else(|| file.k_list.clone()) {
            Some(l) => l,
            None => args
                .k
                .or(file.k)
                .map(|k| vec![k])
                .ok_or_else(|| usage("missing --k-list"))?,
        };
        if ks.is_empty() {
            return Err(usage("empty k-list"));
        }
        let ps: Vec<f64> = match p_list.map(<[f64]>::to_vec).or_else(|| file.p_list.clone()) {
            Some(l) => l,
            None => vec![args.p.or(file.p).unwrap_or(RunConfig::default().p)],
        };
        if ps.is_empty() {
            return Err(usage("empty p-list"));
        }
        let base = RunConfig::resolve_with_k(args, file, ks[0], RunConfig::default())?;
        for (&k, &p) in ks.iter().flat_map(|k| ps.iter().map(move |p| (k, p))) {
            RunConfig {
                k,
                p,
                ..base.clone()
            }
            .validate()?;
        }
        Ok(SweepConfig { base, ks, ps })
    }

    pub fn cells(&self) -> Vec<RunConfig> {
        self.ks
            .iter()
            .flat_map(|&k| {
                self.ps.iter().map(move |&p| RunConfig {
                    k,
                    p,
                    ..self.base.clone()
                })
            })
            .collect()
    }
}
