use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use slabfix::config::{ConfigArgs, FileConfig, RunConfig, SweepConfig};
use slabfix::experiment::{self, ReplicaSummary};
use slabfix::oracle_report::{self, OracleSpec};
use slabfix::provenance::{Provenance, WithProvenance};
use slabfix::{checkpoint, files, verify, Error, Result};
use slabfix_core::dynamics::{Engine, EngineMode};
use slabfix_core::VerticalBc;

#[derive(Parser)]
#[command(
    name = "slabfix",
    version,
    about = "Zero-temperature coarsening on slab lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicas of one configuration and write the fixation census.
    Run(ConfigArgs),
    /// Run every (k, p) cell of a sweep and write aggregates.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<f64>>,
    },
    /// Check a construction: absorbing-block, figure7-fixed or figure7-cycle.
    Verify {
        name: String,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        bc: Option<String>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare exact absorption probabilities with Monte Carlo frequencies.
    Oracle {
        #[arg(long, default_value_t = 2)]
        lx: u32,
        #[arg(long, default_value_t = 2)]
        ly: u32,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 100_000)]
        replicas: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "thinned")]
        engine: String,
        /// Largest acceptable total-variation distance.
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a checkpointed replica to a later time.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        t_max: f64,
        /// Directory for the checkpoint written at the end.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the k = 4 cycle pattern (figure7.pat) and its site-set sidecar.
    Figure7 {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Prints a line, ignoring a closed pipe on the other end.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn load_file(path: Option<&Path>) -> Result<FileConfig> {
    path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
}

fn parse_bc(s: &str) -> Result<VerticalBc> {
    s.parse()
        .map_err(|_| Error::Usage(format!("unknown boundary condition `{s}`")))
}

fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&WithProvenance {
        provenance: prov,
        body,
    })?;
    files::write_text(path, &(text + "\n"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

#[derive(Serialize)]
struct SiteRow {
    replica_seed: u64,
    role: &'static str,
    x: u32,
    y: u32,
    z: u32,
    flips: u32,
}

fn checkpoint_dir(cfg: &RunConfig) -> Result<Option<PathBuf>> {
    if cfg.checkpoint_at.is_empty() {
        return Ok(None);
    }
    let dir = cfg.out.join("checkpoints");
    files::ensure_dir(&dir)?;
    Ok(Some(dir))
}

fn cmd_run(args: &ConfigArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(args, &load_file(args.config.as_deref())?)?;
    files::ensure_dir(&cfg.out)?;
    let prov = Provenance::new("run", &cfg)?;
    let ckpt = checkpoint_dir(&cfg)?;
    let ckpt = ckpt.as_deref().map(|d| (d, &prov));
    let summaries: Vec<ReplicaSummary> = match &cfg.pattern {
        None => experiment::run_cell(&cfg, ckpt)?,
        Some(path) => {
            let pf = files::load_pattern_file(path)?;
            let results = experiment::run_pattern_cell(&cfg, &pf, ckpt)?;
            let (summaries, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
            let mut w = create(&cfg.out.join("pattern_sites.csv"))?;
            w.write_all(prov.csv_preamble().as_bytes())
                .map_err(|e| Error::io(&cfg.out, e))?;
            let mut csv = csv::Writer::from_writer(w);
            for rep in &reports {
                for s in &rep.sites {
                    csv.serialize(SiteRow {
                        replica_seed: rep.replica_seed,
                        role: s.role,
                        x: s.x,
                        y: s.y,
                        z: s.z,
                        flips: s.flips,
                    })?;
                }
            }
            csv.flush().map_err(|e| Error::io(&cfg.out, e))?;
            let brief: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "replica_seed": r.replica_seed,
                        "flipping_flips": r.flipping_flips,
                        "fixed_sites": r.fixed_sites,
                        "fixed_sites_flipped": r.fixed_sites_flipped,
                        "fixed_max_flips": r.fixed_max_flips,
                    })
                })
                .collect();
            let body = json!({ "replicas": brief });
            write_json(&cfg.out.join("pattern_report.json"), &prov, &body)?;
            emit(&serde_json::to_string(&body)?);
            summaries
        }
    };
    experiment::write_census_csv(
        create(&cfg.out.join("census.csv"))?,
        &prov,
        &[(&cfg, &summaries)],
    )?;
    let agg = experiment::aggregate(&cfg, &summaries);
    write_json(&cfg.out.join("summary.json"), &prov, &agg)?;
    if cfg.pattern.is_none() {
        emit(&serde_json::to_string(&agg)?);
    }
    Ok(0)
}

fn cmd_sweep(common: &ConfigArgs, k_list: Option<&[u32]>, p_list: Option<&[f64]>) -> Result<u8> {
    let file = load_file(common.config.as_deref())?;
    let sweep = SweepConfig::resolve(common, k_list, p_list, &file)?;
    let cells = sweep.cells();
    files::ensure_dir(&sweep.base.out)?;
    let prov = Provenance::new(
        "sweep",
        &json!({ "base": sweep.base, "k_list": sweep.ks, "p_list": sweep.ps }),
    )?;
    let results: Vec<Vec<ReplicaSummary>> = cells
        .iter()
        .map(|c| experiment::run_cell(c, None))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&RunConfig, &[ReplicaSummary])> = cells
        .iter()
        .zip(results.iter().map(Vec::as_slice))
        .collect();
    experiment::write_census_csv(create(&sweep.base.out.join("census.csv"))?, &prov, &pairs)?;
    let aggs: Vec<_> = cells
        .iter()
        .zip(&results)
        .map(|(c, r)| experiment::aggregate(c, r))
        .collect();
    let body = json!({ "cells": aggs });
    write_json(&sweep.base.out.join("sweep.json"), &prov, &body)?;
    emit(&serde_json::to_string(&body)?);
    Ok(0)
}

fn cmd_verify(name: &str, k: Option<u32>, bc: Option<&str>, out: Option<&Path>) -> Result<u8> {
    let bc = bc.map(parse_bc).transpose()?;
    if let Some(k) = k.filter(|&k| k < 2) {
        return Err(Error::Usage(format!("--k {k} is below 2")));
    }
    let v = verify::run(name, k, bc)?;
    let prov = Provenance::new(
        "verify",
        &json!({ "name": name, "k": k, "bc": bc.map(|b| b.as_str()) }),
    )?;
    if let Some(path) = out {
        write_json(path, &prov, &v)?;
    }
    emit(&serde_json::to_string(&WithProvenance {
        provenance: &prov,
        body: &v,
    })?);
    Ok(if v.passed { 0 } else { 1 })
}

fn cmd_oracle(opts: OracleSpec, out: Option<&Path>) -> Result<u8> {
    let report = oracle_report::compare(&opts)?;
    let prov = Provenance::new(
        "oracle",
        &json!({
            "lx": opts.lx, "ly": opts.ly, "k": opts.k, "p": opts.p,
            "replicas": opts.replicas, "seed": opts.seed,
            "engine": opts.engine.as_str(), "threshold": opts.threshold,
        }),
    )?;
    if let Some(path) = out {
        write_json(path, &prov, &report)?;
    }
    emit(&serde_json::to_string(&WithProvenance {
        provenance: &prov,
        body: &report,
    })?);
    Ok(if report.passed { 0 } else { 1 })
}

fn cmd_resume(path: &Path, t_max: f64, out: Option<&Path>) -> Result<u8> {
    let (snap, original) = checkpoint::load(path)?;
    if !(t_max.is_finite() && t_max >= snap.time) {
        return Err(Error::Usage(format!(
            "--t-max must be at least the checkpoint time {}",
            snap.time
        )));
    }
    let mut engine = Engine::restore(snap)?;
    let summary = engine.run_until(t_max);
    let prov = Provenance::new(
        "resume",
        &json!({ "checkpoint": path, "t_max": t_max, "original": serde_json::from_str::<serde_json::Value>(&original).ok() }),
    )?;
    if let Some(dir) = out {
        files::ensure_dir(dir)?;
        checkpoint::save(
            &dir.join(format!("resumed-t{t_max}.ckpt")),
            &engine.snapshot(),
            &prov.to_json(),
        )?;
    }
    emit(
        &json!({
            "time": engine.time(),
            "events": summary.events,
            "flips": summary.flips,
            "total_flips": engine.log().total(),
            "quiescent": summary.quiescent,
        })
        .to_string(),
    );
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep {
            common,
            k_list,
            p_list,
        } => cmd_sweep(&common, k_list.as_deref(), p_list.as_deref()),
        Command::Verify { name, k, bc, out } => cmd_verify(&name, k, bc.as_deref(), out.as_deref()),
        Command::Oracle {
            lx,
            ly,
            k,
            p,
            replicas,
            seed,
            engine,
            threshold,
            out,
        } => {
            let engine: EngineMode = engine
                .parse()
                .map_err(|_| Error::Usage(format!("unknown engine `{engine}`")))?;
            cmd_oracle(
                OracleSpec {
                    lx,
                    ly,
                    k,
                    p,
                    replicas,
                    seed,
                    engine,
                    threshold,
                },
                out.as_deref(),
            )
        }
        Command::Resume {
            checkpoint,
            t_max,
            out,
        } => cmd_resume(&checkpoint, t_max, out.as_deref()),
        Command::Figure7 { out } => {
            let (pat, sets) = files::export_figure7(&out)?;
            emit(&format!("{}\n{}", pat.display(), sets.display()));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("slabfix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
