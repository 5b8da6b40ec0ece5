//! Replica runs, census tables, sweep aggregates and pattern-run reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use slabfix_core::analysis::{
    central_site_fixated, central_site_fixation_probability, fixation_census, nonfixated_geometry,
    FixationCensus, Snapshot,
};
use slabfix_core::constructions::Figure7Pattern;
use slabfix_core::dynamics::{Engine, FlipLog};
use slabfix_core::rng::replica_seed;
use slabfix_core::spin::Unspecified;
use slabfix_core::{Pattern, SiteId, SlabGeometry, SpinConfig};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::RunConfig;
use crate::provenance::Provenance;
use crate::{checkpoint, files, Error, Result};

/// Per-replica seed; the replica's initial state and dynamics derive from it.
pub fn replica_seed_of(cfg: &RunConfig, replica: u64) -> u64 {
    replica_seed(cfg.seed, replica)
}

pub fn geometry(cfg: &RunConfig) -> Result<Arc<SlabGeometry>> {
    Ok(Arc::new(SlabGeometry::new(cfg.lx, cfg.ly, cfg.k, cfg.bc)?))
}

/// Centres `pat` laterally in the lattice.
pub fn place_pattern(pat: &Pattern, g: &SlabGeometry) -> Result<Pattern> {
    if pat.width() > g.lx() || pat.height() > g.ly() {
        return Err(Error::Usage(format!(
            "pattern {}x{} does not fit in a {}x{} lattice",
            pat.width(),
            pat.height(),
            g.lx(),
            g.ly()
        )));
    }
    if pat.k() != g.k() {
        return Err(Error::Usage(format!(
            "pattern has k = {} but the lattice has k = {}",
            pat.k(),
            g.k()
        )));
    }
    Ok(pat
        .clone()
        .with_anchor((g.lx() - pat.width()) / 2, (g.ly() - pat.height()) / 2))
}

/// Product-measure background, with the placed pattern written over it.
pub fn initial_state(
    g: &Arc<SlabGeometry>,
    p: f64,
    rs: u64,
    placed: Option<&Pattern>,
) -> Result<SpinConfig> {
    let mut c = SpinConfig::init_product(g.clone(), p, replica_seed(rs, 0))?;
    if let Some(pat) = placed {
        c.embed_pattern(pat, Unspecified::KeepBackground)?;
    }
    Ok(c)
}

pub fn new_engine(cfg: &RunConfig, rs: u64, placed: Option<&Pattern>) -> Result<Engine> {
    let g = geometry(cfg)?;
    Ok(Engine::new(
        initial_state(&g, cfg.p, rs, placed)?,
        cfg.engine,
        replica_seed(rs, 1),
    ))
}

pub fn checkpoint_path(dir: &Path, replica: u64, t: f64) -> PathBuf {
    dir.join(format!("replica-{replica:04}-t{t}.ckpt"))
}

/// A finished replica with the states recorded at the snapshot times.
pub struct ReplicaRun {
    pub replica: u64,
    pub replica_seed: u64,
    pub engine: Engine,
    pub snapshots: Vec<Snapshot>,
    pub quiescent: bool,
}

/// Runs one replica to `t_max`, recording snapshots and writing any
/// configured checkpoints into `checkpoint_dir`.
pub fn run_replica(
    cfg: &RunConfig,
    replica: u64,
    placed: Option<&Pattern>,
    checkpoint_dir: Option<(&Path, &Provenance)>,
) -> Result<ReplicaRun> {
    let rs = replica_seed_of(cfg, replica);
    let mut engine = new_engine(cfg, rs, placed)?;
    let snap_times = cfg.snapshot_times();
    let mut stops: Vec<f64> = snap_times
        .iter()
        .chain(&cfg.checkpoint_at)
        .copied()
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut snapshots = Vec::new();
    let mut quiescent = false;
    for t in stops {
        quiescent = engine.run_until(t).quiescent;
        if snap_times.contains(&t) {
            snapshots.push(Snapshot {
                time: t,
                state: engine.state().clone(),
            });
        }
        if let (true, Some((dir, prov))) = (cfg.checkpoint_at.contains(&t), checkpoint_dir) {
            checkpoint::save(
                &checkpoint_path(dir, replica, t),
                &engine.snapshot(),
                &prov.to_json(),
            )?;
        }
    }
    Ok(ReplicaRun {
        replica,
        replica_seed: rs,
        engine,
        snapshots,
        quiescent,
    })
}

#[derive(Clone, Debug)]
pub struct ReplicaSummary {
    pub replica: u64,
    pub replica_seed: u64,
    pub census: FixationCensus,
    pub central_fixated: bool,
    pub quiescent: bool,
    pub total_flips: u64,
}

pub fn summarize(cfg: &RunConfig, run: &ReplicaRun) -> ReplicaSummary {
    let g = run.engine.geometry();
    let log = run.engine.log();
    ReplicaSummary {
        replica: run.replica,
        replica_seed: run.replica_seed,
        census: fixation_census(log, g, &run.snapshots, cfg.t_max),
        central_fixated: central_site_fixated(log, g, g.lx() / 2, g.ly() / 2, cfg.t_max),
        quiescent: run.quiescent,
        total_flips: log.total(),
    }
}

/// All replicas of one configuration, in parallel, in replica order.
pub fn run_cell(
    cfg: &RunConfig,
    checkpoint_dir: Option<(&Path, &Provenance)>,
) -> Result<Vec<ReplicaSummary>> {
    cfg.validate()?;
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, r, None, checkpoint_dir).map(|run| summarize(cfg, &run)))
        .collect()
}

#[derive(Debug, Serialize)]
struct CensusRow {
    replica_seed: u64,
    k: u32,
    bc: &'static str,
    p: f64,
    window_j: usize,
    active_fraction: f64,
    mono_fraction: Option<f64>,
    largest_active_cluster: usize,
}

/// One row per window per replica, below the provenance preamble.
pub fn write_census_csv<W: Write>(
    mut w: W,
    prov: &Provenance,
    cells: &[(&RunConfig, &[ReplicaSummary])],
) -> Result<()> {
    w.write_all(prov.csv_preamble().as_bytes())
        .map_err(|e| Error::io("<census>", e))?;
    let mut out = csv::Writer::from_writer(w);
    for (cfg, replicas) in cells {
        for rep in *replicas {
            for win in &rep.census.windows {
                out.serialize(CensusRow {
                    replica_seed: rep.replica_seed,
                    k: cfg.k,
                    bc: cfg.bc.as_str(),
                    p: cfg.p,
                    window_j: win.j,
                    active_fraction: win.active_fraction,
                    mono_fraction: win.mono_fraction,
                    largest_active_cluster: win.largest_active_cluster,
                })?;
            }
        }
    }
    out.flush().map_err(|e| Error::io("<census>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Sample mean with a two-sided 95% Student-t interval.
pub fn mean_ci(xs: &[f64]) -> MeanCi {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n.max(1) as f64;
    if n < 2 {
        return MeanCi {
            mean,
            ci_low: mean,
            ci_high: mean,
        };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * (var / n as f64).sqrt();
    MeanCi {
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowAggregate {
    pub j: usize,
    pub active_fraction: MeanCi,
    pub mono_fraction: Option<MeanCi>,
    pub energy_lowering_flips: MeanCi,
    pub largest_active_cluster: MeanCi,
}

#[derive(Clone, Debug, Serialize)]
pub struct CentralSiteSummary {
    pub level: u32,
    pub fixated: u64,
    pub replicas: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellAggregate {
    pub k: u32,
    pub bc: &'static str,
    pub p: f64,
    pub lx: u32,
    pub ly: u32,
    pub t_max: f64,
    pub replicas: u64,
    pub windows: Vec<WindowAggregate>,
    pub final_active_fraction: MeanCi,
    /// Share of replicas whose final window has no energy-lowering flips.
    pub energy_lowering_saturated: f64,
    pub quiescent_fraction: f64,
    pub central_site: CentralSiteSummary,
    /// Largest non-fixated column cluster as a fraction of all columns.
    pub nonfixated_largest_fraction: MeanCi,
    pub nonfixated_spanning_fraction: f64,
}

pub fn aggregate(cfg: &RunConfig, reps: &[ReplicaSummary]) -> CellAggregate {
    let n = reps.len() as f64;
    let windows = reps.first().map_or(0, |r| r.census.windows.len());
    let col = |f: &dyn Fn(&ReplicaSummary) -> f64| mean_ci(&reps.iter().map(f).collect::<Vec<_>>());
    let window_aggs = (0..windows)
        .map(|j| {
            let monos: Option<Vec<f64>> = reps
                .iter()
                .map(|r| r.census.windows[j].mono_fraction)
                .collect();
            WindowAggregate {
                j,
                active_fraction: col(&|r| r.census.windows[j].active_fraction),
                mono_fraction: monos.map(|m| mean_ci(&m)),
                energy_lowering_flips: col(&|r| r.census.windows[j].energy_lowering_flips as f64),
                largest_active_cluster: col(&|r| r.census.windows[j].largest_active_cluster as f64),
            }
        })
        .collect();
    let final_window = |r: &ReplicaSummary| r.census.final_window().cloned();
    let central = central_site_fixation_probability(
        &reps
            .iter()
            .map(|r| (cfg.k, r.central_fixated))
            .collect::<Vec<_>>(),
    );
    let c = &central[0];
    let geo: Vec<_> = reps
        .iter()
        .map(|r| nonfixated_geometry(&r.census))
        .collect();
    CellAggregate {
        k: cfg.k,
        bc: cfg.bc.as_str(),
        p: cfg.p,
        lx: cfg.lx,
        ly: cfg.ly,
        t_max: cfg.t_max,
        replicas: reps.len() as u64,
        windows: window_aggs,
        final_active_fraction: col(&|r| final_window(r).map_or(0.0, |w| w.active_fraction)),
        energy_lowering_saturated: reps
            .iter()
            .filter(|r| final_window(r).is_none_or(|w| w.energy_lowering_flips == 0))
            .count() as f64
            / n,
        quiescent_fraction: reps.iter().filter(|r| r.quiescent).count() as f64 / n,
        central_site: CentralSiteSummary {
            level: slabfix_core::analysis::central_level(cfg.k),
            fixated: c.fixated,
            replicas: c.replicas,
            estimate: c.estimate,
            ci_low: c.ci.0,
            ci_high: c.ci.1,
        },
        nonfixated_largest_fraction: mean_ci(
            &geo.iter().map(|g| g.largest_fraction).collect::<Vec<_>>(),
        ),
        nonfixated_spanning_fraction: geo.iter().filter(|g| g.spans_torus).count() as f64 / n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteFlips {
    pub role: &'static str,
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub flips: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternReplica {
    pub replica_seed: u64,
    pub flipping_flips: Vec<u32>,
    pub fixed_sites: usize,
    pub fixed_sites_flipped: usize,
    pub fixed_max_flips: u32,
    pub sites: Vec<SiteFlips>,
}

/// Flip counts of the designated sites, in lattice coordinates. Without a
/// sidecar every specified cell of the pattern is reported as `specified`.
pub fn pattern_flip_report(
    placed: &Pattern,
    sets: Option<&Figure7Pattern>,
    g: &SlabGeometry,
    log: &FlipLog,
    replica_seed: u64,
) -> PatternReplica {
    let site = |role: &'static str, local: SiteId| {
        let s = placed.global_site(g, local);
        SiteFlips {
            role,
            x: s.x,
            y: s.y,
            z: s.z,
            flips: log.total_flips[g.index(s).expect("placed inside lattice")],
        }
    };
    let mut sites = Vec::new();
    match sets {
        Some(f) => {
            sites.extend(f.flipping.iter().map(|&s| site("flipping", s)));
            sites.extend(f.fixed.iter().map(|&s| site("fixed", s)));
        }
        None => sites.extend(placed.specified().map(|(s, _)| site("specified", s))),
    }
    let fixed: Vec<u32> = sites
        .iter()
        .filter(|s| s.role == "fixed")
        .map(|s| s.flips)
        .collect();
    PatternReplica {
        replica_seed,
        flipping_flips: sites
            .iter()
            .filter(|s| s.role == "flipping")
            .map(|s| s.flips)
            .collect(),
        fixed_sites: fixed.len(),
        fixed_sites_flipped: fixed.iter().filter(|&&c| c > 0).count(),
        fixed_max_flips: fixed.iter().copied().max().unwrap_or(0),
        sites,
    }
}

/// Runs every replica with the pattern embedded and reports designated-site
/// flip counts alongside the usual census.
pub fn run_pattern_cell(
    cfg: &RunConfig,
    pf: &files::PatternFile,
    checkpoint_dir: Option<(&Path, &Provenance)>,
) -> Result<Vec<(ReplicaSummary, PatternReplica)>> {
    let g = geometry(cfg)?;
    let placed = place_pattern(&pf.pattern, &g)?;
    let sets = pf.sets.as_ref();
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let run = run_replica(cfg, r, Some(&placed), checkpoint_dir)?;
            let rep = pattern_flip_report(&placed, sets, &g, run.engine.log(), run.replica_seed);
            Ok((summarize(cfg, &run), rep))
        })
        .collect()
}
