//! Exact-versus-Monte-Carlo comparison on tiny fully periodic systems.

use rayon::prelude::*;
use serde::Serialize;
use slabfix_core::dynamics::EngineMode;
use slabfix_core::oracle::{
    absorption_analysis, build_generator, monte_carlo_absorption, MonteCarloAbsorption, TinySystem,
};
use slabfix_core::stats::total_variation;

use crate::{Error, Result};

/// Replicas not absorbed by this time count against the comparison.
pub const TIME_CAP: f64 = 1.0e4;

const CHUNK: u64 = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSpec {
    pub lx: u32,
    pub ly: u32,
    pub k: u32,
    pub p: f64,
    pub replicas: u64,
    pub seed: u64,
    pub engine: EngineMode,
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateRow {
    pub state: u32,
    /// Spins as `+`/`-` in site-index order.
    pub spins: String,
    pub exact: f64,
    pub monte_carlo: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub lx: u32,
    pub ly: u32,
    pub k: u32,
    pub p: f64,
    pub seed: u64,
    pub engine: &'static str,
    pub replicas: u64,
    pub unabsorbed: u64,
    pub expected_absorption_time: f64,
    pub tv_distance: f64,
    pub threshold: f64,
    pub passed: bool,
    pub states: Vec<StateRow>,
}

pub fn compare(opts: &OracleSpec) -> Result<OracleReport> {
    if opts.replicas == 0 {
        return Err(Error::Usage("--replicas must be at least 1".into()));
    }
    let sys = TinySystem::new(opts.lx, opts.ly, opts.k).map_err(|e| Error::Usage(e.to_string()))?;
    let gen = build_generator(&sys);
    let exact = absorption_analysis(&sys, &gen, &sys.product_distribution(opts.p)?)?;
    let chunks: Vec<u64> = (0..opts.replicas.div_ceil(CHUNK)).collect();
    let mc = chunks
        .par_iter()
        .map(|&c| {
            let end = ((c + 1) * CHUNK).min(opts.replicas);
            monte_carlo_absorption(
                &sys,
                opts.p,
                opts.seed,
                c * CHUNK..end,
                opts.engine,
                TIME_CAP,
            )
        })
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .reduce(MonteCarloAbsorption::merge)
        .expect("at least one chunk");
    let n = sys.num_sites();
    let mut states: Vec<u32> = exact.absorbing_states.clone();
    states.extend(
        mc.counts
            .keys()
            .filter(|s| !exact.absorbing_states.contains(s)),
    );
    states.sort_unstable();
    // the last slot carries unabsorbed Monte Carlo mass
    let mut p_exact: Vec<f64> = states.iter().map(|&s| exact.probability(s)).collect();
    let mut p_mc: Vec<f64> = states.iter().map(|&s| mc.frequency(s)).collect();
    p_exact.push(0.0);
    p_mc.push(mc.unabsorbed as f64 / mc.replicas as f64);
    let tv = total_variation(&p_exact, &p_mc);
    let rows = states
        .iter()
        .zip(p_exact.iter().zip(&p_mc))
        .map(|(&s, (&e, &m))| StateRow {
            state: s,
            spins: (0..n)
                .map(|i| if s >> i & 1 == 1 { '+' } else { '-' })
                .collect(),
            exact: e,
            monte_carlo: m,
        })
        .collect();
    Ok(OracleReport {
        lx: opts.lx,
        ly: opts.ly,
        k: opts.k,
        p: opts.p,
        seed: opts.seed,
        engine: opts.engine.as_str(),
        replicas: mc.replicas,
        unabsorbed: mc.unabsorbed,
        expected_absorption_time: exact.expected_time,
        tv_distance: tv,
        threshold: opts.threshold,
        passed: tv <= opts.threshold,
        states: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(lx: u32, ly: u32, k: u32) -> OracleSpec {
        OracleSpec {
            lx,
            ly,
            k,
            p: 0.5,
            replicas: 5000,
            seed: 4,
            engine: EngineMode::Thinned,
            threshold: 0.05,
        }
    }

    #[test]
    fn small_comparison_passes() {
        let r = compare(&opts(2, 2, 2)).unwrap();
        assert!(r.passed, "tv = {}", r.tv_distance);
        assert_eq!(r.replicas, 5000);
        let total: f64 = r.states.iter().map(|s| s.exact).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oversize_is_usage() {
        assert_eq!(compare(&opts(3, 3, 2)).unwrap_err().exit_code(), 2);
    }
}
