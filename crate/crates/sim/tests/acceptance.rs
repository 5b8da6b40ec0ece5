//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints its PASS/FAIL line; exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use slabfix::checkpoint;
use slabfix::config::RunConfig;
use slabfix::experiment::{self, ReplicaSummary};
use slabfix::files::PatternFile;
use slabfix::oracle_report::{compare, OracleSpec};
use slabfix::verify;
use slabfix_core::analysis::{eta_probability, label_clusters, EtaField, Region};
use slabfix_core::constructions::build_figure7;
use slabfix_core::dynamics::{Engine, EngineMode};
use slabfix_core::oracle::naive_simulate;
use slabfix_core::rng::{replica_seed, CounterStream, StreamClass};
use slabfix_core::{Eta, SlabGeometry, SpinConfig, VerticalBc};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn figure7_certificate() -> Outcome {
    let ((fixed, cycle), dt) = timed(|| {
        (
            verify::run("figure7-fixed", None, None).unwrap(),
            verify::run("figure7-cycle", None, None).unwrap(),
        )
    });
    let flips = cycle.report["flips"].as_array().map_or(0, Vec::len);
    let ok = fixed.passed
        && fixed.report["states_checked"] == 9
        && cycle.passed
        && cycle.report["returns_to_start"] == true
        && flips == 8
        && dt < Duration::from_secs(1);
    check(
        ok,
        format!(
            "fixed={} (worst energy {}), cycle legal={} flips={} returns={}, {:.3}s",
            fixed.passed,
            fixed.report["worst_energy"],
            cycle.report["legal"],
            flips,
            cycle.report["returns_to_start"],
            dt.as_secs_f64()
        ),
    )
}

fn absorbing_block_certificate() -> Outcome {
    let (v, dt) = timed(|| {
        verify::absorbing_block(
            &(2..=8).collect::<Vec<_>>(),
            &[VerticalBc::Free, VerticalBc::Periodic],
        )
        .unwrap()
    });
    let cases = v.report["cases"].as_array().unwrap();
    let failing: Vec<String> = cases
        .iter()
        .filter(|c| c["passed"] != true)
        .map(|c| {
            format!(
                "k={} {} {} worst={}",
                c["k"],
                c["bc"].as_str().unwrap(),
                c["sign"].as_str().unwrap(),
                c["worst_energy"]
            )
        })
        .collect();
    let worst = cases
        .iter()
        .filter_map(|c| c["worst_energy"].as_i64())
        .max()
        .unwrap();
    let detail = format!(
        "{} cases, max worst-case energy {worst} (need <= -2), {:.3}s{}",
        cases.len(),
        dt.as_secs_f64(),
        if failing.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failing.join(", "))
        }
    );
    check(
        v.passed && cases.len() == 28 && dt < Duration::from_secs(1),
        detail,
    )
}

fn oracle_agreement() -> Outcome {
    let opts = OracleSpec {
        lx: 2,
        ly: 2,
        k: 2,
        p: 0.5,
        replicas: 100_000,
        seed: 20_240,
        engine: EngineMode::Thinned,
        threshold: 0.02,
    };
    let (r, dt) = timed(|| compare(&opts).unwrap());
    check(
        r.passed && r.replicas == 100_000 && dt < Duration::from_secs(120),
        format!(
            "TV {:.5} (<= 0.02) over {} replicas, {} absorbing states, {} unabsorbed, {:.2}s",
            r.tv_distance,
            r.replicas,
            r.states.len(),
            r.unabsorbed,
            dt.as_secs_f64()
        ),
    )
}

/// Chi-square test of homogeneity for two samples over categories. Categories
/// with fewer than 5 expected counts are pooled into one bin.
fn chi_square_two_sample(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> (f64, usize, f64) {
    let keys: BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let na = a.values().sum::<u64>() as f64;
    let nb = b.values().sum::<u64>() as f64;
    let n = na + nb;
    let count = |m: &BTreeMap<u64, u64>, k: u64| m.get(&k).copied().unwrap_or(0);
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut pooled = (0u64, 0u64);
    for k in keys {
        let cell = (count(a, k), count(b, k));
        if (cell.0 + cell.1) as f64 * na.min(nb) / n >= 5.0 {
            bins.push(cell);
        } else {
            pooled.0 += cell.0;
            pooled.1 += cell.1;
        }
    }
    if pooled.0 + pooled.1 > 0 {
        bins.push(pooled);
    }
    let stat: f64 = bins
        .iter()
        .map(|&(oa, ob)| {
            let tot = (oa + ob) as f64;
            let (ea, eb) = (tot * na / n, tot * nb / n);
            (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb
        })
        .sum();
    let df = bins.len().saturating_sub(1);
    let p = if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
    };
    (stat, df, p)
}

fn engine_equivalence() -> Outcome {
    // One fixed initial configuration; the engines' own randomness varies.
    let g = Arc::new(SlabGeometry::new(4, 4, 2, VerticalBc::Periodic).unwrap());
    let init = SpinConfig::init_product(g, 0.5, 4_242).unwrap();
    let replicas = 10_000u64;
    let cap = 1.0e4;
    let sample = |mode: EngineMode, master: u64| {
        let mut hist = BTreeMap::new();
        let mut unabsorbed = 0;
        for r in 0..replicas {
            let mut e = Engine::new(init.clone(), mode, replica_seed(master, r));
            let key = if e.run_until(cap).quiescent {
                e.state().words()[0]
            } else {
                unabsorbed += 1;
                u64::MAX
            };
            *hist.entry(key).or_insert(0u64) += 1;
        }
        (hist, unabsorbed)
    };
    let (full, full_open) = sample(EngineMode::FullClock, 7_001);
    let (thinned, thinned_open) = sample(EngineMode::Thinned, 7_002);
    let (stat, df, p) = chi_square_two_sample(&full, &thinned);
    let states = full.len().max(thinned.len());

    let mut naive_ok = true;
    let mut events = 0usize;
    for (lx, ly, k, bc) in [
        (4, 4, 2, VerticalBc::Periodic),
        (4, 4, 3, VerticalBc::Periodic),
        (5, 4, 3, VerticalBc::Free),
        (6, 6, 4, VerticalBc::Free),
    ] {
        let g = Arc::new(SlabGeometry::new(lx, ly, k, bc).unwrap());
        for seed in 0..25u64 {
            let init = SpinConfig::init_product(g.clone(), 0.5, 1000 + seed).unwrap();
            let naive = naive_simulate(&init, seed, 100.0);
            let mut e = Engine::new(init, EngineMode::FullClock, seed);
            let mut seen = Vec::new();
            e.run_until_observed(100.0, |ev| seen.push(*ev));
            events += seen.len();
            naive_ok &= seen == naive.events && e.log() == &naive.log && e.state() == &naive.state;
        }
    }
    check(
        p >= 0.01 && naive_ok,
        format!(
            "final states: {states} distinct, unabsorbed {full_open}/{thinned_open}, chi-square {stat:.2} on {df} df, p = {p:.4} (>= 0.01); naive vs full clock identical over {events} events: {naive_ok}"
        ),
    )
}

/// One desk cell: 64×64, t_max = 4096, 50 replicas.
struct DeskCell {
    k: u32,
    bc: VerticalBc,
    p: f64,
    reps: Vec<ReplicaSummary>,
}

impl DeskCell {
    fn label(&self) -> String {
        format!("k={} {} p={}", self.k, self.bc.as_str(), self.p)
    }

    fn mean_activity(&self) -> Vec<f64> {
        let windows = self.reps[0].census.windows.len();
        (0..windows)
            .map(|j| {
                self.reps
                    .iter()
                    .map(|r| r.census.windows[j].active_fraction)
                    .sum::<f64>()
                    / self.reps.len() as f64
            })
            .collect()
    }
}

const DECAYING: [(u32, VerticalBc); 3] = [
    (2, VerticalBc::Periodic),
    (3, VerticalBc::Periodic),
    (2, VerticalBc::Free),
];
const PERSISTENT: [(u32, VerticalBc); 4] = [
    (4, VerticalBc::Periodic),
    (5, VerticalBc::Periodic),
    (3, VerticalBc::Free),
    (4, VerticalBc::Free),
];

/// Floors on the final-window mean activity of the persistent cells, by
/// (k, bc). The smallest admissible floor is 1e-3.
fn activity_floor(_k: u32, _bc: VerticalBc) -> f64 {
    1e-3
}

fn desk_cells(p: f64, seed: u64) -> Vec<DeskCell> {
    DECAYING
        .iter()
        .chain(&PERSISTENT)
        .map(|&(k, bc)| {
            let cfg = RunConfig {
                lx: 64,
                ly: 64,
                k,
                bc,
                p,
                seed,
                t_max: 4096.0,
                engine: EngineMode::Thinned,
                replicas: 50,
                ..Default::default()
            };
            DeskCell {
                k,
                bc,
                p,
                reps: experiment::run_cell(&cfg, None).unwrap(),
            }
        })
        .collect()
}

fn saturation(cells: &[&DeskCell]) -> Outcome {
    let mut ok = true;
    let parts: Vec<String> = cells
        .iter()
        .map(|c| {
            let sat = c
                .reps
                .iter()
                .filter(|r| {
                    r.census
                        .final_window()
                        .is_some_and(|w| w.energy_lowering_flips == 0)
                })
                .count();
            ok &= sat * 100 >= 95 * c.reps.len();
            format!("{} {}/{}", c.label(), sat, c.reps.len())
        })
        .collect();
    check(
        ok,
        format!(
            "final-window energy-lowering flips zero in: {}",
            parts.join("; ")
        ),
    )
}

/// 0 at the end, or halving window over window from j = 6 on.
fn decays(a: &[f64]) -> bool {
    a.last() == Some(&0.0) || a.windows(2).skip(6).all(|w| w[1] <= 0.5 * w[0])
}

fn phase_split(cells: &[DeskCell]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in cells {
        let a = c.mean_activity();
        let last = *a.last().unwrap();
        if DECAYING.contains(&(c.k, c.bc)) {
            let good = decays(&a);
            ok &= good;
            parts.push(format!("{} final {last:.2e} decaying={good}", c.label()));
        } else {
            let floor = activity_floor(c.k, c.bc);
            let good = last >= floor;
            ok &= good;
            parts.push(format!(
                "{} final {last:.2e} (floor {floor:.0e}) {}",
                c.label(),
                if good { "ok" } else { "below" }
            ));
        }
    }
    check(ok, parts.join("; "))
}

fn figure7_live_run() -> Outcome {
    let fig = build_figure7().unwrap();
    let pf = PatternFile {
        pattern: fig.pattern.clone(),
        sets: Some(fig),
    };
    let cfg = RunConfig {
        lx: 32,
        ly: 32,
        k: 4,
        bc: VerticalBc::Periodic,
        p: 0.5,
        seed: 808,
        t_max: 1000.0,
        replicas: 20,
        ..Default::default()
    };
    let results = experiment::run_pattern_cell(&cfg, &pf, None).unwrap();
    let fixed_flipped: usize = results.iter().map(|(_, r)| r.fixed_sites_flipped).sum();
    let min_flipping = results
        .iter()
        .flat_map(|(_, r)| r.flipping_flips.iter().copied())
        .min()
        .unwrap();
    let max_flipping = results
        .iter()
        .flat_map(|(_, r)| r.flipping_flips.iter().copied())
        .max()
        .unwrap();
    check(
        fixed_flipped == 0 && min_flipping >= 20 && results.len() == 20,
        format!(
            "{} seeds: fixed sites that flipped {fixed_flipped}; flipping-site flips in [{min_flipping}, {max_flipping}] (need >= 20)",
            results.len()
        ),
    )
}

/// Component of `start` by breadth-first search over the explicit graph.
fn reachable(f: &EtaField, r: u8, star: bool, start: (u32, u32)) -> Vec<(u32, u32)> {
    let mut seen = vec![false; (f.lx() * f.ly()) as usize];
    let mut queue = VecDeque::from([start]);
    seen[(start.1 * f.lx() + start.0) as usize] = true;
    let mut out = Vec::new();
    while let Some((x, y)) = queue.pop_front() {
        out.push((x, y));
        for nx in x.saturating_sub(1)..=(x + 1).min(f.lx() - 1) {
            for ny in y.saturating_sub(1)..=(y + 1).min(f.ly() - 1) {
                let dist = nx.abs_diff(x) + ny.abs_diff(y);
                let adjacent = if star { dist >= 1 } else { dist == 1 };
                let i = (ny * f.lx() + nx) as usize;
                if adjacent && !seen[i] && f.get(nx, ny) == r {
                    seen[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn analysis_correctness() -> Outcome {
    let mut rng = CounterStream::new(99, StreamClass::Replica, 0);
    let mut mismatches = 0;
    for trial in 0..1000 {
        let density = 0.2 + 0.6 * rng.next_f64();
        let values: Vec<u8> = (0..64)
            .map(|_| {
                if rng.next_f64() < density {
                    1 + (rng.next_u64() >> 63) as u8
                } else {
                    0
                }
            })
            .collect();
        let f = EtaField::from_values(8, 8, values, 0.0).unwrap();
        let r = 1 + (trial % 2) as u8;
        let star = trial % 4 >= 2;
        let lab = label_clusters(&f, r, star, Region::full(8, 8)).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                if f.get(x, y) != r {
                    mismatches += usize::from(lab.component((x, y)).is_some());
                    continue;
                }
                let id = lab.component((x, y));
                let expect = reachable(&f, r, star, (x, y));
                let got: Vec<(u32, u32)> = (0..8)
                    .flat_map(|a| (0..8).map(move |b| (a, b)))
                    .filter(|&c| lab.component(c) == id)
                    .collect();
                mismatches += usize::from(expect != got);
            }
        }
    }

    let g = Arc::new(SlabGeometry::new(1000, 1000, 3, VerticalBc::Periodic).unwrap());
    let mut eta_ok = true;
    let mut parts = Vec::new();
    for (p, seed) in [(0.5, 31u64), (0.3, 32)] {
        let c = SpinConfig::init_product(g.clone(), p, seed).unwrap();
        let field = slabfix_core::analysis::eta_snapshot(&c, 0.0).unwrap();
        let n = field.values().len() as f64;
        for (r, eta) in [(0u8, Eta::Zero), (1, Eta::One), (2, Eta::Two)] {
            let q = eta_probability(p, eta);
            let z = (field.count(r) as f64 - n * q) / (n * q * (1.0 - q)).sqrt();
            eta_ok &= z.abs() <= 4.0;
            parts.push(format!("p={p} eta={r} z={z:+.2}"));
        }
    }
    check(
        mismatches == 0 && eta_ok,
        format!(
            "labeling mismatches vs reachability over 1000 fields: {mismatches}; 10^6 columns: {}",
            parts.join(", ")
        ),
    )
}

fn determinism_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [EngineMode::FullClock, EngineMode::Thinned] {
        let cfg = RunConfig {
            lx: 32,
            ly: 32,
            k: 4,
            bc: VerticalBc::Free,
            seed: 5150,
            t_max: 256.0,
            engine: mode,
            ..Default::default()
        };
        let rs = experiment::replica_seed_of(&cfg, 0);
        let run = |t: f64| {
            let mut e = experiment::new_engine(&cfg, rs, None).unwrap();
            e.run_until(t);
            e
        };
        let a = run(256.0);
        let b = run(256.0);
        let same = a.log() == b.log() && a.state() == b.state();
        let other = experiment::new_engine(&cfg, rs ^ 1, None).map(|mut e| {
            e.run_until(256.0);
            e.log() != a.log()
        });
        let half = run(128.0);
        let path = dir.path().join(format!("{}.ckpt", mode.as_str()));
        checkpoint::save(&path, &half.snapshot(), "{}").unwrap();
        let (snap, _) = checkpoint::load(&path).unwrap();
        let exact_snapshot = snap == half.snapshot();
        let mut resumed = Engine::restore(snap).unwrap();
        resumed.run_until(256.0);
        let round_trip =
            resumed.log() == a.log() && resumed.state() == a.state() && resumed.time() == a.time();
        let good = same && other.unwrap() && exact_snapshot && round_trip;
        ok &= good;
        parts.push(format!(
            "{}: repeat identical={same}, checkpoint bytes exact={exact_snapshot}, resume to 2t identical={round_trip}, {} flips",
            mode.as_str(),
            a.log().total()
        ));
    }
    check(ok, parts.join("; "))
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {n:>2} {name} [{secs:.1}s]: {d}"),
            Err(d) => {
                println!("FAIL criterion {n:>2} {name} [{secs:.1}s]: {d}");
                failed.push(n);
            }
        }
    };
    report(1, "figure7-certificate", &mut figure7_certificate);
    report(
        2,
        "absorbing-block-certificate",
        &mut absorbing_block_certificate,
    );
    report(3, "oracle-agreement", &mut oracle_agreement);
    report(4, "engine-equivalence", &mut engine_equivalence);
    let mid = desk_cells(0.5, 64);
    let low = desk_cells(0.2, 65);
    let high = desk_cells(0.8, 66);
    report(5, "energy-lowering-saturation", &mut || {
        let all: Vec<&DeskCell> = mid.iter().chain(&low).chain(&high).collect();
        saturation(&all)
    });
    report(6, "phase-split", &mut || phase_split(&mid));
    report(7, "p-robustness", &mut || {
        let a = phase_split(&low);
        let b = phase_split(&high);
        let ok = a.is_ok() && b.is_ok();
        let text = |r: &Outcome| match r {
            Ok(s) | Err(s) => s.clone(),
        };
        check(ok, format!("{} | {}", text(&a), text(&b)))
    });
    report(8, "figure7-live-run", &mut figure7_live_run);
    report(9, "analysis-correctness", &mut analysis_correctness);
    report(
        10,
        "determinism-and-persistence",
        &mut determinism_and_persistence,
    );
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!(
            "acceptance: {} of 10 criteria failed: {:?}",
            failed.len(),
            failed
        );
        std::process::exit(1);
    }
}
