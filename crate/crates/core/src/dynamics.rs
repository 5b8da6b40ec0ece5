//! Continuous-time zero-temperature Glauber dynamics.
//!
//! Every site carries a rate-1 clock. On a ring the site flips if its energy
//! is positive, flips with probability 1/2 on a tie, and stays otherwise.
//!
//! Two engines realize this law:
//!
//! * [`EngineMode::FullClock`] processes every ring. Ring times and tie coins
//!   come from per-site counter streams, so the trajectory is a pure function
//!   of the seed and the initial state; [`crate::oracle::naive_simulate`]
//!   replays the same streams without any caching.
//! * [`EngineMode::Thinned`] is rejection free: only sites with energy ≥ 0
//!   produce events, at rate 1 (energy > 0) or 1/2 (tie), and every event is
//!   a flip. Selection uses two indexed sets with O(1) updates.
//!
//! Per-site energies are cached and updated locally after each flip.

use alloc::collections::BinaryHeap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::geometry::{SlabGeometry, VerticalBc};
use crate::rng::{draw, stream_key, to_exp1, StreamClass};
use crate::spin::SpinConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EngineMode {
    FullClock,
    Thinned,
}

impl EngineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineMode::FullClock => "full",
            EngineMode::Thinned => "thinned",
        }
    }
}

impl core::str::FromStr for EngineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full_clock" => Ok(EngineMode::FullClock),
            "thinned" => Ok(EngineMode::Thinned),
            _ => Err(Error::InvalidGeometry("engine must be `full` or `thinned`")),
        }
    }
}

/// Dyadic window holding time `t`: window 0 is `[0, 2)`, window `j ≥ 1` is
/// `[2^j, 2^(j+1))`.
#[inline]
pub fn window_index(t: f64) -> usize {
    if t < 2.0 {
        0
    } else {
        // exponent of a normal positive double is floor(log2 t)
        (((t.to_bits() >> 52) & 0x7ff) as i64 - 1023) as usize
    }
}

pub fn window_bounds(j: usize) -> (f64, f64) {
    let hi = libm::ldexp(1.0, j as i32 + 1);
    if j == 0 {
        (0.0, hi)
    } else {
        (hi / 2.0, hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowLog {
    /// Flips per site inside the window.
    pub flips: Vec<u32>,
    pub flips_total: u64,
    pub energy_lowering_total: u64,
}

/// Per-site flip history.
#[derive(Clone, Debug, PartialEq)]
pub struct FlipLog {
    pub total_flips: Vec<u32>,
    /// Flips made from a strictly positive energy.
    pub energy_lowering_flips: Vec<u32>,
    /// Time of the most recent flip; meaningful only where `total_flips > 0`.
    pub last_flip_time: Vec<f64>,
    /// Indexed by [`window_index`]; grows as the run reaches later windows.
    pub windows: Vec<WindowLog>,
}

impl FlipLog {
    pub fn new(num_sites: usize) -> Self {
        FlipLog {
            total_flips: vec![0; num_sites],
            energy_lowering_flips: vec![0; num_sites],
            last_flip_time: vec![0.0; num_sites],
            windows: Vec::new(),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.total_flips.len()
    }

    #[inline]
    pub(crate) fn record(&mut self, site: usize, t: f64, lowering: bool) {
        self.total_flips[site] += 1;
        self.last_flip_time[site] = t;
        let j = window_index(t);
        while self.windows.len() <= j {
            let n = self.num_sites();
            self.windows.push(WindowLog {
                flips: vec![0; n],
                flips_total: 0,
                energy_lowering_total: 0,
            });
        }
        let w = &mut self.windows[j];
        w.flips[site] += 1;
        w.flips_total += 1;
        if lowering {
            self.energy_lowering_flips[site] += 1;
            w.energy_lowering_total += 1;
        }
    }

    pub fn flips_in_window(&self, j: usize, site: usize) -> u32 {
        self.windows.get(j).map_or(0, |w| w.flips[site])
    }

    pub fn window_flips_total(&self, j: usize) -> u64 {
        self.windows.get(j).map_or(0, |w| w.flips_total)
    }

    pub fn window_energy_lowering(&self, j: usize) -> u64 {
        self.windows.get(j).map_or(0, |w| w.energy_lowering_total)
    }

    pub fn total(&self) -> u64 {
        self.total_flips.iter().map(|&c| c as u64).sum()
    }

    /// Smallest `J` such that no energy-lowering flip happened in any window
    /// `j ≥ J` among the first `windows` windows.
    pub fn energy_lowering_saturation(&self, windows: usize) -> usize {
        (0..windows)
            .rev()
            .find(|&j| self.window_energy_lowering(j) > 0)
            .map_or(0, |j| j + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub site: usize,
    pub time: f64,
    pub flipped: bool,
    pub pre_energy: i32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Event(Event),
    /// No site has energy ≥ 0; nothing can change any more.
    Quiescent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub events: u64,
    pub flips: u64,
    pub quiescent: bool,
}

/// Set of site indices with O(1) insert, remove and positional access.
#[derive(Clone, Debug)]
struct IndexedSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexedSet {
    fn new(n: usize) -> Self {
        IndexedSet {
            items: Vec::new(),
            pos: vec![ABSENT; n],
        }
    }

    #[inline]
    fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        self.pos[i] != ABSENT
    }

    #[inline]
    fn insert(&mut self, i: usize) {
        if self.pos[i] == ABSENT {
            self.pos[i] = self.items.len() as u32;
            self.items.push(i as u32);
        }
    }

    #[inline]
    fn remove(&mut self, i: usize) {
        let p = self.pos[i];
        if p != ABSENT {
            let last = self.items.pop().expect("non-empty");
            if last as usize != i {
                self.items[p as usize] = last;
                self.pos[last as usize] = p;
            }
            self.pos[i] = ABSENT;
        }
    }

    fn from_order(n: usize, order: &[u32]) -> Option<Self> {
        let mut s = IndexedSet::new(n);
        for &i in order {
            if i as usize >= n || s.contains(i as usize) {
                return None;
            }
            s.insert(i as usize);
        }
        Some(s)
    }
}

/// Clock state of the full-clock engine: per-site ring counters and the
/// pending ring of every site.
#[derive(Clone, Debug)]
struct FullClock {
    ring_count: Vec<u64>,
    next_ring: Vec<f64>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
}

#[derive(Clone, Debug)]
struct ThinnedClock {
    position: u64,
    pending: Option<f64>,
}

#[derive(Clone, Debug)]
enum Clock {
    Full(FullClock),
    Thinned(ThinnedClock),
}

/// Ring interval `n` of a site.
#[inline]
pub(crate) fn ring_interval(seed: u64, site: usize, n: u64) -> f64 {
    to_exp1(draw(stream_key(seed, StreamClass::Ring, site as u64), n))
}

/// Tie coin for ring `n` of a site; `true` means the tie resolves to a flip.
#[inline]
pub(crate) fn tie_coin(seed: u64, site: usize, n: u64) -> bool {
    draw(stream_key(seed, StreamClass::Coin, site as u64), n) >> 63 == 1
}

/// Everything needed to resume an engine bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineSnapshot {
    pub lx: u32,
    pub ly: u32,
    pub k: u32,
    pub vertical_bc: VerticalBc,
    pub mode: EngineMode,
    pub seed: u64,
    pub time: f64,
    pub spins: Vec<u64>,
    pub forced_order: Vec<u32>,
    pub tie_order: Vec<u32>,
    pub clock: ClockSnapshot,
    pub log: FlipLog,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClockSnapshot {
    Full {
        ring_count: Vec<u64>,
        next_ring: Vec<f64>,
    },
    Thinned {
        position: u64,
        pending: Option<f64>,
    },
}

/// One simulation: state, cached energies, clock and flip log.
#[derive(Clone, Debug)]
pub struct Engine {
    geometry: Arc<SlabGeometry>,
    state: SpinConfig,
    energy: Vec<i8>,
    /// Sites with energy > 0.
    forced: IndexedSet,
    /// Sites with energy = 0.
    ties: IndexedSet,
    log: FlipLog,
    clock: Clock,
    mode: EngineMode,
    seed: u64,
    engine_key: u64,
    time: f64,
}

impl Engine {
    pub fn new(state: SpinConfig, mode: EngineMode, seed: u64) -> Self {
        let geometry = state.geometry().clone();
        let n = geometry.num_sites();
        let energy: Vec<i8> = (0..n).map(|i| state.energy_of(i) as i8).collect();
        let mut forced = IndexedSet::new(n);
        let mut ties = IndexedSet::new(n);
        for (i, &e) in energy.iter().enumerate() {
            if e > 0 {
                forced.insert(i);
            } else if e == 0 {
                ties.insert(i);
            }
        }
        let clock = match mode {
            EngineMode::FullClock => {
                let next_ring: Vec<f64> = (0..n).map(|i| ring_interval(seed, i, 0)).collect();
                let heap = next_ring
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Reverse((t.to_bits(), i as u32)))
                    .collect();
                Clock::Full(FullClock {
                    ring_count: vec![0; n],
                    next_ring,
                    heap,
                })
            }
            EngineMode::Thinned => Clock::Thinned(ThinnedClock {
                position: 0,
                pending: None,
            }),
        };
        Engine {
            log: FlipLog::new(n),
            geometry,
            state,
            energy,
            forced,
            ties,
            clock,
            mode,
            seed,
            engine_key: stream_key(seed, StreamClass::Engine, 0),
            time: 0.0,
        }
    }

    pub fn state(&self) -> &SpinConfig {
        &self.state
    }

    pub fn geometry(&self) -> &Arc<SlabGeometry> {
        &self.geometry
    }

    pub fn log(&self) -> &FlipLog {
        &self.log
    }

    pub fn into_parts(self) -> (SpinConfig, FlipLog) {
        (self.state, self.log)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of sites with energy ≥ 0.
    pub fn eligible_count(&self) -> usize {
        self.forced.len() + self.ties.len()
    }

    pub fn is_quiescent(&self) -> bool {
        let q = self.eligible_count() == 0;
        debug_assert_eq!(q, self.state.is_quiescent());
        q
    }

    pub fn cached_energy(&self, site: usize) -> i32 {
        self.energy[site] as i32
    }

    /// Recomputes every energy from scratch and compares with the cache and
    /// the eligibility sets.
    pub fn check_consistency(&self) -> bool {
        (0..self.geometry.num_sites()).all(|i| {
            let e = self.state.energy_of(i);
            e == self.energy[i] as i32
                && self.forced.contains(i) == (e > 0)
                && self.ties.contains(i) == (e == 0)
        })
    }

    /// Time of the next event without executing it; `None` when the thinned
    /// engine is quiescent.
    pub fn peek_time(&mut self) -> Option<f64> {
        match &mut self.clock {
            Clock::Full(c) => c
                .heap
                .peek()
                .map(|Reverse((bits, _))| f64::from_bits(*bits)),
            Clock::Thinned(c) => {
                let weight = 2 * self.forced.len() + self.ties.len();
                if weight == 0 {
                    return None;
                }
                if c.pending.is_none() {
                    let rate = weight as f64 / 2.0;
                    let wait = to_exp1(draw(self.engine_key, c.position)) / rate;
                    c.position += 1;
                    c.pending = Some(self.time + wait);
                }
                c.pending
            }
        }
    }

    /// Executes the next event.
    pub fn step(&mut self) -> Step {
        match self.mode {
            EngineMode::FullClock => Step::Event(self.step_full()),
            EngineMode::Thinned => match self.step_thinned() {
                Some(ev) => Step::Event(ev),
                None => Step::Quiescent,
            },
        }
    }

    fn step_full(&mut self) -> Event {
        let Clock::Full(c) = &mut self.clock else {
            unreachable!()
        };
        let Reverse((bits, site)) = c.heap.pop().expect("every site has a pending ring");
        let site = site as usize;
        let t = f64::from_bits(bits);
        let n = c.ring_count[site];
        let pre = self.energy[site] as i32;
        let flipped = pre > 0 || (pre == 0 && tie_coin(self.seed, site, n));
        c.ring_count[site] = n + 1;
        let next = t + ring_interval(self.seed, site, n + 1);
        c.next_ring[site] = next;
        c.heap.push(Reverse((next.to_bits(), site as u32)));
        self.time = t;
        if flipped {
            self.apply_flip(site, pre, t);
        }
        Event {
            site,
            time: t,
            flipped,
            pre_energy: pre,
        }
    }

    fn step_thinned(&mut self) -> Option<Event> {
        let t = self.peek_time()?;
        let Clock::Thinned(c) = &mut self.clock else {
            unreachable!()
        };
        c.pending = None;
        let nf = self.forced.len() as u64;
        let weight = 2 * nf + self.ties.len() as u64;
        let r = ((draw(self.engine_key, c.position) as u128 * weight as u128) >> 64) as u64;
        c.position += 1;
        let site = if r < 2 * nf {
            self.forced.items[(r / 2) as usize]
        } else {
            self.ties.items[(r - 2 * nf) as usize]
        } as usize;
        let pre = self.energy[site] as i32;
        self.time = t;
        self.apply_flip(site, pre, t);
        Some(Event {
            site,
            time: t,
            flipped: true,
            pre_energy: pre,
        })
    }

    #[inline]
    fn reclassify(forced: &mut IndexedSet, ties: &mut IndexedSet, i: usize, e: i8) {
        if e > 0 {
            ties.remove(i);
            forced.insert(i);
        } else if e == 0 {
            forced.remove(i);
            ties.insert(i);
        } else {
            forced.remove(i);
            ties.remove(i);
        }
    }

    fn apply_flip(&mut self, site: usize, pre: i32, t: f64) {
        debug_assert!(pre >= 0, "illegal flip at site {site} with energy {pre}");
        let old = self.state.value(site);
        self.state.flip(site);
        self.energy[site] = -pre as i8;
        Self::reclassify(&mut self.forced, &mut self.ties, site, -pre as i8);
        for nb in self.geometry.neighbors_of(site) {
            let j = nb.site as usize;
            let delta = 2 * nb.mult as i32 * self.state.value(j) * old;
            let e = (self.energy[j] as i32 + delta) as i8;
            self.energy[j] = e;
            Self::reclassify(&mut self.forced, &mut self.ties, j, e);
        }
        self.log.record(site, t, pre > 0);
    }

    /// Advances until `t_max` or quiescence, whichever comes first.
    pub fn run_until(&mut self, t_max: f64) -> RunSummary {
        self.run_until_observed(t_max, |_| {})
    }

    /// Like [`run_until`](Self::run_until), reporting every event.
    pub fn run_until_observed(
        &mut self,
        t_max: f64,
        mut observe: impl FnMut(&Event),
    ) -> RunSummary {
        let mut summary = RunSummary::default();
        loop {
            if self.eligible_count() == 0 {
                debug_assert!(self.state.is_quiescent());
                summary.quiescent = true;
                break;
            }
            match self.peek_time() {
                Some(t) if t <= t_max => {}
                _ => break,
            }
            if let Step::Event(ev) = self.step() {
                summary.events += 1;
                summary.flips += ev.flipped as u64;
                observe(&ev);
            }
        }
        if !summary.quiescent && t_max > self.time {
            self.time = t_max;
        }
        summary
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let g = &self.geometry;
        EngineSnapshot {
            lx: g.lx(),
            ly: g.ly(),
            k: g.k(),
            vertical_bc: g.vertical_bc(),
            mode: self.mode,
            seed: self.seed,
            time: self.time,
            spins: self.state.words().to_vec(),
            forced_order: self.forced.items.clone(),
            tie_order: self.ties.items.clone(),
            clock: match &self.clock {
                Clock::Full(c) => ClockSnapshot::Full {
                    ring_count: c.ring_count.clone(),
                    next_ring: c.next_ring.clone(),
                },
                Clock::Thinned(c) => ClockSnapshot::Thinned {
                    position: c.position,
                    pending: c.pending,
                },
            },
            log: self.log.clone(),
        }
    }

    pub fn restore(snap: EngineSnapshot) -> Result<Self> {
        let geometry = Arc::new(SlabGeometry::new(
            snap.lx,
            snap.ly,
            snap.k,
            snap.vertical_bc,
        )?);
        let n = geometry.num_sites();
        let state = SpinConfig::from_words(geometry.clone(), snap.spins)?;
        let energy: Vec<i8> = (0..n).map(|i| state.energy_of(i) as i8).collect();
        let forced = IndexedSet::from_order(n, &snap.forced_order)
            .ok_or(Error::Snapshot("bad forced-site order"))?;
        let ties = IndexedSet::from_order(n, &snap.tie_order)
            .ok_or(Error::Snapshot("bad tie-site order"))?;
        for (i, &e) in energy.iter().enumerate() {
            if forced.contains(i) != (e > 0) || ties.contains(i) != (e == 0) {
                return Err(Error::Snapshot("eligibility sets disagree with spins"));
            }
        }
        let log = snap.log;
        if log.num_sites() != n
            || log.energy_lowering_flips.len() != n
            || log.last_flip_time.len() != n
            || log.windows.iter().any(|w| w.flips.len() != n)
        {
            return Err(Error::Snapshot("flip log size does not match geometry"));
        }
        let clock = match (snap.mode, snap.clock) {
            (
                EngineMode::FullClock,
                ClockSnapshot::Full {
                    ring_count,
                    next_ring,
                },
            ) => {
                if ring_count.len() != n || next_ring.len() != n {
                    return Err(Error::Snapshot("clock size does not match geometry"));
                }
                let heap = next_ring
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Reverse((t.to_bits(), i as u32)))
                    .collect();
                Clock::Full(FullClock {
                    ring_count,
                    next_ring,
                    heap,
                })
            }
            (EngineMode::Thinned, ClockSnapshot::Thinned { position, pending }) => {
                Clock::Thinned(ThinnedClock { position, pending })
            }
            _ => return Err(Error::Snapshot("clock kind does not match engine mode")),
        };
        Ok(Engine {
            geometry,
            state,
            energy,
            forced,
            ties,
            log,
            clock,
            mode: snap.mode,
            seed: snap.seed,
            engine_key: stream_key(snap.seed, StreamClass::Engine, 0),
            time: snap.time,
        })
    }
}
