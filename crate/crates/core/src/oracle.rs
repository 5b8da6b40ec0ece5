//! Exact analysis of tiny systems and a cache-free reference simulator.
//!
//! For at most [`MAX_SITES`] sites the whole state space is enumerated. The
//! absorption law from an initial distribution is computed by pushing
//! probability mass through the strongly connected components of the jump
//! chain in topological order; inside each component the occupation measure
//! solves a small dense linear system.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ring_interval, tie_coin, Engine, EngineMode, Event, FlipLog};
use crate::geometry::{SlabGeometry, VerticalBc};
use crate::rng::replica_seed;
use crate::spin::{Spin, SpinConfig};
use crate::{Error, Result};

pub const MAX_SITES: usize = 12;

/// A fully periodic slab small enough to enumerate. State `s` has bit `i`
/// set when site `i` is `+1`.
#[derive(Clone, Debug)]
pub struct TinySystem {
    geometry: Arc<SlabGeometry>,
}

impl TinySystem {
    pub fn new(lx: u32, ly: u32, k: u32) -> Result<Self> {
        let sites = (lx as usize) * (ly as usize) * (k as usize);
        if sites > MAX_SITES {
            return Err(Error::SystemTooLarge {
                sites,
                max: MAX_SITES,
            });
        }
        Ok(TinySystem {
            geometry: Arc::new(SlabGeometry::new(lx, ly, k, VerticalBc::Periodic)?),
        })
    }

    pub fn geometry(&self) -> &Arc<SlabGeometry> {
        &self.geometry
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    pub fn num_states(&self) -> usize {
        1 << self.num_sites()
    }

    pub fn encode(&self, c: &SpinConfig) -> u32 {
        (0..self.num_sites())
            .filter(|&i| c.get(i) == Spin::Plus)
            .fold(0, |acc, i| acc | (1 << i))
    }

    pub fn decode(&self, state: u32) -> SpinConfig {
        let mut c = SpinConfig::uniform(self.geometry.clone(), Spin::Minus);
        for i in 0..self.num_sites() {
            if state >> i & 1 == 1 {
                c.set(i, Spin::Plus);
            }
        }
        c
    }

    pub fn site_energy(&self, state: u32, i: usize) -> i32 {
        let v = |j: usize| ((state >> j & 1) as i32) * 2 - 1;
        -v(i)
            * self
                .geometry
                .neighbors_of(i)
                .iter()
                .map(|nb| nb.mult as i32 * v(nb.site as usize))
                .sum::<i32>()
    }

    /// Product measure with density `p` over all states.
    pub fn product_distribution(&self, p: f64) -> Result<Vec<f64>> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        let n = self.num_sites() as u32;
        Ok((0..self.num_states() as u32)
            .map(|s| {
                let plus = s.count_ones() as i32;
                libm::pow(p, plus as f64) * libm::pow(1.0 - p, (n as i32 - plus) as f64)
            })
            .collect())
    }
}

/// Off-diagonal rates per state; the diagonal is the negative row sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    rows: Vec<Vec<(u32, f64)>>,
}

impl Generator {
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: u32) -> &[(u32, f64)] {
        &self.rows[state as usize]
    }

    pub fn exit_rate(&self, state: u32) -> f64 {
        self.rows[state as usize].iter().map(|&(_, r)| r).sum()
    }

    pub fn diagonal(&self, state: u32) -> f64 {
        -self.exit_rate(state)
    }

    pub fn rate(&self, from: u32, to: u32) -> f64 {
        if from == to {
            return self.diagonal(from);
        }
        self.rows[from as usize]
            .iter()
            .find(|&&(t, _)| t == to)
            .map_or(0.0, |&(_, r)| r)
    }

    pub fn is_absorbing(&self, state: u32) -> bool {
        self.rows[state as usize].is_empty()
    }

    pub fn absorbing_states(&self) -> Vec<u32> {
        (0..self.num_states() as u32)
            .filter(|&s| self.is_absorbing(s))
            .collect()
    }
}

/// Rate 1 to flip a site with positive energy, 1/2 on a tie, none otherwise.
pub fn build_generator(sys: &TinySystem) -> Generator {
    let n = sys.num_sites();
    let rows = (0..sys.num_states() as u32)
        .map(|s| {
            (0..n)
                .filter_map(|i| {
                    let e = sys.site_energy(s, i);
                    let to = s ^ (1 << i);
                    match e.cmp(&0) {
                        core::cmp::Ordering::Greater => Some((to, 1.0)),
                        core::cmp::Ordering::Equal => Some((to, 0.5)),
                        core::cmp::Ordering::Less => None,
                    }
                })
                .collect()
        })
        .collect();
    Generator { rows }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionResult {
    /// Absorbing states reached with positive probability.
    pub probabilities: Vec<(u32, f64)>,
    /// Expected time to absorption of the continuous-time chain.
    pub expected_time: f64,
    /// Every absorbing state of the system.
    pub absorbing_states: Vec<u32>,
}

impl AbsorptionResult {
    pub fn probability(&self, state: u32) -> f64 {
        self.probabilities
            .iter()
            .find(|&&(s, _)| s == state)
            .map_or(0.0, |&(_, p)| p)
    }
}

/// Tarjan's algorithm without recursion. Components come out sinks first.
fn strongly_connected_components(g: &Generator) -> Vec<Vec<u32>> {
    const UNSEEN: u32 = u32::MAX;
    let n = g.num_states();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut calls: Vec<(u32, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut out = Vec::new();
    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        calls.push((root, 0));
        while let Some(&mut (v, ref mut edge)) = calls.last_mut() {
            let row = g.row(v);
            if *edge < row.len() {
                let w = row[*edge].0;
                *edge += 1;
                if index[w as usize] == UNSEEN {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    calls.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w as usize] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(comp);
            }
        }
    }
    out
}

pub fn absorption_analysis(
    sys: &TinySystem,
    gen: &Generator,
    initial: &[f64],
) -> Result<AbsorptionResult> {
    let n = gen.num_states();
    if n != sys.num_states() {
        return Err(Error::InvalidDistribution);
    }
    absorb(gen, initial)
}

fn absorb(gen: &Generator, initial: &[f64]) -> Result<AbsorptionResult> {
    let n = gen.num_states();
    if initial.len() != n
        || initial.iter().any(|p| p.is_nan() || *p < 0.0)
        || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidDistribution);
    }
    let comps = strongly_connected_components(gen);
    let mut comp_of = vec![0usize; n];
    for (c, states) in comps.iter().enumerate() {
        for &s in states {
            comp_of[s as usize] = c;
        }
    }
    let mut mass = initial.to_vec();
    let mut absorbed = BTreeMap::new();
    let mut expected_time = 0.0;
    for (c, states) in comps.iter().enumerate().rev() {
        let incoming: f64 = states.iter().map(|&s| mass[s as usize]).sum();
        if incoming == 0.0 {
            continue;
        }
        if states.len() == 1 && gen.is_absorbing(states[0]) {
            absorbed.insert(states[0], incoming);
            continue;
        }
        let leaves = states
            .iter()
            .any(|&s| gen.row(s).iter().any(|&(t, _)| comp_of[t as usize] != c));
        if !leaves {
            return Err(Error::AbsorptionNotCertain { state: states[0] });
        }
        // occupation measure m solves m (I - P_CC) = b
        let occupation: Vec<f64> = if states.len() == 1 {
            vec![incoming]
        } else {
            let local: BTreeMap<u32, usize> =
                states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let size = states.len();
            let mut a = DMatrix::<f64>::identity(size, size);
            for (i, &s) in states.iter().enumerate() {
                let q = gen.exit_rate(s);
                for &(t, r) in gen.row(s) {
                    if let Some(&j) = local.get(&t) {
                        a[(j, i)] -= r / q;
                    }
                }
            }
            let b = DVector::from_iterator(size, states.iter().map(|&s| mass[s as usize]));
            let m = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
            m.iter().copied().collect()
        };
        for (&s, &m) in states.iter().zip(&occupation) {
            let q = gen.exit_rate(s);
            expected_time += m / q;
            for &(t, r) in gen.row(s) {
                if comp_of[t as usize] != c {
                    mass[t as usize] += m * r / q;
                }
            }
        }
    }
    Ok(AbsorptionResult {
        probabilities: absorbed.into_iter().collect(),
        expected_time,
        absorbing_states: gen.absorbing_states(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveRun {
    pub state: SpinConfig,
    pub log: FlipLog,
    pub events: Vec<Event>,
    pub quiescent: bool,
}

/// Full-clock simulation recomputing every energy from scratch and scanning
/// all clocks for the next ring. Uses the same per-site streams as
/// [`EngineMode::FullClock`].
pub fn naive_simulate(initial: &SpinConfig, seed: u64, t_max: f64) -> NaiveRun {
    let n = initial.num_sites();
    let mut state = initial.clone();
    let mut log = FlipLog::new(n);
    let mut events = Vec::new();
    let mut rings = vec![0u64; n];
    let mut next: Vec<f64> = (0..n).map(|i| ring_interval(seed, i, 0)).collect();
    let mut quiescent = false;
    loop {
        if state.is_quiescent() {
            quiescent = true;
            break;
        }
        let mut site = 0;
        for i in 1..n {
            if next[i] < next[site] {
                site = i;
            }
        }
        let t = next[site];
        if t > t_max {
            break;
        }
        let ring = rings[site];
        let pre = state.energy_of(site);
        let flipped = pre > 0 || (pre == 0 && tie_coin(seed, site, ring));
        rings[site] = ring + 1;
        next[site] = t + ring_interval(seed, site, ring + 1);
        if flipped {
            state.flip(site);
            log.record(site, t, pre > 0);
        }
        events.push(Event {
            site,
            time: t,
            flipped,
            pre_energy: pre,
        });
    }
    NaiveRun {
        state,
        log,
        events,
        quiescent,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloAbsorption {
    pub replicas: u64,
    /// Runs that had not reached an absorbing state by the time cap.
    pub unabsorbed: u64,
    pub counts: BTreeMap<u32, u64>,
}

impl MonteCarloAbsorption {
    pub fn frequency(&self, state: u32) -> f64 {
        self.counts.get(&state).copied().unwrap_or(0) as f64 / self.replicas as f64
    }
}

/// Runs replicas `range` of the Monte Carlo absorption experiment. Replica
/// `r` draws its initial state and its dynamics from seeds derived from
/// `(seed, r)`, so disjoint ranges can run independently and be merged.
pub fn monte_carlo_absorption(
    sys: &TinySystem,
    p: f64,
    seed: u64,
    range: core::ops::Range<u64>,
    mode: EngineMode,
    time_cap: f64,
) -> Result<MonteCarloAbsorption> {
    let mut out = MonteCarloAbsorption {
        replicas: 0,
        unabsorbed: 0,
        counts: BTreeMap::new(),
    };
    for r in range {
        let init = SpinConfig::init_product(sys.geometry().clone(), p, replica_seed(seed, 2 * r))?;
        let mut e = Engine::new(init, mode, replica_seed(seed, 2 * r + 1));
        let summary = e.run_until(time_cap);
        out.replicas += 1;
        if summary.quiescent {
            *out.counts.entry(sys.encode(e.state())).or_insert(0) += 1;
        } else {
            out.unabsorbed += 1;
        }
    }
    Ok(out)
}

impl MonteCarloAbsorption {
    pub fn merge(mut self, other: MonteCarloAbsorption) -> Self {
        self.replicas += other.replicas;
        self.unabsorbed += other.unabsorbed;
        for (s, c) in other.counts {
            *self.counts.entry(s).or_insert(0) += c;
        }
        self
    }
}
