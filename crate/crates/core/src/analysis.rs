//! Observables over runs: the η column field and its clusters, dyadic-window
//! fixation census, geometry of non-fixated columns, and the central-site
//! fixation estimate.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{window_bounds, FlipLog};
use crate::geometry::SlabGeometry;
use crate::spin::{Eta, SpinConfig};
use crate::stats::{wilson_interval, Z95};
use crate::{Error, Result};

/// Lateral cell `(x, y)`.
pub type Cell = (u32, u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaField {
    lx: u32,
    ly: u32,
    values: Vec<u8>,
    time_bits: u64,
}

impl EtaField {
    /// Builds a field directly from values in row-major order (`x` fastest).
    pub fn from_values(lx: u32, ly: u32, values: Vec<u8>, time: f64) -> Result<Self> {
        if values.len() != (lx * ly) as usize || values.iter().any(|&v| v > 2) {
            return Err(Error::InvalidGeometry(
                "eta values must be 0, 1 or 2, one per column",
            ));
        }
        Ok(EtaField {
            lx,
            ly,
            values,
            time_bits: time.to_bits(),
        })
    }

    pub fn lx(&self) -> u32 {
        self.lx
    }

    pub fn ly(&self) -> u32 {
        self.ly
    }

    pub fn time(&self) -> f64 {
        f64::from_bits(self.time_bits)
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.values[(y * self.lx + x) as usize]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn count(&self, r: u8) -> usize {
        self.values.iter().filter(|&&v| v == r).count()
    }
}

pub fn eta_snapshot(c: &SpinConfig, time: f64) -> Result<EtaField> {
    let g = c.geometry();
    let mut values = Vec::with_capacity(g.num_columns());
    for y in 0..g.ly() {
        for x in 0..g.lx() {
            values.push(c.classify_column(x, y)? as u8);
        }
    }
    EtaField::from_values(g.lx(), g.ly(), values, time)
}

/// Probability of a column state under product measure with density `p`.
pub fn eta_probability(p: f64, eta: Eta) -> f64 {
    match eta {
        // two plus, one minus in a fixed arrangement
        Eta::One | Eta::Two => p * p * (1.0 - p),
        Eta::Zero => 1.0 - 2.0 * p * p * (1.0 - p),
    }
}

/// Axis-aligned lateral rectangle; no wrap-around.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Region {
    pub fn full(lx: u32, ly: u32) -> Self {
        Region {
            x0: 0,
            y0: 0,
            width: lx,
            height: ly,
        }
    }

    pub fn contains(&self, (x, y): Cell) -> bool {
        x >= self.x0 && y >= self.y0 && x - self.x0 < self.width && y - self.y0 < self.height
    }

    fn local(&self, (x, y): Cell) -> usize {
        ((y - self.y0) * self.width + (x - self.x0)) as usize
    }

    fn cell(&self, i: usize) -> Cell {
        let i = i as u32;
        (self.x0 + i % self.width, self.y0 + i / self.width)
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] as usize != a {
            let grand = self.parent[self.parent[a] as usize];
            self.parent[a] = grand;
            a = grand as usize;
        }
        a
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }
}

const NONE: u32 = u32::MAX;

/// Component labels of type-`r` columns inside a region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabeling {
    region: Region,
    r: u8,
    star: bool,
    labels: Vec<u32>,
    count: usize,
}

impl ClusterLabeling {
    pub fn region(&self) -> Region {
        self.region
    }

    pub fn r(&self) -> u8 {
        self.r
    }

    pub fn star(&self) -> bool {
        self.star
    }

    pub fn num_components(&self) -> usize {
        self.count
    }

    pub fn component(&self, cell: Cell) -> Option<u32> {
        if !self.region.contains(cell) {
            return None;
        }
        let l = self.labels[self.region.local(cell)];
        (l != NONE).then_some(l)
    }

    /// Components as sorted cell lists, indexed by component id.
    pub fn clusters(&self) -> Vec<Vec<Cell>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NONE {
                out[l as usize].push(self.region.cell(i));
            }
        }
        for c in &mut out {
            c.sort_unstable();
        }
        out
    }

    /// Whether some cell of `u` and some cell of `v` lie in the same component.
    /// Cells that are not type `r` belong to no component.
    pub fn is_connected(&self, u: &[Cell], v: &[Cell]) -> bool {
        let ids: Vec<u32> = u.iter().filter_map(|&c| self.component(c)).collect();
        v.iter()
            .filter_map(|&c| self.component(c))
            .any(|id| ids.contains(&id))
    }
}

fn lateral_offsets(star: bool) -> &'static [(i32, i32)] {
    if star {
        &[
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ]
    } else {
        &[(1, 0), (-1, 0), (0, 1), (0, -1)]
    }
}

/// Labels connected components of type-`r` columns inside `region`, using
/// `‖·‖₁ = 1` adjacency, or `‖·‖∞ = 1` when `star` is set.
pub fn label_clusters(f: &EtaField, r: u8, star: bool, region: Region) -> Result<ClusterLabeling> {
    if region.width == 0
        || region.height == 0
        || region.x0 + region.width > f.lx
        || region.y0 + region.height > f.ly
    {
        return Err(Error::InvalidGeometry("region exceeds the lateral extent"));
    }
    let n = (region.width * region.height) as usize;
    let member = |i: usize| {
        let (x, y) = region.cell(i);
        f.get(x, y) == r
    };
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if !member(i) {
            continue;
        }
        let (x, y) = region.cell(i);
        for &(dx, dy) in lateral_offsets(star) {
            let (nx, ny) = (x as i64 + dx as i64, y as i64 + dy as i64);
            if nx < 0 || ny < 0 {
                continue;
            }
            let nc = (nx as u32, ny as u32);
            if region.contains(nc) {
                let j = region.local(nc);
                if member(j) {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut labels = vec![NONE; n];
    let mut root_label = BTreeMap::new();
    for (i, label) in labels.iter_mut().enumerate() {
        if member(i) {
            let root = uf.find(i);
            let next = root_label.len() as u32;
            *label = *root_label.entry(root).or_insert(next);
        }
    }
    Ok(ClusterLabeling {
        region,
        r,
        star,
        labels,
        count: root_label.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrentCluster {
    pub cells: Vec<Cell>,
    pub occurrences: usize,
    /// No other returned set is a proper subset of this one.
    pub minimal: bool,
}

/// Sets that appear as a whole cluster (restricted to `region`) in at least
/// `min_occurrences` snapshots.
pub fn recurrent_cluster_census(
    snapshots: &[EtaField],
    region: Region,
    r: u8,
    star: bool,
    min_occurrences: usize,
) -> Result<Vec<RecurrentCluster>> {
    let mut counts: BTreeMap<Vec<Cell>, usize> = BTreeMap::new();
    for f in snapshots {
        for c in label_clusters(f, r, star, region)?.clusters() {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    let qualifying: Vec<(Vec<Cell>, usize)> = counts
        .into_iter()
        .filter(|(_, n)| *n >= min_occurrences.max(1))
        .collect();
    let is_proper_subset =
        |a: &[Cell], b: &[Cell]| a.len() < b.len() && a.iter().all(|c| b.binary_search(c).is_ok());
    Ok(qualifying
        .iter()
        .map(|(cells, n)| RecurrentCluster {
            minimal: !qualifying
                .iter()
                .any(|(other, _)| is_proper_subset(other, cells)),
            cells: cells.clone(),
            occurrences: *n,
        })
        .collect())
}

/// A state recorded during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: SpinConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowStat {
    pub j: usize,
    /// Fraction of sites with at least one flip in the window.
    pub active_fraction: f64,
    /// Fraction of monochromatic columns at the window's end, when a snapshot
    /// exists for that time.
    pub mono_fraction: Option<f64>,
    pub energy_lowering_flips: u64,
    /// Largest torus cluster (in columns) of columns with a flip in the window.
    pub largest_active_cluster: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixationCensus {
    pub lx: u32,
    pub ly: u32,
    pub k: u32,
    pub windows: Vec<WindowStat>,
    /// Per site: flipped during the last complete window.
    pub final_active: Vec<bool>,
}

impl FixationCensus {
    pub fn final_window(&self) -> Option<&WindowStat> {
        self.windows.last()
    }

    /// Columns containing at least one site active in the final window.
    pub fn final_active_columns(&self) -> Vec<bool> {
        let k = self.k as usize;
        self.final_active
            .chunks(k)
            .map(|col| col.iter().any(|&a| a))
            .collect()
    }
}

/// Number of dyadic windows that end no later than `horizon`.
pub fn complete_windows(horizon: f64) -> usize {
    (0..)
        .take_while(|&j| window_bounds(j).1 <= horizon * (1.0 + 1e-12))
        .count()
}

fn columns_active_in(log: &FlipLog, j: usize, k: usize) -> Vec<bool> {
    match log.windows.get(j) {
        Some(w) => w
            .flips
            .chunks(k)
            .map(|col| col.iter().any(|&c| c > 0))
            .collect(),
        None => vec![false; log.num_sites() / k],
    }
}

pub fn fixation_census(
    log: &FlipLog,
    geometry: &SlabGeometry,
    snapshots: &[Snapshot],
    horizon: f64,
) -> FixationCensus {
    let n = geometry.num_sites();
    let k = geometry.k() as usize;
    let windows = complete_windows(horizon);
    let stats = (0..windows)
        .map(|j| {
            let active = log
                .windows
                .get(j)
                .map_or(0, |w| w.flips.iter().filter(|&&c| c > 0).count());
            let end = window_bounds(j).1;
            let mono_fraction = snapshots
                .iter()
                .find(|s| (s.time - end).abs() <= 1e-9 * end)
                .map(|s| s.state.monochromatic_fraction());
            let cols = columns_active_in(log, j, k);
            let largest = torus_clusters(&cols, geometry.lx(), geometry.ly())
                .sizes
                .into_iter()
                .max()
                .unwrap_or(0);
            WindowStat {
                j,
                active_fraction: active as f64 / n as f64,
                mono_fraction,
                energy_lowering_flips: log.window_energy_lowering(j),
                largest_active_cluster: largest,
            }
        })
        .collect();
    let final_active = match windows.checked_sub(1).and_then(|j| log.windows.get(j)) {
        Some(w) => w.flips.iter().map(|&c| c > 0).collect(),
        None => vec![false; n],
    };
    FixationCensus {
        lx: geometry.lx(),
        ly: geometry.ly(),
        k: geometry.k(),
        windows: stats,
        final_active,
    }
}

struct TorusClusters {
    sizes: Vec<usize>,
    wraps: bool,
}

/// Nearest-neighbor clusters of marked cells on the `lx × ly` torus, with
/// detection of clusters that wind around it.
fn torus_clusters(marked: &[bool], lx: u32, ly: u32) -> TorusClusters {
    let n = marked.len();
    let mut unwrapped: Vec<Option<(i64, i64)>> = vec![None; n];
    let mut sizes = Vec::new();
    let mut wraps = false;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !marked[start] || unwrapped[start].is_some() {
            continue;
        }
        unwrapped[start] = Some(((start as u32 % lx) as i64, (start as u32 / lx) as i64));
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (ux, uy) = unwrapped[i].expect("visited");
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (vx, vy) = (ux + dx, uy + dy);
                let j = (vy.rem_euclid(ly as i64) * lx as i64 + vx.rem_euclid(lx as i64)) as usize;
                if !marked[j] {
                    continue;
                }
                match unwrapped[j] {
                    None => {
                        unwrapped[j] = Some((vx, vy));
                        queue.push_back(j);
                    }
                    Some(prev) => {
                        if prev != (vx, vy) {
                            wraps = true;
                        }
                    }
                }
            }
        }
        sizes.push(size);
    }
    TorusClusters { sizes, wraps }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonFixatedGeometry {
    /// Cluster size (in columns) to number of clusters.
    pub histogram: BTreeMap<usize, usize>,
    /// Largest cluster size over the number of columns.
    pub largest_fraction: f64,
    /// Some cluster winds around the torus.
    pub spans_torus: bool,
}

/// Lateral cluster statistics of columns holding a site active in the final
/// window.
pub fn nonfixated_geometry(census: &FixationCensus) -> NonFixatedGeometry {
    let cols = census.final_active_columns();
    let tc = torus_clusters(&cols, census.lx, census.ly);
    let mut histogram = BTreeMap::new();
    for &s in &tc.sizes {
        *histogram.entry(s).or_insert(0) += 1;
    }
    let largest = tc.sizes.iter().copied().max().unwrap_or(0);
    NonFixatedGeometry {
        histogram,
        largest_fraction: largest as f64 / cols.len().max(1) as f64,
        spans_torus: tc.wraps,
    }
}

/// Central level `⌊(k−1)/2⌋` of a slab.
pub fn central_level(k: u32) -> u32 {
    (k - 1) / 2
}

/// Whether the central-level site of column `(x, y)` made no flip in
/// `[horizon/2, horizon]`. A zero horizon leaves no window to flip in.
pub fn central_site_fixated(log: &FlipLog, g: &SlabGeometry, x: u32, y: u32, horizon: f64) -> bool {
    if horizon <= 0.0 {
        return true;
    }
    let i = g.column_start(x, y) + central_level(g.k()) as usize;
    log.total_flips[i] == 0 || log.last_flip_time[i] < horizon / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentralEstimate {
    pub k: u32,
    pub replicas: u64,
    pub fixated: u64,
    pub estimate: f64,
    /// 95% Wilson interval.
    pub ci: (f64, f64),
}

/// Groups `(k, fixated)` replica outcomes by `k`.
pub fn central_site_fixation_probability(samples: &[(u32, bool)]) -> Vec<CentralEstimate> {
    let mut by_k: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for &(k, fixated) in samples {
        let e = by_k.entry(k).or_insert((0, 0));
        e.0 += 1;
        e.1 += fixated as u64;
    }
    by_k.into_iter()
        .map(|(k, (n, f))| CentralEstimate {
            k,
            replicas: n,
            fixated: f,
            estimate: f as f64 / n as f64,
            ci: wilson_interval(f, n, Z95),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Engine, EngineMode};
    use crate::geometry::{SiteId, VerticalBc};
    use crate::spin::Spin;
    use alloc::sync::Arc;
    use proptest::prelude::*;

    fn field(lx: u32, ly: u32, cells: &[(u32, u32, u8)]) -> EtaField {
        let mut v = vec![0u8; (lx * ly) as usize];
        for &(x, y, r) in cells {
            v[(y * lx + x) as usize] = r;
        }
        EtaField::from_values(lx, ly, v, 0.0).unwrap()
    }

    /// Reachability by repeated relaxation, independent of the union-find path.
    fn brute_force_same(f: &EtaField, r: u8, star: bool, a: Cell, b: Cell) -> bool {
        let (lx, ly) = (f.lx(), f.ly());
        if f.get(a.0, a.1) != r || f.get(b.0, b.1) != r {
            return false;
        }
        let mut reach = vec![false; (lx * ly) as usize];
        reach[(a.1 * lx + a.0) as usize] = true;
        loop {
            let mut changed = false;
            for y in 0..ly {
                for x in 0..lx {
                    if reach[(y * lx + x) as usize] || f.get(x, y) != r {
                        continue;
                    }
                    let adjacent = (0..ly).any(|y2| {
                        (0..lx).any(|x2| {
                            let (dx, dy) =
                                ((x as i32 - x2 as i32).abs(), (y as i32 - y2 as i32).abs());
                            let near = if star { dx.max(dy) == 1 } else { dx + dy == 1 };
                            near && reach[(y2 * lx + x2) as usize]
                        })
                    });
                    if adjacent {
                        reach[(y * lx + x) as usize] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        reach[(b.1 * lx + b.0) as usize]
    }

    #[test]
    fn eta_of_uniform_and_single_column() {
        let g = Arc::new(SlabGeometry::new(6, 6, 3, VerticalBc::Periodic).unwrap());
        let mut c = SpinConfig::uniform(g.clone(), Spin::Plus);
        let f = eta_snapshot(&c, 0.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 0));
        c.set_at(SiteId::new(2, 4, 2), Spin::Minus).unwrap();
        let f = eta_snapshot(&c, 1.5).unwrap();
        assert_eq!(f.count(1), 1);
        assert_eq!(f.get(2, 4), 1);
        assert_eq!(f.time(), 1.5);
        let g4 = Arc::new(SlabGeometry::new(6, 6, 4, VerticalBc::Periodic).unwrap());
        assert!(eta_snapshot(&SpinConfig::uniform(g4, Spin::Plus), 0.0).is_err());
    }

    #[test]
    fn diagonal_pair() {
        let f = field(5, 5, &[(1, 1, 1), (2, 2, 1)]);
        let full = Region::full(5, 5);
        let plain = label_clusters(&f, 1, false, full).unwrap();
        assert_eq!(plain.num_components(), 2);
        let star = label_clusters(&f, 1, true, full).unwrap();
        assert_eq!(star.num_components(), 1);
        assert!(star.is_connected(&[(1, 1)], &[(2, 2)]));
        assert!(!plain.is_connected(&[(1, 1)], &[(2, 2)]));
    }

    #[test]
    fn connectivity_edge_cases() {
        let f = field(4, 4, &[(1, 1, 2)]);
        let l = label_clusters(&f, 2, false, Region::full(4, 4)).unwrap();
        assert!(l.is_connected(&[(1, 1)], &[(1, 1)]));
        // not type r: empty cluster
        assert!(!l.is_connected(&[(0, 0)], &[(0, 0)]));
        let full_box = EtaField::from_values(6, 6, vec![1; 36], 0.0).unwrap();
        let l = label_clusters(&full_box, 1, false, Region::full(6, 6)).unwrap();
        assert!(l.is_connected(&[(0, 0)], &[(5, 5)]));
        // region boundary cuts a path
        let sub = Region {
            x0: 0,
            y0: 0,
            width: 3,
            height: 3,
        };
        let l = label_clusters(&full_box, 1, false, sub).unwrap();
        assert!(!l.is_connected(&[(0, 0)], &[(5, 5)]));
        assert!(label_clusters(
            &full_box,
            1,
            false,
            Region {
                x0: 4,
                y0: 0,
                width: 3,
                height: 1
            }
        )
        .is_err());
    }

    #[test]
    fn labeling_matches_brute_force_on_10x10() {
        let mut state = 12345u64;
        for trial in 0..40 {
            let mut v = Vec::new();
            for _ in 0..100 {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                v.push(((state >> 33) % 3) as u8);
            }
            let f = EtaField::from_values(10, 10, v, 0.0).unwrap();
            let r = (trial % 3) as u8;
            let star = trial % 2 == 0;
            let l = label_clusters(&f, r, star, Region::full(10, 10)).unwrap();
            for a in 0..100u32 {
                for b in (a..100u32).step_by(7) {
                    let (ca, cb) = ((a % 10, a / 10), (b % 10, b / 10));
                    let same = l.component(ca).is_some() && l.component(ca) == l.component(cb);
                    assert_eq!(same, brute_force_same(&f, r, star, ca, cb));
                }
            }
        }
    }

    #[test]
    fn recurrence_census() {
        let v = field(4, 4, &[(1, 1, 1), (1, 2, 1)]);
        let v_small = field(4, 4, &[(1, 1, 1)]);
        let region = Region::full(4, 4);
        let constant = vec![v.clone(); 6];
        let out = recurrent_cluster_census(&constant, region, 1, false, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].occurrences, 6);
        assert!(out[0].minimal);
        let alternating: Vec<EtaField> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    v.clone()
                } else {
                    v_small.clone()
                }
            })
            .collect();
        let out = recurrent_cluster_census(&alternating, region, 1, false, 3).unwrap();
        assert_eq!(out.len(), 2);
        let big = out.iter().find(|c| c.cells.len() == 2).unwrap();
        let small = out.iter().find(|c| c.cells.len() == 1).unwrap();
        assert!(small.minimal && !big.minimal);
        let out = recurrent_cluster_census(&alternating, region, 1, false, 6).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn census_of_quiescent_run() {
        let g = Arc::new(SlabGeometry::new(8, 8, 3, VerticalBc::Periodic).unwrap());
        let mut e = Engine::new(
            SpinConfig::uniform(g.clone(), Spin::Plus),
            EngineMode::Thinned,
            1,
        );
        e.run_until(64.0);
        let snaps: Vec<Snapshot> = (0..6)
            .map(|j| Snapshot {
                time: window_bounds(j).1,
                state: e.state().clone(),
            })
            .collect();
        let census = fixation_census(e.log(), &g, &snaps, 64.0);
        assert_eq!(census.windows.len(), 6);
        for w in &census.windows {
            assert_eq!(w.active_fraction, 0.0);
            assert_eq!(w.mono_fraction, Some(1.0));
            assert_eq!(w.largest_active_cluster, 0);
        }
        let geo = nonfixated_geometry(&census);
        assert!(geo.histogram.is_empty());
        assert!(!geo.spans_torus);
    }

    #[test]
    fn census_monotonicity_property() {
        let g = Arc::new(SlabGeometry::new(16, 16, 3, VerticalBc::Free).unwrap());
        let c = SpinConfig::init_product(g.clone(), 0.5, 2).unwrap();
        let mut e = Engine::new(c, EngineMode::Thinned, 2);
        e.run_until(256.0);
        let log = e.log();
        let windows = complete_windows(256.0);
        assert_eq!(windows, 8);
        for i in 0..g.num_sites() {
            for j in 1..windows {
                if (j..windows).all(|w| log.flips_in_window(w, i) == 0) && log.total_flips[i] > 0 {
                    assert!(log.last_flip_time[i] < window_bounds(j).0);
                }
            }
        }
    }

    #[test]
    fn torus_cluster_wrapping() {
        let lx = 5;
        let mut marked = vec![false; 25];
        for x in 0..5 {
            marked[(2 * lx + x) as usize] = true;
        }
        let tc = torus_clusters(&marked, 5, 5);
        assert_eq!(tc.sizes, vec![5]);
        assert!(tc.wraps);
        marked[(2 * lx + 4) as usize] = false;
        let tc = torus_clusters(&marked, 5, 5);
        assert!(!tc.wraps);
        assert_eq!(tc.sizes, vec![4]);
        // wraps across the seam without spanning
        let mut m = vec![false; 25];
        m[(2 * lx) as usize] = true;
        m[(2 * lx + 4) as usize] = true;
        let tc = torus_clusters(&m, 5, 5);
        assert_eq!(tc.sizes, vec![2]);
        assert!(!tc.wraps);
    }

    #[test]
    fn central_site() {
        let g = SlabGeometry::new(4, 4, 5, VerticalBc::Free).unwrap();
        let mut log = FlipLog::new(g.num_sites());
        let i = g.column_start(1, 1) + 2;
        assert!(central_site_fixated(&log, &g, 1, 1, 0.0));
        log.total_flips[i] = 1;
        log.last_flip_time[i] = 60.0;
        assert!(!central_site_fixated(&log, &g, 1, 1, 100.0));
        assert!(central_site_fixated(&log, &g, 1, 1, 200.0));
        let est = central_site_fixation_probability(&[(2, true), (2, true), (4, false), (4, true)]);
        assert_eq!(est.len(), 2);
        assert_eq!(est[0].estimate, 1.0);
        assert_eq!(est[1].estimate, 0.5);
        assert!(est[1].ci.0 < 0.5 && est[1].ci.1 > 0.5);
    }

    proptest! {
        #[test]
        fn labeling_partition_is_consistent(seed in any::<u64>(), r in 0u8..3, star in any::<bool>()) {
            let mut s = seed;
            let v: Vec<u8> = (0..36).map(|_| { s = s.wrapping_mul(6364136223846793005).wrapping_add(1); ((s >> 40) % 3) as u8 }).collect();
            let f = EtaField::from_values(6, 6, v, 0.0).unwrap();
            let l = label_clusters(&f, r, star, Region::full(6, 6)).unwrap();
            let total: usize = l.clusters().iter().map(|c| c.len()).sum();
            prop_assert_eq!(total, f.count(r));
            for a in 0..36u32 { for b in 0..36u32 {
                let (ca, cb) = ((a % 6, a / 6), (b % 6, b / 6));
                let same = l.component(ca).is_some() && l.component(ca) == l.component(cb);
                prop_assert_eq!(same, brute_force_same(&f, r, star, ca, cb));
            }}
        }

        #[test]
        fn eta_of_global_flip_counts_flipped_columns(seed in any::<u64>(), p in 0.05f64..0.95) {
            let g = Arc::new(SlabGeometry::new(9, 7, 3, VerticalBc::Periodic).unwrap());
            let c = SpinConfig::init_product(g, p, seed).unwrap();
            let flipped = eta_snapshot(&c.global_flip(), 0.0).unwrap();
            let mut mmp = 0;
            let mut mpm = 0;
            for y in 0..7 {
                for x in 0..9 {
                    let col: Vec<Spin> = c.column(x, y).collect();
                    mmp += usize::from(col == [Spin::Minus, Spin::Minus, Spin::Plus]);
                    mpm += usize::from(col == [Spin::Minus, Spin::Plus, Spin::Minus]);
                }
            }
            prop_assert_eq!(flipped.count(1), mmp);
            prop_assert_eq!(flipped.count(2), mpm);
        }
    }
}
