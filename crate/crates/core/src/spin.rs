//! Spin configurations and the from-scratch local energy.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{SiteId, SlabGeometry};
use crate::pattern::Pattern;
use crate::rng::{draw, stream_key, to_open01, StreamClass};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    #[inline]
    pub fn value(self) -> i32 {
        match self {
            Spin::Minus => -1,
            Spin::Plus => 1,
        }
    }

    #[inline]
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Minus => Spin::Plus,
            Spin::Plus => Spin::Minus,
        }
    }

    #[inline]
    pub fn from_bit(bit: bool) -> Spin {
        if bit {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Spin::Minus => '-',
            Spin::Plus => '+',
        }
    }
}

/// Column classification for three-level slabs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Eta {
    Zero = 0,
    /// Levels (0, 1, 2) read `(+, +, −)`.
    One = 1,
    /// Levels (0, 1, 2) read `(+, −, +)`.
    Two = 2,
}

/// How unspecified pattern cells are filled when embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unspecified<'a> {
    KeepBackground,
    /// Every unspecified cell adjacent to a target site takes the sign that
    /// disagrees with the majority of its adjacent targets (ties: the first
    /// target in neighbor order). Other unspecified cells keep the background.
    AdversarialFor(&'a [SiteId]),
}

/// Bit-packed spin assignment; bit set means `+1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    geometry: Arc<SlabGeometry>,
    words: Vec<u64>,
}

impl SpinConfig {
    pub fn uniform(geometry: Arc<SlabGeometry>, spin: Spin) -> Self {
        let n = geometry.num_sites();
        let fill = if spin == Spin::Plus { u64::MAX } else { 0 };
        let mut c = SpinConfig {
            geometry,
            words: vec![fill; n.div_ceil(64)],
        };
        c.clear_tail();
        c
    }

    /// Independent product measure: each site is `+1` with probability `p`.
    pub fn init_product(geometry: Arc<SlabGeometry>, p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        let mut c = SpinConfig::uniform(geometry, Spin::Minus);
        let key = stream_key(seed, StreamClass::Init, 0);
        for i in 0..c.num_sites() {
            if to_open01(draw(key, i as u64)) < p {
                c.set(i, Spin::Plus);
            }
        }
        Ok(c)
    }

    /// Rebuilds a configuration from packed words (as produced by [`words`](Self::words)).
    pub fn from_words(geometry: Arc<SlabGeometry>, words: Vec<u64>) -> Result<Self> {
        if words.len() != geometry.num_sites().div_ceil(64) {
            return Err(Error::Snapshot(
                "packed spin length does not match geometry",
            ));
        }
        let mut c = SpinConfig { geometry, words };
        let before = c.words.clone();
        c.clear_tail();
        if before != c.words {
            return Err(Error::Snapshot("bits set beyond the last site"));
        }
        Ok(c)
    }

    /// Builds a configuration from a per-site predicate.
    pub fn from_fn(geometry: Arc<SlabGeometry>, mut f: impl FnMut(SiteId) -> Spin) -> Self {
        let mut c = SpinConfig::uniform(geometry, Spin::Minus);
        for i in 0..c.num_sites() {
            let s = c.geometry.site(i);
            c.set(i, f(s));
        }
        c
    }

    fn clear_tail(&mut self) {
        let n = self.geometry.num_sites();
        if !n.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
    }

    pub fn geometry(&self) -> &Arc<SlabGeometry> {
        &self.geometry
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Spin {
        Spin::from_bit((self.words[i >> 6] >> (i & 63)) & 1 == 1)
    }

    #[inline]
    pub fn value(&self, i: usize) -> i32 {
        (((self.words[i >> 6] >> (i & 63)) & 1) as i32) * 2 - 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, spin: Spin) {
        let mask = 1u64 << (i & 63);
        match spin {
            Spin::Plus => self.words[i >> 6] |= mask,
            Spin::Minus => self.words[i >> 6] &= !mask,
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn spin_at(&self, s: SiteId) -> Result<Spin> {
        Ok(self.get(self.geometry.index(s)?))
    }

    pub fn set_at(&mut self, s: SiteId, spin: Spin) -> Result<()> {
        let i = self.geometry.index(s)?;
        self.set(i, spin);
        Ok(())
    }

    /// `−Σ σ_s σ_t` over neighbors with multiplicity: disagreements minus
    /// agreements.
    #[inline]
    pub fn energy_of(&self, i: usize) -> i32 {
        let own = self.value(i);
        let sum: i32 = self
            .geometry
            .neighbors_of(i)
            .iter()
            .map(|nb| nb.mult as i32 * self.value(nb.site as usize))
            .sum();
        -own * sum
    }

    pub fn energy(&self, s: SiteId) -> Result<i32> {
        Ok(self.energy_of(self.geometry.index(s)?))
    }

    /// A site is unstable when its energy is non-negative; only unstable sites
    /// can flip.
    #[inline]
    pub fn is_unstable_of(&self, i: usize) -> bool {
        self.energy_of(i) >= 0
    }

    pub fn is_unstable(&self, s: SiteId) -> Result<bool> {
        Ok(self.is_unstable_of(self.geometry.index(s)?))
    }

    /// No site has energy ≥ 0, so no clock ring can ever change the state.
    pub fn is_quiescent(&self) -> bool {
        (0..self.num_sites()).all(|i| self.energy_of(i) < 0)
    }

    pub fn global_flip(&self) -> SpinConfig {
        let mut c = SpinConfig {
            geometry: self.geometry.clone(),
            words: self.words.iter().map(|w| !w).collect(),
        };
        c.clear_tail();
        c
    }

    pub fn count_plus(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn magnetization(&self) -> f64 {
        let n = self.num_sites() as f64;
        (2.0 * self.count_plus() as f64 - n) / n
    }

    pub fn column(&self, x: u32, y: u32) -> impl Iterator<Item = Spin> + '_ {
        let start = self.geometry.column_start(x, y);
        (start..start + self.geometry.k() as usize).map(move |i| self.get(i))
    }

    pub fn is_monochromatic(&self, x: u32, y: u32) -> bool {
        let start = self.geometry.column_start(x, y);
        let first = self.get(start);
        (start + 1..start + self.geometry.k() as usize).all(|i| self.get(i) == first)
    }

    pub fn monochromatic_fraction(&self) -> f64 {
        let g = &self.geometry;
        let mono = (0..g.ly())
            .flat_map(|y| (0..g.lx()).map(move |x| (x, y)))
            .filter(|&(x, y)| self.is_monochromatic(x, y))
            .count();
        mono as f64 / g.num_columns() as f64
    }

    pub fn classify_column(&self, x: u32, y: u32) -> Result<Eta> {
        let k = self.geometry.k();
        if k != 3 {
            return Err(Error::WrongSlabWidth {
                expected: 3,
                found: k,
            });
        }
        if x >= self.geometry.lx() || y >= self.geometry.ly() {
            return Err(Error::InvalidSite { x, y, z: 0 });
        }
        let start = self.geometry.column_start(x, y);
        Ok(
            match (self.get(start), self.get(start + 1), self.get(start + 2)) {
                (Spin::Plus, Spin::Plus, Spin::Minus) => Eta::One,
                (Spin::Plus, Spin::Minus, Spin::Plus) => Eta::Two,
                _ => Eta::Zero,
            },
        )
    }

    /// Writes a pattern into this configuration at the pattern's anchor.
    pub fn embed_pattern(&mut self, pat: &Pattern, policy: Unspecified<'_>) -> Result<()> {
        let g = self.geometry.clone();
        pat.check_fits(&g)?;
        let mut unspecified = Vec::new();
        for (cell, spin) in pat.cells() {
            let site = pat.global_site(&g, cell);
            let i = g.index_unchecked(site);
            match spin {
                Some(s) => self.set(i, s),
                None => unspecified.push(i),
            }
        }
        if let Unspecified::AdversarialFor(targets) = policy {
            let target_idx: Vec<usize> =
                targets.iter().map(|&t| g.index(t)).collect::<Result<_>>()?;
            for i in unspecified {
                let mut vote = 0i32;
                let mut first = None;
                for nb in g.neighbors_of(i) {
                    let t = nb.site as usize;
                    if target_idx.contains(&t) {
                        let v = self.value(t);
                        vote += nb.mult as i32 * v;
                        first.get_or_insert(v);
                    }
                }
                if let Some(first) = first {
                    let against = if vote != 0 { -vote.signum() } else { -first };
                    self.set(i, Spin::from_bit(against > 0));
                }
            }
        }
        Ok(())
    }
}
