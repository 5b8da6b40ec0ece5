//! Slab lattice `S_k` with a lateral torus and free or periodic vertical
//! boundary.
//!
//! Sites are indexed densely with the level `z` varying fastest, then `x`,
//! then `y`, so the `k` spins of one column are contiguous. Every neighbor
//! relation carries a multiplicity: wrap-arounds that land on the same site
//! twice (the vertical partner for `k = 2` periodic, or a lateral partner on a
//! torus of extent 2) are merged into one entry of multiplicity 2.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Most neighbor slots any site can have: four lateral and two vertical.
pub const MAX_DEGREE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VerticalBc {
    Free,
    Periodic,
}

impl VerticalBc {
    pub fn as_str(self) -> &'static str {
        match self {
            VerticalBc::Free => "free",
            VerticalBc::Periodic => "periodic",
        }
    }
}

impl core::str::FromStr for VerticalBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(VerticalBc::Free),
            "periodic" => Ok(VerticalBc::Periodic),
            _ => Err(Error::InvalidGeometry(
                "vertical boundary must be `free` or `periodic`",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteId {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl SiteId {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        SiteId { x, y, z }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Neighbor {
    pub site: u32,
    pub mult: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlabGeometry {
    lx: u32,
    ly: u32,
    k: u32,
    vertical_bc: VerticalBc,
    adjacency: Vec<Neighbor>,
    degree: Vec<u8>,
}

impl SlabGeometry {
    /// Builds the lattice and its neighbor table.
    ///
    /// Lateral extents must be at least 2 and the slab width at least 2.
    pub fn new(lx: u32, ly: u32, k: u32, vertical_bc: VerticalBc) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidGeometry("slab width k must be at least 2"));
        }
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidGeometry("lateral extents must be at least 2"));
        }
        let n = (lx as u64) * (ly as u64) * (k as u64);
        if n > u32::MAX as u64 / 2 {
            return Err(Error::InvalidGeometry("too many sites"));
        }
        let n = n as usize;
        let mut geom = SlabGeometry {
            lx,
            ly,
            k,
            vertical_bc,
            adjacency: Vec::with_capacity(n * MAX_DEGREE),
            degree: Vec::with_capacity(n),
        };
        for i in 0..n {
            let s = geom.site(i);
            let mut slots = [Neighbor { site: 0, mult: 0 }; MAX_DEGREE];
            let mut len = 0usize;
            let mut push = |t: SiteId| {
                let idx = geom.index_unchecked(t) as u32;
                if let Some(slot) = slots[..len].iter_mut().find(|nb| nb.site == idx) {
                    slot.mult += 1;
                } else {
                    slots[len] = Neighbor { site: idx, mult: 1 };
                    len += 1;
                }
            };
            push(SiteId::new((s.x + 1) % lx, s.y, s.z));
            push(SiteId::new((s.x + lx - 1) % lx, s.y, s.z));
            push(SiteId::new(s.x, (s.y + 1) % ly, s.z));
            push(SiteId::new(s.x, (s.y + ly - 1) % ly, s.z));
            match vertical_bc {
                VerticalBc::Periodic => {
                    push(SiteId::new(s.x, s.y, (s.z + 1) % k));
                    push(SiteId::new(s.x, s.y, (s.z + k - 1) % k));
                }
                VerticalBc::Free => {
                    if s.z + 1 < k {
                        push(SiteId::new(s.x, s.y, s.z + 1));
                    }
                    if s.z > 0 {
                        push(SiteId::new(s.x, s.y, s.z - 1));
                    }
                }
            }
            geom.adjacency.extend_from_slice(&slots);
            geom.degree.push(len as u8);
        }
        Ok(geom)
    }

    pub fn lx(&self) -> u32 {
        self.lx
    }

    pub fn ly(&self) -> u32 {
        self.ly
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn vertical_bc(&self) -> VerticalBc {
        self.vertical_bc
    }

    pub fn num_sites(&self) -> usize {
        self.degree.len()
    }

    pub fn num_columns(&self) -> usize {
        (self.lx * self.ly) as usize
    }

    pub fn contains(&self, s: SiteId) -> bool {
        s.x < self.lx && s.y < self.ly && s.z < self.k
    }

    pub fn index(&self, s: SiteId) -> Result<usize> {
        if self.contains(s) {
            Ok(self.index_unchecked(s))
        } else {
            Err(Error::InvalidSite {
                x: s.x,
                y: s.y,
                z: s.z,
            })
        }
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, s: SiteId) -> usize {
        ((s.y as usize * self.lx as usize) + s.x as usize) * self.k as usize + s.z as usize
    }

    /// Index of the level-0 site of column `(x, y)`; the column occupies the
    /// next `k` indices.
    #[inline]
    pub fn column_start(&self, x: u32, y: u32) -> usize {
        (y as usize * self.lx as usize + x as usize) * self.k as usize
    }

    pub fn site(&self, index: usize) -> SiteId {
        let k = self.k as usize;
        let lx = self.lx as usize;
        let z = index % k;
        let col = index / k;
        SiteId::new((col % lx) as u32, (col / lx) as u32, z as u32)
    }

    /// Neighbor table entry for a dense index.
    #[inline]
    pub fn neighbors_of(&self, index: usize) -> &[Neighbor] {
        let start = index * MAX_DEGREE;
        &self.adjacency[start..start + self.degree[index] as usize]
    }

    pub fn neighbors(&self, s: SiteId) -> Result<Vec<(SiteId, u8)>> {
        let i = self.index(s)?;
        Ok(self
            .neighbors_of(i)
            .iter()
            .map(|nb| (self.site(nb.site as usize), nb.mult))
            .collect())
    }

    #[inline]
    pub fn weighted_degree_of(&self, index: usize) -> i32 {
        self.neighbors_of(index)
            .iter()
            .map(|nb| nb.mult as i32)
            .sum()
    }

    pub fn weighted_degree(&self, s: SiteId) -> Result<i32> {
        Ok(self.weighted_degree_of(self.index(s)?))
    }

    /// Number of edges counted with multiplicity.
    pub fn total_edge_multiplicity(&self) -> u64 {
        let twice: u64 = (0..self.num_sites())
            .map(|i| self.weighted_degree_of(i) as u64)
            .sum();
        twice / 2
    }

    /// Translates a site laterally on the torus.
    pub fn shift(&self, s: SiteId, dx: i64, dy: i64) -> SiteId {
        let x = (s.x as i64 + dx).rem_euclid(self.lx as i64) as u32;
        let y = (s.y as i64 + dy).rem_euclid(self.ly as i64) as u32;
        SiteId::new(x, y, s.z)
    }
}
