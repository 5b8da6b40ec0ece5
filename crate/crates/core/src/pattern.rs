//! Partially specified spin boxes and their ASCII file format.
//!
//! ```text
//! pattern <width> <height> <k>
//! <row y = height-1>
//! ...
//! <row y = 0>
//! ```
//!
//! Each row holds `width` cells separated by single spaces; a cell is `k`
//! characters from `+`, `-`, `?` giving levels `z = 0..k` left to right.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{SiteId, SlabGeometry};
use crate::spin::Spin;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    width: u32,
    height: u32,
    k: u32,
    /// `None` marks an unspecified spin. Same z-fastest order as the lattice.
    cells: Vec<Option<Spin>>,
    anchor: (u32, u32),
}

impl Pattern {
    pub fn blank(width: u32, height: u32, k: u32) -> Self {
        Pattern {
            width,
            height,
            k,
            cells: vec![None; (width * height * k) as usize],
            anchor: (0, 0),
        }
    }

    pub fn filled(width: u32, height: u32, k: u32, spin: Spin) -> Self {
        let mut p = Pattern::blank(width, height, k);
        p.cells.iter_mut().for_each(|c| *c = Some(spin));
        p
    }

    pub fn with_anchor(mut self, x: u32, y: u32) -> Self {
        self.anchor = (x, y);
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn anchor(&self) -> (u32, u32) {
        self.anchor
    }

    #[inline]
    fn offset(&self, x: u32, y: u32, z: u32) -> usize {
        ((y * self.width + x) * self.k + z) as usize
    }

    pub fn in_box(&self, s: SiteId) -> bool {
        s.x < self.width && s.y < self.height && s.z < self.k
    }

    pub fn get(&self, x: u32, y: u32, z: u32) -> Option<Spin> {
        self.cells[self.offset(x, y, z)]
    }

    pub fn get_site(&self, s: SiteId) -> Option<Spin> {
        if self.in_box(s) {
            self.get(s.x, s.y, s.z)
        } else {
            None
        }
    }

    pub fn set(&mut self, x: u32, y: u32, z: u32, spin: Option<Spin>) {
        let o = self.offset(x, y, z);
        self.cells[o] = spin;
    }

    /// All cells in lattice order with their pattern-local coordinates.
    pub fn cells(&self) -> impl Iterator<Item = (SiteId, Option<Spin>)> + '_ {
        let (w, k) = (self.width, self.k);
        self.cells.iter().enumerate().map(move |(i, &s)| {
            let i = i as u32;
            let z = i % k;
            let col = i / k;
            (SiteId::new(col % w, col / w, z), s)
        })
    }

    pub fn specified(&self) -> impl Iterator<Item = (SiteId, Spin)> + '_ {
        self.cells().filter_map(|(s, v)| v.map(|v| (s, v)))
    }

    pub fn count_specified(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn check_fits(&self, g: &SlabGeometry) -> Result<()> {
        if self.k != g.k() || self.width > g.lx() || self.height > g.ly() {
            return Err(Error::PatternOverflow);
        }
        if self.anchor.0 >= g.lx() || self.anchor.1 >= g.ly() {
            return Err(Error::PatternOverflow);
        }
        Ok(())
    }

    /// Lattice site of a pattern-local cell, wrapping laterally at the anchor.
    pub fn global_site(&self, g: &SlabGeometry, local: SiteId) -> SiteId {
        g.shift(
            SiteId::new(self.anchor.0, self.anchor.1, local.z),
            local.x as i64,
            local.y as i64,
        )
    }

    /// Inverse of [`global_site`](Self::global_site) for sites inside the box.
    pub fn local_site(&self, g: &SlabGeometry, global: SiteId) -> Option<SiteId> {
        let dx = (global.x + g.lx() - self.anchor.0) % g.lx();
        let dy = (global.y + g.ly() - self.anchor.1) % g.ly();
        let local = SiteId::new(dx, dy, global.z);
        self.in_box(local).then_some(local)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: &str| Error::PatternParse {
            line,
            message: String::from(message),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 4 || fields[0] != "pattern" {
            return Err(err(1, "expected `pattern <width> <height> <k>`"));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| err(1, "bad dimension"));
        let (width, height, k) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if width == 0 || height == 0 || k == 0 {
            return Err(err(1, "dimensions must be positive"));
        }
        let mut pat = Pattern::blank(width, height, k);
        for row in 0..height {
            let line_no = row as usize + 2;
            let line = lines.next().ok_or_else(|| err(line_no, "missing row"))?;
            let y = height - 1 - row;
            let cells: Vec<&str> = line.split(' ').collect();
            if cells.len() != width as usize {
                return Err(Error::PatternParse {
                    line: line_no,
                    message: format!("expected {width} cells, found {}", cells.len()),
                });
            }
            for (x, cell) in cells.iter().enumerate() {
                if cell.len() != k as usize {
                    return Err(err(line_no, "cell has wrong number of levels"));
                }
                for (z, ch) in cell.chars().enumerate() {
                    let spin = match ch {
                        '+' => Some(Spin::Plus),
                        '-' => Some(Spin::Minus),
                        '?' => None,
                        _ => return Err(err(line_no, "cells use only `+`, `-` and `?`")),
                    };
                    pat.set(x as u32, y, z as u32, spin);
                }
            }
        }
        if lines.any(|l| !l.is_empty()) {
            return Err(err(height as usize + 2, "trailing content after last row"));
        }
        Ok(pat)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("pattern {} {} {}\n", self.width, self.height, self.k);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                if x > 0 {
                    out.push(' ');
                }
                for z in 0..self.k {
                    out.push(self.get(x, y, z).map_or('?', Spin::symbol));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_orientation() {
        let text = "pattern 2 2 2\n+? --\n++ -+\n";
        let p = Pattern::parse(text).unwrap();
        assert_eq!(p.get(0, 1, 0), Some(Spin::Plus));
        assert_eq!(p.get(0, 1, 1), None);
        assert_eq!(p.get(0, 0, 1), Some(Spin::Plus));
        assert_eq!(p.get(1, 0, 0), Some(Spin::Minus));
        assert_eq!(p.get(1, 0, 1), Some(Spin::Plus));
        assert_eq!(p.to_text(), text);
        assert_eq!(p.count_specified(), 7);
    }

    #[test]
    fn parse_errors() {
        assert!(Pattern::parse("").is_err());
        assert!(Pattern::parse("pat 1 1 1\n+\n").is_err());
        assert!(Pattern::parse("pattern 2 1 1\n+\n").is_err());
        assert!(Pattern::parse("pattern 2 1 1\n+  -\n").is_err());
        assert!(Pattern::parse("pattern 1 1 2\n+x\n").is_err());
        assert!(Pattern::parse("pattern 1 2 1\n+\n").is_err());
        assert!(Pattern::parse("pattern 1 1 1\n+\n-\n").is_err());
    }

    #[test]
    fn local_global_wrap() {
        let g = SlabGeometry::new(6, 6, 2, crate::VerticalBc::Free).unwrap();
        let p = Pattern::blank(3, 3, 2).with_anchor(5, 4);
        let s = p.global_site(&g, SiteId::new(2, 2, 1));
        assert_eq!(s, SiteId::new(1, 0, 1));
        assert_eq!(p.local_site(&g, s), Some(SiteId::new(2, 2, 1)));
        assert_eq!(p.local_site(&g, SiteId::new(2, 0, 0)), None);
    }

    proptest! {
        #[test]
        fn text_round_trip(w in 1u32..6, h in 1u32..6, k in 1u32..5, seed in any::<u64>()) {
            let mut p = Pattern::blank(w, h, k);
            let mut x = seed;
            for y in 0..h { for cx in 0..w { for z in 0..k {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = match x >> 62 { 0 => None, 1 => Some(Spin::Minus), _ => Some(Spin::Plus) };
                p.set(cx, y, z, v);
            }}}
            let back = Pattern::parse(&p.to_text()).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
