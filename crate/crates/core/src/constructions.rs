//! Explicit configurations and their worst-case certificates.
//!
//! Certificates treat every spin that is not specified by the pattern as
//! adversarial: for a site that should stay put it disagrees, for a flip that
//! should be legal it agrees with the flipping site. A certificate therefore
//! holds for any surrounding configuration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{SiteId, SlabGeometry, VerticalBc};
use crate::pattern::Pattern;
use crate::spin::Spin;
use crate::{Error, Result};

pub const FIGURE7_PATTERN: &str = include_str!("../assets/figure7.pat");
pub const FIGURE7_SETS: &str = include_str!("../assets/figure7.sets");

/// 2×2 block of monochromatic columns with lower-left column `(x, y)`.
pub fn build_absorbing_block(g: &SlabGeometry, x: u32, y: u32, sign: Spin) -> Result<Pattern> {
    let pat = Pattern::filled(2, 2, g.k(), sign).with_anchor(x, y);
    pat.check_fits(g)?;
    Ok(pat)
}

/// Energy of a specified site when every unspecified neighbor disagrees.
fn worst_case_energy(g: &SlabGeometry, pat: &Pattern, local: SiteId, spin: Spin) -> i32 {
    let global = pat.global_site(g, local);
    let i = g.index_unchecked(global);
    g.neighbors_of(i)
        .iter()
        .map(|nb| {
            let m = nb.mult as i32;
            let t = g.site(nb.site as usize);
            match pat.local_site(g, t).and_then(|l| pat.get_site(l)) {
                Some(other) => -spin.value() * other.value() * m,
                None => m,
            }
        })
        .sum()
}

/// Energy of a specified site when every unspecified neighbor agrees with it.
fn best_case_energy(g: &SlabGeometry, pat: &Pattern, local: SiteId, spin: Spin) -> i32 {
    let global = pat.global_site(g, local);
    let i = g.index_unchecked(global);
    g.neighbors_of(i)
        .iter()
        .map(|nb| {
            let m = nb.mult as i32;
            let t = g.site(nb.site as usize);
            match pat.local_site(g, t).and_then(|l| pat.get_site(l)) {
                Some(other) => -spin.value() * other.value() * m,
                None => -m,
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteMargin {
    /// Lattice coordinates of the site.
    pub site: SiteId,
    pub worst_energy: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbsorbingReport {
    pub absorbing: bool,
    /// Maximum worst-case energy over the specified sites.
    pub worst_energy: i32,
    pub margins: Vec<SiteMargin>,
}

/// Checks that every specified site of `pat` is stable whatever the rest of
/// the lattice does; such a set of spins can never flip.
pub fn verify_absorbing(g: &SlabGeometry, pat: &Pattern) -> Result<AbsorbingReport> {
    pat.check_fits(g)?;
    let margins: Vec<SiteMargin> = pat
        .specified()
        .map(|(local, spin)| SiteMargin {
            site: pat.global_site(g, local),
            worst_energy: worst_case_energy(g, pat, local, spin),
        })
        .collect();
    let worst_energy = margins
        .iter()
        .map(|m| m.worst_energy)
        .max()
        .unwrap_or(i32::MIN);
    Ok(AbsorbingReport {
        absorbing: margins.iter().all(|m| m.worst_energy < 0),
        worst_energy,
        margins,
    })
}

/// The four-level non-fixation construction: a pattern plus its designated
/// site sets, all in pattern-local coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Figure7Pattern {
    pub pattern: Pattern,
    /// Level-0 sites that flip forever, in cycle order 1..4.
    pub flipping: [SiteId; 4],
    pub fixed: Vec<SiteId>,
    pub unspecified: Vec<SiteId>,
}

pub fn build_figure7() -> Result<Figure7Pattern> {
    Figure7Pattern::from_assets(FIGURE7_PATTERN, FIGURE7_SETS)
}

fn parse_site(tok: &str) -> Option<SiteId> {
    let mut it = tok.split(',').map(|v| v.parse::<u32>().ok());
    let s = SiteId::new(it.next()??, it.next()??, it.next()??);
    it.next().is_none().then_some(s)
}

impl Figure7Pattern {
    /// Parses the pattern and the sidecar of designated sets, and checks that
    /// they are consistent.
    pub fn from_assets(pattern_text: &str, sets_text: &str) -> Result<Self> {
        let pattern = Pattern::parse(pattern_text)?;
        let mut flipping = Vec::new();
        let mut fixed = Vec::new();
        let mut unspecified = Vec::new();
        for (n, line) in sets_text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let target = match toks.next() {
                Some("flipping") => &mut flipping,
                Some("fixed") => &mut fixed,
                Some("unspecified") => &mut unspecified,
                _ => return Err(Error::InvalidAsset(format!("line {}: unknown set", n + 1))),
            };
            for tok in toks {
                let s = parse_site(tok)
                    .filter(|&s| pattern.in_box(s))
                    .ok_or_else(|| {
                        Error::InvalidAsset(format!("line {}: bad site `{tok}`", n + 1))
                    })?;
                target.push(s);
            }
        }
        let flipping: [SiteId; 4] = flipping
            .try_into()
            .map_err(|_| Error::InvalidAsset(String::from("flipping set must have 4 sites")))?;
        let fig = Figure7Pattern {
            pattern,
            flipping,
            fixed,
            unspecified,
        };
        fig.validate()?;
        Ok(fig)
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidAsset(String::from(why)));
        let row = self.flipping[0].y;
        for (i, s) in self.flipping.iter().enumerate() {
            if s.z != 0 || s.y != row {
                return bad("flipping sites must be level-0 sites of one row");
            }
            if i > 0 && s.x + 1 != self.flipping[i - 1].x {
                return bad("flipping sites must be adjacent and numbered right to left");
            }
            if self.pattern.get_site(*s).is_none() {
                return bad("flipping sites must be specified");
            }
        }
        let p = &self.pattern;
        let mut seen = alloc::vec![0u8; (p.width() * p.height() * p.k()) as usize];
        let idx = |s: &SiteId| ((s.y * p.width() + s.x) * p.k() + s.z) as usize;
        for s in self
            .flipping
            .iter()
            .chain(&self.fixed)
            .chain(&self.unspecified)
        {
            seen[idx(s)] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return bad("every box site must be in exactly one designated set");
        }
        if self.fixed.iter().any(|&s| p.get_site(s).is_none()) {
            return bad("fixed sites must be specified");
        }
        if self.unspecified.iter().any(|&s| p.get_site(s).is_some()) {
            return bad("unspecified sites must be blank in the pattern");
        }
        Ok(())
    }

    /// Sidecar text listing the designated sets.
    pub fn sets_to_text(&self) -> String {
        let mut out = String::new();
        let mut emit = |key: &str, sites: &[SiteId]| {
            for chunk in sites.chunks(12) {
                out.push_str(key);
                for s in chunk {
                    out.push_str(&format!(" {},{},{}", s.x, s.y, s.z));
                }
                out.push('\n');
            }
        };
        emit("flipping", &self.flipping);
        emit("fixed", &self.fixed);
        emit("unspecified", &self.unspecified);
        out
    }

    /// Copy with all flipping sites set to `sign`.
    pub fn with_flipping_sign(&self, sign: Spin) -> Self {
        let mut f = self.clone();
        for s in f.flipping {
            f.pattern.set(s.x, s.y, s.z, Some(sign));
        }
        f
    }

    /// Indices into `flipping`, in the order they flip over one full cycle.
    /// From all `−1` the sites go 1,2,3,4 up and 4,3,2,1 down; from all `+1`
    /// the mirrored sequence is used.
    pub fn cycle_order(&self) -> Result<[usize; 8]> {
        let signs: Vec<Option<Spin>> = self
            .flipping
            .iter()
            .map(|&s| self.pattern.get_site(s))
            .collect();
        if signs.iter().all(|&s| s == Some(Spin::Minus)) {
            Ok([0, 1, 2, 3, 3, 2, 1, 0])
        } else if signs.iter().all(|&s| s == Some(Spin::Plus)) {
            Ok([3, 2, 1, 0, 0, 1, 2, 3])
        } else {
            Err(Error::InvalidAsset(String::from(
                "flipping sites must share one sign",
            )))
        }
    }

    /// Periodic slab with a one-column margin around the box, so box sites
    /// never see each other across the wrap.
    fn verification_geometry(&self) -> Result<(SlabGeometry, Pattern)> {
        let p = &self.pattern;
        let g = SlabGeometry::new(p.width() + 2, p.height() + 2, p.k(), VerticalBc::Periodic)?;
        Ok((g, p.clone().with_anchor(1, 1)))
    }

    /// The start state and the state after each flip of the cycle.
    fn cycle_states(&self) -> Result<Vec<Pattern>> {
        let (_, start) = self.verification_geometry()?;
        let mut states = alloc::vec![start];
        for i in self.cycle_order()? {
            let mut next = states.last().expect("non-empty").clone();
            let s = self.flipping[i];
            let cur = next.get_site(s).expect("flipping sites are specified");
            next.set(s.x, s.y, s.z, Some(cur.flipped()));
            states.push(next);
        }
        Ok(states)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Pattern-local site.
    pub site: SiteId,
    /// 0 is the start state; `n` is the state after the `n`-th flip.
    pub cycle_state: usize,
    pub worst_energy: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedReport {
    pub passed: bool,
    pub states_checked: usize,
    pub sites_checked: usize,
    /// Maximum worst-case energy over all fixed sites and cycle states.
    pub worst_energy: Option<i32>,
    pub violations: Vec<Violation>,
}

/// Every fixed site must have negative worst-case energy in every state the
/// flipping sites visit.
pub fn verify_figure7_fixed(fig: &Figure7Pattern) -> Result<FixedReport> {
    let (g, _) = fig.verification_geometry()?;
    let states = fig.cycle_states()?;
    let mut violations = Vec::new();
    let mut worst: Option<i32> = None;
    for (n, state) in states.iter().enumerate() {
        for &s in &fig.fixed {
            let spin = state.get_site(s).expect("fixed sites are specified");
            let e = worst_case_energy(&g, state, s, spin);
            worst = Some(worst.map_or(e, |w| w.max(e)));
            if e >= 0 {
                violations.push(Violation {
                    site: s,
                    cycle_state: n,
                    worst_energy: e,
                });
            }
        }
    }
    Ok(FixedReport {
        passed: violations.is_empty(),
        states_checked: states.len(),
        sites_checked: fig.fixed.len(),
        worst_energy: worst,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleFlip {
    pub site: SiteId,
    pub from: Spin,
    pub to: Spin,
    pub pre_energy: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleReport {
    pub flips: Vec<CycleFlip>,
    pub legal: bool,
    /// Index of the first flip with negative pre-energy.
    pub failed_step: Option<usize>,
    pub returns_to_start: bool,
    /// Every flip happened from energy exactly 0.
    pub all_ties: bool,
}

/// Replays the flip cycle with all other specified spins held fixed and
/// unspecified neighbors agreeing with the flipping site.
pub fn verify_figure7_cycle(fig: &Figure7Pattern) -> Result<CycleReport> {
    let (g, start) = fig.verification_geometry()?;
    let mut state = start.clone();
    let mut flips = Vec::new();
    let mut failed_step = None;
    for (step, i) in fig.cycle_order()?.into_iter().enumerate() {
        let s = fig.flipping[i];
        let from = state.get_site(s).expect("flipping sites are specified");
        let pre = best_case_energy(&g, &state, s, from);
        flips.push(CycleFlip {
            site: s,
            from,
            to: from.flipped(),
            pre_energy: pre,
        });
        if pre < 0 {
            failed_step = Some(step);
            break;
        }
        state.set(s.x, s.y, s.z, Some(from.flipped()));
    }
    let legal = failed_step.is_none();
    Ok(CycleReport {
        all_ties: legal && flips.iter().all(|f| f.pre_energy == 0),
        returns_to_start: legal && state == start,
        legal,
        failed_step,
        flips,
    })
}
