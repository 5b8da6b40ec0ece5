//! Versioned binary checkpoints of a running engine.
//!
//! Layout (little-endian): the 8-byte magic `SLABCKPT`, a `u32` version, the
//! provenance JSON as a length-prefixed UTF-8 string, then the engine
//! snapshot. Floats are stored as their bit patterns, so a round trip is
//! exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use slabfix_core::dynamics::{ClockSnapshot, EngineMode, EngineSnapshot, FlipLog, WindowLog};
use slabfix_core::VerticalBc;

use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SLABCKPT";
pub const VERSION: u32 = 1;

// Refuse absurd length prefixes from corrupt files instead of allocating.
const MAX_LEN: u64 = 1 << 32;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn put_len<W: Write>(w: &mut W, n: usize) -> std::io::Result<()> {
    w.write_u64::<LE>(n as u64)
}

fn put_u32s<W: Write>(w: &mut W, xs: &[u32]) -> std::io::Result<()> {
    put_len(w, xs.len())?;
    xs.iter().try_for_each(|&x| w.write_u32::<LE>(x))
}

fn put_u64s<W: Write>(w: &mut W, xs: &[u64]) -> std::io::Result<()> {
    put_len(w, xs.len())?;
    xs.iter().try_for_each(|&x| w.write_u64::<LE>(x))
}

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    put_len(w, xs.len())?;
    xs.iter().try_for_each(|&x| w.write_u64::<LE>(x.to_bits()))
}

fn encode<W: Write>(w: &mut W, snap: &EngineSnapshot, provenance: &str) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    put_len(w, provenance.len())?;
    w.write_all(provenance.as_bytes())?;
    w.write_u32::<LE>(snap.lx)?;
    w.write_u32::<LE>(snap.ly)?;
    w.write_u32::<LE>(snap.k)?;
    w.write_u8(match snap.vertical_bc {
        VerticalBc::Free => 0,
        VerticalBc::Periodic => 1,
    })?;
    w.write_u8(match snap.mode {
        EngineMode::FullClock => 0,
        EngineMode::Thinned => 1,
    })?;
    w.write_u64::<LE>(snap.seed)?;
    w.write_u64::<LE>(snap.time.to_bits())?;
    put_u64s(w, &snap.spins)?;
    put_u32s(w, &snap.forced_order)?;
    put_u32s(w, &snap.tie_order)?;
    match &snap.clock {
        ClockSnapshot::Full {
            ring_count,
            next_ring,
        } => {
            w.write_u8(0)?;
            put_u64s(w, ring_count)?;
            put_f64s(w, next_ring)?;
        }
        ClockSnapshot::Thinned { position, pending } => {
            w.write_u8(1)?;
            w.write_u64::<LE>(*position)?;
            match pending {
                Some(t) => {
                    w.write_u8(1)?;
                    w.write_u64::<LE>(t.to_bits())?;
                }
                None => w.write_u8(0)?,
            }
        }
    }
    let log = &snap.log;
    put_u32s(w, &log.total_flips)?;
    put_u32s(w, &log.energy_lowering_flips)?;
    put_f64s(w, &log.last_flip_time)?;
    put_len(w, log.windows.len())?;
    for win in &log.windows {
        put_u32s(w, &win.flips)?;
        w.write_u64::<LE>(win.flips_total)?;
        w.write_u64::<LE>(win.energy_lowering_total)?;
    }
    Ok(())
}

struct Decoder<R> {
    r: R,
}

impl<R: Read> Decoder<R> {
    fn io<T>(res: std::io::Result<T>) -> Result<T> {
        res.map_err(|e| bad(format!("truncated or unreadable: {e}")))
    }

    fn u8(&mut self) -> Result<u8> {
        Self::io(self.r.read_u8())
    }

    fn u32(&mut self) -> Result<u32> {
        Self::io(self.r.read_u32::<LE>())
    }

    fn u64(&mut self) -> Result<u64> {
        Self::io(self.r.read_u64::<LE>())
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(bad(format!("length {n} out of range")));
        }
        Ok(n as usize)
    }

    fn vec<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let n = self.len()?;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            out.push(item(self)?);
        }
        Ok(out)
    }

    fn decode(&mut self) -> Result<(EngineSnapshot, String)> {
        let mut magic = [0u8; 8];
        Self::io(self.r.read_exact(&mut magic))?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let bytes = self.vec(Self::u8)?;
        let provenance = String::from_utf8(bytes).map_err(|_| bad("provenance is not UTF-8"))?;
        let lx = self.u32()?;
        let ly = self.u32()?;
        let k = self.u32()?;
        let vertical_bc = match self.u8()? {
            0 => VerticalBc::Free,
            1 => VerticalBc::Periodic,
            b => return Err(bad(format!("bad boundary tag {b}"))),
        };
        let mode = match self.u8()? {
            0 => EngineMode::FullClock,
            1 => EngineMode::Thinned,
            b => return Err(bad(format!("bad engine tag {b}"))),
        };
        let seed = self.u64()?;
        let time = self.f64()?;
        let spins = self.vec(Self::u64)?;
        let forced_order = self.vec(Self::u32)?;
        let tie_order = self.vec(Self::u32)?;
        let clock = match self.u8()? {
            0 => ClockSnapshot::Full {
                ring_count: self.vec(Self::u64)?,
                next_ring: self.vec(Self::f64)?,
            },
            1 => {
                let position = self.u64()?;
                let pending = match self.u8()? {
                    0 => None,
                    1 => Some(self.f64()?),
                    b => return Err(bad(format!("bad pending tag {b}"))),
                };
                ClockSnapshot::Thinned { position, pending }
            }
            b => return Err(bad(format!("bad clock tag {b}"))),
        };
        let total_flips = self.vec(Self::u32)?;
        let energy_lowering_flips = self.vec(Self::u32)?;
        let last_flip_time = self.vec(Self::f64)?;
        let windows = self.vec(|d| {
            Ok(WindowLog {
                flips: d.vec(Self::u32)?,
                flips_total: d.u64()?,
                energy_lowering_total: d.u64()?,
            })
        })?;
        let mut rest = [0u8; 1];
        if Self::io(self.r.read(&mut rest))? != 0 {
            return Err(bad("trailing bytes"));
        }
        let snap = EngineSnapshot {
            lx,
            ly,
            k,
            vertical_bc,
            mode,
            seed,
            time,
            spins,
            forced_order,
            tie_order,
            clock,
            log: FlipLog {
                total_flips,
                energy_lowering_flips,
                last_flip_time,
                windows,
            },
        };
        Ok((snap, provenance))
    }
}

pub fn write_checkpoint<W: Write>(
    w: &mut W,
    snap: &EngineSnapshot,
    provenance: &str,
) -> Result<()> {
    encode(w, snap, provenance).map_err(|e| bad(e.to_string()))
}

/// Returns the snapshot and the provenance JSON it was written with.
pub fn read_checkpoint<R: Read>(r: R) -> Result<(EngineSnapshot, String)> {
    Decoder { r }.decode()
}

pub fn save(path: &Path, snap: &EngineSnapshot, provenance: &str) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    encode(&mut w, snap, provenance)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(EngineSnapshot, String)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
