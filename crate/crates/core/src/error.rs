use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    InvalidGeometry(&'static str),
    InvalidSite {
        x: u32,
        y: u32,
        z: u32,
    },
    InvalidProbability(f64),
    /// The η field is only defined for three-level slabs.
    WrongSlabWidth {
        expected: u32,
        found: u32,
    },
    PatternOverflow,
    PatternParse {
        line: usize,
        message: String,
    },
    InvalidAsset(String),
    SystemTooLarge {
        sites: usize,
        max: usize,
    },
    /// Mass reaches a closed class of the chain that contains no absorbing state.
    AbsorptionNotCertain {
        state: u32,
    },
    SingularSystem,
    InvalidDistribution,
    Snapshot(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGeometry(why) => write!(f, "invalid geometry: {why}"),
            Error::InvalidSite { x, y, z } => {
                write!(f, "site ({x}, {y}, {z}) is outside the lattice")
            }
            Error::InvalidProbability(p) => write!(f, "probability {p} is not in (0, 1)"),
            Error::WrongSlabWidth { expected, found } => {
                write!(
                    f,
                    "operation requires k = {expected}, geometry has k = {found}"
                )
            }
            Error::PatternOverflow => f.write_str("pattern does not fit inside the geometry"),
            Error::PatternParse { line, message } => write!(f, "pattern line {line}: {message}"),
            Error::InvalidAsset(why) => write!(f, "invalid construction asset: {why}"),
            Error::SystemTooLarge { sites, max } => {
                write!(
                    f,
                    "system has {sites} sites, exact analysis supports at most {max}"
                )
            }
            Error::AbsorptionNotCertain { state } => {
                write!(
                    f,
                    "state {state:#x} lies in a closed class without absorbing states"
                )
            }
            Error::SingularSystem => f.write_str("absorption equations are singular"),
            Error::InvalidDistribution => {
                f.write_str("initial distribution must be non-negative and sum to 1")
            }
            Error::Snapshot(why) => write!(f, "inconsistent engine snapshot: {why}"),
        }
    }
}

impl core::error::Error for Error {}
