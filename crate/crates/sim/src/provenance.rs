//! Headers that make every artifact reproducible from its own contents.

use serde::Serialize;
use serde_json::Value;

use crate::Result;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            tool: "slabfix".to_string(),
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
        })
    }

    /// `#`-prefixed lines placed above a CSV header row.
    pub fn csv_preamble(&self) -> String {
        format!(
            "# {} {}\n# command: {}\n# config: {}\n",
            self.tool, self.version, self.command, self.config
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }
}

/// Wraps a report so its first field is the provenance block.
#[derive(Serialize)]
pub struct WithProvenance<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: &'a T,
}
