//! The run manifest: config echo, stage status and the file listing.

use serde::Serialize;
use serde_json::Value;

use crate::commands::Stage;
use crate::output::FileEntry;

pub const ARTIFACT: &str = "gradreg";

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub preset: Option<&'a str>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub config: Value,
    pub wall_clock_seconds: f64,
    pub stages: &'a [Stage],
    pub files: &'a [FileEntry],
    pub exit_code: u8,
}

impl RunManifest<'_> {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest fields serialize")
    }
}
