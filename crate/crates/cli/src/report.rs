//! Deterministic JSON rendering for reports and sequence sidecars.
//!
//! Reports must be byte-identical across runs with the same configuration
//! and seed, and numeric fields must round-trip binary64 exactly. Floats
//! are therefore written in scientific notation with 17 significant digits
//! (1 leading + 16 fractional), which is always lossless; field order
//! follows struct definition order and is stable.

use std::io;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;

/// Schema identifier embedded in every report and sidecar.
pub const SCHEMA_VERSION: &str = "1";

/// JSON formatter writing every f64 with 17 significant digits.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes any value to JSON with lossless float formatting and a
/// trailing newline.
pub fn to_precise_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Report envelope: schema version, the command that produced it, the full
/// resolved configuration (null only for `estimate`, whose provenance is
/// the sequence sidecar inside its result), and the command result.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: Option<&'a ResolvedConfig>,
    pub result: &'a T,
}

/// Renders a complete report to bytes.
pub fn render<T: Serialize>(
    command: &'static str,
    config: Option<&ResolvedConfig>,
    result: &T,
) -> Result<Vec<u8>> {
    to_precise_json(&Report {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    })
}

/// Metadata stored next to a binary sequence file: everything needed to
/// re-derive or extend the analysis of the recorded events.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSidecar {
    pub schema_version: String,
    /// Per-event channel distribution the chain was built from (after the
    /// dark-count admixture).
    pub p: [f64; 4],
    pub p_a: f64,
    pub epsilon: f64,
    pub dcr_fraction: f64,
    pub seed: u64,
    pub n: usize,
}

/// The sidecar path for a sequence file: the same name with `.meta.json`
/// appended (extensions are kept, so `run.seq` maps to `run.seq.meta.json`).
pub fn sidecar_path(sequence: &Path) -> PathBuf {
    let mut name = sequence.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}
