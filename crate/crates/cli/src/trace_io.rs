//! Trace files: newline-delimited JSON records under a versioned header.
//!
//! Line 1 is a header object carrying the schema tag, grid geometry, and the
//! controller config the trace was produced under; every following line is
//! one decision record. `parse_trace(emit_trace(t)) == t` holds exactly —
//! floats survive the round trip bit-for-bit.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dualskip::config::ControllerConfig;
use dualskip::rollout::RolloutResult;
use dualskip::trace::{DecisionTrace, TraceEntry};

pub const TRACE_SCHEMA: &str = "dualskip.trace.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub grid_steps: usize,
    pub rollout_steps: usize,
    pub config: ControllerConfig,
}

/// Serializes a rollout's trace to a writer.
pub fn write_trace<W: Write>(
    mut out: W,
    trace: &DecisionTrace,
    grid_steps: usize,
    cfg: &ControllerConfig,
) -> Result<()> {
    let header = TraceHeader {
        schema: TRACE_SCHEMA.to_string(),
        grid_steps,
        rollout_steps: trace.rollout_steps(),
        config: *cfg,
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for entry in trace.entries() {
        writeln!(out, "{}", serde_json::to_string(entry)?)?;
    }
    Ok(())
}

/// Writes a rollout's trace file to `path`.
pub fn emit_trace(result: &RolloutResult, cfg: &ControllerConfig, path: &Path) -> Result<()> {
    let grid_steps = result
        .trace
        .entries()
        .iter()
        .map(|e| e.k)
        .max()
        .unwrap_or(0);
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating trace file {}", path.display()))?;
    write_trace(
        std::io::BufWriter::new(file),
        &result.trace,
        grid_steps,
        cfg,
    )
    .with_context(|| format!("writing trace to {}", path.display()))
}

/// Reads a trace from a reader, validating the schema tag.
pub fn read_trace<R: BufRead>(reader: R) -> Result<(TraceHeader, DecisionTrace)> {
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => bail!("trace file is empty"),
    };
    let header: TraceHeader = serde_json::from_str(&header_line).context("parsing trace header")?;
    if header.schema != TRACE_SCHEMA {
        bail!(
            "unsupported trace schema '{}', expected '{}'",
            header.schema,
            TRACE_SCHEMA
        );
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TraceEntry = serde_json::from_str(&line)
            .with_context(|| format!("parsing trace record on line {}", i + 2))?;
        entries.push(entry);
    }
    Ok((header, DecisionTrace::from_entries(entries)))
}

/// Reads a trace file from `path`.
pub fn parse_trace(path: &Path) -> Result<(TraceHeader, DecisionTrace)> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening trace file {}", path.display()))?;
    read_trace(std::io::BufReader::new(file))
}
