//! Library side of the CLI: the simulated cost model, the sweep harness,
//! trace file I/O, and report rendering. The binary in `main.rs` is a thin
//! wrapper over these.

pub mod cost;
pub mod report;
pub mod sweep;
pub mod trace_io;

pub use cost::CostModel;
pub use sweep::{run_sweep, SweepReport, SweepRow, SweepSpec};
pub use trace_io::{emit_trace, parse_trace, TraceHeader, TRACE_SCHEMA};
