//! Run artifacts: the raster CSV and the stats document. Both are
//! byte-stable functions of their inputs; files are written to a temporary
//! name and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};

/// One raster line: tick, formatted address, optional spike count (used by
/// the count-event engine).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterRecord {
    pub tick: u64,
    pub address: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl RasterRecord {
    pub fn spike(tick: u64, address: impl ToString) -> Self {
        Self {
            tick,
            address: address.to_string(),
            count: None,
        }
    }

    pub fn counted(tick: u64, address: impl ToString, count: u64) -> Self {
        Self {
            tick,
            address: address.to_string(),
            count: Some(count),
        }
    }
}

/// Write the raster as CSV: header plus one `tick,address[,count]` line per
/// record. Records must arrive in non-decreasing tick order.
pub fn emit_raster(records: &[RasterRecord], w: &mut impl Write) -> std::io::Result<()> {
    let with_count = records.iter().any(|r| r.count.is_some());
    if with_count {
        writeln!(w, "tick,address,count")?;
    } else {
        writeln!(w, "tick,address")?;
    }
    debug_assert!(records.windows(2).all(|p| p[0].tick <= p[1].tick));
    for r in records {
        match r.count {
            Some(c) => writeln!(w, "{},{},{}", r.tick, r.address, c)?,
            None => writeln!(w, "{},{}", r.tick, r.address)?,
        }
    }
    Ok(())
}

/// Wall-clock figures; kept out of the default stats document so that
/// output bytes stay a pure function of (config, seed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_s: f64,
    pub events_per_sec: f64,
}

/// The stats document emitted next to the raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub format_version: u32,
    pub engine: String,
    pub seed: u64,
    pub ticks_run: u64,
    /// Events ingested from the stimulus.
    pub events_in: u64,
    /// Synaptic events processed (the energy-bearing count).
    pub synaptic_events: u64,
    pub spikes: u64,
    pub router_hops: u64,
    pub dropped_events: u64,
    pub max_queue_backlog: u64,
    pub raster_records: u64,
    /// Engine-specific counters, verbatim.
    pub engine_detail: serde_json::Value,
    pub energy: EnergyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Serialize the stats document: pretty JSON with a trailing newline,
/// byte-stable for identical inputs.
pub fn render_stats(stats: &RunStats) -> String {
    let mut s = serde_json::to_string_pretty(stats).expect("stats always serialize");
    s.push('\n');
    s
}

/// Write bytes to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    let io_err = |e| Error::io(path.display().to_string(), e);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}
