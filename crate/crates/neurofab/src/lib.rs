//! Deterministic, event-driven emulator for large-scale neuromorphic array
//! hardware.
//!
//! The crate models four hardware fabrics behind one configuration surface:
//!
//! - [`ifat`]: an addressable array of switch-capacitor neurons with
//!   off-array LUT connectivity and a shared event-serviced soma.
//! - [`dynap`]: a multi-chip grid with three-level routing — relative mesh
//!   hops between chips, core dispatch inside a chip, and tag-matched
//!   broadcast inside a core — plus plastic counter synapses.
//! - [`cortex`]: minicolumn/hypercolumn populations exchanging spike-count
//!   events through a two-phase axonal delay store, with destinations
//!   generated on the fly from hierarchical connection rules.
//! - [`crossbar`]: a resistive crosspoint array with non-ideal device
//!   effects (finite levels, nonlinear asymmetric updates, finite on/off
//!   ratio, variation, wire IR drop) and their mitigations.
//!
//! Neuron models live in [`neuron`]; the winner-take-all array built from
//! them in [`wta`] with connectivity presets in [`presets`]. Runs are
//! described by a TOML document ([`config`]), executed by [`runner`], and
//! emit a raster CSV plus a stats JSON document ([`output`]) with
//! hardware-profile energy accounting ([`energy`]).
//!
//! Every run is reproducible: a master seed plus per-(purpose, index)
//! derived streams ([`rng`]) make output bytes a pure function of
//! (config, seed), independent of worker count.
//!
//! The `examples/` directory contains one runnable example per subsystem;
//! the `simctl` binary exposes `run`, `validate`, `bench` and `sweep`.

pub mod config;
pub mod cortex;
pub mod crossbar;
pub mod dynap;
pub mod energy;
pub mod error;
pub mod ifat;
pub mod neuron;
pub mod output;
pub mod presets;
pub mod rng;
pub mod runner;
pub mod wta;

pub use config::{load_config, load_config_file, EngineKind, NetworkConfig};
pub use error::{Error, Result, ValidationIssue};
pub use runner::{run_precision_sweep, run_simulation, RunArtifacts, RunOptions};
