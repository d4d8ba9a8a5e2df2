//! Neuron models used by the array engines.
//!
//! Three variants live here:
//! - [`reference`]: the continuous adaptive-threshold model integrated with
//!   explicit Euler, including spike-induced internal currents.
//! - [`discrete`]: the event-driven switch-capacitor form used by the IFAT
//!   array engine, where every state change is either a synaptic event or a
//!   leak-clock tick.
//! - [`wta`]: a behavioral adaptive/refractory integrate-and-fire neuron for
//!   the winner-take-all array.

pub mod discrete;
pub mod reference;
pub mod wta;

use serde::{Deserialize, Serialize};

/// Synaptic event polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[serde(alias = "excitatory")]
    Exc,
    #[serde(alias = "inhibitory")]
    Inh,
}

pub use discrete::{MnDiscreteParams, MnNeuronState, ThresholdMode};
pub use reference::{InternalCurrent, MnReferenceParams, MnReferenceState};
pub use wta::{WtaNeuronParams, WtaNeuronState};
