//! Behavioral adaptive/refractory integrate-and-fire neuron for the
//! winner-take-all array. Stepped once per simulation tick with the charge
//! aggregated from address events and local recurrent connections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtaNeuronParams {
    /// Constant charge leaked per tick.
    pub leak_rate: f64,
    /// Firing threshold.
    pub threshold: f64,
    /// Ticks the neuron stays silent after a spike.
    pub refractory_period: u64,
    /// Adaptation charge added per output spike.
    pub adapt_increment: f64,
    /// Fraction of the adaptation current removed per tick, in [0, 1).
    pub adapt_decay: f64,
    /// Charge a neuron feeds back to itself per own spike (used by the
    /// connectivity builder, not by the step function).
    pub self_excitation_weight: f64,
}

impl Default for WtaNeuronParams {
    fn default() -> Self {
        Self {
            leak_rate: 0.01,
            threshold: 1.0,
            refractory_period: 2,
            adapt_increment: 0.0,
            adapt_decay: 0.05,
            self_excitation_weight: 0.0,
        }
    }
}

impl WtaNeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParam("threshold must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.adapt_decay) {
            return Err(Error::InvalidParam("adapt_decay must be in [0, 1)".into()));
        }
        if self.leak_rate < 0.0 || self.adapt_increment < 0.0 {
            return Err(Error::InvalidParam(
                "leak_rate and adapt_increment must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WtaNeuronState {
    pub v_m: f64,
    /// Spike-frequency adaptation current, subtracted from the input.
    pub adapt_current: f64,
    /// First tick at which the neuron accepts input again.
    pub refrac_until: u64,
}

impl WtaNeuronState {
    /// Advance one tick with the given net input charge (inhibition enters
    /// as negative charge). Returns whether the neuron fired this tick.
    ///
    /// During the refractory window all input is discarded; only the
    /// adaptation current keeps decaying. The membrane floors at zero, the
    /// way the physical integrator stops at its rail.
    pub fn step(&mut self, params: &WtaNeuronParams, input_charge: f64, now: u64) -> bool {
        let mut spiked = false;
        if now >= self.refrac_until {
            self.v_m += input_charge - params.leak_rate - self.adapt_current;
            if self.v_m < 0.0 {
                self.v_m = 0.0;
            }
            if self.v_m >= params.threshold {
                spiked = true;
                self.v_m = 0.0;
                self.refrac_until = now + params.refractory_period + 1;
                self.adapt_current += params.adapt_increment;
            }
        }
        self.adapt_current *= 1.0 - params.adapt_decay;
        spiked
    }
}
