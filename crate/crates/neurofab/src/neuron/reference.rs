//! Continuous adaptive-threshold neuron, integrated with explicit Euler.
//!
//! Dynamics: a bank of exponentially decaying internal currents feeds the
//! membrane, the membrane leaks toward its resting potential, and the
//! threshold couples to the membrane while decaying toward its equilibrium.
//! A spike fires whenever the membrane reaches the threshold; the spike
//! applies the multiplicative/additive current resets, pulls the membrane to
//! its reset value and clips the threshold from below at its reset value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-current parameters: decay rate plus the post-spike reset rule
/// `I <- reset_factor * I + reset_add`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalCurrent {
    /// Decay rate (1/s), must be positive.
    pub decay_rate: f64,
    /// Multiplicative factor applied at spike time.
    pub reset_factor: f64,
    /// Additive term applied at spike time.
    pub reset_add: f64,
}

/// Parameters of the continuous model, in normalized units
/// (reset at 0 V, thresholds of order 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnReferenceParams {
    /// Membrane capacitance.
    pub capacitance: f64,
    /// Leak conductance toward `e_leak`.
    pub leak_conductance: f64,
    /// Resting/leak potential.
    pub e_leak: f64,
    /// Threshold-to-membrane coupling rate (1/s).
    pub threshold_coupling: f64,
    /// Threshold decay rate toward `theta_equilibrium` (1/s).
    pub threshold_decay: f64,
    /// Threshold equilibrium value.
    pub theta_equilibrium: f64,
    /// Membrane reset value.
    pub v_reset: f64,
    /// Threshold reset value (lower clip applied at spike time).
    pub theta_reset: f64,
    /// Spike-induced internal currents; may be empty.
    #[serde(default)]
    pub currents: Vec<InternalCurrent>,
}

impl MnReferenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacitance > 0.0) {
            return Err(Error::InvalidParam("capacitance must be > 0".into()));
        }
        if self.leak_conductance < 0.0 {
            return Err(Error::InvalidParam("leak_conductance must be >= 0".into()));
        }
        if self.threshold_decay < 0.0 {
            return Err(Error::InvalidParam("threshold_decay must be >= 0".into()));
        }
        if self.theta_equilibrium < self.v_reset {
            return Err(Error::InvalidParam(
                "theta_equilibrium must be >= v_reset".into(),
            ));
        }
        for (j, c) in self.currents.iter().enumerate() {
            if !(c.decay_rate > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "currents[{j}].decay_rate must be > 0"
                )));
            }
        }
        Ok(())
    }
}

/// State of one continuous-model neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnReferenceState {
    pub v_m: f64,
    pub theta: f64,
    /// One entry per configured internal current.
    pub currents: Vec<f64>,
}

impl MnReferenceState {
    /// Resting state: membrane at the leak potential, threshold at its
    /// equilibrium, internal currents at zero.
    pub fn resting(params: &MnReferenceParams) -> Self {
        Self {
            v_m: params.e_leak,
            theta: params.theta_equilibrium,
            currents: vec![0.0; params.currents.len()],
        }
    }

    /// Advance one Euler step of length `dt` under external current `i_ext`,
    /// then apply the spike rule if the membrane reached the threshold.
    /// Returns whether a spike fired.
    pub fn step(&mut self, params: &MnReferenceParams, i_ext: f64, dt: f64) -> Result<bool> {
        debug_assert!(dt > 0.0, "dt must be positive");

        let current_sum: f64 = self.currents.iter().sum();
        let dv = (i_ext + current_sum
            - params.leak_conductance * (self.v_m - params.e_leak))
            / params.capacitance;
        let dtheta = params.threshold_coupling * (self.v_m - params.e_leak)
            - params.threshold_decay * (self.theta - params.theta_equilibrium);

        for (i, c) in params.currents.iter().enumerate() {
            self.currents[i] += dt * (-c.decay_rate * self.currents[i]);
        }
        self.v_m += dt * dv;
        self.theta += dt * dtheta;

        if !self.v_m.is_finite() {
            return Err(Error::Numerics { variable: "v_m" });
        }
        if !self.theta.is_finite() {
            return Err(Error::Numerics { variable: "theta" });
        }
        if self.currents.iter().any(|i| !i.is_finite()) {
            return Err(Error::Numerics {
                variable: "internal current",
            });
        }

        let spiked = self.v_m >= self.theta;
        if spiked {
            for (i, c) in params.currents.iter().enumerate() {
                self.currents[i] = c.reset_factor * self.currents[i] + c.reset_add;
            }
            self.v_m = params.v_reset;
            self.theta = self.theta.max(params.theta_reset);
        }
        Ok(spiked)
    }
}
