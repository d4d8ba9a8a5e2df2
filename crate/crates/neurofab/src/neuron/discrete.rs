//! Event-driven switch-capacitor neuron.
//!
//! All dynamics are discrete: a synaptic event moves the membrane a fixed
//! fraction of the way toward a driving potential, a leak-clock tick moves it
//! a fixed fraction back toward the reset value, and the threshold (when the
//! adaptive mode is active) steps up with the pre-event membrane voltage.
//! The neuron can only fire while handling an event, so the spike check is a
//! separate operation invoked right after an event update.

use serde::{Deserialize, Serialize};

use super::Polarity;
use crate::error::{Error, Result};

/// Threshold behavior: adaptive two-cell mode, or plain integrate-and-fire
/// against an externally applied fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Adaptive threshold: theta steps with the membrane and leaks toward
    /// its reset value.
    Mn,
    /// Fixed threshold; the adaptive path is bypassed entirely.
    Lif { v_th: f64 },
}

/// Parameters of the discrete neuron. `alpha_*` are the capacitance ratios
/// governing per-event step sizes, `lambda_*` the per-leak-tick step ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnDiscreteParams {
    /// Membrane step ratio per synaptic event (0 < alpha_m < 1).
    pub alpha_m: f64,
    /// Threshold step ratio per synaptic event.
    pub alpha_t: f64,
    /// Membrane leak step ratio per leak tick (0 < lambda_m < 1).
    pub lambda_m: f64,
    /// Threshold leak step ratio per leak tick.
    pub lambda_t: f64,
    /// Membrane leak clock (Hz); realized as an integer divisor of the
    /// simulation tick by the engines.
    pub f_leak_m: f64,
    /// Threshold leak clock (Hz).
    pub f_leak_t: f64,
    /// Excitatory synaptic driving potential.
    pub e_syn: f64,
    /// Inhibitory driving potential; must sit below `v_reset` so inhibitory
    /// events remove charge.
    pub e_inh: f64,
    /// Membrane reset value (doubles as the resting potential).
    pub v_reset: f64,
    /// Threshold reset value.
    pub theta_reset: f64,
    pub mode: ThresholdMode,
}

impl Default for MnDiscreteParams {
    fn default() -> Self {
        Self {
            alpha_m: 0.1,
            alpha_t: 0.0,
            lambda_m: 0.0,
            lambda_t: 0.0,
            f_leak_m: 0.0,
            f_leak_t: 0.0,
            e_syn: 1.0,
            e_inh: -1.0,
            v_reset: 0.0,
            theta_reset: 1.0,
            mode: ThresholdMode::Lif { v_th: 1.0 },
        }
    }
}

impl MnDiscreteParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_m > 0.0 && self.alpha_m < 1.0) {
            return Err(Error::InvalidParam("alpha_m must be in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.lambda_m) {
            return Err(Error::InvalidParam("lambda_m must be in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.lambda_t) {
            return Err(Error::InvalidParam("lambda_t must be in [0, 1)".into()));
        }
        if self.alpha_t < 0.0 {
            return Err(Error::InvalidParam("alpha_t must be >= 0".into()));
        }
        if self.e_inh > self.v_reset {
            return Err(Error::InvalidParam(
                "e_inh must not exceed v_reset (inhibition removes charge)".into(),
            ));
        }
        if self.f_leak_m < 0.0 || self.f_leak_t < 0.0 {
            return Err(Error::InvalidParam("leak clocks must be >= 0".into()));
        }
        Ok(())
    }

    /// Effective threshold seen by the spike comparator.
    pub fn threshold(&self, theta: f64) -> f64 {
        match self.mode {
            ThresholdMode::Mn => theta,
            ThresholdMode::Lif { v_th } => v_th,
        }
    }
}

/// Which leak clock fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakTarget {
    Membrane,
    Threshold,
}

/// State of one discrete neuron: membrane and (adaptive-mode) threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnNeuronState {
    pub v_m: f64,
    pub theta: f64,
}

impl MnNeuronState {
    pub fn resting(params: &MnDiscreteParams) -> Self {
        Self {
            v_m: params.v_reset,
            theta: params.theta_reset,
        }
    }

    /// Apply one synaptic event. The membrane moves by
    /// `alpha_m * weight_scale` of the gap to the polarity's driving
    /// potential; in adaptive mode the threshold steps with the pre-event
    /// membrane voltage.
    pub fn event_update(
        &mut self,
        params: &MnDiscreteParams,
        polarity: Polarity,
        weight_scale: f64,
    ) {
        debug_assert!(weight_scale > 0.0);
        let v_pre = self.v_m;
        let driving = match polarity {
            Polarity::Exc => params.e_syn,
            Polarity::Inh => params.e_inh,
        };
        self.v_m += params.alpha_m * weight_scale * (driving - self.v_m);
        if let ThresholdMode::Mn = params.mode {
            self.theta += params.alpha_t * (v_pre - params.v_reset);
        }
    }

    /// Apply one leak-clock tick: a geometric step toward the reset value.
    pub fn leak_tick(&mut self, params: &MnDiscreteParams, which: LeakTarget) {
        match which {
            LeakTarget::Membrane => {
                self.v_m += params.lambda_m * (params.v_reset - self.v_m);
            }
            LeakTarget::Threshold => {
                self.theta += params.lambda_t * (params.theta_reset - self.theta);
            }
        }
    }

    /// Apply `count` membrane leak ticks at once via the closed form
    /// `v_reset + (v - v_reset) * (1 - lambda)^count`. Used by the engines to
    /// catch a neuron up lazily between events.
    pub fn leak_many(&mut self, params: &MnDiscreteParams, which: LeakTarget, count: u64) {
        if count == 0 {
            return;
        }
        match which {
            LeakTarget::Membrane => {
                let factor = (1.0 - params.lambda_m).powf(count as f64);
                self.v_m = params.v_reset + (self.v_m - params.v_reset) * factor;
            }
            LeakTarget::Threshold => {
                let factor = (1.0 - params.lambda_t).powf(count as f64);
                self.theta = params.theta_reset + (self.theta - params.theta_reset) * factor;
            }
        }
    }

    /// Compare the membrane against the effective threshold and apply the
    /// reset rules on a spike. Meant to be called immediately after
    /// [`Self::event_update`]; the neuron cannot fire at any other time.
    ///
    /// In adaptive mode the threshold keeps its value only if it is still
    /// above the (pre-reset) membrane voltage, otherwise it returns to its
    /// reset value.
    pub fn check_and_reset(&mut self, params: &MnDiscreteParams) -> bool {
        let spiked = self.v_m >= params.threshold(self.theta);
        if spiked {
            if let ThresholdMode::Mn = params.mode {
                if self.theta <= self.v_m {
                    self.theta = params.theta_reset;
                }
            }
            self.v_m = params.v_reset;
        }
        spiked
    }
}

/// Number of consecutive unit excitatory events needed to drive the membrane
/// from reset to the fixed threshold, for a leak-free neuron:
/// `ceil(ln(1 - v_th_gap/e_gap) / ln(1 - alpha))` where the gaps are measured
/// from the reset value.
pub fn events_per_spike(alpha_m: f64, v_th: f64, e_syn: f64, v_reset: f64) -> u64 {
    let ratio = (v_th - v_reset) / (e_syn - v_reset);
    assert!(
        ratio > 0.0 && ratio < 1.0,
        "threshold must lie strictly between reset and driving potential"
    );
    ((1.0 - ratio).ln() / (1.0 - alpha_m).ln()).ceil() as u64
}

/// Invert [`events_per_spike`]: pick the membrane step ratio so that exactly
/// `n` events are needed per spike. The returned alpha sits at the midpoint
/// of the valid interval (exponent `n - 1/2`), keeping the count robust to
/// floating-point accumulation.
pub fn alpha_for_events_per_spike(n: u64, v_th: f64, e_syn: f64, v_reset: f64) -> f64 {
    assert!(n >= 1);
    let ratio = (v_th - v_reset) / (e_syn - v_reset);
    assert!(ratio > 0.0 && ratio < 1.0);
    1.0 - (1.0 - ratio).powf(1.0 / (n as f64 - 0.5))
}
