//! Tick-synchronous engine for cooperative-competitive (winner-take-all)
//! networks: adaptive/refractory neurons on a 2D grid, recurrent
//! connectivity through the same LUT records the event-driven array uses,
//! and external address-event drive. Spikes recirculate through the LUT
//! with at least one tick of latency.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifat::{AddressEvent, ArrayGeometry, Lut, NeuronAddr, SynapseKind};
use crate::neuron::{Polarity, WtaNeuronParams, WtaNeuronState};
use crate::rng::{stream, StreamPurpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtaConfig {
    pub geometry: ArrayGeometry,
    pub neuron: WtaNeuronParams,
    /// Charge added per external address event.
    pub input_weight: f64,
}

impl WtaConfig {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if self.geometry.neuron_count() == 0 {
            return Err(Error::InvalidParam("array geometry is empty".into()));
        }
        if !(self.input_weight > 0.0) {
            return Err(Error::InvalidParam("input_weight must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WtaStats {
    pub external_events: u64,
    pub recurrent_deliveries: u64,
    pub spikes: u64,
    pub ticks_run: u64,
}

#[derive(Debug, Clone)]
pub struct WtaOutput {
    pub raster: Vec<(u64, NeuronAddr)>,
    pub spike_counts: Vec<u64>,
    pub stats: WtaStats,
}

/// Recurrent winner-take-all array.
pub struct WtaEngine {
    config: WtaConfig,
    lut: Lut,
    states: Vec<WtaNeuronState>,
    /// Charge scheduled per future tick, dense per neuron.
    pending: BTreeMap<u64, Vec<f64>>,
    bernoulli: Vec<Option<Box<ChaCha8Rng>>>,
    master_seed: u64,
}

impl WtaEngine {
    /// Recurrent entries must carry a delay of at least one tick; zero-delay
    /// loops cannot be scheduled.
    pub fn new(config: WtaConfig, lut: Lut, master_seed: u64) -> Result<Self> {
        config.validate()?;
        for i in 0..config.geometry.neuron_count() {
            let src = config.geometry.addr_of(i);
            if lut.lookup(src).iter().any(|e| e.delay == 0) {
                return Err(Error::validation_one(
                    format!("lut[src={src}]"),
                    "recurrent entries need delay >= 1",
                ));
            }
        }
        let n = config.geometry.neuron_count();
        Ok(Self {
            config,
            lut,
            states: vec![WtaNeuronState::default(); n],
            pending: BTreeMap::new(),
            bernoulli: (0..n).map(|_| None).collect(),
            master_seed,
        })
    }

    /// Run for `ticks` ticks over an external event stream sorted by tick.
    pub fn run(
        &mut self,
        external: impl IntoIterator<Item = AddressEvent>,
        ticks: u64,
    ) -> Result<WtaOutput> {
        let n = self.config.geometry.neuron_count();
        let mut stats = WtaStats::default();
        let mut raster = Vec::new();
        let mut spike_counts = vec![0u64; n];
        let mut source = external.into_iter();
        let mut pending_ev: Option<AddressEvent> = None;
        let mut prev_tick = 0u64;
        let mut index = 0usize;

        for now in 0..ticks {
            // External drive due this tick.
            let mut charge = self
                .pending
                .remove(&now)
                .unwrap_or_else(|| vec![0.0; n]);
            loop {
                let ev = match pending_ev.take().or_else(|| source.next()) {
                    Some(ev) => ev,
                    None => break,
                };
                if ev.tick < prev_tick {
                    return Err(Error::UnsortedEvents {
                        index,
                        tick: ev.tick,
                        prev: prev_tick,
                    });
                }
                if !self.config.geometry.contains(ev.address) {
                    return Err(Error::validation_one(
                        format!("events[{index}].address"),
                        format!("address {} outside array bounds", ev.address),
                    ));
                }
                if ev.tick > now {
                    pending_ev = Some(ev);
                    break;
                }
                prev_tick = ev.tick;
                index += 1;
                stats.external_events += 1;
                let idx = self.config.geometry.index_of(ev.address);
                let sign = match ev.polarity {
                    Polarity::Exc => 1.0,
                    Polarity::Inh => -1.0,
                };
                charge[idx] += sign * self.config.input_weight;
            }

            // Step every neuron, then recirculate spikes through the LUT.
            for idx in 0..n {
                let spiked = self.states[idx].step(&self.config.neuron, charge[idx], now);
                if !spiked {
                    continue;
                }
                stats.spikes += 1;
                spike_counts[idx] += 1;
                let addr = self.config.geometry.addr_of(idx);
                raster.push((now, addr));
                for entry in self.lut.lookup(addr) {
                    let delivered = match entry.kind {
                        SynapseKind::Conductance => true,
                        SynapseKind::Probabilistic => {
                            let dst_idx = self.config.geometry.index_of(entry.dst);
                            let rng = self.bernoulli[dst_idx].get_or_insert_with(|| {
                                Box::new(stream(
                                    self.master_seed,
                                    StreamPurpose::SynapseBernoulli,
                                    dst_idx as u64,
                                ))
                            });
                            rng.gen::<f64>() < entry.weight
                        }
                    };
                    if !delivered {
                        continue;
                    }
                    stats.recurrent_deliveries += 1;
                    let dst_idx = self.config.geometry.index_of(entry.dst);
                    let sign = match entry.polarity {
                        Polarity::Exc => 1.0,
                        Polarity::Inh => -1.0,
                    };
                    let weight = match entry.kind {
                        SynapseKind::Conductance => entry.weight,
                        SynapseKind::Probabilistic => 1.0,
                    };
                    let due = now + entry.delay;
                    self.pending
                        .entry(due)
                        .or_insert_with(|| vec![0.0; n])[dst_idx] += sign * weight;
                }
            }
        }

        stats.ticks_run = ticks;
        Ok(WtaOutput {
            raster,
            spike_counts,
            stats,
        })
    }
}

/// Per-neuron Bernoulli drive: each tick, neuron `i` receives an excitatory
/// event with probability `rates_per_tick[i]`. Events are sorted by tick and
/// derived from per-neuron streams, so a neuron's drive does not depend on
/// the others.
pub fn poisson_drive(
    geometry: ArrayGeometry,
    rates_per_tick: &[f64],
    ticks: u64,
    master_seed: u64,
) -> Vec<AddressEvent> {
    let n = geometry.neuron_count();
    assert_eq!(rates_per_tick.len(), n);
    let mut streams: Vec<ChaCha8Rng> = (0..n)
        .map(|i| stream(master_seed, StreamPurpose::Stimulus, i as u64))
        .collect();
    let mut events = Vec::new();
    for t in 0..ticks {
        for (i, rng) in streams.iter_mut().enumerate() {
            if rng.gen::<f64>() < rates_per_tick[i] {
                events.push(AddressEvent {
                    tick: t,
                    address: geometry.addr_of(i),
                    polarity: Polarity::Exc,
                });
            }
        }
    }
    events
}
