//! Hierarchical cortex fabric: minicolumns of 100 neurons grouped into
//! hypercolumns, spike-count events with on-the-fly destination generation,
//! a two-phase axon delay store (1..16 ms), linear synaptic accumulation and
//! PSC-decaying leaky somas advanced under a single master barrier.
//!
//! Connectivity is never stored per neuron pair. A connection rule holds at
//! most 16 hypercolumn-level targets per source type; destination addresses
//! are enumerated from the rule when an event fires, so configuration
//! storage is independent of network size.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::rng::{stream, StreamPurpose};

pub const NEURONS_PER_MINICOLUMN: u32 = 100;
pub const MAX_TYPES: usize = 8;
pub const MAX_MINICOLUMNS: u16 = 128;
pub const MAX_HC_TARGETS: usize = 16;
pub const MIN_DELAY_MS: f64 = 1.0;
pub const MAX_DELAY_MS: f64 = 16.0;

/// Soma parameters for one neuron type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomaParams {
    /// Fraction of the membrane leaked per 1 ms tick, in [0, 1].
    pub leak: f64,
    pub threshold: f64,
    /// Ticks the membrane stays clamped after a spike.
    pub refractory_ticks: u32,
    /// PSC decay time constant in ms.
    pub psc_tau_ms: f64,
}

impl Default for SomaParams {
    fn default() -> Self {
        Self {
            leak: 0.1,
            threshold: 1.0,
            refractory_ticks: 2,
            psc_tau_ms: 5.0,
        }
    }
}

/// One neuron type inside a minicolumn: population size and soma parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeSpec {
    pub count: u8,
    pub soma: SomaParams,
}

/// Composition of a minicolumn: up to eight types whose counts sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinicolumnSpec {
    pub types: Vec<TypeSpec>,
}

impl MinicolumnSpec {
    /// A single-type minicolumn of 100 identical neurons.
    pub fn uniform(soma: SomaParams) -> Self {
        Self {
            types: vec![TypeSpec { count: 100, soma }],
        }
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        if self.types.is_empty() || self.types.len() > MAX_TYPES {
            issues.push(ValidationIssue::new(
                format!("{path}.types"),
                format!("{} types outside 1..={MAX_TYPES}", self.types.len()),
            ));
        }
        let total: u32 = self.types.iter().map(|t| t.count as u32).sum();
        if total != NEURONS_PER_MINICOLUMN {
            issues.push(ValidationIssue::new(
                format!("{path}.types"),
                format!("type counts sum to {total}, expected {NEURONS_PER_MINICOLUMN}"),
            ));
        }
        for (i, t) in self.types.iter().enumerate() {
            if !(t.soma.psc_tau_ms > 0.0) {
                issues.push(ValidationIssue::new(
                    format!("{path}.types[{i}].psc_tau_ms"),
                    "must be > 0",
                ));
            }
            if !(0.0..=1.0).contains(&t.soma.leak) {
                issues.push(ValidationIssue::new(
                    format!("{path}.types[{i}].leak"),
                    "must be in [0, 1]",
                ));
            }
        }
    }
}

/// A hypercolumn: up to 128 minicolumns sharing one spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercolumnSpec {
    pub minicolumns: u16,
    pub minicolumn: MinicolumnSpec,
}

impl HypercolumnSpec {
    pub fn validate(&self, path: &str, issues: &mut Vec<ValidationIssue>) {
        if self.minicolumns == 0 || self.minicolumns > MAX_MINICOLUMNS {
            issues.push(ValidationIssue::new(
                format!("{path}.minicolumns"),
                format!("{} outside 1..={MAX_MINICOLUMNS}", self.minicolumns),
            ));
        }
        self.minicolumn.validate(&format!("{path}.minicolumn"), issues);
    }
}

/// Source coordinates of a count event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceId {
    pub hc: u16,
    pub mc: u16,
    pub ttype: u8,
}

impl std::fmt::Display for SourceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.hc, self.mc, self.ttype)
    }
}

/// A spike-count packet: how many neurons of one (minicolumn, type) fired in
/// a source timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEvent {
    pub src: SourceId,
    pub count: u16,
}

/// Minicolumn-level addressing of a hypercolumn target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum McMap {
    /// Every minicolumn of the target hypercolumn.
    All,
    /// The minicolumn with the same index as the source.
    Identity,
    /// Source index plus a fixed offset.
    Offset { by: i16 },
}

/// One hypercolumn-level target of a source type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Signed offset from the source hypercolumn.
    pub hc_offset: i16,
    /// Axonal delay in ms; integer in deterministic mode, any value in
    /// [1, 16] in stochastic mode.
    pub delay_ms: f64,
    pub mc_map: McMap,
    /// Synaptic weight onto each destination type (index = dst type).
    pub weights: Vec<f64>,
}

/// Per-source-type connection targets; the whole connectivity of a network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConnectionRule {
    /// `targets[src_type]` lists that type's hypercolumn-level targets.
    pub targets: Vec<Vec<TargetSpec>>,
}

impl ConnectionRule {
    pub fn validate(
        &self,
        n_types: usize,
        stochastic: bool,
        path: &str,
        issues: &mut Vec<ValidationIssue>,
    ) {
        if self.targets.len() != n_types {
            issues.push(ValidationIssue::new(
                format!("{path}.targets"),
                format!("{} source types configured, network has {n_types}", self.targets.len()),
            ));
        }
        for (st, targets) in self.targets.iter().enumerate() {
            if targets.len() > MAX_HC_TARGETS {
                issues.push(ValidationIssue::new(
                    format!("{path}.targets[{st}]"),
                    format!("{} targets exceed the {MAX_HC_TARGETS}-target limit", targets.len()),
                ));
            }
            for (ti, t) in targets.iter().enumerate() {
                let p = format!("{path}.targets[{st}][{ti}]");
                if !(MIN_DELAY_MS..=MAX_DELAY_MS).contains(&t.delay_ms) {
                    issues.push(ValidationIssue::new(
                        format!("{p}.delay_ms"),
                        format!("{} outside [{MIN_DELAY_MS}, {MAX_DELAY_MS}]", t.delay_ms),
                    ));
                } else if !stochastic && t.delay_ms.fract() != 0.0 {
                    issues.push(ValidationIssue::new(
                        format!("{p}.delay_ms"),
                        "must be an integer in deterministic delay mode",
                    ));
                }
                if t.weights.len() != n_types {
                    issues.push(ValidationIssue::new(
                        format!("{p}.weights"),
                        format!("{} weights, expected one per type ({n_types})", t.weights.len()),
                    ));
                }
            }
        }
    }

    /// Number of scalars this configuration stores. Constant in network
    /// size: destination addresses are generated, never stored.
    pub fn storage_scalars(&self) -> usize {
        self.targets
            .iter()
            .flatten()
            .map(|t| 3 + t.weights.len())
            .sum()
    }
}

/// A generated destination record for one count event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Destination {
    pub hc: u16,
    pub mc: u16,
    pub delay_ms: f64,
    pub src_type: u8,
    /// Index of the target spec that produced this record (weight lookup).
    pub target_idx: u8,
}

/// Static shape of the network: hypercolumn count and minicolumns per
/// hypercolumn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CortexLayout {
    pub hypercolumns: u16,
    pub minicolumns_per_hc: u16,
}

impl CortexLayout {
    pub fn global_mc(&self, hc: u16, mc: u16) -> usize {
        hc as usize * self.minicolumns_per_hc as usize + mc as usize
    }

    pub fn minicolumn_count(&self) -> usize {
        self.hypercolumns as usize * self.minicolumns_per_hc as usize
    }
}

/// Enumerate the destination minicolumns of one count event. Targets whose
/// hypercolumn or minicolumn offset leaves the configured network are
/// skipped and counted in `skipped`.
pub fn generate_destinations(
    src: SourceId,
    targets: &[TargetSpec],
    layout: &CortexLayout,
    skipped: &mut u64,
) -> Vec<Destination> {
    let mut out = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        let hc = src.hc as i32 + t.hc_offset as i32;
        if hc < 0 || hc >= layout.hypercolumns as i32 {
            *skipped += 1;
            continue;
        }
        let hc = hc as u16;
        match t.mc_map {
            McMap::All => {
                for mc in 0..layout.minicolumns_per_hc {
                    out.push(Destination {
                        hc,
                        mc,
                        delay_ms: t.delay_ms,
                        src_type: src.ttype,
                        target_idx: ti as u8,
                    });
                }
            }
            McMap::Identity => out.push(Destination {
                hc,
                mc: src.mc,
                delay_ms: t.delay_ms,
                src_type: src.ttype,
                target_idx: ti as u8,
            }),
            McMap::Offset { by } => {
                let mc = src.mc as i32 + by as i32;
                if mc < 0 || mc >= layout.minicolumns_per_hc as i32 {
                    *skipped += 1;
                } else {
                    out.push(Destination {
                        hc,
                        mc: mc as u16,
                        delay_ms: t.delay_ms,
                        src_type: src.ttype,
                        target_idx: ti as u8,
                    });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Axon delay store
// ---------------------------------------------------------------------------

/// Two-phase axonal delay buffer. TX files an event under its delay;
/// RX drains the events due at the requested tick. In stochastic mode a
/// fractional delay `d` is realized as `floor(d)` or `floor(d) + 1` with the
/// exact expectation `d`; the support never leaves that pair and every event
/// is delivered exactly once.
#[derive(Debug, Clone)]
pub struct AxonBuffer<T> {
    bins: BTreeMap<u64, Vec<StoredEvent<T>>>,
    stochastic: bool,
    pub enqueued: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone)]
struct StoredEvent<T> {
    payload: T,
    tx_tick: u64,
    /// Probability of deferring delivery by one extra tick.
    defer_p: f64,
}

impl<T> AxonBuffer<T> {
    pub fn new(stochastic: bool) -> Self {
        Self {
            bins: BTreeMap::new(),
            stochastic,
            enqueued: 0,
            delivered: 0,
        }
    }

    pub fn pending(&self) -> usize {
        self.bins.values().map(Vec::len).sum()
    }

    /// File `payload` for delivery `delay_ms` after `now`.
    pub fn tx(&mut self, payload: T, now: u64, delay_ms: f64) -> Result<()> {
        if !(MIN_DELAY_MS..=MAX_DELAY_MS).contains(&delay_ms) {
            return Err(Error::InvalidParam(format!(
                "axonal delay {delay_ms} ms outside [{MIN_DELAY_MS}, {MAX_DELAY_MS}]"
            )));
        }
        let (bin_delay, defer_p) = if self.stochastic {
            (delay_ms.floor() as u64, delay_ms.fract())
        } else {
            if delay_ms.fract() != 0.0 {
                return Err(Error::InvalidParam(format!(
                    "deterministic mode requires integer delays, got {delay_ms}"
                )));
            }
            (delay_ms as u64, 0.0)
        };
        self.bins.entry(now + bin_delay).or_default().push(StoredEvent {
            payload,
            tx_tick: now,
            defer_p,
        });
        self.enqueued += 1;
        Ok(())
    }

    /// Drain everything due at `now`. Returns `(payload, tx_tick)` pairs so
    /// callers can observe realized delays.
    pub fn rx(&mut self, now: u64, rng: &mut ChaCha8Rng) -> Vec<(T, u64)> {
        let Some(batch) = self.bins.remove(&now) else {
            return Vec::new();
        };
        let mut due = Vec::with_capacity(batch.len());
        for ev in batch {
            if ev.defer_p > 0.0 && rng.gen::<f64>() < ev.defer_p {
                self.bins.entry(now + 1).or_default().push(StoredEvent {
                    defer_p: 0.0,
                    ..ev
                });
            } else {
                self.delivered += 1;
                due.push((ev.payload, ev.tx_tick));
            }
        }
        due
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Payload carried through the axon store: destination minicolumn plus the
/// indices needed to look the weight row back up at delivery time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RoutedCount {
    dst_mc: u32,
    src_type: u8,
    target_idx: u8,
    count: u16,
}

#[derive(Debug, Clone, Copy, Default)]
struct Soma {
    v: f64,
    psc: f64,
    refrac_until: u64,
}

/// Aggregate counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CortexStats {
    /// Destination-level count events filed into the axon store.
    pub events_enqueued: u64,
    /// Destination-level count events delivered by the axon store.
    pub events_delivered: u64,
    /// Total neuron spikes across the run.
    pub spikes: u64,
    /// Sum of counts over all internally generated count events.
    pub generated_count_sum: u64,
    /// Sum of counts over injected external events.
    pub external_count_sum: u64,
    /// Source count events created by minicolumns.
    pub count_events_created: u64,
    /// Destinations skipped because an offset left the network.
    pub skipped_destinations: u64,
    /// Largest number of in-flight events observed in the axon store.
    pub max_axon_backlog: u64,
    pub ticks_run: u64,
}

/// One raster record: a (hypercolumn, minicolumn, type) source and its spike
/// count at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub tick: u64,
    pub src: SourceId,
    pub count: u16,
}

/// Engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CortexConfig {
    pub hypercolumns: u16,
    pub hypercolumn: HypercolumnSpec,
    pub rule: ConnectionRule,
    /// Use the stochastic axon read-out (fractional expected delays).
    #[serde(default)]
    pub stochastic_delays: bool,
}

impl CortexConfig {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.hypercolumns == 0 {
            issues.push(ValidationIssue::new("cortex.hypercolumns", "must be >= 1"));
        }
        self.hypercolumn.validate("cortex.hypercolumn", &mut issues);
        self.rule.validate(
            self.hypercolumn.minicolumn.n_types(),
            self.stochastic_delays,
            "cortex.rule",
            &mut issues,
        );
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn layout(&self) -> CortexLayout {
        CortexLayout {
            hypercolumns: self.hypercolumns,
            minicolumns_per_hc: self.hypercolumn.minicolumns,
        }
    }
}

/// The tick-barrier cortex engine. Every tick runs, in order: minicolumn
/// update, TX of the generated counts, RX of next-tick events and synaptic
/// accumulation. Minicolumns update in parallel; generated events merge in
/// canonical (hypercolumn, minicolumn, type) order so results do not depend
/// on the worker count.
pub struct CortexEngine {
    config: CortexConfig,
    layout: CortexLayout,
    /// Per (global mc, type, neuron) soma state.
    somata: Vec<Vec<Vec<Soma>>>,
    /// PSC decay factor per type.
    psc_decay: Vec<f64>,
    /// Input accumulated for the upcoming tick, per (global mc, type).
    input_next: Vec<Vec<f64>>,
    axon: AxonBuffer<RoutedCount>,
    delay_rng: ChaCha8Rng,
    tick: u64,
    pub stats: CortexStats,
    pub raster: Vec<CountRecord>,
}

impl CortexEngine {
    pub fn new(config: CortexConfig, master_seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let spec = &config.hypercolumn.minicolumn;
        let n_mc = layout.minicolumn_count();
        let somata = (0..n_mc)
            .map(|_| {
                spec.types
                    .iter()
                    .map(|t| vec![Soma::default(); t.count as usize])
                    .collect()
            })
            .collect();
        let psc_decay = spec
            .types
            .iter()
            .map(|t| (-1.0 / t.soma.psc_tau_ms).exp())
            .collect();
        let input_next = vec![vec![0.0; spec.n_types()]; n_mc];
        let stochastic = config.stochastic_delays;
        Ok(Self {
            config,
            layout,
            somata,
            psc_decay,
            input_next,
            axon: AxonBuffer::new(stochastic),
            delay_rng: stream(master_seed, StreamPurpose::AxonDelay, 0),
            tick: 0,
            stats: CortexStats::default(),
            raster: Vec::new(),
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Inject an external count event at the current tick. It takes the
    /// same routed path as internally generated events.
    pub fn inject(&mut self, ev: CountEvent) -> Result<()> {
        let n_types = self.config.hypercolumn.minicolumn.n_types();
        if ev.src.hc >= self.layout.hypercolumns
            || ev.src.mc >= self.layout.minicolumns_per_hc
            || ev.src.ttype as usize >= n_types
        {
            return Err(Error::validation_one(
                "inject.src",
                format!("source {} outside the configured network", ev.src),
            ));
        }
        self.stats.external_count_sum += ev.count as u64;
        self.route_count(ev);
        Ok(())
    }

    fn route_count(&mut self, ev: CountEvent) {
        let targets = &self.config.rule.targets[ev.src.ttype as usize];
        let destinations = generate_destinations(
            ev.src,
            targets,
            &self.layout,
            &mut self.stats.skipped_destinations,
        );
        for d in destinations {
            let payload = RoutedCount {
                dst_mc: self.layout.global_mc(d.hc, d.mc) as u32,
                src_type: d.src_type,
                target_idx: d.target_idx,
                count: ev.count,
            };
            self.axon
                .tx(payload, self.tick, d.delay_ms)
                .expect("delays validated at configuration");
            self.stats.events_enqueued += 1;
        }
    }

    /// Advance one master tick.
    pub fn step(&mut self) {
        let spec = self.config.hypercolumn.minicolumn.clone();
        let now = self.tick;
        let input = std::mem::replace(
            &mut self.input_next,
            vec![vec![0.0; spec.n_types()]; self.layout.minicolumn_count()],
        );

        // Phase 1: minicolumn update (parallel, merged in index order).
        let psc_decay = &self.psc_decay;
        let counts: Vec<Vec<u16>> = self
            .somata
            .par_iter_mut()
            .zip(input.par_iter())
            .map(|(mc_somata, mc_input)| {
                let mut counts = vec![0u16; spec.n_types()];
                for (ti, t) in spec.types.iter().enumerate() {
                    let charge = mc_input[ti];
                    let decay = psc_decay[ti];
                    for soma in &mut mc_somata[ti] {
                        soma.psc = soma.psc * decay + charge;
                        if now < soma.refrac_until {
                            continue;
                        }
                        soma.v = soma.v * (1.0 - t.soma.leak) + soma.psc;
                        if soma.v >= t.soma.threshold {
                            soma.v = 0.0;
                            soma.refrac_until = now + 1 + t.soma.refractory_ticks as u64;
                            counts[ti] += 1;
                        }
                    }
                }
                counts
            })
            .collect();

        // Phase 2: TX generated counts in canonical (hc, mc, type) order.
        for (g, mc_counts) in counts.iter().enumerate() {
            for (ti, &c) in mc_counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let src = SourceId {
                    hc: (g / self.layout.minicolumns_per_hc as usize) as u16,
                    mc: (g % self.layout.minicolumns_per_hc as usize) as u16,
                    ttype: ti as u8,
                };
                self.stats.spikes += c as u64;
                self.stats.generated_count_sum += c as u64;
                self.stats.count_events_created += 1;
                self.raster.push(CountRecord {
                    tick: now,
                    src,
                    count: c,
                });
                self.route_count(CountEvent { src, count: c });
            }
        }

        self.stats.max_axon_backlog = self.stats.max_axon_backlog.max(self.axon.pending() as u64);

        // Phase 3+4: RX events due next tick, accumulate their weighted
        // counts in canonical order.
        let mut due = self.axon.rx(now + 1, &mut self.delay_rng);
        due.sort_by_key(|(p, tx)| (p.dst_mc, p.src_type, p.target_idx, *tx, p.count));
        for (p, _) in due {
            self.stats.events_delivered += 1;
            let weights =
                &self.config.rule.targets[p.src_type as usize][p.target_idx as usize].weights;
            let row = &mut self.input_next[p.dst_mc as usize];
            for (ti, w) in weights.iter().enumerate() {
                row[ti] += p.count as f64 * w;
            }
        }

        self.tick += 1;
        self.stats.ticks_run = self.tick;
    }

    /// Run `ticks` master steps.
    pub fn run(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }

    /// Drain the axon store after the stimulus ends (up to the maximum
    /// delay plus one deferral), so conservation counters can be compared.
    pub fn drain(&mut self) {
        let mut guard = 0;
        while self.axon.pending() > 0 && guard < MAX_DELAY_MS as u64 + 2 {
            self.step();
            guard += 1;
        }
    }

    pub fn axon_enqueued(&self) -> u64 {
        self.axon.enqueued
    }

    pub fn axon_delivered(&self) -> u64 {
        self.axon.delivered
    }
}
