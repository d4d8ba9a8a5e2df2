//! Event-driven IFAT array: address-event decode, off-array LUT
//! connectivity, shared-soma service ordering and device-mismatch modeling.
//!
//! The array holds switch-capacitor neurons addressed by (row, col, cell).
//! Input address events pass through the LUT, which fans each one out to its
//! destination synapses. A single shared soma services deliveries one at a
//! time (the configurable per-tick cap); excess deliveries queue and are
//! never dropped. Since the array only fires while servicing an event, no
//! output arbiter exists: spikes are recorded at the servicing tick.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::neuron::discrete::LeakTarget;
use crate::neuron::{MnDiscreteParams, MnNeuronState, Polarity};
use crate::rng::{stream, StreamPurpose};

/// Address of one neuron cell: array position plus the cell-select bits that
/// pick a cell inside the supercell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronAddr {
    pub row: u16,
    pub col: u16,
    pub cell: u8,
}

impl NeuronAddr {
    pub fn new(row: u16, col: u16, cell: u8) -> Self {
        Self { row, col, cell }
    }
}

impl std::fmt::Display for NeuronAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}.{}", self.row, self.col, self.cell)
    }
}

/// Array dimensions; `cells` is the number of independently addressable
/// neuron cells per supercell (4 in I&F mode, 2 in adaptive mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: u16,
    pub cols: u16,
    pub cells: u8,
}

impl ArrayGeometry {
    pub fn neuron_count(&self) -> usize {
        self.rows as usize * self.cols as usize * self.cells as usize
    }

    pub fn contains(&self, addr: NeuronAddr) -> bool {
        addr.row < self.rows && addr.col < self.cols && addr.cell < self.cells
    }

    pub fn index_of(&self, addr: NeuronAddr) -> usize {
        (addr.row as usize * self.cols as usize + addr.col as usize) * self.cells as usize
            + addr.cell as usize
    }

    pub fn addr_of(&self, index: usize) -> NeuronAddr {
        let cells = self.cells as usize;
        let cols = self.cols as usize;
        NeuronAddr {
            row: (index / (cols * cells)) as u16,
            col: ((index / cells) % cols) as u16,
            cell: (index % cells) as u8,
        }
    }
}

/// A timestamped input spike addressed to one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressEvent {
    pub tick: u64,
    pub address: NeuronAddr,
    pub polarity: Polarity,
}

/// How a LUT entry applies charge: a fixed conductance-style weight, or an
/// all-or-nothing unit event delivered with probability `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynapseKind {
    Conductance,
    Probabilistic,
}

/// One connectivity record: source address, destination address, synapse
/// behavior and axonal delay in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub src: NeuronAddr,
    pub dst: NeuronAddr,
    pub kind: SynapseKind,
    /// Step scale for conductance synapses, delivery probability for
    /// probabilistic ones.
    pub weight: f64,
    pub polarity: Polarity,
    #[serde(default)]
    pub delay: u64,
}

/// Off-array look-up table, indexed by source address.
#[derive(Debug, Clone, Default)]
pub struct Lut {
    by_src: HashMap<NeuronAddr, Vec<LutEntry>>,
    len: usize,
}

impl Lut {
    /// Build and validate. Destination/source bounds are checked against the
    /// geometry; every problem is reported, not just the first.
    pub fn from_entries(entries: Vec<LutEntry>, geometry: &ArrayGeometry) -> Result<Self> {
        let mut issues = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            if !geometry.contains(e.src) {
                issues.push(ValidationIssue::new(
                    format!("lut[{i}].src"),
                    format!("address {} outside {}x{}x{} array", e.src, geometry.rows, geometry.cols, geometry.cells),
                ));
            }
            if !geometry.contains(e.dst) {
                issues.push(ValidationIssue::new(
                    format!("lut[{i}].dst"),
                    format!("address {} outside {}x{}x{} array", e.dst, geometry.rows, geometry.cols, geometry.cells),
                ));
            }
            match e.kind {
                SynapseKind::Probabilistic => {
                    if !(0.0..=1.0).contains(&e.weight) {
                        issues.push(ValidationIssue::new(
                            format!("lut[{i}].weight"),
                            "delivery probability must be in [0, 1]",
                        ));
                    }
                }
                SynapseKind::Conductance => {
                    if !(e.weight > 0.0) {
                        issues.push(ValidationIssue::new(
                            format!("lut[{i}].weight"),
                            "conductance weight must be > 0",
                        ));
                    }
                }
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        let mut by_src: HashMap<NeuronAddr, Vec<LutEntry>> = HashMap::new();
        let len = entries.len();
        for e in entries {
            by_src.entry(e.src).or_default().push(e);
        }
        Ok(Self { by_src, len })
    }

    /// All entries whose source matches, in insertion order. A source with
    /// no fan-out yields the empty slice.
    pub fn lookup(&self, src: NeuronAddr) -> &[LutEntry] {
        self.by_src.get(&src).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Identity connectivity: every neuron maps to itself with the given
    /// conductance weight. The configuration used for array
    /// characterization runs.
    pub fn identity(geometry: &ArrayGeometry, weight: f64) -> Self {
        let entries = (0..geometry.neuron_count())
            .map(|i| {
                let a = geometry.addr_of(i);
                LutEntry {
                    src: a,
                    dst: a,
                    kind: SynapseKind::Conductance,
                    weight,
                    polarity: Polarity::Exc,
                    delay: 0,
                }
            })
            .collect();
        Self::from_entries(entries, geometry).expect("identity LUT is always valid")
    }
}

/// Process-variation model: per-neuron multiplicative factors on the
/// membrane step ratio, drawn once per run from a Gaussian truncated at
/// three sigma. Factors are spatial — fixed for the lifetime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchModel {
    pub sigma_alpha: f64,
}

impl MismatchModel {
    pub fn none() -> Self {
        Self { sigma_alpha: 0.0 }
    }

    /// Draw the per-neuron factors under `master_seed`. Each neuron uses its
    /// own derived stream, so factors do not depend on array size ordering.
    pub fn factors(&self, neuron_count: usize, master_seed: u64) -> Vec<f64> {
        if self.sigma_alpha == 0.0 {
            return vec![1.0; neuron_count];
        }
        let normal = Normal::new(1.0, self.sigma_alpha).expect("sigma must be finite");
        (0..neuron_count)
            .map(|i| {
                let mut rng = stream(master_seed, StreamPurpose::Mismatch, i as u64);
                loop {
                    let x = normal.sample(&mut rng);
                    if (x - 1.0).abs() <= 3.0 * self.sigma_alpha {
                        break x;
                    }
                }
            })
            .collect()
    }
}

/// Engine configuration. Leak clocks are realized as integer divisors of the
/// simulation tick; `None` disables the corresponding leak path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfatConfig {
    pub geometry: ArrayGeometry,
    pub neuron: MnDiscreteParams,
    /// Deliveries the shared soma services per tick. The default of 1
    /// models the measured ~1 MHz bottleneck at 1 us ticks.
    pub service_cap_per_tick: u32,
    pub leak_every_m: Option<u64>,
    pub leak_every_t: Option<u64>,
}

impl IfatConfig {
    pub fn new(geometry: ArrayGeometry, neuron: MnDiscreteParams) -> Self {
        Self {
            geometry,
            neuron,
            service_cap_per_tick: 1,
            leak_every_m: None,
            leak_every_t: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if self.service_cap_per_tick == 0 {
            return Err(Error::InvalidParam(
                "service_cap_per_tick must be >= 1".into(),
            ));
        }
        if self.leak_every_m == Some(0) || self.leak_every_t == Some(0) {
            return Err(Error::InvalidParam("leak divisors must be >= 1".into()));
        }
        if self.geometry.neuron_count() == 0 {
            return Err(Error::InvalidParam("array geometry is empty".into()));
        }
        Ok(())
    }
}

/// Apply one LUT entry to its destination neuron. Probabilistic entries
/// deliver a unit update with their stored probability; conductance entries
/// always deliver, scaled by weight times the neuron's mismatch factor.
/// Returns (update applied, neuron spiked).
pub fn deliver_event(
    entry: &LutEntry,
    neuron: &mut MnNeuronState,
    params: &MnDiscreteParams,
    mismatch_factor: f64,
    rng: &mut impl Rng,
) -> (bool, bool) {
    let applied = match entry.kind {
        SynapseKind::Probabilistic => {
            if rng.gen::<f64>() < entry.weight {
                neuron.event_update(params, entry.polarity, mismatch_factor);
                true
            } else {
                false
            }
        }
        SynapseKind::Conductance => {
            neuron.event_update(params, entry.polarity, entry.weight * mismatch_factor);
            true
        }
    };
    let spiked = if applied {
        neuron.check_and_reset(params)
    } else {
        false
    };
    (applied, spiked)
}

/// Run counters and aggregates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IfatStats {
    /// Input address events ingested from the stream.
    pub events_in: u64,
    /// Total LUT fan-out matched across all input events.
    pub lut_fanout_total: u64,
    /// Deliveries serviced by the shared soma (equals fan-out once drained).
    pub deliveries_serviced: u64,
    /// Synaptic updates actually applied (Bernoulli successes included).
    pub updates_applied: u64,
    /// Output spikes.
    pub spikes: u64,
    /// Largest number of due-but-unserviced deliveries observed.
    pub max_backlog: u64,
    /// Tick at which the run drained.
    pub ticks_run: u64,
}

/// Full output of an array run.
#[derive(Debug, Clone)]
pub struct IfatOutput {
    pub raster: Vec<(u64, NeuronAddr)>,
    /// Per-neuron serviced deliveries.
    pub input_events: Vec<u64>,
    /// Per-neuron output spikes.
    pub output_events: Vec<u64>,
    pub stats: IfatStats,
}

impl IfatOutput {
    /// Per-neuron output/input event ratios; neurons that received nothing
    /// report 0.
    pub fn ratios(&self) -> Vec<f64> {
        self.input_events
            .iter()
            .zip(&self.output_events)
            .map(|(&inp, &out)| if inp == 0 { 0.0 } else { out as f64 / inp as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct QueuedDelivery {
    due: u64,
    seq: u64,
    dst: u32,
    kind: SynapseKind,
    weight: f64,
    polarity: Polarity,
}

impl PartialEq for QueuedDelivery {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.seq == other.seq
    }
}
impl Eq for QueuedDelivery {}
impl PartialOrd for QueuedDelivery {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedDelivery {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.due, self.seq).cmp(&(other.due, other.seq))
    }
}

struct NeuronSlot {
    state: MnNeuronState,
    leak_applied_m: u64,
    leak_applied_t: u64,
    bernoulli: Option<Box<ChaCha8Rng>>,
}

/// Run the array over an input event stream, which must be sorted by tick.
/// `mismatch_factors` must hold one factor per neuron (see
/// [`MismatchModel::factors`]). Deliveries above the per-tick service cap
/// queue FIFO to later ticks; the run ends when the queue drains.
pub fn run_ifat(
    events: impl IntoIterator<Item = AddressEvent>,
    config: &IfatConfig,
    lut: &Lut,
    mismatch_factors: &[f64],
    master_seed: u64,
) -> Result<IfatOutput> {
    config.validate()?;
    let n = config.geometry.neuron_count();
    if mismatch_factors.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mismatch factors: expected {n}, got {}",
            mismatch_factors.len()
        )));
    }

    let mut slots: Vec<NeuronSlot> = (0..n)
        .map(|_| NeuronSlot {
            state: MnNeuronState::resting(&config.neuron),
            leak_applied_m: 0,
            leak_applied_t: 0,
            bernoulli: None,
        })
        .collect();

    let mut heap: BinaryHeap<Reverse<QueuedDelivery>> = BinaryHeap::new();
    let mut stats = IfatStats::default();
    let mut raster = Vec::new();
    let mut input_events = vec![0u64; n];
    let mut output_events = vec![0u64; n];
    let mut seq = 0u64;

    let mut source = events.into_iter();
    let mut pending: Option<AddressEvent> = None;
    let mut prev_tick = 0u64;
    let mut index = 0usize;
    let mut tick = 0u64;

    loop {
        // Ingest every stream event due by the current tick.
        loop {
            let ev = match pending.take().or_else(|| source.next()) {
                Some(ev) => ev,
                None => break,
            };
            if stats.events_in > 0 && ev.tick < prev_tick {
                return Err(Error::UnsortedEvents {
                    index,
                    tick: ev.tick,
                    prev: prev_tick,
                });
            }
            if !config.geometry.contains(ev.address) {
                return Err(Error::validation_one(
                    format!("events[{index}].address"),
                    format!("address {} outside array bounds", ev.address),
                ));
            }
            if ev.tick > tick {
                pending = Some(ev);
                break;
            }
            prev_tick = ev.tick;
            index += 1;
            stats.events_in += 1;
            for entry in lut.lookup(ev.address) {
                stats.lut_fanout_total += 1;
                heap.push(Reverse(QueuedDelivery {
                    due: ev.tick + entry.delay,
                    seq,
                    dst: config.geometry.index_of(entry.dst) as u32,
                    kind: entry.kind,
                    weight: entry.weight,
                    polarity: entry.polarity,
                }));
                seq += 1;
            }
        }

        // Service up to the cap.
        let mut served = 0u32;
        while served < config.service_cap_per_tick {
            match heap.peek() {
                Some(Reverse(d)) if d.due <= tick => {}
                _ => break,
            }
            let Reverse(d) = heap.pop().unwrap();
            served += 1;
            let idx = d.dst as usize;
            let slot = &mut slots[idx];

            if let Some(every) = config.leak_every_m {
                let target = tick / every;
                slot.state.leak_many(
                    &config.neuron,
                    LeakTarget::Membrane,
                    target - slot.leak_applied_m,
                );
                slot.leak_applied_m = target;
            }
            if let Some(every) = config.leak_every_t {
                let target = tick / every;
                slot.state.leak_many(
                    &config.neuron,
                    LeakTarget::Threshold,
                    target - slot.leak_applied_t,
                );
                slot.leak_applied_t = target;
            }

            let entry = LutEntry {
                src: config.geometry.addr_of(idx),
                dst: config.geometry.addr_of(idx),
                kind: d.kind,
                weight: d.weight,
                polarity: d.polarity,
                delay: 0,
            };
            let needs_rng = matches!(d.kind, SynapseKind::Probabilistic);
            if needs_rng && slot.bernoulli.is_none() {
                slot.bernoulli = Some(Box::new(stream(
                    master_seed,
                    StreamPurpose::SynapseBernoulli,
                    idx as u64,
                )));
            }
            let mut fallback = stream(master_seed, StreamPurpose::SynapseBernoulli, u64::MAX);
            let rng: &mut ChaCha8Rng = slot
                .bernoulli
                .as_deref_mut()
                .unwrap_or(&mut fallback);
            let (applied, spiked) =
                deliver_event(&entry, &mut slot.state, &config.neuron, mismatch_factors[idx], rng);

            input_events[idx] += 1;
            stats.deliveries_serviced += 1;
            if applied {
                stats.updates_applied += 1;
            }
            if spiked {
                stats.spikes += 1;
                output_events[idx] += 1;
                raster.push((tick, config.geometry.addr_of(idx)));
            }
        }

        // Backlog accounting and tick advance.
        let due_backlog = heap
            .peek()
            .map(|Reverse(d)| if d.due <= tick { heap.len() as u64 } else { 0 })
            .unwrap_or(0);
        stats.max_backlog = stats.max_backlog.max(due_backlog);

        if due_backlog > 0 {
            tick += 1;
        } else {
            let next_due = heap.peek().map(|Reverse(d)| d.due);
            let next_ev = pending.as_ref().map(|e| e.tick);
            match (next_due, next_ev) {
                (Some(a), Some(b)) => tick = a.min(b),
                (Some(a), None) => tick = a,
                (None, Some(b)) => tick = b,
                (None, None) => break,
            }
        }
    }

    stats.ticks_run = tick;
    Ok(IfatOutput {
        raster,
        input_events,
        output_events,
        stats,
    })
}

/// Uniform round-robin drive: every neuron receives `events_per_neuron`
/// excitatory events, interleaved one per tick across the array. This is the
/// stimulus shape of the array characterization experiment.
pub fn uniform_drive(
    geometry: ArrayGeometry,
    events_per_neuron: u64,
) -> impl Iterator<Item = AddressEvent> {
    let n = geometry.neuron_count() as u64;
    (0..events_per_neuron * n).map(move |k| AddressEvent {
        tick: k,
        address: geometry.addr_of((k % n) as usize),
        polarity: Polarity::Exc,
    })
}

/// Output/input event-ratio statistics across the array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MismatchReport {
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

impl MismatchReport {
    pub fn from_ratios(ratios: Vec<f64>) -> Self {
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            ratios,
            mean,
            std_dev: var.sqrt(),
        }
    }
}

/// Run the array-characterization experiment: identity LUT with a fixed
/// weight, uniform drive, per-neuron mismatch on the membrane step ratio.
/// Returns the per-neuron output/input ratios and their statistics.
pub fn mismatch_experiment(
    config: &IfatConfig,
    weight: f64,
    events_per_neuron: u64,
    mismatch: &MismatchModel,
    master_seed: u64,
) -> Result<(MismatchReport, Vec<f64>)> {
    let factors = mismatch.factors(config.geometry.neuron_count(), master_seed);
    let lut = Lut::identity(&config.geometry, weight);
    let out = run_ifat(
        uniform_drive(config.geometry, events_per_neuron),
        config,
        &lut,
        &factors,
        master_seed,
    )?;
    Ok((MismatchReport::from_ratios(out.ratios()), factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::discrete::{alpha_for_events_per_spike, events_per_spike};
    use crate::neuron::ThresholdMode;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn geom(rows: u16, cols: u16, cells: u8) -> ArrayGeometry {
        ArrayGeometry { rows, cols, cells }
    }

    fn lif_config(geometry: ArrayGeometry, alpha: f64) -> IfatConfig {
        IfatConfig::new(
            geometry,
            MnDiscreteParams {
                alpha_m: alpha,
                e_syn: 5.0,
                mode: ThresholdMode::Lif { v_th: 1.0 },
                ..Default::default()
            },
        )
    }

    #[test]
    fn address_indexing_round_trips() {
        let g = geom(3, 5, 4);
        for i in 0..g.neuron_count() {
            assert_eq!(g.index_of(g.addr_of(i)), i);
        }
    }

    #[test]
    fn lookup_returns_configured_targets_in_insertion_order() {
        let g = geom(4, 4, 1);
        let src = NeuronAddr::new(1, 1, 0);
        let mk = |dst: NeuronAddr, w: f64| LutEntry {
            src,
            dst,
            kind: SynapseKind::Conductance,
            weight: w,
            polarity: Polarity::Exc,
            delay: 0,
        };
        let entries = vec![
            mk(NeuronAddr::new(0, 0, 0), 1.0),
            mk(NeuronAddr::new(2, 3, 0), 2.0),
            mk(NeuronAddr::new(3, 1, 0), 3.0),
        ];
        let lut = Lut::from_entries(entries.clone(), &g).unwrap();
        let found = lut.lookup(src);
        assert_eq!(found.len(), 3);
        for (a, b) in found.iter().zip(&entries) {
            assert_eq!(a.dst, b.dst);
            assert_eq!(a.weight, b.weight);
        }
        assert!(lut.lookup(NeuronAddr::new(0, 3, 0)).is_empty());
    }

    #[test]
    fn lookup_matches_linear_scan_on_random_lut() {
        let g = geom(16, 16, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let entries: Vec<LutEntry> = (0..10_000)
            .map(|_| {
                let r = |rng: &mut rand_chacha::ChaCha8Rng| NeuronAddr {
                    row: rng.gen_range(0..16),
                    col: rng.gen_range(0..16),
                    cell: rng.gen_range(0..2),
                };
                LutEntry {
                    src: r(&mut rng),
                    dst: r(&mut rng),
                    kind: SynapseKind::Conductance,
                    weight: rng.gen_range(0.1..2.0),
                    polarity: Polarity::Exc,
                    delay: rng.gen_range(0..4),
                }
            })
            .collect();
        let lut = Lut::from_entries(entries.clone(), &g).unwrap();
        for _ in 0..100 {
            let src = NeuronAddr {
                row: rng.gen_range(0..16),
                col: rng.gen_range(0..16),
                cell: rng.gen_range(0..2),
            };
            let scan: Vec<&LutEntry> = entries.iter().filter(|e| e.src == src).collect();
            let fast = lut.lookup(src);
            assert_eq!(fast.len(), scan.len());
            for (a, b) in fast.iter().zip(scan) {
                assert_eq!(a.dst, b.dst);
                assert_eq!(a.weight, b.weight);
            }
        }
    }

    #[test]
    fn lut_rejects_out_of_bounds_and_bad_probability() {
        let g = geom(2, 2, 1);
        let bad = vec![
            LutEntry {
                src: NeuronAddr::new(0, 0, 0),
                dst: NeuronAddr::new(5, 0, 0),
                kind: SynapseKind::Conductance,
                weight: 1.0,
                polarity: Polarity::Exc,
                delay: 0,
            },
            LutEntry {
                src: NeuronAddr::new(0, 1, 0),
                dst: NeuronAddr::new(1, 1, 0),
                kind: SynapseKind::Probabilistic,
                weight: 1.5,
                polarity: Polarity::Exc,
                delay: 0,
            },
        ];
        match Lut::from_entries(bad, &g) {
            Err(Error::Validation(issues)) => {
                assert_eq!(issues.len(), 2);
                assert!(issues[0].path.contains("lut[0].dst"));
                assert!(issues[1].path.contains("lut[1].weight"));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn probabilistic_delivery_fraction_matches_binomial() {
        let params = MnDiscreteParams::default();
        let entry = LutEntry {
            src: NeuronAddr::new(0, 0, 0),
            dst: NeuronAddr::new(0, 0, 0),
            kind: SynapseKind::Probabilistic,
            weight: 0.5,
            polarity: Polarity::Exc,
            delay: 0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000u32;
        let mut applied = 0u32;
        for _ in 0..trials {
            let mut neuron = MnNeuronState::resting(&params);
            if deliver_event(&entry, &mut neuron, &params, 1.0, &mut rng).0 {
                applied += 1;
            }
        }
        let frac = applied as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.005, "fraction {frac}");

        let sure = LutEntry {
            kind: SynapseKind::Probabilistic,
            weight: 1.0,
            ..entry
        };
        let mut neuron = MnNeuronState::resting(&params);
        assert!(deliver_event(&sure, &mut neuron, &params, 1.0, &mut rng).0);
    }

    #[test]
    fn conductance_delivery_spikes_on_the_closed_form_event() {
        let params = MnDiscreteParams {
            alpha_m: 0.1,
            e_syn: 1.5,
            mode: ThresholdMode::Lif { v_th: 1.0 },
            ..Default::default()
        };
        let expected = events_per_spike(0.1, 1.0, 1.5, 0.0);
        assert_eq!(expected, 11);
        let entry = LutEntry {
            src: NeuronAddr::new(0, 0, 0),
            dst: NeuronAddr::new(0, 0, 0),
            kind: SynapseKind::Conductance,
            weight: 1.0,
            polarity: Polarity::Exc,
            delay: 0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut neuron = MnNeuronState::resting(&params);
        let mut fired = None;
        for k in 1..=20 {
            let (_, spiked) = deliver_event(&entry, &mut neuron, &params, 1.0, &mut rng);
            if spiked {
                fired = Some(k);
                break;
            }
        }
        assert_eq!(fired, Some(expected));
    }

    #[test]
    fn unsorted_stream_is_rejected() {
        let g = geom(2, 2, 1);
        let config = lif_config(g, 0.1);
        let lut = Lut::identity(&g, 1.0);
        let factors = vec![1.0; g.neuron_count()];
        let events = vec![
            AddressEvent {
                tick: 5,
                address: NeuronAddr::new(0, 0, 0),
                polarity: Polarity::Exc,
            },
            AddressEvent {
                tick: 3,
                address: NeuronAddr::new(0, 1, 0),
                polarity: Polarity::Exc,
            },
        ];
        let err = run_ifat(events, &config, &lut, &factors, 1).unwrap_err();
        assert!(matches!(err, Error::UnsortedEvents { index: 1, .. }));
    }

    #[test]
    fn uniform_drive_without_mismatch_gives_identical_closed_form_ratios() {
        let g = geom(4, 4, 2);
        let alpha = alpha_for_events_per_spike(45, 1.0, 5.0, 0.0);
        let config = lif_config(g, alpha);
        let n_events = 450u64;
        let (report, _) = mismatch_experiment(
            &config,
            1.0,
            n_events,
            &MismatchModel::none(),
            7,
        )
        .unwrap();
        let expected = (n_events / events_per_spike(alpha, 1.0, 5.0, 0.0)) as f64 / n_events as f64;
        for r in &report.ratios {
            assert_eq!(*r, expected);
        }
        assert_eq!(report.std_dev, 0.0);
    }

    #[test]
    fn queue_never_drops_and_conservation_holds() {
        // Burst far above the service cap: everything still gets delivered.
        let g = geom(2, 2, 1);
        let config = lif_config(g, 0.1);
        let lut = Lut::identity(&g, 1.0);
        let factors = vec![1.0; g.neuron_count()];
        let burst: Vec<AddressEvent> = (0..1000)
            .map(|k| AddressEvent {
                tick: 0,
                address: g.addr_of((k % 4) as usize),
                polarity: Polarity::Exc,
            })
            .collect();
        let out = run_ifat(burst, &config, &lut, &factors, 1).unwrap();
        assert_eq!(out.stats.lut_fanout_total, 1000);
        assert_eq!(out.stats.deliveries_serviced, 1000);
        assert_eq!(out.stats.updates_applied, 1000);
        assert!(out.stats.max_backlog > 1);
        // Cap 1/tick means the last delivery lands at tick 999.
        assert_eq!(out.stats.ticks_run, 999);
    }

    #[test]
    fn permuting_mismatch_factors_permutes_ratios() {
        let g = geom(2, 4, 1);
        let alpha = alpha_for_events_per_spike(20, 1.0, 5.0, 0.0);
        let config = lif_config(g, alpha);
        let lut = Lut::identity(&g, 1.0);
        let model = MismatchModel { sigma_alpha: 0.05 };
        let factors = model.factors(g.neuron_count(), 11);

        let base = run_ifat(uniform_drive(g, 400), &config, &lut, &factors, 11).unwrap();

        let mut perm: Vec<usize> = (0..g.neuron_count()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(2));
        let permuted_factors: Vec<f64> = perm.iter().map(|&i| factors[i]).collect();
        let permuted = run_ifat(
            uniform_drive(g, 400),
            &config,
            &lut,
            &permuted_factors,
            11,
        )
        .unwrap();

        let base_ratios = base.ratios();
        let perm_ratios = permuted.ratios();
        for (slot, &src) in perm.iter().enumerate() {
            assert_eq!(perm_ratios[slot], base_ratios[src]);
        }
    }
}
