//! Three-level hierarchical event routing: relative mesh routing between
//! chips (R3), core dispatch inside a chip (R2) and source-address broadcast
//! with tag matching inside a core (R1), plus the plastic-core counter
//! synapses and synapse-row merging.
//!
//! A spike leaves its source neuron, is copied up to eight times by the
//! fan-out LUT, each copy travels `(dx, dy)` chip hops, fans out to the
//! cores in its 4-bit mask, and is finally broadcast to the whole target
//! core where every synapse holding the copy's tag fires.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationIssue};
use crate::neuron::{MnDiscreteParams, MnNeuronState, Polarity};

pub const CORES_PER_CHIP: usize = 4;
pub const NEURONS_PER_CORE: usize = 256;
pub const SYNAPSES_PER_NEURON: usize = 64;
pub const MAX_FANOUT_COPIES: usize = 8;
pub const MAX_GRID_SIDE: u8 = 16;
/// Source identifiers are 11 bits wide.
pub const TAG_LIMIT: u16 = 1 << 11;

/// 11-bit source identifier stored in a synapse's match cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tag(u16);

impl Tag {
    pub fn new(value: u16) -> Result<Self> {
        if value < TAG_LIMIT {
            Ok(Tag(value))
        } else {
            Err(Error::InvalidParam(format!(
                "tag {value} exceeds the 11-bit limit ({TAG_LIMIT})"
            )))
        }
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

/// One programmable synapse: stored tag, 4-bit weight, type and whether it
/// sits in the plastic array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynapseCam {
    pub tag: Tag,
    /// 4-bit weight, 0..=15.
    pub weight: u8,
    pub syn_type: Polarity,
    pub plastic: bool,
}

impl SynapseCam {
    pub fn validate(&self) -> Result<()> {
        if self.weight >= 16 {
            return Err(Error::InvalidParam(format!(
                "synapse weight {} exceeds 4 bits",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Fan-out record: relative chip offset, target-core bitmask and the tag the
/// copy will broadcast at its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestEntry {
    pub dchip: (i8, i8),
    /// Low 4 bits select the non-plastic target cores.
    pub core_mask: u8,
    pub out_tag: Tag,
}

impl DestEntry {
    pub fn validate(&self) -> Result<()> {
        if self.core_mask >= 16 {
            return Err(Error::InvalidParam(format!(
                "core_mask {:#x} uses more than 4 bits",
                self.core_mask
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChipCoord {
    pub x: u8,
    pub y: u8,
}

impl std::fmt::Display for ChipCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub width: u8,
    pub height: u8,
}

impl GridSize {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParam("chip grid must be non-empty".into()));
        }
        if self.width > MAX_GRID_SIDE || self.height > MAX_GRID_SIDE {
            return Err(Error::InvalidParam(format!(
                "chip grid {}x{} exceeds the {MAX_GRID_SIDE}x{MAX_GRID_SIDE} maximum",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, c: ChipCoord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn chip_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    fn index_of(&self, c: ChipCoord) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }
}

/// A routed copy of an address event, as produced by the fan-out LUT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutedCopy {
    pub dchip: (i8, i8),
    pub core_mask: u8,
    pub out_tag: Tag,
}

/// Expand a spike into one copy per fan-out entry. More than eight entries
/// is a configuration error.
pub fn fanout_expand(entries: &[DestEntry]) -> Result<Vec<RoutedCopy>> {
    if entries.len() > MAX_FANOUT_COPIES {
        return Err(Error::validation_one(
            "fanout",
            format!(
                "{} destination entries exceed the {MAX_FANOUT_COPIES}-copy limit",
                entries.len()
            ),
        ));
    }
    Ok(entries
        .iter()
        .map(|e| RoutedCopy {
            dchip: e.dchip,
            core_mask: e.core_mask,
            out_tag: e.out_tag,
        })
        .collect())
}

/// Relative mesh hop: returns the target chip and the Manhattan hop count
/// (x dimension first, then y), or `None` when the target falls off the
/// grid — the caller records the drop.
pub fn r3_mesh_route(from: ChipCoord, dchip: (i8, i8), grid: GridSize) -> Option<(ChipCoord, u32)> {
    let tx = from.x as i16 + dchip.0 as i16;
    let ty = from.y as i16 + dchip.1 as i16;
    if tx < 0 || ty < 0 || tx >= grid.width as i16 || ty >= grid.height as i16 {
        return None;
    }
    let hops = dchip.0.unsigned_abs() as u32 + dchip.1.unsigned_abs() as u32;
    Some((
        ChipCoord {
            x: tx as u8,
            y: ty as u8,
        },
        hops,
    ))
}

/// Core dispatch: the set bits of the 4-bit mask, lowest core first.
pub fn r2_dispatch(core_mask: u8) -> impl Iterator<Item = u8> {
    (0..CORES_PER_CHIP as u8).filter(move |c| core_mask & (1 << c) != 0)
}

/// Synapse table of one non-plastic core. Entries keep their programming
/// order; a tag index serves the broadcast path.
#[derive(Debug, Clone, Default)]
pub struct CoreSynapses {
    entries: Vec<(u16, u8, SynapseCam)>,
    by_tag: HashMap<u16, Vec<u32>>,
    occupied: HashMap<(u16, u8), ()>,
}

impl CoreSynapses {
    /// Program one CAM cell. Fails on out-of-range coordinates, a bad
    /// weight, or double programming of the same slot.
    pub fn program(&mut self, neuron: u16, slot: u8, cam: SynapseCam) -> Result<()> {
        if neuron as usize >= NEURONS_PER_CORE {
            return Err(Error::InvalidParam(format!(
                "neuron {neuron} outside core (max {})",
                NEURONS_PER_CORE - 1
            )));
        }
        if slot as usize >= SYNAPSES_PER_NEURON {
            return Err(Error::InvalidParam(format!(
                "synapse slot {slot} outside the {SYNAPSES_PER_NEURON}-synapse row"
            )));
        }
        cam.validate()?;
        if self.occupied.insert((neuron, slot), ()).is_some() {
            return Err(Error::InvalidParam(format!(
                "synapse ({neuron}, {slot}) programmed twice"
            )));
        }
        let idx = self.entries.len() as u32;
        self.entries.push((neuron, slot, cam));
        self.by_tag.entry(cam.tag.value()).or_default().push(idx);
        Ok(())
    }

    /// Broadcast `tag` to the core: every synapse holding it, in programming
    /// order.
    pub fn broadcast_match(&self, tag: Tag) -> Vec<(u16, u8, SynapseCam)> {
        self.by_tag
            .get(&tag.value())
            .map(|idxs| idxs.iter().map(|&i| self.entries[i as usize]).collect())
            .unwrap_or_default()
    }

    /// All programmed synapses in programming order (the brute-force scan
    /// surface).
    pub fn programmed(&self) -> &[(u16, u8, SynapseCam)] {
        &self.entries
    }
}

/// One synapse-level delivery produced by the routing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Activation {
    pub chip: ChipCoord,
    pub core: u8,
    pub neuron: u16,
    pub slot: u8,
    pub weight: u8,
    pub syn_type: Polarity,
}

/// Identifies a source neuron for fan-out configuration and spike events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpikeSource {
    pub chip: ChipCoord,
    pub core: u8,
    pub neuron: u16,
}

impl std::fmt::Display for SpikeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}.{}", self.chip, self.core, self.neuron)
    }
}

/// A timestamped source spike entering the routing fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynapEvent {
    pub tick: u64,
    pub source: SpikeSource,
}

/// Per-run routing counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingStats {
    pub spikes_routed: u64,
    pub copies: u64,
    pub mesh_hops: u64,
    pub dropped_out_of_grid: u64,
    pub empty_mask_copies: u64,
    pub core_deliveries: u64,
    /// Neuron-level broadcast reach: 256 per core delivery.
    pub broadcast_reach: u64,
    pub activations: u64,
    pub spikes_out: u64,
}

struct Chip {
    cores: Vec<CoreSynapses>,
    fanout: HashMap<(u8, u16), Vec<DestEntry>>,
    neurons: Vec<MnNeuronState>,
}

/// A grid of chips with programmable synapse tables and fan-out LUTs.
/// Neuron dynamics use the discrete event-driven model; routed activations
/// apply conductance updates scaled by `weight / 15`.
pub struct DynapSystem {
    grid: GridSize,
    chips: Vec<Chip>,
    neuron_params: MnDiscreteParams,
}

impl DynapSystem {
    pub fn new(grid: GridSize, neuron_params: MnDiscreteParams) -> Result<Self> {
        grid.validate()?;
        neuron_params.validate()?;
        let chips = (0..grid.chip_count())
            .map(|_| Chip {
                cores: (0..CORES_PER_CHIP).map(|_| CoreSynapses::default()).collect(),
                fanout: HashMap::new(),
                neurons: vec![
                    MnNeuronState::resting(&neuron_params);
                    CORES_PER_CHIP * NEURONS_PER_CORE
                ],
            })
            .collect();
        Ok(Self {
            grid,
            chips,
            neuron_params,
        })
    }

    pub fn grid(&self) -> GridSize {
        self.grid
    }

    fn check_coord(&self, chip: ChipCoord) -> Result<usize> {
        if !self.grid.contains(chip) {
            return Err(Error::InvalidParam(format!(
                "chip {chip} outside the {}x{} grid",
                self.grid.width, self.grid.height
            )));
        }
        Ok(self.grid.index_of(chip))
    }

    pub fn program_synapse(
        &mut self,
        chip: ChipCoord,
        core: u8,
        neuron: u16,
        slot: u8,
        cam: SynapseCam,
    ) -> Result<()> {
        let idx = self.check_coord(chip)?;
        if core as usize >= CORES_PER_CHIP {
            return Err(Error::InvalidParam(format!("core {core} out of range")));
        }
        self.chips[idx].cores[core as usize].program(neuron, slot, cam)
    }

    /// Install the fan-out entries for one source neuron (at most eight).
    pub fn set_fanout(&mut self, src: SpikeSource, entries: Vec<DestEntry>) -> Result<()> {
        let idx = self.check_coord(src.chip)?;
        if entries.len() > MAX_FANOUT_COPIES {
            return Err(Error::validation_one(
                format!("fanout[{src}]"),
                format!(
                    "{} destination entries exceed the {MAX_FANOUT_COPIES}-copy limit",
                    entries.len()
                ),
            ));
        }
        let mut issues = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            if let Err(err) = e.validate() {
                issues.push(ValidationIssue::new(
                    format!("fanout[{src}][{i}]"),
                    err.to_string(),
                ));
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        self.chips[idx].fanout.insert((src.core, src.neuron), entries);
        Ok(())
    }

    pub fn core(&self, chip: ChipCoord, core: u8) -> &CoreSynapses {
        &self.chips[self.grid.index_of(chip)].cores[core as usize]
    }

    pub fn fanout_of(&self, src: SpikeSource) -> &[DestEntry] {
        self.chips[self.grid.index_of(src.chip)]
            .fanout
            .get(&(src.core, src.neuron))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Route one source spike through R3/R2/R1 without touching neuron
    /// state. Returns the synapse activations and updates the counters.
    pub fn route_event(&self, src: SpikeSource, stats: &mut RoutingStats) -> Vec<Activation> {
        let mut activations = Vec::new();
        stats.spikes_routed += 1;
        let entries = self.fanout_of(src);
        let copies = fanout_expand(entries).expect("fan-out validated at configuration");
        for copy in copies {
            stats.copies += 1;
            let Some((target, hops)) = r3_mesh_route(src.chip, copy.dchip, self.grid) else {
                stats.dropped_out_of_grid += 1;
                continue;
            };
            stats.mesh_hops += hops as u64;
            if copy.core_mask == 0 {
                stats.empty_mask_copies += 1;
                continue;
            }
            for core in r2_dispatch(copy.core_mask) {
                stats.core_deliveries += 1;
                stats.broadcast_reach += NEURONS_PER_CORE as u64;
                let table = self.core(target, core);
                for (neuron, slot, cam) in table.broadcast_match(copy.out_tag) {
                    activations.push(Activation {
                        chip: target,
                        core,
                        neuron,
                        slot,
                        weight: cam.weight,
                        syn_type: cam.syn_type,
                    });
                }
            }
        }
        stats.activations += activations.len() as u64;
        activations
    }

    /// Route a stream of source spikes and apply each activation to its
    /// target neuron. Returns the spike raster and the routing counters.
    pub fn run(&mut self, events: &[DynapEvent]) -> (Vec<(u64, SpikeSource)>, RoutingStats) {
        let mut stats = RoutingStats::default();
        let mut raster = Vec::new();
        for ev in events {
            let activations = self.route_event(ev.source, &mut stats);
            for act in activations {
                let chip_idx = self.grid.index_of(act.chip);
                let slot_idx = act.core as usize * NEURONS_PER_CORE + act.neuron as usize;
                let state = &mut self.chips[chip_idx].neurons[slot_idx];
                if act.weight > 0 {
                    state.event_update(
                        &self.neuron_params,
                        act.syn_type,
                        act.weight as f64 / 15.0,
                    );
                    if state.check_and_reset(&self.neuron_params) {
                        stats.spikes_out += 1;
                        raster.push((
                            ev.tick,
                            SpikeSource {
                                chip: act.chip,
                                core: act.core,
                                neuron: act.neuron,
                            },
                        ));
                    }
                }
            }
        }
        (raster, stats)
    }
}

// ---------------------------------------------------------------------------
// Plastic core
// ---------------------------------------------------------------------------

pub const PLASTIC_NEURONS: usize = 64;
pub const PLASTIC_SYNAPSES_PER_NEURON: usize = 128;
pub const PLASTIC_NONPLASTIC_PER_NEURON: usize = 64;

/// Per-synapse configuration latches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynapseLatches {
    pub syn_type: Polarity,
    pub learning_enabled: bool,
    pub broadcast_enabled: bool,
    /// When set, the counter is pinned to this value.
    pub forced_weight: Option<u8>,
}

impl Default for SynapseLatches {
    fn default() -> Self {
        Self {
            syn_type: Polarity::Exc,
            learning_enabled: true,
            broadcast_enabled: true,
            forced_weight: None,
        }
    }
}

/// A plastic synapse: 4-bit up/down counter plus its latches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlasticSynapse {
    pub counter: u8,
    pub latches: SynapseLatches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterDirection {
    Up,
    Down,
}

impl PlasticSynapse {
    /// Step the weight counter with saturation at 0 and 15. A forced weight
    /// pins the counter regardless of direction. No-op unless learning is
    /// enabled.
    pub fn counter_update(&mut self, direction: CounterDirection) {
        if !self.latches.learning_enabled {
            return;
        }
        if let Some(forced) = self.latches.forced_weight {
            self.counter = forced.min(15);
            return;
        }
        self.counter = match direction {
            CounterDirection::Up => (self.counter + 1).min(15),
            CounterDirection::Down => self.counter.saturating_sub(1),
        };
    }
}

/// Resource view of the plastic core after merging synapse rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedCoreView {
    pub active_neurons: u8,
    pub plastic_fan_in: u16,
    pub nonplastic_fan_in: u16,
}

/// Merge `rows_per_neuron` synapse rows onto each active neuron, trading
/// neuron count for fan-in. Valid values are 1, 2, 4 and 8.
pub fn merge_synapse_rows(rows_per_neuron: u8) -> Result<MergedCoreView> {
    if !matches!(rows_per_neuron, 1 | 2 | 4 | 8) {
        return Err(Error::validation_one(
            "rows_per_neuron",
            format!("{rows_per_neuron} is not a supported row-merge factor (1, 2, 4 or 8)"),
        ));
    }
    Ok(MergedCoreView {
        active_neurons: (PLASTIC_NEURONS / rows_per_neuron as usize) as u8,
        plastic_fan_in: PLASTIC_SYNAPSES_PER_NEURON as u16 * rows_per_neuron as u16,
        nonplastic_fan_in: PLASTIC_NONPLASTIC_PER_NEURON as u16 * rows_per_neuron as u16,
    })
}
