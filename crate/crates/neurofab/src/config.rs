//! Run configuration: a versioned TOML document selecting an engine,
//! describing its network and stimulus, and choosing an energy profile.
//! Validation reports every problem found, with a dotted path to each
//! offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cortex::{
    ConnectionRule, CortexConfig, HypercolumnSpec, McMap, MinicolumnSpec, SomaParams, SourceId,
    TargetSpec, TypeSpec,
};
use crate::crossbar::{DeviceModel, MitigationConfig, ReadSetup};
use crate::dynap::{ChipCoord, DestEntry, GridSize, SpikeSource, SynapseCam, Tag};
use crate::energy::{self, EnergyTable};
use crate::error::{Error, Result, ValidationIssue};
use crate::ifat::{ArrayGeometry, IfatConfig, LutEntry, MismatchModel, NeuronAddr};
use crate::neuron::{MnDiscreteParams, Polarity, WtaNeuronParams};
use crate::presets::{WtaFlags, WtaWeights};
use crate::wta::WtaConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Ifat,
    Hiaer,
    Cortex,
    Crossbar,
    Wta,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EngineKind::Ifat => "ifat",
            EngineKind::Hiaer => "hiaer",
            EngineKind::Cortex => "cortex",
            EngineKind::Crossbar => "crossbar",
            EngineKind::Wta => "wta",
        };
        write!(f, "{s}")
    }
}

/// Energy selection: a named profile, explicit figures, or a profile with
/// overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pj_per_synaptic_event: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pj_per_spike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pj_per_router_hop: Option<f64>,
}

impl EnergySpec {
    pub fn resolve(&self) -> Result<(Option<String>, EnergyTable)> {
        let mut table = match &self.profile {
            Some(name) => energy::profile(name).ok_or_else(|| {
                Error::validation_one(
                    "energy.profile",
                    format!(
                        "unknown profile `{name}` (known: {})",
                        energy::PROFILE_NAMES.join(", ")
                    ),
                )
            })?,
            None => EnergyTable::synaptic_only(0.0),
        };
        if let Some(v) = self.pj_per_synaptic_event {
            table.pj_per_synaptic_event = v;
        }
        if let Some(v) = self.pj_per_spike {
            table.pj_per_spike = v;
        }
        if let Some(v) = self.pj_per_router_hop {
            table.pj_per_router_hop = v;
        }
        table.validate()?;
        Ok((self.profile.clone(), table))
    }
}

// ---------------------------------------------------------------------------
// IFAT section
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum IfatStimulus {
    /// Round-robin drive: every neuron gets `events_per_neuron` events.
    Uniform { events_per_neuron: u64 },
    /// Per-neuron Bernoulli drive at `rate_hz` for `duration_ticks`.
    Poisson { rate_hz: f64, duration_ticks: u64 },
    /// CSV file of `tick,row,col,cell,polarity` lines.
    File { path: String },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfatSection {
    pub rows: u16,
    pub cols: u16,
    #[serde(default = "one_u8")]
    pub cells: u8,
    /// Simulation tick in microseconds.
    #[serde(default = "one_f64")]
    pub tick_us: f64,
    #[serde(default = "one_u32")]
    pub service_cap_per_tick: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_every_m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_every_t: Option<u64>,
    #[serde(default)]
    pub sigma_alpha: f64,
    pub neuron: MnDiscreteParams,
    /// Shortcut: identity LUT at this weight for every neuron.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lut: Vec<LutEntry>,
    pub stimulus: IfatStimulus,
}

impl IfatSection {
    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells,
        }
    }

    pub fn engine_config(&self) -> IfatConfig {
        IfatConfig {
            geometry: self.geometry(),
            neuron: self.neuron,
            service_cap_per_tick: self.service_cap_per_tick,
            leak_every_m: self.leak_every_m,
            leak_every_t: self.leak_every_t,
        }
    }

    pub fn mismatch(&self) -> MismatchModel {
        MismatchModel {
            sigma_alpha: self.sigma_alpha,
        }
    }

    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        if let Err(e) = self.engine_config().validate() {
            push_error("ifat", e, issues);
        }
        if self.sigma_alpha < 0.0 {
            issues.push(ValidationIssue::new("ifat.sigma_alpha", "must be >= 0"));
        }
        if !(self.tick_us > 0.0) {
            issues.push(ValidationIssue::new("ifat.tick_us", "must be > 0"));
        }
        if let Some(w) = self.identity_weight {
            if !(w > 0.0) {
                issues.push(ValidationIssue::new("ifat.identity_weight", "must be > 0"));
            }
        }
        let geometry = self.geometry();
        if let Err(e) = crate::ifat::Lut::from_entries(self.lut.clone(), &geometry) {
            push_error("ifat", e, issues);
        }
        match &self.stimulus {
            IfatStimulus::Poisson { rate_hz, .. } if !(rate_hz > &0.0) => {
                issues.push(ValidationIssue::new("ifat.stimulus.rate_hz", "must be > 0"));
            }
            IfatStimulus::File { path } if path.is_empty() => {
                issues.push(ValidationIssue::new("ifat.stimulus.path", "must not be empty"));
            }
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Hiaer (multi-chip routing) section
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiaerSynapseEntry {
    pub chip: [u8; 2],
    pub core: u8,
    pub neuron: u16,
    pub slot: u8,
    pub tag: u16,
    pub weight: u8,
    pub syn_type: Polarity,
    #[serde(default)]
    pub plastic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiaerDestEntry {
    pub dchip: [i8; 2],
    pub core_mask: u8,
    pub out_tag: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiaerFanoutEntry {
    pub chip: [u8; 2],
    pub core: u8,
    pub neuron: u16,
    pub entries: Vec<HiaerDestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiaerSourceRef {
    pub chip: [u8; 2],
    pub core: u8,
    pub neuron: u16,
}

impl HiaerSourceRef {
    pub fn source(&self) -> SpikeSource {
        SpikeSource {
            chip: ChipCoord {
                x: self.chip[0],
                y: self.chip[1],
            },
            core: self.core,
            neuron: self.neuron,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum HiaerStimulus {
    /// Each source spikes once every `period_ticks` for `duration_ticks`.
    Regular {
        sources: Vec<HiaerSourceRef>,
        period_ticks: u64,
        duration_ticks: u64,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiaerSection {
    pub grid: [u8; 2],
    pub neuron: MnDiscreteParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synapses: Vec<HiaerSynapseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fanout: Vec<HiaerFanoutEntry>,
    pub stimulus: HiaerStimulus,
}

impl HiaerSection {
    pub fn grid_size(&self) -> GridSize {
        GridSize {
            width: self.grid[0],
            height: self.grid[1],
        }
    }

    /// Build and program the routing system.
    pub fn build(&self) -> Result<crate::dynap::DynapSystem> {
        let mut sys = crate::dynap::DynapSystem::new(self.grid_size(), self.neuron)?;
        for (i, s) in self.synapses.iter().enumerate() {
            let cam = SynapseCam {
                tag: Tag::new(s.tag).map_err(|e| prefix_error(format!("hiaer.synapses[{i}].tag"), e))?,
                weight: s.weight,
                syn_type: s.syn_type,
                plastic: s.plastic,
            };
            sys.program_synapse(
                ChipCoord {
                    x: s.chip[0],
                    y: s.chip[1],
                },
                s.core,
                s.neuron,
                s.slot,
                cam,
            )
            .map_err(|e| prefix_error(format!("hiaer.synapses[{i}]"), e))?;
        }
        for (i, f) in self.fanout.iter().enumerate() {
            let mut entries = Vec::with_capacity(f.entries.len());
            for (j, e) in f.entries.iter().enumerate() {
                entries.push(DestEntry {
                    dchip: (e.dchip[0], e.dchip[1]),
                    core_mask: e.core_mask,
                    out_tag: Tag::new(e.out_tag)
                        .map_err(|err| prefix_error(format!("hiaer.fanout[{i}].entries[{j}].out_tag"), err))?,
                });
            }
            sys.set_fanout(
                SpikeSource {
                    chip: ChipCoord {
                        x: f.chip[0],
                        y: f.chip[1],
                    },
                    core: f.core,
                    neuron: f.neuron,
                },
                entries,
            )
            .map_err(|e| prefix_error(format!("hiaer.fanout[{i}]"), e))?;
        }
        Ok(sys)
    }

    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        if let Err(e) = self.build() {
            push_error("hiaer", e, issues);
        }
        if let HiaerStimulus::Regular {
            sources,
            period_ticks,
            ..
        } = &self.stimulus
        {
            if *period_ticks == 0 {
                issues.push(ValidationIssue::new(
                    "hiaer.stimulus.period_ticks",
                    "must be >= 1",
                ));
            }
            let grid = self.grid_size();
            for (i, s) in sources.iter().enumerate() {
                if !grid.contains(s.source().chip) {
                    issues.push(ValidationIssue::new(
                        format!("hiaer.stimulus.sources[{i}].chip"),
                        "outside the configured grid",
                    ));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cortex section
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CortexTypeEntry {
    pub count: u8,
    #[serde(default)]
    pub soma: SomaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum McMapSpec {
    Name(String),
    Offset { offset: i16 },
}

impl McMapSpec {
    fn to_mc_map(&self, path: &str, issues: &mut Vec<ValidationIssue>) -> McMap {
        match self {
            McMapSpec::Name(n) if n == "all" => McMap::All,
            McMapSpec::Name(n) if n == "identity" => McMap::Identity,
            McMapSpec::Name(n) => {
                issues.push(ValidationIssue::new(
                    path.to_string(),
                    format!("unknown mc_map `{n}` (use `all`, `identity` or {{ offset = n }})"),
                ));
                McMap::All
            }
            McMapSpec::Offset { offset } => McMap::Offset { by: *offset },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CortexTargetEntry {
    pub src_type: u8,
    pub hc_offset: i16,
    pub delay_ms: f64,
    pub mc_map: McMapSpec,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CortexSourceRef {
    pub hc: u16,
    pub mc: u16,
    pub ttype: u8,
}

impl CortexSourceRef {
    pub fn id(&self) -> SourceId {
        SourceId {
            hc: self.hc,
            mc: self.mc,
            ttype: self.ttype,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum CortexStimulus {
    /// Inject `count` from every source every `period_ticks`, for
    /// `duration_ticks`.
    Regular {
        sources: Vec<CortexSourceRef>,
        count: u16,
        period_ticks: u64,
        duration_ticks: u64,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CortexSection {
    pub hypercolumns: u16,
    pub minicolumns: u16,
    pub types: Vec<CortexTypeEntry>,
    #[serde(default)]
    pub stochastic_delays: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<CortexTargetEntry>,
    pub stimulus: CortexStimulus,
}

impl CortexSection {
    /// Assemble the engine config; `issues` collects every problem.
    pub fn engine_config(&self, issues: &mut Vec<ValidationIssue>) -> CortexConfig {
        let spec = MinicolumnSpec {
            types: self
                .types
                .iter()
                .map(|t| TypeSpec {
                    count: t.count,
                    soma: t.soma,
                })
                .collect(),
        };
        let mut targets: Vec<Vec<TargetSpec>> = vec![Vec::new(); self.types.len().max(1)];
        for (i, t) in self.targets.iter().enumerate() {
            let path = format!("cortex.targets[{i}]");
            if t.src_type as usize >= self.types.len() {
                issues.push(ValidationIssue::new(
                    format!("{path}.src_type"),
                    format!("type {} not defined", t.src_type),
                ));
                continue;
            }
            let mc_map = t.mc_map.to_mc_map(&format!("{path}.mc_map"), issues);
            targets[t.src_type as usize].push(TargetSpec {
                hc_offset: t.hc_offset,
                delay_ms: t.delay_ms,
                mc_map,
                weights: t.weights.clone(),
            });
        }
        let config = CortexConfig {
            hypercolumns: self.hypercolumns,
            hypercolumn: HypercolumnSpec {
                minicolumns: self.minicolumns,
                minicolumn: spec,
            },
            rule: ConnectionRule { targets },
            stochastic_delays: self.stochastic_delays,
        };
        if let Err(e) = config.validate() {
            push_error("cortex", e, issues);
        }
        config
    }

    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        let config = self.engine_config(issues);
        if let CortexStimulus::Regular {
            sources,
            period_ticks,
            ..
        } = &self.stimulus
        {
            if *period_ticks == 0 {
                issues.push(ValidationIssue::new(
                    "cortex.stimulus.period_ticks",
                    "must be >= 1",
                ));
            }
            for (i, s) in sources.iter().enumerate() {
                if s.hc >= config.hypercolumns
                    || s.mc >= config.hypercolumn.minicolumns
                    || s.ttype as usize >= self.types.len()
                {
                    issues.push(ValidationIssue::new(
                        format!("cortex.stimulus.sources[{i}]"),
                        "outside the configured network",
                    ));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Crossbar section
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossbarSweepSpec {
    pub levels: Vec<u32>,
    pub trials: u32,
}

impl Default for CrossbarSweepSpec {
    fn default() -> Self {
        Self {
            levels: vec![4, 16, 64, 256],
            trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossbarSection {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub wire_r: f64,
    #[serde(default)]
    pub device: DeviceModel,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default)]
    pub read: ReadSetup,
    /// Random read cycles evaluated by `run`.
    #[serde(default = "default_trials")]
    pub read_trials: u32,
    #[serde(default)]
    pub sweep: CrossbarSweepSpec,
}

impl CrossbarSection {
    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        if self.rows == 0 || self.cols == 0 {
            issues.push(ValidationIssue::new(
                "crossbar.rows/cols",
                "array must be non-empty",
            ));
        }
        if self.wire_r < 0.0 {
            issues.push(ValidationIssue::new("crossbar.wire_r", "must be >= 0"));
        }
        if let Err(e) = self.device.validate() {
            push_error("crossbar.device", e, issues);
        }
        if let Err(e) = self.mitigation.validate() {
            push_error("crossbar.mitigation", e, issues);
        }
        if self.read_trials == 0 {
            issues.push(ValidationIssue::new("crossbar.read_trials", "must be >= 1"));
        }
        if self.sweep.levels.iter().any(|&l| l < 2) {
            issues.push(ValidationIssue::new(
                "crossbar.sweep.levels",
                "every level count must be >= 2",
            ));
        }
        if self.sweep.trials == 0 {
            issues.push(ValidationIssue::new("crossbar.sweep.trials", "must be >= 1"));
        }
    }
}

// ---------------------------------------------------------------------------
// WTA section
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBoost {
    pub address: NeuronAddr,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum WtaStimulus {
    Poisson {
        rate_hz: f64,
        duration_ticks: u64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        boosts: Vec<RateBoost>,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InhibitionSpec {
    pub interneuron: NeuronAddr,
    pub excitatory: Vec<NeuronAddr>,
    pub exc_weight: f64,
    pub inh_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WtaSection {
    pub rows: u16,
    pub cols: u16,
    /// Simulation tick in milliseconds.
    #[serde(default = "one_f64")]
    pub tick_ms: f64,
    #[serde(default)]
    pub flags: WtaFlags,
    #[serde(default)]
    pub weights: WtaWeights,
    pub input_weight: f64,
    pub neuron: WtaNeuronParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhibition: Option<InhibitionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_lut: Vec<LutEntry>,
    pub stimulus: WtaStimulus,
}

impl WtaSection {
    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry {
            rows: self.rows,
            cols: self.cols,
            cells: 1,
        }
    }

    pub fn engine_config(&self) -> WtaConfig {
        WtaConfig {
            geometry: self.geometry(),
            neuron: self.neuron,
            input_weight: self.input_weight,
        }
    }

    pub fn build_lut(&self) -> Result<crate::ifat::Lut> {
        let mut extra = self.extra_lut.clone();
        if let Some(inh) = &self.inhibition {
            extra.extend(crate::presets::build_global_inhibition(
                &inh.excitatory,
                inh.interneuron,
                inh.exc_weight,
                inh.inh_weight,
            )?);
        }
        crate::presets::wta_lut(self.geometry(), self.flags, self.weights, extra)
    }

    fn validate(&self, issues: &mut Vec<ValidationIssue>) {
        if let Err(e) = self.engine_config().validate() {
            push_error("wta", e, issues);
        }
        if !(self.tick_ms > 0.0) {
            issues.push(ValidationIssue::new("wta.tick_ms", "must be > 0"));
        }
        if let Err(e) = self.build_lut() {
            push_error("wta", e, issues);
        }
        if let WtaStimulus::Poisson {
            rate_hz, boosts, ..
        } = &self.stimulus
        {
            if !(rate_hz > &0.0) {
                issues.push(ValidationIssue::new("wta.stimulus.rate_hz", "must be > 0"));
            }
            let geometry = self.geometry();
            for (i, b) in boosts.iter().enumerate() {
                if !geometry.contains(b.address) {
                    issues.push(ValidationIssue::new(
                        format!("wta.stimulus.boosts[{i}].address"),
                        "outside array bounds",
                    ));
                }
                if b.factor < 0.0 {
                    issues.push(ValidationIssue::new(
                        format!("wta.stimulus.boosts[{i}].factor"),
                        "must be >= 0",
                    ));
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Top-level document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub format_version: u32,
    pub engine: EngineKind,
    #[serde(default)]
    pub seed: u64,
    /// Run length for tick-driven engines. Event-driven engines run to
    /// drain when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticks: Option<u64>,
    #[serde(default)]
    pub energy: EnergySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ifat: Option<IfatSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hiaer: Option<HiaerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cortex: Option<CortexSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossbar: Option<CrossbarSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wta: Option<WtaSection>,
}

impl NetworkConfig {
    /// Validate the whole document, collecting every issue.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.format_version != FORMAT_VERSION {
            issues.push(ValidationIssue::new(
                "format_version",
                format!(
                    "unsupported version {} (this build reads {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        if let Err(e) = self.energy.resolve() {
            push_error("energy", e, &mut issues);
        }
        match self.engine {
            EngineKind::Ifat => match &self.ifat {
                Some(s) => s.validate(&mut issues),
                None => issues.push(missing_section("ifat")),
            },
            EngineKind::Hiaer => match &self.hiaer {
                Some(s) => s.validate(&mut issues),
                None => issues.push(missing_section("hiaer")),
            },
            EngineKind::Cortex => match &self.cortex {
                Some(s) => s.validate(&mut issues),
                None => issues.push(missing_section("cortex")),
            },
            EngineKind::Crossbar => match &self.crossbar {
                Some(s) => s.validate(&mut issues),
                None => issues.push(missing_section("crossbar")),
            },
            EngineKind::Wta => match &self.wta {
                Some(s) => s.validate(&mut issues),
                None => issues.push(missing_section("wta")),
            },
        }
        if matches!(self.engine, EngineKind::Cortex | EngineKind::Wta) && self.ticks.is_none() {
            let has_duration = match self.engine {
                EngineKind::Cortex => !matches!(
                    self.cortex.as_ref().map(|c| &c.stimulus),
                    Some(CortexStimulus::None) | None
                ),
                EngineKind::Wta => !matches!(
                    self.wta.as_ref().map(|w| &w.stimulus),
                    Some(WtaStimulus::None) | None
                ),
                _ => unreachable!(),
            };
            if !has_duration {
                issues.push(ValidationIssue::new(
                    "ticks",
                    "tick-driven engines need `ticks` or a stimulus with a duration",
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }
}

fn missing_section(name: &str) -> ValidationIssue {
    ValidationIssue::new(name, format!("engine `{name}` selected but [{name}] section missing"))
}

/// Flatten a nested error into path-tagged issues.
fn push_error(prefix: &str, err: Error, issues: &mut Vec<ValidationIssue>) {
    match err {
        Error::Validation(list) => {
            for issue in list {
                issues.push(ValidationIssue::new(
                    format!("{prefix}.{}", issue.path),
                    issue.message,
                ));
            }
        }
        other => issues.push(ValidationIssue::new(prefix, other.to_string())),
    }
}

fn prefix_error(path: String, err: Error) -> Error {
    match err {
        Error::Validation(list) => Error::Validation(
            list.into_iter()
                .map(|i| ValidationIssue::new(format!("{path}.{}", i.path), i.message))
                .collect(),
        ),
        other => Error::validation_one(path, other.to_string()),
    }
}

/// Parse a TOML document and validate it.
pub fn load_config(text: &str) -> Result<NetworkConfig> {
    let config: NetworkConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config_file(path: &Path) -> Result<NetworkConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_config(&text)
}

fn one_u8() -> u8 {
    1
}
fn one_u32() -> u32 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn default_trials() -> u32 {
    100
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_IFAT: &str = r#"
format_version = 1
engine = "ifat"
seed = 7

[energy]
profile = "mnifat"

[ifat]
rows = 2
cols = 2
neuron = { alpha_m = 0.1, alpha_t = 0.0, lambda_m = 0.0, lambda_t = 0.0, f_leak_m = 0.0, f_leak_t = 0.0, e_syn = 5.0, e_inh = -1.0, v_reset = 0.0, theta_reset = 1.0, mode = { kind = "lif", v_th = 1.0 } }
identity_weight = 1.0
stimulus = { kind = "uniform", events_per_neuron = 100 }
"#;

    #[test]
    fn minimal_ifat_config_parses_with_defaults() {
        let cfg = load_config(MINIMAL_IFAT).unwrap();
        assert_eq!(cfg.engine, EngineKind::Ifat);
        let ifat = cfg.ifat.unwrap();
        assert_eq!(ifat.cells, 1);
        assert_eq!(ifat.service_cap_per_tick, 1);
        assert_eq!(ifat.tick_us, 1.0);
    }

    #[test]
    fn out_of_bounds_lut_entry_is_reported_with_its_index() {
        let text = MINIMAL_IFAT.to_string()
            + r#"
[[ifat.lut]]
src = { row = 0, col = 0, cell = 0 }
dst = { row = 9, col = 0, cell = 0 }
kind = "conductance"
weight = 1.0
polarity = "exc"
"#;
        match load_config(&text) {
            Err(Error::Validation(issues)) => {
                assert!(
                    issues.iter().any(|i| i.path.contains("lut[0].dst")),
                    "{issues:?}"
                );
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn all_issues_are_collected_not_just_the_first() {
        let text = r#"
format_version = 3
engine = "cortex"

[energy]
profile = "nonexistent"

[cortex]
hypercolumns = 0
minicolumns = 4
types = [{ count = 99 }]
stimulus = { kind = "none" }
"#;
        match load_config(text) {
            Err(Error::Validation(issues)) => {
                assert!(issues.len() >= 4, "{issues:?}");
                assert!(issues.iter().any(|i| i.path == "format_version"));
                assert!(issues.iter().any(|i| i.path.contains("energy")));
                assert!(issues.iter().any(|i| i.path.contains("hypercolumns")));
                assert!(issues.iter().any(|i| i.path.contains("types")));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_engine_is_a_parse_error() {
        let text = "format_version = 1\nengine = \"quantum\"\n";
        assert!(matches!(load_config(text), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn config_round_trips_through_serialization() {
        let cfg = load_config(MINIMAL_IFAT).unwrap();
        let rendered = toml::to_string(&cfg).unwrap();
        let reparsed = load_config(&rendered).unwrap();
        assert_eq!(cfg, reparsed);
    }
}
