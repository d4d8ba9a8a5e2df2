//! Energy accounting: per-event cost tables and the named hardware profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy costs in picojoules per counted event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub pj_per_synaptic_event: f64,
    pub pj_per_spike: f64,
    pub pj_per_router_hop: f64,
}

impl EnergyTable {
    pub fn synaptic_only(pj: f64) -> Self {
        Self {
            pj_per_synaptic_event: pj,
            pj_per_spike: 0.0,
            pj_per_router_hop: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pj_per_synaptic_event < 0.0
            || self.pj_per_spike < 0.0
            || self.pj_per_router_hop < 0.0
        {
            return Err(Error::InvalidParam(
                "energy table entries must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Published per-event figures for the hardware platforms this emulator
/// models; used to report hardware-equivalent energy for a run.
pub fn profile(name: &str) -> Option<EnergyTable> {
    let pj = match name {
        "mnifat" => 360.0,
        "hiaer_ifat" => 22.0,
        "dynap_sel" => 2.8,
        "neurogrid" => 31.2,
        "truenorth" => 45.0,
        "spinnaker" => 43_000.0,
        _ => return None,
    };
    Some(EnergyTable::synaptic_only(pj))
}

pub const PROFILE_NAMES: [&str; 6] = [
    "mnifat",
    "hiaer_ifat",
    "dynap_sel",
    "neurogrid",
    "truenorth",
    "spinnaker",
];

/// Energy totals for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub table: EnergyTable,
    pub synaptic_events: u64,
    pub spikes: u64,
    pub router_hops: u64,
    pub total_pj: f64,
    pub total_uj: f64,
}

impl EnergyBreakdown {
    pub fn compute(
        profile_name: Option<String>,
        table: EnergyTable,
        synaptic_events: u64,
        spikes: u64,
        router_hops: u64,
    ) -> Self {
        let total_pj = synaptic_events as f64 * table.pj_per_synaptic_event
            + spikes as f64 * table.pj_per_spike
            + router_hops as f64 * table.pj_per_router_hop;
        Self {
            profile: profile_name,
            table,
            synaptic_events,
            spikes,
            router_hops,
            total_pj,
            total_uj: total_pj * 1e-6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_profiles_resolve() {
        for name in PROFILE_NAMES {
            assert!(profile(name).is_some(), "{name}");
        }
        assert!(profile("unknown").is_none());
        assert_eq!(profile("mnifat").unwrap().pj_per_synaptic_event, 360.0);
        assert_eq!(profile("dynap_sel").unwrap().pj_per_synaptic_event, 2.8);
        assert_eq!(profile("spinnaker").unwrap().pj_per_synaptic_event, 43e3);
    }

    #[test]
    fn energy_is_linear_in_event_count() {
        let table = EnergyTable::synaptic_only(360.0);
        let one = EnergyBreakdown::compute(None, table, 1_000, 0, 0);
        let two = EnergyBreakdown::compute(None, table, 2_000, 0, 0);
        assert_eq!(two.total_pj, 2.0 * one.total_pj);
    }

    #[test]
    fn million_event_run_reports_360_microjoules() {
        let b = EnergyBreakdown::compute(
            Some("mnifat".into()),
            profile("mnifat").unwrap(),
            1_000_000,
            0,
            0,
        );
        assert_eq!(b.total_pj, 3.6e8);
        assert_eq!(b.total_uj, 360.0);
    }
}
