//! Network presets: the 32x64 cooperative-competitive array connectivity
//! and the interneuron-mediated global inhibition pattern.
//!
//! Grid convention: "vertical" connections run along the column index
//! (within one row), so a 32x64 array carries 32 one-dimensional chains of
//! 64 neurons when the second-neighbor connections are active. "Lateral"
//! connections run across rows. No wraparound at the edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifat::{ArrayGeometry, Lut, LutEntry, NeuronAddr, SynapseKind};
use crate::neuron::Polarity;

/// Which local connection groups are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WtaFlags {
    /// First neighbors across rows.
    pub lat: bool,
    /// First neighbors along the column index.
    pub vert1: bool,
    /// Second neighbors along the column index.
    pub vert2: bool,
    /// Self-excitation.
    pub self_exc: bool,
}

impl WtaFlags {
    /// 2D cooperation: lateral plus first-neighbor vertical.
    pub fn two_dimensional() -> Self {
        Self {
            lat: true,
            vert1: true,
            vert2: false,
            self_exc: false,
        }
    }

    /// Row-wise 1D cooperation: first and second vertical neighbors.
    pub fn one_dimensional() -> Self {
        Self {
            lat: false,
            vert1: true,
            vert2: true,
            self_exc: false,
        }
    }
}

/// Charge delivered per spike for each connection group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtaWeights {
    pub lat: f64,
    pub vert1: f64,
    pub vert2: f64,
    pub self_exc: f64,
}

impl Default for WtaWeights {
    fn default() -> Self {
        Self {
            lat: 0.1,
            vert1: 0.1,
            vert2: 0.05,
            self_exc: 0.05,
        }
    }
}

fn local_entry(src: NeuronAddr, dst: NeuronAddr, weight: f64) -> LutEntry {
    LutEntry {
        src,
        dst,
        kind: SynapseKind::Conductance,
        weight,
        polarity: Polarity::Exc,
        delay: 1,
    }
}

/// Build the local excitatory connectivity of the cooperative-competitive
/// array. Boundaries truncate; there is no wraparound. Weights must be
/// positive for every active group.
pub fn build_wta_preset(
    geometry: ArrayGeometry,
    flags: WtaFlags,
    weights: WtaWeights,
) -> Result<Vec<LutEntry>> {
    if geometry.cells != 1 {
        return Err(Error::InvalidParam(
            "the cooperative array addresses one cell per site".into(),
        ));
    }
    for (active, w, name) in [
        (flags.lat, weights.lat, "lat"),
        (flags.vert1, weights.vert1, "vert1"),
        (flags.vert2, weights.vert2, "vert2"),
        (flags.self_exc, weights.self_exc, "self_exc"),
    ] {
        if active && !(w > 0.0) {
            return Err(Error::InvalidParam(format!(
                "weight for active group `{name}` must be > 0"
            )));
        }
    }

    let mut entries = Vec::new();
    for row in 0..geometry.rows {
        for col in 0..geometry.cols {
            let src = NeuronAddr::new(row, col, 0);
            if flags.lat {
                for dr in [-1i32, 1] {
                    let r = row as i32 + dr;
                    if r >= 0 && r < geometry.rows as i32 {
                        entries.push(local_entry(
                            src,
                            NeuronAddr::new(r as u16, col, 0),
                            weights.lat,
                        ));
                    }
                }
            }
            for (active, dist, w) in [(flags.vert1, 1i32, weights.vert1), (flags.vert2, 2, weights.vert2)] {
                if !active {
                    continue;
                }
                for dc in [-dist, dist] {
                    let c = col as i32 + dc;
                    if c >= 0 && c < geometry.cols as i32 {
                        entries.push(local_entry(
                            src,
                            NeuronAddr::new(row, c as u16, 0),
                            w,
                        ));
                    }
                }
            }
            if flags.self_exc {
                entries.push(local_entry(src, src, weights.self_exc));
            }
        }
    }
    Ok(entries)
}

/// Global inhibition through an interneuron: every excitatory neuron drives
/// the interneuron, which inhibits all of them back. Competition wiring for
/// a soft winner-take-all.
pub fn build_global_inhibition(
    excitatory: &[NeuronAddr],
    interneuron: NeuronAddr,
    exc_weight: f64,
    inh_weight: f64,
) -> Result<Vec<LutEntry>> {
    if !(exc_weight > 0.0 && inh_weight > 0.0) {
        return Err(Error::InvalidParam(
            "inhibition pattern weights must be > 0".into(),
        ));
    }
    if excitatory.contains(&interneuron) {
        return Err(Error::InvalidParam(
            "the interneuron cannot be part of the excitatory pool".into(),
        ));
    }
    let mut entries = Vec::with_capacity(excitatory.len() * 2);
    for &e in excitatory {
        entries.push(local_entry(e, interneuron, exc_weight));
    }
    for &e in excitatory {
        entries.push(LutEntry {
            src: interneuron,
            dst: e,
            kind: SynapseKind::Conductance,
            weight: inh_weight,
            polarity: Polarity::Inh,
            delay: 1,
        });
    }
    Ok(entries)
}

/// Convenience: preset entries wrapped into a validated LUT.
pub fn wta_lut(
    geometry: ArrayGeometry,
    flags: WtaFlags,
    weights: WtaWeights,
    extra: Vec<LutEntry>,
) -> Result<Lut> {
    let mut entries = build_wta_preset(geometry, flags, weights)?;
    entries.extend(extra);
    Lut::from_entries(entries, &geometry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_from(entries: &[LutEntry], src: NeuronAddr) -> usize {
        entries.iter().filter(|e| e.src == src).count()
    }

    fn full_geometry() -> ArrayGeometry {
        ArrayGeometry {
            rows: 32,
            cols: 64,
            cells: 1,
        }
    }

    #[test]
    fn two_dimensional_mode_gives_four_neighbors_inside() {
        let entries = build_wta_preset(
            full_geometry(),
            WtaFlags::two_dimensional(),
            WtaWeights::default(),
        )
        .unwrap();
        assert_eq!(count_from(&entries, NeuronAddr::new(10, 10, 0)), 4);
        // Corner: boundary truncation, no wraparound.
        assert_eq!(count_from(&entries, NeuronAddr::new(0, 0, 0)), 2);
        assert_eq!(count_from(&entries, NeuronAddr::new(31, 63, 0)), 2);
    }

    #[test]
    fn one_dimensional_mode_stays_within_the_row() {
        let entries = build_wta_preset(
            full_geometry(),
            WtaFlags::one_dimensional(),
            WtaWeights::default(),
        )
        .unwrap();
        let interior = NeuronAddr::new(10, 10, 0);
        assert_eq!(count_from(&entries, interior), 4);
        // All targets share the source row: 32 independent 1D chains of 64.
        for e in entries.iter().filter(|e| e.src == interior) {
            assert_eq!(e.dst.row, interior.row);
            let d = (e.dst.col as i32 - interior.col as i32).abs();
            assert!(d == 1 || d == 2);
        }
        // Near the row start only +1, +2 and -1 fit.
        assert_eq!(count_from(&entries, NeuronAddr::new(5, 1, 0)), 3);
    }

    #[test]
    fn self_excitation_adds_a_loop_entry() {
        let flags = WtaFlags {
            self_exc: true,
            ..Default::default()
        };
        let entries =
            build_wta_preset(full_geometry(), flags, WtaWeights::default()).unwrap();
        assert_eq!(entries.len(), 32 * 64);
        assert!(entries.iter().all(|e| e.src == e.dst && e.delay == 1));
    }

    #[test]
    fn inhibition_ring_has_all_to_one_and_one_to_all() {
        let pool: Vec<NeuronAddr> = (0..5).map(|c| NeuronAddr::new(0, c, 0)).collect();
        let inter = NeuronAddr::new(1, 0, 0);
        let entries = build_global_inhibition(&pool, inter, 0.3, 0.4).unwrap();
        assert_eq!(entries.len(), 10);
        assert_eq!(
            entries
                .iter()
                .filter(|e| e.dst == inter && e.polarity == Polarity::Exc)
                .count(),
            5
        );
        assert_eq!(
            entries
                .iter()
                .filter(|e| e.src == inter && e.polarity == Polarity::Inh)
                .count(),
            5
        );
        assert!(build_global_inhibition(&pool, pool[0], 0.3, 0.4).is_err());
    }
}
