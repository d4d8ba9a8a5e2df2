//! Run orchestration: dispatch a validated config to its engine, collect
//! raster records and counters, account energy, and write the artifacts.
//!
//! Everything written by `run_simulation` is a pure function of
//! (config, seed); wall-clock timing is only attached when explicitly
//! requested so that default outputs stay byte-reproducible.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde_json::json;

use crate::config::{
    CortexStimulus, EngineKind, HiaerStimulus, IfatStimulus, NetworkConfig, WtaStimulus,
};
use crate::cortex::{CortexEngine, CountEvent};
use crate::crossbar::{
    crossbar_read_ideal, crossbar_read_nonideal, precision_sweep, CrossbarArray,
};
use crate::dynap::DynapEvent;
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::ifat::{run_ifat, AddressEvent, Lut, LutEntry, NeuronAddr, SynapseKind};
use crate::neuron::Polarity;
use crate::output::{emit_raster, render_stats, write_atomic, RasterRecord, RunStats, Timing};
use crate::rng::{stream, StreamPurpose};
use crate::wta::{poisson_drive, WtaEngine};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub ticks: Option<u64>,
    pub out_dir: PathBuf,
    /// Worker threads for engines with tick-level parallelism; 0 keeps the
    /// process default.
    pub workers: usize,
    /// Attach wall-clock timing to the stats document.
    pub timing: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            seed: None,
            ticks: None,
            out_dir: out_dir.into(),
            workers: 0,
            timing: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub raster_path: PathBuf,
    pub stats_path: PathBuf,
    pub stats: RunStats,
}

/// Everything an engine dispatch produces.
struct RunOutcome {
    raster: Vec<RasterRecord>,
    events_in: u64,
    synaptic_events: u64,
    spikes: u64,
    router_hops: u64,
    dropped_events: u64,
    max_queue_backlog: u64,
    ticks_run: u64,
    engine_detail: serde_json::Value,
}

/// Run a validated configuration and write `raster.csv` and `stats.json`
/// into the output directory.
pub fn run_simulation(config: &NetworkConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    config.validate()?;
    let seed = opts.seed.unwrap_or(config.seed);

    let started = Instant::now();
    let outcome = dispatch(config, seed, opts)?;
    let wall = started.elapsed().as_secs_f64();

    let (profile, table) = config.energy.resolve()?;
    let energy = EnergyBreakdown::compute(
        profile,
        table,
        outcome.synaptic_events,
        outcome.spikes,
        outcome.router_hops,
    );

    let stats = RunStats {
        format_version: crate::config::FORMAT_VERSION,
        engine: config.engine.to_string(),
        seed,
        ticks_run: outcome.ticks_run,
        events_in: outcome.events_in,
        synaptic_events: outcome.synaptic_events,
        spikes: outcome.spikes,
        router_hops: outcome.router_hops,
        dropped_events: outcome.dropped_events,
        max_queue_backlog: outcome.max_queue_backlog,
        raster_records: outcome.raster.len() as u64,
        engine_detail: outcome.engine_detail,
        energy,
        timing: opts.timing.then(|| Timing {
            wall_clock_s: wall,
            events_per_sec: if wall > 0.0 {
                outcome.synaptic_events as f64 / wall
            } else {
                0.0
            },
        }),
    };

    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| Error::io(opts.out_dir.display().to_string(), e))?;
    let raster_path = opts.out_dir.join("raster.csv");
    let stats_path = opts.out_dir.join("stats.json");

    let mut raster_bytes = Vec::new();
    emit_raster(&outcome.raster, &mut raster_bytes)
        .map_err(|e| Error::io(raster_path.display().to_string(), e))?;
    write_atomic(&raster_path, &raster_bytes)?;
    write_atomic(&stats_path, render_stats(&stats).as_bytes())?;

    Ok(RunArtifacts {
        raster_path,
        stats_path,
        stats,
    })
}

fn dispatch(config: &NetworkConfig, seed: u64, opts: &RunOptions) -> Result<RunOutcome> {
    let run = || -> Result<RunOutcome> {
        match config.engine {
            EngineKind::Ifat => run_ifat_engine(config, seed),
            EngineKind::Hiaer => run_hiaer_engine(config, seed),
            EngineKind::Cortex => run_cortex_engine(config, seed, opts.ticks),
            EngineKind::Crossbar => run_crossbar_engine(config, seed),
            EngineKind::Wta => run_wta_engine(config, seed, opts.ticks),
        }
    };
    if opts.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

// ---------------------------------------------------------------------------
// IFAT
// ---------------------------------------------------------------------------

fn read_events_csv(path: &str) -> Result<Vec<AddressEvent>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.to_string(), e))?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("tick")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::validation_one(
                format!("{path}:{}", lineno + 1),
                "expected `tick,row,col,cell,polarity`",
            ));
        }
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| {
                Error::validation_one(format!("{path}:{}", lineno + 1), format!("bad {what} `{s}`"))
            })
        };
        let polarity = match fields[4] {
            "exc" => Polarity::Exc,
            "inh" => Polarity::Inh,
            other => {
                return Err(Error::validation_one(
                    format!("{path}:{}", lineno + 1),
                    format!("bad polarity `{other}`"),
                ))
            }
        };
        events.push(AddressEvent {
            tick: parse_u(fields[0], "tick")?,
            address: NeuronAddr {
                row: parse_u(fields[1], "row")? as u16,
                col: parse_u(fields[2], "col")? as u16,
                cell: parse_u(fields[3], "cell")? as u8,
            },
            polarity,
        });
    }
    Ok(events)
}

fn run_ifat_engine(config: &NetworkConfig, seed: u64) -> Result<RunOutcome> {
    let section = config.ifat.as_ref().expect("validated");
    let engine_config = section.engine_config();
    let geometry = section.geometry();
    let n = geometry.neuron_count();
    let factors = section.mismatch().factors(n, seed);

    let mut entries: Vec<LutEntry> = Vec::new();
    if let Some(w) = section.identity_weight {
        entries.extend((0..n).map(|i| {
            let a = geometry.addr_of(i);
            LutEntry {
                src: a,
                dst: a,
                kind: SynapseKind::Conductance,
                weight: w,
                polarity: Polarity::Exc,
                delay: 0,
            }
        }));
    }
    entries.extend(section.lut.iter().copied());
    let lut = Lut::from_entries(entries, &geometry)?;

    let out = match &section.stimulus {
        IfatStimulus::Uniform { events_per_neuron } => run_ifat(
            crate::ifat::uniform_drive(geometry, *events_per_neuron),
            &engine_config,
            &lut,
            &factors,
            seed,
        )?,
        IfatStimulus::Poisson {
            rate_hz,
            duration_ticks,
        } => {
            let p = rate_hz * section.tick_us * 1e-6;
            let rates = vec![p; n];
            let events = poisson_drive(geometry, &rates, *duration_ticks, seed);
            run_ifat(events, &engine_config, &lut, &factors, seed)?
        }
        IfatStimulus::File { path } => {
            run_ifat(read_events_csv(path)?, &engine_config, &lut, &factors, seed)?
        }
        IfatStimulus::None => run_ifat(std::iter::empty(), &engine_config, &lut, &factors, seed)?,
    };

    let ratios = out.ratios();
    let driven: Vec<f64> = ratios
        .iter()
        .zip(&out.input_events)
        .filter(|(_, &inp)| inp > 0)
        .map(|(&r, _)| r)
        .collect();
    let ratio_mean = if driven.is_empty() {
        0.0
    } else {
        driven.iter().sum::<f64>() / driven.len() as f64
    };

    Ok(RunOutcome {
        raster: out
            .raster
            .iter()
            .map(|(t, a)| RasterRecord::spike(*t, a))
            .collect(),
        events_in: out.stats.events_in,
        synaptic_events: out.stats.deliveries_serviced,
        spikes: out.stats.spikes,
        router_hops: 0,
        dropped_events: 0,
        max_queue_backlog: out.stats.max_backlog,
        ticks_run: out.stats.ticks_run,
        engine_detail: json!({
            "lut_fanout_total": out.stats.lut_fanout_total,
            "updates_applied": out.stats.updates_applied,
            "output_input_ratio_mean": ratio_mean,
        }),
    })
}

// ---------------------------------------------------------------------------
// Hiaer routing grid
// ---------------------------------------------------------------------------

fn run_hiaer_engine(config: &NetworkConfig, seed: u64) -> Result<RunOutcome> {
    let _ = seed; // routing is deterministic; the seed only names the run
    let section = config.hiaer.as_ref().expect("validated");
    let mut system = section.build()?;

    let mut events: Vec<DynapEvent> = Vec::new();
    if let HiaerStimulus::Regular {
        sources,
        period_ticks,
        duration_ticks,
    } = &section.stimulus
    {
        let mut t = 0;
        while t < *duration_ticks {
            for s in sources {
                events.push(DynapEvent {
                    tick: t,
                    source: s.source(),
                });
            }
            t += period_ticks;
        }
    }

    let (raster, stats) = system.run(&events);
    Ok(RunOutcome {
        raster: raster
            .iter()
            .map(|(t, s)| RasterRecord::spike(*t, s))
            .collect(),
        events_in: stats.spikes_routed,
        synaptic_events: stats.activations,
        spikes: stats.spikes_out,
        router_hops: stats.mesh_hops,
        dropped_events: stats.dropped_out_of_grid,
        max_queue_backlog: 0,
        ticks_run: events.last().map(|e| e.tick).unwrap_or(0),
        engine_detail: serde_json::to_value(stats).expect("stats serialize"),
    })
}

// ---------------------------------------------------------------------------
// Cortex
// ---------------------------------------------------------------------------

fn run_cortex_engine(
    config: &NetworkConfig,
    seed: u64,
    ticks_override: Option<u64>,
) -> Result<RunOutcome> {
    let section = config.cortex.as_ref().expect("validated");
    let mut issues = Vec::new();
    let engine_config = section.engine_config(&mut issues);
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    let mut engine = CortexEngine::new(engine_config, seed)?;

    let ticks = ticks_override
        .or(config.ticks)
        .or(match &section.stimulus {
            CortexStimulus::Regular { duration_ticks, .. } => Some(*duration_ticks),
            CortexStimulus::None => None,
        })
        .ok_or_else(|| Error::validation_one("ticks", "cortex runs need a tick count"))?;

    for t in 0..ticks {
        if let CortexStimulus::Regular {
            sources,
            count,
            period_ticks,
            duration_ticks,
        } = &section.stimulus
        {
            if t < *duration_ticks && t % period_ticks == 0 {
                for s in sources {
                    engine.inject(CountEvent {
                        src: s.id(),
                        count: *count,
                    })?;
                }
            }
        }
        engine.step();
    }

    let raster: Vec<RasterRecord> = engine
        .raster
        .iter()
        .map(|r| RasterRecord::counted(r.tick, r.src, r.count as u64))
        .collect();
    let stats = engine.stats;
    Ok(RunOutcome {
        raster,
        events_in: stats.external_count_sum,
        synaptic_events: stats.events_delivered,
        spikes: stats.spikes,
        router_hops: 0,
        dropped_events: 0,
        max_queue_backlog: stats.max_axon_backlog,
        ticks_run: stats.ticks_run,
        engine_detail: serde_json::to_value(stats).expect("stats serialize"),
    })
}

// ---------------------------------------------------------------------------
// Crossbar
// ---------------------------------------------------------------------------

fn run_crossbar_engine(config: &NetworkConfig, seed: u64) -> Result<RunOutcome> {
    let section = config.crossbar.as_ref().expect("validated");
    let mut rng = stream(seed, StreamPurpose::Sweep, 0);
    let mut arr = CrossbarArray::random(section.rows, section.cols, &section.device, &mut rng);
    arr.wire_r = section.wire_r;

    let mut mac_ops = 0u64;
    let mut sum_rel = 0.0;
    let mut max_rel = 0.0f64;
    for _ in 0..section.read_trials {
        let x: Vec<bool> = (0..section.rows).map(|_| rng.gen()).collect();
        mac_ops += x.iter().filter(|&&b| b).count() as u64 * section.cols as u64;
        let ideal = crossbar_read_ideal(&arr, &x, section.read.v_read)?;
        let actual =
            crossbar_read_nonideal(&arr, &x, &section.device, &section.mitigation, &section.read)?;
        let norm: f64 = ideal.iter().map(|v| v.abs()).sum();
        let err: f64 = ideal
            .iter()
            .zip(&actual)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let rel = if norm > 0.0 { err / norm } else { 0.0 };
        sum_rel += rel;
        max_rel = max_rel.max(rel);
    }

    Ok(RunOutcome {
        raster: Vec::new(),
        events_in: section.read_trials as u64,
        synaptic_events: mac_ops,
        spikes: 0,
        router_hops: 0,
        dropped_events: 0,
        max_queue_backlog: 0,
        ticks_run: section.read_trials as u64,
        engine_detail: json!({
            "read_trials": section.read_trials,
            "mean_rel_error_vs_ideal": sum_rel / section.read_trials as f64,
            "max_rel_error_vs_ideal": max_rel,
        }),
    })
}

/// Run the configured conductance-precision sweep and write
/// `sweep.csv` (levels, mean and max weighted-sum error).
pub fn run_precision_sweep(config: &NetworkConfig, opts: &RunOptions) -> Result<PathBuf> {
    config.validate()?;
    let section = config
        .crossbar
        .as_ref()
        .ok_or_else(|| Error::validation_one("crossbar", "sweep needs a [crossbar] section"))?;
    let seed = opts.seed.unwrap_or(config.seed);
    let mut rng = stream(seed, StreamPurpose::Sweep, 1);
    let records = precision_sweep(
        section.rows,
        section.cols,
        &section.sweep.levels,
        section.sweep.trials,
        &section.device,
        &mut rng,
    )?;

    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| Error::io(opts.out_dir.display().to_string(), e))?;
    let path = opts.out_dir.join("sweep.csv");
    let mut csv = String::from("levels,mean_rel_error,max_rel_error\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{}\n",
            r.levels, r.mean_rel_error, r.max_rel_error
        ));
    }
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// WTA
// ---------------------------------------------------------------------------

fn run_wta_engine(
    config: &NetworkConfig,
    seed: u64,
    ticks_override: Option<u64>,
) -> Result<RunOutcome> {
    let section = config.wta.as_ref().expect("validated");
    let engine_config = section.engine_config();
    let geometry = section.geometry();
    let lut = section.build_lut()?;
    let mut engine = WtaEngine::new(engine_config, lut, seed)?;

    let (events, duration) = match &section.stimulus {
        WtaStimulus::Poisson {
            rate_hz,
            duration_ticks,
            boosts,
        } => {
            let p = rate_hz * section.tick_ms * 1e-3;
            let mut rates = vec![p; geometry.neuron_count()];
            for b in boosts {
                rates[geometry.index_of(b.address)] = p * b.factor;
            }
            (
                poisson_drive(geometry, &rates, *duration_ticks, seed),
                Some(*duration_ticks),
            )
        }
        WtaStimulus::None => (Vec::new(), None),
    };

    let ticks = ticks_override
        .or(config.ticks)
        .or(duration)
        .ok_or_else(|| Error::validation_one("ticks", "wta runs need a tick count"))?;

    let out = engine.run(events, ticks)?;
    Ok(RunOutcome {
        raster: out
            .raster
            .iter()
            .map(|(t, a)| RasterRecord::spike(*t, a))
            .collect(),
        events_in: out.stats.external_events,
        synaptic_events: out.stats.external_events + out.stats.recurrent_deliveries,
        spikes: out.stats.spikes,
        router_hops: 0,
        dropped_events: 0,
        max_queue_backlog: 0,
        ticks_run: out.stats.ticks_run,
        engine_detail: serde_json::to_value(out.stats).expect("stats serialize"),
    })
}
