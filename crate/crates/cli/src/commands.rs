use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stackdrive::config::ScenarioConfig;
use stackdrive::experiments::{
    crash_rate_per_mvmt, fig14_sweep, fig14_verdicts, monte_carlo_surface, named_mix,
    nhtsa_compare, nhtsa_verdicts, run_unit_suite, section_runs, surface_verdicts, PopulationStats,
    NHTSA,
};
use stackdrive::sim_engine::{
    cumulative_collision_possibility, detect_events, pairwise_indices, write_events_csv,
    write_trace_csv, SectionStats, SimTrace, StepRecord, VehicleRecord,
};
use stackdrive::vehicle_dynamics::VehicleState;

use crate::manifest::Invocation;
use crate::output::{create, report_verdicts, write_json, write_rows};
use crate::CliError;

pub fn dispatch(inv: &Invocation, config: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    match inv {
        Invocation::Unit { seed } => unit(config, *seed, out),
        Invocation::Montecarlo { seed, runs } => montecarlo(config, *seed, *runs, out),
        Invocation::Section {
            seed,
            runs,
            density,
            mix,
            duration,
        } => section(config, *seed, *runs, *density, mix, *duration, out),
        Invocation::Fig14 {
            seed,
            runs,
            densities,
            mixes,
            duration,
        } => fig14(config, *seed, runs, densities, mixes, *duration, out),
        Invocation::ScoreTrace { trace, .. } => score_trace(config, trace, out),
        Invocation::Compare {
            attentive,
            inattentive,
        } => compare(attentive, inattentive, out),
    }
}

fn unit(config: &ScenarioConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut c = config.clone();
    c.sim.seed = seed;
    let suite = run_unit_suite(&c)?;
    for run in &suite.runs {
        let path = out.join(format!("trace_{}.csv", run.combo.label));
        write_trace_csv(&run.trace, create(&path)?).map_err(|e| CliError::io(&path, e))?;
        let changes: Vec<String> = run
            .trace
            .lane_changes
            .iter()
            .map(|l| format!("{}:{}->{}@{:.2}s", l.id, l.from, l.to, l.t))
            .collect();
        println!(
            "{:22} peak {:.4} lane changes [{}]",
            run.combo.label,
            run.peak,
            changes.join(" ")
        );
    }
    report_verdicts(out, &suite.verdicts)
}

#[derive(Serialize)]
struct SurfaceRow<'a> {
    combo: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
    mean_peak: f64,
    max_peak: f64,
}

#[derive(Serialize)]
struct SampleRow<'a> {
    combo: &'a str,
    y1: f64,
    y2: f64,
    separation: f64,
    peak: f64,
}

fn montecarlo(config: &ScenarioConfig, seed: u64, runs: usize, out: &Path) -> Result<(), CliError> {
    let surface = monte_carlo_surface(config, runs, seed)?;
    write_rows(
        &out.join("surface.csv"),
        surface.points.iter().map(|p| SurfaceRow {
            combo: p.combo,
            bin_lo: p.bin_lo,
            bin_hi: p.bin_hi,
            count: p.count,
            mean_peak: p.mean,
            max_peak: p.max,
        }),
    )?;
    write_rows(
        &out.join("samples.csv"),
        surface.samples.iter().map(|s| SampleRow {
            combo: s.combo,
            y1: s.y1,
            y2: s.y2,
            separation: s.separation(),
            peak: s.peak,
        }),
    )?;
    println!(
        "{} placements, {} surface cells",
        runs,
        surface.points.len()
    );
    report_verdicts(out, &surface_verdicts(&surface))
}

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    crashes: u64,
    near_crashes: u64,
    vehicle_miles: f64,
    cumulative_possibility: f64,
    exited: u64,
    injected: u64,
    deferred_injections: u64,
}

/// Population totals written by `section` and read by `compare`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SectionSummary {
    pub mix: String,
    pub density: usize,
    pub runs: usize,
    pub duration: f64,
    pub base_seed: u64,
    pub crashes: u64,
    pub near_crashes: u64,
    pub vehicle_miles: f64,
    pub crashes_per_mvmt: f64,
    pub near_crashes_per_mvmt: f64,
    pub mean_cumulative_possibility: f64,
}

pub const SUMMARY_FILE: &str = "summary.json";

fn section(
    config: &ScenarioConfig,
    seed: u64,
    runs: usize,
    density: usize,
    mix: &str,
    duration: f64,
    out: &Path,
) -> Result<(), CliError> {
    let m =
        named_mix(mix, config).ok_or_else(|| CliError::Usage(format!("unknown mix {mix:?}")))?;
    let stats = section_runs(config, density, &m, runs, duration, seed)?;
    let seeds = (0..runs as u64).map(|i| seed.wrapping_add(i));
    write_rows(
        &out.join("runs.csv"),
        stats.iter().zip(seeds.clone()).map(|(s, seed)| RunRow {
            seed,
            crashes: s.crashes,
            near_crashes: s.near_crashes,
            vehicle_miles: s.vehicle_miles,
            cumulative_possibility: s.cumulative_possibility,
            exited: s.exited,
            injected: s.injected,
            deferred_injections: s.deferred_injections,
        }),
    )?;
    write_section_events(&out.join("events.csv"), &stats, seeds)?;
    let pop = PopulationStats::from_runs(&stats);
    let summary = SectionSummary {
        mix: mix.to_string(),
        density,
        runs,
        duration,
        base_seed: seed,
        crashes: pop.crashes,
        near_crashes: pop.near_crashes,
        vehicle_miles: pop.vehicle_miles,
        crashes_per_mvmt: crash_rate_per_mvmt(pop.crashes, pop.vehicle_miles)?,
        near_crashes_per_mvmt: crash_rate_per_mvmt(pop.near_crashes, pop.vehicle_miles)?,
        mean_cumulative_possibility: stats.iter().map(|s| s.cumulative_possibility).sum::<f64>()
            / runs as f64,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    println!(
        "{mix} density {density}: {} crashes, {} near crashes over {:.1} vehicle-miles",
        pop.crashes, pop.near_crashes, pop.vehicle_miles
    );
    Ok(())
}

#[derive(Serialize)]
struct EventRow {
    seed: u64,
    kind: &'static str,
    time: f64,
    a: usize,
    b: usize,
    peak: f64,
}

fn write_section_events(
    path: &Path,
    stats: &[SectionStats],
    seeds: impl Iterator<Item = u64>,
) -> Result<(), CliError> {
    let rows = stats.iter().zip(seeds).flat_map(|(s, seed)| {
        s.events.iter().map(move |e| EventRow {
            seed,
            kind: e.kind.label(),
            time: e.time,
            a: e.pair.0,
            b: e.pair.1,
            peak: e.peak,
        })
    });
    write_rows(path, rows)
}

#[derive(Serialize)]
struct CellRow<'a> {
    density: usize,
    runs: usize,
    mix: &'a str,
    mean: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct ValueRow<'a> {
    density: usize,
    mix: &'a str,
    seed: u64,
    cumulative_possibility: f64,
}

fn fig14(
    config: &ScenarioConfig,
    seed: u64,
    runs: &[usize],
    densities: &[usize],
    mixes: &[String],
    duration: f64,
    out: &Path,
) -> Result<(), CliError> {
    let ms = mixes
        .iter()
        .map(|m| named_mix(m, config).ok_or_else(|| CliError::Usage(format!("unknown mix {m:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cells = fig14_sweep(config, densities, runs, &ms, duration, seed)?;
    let max_runs = runs.iter().copied().max().unwrap_or(0);
    write_rows(
        &out.join("cells.csv"),
        cells.iter().map(|c| CellRow {
            density: c.density,
            runs: c.runs,
            mix: &c.mix,
            mean: c.mean(),
            min: c.values.iter().copied().fold(f64::INFINITY, f64::min),
            max: c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
    )?;
    write_rows(
        &out.join("values.csv"),
        cells.iter().filter(|c| c.runs == max_runs).flat_map(|c| {
            c.values.iter().enumerate().map(move |(i, v)| ValueRow {
                density: c.density,
                mix: &c.mix,
                seed: seed.wrapping_add(i as u64),
                cumulative_possibility: *v,
            })
        }),
    )?;
    report_verdicts(out, &fig14_verdicts(&cells))
}

/// One row of a stored trace.
#[derive(Debug, Deserialize)]
struct TraceRow {
    t: f64,
    id: usize,
    x: f64,
    y: f64,
    theta: f64,
    v_long: f64,
    v_lat: f64,
    r: f64,
}

#[derive(Serialize)]
struct ScoreRow {
    t: f64,
    a: usize,
    b: usize,
    index: f64,
}

#[derive(Serialize)]
struct ScoreSummary {
    steps: usize,
    vehicles: usize,
    dt: f64,
    max_index: f64,
    cumulative_possibility: f64,
    crashes: usize,
    near_crashes: usize,
}

fn score_trace(config: &ScenarioConfig, trace: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(trace).map_err(|e| CliError::io(trace, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    // keyed by the time column's text so equal stamps group exactly
    let mut by_step: BTreeMap<u64, Vec<(usize, VehicleState)>> = BTreeMap::new();
    let mut times: BTreeMap<u64, f64> = BTreeMap::new();
    let dt = config.sim.dt;
    for (line, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row
            .map_err(|e| CliError::Usage(format!("{}: row {}: {e}", trace.display(), line + 2)))?;
        let key = (row.t / dt).round() as u64;
        times.insert(key, row.t);
        by_step.entry(key).or_default().push((
            row.id,
            VehicleState {
                x: row.x,
                y: row.y,
                heading: row.theta,
                v_long: row.v_long,
                v_lat: row.v_lat,
                yaw_rate: row.r,
            },
        ));
    }
    let mut scored = SimTrace {
        dt,
        ..SimTrace::default()
    };
    let mut ids = std::collections::BTreeSet::new();
    for (key, states) in &by_step {
        let pairs = pairwise_indices(states, &config.dynamics, config.safety.scale);
        let max_icol = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
        ids.extend(states.iter().map(|s| s.0));
        scored.steps.push(StepRecord {
            t: times[key],
            vehicles: states
                .iter()
                .map(|(id, state)| VehicleRecord {
                    id: *id,
                    state: *state,
                    lane: config.road.lane_at(state.x),
                    strategy: None,
                    max_icol: pairs
                        .iter()
                        .filter(|p| p.0 == *id || p.1 == *id)
                        .map(|p| p.2)
                        .fold(0.0, f64::max),
                })
                .collect(),
            pairs,
            max_icol,
        });
    }
    write_rows(
        &out.join("scores.csv"),
        scored.steps.iter().flat_map(|s| {
            s.pairs.iter().map(move |p| ScoreRow {
                t: s.t,
                a: p.0,
                b: p.1,
                index: p.2,
            })
        }),
    )?;
    let events = detect_events(
        &scored,
        config.safety.near_threshold,
        config.safety.release_threshold,
    );
    let path = out.join("events.csv");
    write_events_csv(&events, create(&path)?).map_err(|e| CliError::io(&path, e))?;
    let summary = ScoreSummary {
        steps: scored.steps.len(),
        vehicles: ids.len(),
        dt,
        max_index: scored.steps.iter().map(|s| s.max_icol).fold(0.0, f64::max),
        cumulative_possibility: cumulative_collision_possibility(&scored),
        crashes: events.iter().filter(|e| e.kind.label() == "crash").count(),
        near_crashes: events
            .iter()
            .filter(|e| e.kind.label() == "near_crash")
            .count(),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    println!(
        "{} steps, peak index {:.4}, {} crashes, {} near crashes",
        summary.steps, summary.max_index, summary.crashes, summary.near_crashes
    );
    Ok(())
}

fn read_summary(path: &Path) -> Result<SectionSummary, CliError> {
    let file: PathBuf = if path.is_dir() {
        path.join(SUMMARY_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))
}

#[derive(Serialize)]
struct RateRow<'a> {
    measure: &'a str,
    model_per_mvmt: f64,
    reference_per_mvmt: f64,
}

fn compare(attentive: &Path, inattentive: &Path, out: &Path) -> Result<(), CliError> {
    let pop = |s: &SectionSummary| PopulationStats {
        crashes: s.crashes,
        near_crashes: s.near_crashes,
        vehicle_miles: s.vehicle_miles,
    };
    let (a, i) = (read_summary(attentive)?, read_summary(inattentive)?);
    let c = nhtsa_compare(pop(&a), pop(&i), &NHTSA)?;
    write_rows(
        &out.join("rates.csv"),
        c.rates.iter().map(|(m, model, reference)| RateRow {
            measure: m,
            model_per_mvmt: *model,
            reference_per_mvmt: *reference,
        }),
    )?;
    println!(
        "crash ratio {:.3} (reference {:.3}), near-crash ratio {:.3} (reference {:.3}); {}",
        c.crash_ratio_model,
        c.crash_ratio_reference,
        c.near_crash_ratio_model,
        c.near_crash_ratio_reference,
        c.note
    );
    report_verdicts(out, &nhtsa_verdicts(&c))
}
