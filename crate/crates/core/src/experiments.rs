//! Batch harness: the four-combination unit suite, the Monte Carlo
//! collision surface, section runs and the crash-rate comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ScenarioConfig, VehicleKind};
use crate::perception::Lane;
use crate::sim_engine::{
    run_scenario, traffic_section_sim, DispositionMix, SectionRun, SectionStats, SimError, SimTrace,
};

/// Vehicles 1 and 2 of the Table 1 layout.
pub const SUBJECT: usize = 1;
pub const CHALLENGER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispositionCombo {
    pub label: &'static str,
    pub q1: f64,
    pub q2: f64,
}

pub const CAUTIOUS: f64 = 0.0;
pub const NORMAL: f64 = 0.5;
pub const AGGRESSIVE: f64 = 1.0;

pub const NORMAL_NORMAL: DispositionCombo = DispositionCombo {
    label: "normal_normal",
    q1: NORMAL,
    q2: NORMAL,
};
pub const AGGRESSIVE_CAUTIOUS: DispositionCombo = DispositionCombo {
    label: "aggressive_cautious",
    q1: AGGRESSIVE,
    q2: CAUTIOUS,
};
pub const AGGRESSIVE_AGGRESSIVE: DispositionCombo = DispositionCombo {
    label: "aggressive_aggressive",
    q1: AGGRESSIVE,
    q2: AGGRESSIVE,
};
pub const CAUTIOUS_CAUTIOUS: DispositionCombo = DispositionCombo {
    label: "cautious_cautious",
    q1: CAUTIOUS,
    q2: CAUTIOUS,
};

pub const UNIT_COMBOS: [DispositionCombo; 4] = [
    NORMAL_NORMAL,
    AGGRESSIVE_CAUTIOUS,
    AGGRESSIVE_AGGRESSIVE,
    CAUTIOUS_CAUTIOUS,
];

pub const SURFACE_COMBOS: [DispositionCombo; 3] =
    [NORMAL_NORMAL, AGGRESSIVE_CAUTIOUS, AGGRESSIVE_AGGRESSIVE];

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scenario lacks vehicle {0}")]
    MissingVehicle(usize),
    #[error("vehicle miles must be positive")]
    ZeroExposure,
}

/// A scenario with the two subject vehicles set to `combo`.
pub fn with_combo(
    config: &ScenarioConfig,
    combo: &DispositionCombo,
) -> Result<ScenarioConfig, ExperimentError> {
    let mut c = config.clone();
    c.vehicle_mut(SUBJECT)
        .ok_or(ExperimentError::MissingVehicle(SUBJECT))?
        .q = combo.q1;
    c.vehicle_mut(CHALLENGER)
        .ok_or(ExperimentError::MissingVehicle(CHALLENGER))?
        .q = combo.q2;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct UnitRun {
    pub combo: DispositionCombo,
    pub trace: SimTrace,
    /// Subject/challenger pair peak index.
    pub peak: f64,
}

impl UnitRun {
    fn first_change(&self, id: usize, from: u8, to: u8) -> Option<f64> {
        self.trace
            .lane_changes_of(id)
            .find(|c| c.from == Lane::new(from).unwrap() && c.to == Lane::new(to).unwrap())
            .map(|c| c.t)
    }

    pub fn first_lane_change_time(&self) -> Option<f64> {
        self.trace.lane_changes.first().map(|c| c.t)
    }

    pub fn lane_change_count(&self, id: usize) -> usize {
        self.trace.lane_changes_of(id).count()
    }

    /// Subject 2 -> 3 strictly before challenger 3 -> 2.
    pub fn swap_order(&self) -> Option<(f64, f64)> {
        let t1 = self.first_change(SUBJECT, 2, 3)?;
        let t2 = self
            .trace
            .lane_changes_of(CHALLENGER)
            .find(|c| c.from.number() == 3 && c.to.number() == 2 && c.t > t1)?
            .t;
        let first_subject = self.trace.first_lane_change(SUBJECT).map(|c| c.t);
        (first_subject == Some(t1)).then_some((t1, t2))
    }
}

#[derive(Debug, Clone)]
pub struct UnitSuite {
    pub runs: Vec<UnitRun>,
    pub verdicts: Vec<Verdict>,
}

impl UnitSuite {
    pub fn run(&self, combo: &DispositionCombo) -> &UnitRun {
        self.runs
            .iter()
            .find(|r| r.combo.label == combo.label)
            .unwrap()
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

fn verdict(name: &str, passed: bool, detail: String) -> Verdict {
    Verdict {
        name: name.into(),
        passed,
        detail,
    }
}

fn fmt_opt(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.2}"))
        .unwrap_or_else(|| "none".into())
}

/// The four disposition combinations on the given layout.
pub fn run_unit_suite(config: &ScenarioConfig) -> Result<UnitSuite, ExperimentError> {
    let runs: Vec<Result<UnitRun, ExperimentError>> = UNIT_COMBOS
        .par_iter()
        .map(|combo| {
            let trace = run_scenario(&with_combo(config, combo)?)?;
            let peak = trace.pair_peak(SUBJECT, CHALLENGER);
            Ok(UnitRun {
                combo: *combo,
                trace,
                peak,
            })
        })
        .collect();
    let runs: Vec<UnitRun> = runs.into_iter().collect::<Result<_, _>>()?;
    let by = |c: &DispositionCombo| runs.iter().find(|r| r.combo.label == c.label).unwrap();
    let nn = by(&NORMAL_NORMAL);
    let ac = by(&AGGRESSIVE_CAUTIOUS);
    let aa = by(&AGGRESSIVE_AGGRESSIVE);
    let cc = by(&CAUTIOUS_CAUTIOUS);

    let mut verdicts = Vec::new();
    let nn_order = nn.swap_order();
    verdicts.push(verdict(
        "normal_normal_order",
        nn_order.is_some(),
        format!("subject 2->3 then challenger 3->2: {nn_order:?}"),
    ));
    let aa_order = aa.swap_order();
    verdicts.push(verdict(
        "aggressive_aggressive_order",
        aa_order.is_some(),
        format!("subject 2->3 then challenger 3->2: {aa_order:?}"),
    ));
    let (t_aa, t_nn) = (aa.first_lane_change_time(), nn.first_lane_change_time());
    verdicts.push(verdict(
        "aggressive_aggressive_sooner",
        matches!((t_aa, t_nn), (Some(a), Some(n)) if a < n),
        format!(
            "first lane change {} s vs {} s",
            fmt_opt(t_aa),
            fmt_opt(t_nn)
        ),
    ));
    verdicts.push(verdict(
        "aggressive_aggressive_peak_above_threshold",
        aa.peak > config.safety.near_threshold,
        format!(
            "peak {:.4} vs threshold {}",
            aa.peak, config.safety.near_threshold
        ),
    ));
    let max_other = [nn, ac, cc].iter().map(|r| r.peak).fold(0.0, f64::max);
    verdicts.push(verdict(
        "aggressive_aggressive_peak_is_maximum",
        aa.peak > max_other,
        format!("peak {:.4} vs others' max {:.4}", aa.peak, max_other),
    ));
    verdicts.push(verdict(
        "aggressive_cautious_no_overtake",
        ac.lane_change_count(CHALLENGER) == 0,
        format!(
            "challenger lane changes: {}",
            ac.lane_change_count(CHALLENGER)
        ),
    ));
    verdicts.push(verdict(
        "aggressive_cautious_peak_below_aggressive",
        ac.peak < aa.peak,
        format!("peak {:.4} vs {:.4}", ac.peak, aa.peak),
    ));
    let cc_changes = cc.trace.lane_changes.len();
    verdicts.push(verdict(
        "cautious_cautious_no_lane_change",
        cc_changes == 0,
        format!("lane changes: {cc_changes}"),
    ));
    Ok(UnitSuite { runs, verdicts })
}

/// Move the subject, challenger and props so that the subject sits at
/// `y1` and the challenger at `y2`; props keep their offsets from the
/// subject.
pub fn place_pair(
    config: &ScenarioConfig,
    y1: f64,
    y2: f64,
) -> Result<ScenarioConfig, ExperimentError> {
    let mut c = config.clone();
    let base = c
        .vehicle(SUBJECT)
        .ok_or(ExperimentError::MissingVehicle(SUBJECT))?
        .y;
    for v in c.vehicles.iter_mut() {
        if v.kind == VehicleKind::Prop {
            v.y += y1 - base;
        }
    }
    c.vehicle_mut(SUBJECT).unwrap().y = y1;
    c.vehicle_mut(CHALLENGER)
        .ok_or(ExperimentError::MissingVehicle(CHALLENGER))?
        .y = y2;
    Ok(c)
}

pub const SURFACE_BIN_WIDTH: f64 = 10.0;
pub const SURFACE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub combo: &'static str,
    pub count: usize,
    /// Mean and max of the per-run peak index; zero for empty bins.
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub combo: &'static str,
    pub y1: f64,
    pub y2: f64,
    pub peak: f64,
}

impl SurfaceSample {
    pub fn separation(&self) -> f64 {
        self.y1 - self.y2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub samples: Vec<SurfaceSample>,
    pub points: Vec<SurfacePoint>,
}

impl Surface {
    pub fn points_for(&self, combo: &str) -> impl Iterator<Item = &SurfacePoint> {
        let combo = combo.to_string();
        self.points.iter().filter(move |p| p.combo == combo)
    }

    /// Mean peak over samples with separation beyond `min_separation`.
    pub fn mean_beyond(&self, combo: &str, min_separation: f64) -> f64 {
        let v: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.combo == combo && s.separation() > min_separation)
            .map(|s| s.peak)
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// Rank correlation of bin mean against bin centre, non-empty bins only.
    pub fn spearman(&self, combo: &str) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .points_for(combo)
            .filter(|p| p.count > 0)
            .map(|p| ((p.bin_lo + p.bin_hi) / 2.0, p.mean))
            .unzip();
        spearman(&x, &y)
    }
}

/// The random subject and challenger positions used for sample `i`.
pub fn surface_positions(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y1 = rng.random_range(0.0..=50.0);
            let y2 = rng.random_range(-50.0..=0.0);
            (y1, y2)
        })
        .collect()
}

fn bin_of(separation: f64) -> usize {
    ((separation / SURFACE_BIN_WIDTH).floor().max(0.0) as usize).min(SURFACE_BINS - 1)
}

/// `n` random placements, the same for every combination.
pub fn monte_carlo_surface(
    config: &ScenarioConfig,
    n: usize,
    seed: u64,
) -> Result<Surface, ExperimentError> {
    let positions = surface_positions(n, seed);
    let jobs: Vec<(DispositionCombo, f64, f64)> = SURFACE_COMBOS
        .iter()
        .flat_map(|c| positions.iter().map(move |&(y1, y2)| (*c, y1, y2)))
        .collect();
    let samples: Vec<Result<SurfaceSample, ExperimentError>> = jobs
        .par_iter()
        .map(|(combo, y1, y2)| {
            let c = with_combo(&place_pair(config, *y1, *y2)?, combo)?;
            let trace = run_scenario(&c)?;
            Ok(SurfaceSample {
                combo: combo.label,
                y1: *y1,
                y2: *y2,
                peak: trace.pair_peak(SUBJECT, CHALLENGER),
            })
        })
        .collect();
    let samples: Vec<SurfaceSample> = samples.into_iter().collect::<Result<_, _>>()?;

    let mut points = Vec::new();
    for combo in SURFACE_COMBOS {
        for b in 0..SURFACE_BINS {
            let peaks: Vec<f64> = samples
                .iter()
                .filter(|s| s.combo == combo.label && bin_of(s.separation()) == b)
                .map(|s| s.peak)
                .collect();
            let count = peaks.len();
            points.push(SurfacePoint {
                bin_lo: b as f64 * SURFACE_BIN_WIDTH,
                bin_hi: (b + 1) as f64 * SURFACE_BIN_WIDTH,
                combo: combo.label,
                count,
                mean: if count == 0 {
                    0.0
                } else {
                    peaks.iter().sum::<f64>() / count as f64
                },
                max: peaks.iter().copied().fold(0.0, f64::max),
            });
        }
    }
    Ok(Surface { samples, points })
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman's rank correlation; NaN when either side is constant.
/// Separation beyond which the surface orderings are checked, m.
pub const FAR_SEPARATION: f64 = 50.0;

/// Orderings at large separation and the decreasing trend per combo.
pub fn surface_verdicts(surface: &Surface) -> Vec<Verdict> {
    let far = |c: &DispositionCombo| surface.mean_beyond(c.label, FAR_SEPARATION);
    let (aa, nn, ac) = (
        far(&AGGRESSIVE_AGGRESSIVE),
        far(&NORMAL_NORMAL),
        far(&AGGRESSIVE_CAUTIOUS),
    );
    let mut out = vec![
        verdict(
            "far_aggressive_aggressive_above_normal_normal",
            aa > nn,
            format!("mean peak beyond {FAR_SEPARATION} m: {aa:.3e} vs {nn:.3e}"),
        ),
        verdict(
            "far_aggressive_aggressive_above_aggressive_cautious",
            aa > ac,
            format!("mean peak beyond {FAR_SEPARATION} m: {aa:.3e} vs {ac:.3e}"),
        ),
    ];
    for c in SURFACE_COMBOS {
        let rho = surface.spearman(c.label);
        out.push(verdict(
            &format!("{}_decreasing_with_separation", c.label),
            rho < 0.0,
            format!("spearman {rho:.3}"),
        ));
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn crash_rate_per_mvmt(events: u64, vehicle_miles: f64) -> Result<f64, ExperimentError> {
    if !(vehicle_miles > 0.0) {
        return Err(ExperimentError::ZeroExposure);
    }
    Ok(events as f64 / (vehicle_miles / 1.0e6))
}

/// Reference counts of the crash comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NhtsaFixture {
    pub crash_attentive: u64,
    pub near_crash_attentive: u64,
    pub crash_inattentive: u64,
    pub near_crash_inattentive: u64,
    /// Field-study exposure, miles.
    pub exposure_miles: f64,
}

pub const NHTSA: NhtsaFixture = NhtsaFixture {
    crash_attentive: 1,
    near_crash_attentive: 12,
    crash_inattentive: 2,
    near_crash_inattentive: 26,
    exposure_miles: 2.0e6,
};

/// Event counts and exposure for one population.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PopulationStats {
    pub crashes: u64,
    pub near_crashes: u64,
    pub vehicle_miles: f64,
}

impl PopulationStats {
    pub fn from_runs(runs: &[SectionStats]) -> Self {
        Self {
            crashes: runs.iter().map(|r| r.crashes).sum(),
            near_crashes: runs.iter().map(|r| r.near_crashes).sum(),
            vehicle_miles: runs.iter().map(|r| r.vehicle_miles).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NhtsaComparison {
    pub attentive: PopulationStats,
    pub inattentive: PopulationStats,
    /// `(label, model per MVMT, reference per MVMT)`.
    pub rates: Vec<(&'static str, f64, f64)>,
    pub crash_ratio_model: f64,
    pub crash_ratio_reference: f64,
    pub near_crash_ratio_model: f64,
    pub near_crash_ratio_reference: f64,
    pub crash_order_holds: bool,
    pub near_crash_order_holds: bool,
    pub note: &'static str,
}

fn ratio(a: u64, b: u64) -> f64 {
    a as f64 / b as f64
}

/// Side-by-side rates and the inattentive-versus-attentive orderings.
pub fn nhtsa_compare(
    attentive: PopulationStats,
    inattentive: PopulationStats,
    fixture: &NhtsaFixture,
) -> Result<NhtsaComparison, ExperimentError> {
    let m = fixture.exposure_miles;
    let rates = vec![
        (
            "crash_attentive",
            crash_rate_per_mvmt(attentive.crashes, attentive.vehicle_miles)?,
            crash_rate_per_mvmt(fixture.crash_attentive, m)?,
        ),
        (
            "near_crash_attentive",
            crash_rate_per_mvmt(attentive.near_crashes, attentive.vehicle_miles)?,
            crash_rate_per_mvmt(fixture.near_crash_attentive, m)?,
        ),
        (
            "crash_inattentive",
            crash_rate_per_mvmt(inattentive.crashes, inattentive.vehicle_miles)?,
            crash_rate_per_mvmt(fixture.crash_inattentive, m)?,
        ),
        (
            "near_crash_inattentive",
            crash_rate_per_mvmt(inattentive.near_crashes, inattentive.vehicle_miles)?,
            crash_rate_per_mvmt(fixture.near_crash_inattentive, m)?,
        ),
    ];
    Ok(NhtsaComparison {
        attentive,
        inattentive,
        rates,
        crash_ratio_model: ratio(inattentive.crashes, attentive.crashes),
        crash_ratio_reference: ratio(fixture.crash_inattentive, fixture.crash_attentive),
        near_crash_ratio_model: ratio(inattentive.near_crashes, attentive.near_crashes),
        near_crash_ratio_reference: ratio(
            fixture.near_crash_inattentive,
            fixture.near_crash_attentive,
        ),
        crash_order_holds: inattentive.crashes >= attentive.crashes,
        near_crash_order_holds: inattentive.near_crashes >= attentive.near_crashes,
        note: "qualitative comparison only; counts depend on parametrization",
    })
}

/// Named populations for section runs.
pub fn named_mix(name: &str, config: &ScenarioConfig) -> Option<DispositionMix> {
    let s = &config.section;
    Some(match name {
        "attentive" => DispositionMix::uniform(name, s.attentive_q),
        "inattentive75" | "inattentive" => DispositionMix::uniform(name, s.inattentive_q),
        "normal" => DispositionMix::uniform(name, NORMAL),
        "aggr_timid" => DispositionMix::blend(name, &[(AGGRESSIVE, 0.5), (CAUTIOUS, 0.5)]),
        "aggr_aggr" => DispositionMix::uniform(name, AGGRESSIVE),
        "props" => DispositionMix::uniform(name, NORMAL),
        _ => return None,
    })
}

pub const MIX_NAMES: [&str; 6] = [
    "attentive",
    "inattentive75",
    "normal",
    "aggr_timid",
    "aggr_aggr",
    "props",
];

/// Runs with seeds `base_seed + i`.
pub fn section_runs(
    config: &ScenarioConfig,
    density: usize,
    mix: &DispositionMix,
    runs: usize,
    duration: f64,
    base_seed: u64,
) -> Result<Vec<SectionStats>, ExperimentError> {
    let out: Vec<Result<SectionStats, SimError>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let run = SectionRun {
                density,
                duration,
                mix: mix.clone(),
                seed: base_seed.wrapping_add(i as u64),
                props_only: mix.label == "props",
            };
            traffic_section_sim(config, &run)
        })
        .collect();
    Ok(out.into_iter().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig14Cell {
    pub density: usize,
    pub runs: usize,
    pub mix: String,
    /// Cumulative collision possibility per run.
    pub values: Vec<f64>,
}

impl Fig14Cell {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }
}

/// Every (density, run count, mix) cell; smaller run counts reuse the
/// leading seeds of larger ones.
pub fn fig14_sweep(
    config: &ScenarioConfig,
    densities: &[usize],
    run_counts: &[usize],
    mixes: &[DispositionMix],
    duration: f64,
    base_seed: u64,
) -> Result<Vec<Fig14Cell>, ExperimentError> {
    let max_runs = run_counts.iter().copied().max().unwrap_or(0);
    let mut cells = Vec::new();
    for &density in densities {
        for mix in mixes {
            let all = section_runs(config, density, mix, max_runs, duration, base_seed)?;
            for &runs in run_counts {
                cells.push(Fig14Cell {
                    density,
                    runs,
                    mix: mix.label.clone(),
                    values: all[..runs]
                        .iter()
                        .map(|s| s.cumulative_possibility)
                        .collect(),
                });
            }
        }
    }
    Ok(cells)
}

/// Mixes of the cumulative-possibility sweep, by rising aggressive share.
pub const FIG14_MIXES: [&str; 3] = ["normal", "aggr_timid", "aggr_aggr"];

/// Density and aggressive-share dominance over the largest run count.
pub fn fig14_verdicts(cells: &[Fig14Cell]) -> Vec<Verdict> {
    let runs = cells.iter().map(|c| c.runs).max().unwrap_or(0);
    let mean = |density: usize, mix: &str| {
        cells
            .iter()
            .find(|c| c.density == density && c.mix == mix && c.runs == runs)
            .map(|c| c.mean())
    };
    let mut densities: Vec<usize> = cells.iter().map(|c| c.density).collect();
    densities.sort_unstable();
    densities.dedup();
    let mut mixes: Vec<&str> = Vec::new();
    for c in cells {
        if !mixes.contains(&c.mix.as_str()) {
            mixes.push(&c.mix);
        }
    }
    let mut out = Vec::new();
    for w in densities.windows(2) {
        for mix in &mixes {
            if let (Some(lo), Some(hi)) = (mean(w[0], mix), mean(w[1], mix)) {
                out.push(verdict(
                    &format!("{mix}_density_{}_above_{}", w[1], w[0]),
                    hi > lo,
                    format!("mean cumulative {hi:.3} vs {lo:.3} over {runs} runs"),
                ));
            }
        }
    }
    for &d in &densities {
        if let (Some(full), Some(half)) = (mean(d, "aggr_aggr"), mean(d, "aggr_timid")) {
            out.push(verdict(
                &format!("density_{d}_aggr_aggr_at_least_aggr_timid"),
                full >= half,
                format!("mean cumulative {full:.3} vs {half:.3} over {runs} runs"),
            ));
        }
    }
    out
}

/// Table 2 orderings as verdicts.
pub fn nhtsa_verdicts(c: &NhtsaComparison) -> Vec<Verdict> {
    vec![
        verdict(
            "inattentive_crashes_at_least_attentive",
            c.inattentive.crashes >= c.attentive.crashes,
            format!("{} vs {}", c.inattentive.crashes, c.attentive.crashes),
        ),
        verdict(
            "inattentive_near_crashes_at_least_attentive",
            c.inattentive.near_crashes >= c.attentive.near_crashes,
            format!(
                "{} vs {}",
                c.inattentive.near_crashes, c.attentive.near_crashes
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_definition() {
        assert_eq!(crash_rate_per_mvmt(0, 10.0).unwrap(), 0.0);
        assert_eq!(crash_rate_per_mvmt(2, 1.0e6).unwrap(), 2.0);
        assert!(crash_rate_per_mvmt(1, 0.0).is_err());
    }

    #[test]
    fn fixture_ratios() {
        assert_eq!(ratio(NHTSA.crash_inattentive, NHTSA.crash_attentive), 2.0);
        assert_eq!(
            ratio(NHTSA.near_crash_inattentive, NHTSA.near_crash_attentive),
            26.0 / 12.0
        );
    }

    #[test]
    fn self_comparison_passes() {
        let a = PopulationStats {
            crashes: NHTSA.crash_attentive,
            near_crashes: NHTSA.near_crash_attentive,
            vehicle_miles: NHTSA.exposure_miles,
        };
        let i = PopulationStats {
            crashes: NHTSA.crash_inattentive,
            near_crashes: NHTSA.near_crash_inattentive,
            vehicle_miles: NHTSA.exposure_miles,
        };
        let c = nhtsa_compare(a, i, &NHTSA).unwrap();
        assert!(c.crash_order_holds && c.near_crash_order_holds);
        assert_eq!(c.crash_ratio_model, c.crash_ratio_reference);
        assert_eq!(c.near_crash_ratio_model, c.near_crash_ratio_reference);
        for (_, model, reference) in &c.rates {
            assert_eq!(model, reference);
        }
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 5.0, 9.0, 20.0]) - 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn bins_partition_the_range() {
        assert_eq!(bin_of(0.0), 0);
        assert_eq!(bin_of(9.999), 0);
        assert_eq!(bin_of(10.0), 1);
        assert_eq!(bin_of(100.0), 9);
    }

    #[test]
    fn positions_are_in_range_and_reproducible() {
        let a = surface_positions(100, 7);
        assert_eq!(a, surface_positions(100, 7));
        assert!(a
            .iter()
            .all(|(y1, y2)| (0.0..=50.0).contains(y1) && (-50.0..=0.0).contains(y2)));
    }
}
