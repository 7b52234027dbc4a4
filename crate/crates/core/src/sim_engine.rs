//! World state and the fixed-step loop: perceive, decide, control,
//! integrate, score. Also the density-held highway section simulation.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collision::{collision_index, OrientedRect};
use crate::config::{ScenarioConfig, VehicleKind, VehicleSpec};
use crate::driver_control::{
    longitudinal_command, plan_lane_change, steering_command, DriverDisposition, ErrorRate,
    LateralReference, LongitudinalErrors,
};
use crate::game::{build_payoff_tensor, solve_stackelberg_with, GameSetup, Strategy};
use crate::perception::{classify_neighbors, perceive_with_noise, perceived_lanes, Lane, Snapshot};
use crate::vehicle_dynamics::{step, ControlInput, DynamicsError, VehicleParams, VehicleState};

pub const METERS_PER_MILE: f64 = 1609.34;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("numerical failure for vehicle {id} at t = {t:.2} s: {source}")]
    Numerical {
        id: usize,
        t: f64,
        #[source]
        source: DynamicsError,
    },
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub kind: VehicleKind,
    pub q: f64,
    pub disposition: DriverDisposition,
    pub desired_speed: f64,
    pub state: VehicleState,
    /// Lane the lateral controller is holding or heading for.
    pub lane: Lane,
    pub maneuver: Option<LateralReference>,
    /// Lane of the centre, `None` off the carriageway.
    pub occupied: Option<Lane>,
    /// Strategy from the most recent game, if any was played.
    pub strategy: Option<Strategy>,
    pub odometer: f64,
    leader: Option<usize>,
    speed_rate: ErrorRate,
    headway_rate: ErrorRate,
    lateral_rate: ErrorRate,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn snapshot(&self, length: f64, width: f64) -> Snapshot {
        Snapshot {
            id: self.id,
            state: self.state,
            length,
            width,
        }
    }

    pub fn is_prop(&self) -> bool {
        self.kind == VehicleKind::Prop
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRecord {
    pub id: usize,
    pub state: VehicleState,
    pub lane: Option<Lane>,
    pub strategy: Option<Strategy>,
    /// Largest index over this vehicle's pairs.
    pub max_icol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleRecord>,
    /// `(a, b, index)` with `a < b` for every pair.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_icol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChange {
    pub t: f64,
    pub id: usize,
    pub from: Lane,
    pub to: Lane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub t: f64,
    pub id: usize,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    NearCrash,
    Crash,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::NearCrash => "near_crash",
            EventKind::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyEvent {
    pub kind: EventKind,
    /// Start of the excursion.
    pub time: f64,
    pub pair: (usize, usize),
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    pub lane_changes: Vec<LaneChange>,
    pub decisions: Vec<Decision>,
    pub events: Vec<SafetyEvent>,
}

impl SimTrace {
    pub fn lane_changes_of(&self, id: usize) -> impl Iterator<Item = &LaneChange> {
        self.lane_changes.iter().filter(move |c| c.id == id)
    }

    pub fn first_lane_change(&self, id: usize) -> Option<&LaneChange> {
        self.lane_changes_of(id).next()
    }

    /// Largest index the pair reached over the run.
    pub fn pair_peak(&self, a: usize, b: usize) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        self.steps
            .iter()
            .flat_map(|s| s.pairs.iter())
            .filter(|p| p.0 == a && p.1 == b)
            .map(|p| p.2)
            .fold(0.0, f64::max)
    }
}

/// Hysteresis episode tracker for one pair.
#[derive(Debug, Clone, Copy, Default)]
struct Episode {
    start: f64,
    peak: f64,
}

/// Online event detection over any number of pairs.
#[derive(Debug, Clone)]
pub struct EventDetector {
    near: f64,
    release: f64,
    open: BTreeMap<(usize, usize), Episode>,
}

impl EventDetector {
    pub fn new(near: f64, release: f64) -> Self {
        Self {
            near,
            release,
            open: BTreeMap::new(),
        }
    }

    fn close(pair: (usize, usize), e: Episode) -> SafetyEvent {
        SafetyEvent {
            kind: if e.peak >= 1.0 {
                EventKind::Crash
            } else {
                EventKind::NearCrash
            },
            time: e.start,
            pair,
            peak: e.peak,
        }
    }

    /// Feed one sample; returns an event when an excursion ends.
    pub fn update(&mut self, t: f64, pair: (usize, usize), index: f64) -> Option<SafetyEvent> {
        match self.open.get_mut(&pair) {
            Some(e) => {
                e.peak = e.peak.max(index);
                if index < self.release {
                    let e = self.open.remove(&pair).unwrap();
                    return Some(Self::close(pair, e));
                }
                None
            }
            None => {
                if index > self.near {
                    self.open.insert(
                        pair,
                        Episode {
                            start: t,
                            peak: index,
                        },
                    );
                }
                None
            }
        }
    }

    /// Force-close every excursion involving `id`.
    pub fn close_vehicle(&mut self, id: usize) -> Vec<SafetyEvent> {
        let keys: Vec<_> = self
            .open
            .keys()
            .filter(|k| k.0 == id || k.1 == id)
            .copied()
            .collect();
        keys.into_iter()
            .map(|k| Self::close(k, self.open.remove(&k).unwrap()))
            .collect()
    }

    pub fn finish(&mut self) -> Vec<SafetyEvent> {
        std::mem::take(&mut self.open)
            .into_iter()
            .map(|(k, e)| Self::close(k, e))
            .collect()
    }
}

/// Events from a stored trace, one per excursion per pair.
pub fn detect_events(
    trace: &SimTrace,
    near_threshold: f64,
    release_threshold: f64,
) -> Vec<SafetyEvent> {
    let mut det = EventDetector::new(near_threshold, release_threshold);
    let mut out = Vec::new();
    for s in &trace.steps {
        for &(a, b, i) in &s.pairs {
            out.extend(det.update(s.t, (a, b), i));
        }
    }
    out.extend(det.finish());
    out.sort_by(|x, y| x.time.total_cmp(&y.time).then(x.pair.cmp(&y.pair)));
    out
}

/// Sum over recorded steps of the largest pairwise index, times dt.
pub fn cumulative_collision_possibility(trace: &SimTrace) -> f64 {
    trace.steps.iter().map(|s| s.max_icol).sum::<f64>() * trace.dt
}

fn body(s: &VehicleState, params: &VehicleParams) -> OrientedRect {
    OrientedRect::new([s.x, s.y], s.heading, params.length, params.width)
}

/// Collision index of every pair of `(id, state)` bodies, sorted by
/// `(a, b)` with `a < b`.
pub fn pairwise_indices(
    states: &[(usize, VehicleState)],
    params: &VehicleParams,
    scale: f64,
) -> Vec<(usize, usize, f64)> {
    let rects: Vec<_> = states
        .iter()
        .map(|(id, s)| (*id, body(s, params)))
        .collect();
    let mut out = Vec::with_capacity(rects.len() * rects.len().saturating_sub(1) / 2);
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            let index = collision_index(&rects[i].1, &rects[j].1).scaled_index(scale);
            let (a, b) = (rects[i].0.min(rects[j].0), rects[i].0.max(rects[j].0));
            out.push((a, b, index));
        }
    }
    out.sort_by_key(|p| (p.0, p.1));
    out
}

/// Shared simulation state.
#[derive(Debug, Clone)]
pub struct World {
    pub config: ScenarioConfig,
    pub agents: Vec<Agent>,
    pub t: f64,
    pub step_index: u64,
    epoch_steps: u64,
    attributed: DriverDisposition,
}

/// What happened during one call to `World::advance`.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub decisions: Vec<Decision>,
    pub lane_changes: Vec<LaneChange>,
}

impl World {
    pub fn new(config: ScenarioConfig) -> Self {
        let epoch_steps = ((config.sim.decision_interval / config.sim.dt).round() as u64).max(1);
        let attributed = config.disposition.disposition(config.game.attributed_q);
        Self {
            config,
            agents: Vec::new(),
            t: 0.0,
            step_index: 0,
            epoch_steps,
            attributed,
        }
    }

    /// Add a vehicle; speeds are in the configured unit.
    pub fn spawn(&mut self, spec: &VehicleSpec) {
        let c = &self.config;
        let speed = c.speed_mps(spec.speed);
        let desired = c.speed_mps(spec.desired_speed.unwrap_or(spec.speed));
        let lane = c.road.nearest_lane(spec.x);
        let mut rng = ChaCha8Rng::seed_from_u64(c.sim.seed);
        rng.set_stream(spec.id as u64);
        self.agents.push(Agent {
            id: spec.id,
            kind: spec.kind,
            q: spec.q,
            disposition: c.disposition.disposition(spec.q),
            desired_speed: desired,
            state: VehicleState::straight(spec.x, spec.y, speed),
            lane,
            maneuver: None,
            occupied: c.road.lane_at(spec.x),
            strategy: None,
            odometer: 0.0,
            leader: None,
            speed_rate: ErrorRate::default(),
            headway_rate: ErrorRate::default(),
            lateral_rate: ErrorRate::default(),
            rng,
        });
    }

    pub fn remove(&mut self, id: usize) -> Option<Agent> {
        let i = self.agents.iter().position(|a| a.id == id)?;
        Some(self.agents.remove(i))
    }

    pub fn snapshots(&self) -> Vec<Snapshot> {
        let (l, w) = (self.config.dynamics.length, self.config.dynamics.width);
        self.agents.iter().map(|a| a.snapshot(l, w)).collect()
    }

    /// Pairwise indices at the current state, `a < b` by id.
    pub fn pair_indices(&self) -> Vec<(usize, usize, f64)> {
        let states: Vec<_> = self.agents.iter().map(|a| (a.id, a.state)).collect();
        pairwise_indices(&states, &self.config.dynamics, self.config.safety.scale)
    }

    pub fn is_decision_epoch(&self) -> bool {
        self.step_index.is_multiple_of(self.epoch_steps)
    }

    /// Each free decision vehicle plays its game on the frozen snapshot.
    fn decide(&mut self, snaps: &[Snapshot]) -> Vec<Decision> {
        let c = &self.config;
        let suf = c.game.suf_multiple * c.dynamics.diagonal();
        let mut out = Vec::new();
        for (i, agent) in self.agents.iter_mut().enumerate() {
            if agent.is_prop() || agent.maneuver.is_some() {
                continue;
            }
            let view = classify_neighbors(
                &snaps[i],
                snaps,
                &c.road,
                c.perception.visibility,
                agent.q,
                &c.perception,
            );
            let noisy = perceive_with_noise(&view, agent.q, &c.perception.noise, &mut agent.rng);
            let setup = GameSetup::from_view(
                agent.id,
                agent.lane,
                &noisy,
                agent.disposition,
                self.attributed,
                suf,
                c.game.sentinel,
            );
            let solution =
                solve_stackelberg_with(&build_payoff_tensor(&setup), c.game.indifference);
            let strategy = solution.leader();
            agent.strategy = Some(strategy);
            out.push(Decision {
                t: self.t,
                id: agent.id,
                strategy,
            });
            if let Some(target) = strategy
                .apply(agent.lane)
                .filter(|_| strategy != Strategy::S)
            {
                agent.maneuver = Some(plan_lane_change(
                    c.road.center(agent.lane),
                    c.road.center(target),
                    agent.state.v_long.max(1.0),
                    &agent.disposition,
                    self.t,
                ));
                agent.lane = target;
                agent.lateral_rate.reset();
            }
        }
        out
    }

    /// Nearest vehicle ahead that `agent` perceives in a lane it uses.
    fn control_leader(&self, i: usize, snaps: &[Snapshot]) -> Option<usize> {
        let c = &self.config;
        let agent = &self.agents[i];
        let mut lanes = [false; 3];
        lanes[agent.lane.index()] = true;
        if let Some(l) = agent.occupied {
            lanes[l.index()] = true;
        }
        let ego_y = agent.state.y;
        let mut best: Option<(f64, usize)> = None;
        for (j, s) in snaps.iter().enumerate() {
            let gap = s.state.y - ego_y;
            if j == i || gap < 0.0 || gap > c.perception.visibility {
                continue;
            }
            let seen = perceived_lanes(&s.rect(), agent.q, &c.road, &c.perception);
            if (0..3).any(|k| seen[k] && lanes[k]) && best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, j));
            }
        }
        best.map(|(_, j)| j)
    }

    fn control(&mut self, i: usize, snaps: &[Snapshot]) -> ControlInput {
        let leader = self.control_leader(i, snaps);
        let c = &self.config;
        let dt = c.sim.dt;
        let t = self.t;
        let lead = leader.map(|j| (snaps[j].id, snaps[j].state.y, snaps[j].road_speed()));
        let agent = &mut self.agents[i];
        let s = agent.state;
        let v_ref = match lead {
            Some((_, _, v)) => agent.desired_speed.min(v),
            None => agent.desired_speed,
        };
        let e_v = v_ref - s.v_long;
        let lead_id = lead.map(|l| l.0);
        if lead_id != agent.leader {
            agent.headway_rate.reset();
            agent.speed_rate.reset();
            agent.leader = lead_id;
        }
        let de_v = agent.speed_rate.update(e_v, dt);
        let headway = lead.map(|(_, y, _)| {
            let e = (y - s.y) - agent.disposition.headway_time * s.v_long;
            (e, agent.headway_rate.update(e, dt))
        });
        let errors = LongitudinalErrors {
            speed: e_v,
            speed_rate: de_v,
            headway,
        };
        let accel = longitudinal_command(&errors, &c.control, &agent.disposition, &c.dynamics);
        let x_ref = match &agent.maneuver {
            Some(m) => m.position(t),
            None => c.road.center(agent.lane),
        };
        let e_x = s.x - x_ref;
        let de_x = agent.lateral_rate.update(e_x, dt);
        let steer = steering_command(e_x, de_x, &c.control, &agent.disposition, &s, &c.dynamics);
        ControlInput { accel, steer }
    }

    /// Play the games if this step is a decision epoch.
    pub fn decide_now(&mut self) -> Vec<Decision> {
        if !self.is_decision_epoch() {
            return Vec::new();
        }
        let snaps = self.snapshots();
        self.decide(&snaps)
    }

    /// Control and integrate every vehicle over one step.
    pub fn integrate(&mut self) -> Result<Vec<LaneChange>, SimError> {
        let snaps = self.snapshots();
        let inputs: Vec<Option<ControlInput>> = (0..self.agents.len())
            .map(|i| (!self.agents[i].is_prop()).then(|| self.control(i, &snaps)))
            .collect();
        let dt = self.config.sim.dt;
        let t_next = (self.step_index + 1) as f64 * dt;
        let mut changes = Vec::new();
        for (agent, input) in self.agents.iter_mut().zip(inputs) {
            let before = agent.state;
            agent.state = match input {
                None => VehicleState {
                    y: before.y + before.v_long * dt,
                    ..before
                },
                Some(u) => step(&before, &self.config.dynamics, u, dt).map_err(|source| {
                    SimError::Numerical {
                        id: agent.id,
                        t: self.t,
                        source,
                    }
                })?,
            };
            agent.odometer += (agent.state.x - before.x).hypot(agent.state.y - before.y);
            if agent.maneuver.is_some_and(|m| m.is_finished(t_next)) {
                agent.maneuver = None;
            }
            let now = self.config.road.lane_at(agent.state.x);
            if now != agent.occupied {
                if let (Some(from), Some(to)) = (agent.occupied, now) {
                    changes.push(LaneChange {
                        t: t_next,
                        id: agent.id,
                        from,
                        to,
                    });
                }
                agent.occupied = now;
            }
        }
        self.step_index += 1;
        self.t = t_next;
        Ok(changes)
    }

    /// Decide on epochs, then integrate.
    pub fn advance(&mut self) -> Result<StepOutcome, SimError> {
        let decisions = self.decide_now();
        let lane_changes = self.integrate()?;
        Ok(StepOutcome {
            decisions,
            lane_changes,
        })
    }

    pub fn record(&self, pairs: Vec<(usize, usize, f64)>) -> StepRecord {
        let max_icol = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
        let vehicles = self
            .agents
            .iter()
            .map(|a| VehicleRecord {
                id: a.id,
                state: a.state,
                lane: a.occupied,
                strategy: a.strategy,
                max_icol: pairs
                    .iter()
                    .filter(|p| p.0 == a.id || p.1 == a.id)
                    .map(|p| p.2)
                    .fold(0.0, f64::max),
            })
            .collect();
        StepRecord {
            t: self.t,
            vehicles,
            pairs,
            max_icol,
        }
    }
}

/// Run the configured vehicles for the configured duration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimTrace, SimError> {
    config.validate().map_err(|(_, m)| SimError::Invalid(m))?;
    let mut world = World::new(config.clone());
    for spec in &config.vehicles {
        world.spawn(spec);
    }
    let n = (config.sim.duration / config.sim.dt).round() as u64;
    let mut trace = SimTrace {
        dt: config.sim.dt,
        ..Default::default()
    };
    for k in 0..=n {
        if k < n {
            trace.decisions.extend(world.decide_now());
        }
        let pairs = world.pair_indices();
        trace.steps.push(world.record(pairs));
        if k < n {
            trace.lane_changes.extend(world.integrate()?);
        }
    }
    trace.events = detect_events(
        &trace,
        config.safety.near_threshold,
        config.safety.release_threshold,
    );
    Ok(trace)
}

/// Share of the population drawn at each q.
#[derive(Debug, Clone, PartialEq)]
pub struct DispositionMix {
    pub label: String,
    pub components: Vec<(f64, f64)>,
}

impl DispositionMix {
    pub fn uniform(label: &str, q: f64) -> Self {
        Self {
            label: label.into(),
            components: vec![(q, 1.0)],
        }
    }

    pub fn blend(label: &str, components: &[(f64, f64)]) -> Self {
        Self {
            label: label.into(),
            components: components.to_vec(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.1).sum();
        let mut u = rng.random::<f64>() * total;
        for &(q, w) in &self.components {
            if u < w {
                return q;
            }
            u -= w;
        }
        self.components.last().map(|c| c.0).unwrap_or(0.5)
    }

    pub fn mean_q(&self) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.1).sum();
        self.components.iter().map(|c| c.0 * c.1).sum::<f64>() / total
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectionStats {
    pub crashes: u64,
    pub near_crashes: u64,
    pub vehicle_miles: f64,
    pub cumulative_possibility: f64,
    pub exited: u64,
    pub injected: u64,
    pub deferred_injections: u64,
    pub events: Vec<SafetyEvent>,
    /// Vehicles in the section at each decision epoch.
    pub epoch_counts: Vec<usize>,
}

/// Section run parameters besides the scenario config.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionRun {
    pub density: usize,
    pub duration: f64,
    pub mix: DispositionMix,
    pub seed: u64,
    /// Treat every vehicle as a prop moving at its desired speed.
    pub props_only: bool,
}

struct Injector {
    rng: ChaCha8Rng,
    next_id: usize,
}

impl Injector {
    fn make(
        &mut self,
        config: &ScenarioConfig,
        run: &SectionRun,
        lane: Lane,
        y: f64,
    ) -> VehicleSpec {
        let sec = &config.section;
        let q = run.mix.sample(&mut self.rng);
        let jitter = sec.desired_jitter * (2.0 * self.rng.random::<f64>() - 1.0);
        let desired = sec.nominal_speed
            * (1.0 + sec.desired_spread_base + sec.desired_spread_slope * q + jitter);
        self.next_id += 1;
        VehicleSpec {
            id: self.next_id,
            kind: if run.props_only {
                VehicleKind::Prop
            } else {
                VehicleKind::Decision
            },
            x: config.road.center(lane),
            y,
            speed: desired,
            desired_speed: Some(desired),
            q,
        }
    }

    /// Try the lanes in random order; `None` if the entry is blocked.
    fn inject(&mut self, world: &World, run: &SectionRun) -> Option<VehicleSpec> {
        let c = &world.config;
        let mut order = Lane::ALL;
        for i in (1..order.len()).rev() {
            let j = self.rng.random_range(0..=i);
            order.swap(i, j);
        }
        for lane in order {
            let ahead = world
                .agents
                .iter()
                .filter(|a| a.occupied == Some(lane) || a.lane == lane)
                .map(|a| (a.state.y, a.state.v_long))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if ahead.is_some_and(|(y, _)| y < c.section.entry_clearance) {
                continue;
            }
            let mut spec = self.make(c, run, lane, 0.0);
            if let Some((_, v)) = ahead {
                spec.speed = spec.speed.min(c.sim.velocity_unit.from_mps(v));
            }
            return Some(spec);
        }
        None
    }
}

/// Hold `density` vehicles in the section; exits and crashed pairs are
/// replaced at the upstream edge.
pub fn traffic_section_sim(
    config: &ScenarioConfig,
    run: &SectionRun,
) -> Result<SectionStats, SimError> {
    if run.density == 0 {
        return Err(SimError::Invalid("density must be at least 1".into()));
    }
    let mut cfg = config.clone();
    cfg.vehicles.clear();
    cfg.sim.seed = run.seed;
    cfg.validate().map_err(|(_, m)| SimError::Invalid(m))?;
    let mut world = World::new(cfg.clone());
    let mut inj = Injector {
        rng: ChaCha8Rng::seed_from_u64(run.seed),
        next_id: 0,
    };
    inj.rng.set_stream(u64::MAX);

    // initial placement: evenly spaced slots, shuffled lanes
    let slots = run.density;
    let spacing = cfg.section.length / slots as f64;
    for k in 0..slots {
        let lane = Lane::ALL[inj.rng.random_range(0..3)];
        let y = spacing * (k as f64 + 0.5);
        let spec = inj.make(&cfg, run, lane, y);
        world.spawn(&spec);
    }

    let mut stats = SectionStats::default();
    let mut detector = EventDetector::new(cfg.safety.near_threshold, cfg.safety.release_threshold);
    let mut pending = 0usize;
    let n = (run.duration / cfg.sim.dt).round() as u64;
    for _ in 0..n {
        if world.is_decision_epoch() {
            stats.epoch_counts.push(world.agents.len());
        }
        world.advance()?;
        let t = world.t;

        let pairs = world.pair_indices();
        stats.cumulative_possibility += pairs.iter().map(|p| p.2).fold(0.0, f64::max) * cfg.sim.dt;
        let mut crashed: Vec<usize> = Vec::new();
        for &(a, b, i) in &pairs {
            if crashed.contains(&a) || crashed.contains(&b) {
                continue;
            }
            if let Some(e) = detector.update(t, (a, b), i) {
                stats.events.push(e);
            }
            if i >= 1.0 {
                crashed.extend([a, b]);
            }
        }
        for id in &crashed {
            stats.events.extend(detector.close_vehicle(*id));
        }

        let length = cfg.section.length;
        let leaving: Vec<usize> = world
            .agents
            .iter()
            .filter(|a| a.state.y > length || crashed.contains(&a.id))
            .map(|a| a.id)
            .collect();
        for id in leaving {
            if !crashed.contains(&id) {
                stats.exited += 1;
                stats.events.extend(detector.close_vehicle(id));
            }
            let a = world.remove(id).unwrap();
            stats.vehicle_miles += a.odometer / METERS_PER_MILE;
            pending += 1;
        }
        while pending > 0 {
            match inj.inject(&world, run) {
                Some(spec) => {
                    world.spawn(&spec);
                    stats.injected += 1;
                    pending -= 1;
                }
                None => {
                    stats.deferred_injections += 1;
                    break;
                }
            }
        }
    }
    stats.events.extend(detector.finish());
    stats
        .events
        .sort_by(|x, y| x.time.total_cmp(&y.time).then(x.pair.cmp(&y.pair)));
    stats.crashes = stats
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Crash)
        .count() as u64;
    stats.near_crashes = stats
        .events
        .iter()
        .filter(|e| e.kind == EventKind::NearCrash)
        .count() as u64;
    stats.vehicle_miles += world.agents.iter().map(|a| a.odometer).sum::<f64>() / METERS_PER_MILE;
    Ok(stats)
}

fn lane_label(l: Option<Lane>) -> String {
    l.map(|l| l.to_string()).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &SimTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "t,id,x,y,theta,v_long,v_lat,r,lane,strategy,max_icol")?;
    for s in &trace.steps {
        for v in &s.vehicles {
            let st = &v.state;
            writeln!(
                out,
                "{:.2},{},{:.4},{:.4},{:.6},{:.4},{:.6},{:.6},{},{},{:.6}",
                s.t,
                v.id,
                st.x,
                st.y,
                st.heading,
                st.v_long,
                st.v_lat,
                st.yaw_rate,
                lane_label(v.lane),
                v.strategy
                    .map(|s| s.as_char().to_string())
                    .unwrap_or_default(),
                v.max_icol
            )?;
        }
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(events: &[SafetyEvent], mut out: W) -> io::Result<()> {
    writeln!(out, "kind,time,a,b,peak")?;
    for e in events {
        writeln!(
            out,
            "{},{:.2},{},{},{:.6}",
            e.kind.label(),
            e.time,
            e.pair.0,
            e.pair.1,
            e.peak
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(speed: f64, desired: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.sim.duration = 30.0;
        c.vehicles.push(VehicleSpec {
            id: 1,
            kind: VehicleKind::Decision,
            x: 3.3,
            y: 0.0,
            speed,
            desired_speed: Some(desired),
            q: 0.5,
        });
        c
    }

    #[test]
    fn lone_vehicle_tracks_desired_speed() {
        let trace = run_scenario(&single(90.0, 100.0)).unwrap();
        let last = trace.steps.last().unwrap().vehicles[0];
        assert!((last.state.v_long - 100.0 / 3.6).abs() < 0.05);
        assert!((last.state.x - 3.3).abs() < 1e-6);
        assert!(trace.lane_changes.is_empty());
        assert!(trace.events.is_empty());
        assert!(trace.decisions.iter().all(|d| d.strategy == Strategy::S));
    }

    #[test]
    fn time_is_strictly_increasing() {
        let trace = run_scenario(&single(100.0, 100.0)).unwrap();
        assert_eq!(trace.steps.len(), 3001);
        for w in trace.steps.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    fn synthetic(values: &[f64]) -> SimTrace {
        SimTrace {
            dt: 0.1,
            steps: values
                .iter()
                .enumerate()
                .map(|(k, &v)| StepRecord {
                    t: k as f64 * 0.1,
                    vehicles: vec![],
                    pairs: vec![(1, 2, v)],
                    max_icol: v,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn events_from_synthetic_traces() {
        assert!(detect_events(&synthetic(&[0.1, 0.3, 0.49, 0.2]), 0.5, 0.4).is_empty());
        let e = detect_events(&synthetic(&[0.5, 0.8, 0.3]), 0.5, 0.4);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].kind, EventKind::NearCrash);
        assert_eq!(e[0].peak, 0.8);
        let e = detect_events(
            &synthetic(&[0.6, 0.45, 0.7, 0.3, 0.2, 0.9, 1.0, 0.1]),
            0.5,
            0.4,
        );
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].kind, EventKind::NearCrash);
        assert_eq!(e[0].peak, 0.7);
        assert_eq!(e[1].kind, EventKind::Crash);
    }

    #[test]
    fn cumulative_is_hand_sum() {
        let t = synthetic(&[0.1, 0.25, 0.5]);
        assert!((cumulative_collision_possibility(&t) - 0.085).abs() < 1e-12);
    }

    #[test]
    fn overlapping_start_is_rejected() {
        let mut c = single(100.0, 100.0);
        let mut v = c.vehicles[0].clone();
        v.id = 2;
        v.y = 1.0;
        c.vehicles.push(v);
        assert!(matches!(run_scenario(&c), Err(SimError::Invalid(_))));
    }
}
