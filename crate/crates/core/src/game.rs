//! Three-player, three-level Stackelberg lane-change game.
//!
//! The deciding vehicle leads (P1); the nearest follower in an adjacent
//! lane is P2 and the other adjacent-lane follower is P3. Each driver
//! builds the whole payoff tensor from its own perception, attributing
//! an assumed disposition to the followers, and solves it by backward
//! induction:
//!
//! * P3's response set to `(g1, g2)` is the argmax of its payoff;
//! * P2 scores each strategy by its worst case over P3's response set,
//!   and its response set is the argmax of that score;
//! * each follower's reaction is the tie-broken member of its set, and P1
//!   picks the strategy with the best payoff against those reactions.
//!
//! Ties are broken toward going straight, then toward lane 1.

use serde::{Deserialize, Serialize};

use crate::driver_control::DriverDisposition;
use crate::perception::{Lane, NeighborView, Observed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Change one lane toward lane 1.
    L,
    /// Keep the lane.
    S,
    /// Change one lane toward lane 3.
    R,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::L, Strategy::S, Strategy::R];

    /// Tie-break priority, most preferred first.
    pub const PRIORITY: [Strategy; 3] = [Strategy::S, Strategy::L, Strategy::R];

    pub fn index(self) -> usize {
        match self {
            Strategy::L => 0,
            Strategy::S => 1,
            Strategy::R => 2,
        }
    }

    /// Lane reached by playing this strategy, `None` off the carriageway.
    pub fn apply(self, lane: Lane) -> Option<Lane> {
        match self {
            Strategy::L => lane.left(),
            Strategy::S => Some(lane),
            Strategy::R => lane.right(),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Strategy::L => 'L',
            Strategy::S => 'S',
            Strategy::R => 'R',
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Subset of `{L, S, R}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StrategySet([bool; 3]);

impl StrategySet {
    pub fn of(items: &[Strategy]) -> Self {
        let mut s = Self::default();
        for it in items {
            s.insert(*it);
        }
        s
    }

    pub fn insert(&mut self, s: Strategy) {
        self.0[s.index()] = true;
    }

    pub fn contains(&self, s: Strategy) -> bool {
        self.0[s.index()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = Strategy> + '_ {
        Strategy::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// Strategies whose value is within `tolerance` of the best.
    pub fn argmax(values: [f64; 3], tolerance: f64) -> Self {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut set = Self::default();
        for s in Strategy::ALL {
            if values[s.index()] >= best - tolerance {
                set.insert(s);
            }
        }
        set
    }
}

/// Singleton choice from a non-empty candidate set: going straight wins
/// any tie, and a move toward lane 1 beats a move toward lane 3.
pub fn apply_tie_breaks(candidates: StrategySet) -> Strategy {
    assert!(
        !candidates.is_empty(),
        "tie-break on an empty candidate set"
    );
    Strategy::PRIORITY
        .into_iter()
        .find(|s| candidates.contains(*s))
        .unwrap()
}

/// `utilities[player][g1][g2][g3]`, players 0..3 = P1..P3.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTensor {
    pub utilities: [[[[f64; 3]; 3]; 3]; 3],
}

impl PayoffTensor {
    pub fn zeros() -> Self {
        Self {
            utilities: [[[[0.0; 3]; 3]; 3]; 3],
        }
    }

    pub fn get(&self, player: usize, profile: [Strategy; 3]) -> f64 {
        self.utilities[player][profile[0].index()][profile[1].index()][profile[2].index()]
    }

    pub fn set(&mut self, player: usize, profile: [Strategy; 3], value: f64) {
        self.utilities[player][profile[0].index()][profile[1].index()][profile[2].index()] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.utilities
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSolution {
    pub strategies: [Strategy; 3],
    pub leader_payoff: f64,
}

impl GameSolution {
    pub fn leader(&self) -> Strategy {
        self.strategies[0]
    }
}

/// Backward induction with exact ties.
pub fn solve_stackelberg(tensor: &PayoffTensor) -> GameSolution {
    solve_stackelberg_with(tensor, 0.0)
}

/// Backward induction treating payoffs within `tolerance` of the best as tied.
pub fn solve_stackelberg_with(tensor: &PayoffTensor, tolerance: f64) -> GameSolution {
    debug_assert!(tensor.is_finite());
    let third_set = |g1: Strategy, g2: Strategy| {
        let values = Strategy::ALL.map(|g3| tensor.get(2, [g1, g2, g3]));
        StrategySet::argmax(values, tolerance)
    };
    let second_set = |g1: Strategy| {
        let values = Strategy::ALL.map(|g2| {
            third_set(g1, g2)
                .iter()
                .map(|g3| tensor.get(1, [g1, g2, g3]))
                .fold(f64::INFINITY, f64::min)
        });
        StrategySet::argmax(values, tolerance)
    };
    let reactions = |g1: Strategy| {
        let g2 = apply_tie_breaks(second_set(g1));
        let g3 = apply_tie_breaks(third_set(g1, g2));
        [g1, g2, g3]
    };
    let leader_values = Strategy::ALL.map(|g1| tensor.get(0, reactions(g1)));
    let g1 = apply_tie_breaks(StrategySet::argmax(leader_values, tolerance));
    GameSolution {
        strategies: reactions(g1),
        leader_payoff: leader_values[g1.index()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameParams {
    /// The lane-change distance is this multiple of the vehicle diagonal.
    pub suf_multiple: f64,
    /// Payoff for strategies that leave the carriageway, m.
    pub sentinel: f64,
    /// Disposition the decision maker attributes to its followers.
    pub attributed_q: f64,
    /// Payoffs within this many metres of the best count as tied.
    pub indifference: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            suf_multiple: 5.0,
            sentinel: -1.0e6,
            attributed_q: 0.5,
            indifference: 2.0,
        }
    }
}

impl GameParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.suf_multiple >= 0.0) {
            return Err("game.suf_multiple must be non-negative".into());
        }
        if !(self.sentinel.is_finite() && self.sentinel < -1.0e3) {
            return Err("game.sentinel must be a large finite negative number".into());
        }
        if !(0.0..=1.0).contains(&self.attributed_q) {
            return Err("game.attributed_q must lie in [0, 1]".into());
        }
        if !(self.indifference >= 0.0) {
            return Err("game.indifference must be non-negative".into());
        }
        Ok(())
    }
}

/// Headway payoff: the gap ahead, capped at the driver's scaled
/// visibility. `None` means no leader within visibility.
pub fn headway_utility(gap: Option<f64>, visibility: f64, visibility_scale: f64) -> f64 {
    let cap = visibility_scale * visibility;
    match gap {
        Some(d) => d.min(cap),
        None => cap,
    }
}

/// Lane-change payoff against the competing vehicle in the target lane:
/// gap, less the closing over the prediction time and the distance the
/// manoeuvre needs. `closing_speed` is positive when the gap shrinks.
pub fn lane_change_utility(
    gap: f64,
    closing_speed: f64,
    prediction_time: f64,
    suf_distance: f64,
) -> f64 {
    gap - closing_speed * prediction_time - suf_distance
}

/// The lane-change term as it enters the total payoff: only a shortfall
/// counts; a comfortable or absent competitor contributes nothing.
pub fn lane_change_penalty(
    competitor: Option<(f64, f64)>,
    prediction_time: f64,
    suf_distance: f64,
) -> f64 {
    match competitor {
        Some((gap, closing)) => {
            lane_change_utility(gap, closing, prediction_time, suf_distance).min(0.0)
        }
        None => 0.0,
    }
}

/// A game participant as seen by the decision maker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Player {
    pub id: usize,
    pub lane: Lane,
    /// Along-road offset from the decision maker.
    pub offset: f64,
    pub speed: f64,
    pub disposition: DriverDisposition,
}

/// A perceived vehicle that does not play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bystander {
    pub id: usize,
    pub lanes: [bool; 3],
    pub offset: f64,
    pub speed: f64,
}

/// Everything needed to fill a payoff tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSetup {
    /// One to three players, P1 first.
    pub players: Vec<Player>,
    pub bystanders: Vec<Bystander>,
    pub visibility: f64,
    pub suf_distance: f64,
    pub sentinel: f64,
}

impl GameSetup {
    /// Roles from the decision maker's view: the adjacent-lane followers,
    /// nearest first, become P2 and P3; everyone else is a bystander.
    pub fn from_view(
        ego_id: usize,
        ego_lane: Lane,
        view: &NeighborView,
        ego: DriverDisposition,
        attributed: DriverDisposition,
        suf_distance: f64,
        sentinel: f64,
    ) -> Self {
        let mut players = vec![Player {
            id: ego_id,
            lane: ego_lane,
            offset: 0.0,
            speed: view.ego_speed,
            disposition: ego,
        }];
        let mut followers: Vec<(Lane, Observed)> = [ego_lane.left(), ego_lane.right()]
            .into_iter()
            .flatten()
            .filter_map(|l| view.lane(l).follower.map(|o| (l, o)))
            .collect();
        followers.sort_by(|a, b| {
            a.1.distance()
                .total_cmp(&b.1.distance())
                .then(a.0.cmp(&b.0))
        });
        for (lane, o) in followers {
            if players.iter().any(|p| p.id == o.id) {
                continue;
            }
            players.push(Player {
                id: o.id,
                lane,
                offset: o.offset,
                speed: o.speed,
                disposition: attributed,
            });
        }

        let mut bystanders: Vec<Bystander> = Vec::new();
        for (lane, o) in view.entries() {
            if players.iter().any(|p| p.id == o.id) {
                continue;
            }
            match bystanders.iter_mut().find(|b| b.id == o.id) {
                Some(b) => b.lanes[lane.index()] = true,
                None => {
                    let mut lanes = [false; 3];
                    lanes[lane.index()] = true;
                    bystanders.push(Bystander {
                        id: o.id,
                        lanes,
                        offset: o.offset,
                        speed: o.speed,
                    });
                }
            }
        }
        Self {
            players,
            bystanders,
            visibility: view.visibility,
            suf_distance,
            sentinel,
        }
    }

    /// Payoff of player `p` once every player has moved to `lanes`.
    fn utility(&self, lanes: &[Option<Lane>], p: usize) -> f64 {
        let me = &self.players[p];
        let Some(lane) = lanes[p] else {
            return self.sentinel;
        };
        // headway after everyone has moved
        let mut ahead: Option<f64> = None;
        // competitor: whoever is behind in the target lane right now
        let mut behind: Option<(f64, f64)> = None;
        let mut consider = |offset: f64, speed: f64, now: bool, after: bool| {
            let rel = offset - me.offset;
            if rel >= 0.0 {
                if after && ahead.is_none_or(|a| rel < a) {
                    ahead = Some(rel);
                }
            } else if now && behind.is_none_or(|(g, _)| -rel < g) {
                behind = Some((-rel, speed - me.speed));
            }
        };
        for (q, other) in self.players.iter().enumerate() {
            if q != p {
                let after = lanes[q].unwrap_or(other.lane) == lane;
                consider(other.offset, other.speed, other.lane == lane, after);
            }
        }
        for b in &self.bystanders {
            if b.lanes[lane.index()] {
                consider(b.offset, b.speed, true, true);
            }
        }
        let d = &me.disposition;
        let head = headway_utility(ahead, self.visibility, d.visibility_scale);
        if lane == me.lane {
            head
        } else {
            head + lane_change_penalty(behind, d.prediction_time, self.suf_distance)
        }
    }
}

/// Fill every player's payoff over the 27 joint strategies. Missing
/// players get constant zero payoffs and their moves are ignored.
pub fn build_payoff_tensor(setup: &GameSetup) -> PayoffTensor {
    let mut tensor = PayoffTensor::zeros();
    let n = setup.players.len();
    for g1 in Strategy::ALL {
        for g2 in Strategy::ALL {
            for g3 in Strategy::ALL {
                let profile = [g1, g2, g3];
                let lanes: Vec<Option<Lane>> = setup
                    .players
                    .iter()
                    .zip(profile)
                    .map(|(pl, s)| s.apply(pl.lane))
                    .collect();
                for p in 0..n {
                    tensor.set(p, profile, setup.utility(&lanes, p));
                }
            }
        }
    }
    tensor
}

/// Payoff of a single driver playing `strategy` with nobody else moving.
pub fn total_utility(
    strategy: Strategy,
    lane: Lane,
    view: &NeighborView,
    disposition: DriverDisposition,
    suf_distance: f64,
    sentinel: f64,
) -> f64 {
    let mut setup = GameSetup::from_view(
        usize::MAX,
        lane,
        view,
        disposition,
        disposition,
        suf_distance,
        sentinel,
    );
    // followers become bystanders so they do not move
    let followers: Vec<Player> = setup.players.drain(1..).collect();
    for f in followers {
        let mut lanes = [false; 3];
        lanes[f.lane.index()] = true;
        setup.bystanders.push(Bystander {
            id: f.id,
            lanes,
            offset: f.offset,
            speed: f.speed,
        });
    }
    let lanes = [strategy.apply(lane)];
    setup.utility(&lanes, 0)
}
