//! Each driver's subjective picture of the road: per-lane leaders and
//! followers within visibility, disposition-dependent recognition of
//! lane intrusions, and perception noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::collision::OrientedRect;
use crate::vehicle_dynamics::VehicleState;

pub const LANE_COUNT: usize = 3;

/// Lane number, 1 (leftmost, x = 0) to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Lane(u8);

impl Lane {
    pub const ALL: [Lane; LANE_COUNT] = [Lane(1), Lane(2), Lane(3)];

    pub fn new(n: u8) -> Option<Self> {
        (1..=LANE_COUNT as u8).contains(&n).then_some(Self(n))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// Lane one step toward lane 1.
    pub fn left(self) -> Option<Self> {
        Self::new(self.0.wrapping_sub(1))
    }

    /// Lane one step toward lane 3.
    pub fn right(self) -> Option<Self> {
        Self::new(self.0 + 1)
    }
}

impl TryFrom<u8> for Lane {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        Lane::new(n).ok_or_else(|| format!("lane must be 1..=3, got {n}"))
    }
}

impl From<Lane> for u8 {
    fn from(l: Lane) -> u8 {
        l.0
    }
}

impl std::fmt::Display for Lane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneGeometry {
    pub lane_width: f64,
    /// Lateral coordinate of lane 1's centre.
    pub first_center: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        Self {
            lane_width: 3.3,
            first_center: 0.0,
        }
    }
}

impl LaneGeometry {
    pub fn center(&self, lane: Lane) -> f64 {
        self.first_center + lane.index() as f64 * self.lane_width
    }

    pub fn bounds(&self, lane: Lane) -> (f64, f64) {
        let c = self.center(lane);
        (c - self.lane_width / 2.0, c + self.lane_width / 2.0)
    }

    /// Lane whose half-open band `[lo, hi)` contains `x`.
    pub fn lane_at(&self, x: f64) -> Option<Lane> {
        let k = ((x - self.first_center) / self.lane_width + 0.5).floor();
        if k < 0.0 || k >= LANE_COUNT as f64 {
            return None;
        }
        Lane::new(k as u8 + 1)
    }

    /// Nearest lane, clamping positions off the carriageway.
    pub fn nearest_lane(&self, x: f64) -> Lane {
        let k = ((x - self.first_center) / self.lane_width).round();
        Lane::new(k.clamp(0.0, (LANE_COUNT - 1) as f64) as u8 + 1).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Distance noise scale at the visibility limit, m.
    pub sigma0: f64,
    /// Growth of noise with q.
    pub kappa: f64,
    /// Speed noise scale at the visibility limit, m/s.
    pub speed_sigma0: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma0: 0.5,
            kappa: 1.0,
            speed_sigma0: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionParams {
    /// Visibility distance d_v for a normal driver, m.
    pub visibility: f64,
    /// Magnification of the intrusion rectangle is `1 + gain * (1 - q)`.
    pub magnification_gain: f64,
    pub noise: NoiseParams,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            visibility: 100.0,
            magnification_gain: 0.2,
            noise: NoiseParams::default(),
        }
    }
}

impl PerceptionParams {
    pub fn magnification(&self, q: f64) -> f64 {
        1.0 + self.magnification_gain * (1.0 - q)
    }
}

/// What the perception layer needs to know about any vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub id: usize,
    pub state: VehicleState,
    pub length: f64,
    pub width: f64,
}

impl Snapshot {
    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(
            [self.state.x, self.state.y],
            self.state.heading,
            self.length,
            self.width,
        )
    }

    /// Along-road speed.
    pub fn road_speed(&self) -> f64 {
        self.state.global_velocity().1
    }
}

/// One perceived neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub id: usize,
    /// Signed along-road offset (other - ego): positive ahead.
    pub offset: f64,
    /// The neighbour's along-road speed.
    pub speed: f64,
}

impl Observed {
    pub fn distance(&self) -> f64 {
        self.offset.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneNeighbors {
    pub leader: Option<Observed>,
    pub follower: Option<Observed>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborView {
    /// Indexed by `Lane::index`.
    pub lanes: [LaneNeighbors; LANE_COUNT],
    pub visibility: f64,
    /// Ego along-road speed at perception time.
    pub ego_speed: f64,
}

impl NeighborView {
    pub fn empty(visibility: f64, ego_speed: f64) -> Self {
        Self {
            lanes: [LaneNeighbors::default(); LANE_COUNT],
            visibility,
            ego_speed,
        }
    }

    pub fn lane(&self, lane: Lane) -> &LaneNeighbors {
        &self.lanes[lane.index()]
    }

    pub fn entries(&self) -> impl Iterator<Item = (Lane, &Observed)> {
        Lane::ALL.into_iter().flat_map(move |l| {
            let n = &self.lanes[l.index()];
            n.leader
                .iter()
                .chain(n.follower.iter())
                .map(move |o| (l, o))
        })
    }
}

/// Point used to judge whether a vehicle has entered a lane. `toward` is
/// a reference point in that lane; q = 0 gives the front corner nearest
/// to it, q = 1 the rectangle centre, linear in between.
pub fn recognition_point(rect: &OrientedRect, q: f64, toward: [f64; 2]) -> [f64; 2] {
    let corners = rect.corners();
    let d2 = |p: [f64; 2]| (p[0] - toward[0]).powi(2) + (p[1] - toward[1]).powi(2);
    let corner = if d2(corners[0]) <= d2(corners[1]) {
        corners[0]
    } else {
        corners[1]
    };
    [
        corner[0] + q * (rect.center[0] - corner[0]),
        corner[1] + q * (rect.center[1] - corner[1]),
    ]
}

/// Lanes an observer with disposition `q` sees `other` occupying: the
/// lane of its centre, plus any lane its recognition point has entered.
pub fn perceived_lanes(
    other: &OrientedRect,
    q: f64,
    lanes: &LaneGeometry,
    params: &PerceptionParams,
) -> [bool; LANE_COUNT] {
    let mut occupied = [false; LANE_COUNT];
    if let Some(home) = lanes.lane_at(other.center[0]) {
        occupied[home.index()] = true;
    }
    let magnified = other.scaled(params.magnification(q));
    for lane in Lane::ALL {
        if occupied[lane.index()] {
            continue;
        }
        let p = recognition_point(&magnified, q, [lanes.center(lane), other.center[1]]);
        let (lo, hi) = lanes.bounds(lane);
        occupied[lane.index()] = p[0] > lo && p[0] < hi;
    }
    occupied
}

/// Nearest leader and follower per lane within `visibility`.
pub fn classify_neighbors(
    ego: &Snapshot,
    others: &[Snapshot],
    lanes: &LaneGeometry,
    visibility: f64,
    q: f64,
    params: &PerceptionParams,
) -> NeighborView {
    let mut view = NeighborView::empty(visibility, ego.road_speed());
    for other in others.iter().filter(|o| o.id != ego.id) {
        let offset = other.state.y - ego.state.y;
        if offset.abs() > visibility {
            continue;
        }
        let seen = Observed {
            id: other.id,
            offset,
            speed: other.road_speed(),
        };
        let occupied = perceived_lanes(&other.rect(), q, lanes, params);
        for lane in Lane::ALL.into_iter().filter(|l| occupied[l.index()]) {
            let slot = &mut view.lanes[lane.index()];
            let entry = if offset >= 0.0 {
                &mut slot.leader
            } else {
                &mut slot.follower
            };
            let closer = match entry {
                Some(prev) => seen.distance() < prev.distance(),
                None => true,
            };
            if closer {
                *entry = Some(seen);
            }
        }
    }
    view
}

/// Perturb every perceived distance and speed with zero-mean Gaussian
/// noise whose scale grows with distance and with q.
pub fn perceive_with_noise<R: Rng + ?Sized>(
    view: &NeighborView,
    q: f64,
    noise: &NoiseParams,
    rng: &mut R,
) -> NeighborView {
    let mut out = view.clone();
    let growth = 1.0 + noise.kappa * q;
    for slot in out.lanes.iter_mut() {
        for entry in [&mut slot.leader, &mut slot.follower] {
            if let Some(o) = entry.as_mut() {
                let share = o.distance() / view.visibility;
                let e_d: f64 = StandardNormal.sample(rng);
                let e_v: f64 = StandardNormal.sample(rng);
                let d = (o.distance() + noise.sigma0 * growth * share * e_d)
                    .clamp(0.0, view.visibility);
                o.offset = if o.offset >= 0.0 { d } else { -d };
                o.speed += noise.speed_sigma0 * growth * share * e_v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn car(id: usize, x: f64, y: f64, v: f64) -> Snapshot {
        Snapshot {
            id,
            state: VehicleState::straight(x, y, v),
            length: 4.5,
            width: 1.8,
        }
    }

    #[test]
    fn lane_arithmetic() {
        let g = LaneGeometry::default();
        assert_eq!(g.center(Lane::new(3).unwrap()), 6.6);
        assert_eq!(g.lane_at(3.3), Lane::new(2));
        assert_eq!(g.lane_at(-2.0), None);
        assert_eq!(g.nearest_lane(-2.0), Lane::new(1).unwrap());
        assert_eq!(Lane::new(1).unwrap().left(), None);
        assert_eq!(Lane::new(2).unwrap().left(), Lane::new(1));
        assert_eq!(Lane::new(3).unwrap().right(), None);
        assert!(Lane::new(0).is_none() && Lane::new(4).is_none());
    }

    #[test]
    fn empty_road_gives_empty_view() {
        let ego = car(0, 3.3, 0.0, 27.8);
        let v = classify_neighbors(
            &ego,
            &[ego],
            &LaneGeometry::default(),
            100.0,
            0.5,
            &PerceptionParams::default(),
        );
        assert_eq!(v.entries().count(), 0);
    }

    #[test]
    fn table_one_layout() {
        let ego = car(0, 3.3, 0.0, 27.8);
        let other = car(1, 6.6, -50.0, 36.1);
        let v = classify_neighbors(
            &ego,
            &[ego, other],
            &LaneGeometry::default(),
            100.0,
            0.5,
            &PerceptionParams::default(),
        );
        let l3 = v.lane(Lane::new(3).unwrap());
        assert_eq!(l3.follower.unwrap().distance(), 50.0);
        assert!(l3.leader.is_none());
        assert_eq!(v.entries().count(), 1);
    }

    #[test]
    fn beyond_visibility_is_ignored() {
        let ego = car(0, 3.3, 0.0, 27.8);
        let far = car(1, 3.3, 100.5, 27.8);
        let v = classify_neighbors(
            &ego,
            &[far],
            &LaneGeometry::default(),
            100.0,
            0.5,
            &PerceptionParams::default(),
        );
        assert_eq!(v.entries().count(), 0);
    }

    fn front_corner_test_rect() -> OrientedRect {
        OrientedRect::new([3.3, 10.0], std::f64::consts::FRAC_PI_2, 4.5, 1.8)
    }

    #[test]
    fn recognition_point_endpoints() {
        let r = front_corner_test_rect();
        let toward = [6.6, 10.0];
        // heading +y: the front corner on the +x side is front-right
        let corner = r.corners()[1];
        assert_eq!(recognition_point(&r, 0.0, toward), corner);
        assert_eq!(recognition_point(&r, 1.0, toward), r.center);
        let mid = recognition_point(&r, 0.5, toward);
        assert!((mid[0] - (corner[0] + r.center[0]) / 2.0).abs() < 1e-12);
        assert!((mid[1] - (corner[1] + r.center[1]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cautious_observer_sees_intrusion_first() {
        let g = LaneGeometry::default();
        let p = PerceptionParams::default();
        // centre still in lane 2 but drifting toward lane 3
        let r = OrientedRect::new([4.3, 0.0], std::f64::consts::FRAC_PI_2, 4.5, 1.8);
        let cautious = perceived_lanes(&r, 0.0, &g, &p);
        let aggressive = perceived_lanes(&r, 1.0, &g, &p);
        assert_eq!(cautious, [false, true, true]);
        assert_eq!(aggressive, [false, true, false]);
    }

    #[test]
    fn lane_centred_vehicle_occupies_one_lane() {
        let g = LaneGeometry::default();
        let p = PerceptionParams::default();
        let r = OrientedRect::new([3.3, 0.0], std::f64::consts::FRAC_PI_2, 4.5, 1.8);
        assert_eq!(perceived_lanes(&r, 0.0, &g, &p), [false, true, false]);
    }

    fn sample_view() -> NeighborView {
        let mut v = NeighborView::empty(100.0, 30.0);
        v.lanes[0].leader = Some(Observed {
            id: 1,
            offset: 40.0,
            speed: 28.0,
        });
        v.lanes[2].follower = Some(Observed {
            id: 2,
            offset: -60.0,
            speed: 33.0,
        });
        v
    }

    #[test]
    fn zero_noise_is_identity() {
        let noise = NoiseParams {
            sigma0: 0.0,
            kappa: 1.0,
            speed_sigma0: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            perceive_with_noise(&sample_view(), 0.7, &noise, &mut rng),
            sample_view()
        );
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let noise = NoiseParams::default();
        let a = perceive_with_noise(
            &sample_view(),
            0.7,
            &noise,
            &mut ChaCha8Rng::seed_from_u64(11),
        );
        let b = perceive_with_noise(
            &sample_view(),
            0.7,
            &noise,
            &mut ChaCha8Rng::seed_from_u64(11),
        );
        assert_eq!(a, b);
        assert!(a.lanes[0].leader.unwrap().offset > 0.0);
        assert!(a.lanes[2].follower.unwrap().offset < 0.0);
    }

    #[test]
    fn noise_statistics() {
        let noise = NoiseParams::default();
        let q = 0.6;
        let view = sample_view();
        let truth = 40.0;
        let sigma = noise.sigma0 * (1.0 + noise.kappa * q) * truth / 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                perceive_with_noise(&view, q, &noise, &mut rng).lanes[0]
                    .leader
                    .unwrap()
                    .offset
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - truth).abs() < 3.0 * sigma / (n as f64).sqrt());
        assert!((var.sqrt() - sigma).abs() / sigma < 0.05);
    }
}
