//! Scenario configuration: TOML schema, defaults, validation and
//! line-level diagnostics.

use serde::{Deserialize, Serialize};

use crate::driver_control::{ControlGains, DispositionModel};
use crate::game::GameParams;
use crate::perception::{LaneGeometry, PerceptionParams};
use crate::vehicle_dynamics::VehicleParams;

/// The Table 1 layout shipped with the crate.
pub const TABLE1_TOML: &str = include_str!("../scenarios/table1.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityUnit {
    Kmh,
    Mps,
}

impl VelocityUnit {
    pub fn to_mps(self, v: f64) -> f64 {
        match self {
            VelocityUnit::Kmh => v / 3.6,
            VelocityUnit::Mps => v,
        }
    }

    pub fn from_mps(self, v: f64) -> f64 {
        match self {
            VelocityUnit::Kmh => v * 3.6,
            VelocityUnit::Mps => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub duration: f64,
    /// Interval between game replays, s.
    pub decision_interval: f64,
    pub seed: u64,
    /// Unit of every speed given in the vehicle table.
    pub velocity_unit: VelocityUnit,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 20.0,
            decision_interval: 0.5,
            seed: 1,
            velocity_unit: VelocityUnit::Kmh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyParams {
    /// Exponent scale applied to the composite gap, 1/m.
    pub scale: f64,
    /// An excursion starts above this index.
    pub near_threshold: f64,
    /// and ends below this one.
    pub release_threshold: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            near_threshold: 0.5,
            release_threshold: 0.4,
        }
    }
}

/// Parameters of the 200 m section simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionParams {
    pub length: f64,
    /// Nominal speed, in the configured velocity unit.
    pub nominal_speed: f64,
    /// Desired speed is nominal times `1 + spread_base + spread_slope * q`
    /// plus uniform jitter of this relative half-width.
    pub desired_spread_base: f64,
    pub desired_spread_slope: f64,
    pub desired_jitter: f64,
    /// Minimum centre distance to the nearest vehicle in the entry lane, m.
    pub entry_clearance: f64,
    /// Diagnosed aggressiveness of the attentive and inattentive populations.
    pub attentive_q: f64,
    pub inattentive_q: f64,
}

impl Default for SectionParams {
    fn default() -> Self {
        Self {
            length: 200.0,
            nominal_speed: 100.0,
            desired_spread_base: 0.0,
            desired_spread_slope: 0.0,
            desired_jitter: 0.05,
            entry_clearance: 25.0,
            attentive_q: 0.25,
            inattentive_q: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Decision,
    Prop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: usize,
    pub kind: VehicleKind,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Defaults to the initial speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_speed: Option<f64>,
    #[serde(default = "half")]
    pub q: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimParams,
    pub road: LaneGeometry,
    pub dynamics: VehicleParams,
    pub disposition: DispositionModel,
    pub control: ControlGains,
    pub perception: PerceptionParams,
    pub game: GameParams,
    pub safety: SafetyParams,
    pub section: SectionParams,
    #[serde(rename = "vehicle")]
    pub vehicles: Vec<VehicleSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub message: String,
    /// 1-based line of the offending entry, when known.
    pub line: Option<usize>,
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

/// Line of the `n`-th `[[vehicle]]` header, 0-based `n`.
fn vehicle_line(text: &str, n: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("[[vehicle]]"))
        .nth(n)
        .map(|(i, _)| i + 1)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError {
            message: e.message().to_string(),
            line: e.span().map(|s| line_of(text, s.start)),
        })?;
        config.validate().map_err(|(idx, message)| ConfigError {
            message,
            line: idx.and_then(|n| vehicle_line(text, n)),
        })?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The shipped Table 1 scenario.
    pub fn table1() -> Self {
        Self::from_toml_str(TABLE1_TOML).expect("shipped fixture is valid")
    }

    pub fn speed_mps(&self, v: f64) -> f64 {
        self.sim.velocity_unit.to_mps(v)
    }

    pub fn vehicle(&self, id: usize) -> Option<&VehicleSpec> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn vehicle_mut(&mut self, id: usize) -> Option<&mut VehicleSpec> {
        self.vehicles.iter_mut().find(|v| v.id == id)
    }

    /// Errors carry the index of the offending vehicle when there is one.
    pub fn validate(&self) -> Result<(), (Option<usize>, String)> {
        let global = |r: Result<(), String>| r.map_err(|m| (None, m));
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err((None, "sim.dt must be positive".into()));
        }
        if !(s.duration >= 0.0 && s.duration.is_finite()) {
            return Err((None, "sim.duration must be non-negative".into()));
        }
        if !(s.decision_interval >= s.dt) {
            return Err((None, "sim.decision_interval must be at least sim.dt".into()));
        }
        if !(self.road.lane_width > 0.0 && self.road.first_center.is_finite()) {
            return Err((None, "road.lane_width must be positive".into()));
        }
        global(self.dynamics.validate())?;
        global(self.disposition.validate())?;
        global(self.control.validate())?;
        global(self.game.validate())?;
        let p = &self.perception;
        if !(p.visibility > 0.0 && p.magnification_gain >= 0.0) {
            return Err((None, "perception.visibility must be positive".into()));
        }
        if !(p.noise.sigma0 >= 0.0 && p.noise.kappa >= 0.0 && p.noise.speed_sigma0 >= 0.0) {
            return Err((None, "perception.noise scales must be non-negative".into()));
        }
        let f = &self.safety;
        if !(f.scale > 0.0 && f.release_threshold <= f.near_threshold && f.near_threshold < 1.0) {
            return Err((
                None,
                "safety thresholds need 0 < release <= near < 1 and a positive scale".into(),
            ));
        }
        let sec = &self.section;
        if !(sec.length > 0.0 && sec.nominal_speed > 0.0 && sec.entry_clearance >= 0.0) {
            return Err((
                None,
                "section length, nominal_speed and clearance must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&sec.attentive_q) || !(0.0..=1.0).contains(&sec.inattentive_q) {
            return Err((
                None,
                "section population q values must lie in [0, 1]".into(),
            ));
        }

        let (lo, hi) = (
            self.road.bounds(crate::perception::Lane::ALL[0]).0,
            self.road.bounds(crate::perception::Lane::ALL[2]).1,
        );
        for (i, v) in self.vehicles.iter().enumerate() {
            let bad = |m: String| Err((Some(i), m));
            if self.vehicles[..i].iter().any(|u| u.id == v.id) {
                return bad(format!("duplicate vehicle id {}", v.id));
            }
            if !(v.x > lo && v.x < hi) || !v.y.is_finite() {
                return bad(format!("vehicle {} starts off the carriageway", v.id));
            }
            if !(v.speed > 0.0 && v.speed.is_finite()) {
                return bad(format!("vehicle {} needs a positive speed", v.id));
            }
            if v.desired_speed.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
                return bad(format!("vehicle {} needs a positive desired_speed", v.id));
            }
            if !(0.0..=1.0).contains(&v.q) {
                return bad(format!("vehicle {} has q outside [0, 1]", v.id));
            }
            let rect = self.initial_rect(v);
            if let Some(u) = self.vehicles[..i]
                .iter()
                .find(|u| crate::collision::overlaps(&self.initial_rect(u), &rect))
            {
                return bad(format!(
                    "vehicle {} overlaps vehicle {} at start",
                    v.id, u.id
                ));
            }
        }
        Ok(())
    }

    fn initial_rect(&self, v: &VehicleSpec) -> crate::collision::OrientedRect {
        crate::collision::OrientedRect::new(
            [v.x, v.y],
            std::f64::consts::FRAC_PI_2,
            self.dynamics.length,
            self.dynamics.width,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            ScenarioConfig::from_toml_str("").unwrap(),
            ScenarioConfig::default()
        );
    }

    #[test]
    fn table1_fixture() {
        let c = ScenarioConfig::table1();
        let v1 = c.vehicle(1).unwrap();
        let v2 = c.vehicle(2).unwrap();
        assert_eq!((v1.x, v1.y), (3.3, 0.0));
        assert_eq!((v2.x, v2.y), (6.6, -50.0));
        assert_eq!(
            c.vehicles
                .iter()
                .filter(|v| v.kind == VehicleKind::Decision)
                .count(),
            2
        );
    }

    #[test]
    fn round_trip() {
        let c = ScenarioConfig::table1();
        let text = c.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = ScenarioConfig::from_toml_str("[sim]\ndt = 0.01\ndtt = 0.02\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("dtt"));
    }

    #[test]
    fn overlap_is_reported_on_vehicle_line() {
        let text = "\
[[vehicle]]
id = 1
kind = \"decision\"
x = 3.3
y = 0.0
speed = 100.0

[[vehicle]]
id = 2
kind = \"prop\"
x = 3.3
y = 2.0
speed = 100.0
";
        let err = ScenarioConfig::from_toml_str(text).unwrap_err();
        assert_eq!(err.line, Some(8));
        assert!(err.message.contains("overlaps"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("[sim]\ndt = -1.0\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[sim]\nvelocity_unit = \"furlong\"\n").is_err());
        let e = ScenarioConfig::from_toml_str(
            "[[vehicle]]\nid = 1\nkind = \"prop\"\nx = 3.3\ny = 0.0\nspeed = 10.0\nq = 2.0\n",
        )
        .unwrap_err();
        assert_eq!(e.line, Some(1));
    }
}
