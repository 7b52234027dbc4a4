//! Planar two-wheel (bicycle) vehicle model.
//!
//! The lateral channel is the linear single-track model in body-frame
//! velocities; the longitudinal channel integrates the commanded
//! acceleration directly. Positions are global: `x` is the lateral road
//! coordinate, `y` the along-road coordinate, and straight travel has
//! heading `pi / 2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this longitudinal speed the lateral model is frozen.
pub const V_MIN_FLOOR: f64 = 0.5;

pub const GRAVITY: f64 = 9.81;

/// Degrees per radian, as used by the lateral acceleration gain.
pub const DEG_PER_RAD: f64 = 57.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("longitudinal speed {v_long} m/s is at or below the {floor} m/s floor")]
    LowSpeed { v_long: f64, floor: f64 },
    #[error("non-finite vehicle state after integration: {0:?}")]
    NonFinite(VehicleState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg m^2
    pub yaw_inertia: f64,
    /// Front axle to centre of mass, m.
    pub lf: f64,
    /// Rear axle to centre of mass, m.
    pub lr: f64,
    /// Front cornering stiffness, N/rad.
    pub cf: f64,
    /// Rear cornering stiffness, N/rad.
    pub cr: f64,
    /// Physical acceleration/deceleration limit, m/s^2.
    pub accel_limit: f64,
    /// Physical steering limit, rad.
    pub steer_limit: f64,
    pub width: f64,
    pub length: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            lf: 1.2,
            lr: 1.5,
            cf: 80_000.0,
            cr: 80_000.0,
            accel_limit: 8.0,
            steer_limit: 0.5,
            width: 1.8,
            length: 4.5,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Understeer gradient in deg/g, derived from the axle loads and
    /// cornering stiffnesses.
    pub fn understeer_gradient(&self) -> f64 {
        let load_f = self.mass * self.lr / self.wheelbase();
        let load_r = self.mass * self.lf / self.wheelbase();
        // rad per (m/s^2) -> deg per g
        (load_f / self.cf - load_r / self.cr) * DEG_PER_RAD * GRAVITY
    }

    pub fn diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("cf", self.cf),
            ("cr", self.cr),
            ("accel_limit", self.accel_limit),
            ("width", self.width),
            ("length", self.length),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!(
                    "vehicle.{name} must be positive and finite, got {v}"
                ));
            }
        }
        if !(self.steer_limit > 0.0 && self.steer_limit < std::f64::consts::FRAC_PI_2) {
            return Err(format!(
                "vehicle.steer_limit must lie in (0, pi/2), got {}",
                self.steer_limit
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v_long: f64,
    pub v_lat: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    /// A vehicle travelling straight along +y.
    pub fn straight(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: std::f64::consts::FRAC_PI_2,
            v_long: speed,
            v_lat: 0.0,
            yaw_rate: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x,
            self.y,
            self.heading,
            self.v_long,
            self.v_lat,
            self.yaw_rate,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Global-frame velocity (dx/dt, dy/dt).
    pub fn global_velocity(&self) -> (f64, f64) {
        let (dx, dy, _) = pose_derivatives(self);
        (dx, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// m/s^2
    pub accel: f64,
    /// rad, positive turns left
    pub steer: f64,
}

impl ControlInput {
    pub fn clamped(self, params: &VehicleParams) -> Self {
        Self {
            accel: self.accel.clamp(-params.accel_limit, params.accel_limit),
            steer: self.steer.clamp(-params.steer_limit, params.steer_limit),
        }
    }
}

/// State matrix of the lateral model at a given longitudinal speed,
/// acting on `[v_lat, yaw_rate]`.
pub fn lateral_matrix(params: &VehicleParams, v_long: f64) -> [[f64; 2]; 2] {
    let VehicleParams {
        mass: m,
        yaw_inertia: iz,
        lf,
        lr,
        cf,
        cr,
        ..
    } = *params;
    [
        [
            -(cf + cr) / (m * v_long),
            (-lf * cf + lr * cr) / (m * v_long) - v_long,
        ],
        [
            (-lf * cf + lr * cr) / (iz * v_long),
            -(lf * lf * cf + lr * lr * cr) / (iz * v_long),
        ],
    ]
}

/// Input vector of the lateral model, multiplying the steering angle.
pub fn lateral_input(params: &VehicleParams) -> [f64; 2] {
    [
        params.cf / params.mass,
        params.lf * params.cf / params.yaw_inertia,
    ]
}

/// Right-hand side of the lateral model: `(dv_lat/dt, dr/dt)`.
pub fn lateral_derivatives(
    state: &VehicleState,
    params: &VehicleParams,
    steer: f64,
) -> Result<(f64, f64), DynamicsError> {
    if state.v_long <= V_MIN_FLOOR {
        return Err(DynamicsError::LowSpeed {
            v_long: state.v_long,
            floor: V_MIN_FLOOR,
        });
    }
    Ok(lateral_rhs(state, params, steer))
}

fn lateral_rhs(state: &VehicleState, params: &VehicleParams, steer: f64) -> (f64, f64) {
    let a = lateral_matrix(params, state.v_long);
    let b = lateral_input(params);
    (
        a[0][0] * state.v_lat + a[0][1] * state.yaw_rate + b[0] * steer,
        a[1][0] * state.v_lat + a[1][1] * state.yaw_rate + b[1] * steer,
    )
}

/// Planar kinematics: `(dx/dt, dy/dt, dtheta/dt)`.
pub fn pose_derivatives(state: &VehicleState) -> (f64, f64, f64) {
    let (s, c) = state.heading.sin_cos();
    (
        state.v_long * c - state.v_lat * s,
        state.v_long * s + state.v_lat * c,
        state.yaw_rate,
    )
}

/// Steady-state yaw rate of the linear model under constant steer.
pub fn steady_state_yaw_rate(params: &VehicleParams, v_long: f64, steer: f64) -> f64 {
    let k_rad = params.understeer_gradient() / (DEG_PER_RAD * GRAVITY);
    v_long * steer / (params.wheelbase() + k_rad * v_long * v_long)
}

type Deriv = [f64; 6];

fn derivative(
    state: &VehicleState,
    params: &VehicleParams,
    input: &ControlInput,
    frozen: bool,
) -> Deriv {
    let (dx, dy, dth) = pose_derivatives(state);
    let (dvl, dr) = if frozen {
        (0.0, 0.0)
    } else {
        let mut s = *state;
        s.v_long = s.v_long.max(V_MIN_FLOOR);
        lateral_rhs(&s, params, input.steer)
    };
    [dx, dy, dth, input.accel, dvl, dr]
}

fn offset(state: &VehicleState, k: &Deriv, h: f64) -> VehicleState {
    VehicleState {
        x: state.x + h * k[0],
        y: state.y + h * k[1],
        heading: state.heading + h * k[2],
        v_long: state.v_long + h * k[3],
        v_lat: state.v_lat + h * k[4],
        yaw_rate: state.yaw_rate + h * k[5],
    }
}

/// Advance one fixed RK4 step. The input is clamped to the physical
/// limits first; longitudinal speed never goes negative.
pub fn step(
    state: &VehicleState,
    params: &VehicleParams,
    input: ControlInput,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    let input = input.clamped(params);
    let frozen = state.v_long <= V_MIN_FLOOR;
    let mut start = *state;
    if frozen {
        start.v_lat = 0.0;
        start.yaw_rate = 0.0;
    }
    let k1 = derivative(&start, params, &input, frozen);
    let k2 = derivative(&offset(&start, &k1, dt / 2.0), params, &input, frozen);
    let k3 = derivative(&offset(&start, &k2, dt / 2.0), params, &input, frozen);
    let k4 = derivative(&offset(&start, &k3, dt), params, &input, frozen);
    let mut combined = [0.0; 6];
    for i in 0..6 {
        combined[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    let mut next = offset(&start, &combined, dt);
    if next.v_long < 0.0 {
        next.v_long = 0.0;
    }
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite(next));
    }
    Ok(next)
}
