//! Open- and closed-loop measurements on the vehicle model.
#![allow(dead_code)]

use stackdrive::driver_control::{
    longitudinal_command, steering_command, ControlGains, DispositionModel, ErrorRate,
    LongitudinalErrors,
};
use stackdrive::vehicle_dynamics::{
    steady_state_yaw_rate, step, ControlInput, VehicleParams, VehicleState,
};

pub const SMOOTH: ControlInput = ControlInput {
    accel: 0.4,
    steer: 0.02,
};

pub fn integrate(dt: f64, horizon: f64, input: ControlInput) -> VehicleState {
    let p = VehicleParams::default();
    let mut s = VehicleState::straight(0.0, 0.0, 25.0);
    let n = (horizon / dt).round() as usize;
    for _ in 0..n {
        s = step(&s, &p, input, dt).unwrap();
    }
    s
}

pub fn position_error(a: &VehicleState, b: &VehicleState) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Error reduction factors over successive step halvings 0.08, 0.04, 0.02.
pub fn halving_ratios() -> Vec<f64> {
    let reference = integrate(0.01 / 64.0, 4.0, SMOOTH);
    let errors: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|dt| position_error(&integrate(*dt, 4.0, SMOOTH), &reference))
        .collect();
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

pub const YAW_CASES: [(f64, f64); 3] = [(15.0, 0.02), (27.8, 0.01), (36.0, 0.005)];

/// Relative error of the settled yaw rate against the analytic value.
pub fn yaw_rate_error(v: f64, steer: f64) -> f64 {
    let p = VehicleParams::default();
    let mut s = VehicleState::straight(0.0, 0.0, v);
    for _ in 0..2000 {
        s = step(&s, &p, ControlInput { accel: 0.0, steer }, 0.01).unwrap();
    }
    let expect = steady_state_yaw_rate(&p, v, steer);
    ((s.yaw_rate - expect) / expect).abs()
}

/// Overshoot fraction and final error of a 25 to 28 m/s speed step.
pub fn speed_step(q: f64) -> (f64, f64) {
    let p = VehicleParams::default();
    let g = ControlGains::default();
    let d = DispositionModel::default().disposition(q);
    let (v0, v_ref) = (25.0, 28.0);
    let mut s = VehicleState::straight(0.0, 0.0, v0);
    let mut rate = ErrorRate::default();
    let mut peak: f64 = v0;
    for _ in 0..3000 {
        let e = v_ref - s.v_long;
        let errors = LongitudinalErrors {
            speed: e,
            speed_rate: rate.update(e, 0.01),
            headway: None,
        };
        let a = longitudinal_command(&errors, &g, &d, &p);
        s = step(
            &s,
            &p,
            ControlInput {
                accel: a,
                steer: 0.0,
            },
            0.01,
        )
        .unwrap();
        peak = peak.max(s.v_long);
    }
    ((peak - v_ref) / (v_ref - v0), (s.v_long - v_ref).abs())
}

/// Overshoot fraction of a one-lane lateral step at speed `v`.
pub fn lateral_step(q: f64, v: f64) -> f64 {
    let p = VehicleParams::default();
    let g = ControlGains::default();
    let d = DispositionModel::default().disposition(q);
    let target = -3.3;
    let mut s = VehicleState::straight(0.0, 0.0, v);
    let mut rate = ErrorRate::default();
    let mut furthest: f64 = 0.0;
    for _ in 0..3000 {
        let e = s.x - target;
        let steer = steering_command(e, rate.update(e, 0.01), &g, &d, &s, &p);
        s = step(&s, &p, ControlInput { accel: 0.0, steer }, 0.01).unwrap();
        furthest = furthest.min(s.x);
    }
    (target - furthest) / target.abs()
}
