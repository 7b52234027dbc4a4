//! Low-level driver controls: two PD loops (longitudinal and lateral)
//! with limits scaled by the driver's disposition, plus lane-change
//! reference generation.

use serde::{Deserialize, Serialize};

use crate::vehicle_dynamics::{VehicleParams, VehicleState, DEG_PER_RAD, GRAVITY};

/// Peak of the second derivative of the 10-15-6 quintic blend on [0, 1].
pub const QUINTIC_PEAK_ACCEL: f64 = 5.773_502_691_896_258; // 10 / sqrt(3)

/// Coefficients mapping the aggressiveness index onto driver limits.
///
/// Every q-derived quantity is a linear interpolation between its value
/// for a fully cautious driver (q = 0) and a fully aggressive one (q = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispositionModel {
    /// g_l(q) = accel_limit_base + accel_limit_slope * q, m/s^2
    pub accel_limit_base: f64,
    pub accel_limit_slope: f64,
    /// a_yl(q) = (lat_accel_base_g + lat_accel_slope_g * q) * g
    pub lat_accel_base_g: f64,
    pub lat_accel_slope_g: f64,
    /// alpha(q) at q = 0 and q = 1.
    pub visibility_scale_cautious: f64,
    pub visibility_scale_aggressive: f64,
    /// T(q) at q = 0 and q = 1, seconds. Must be strictly decreasing.
    pub prediction_time_cautious: f64,
    pub prediction_time_aggressive: f64,
    /// Constant-time-gap headway reference at q = 0 and q = 1, seconds.
    pub headway_time_cautious: f64,
    pub headway_time_aggressive: f64,
}

impl Default for DispositionModel {
    fn default() -> Self {
        Self {
            accel_limit_base: 2.0,
            accel_limit_slope: 4.0,
            lat_accel_base_g: 0.2,
            lat_accel_slope_g: 0.3,
            visibility_scale_cautious: 0.3,
            visibility_scale_aggressive: 1.0,
            prediction_time_cautious: 3.0,
            prediction_time_aggressive: 0.5,
            headway_time_cautious: 1.5,
            headway_time_aggressive: 1.5,
        }
    }
}

fn lerp(a: f64, b: f64, q: f64) -> f64 {
    a + (b - a) * q
}

impl DispositionModel {
    pub fn disposition(&self, q: f64) -> DriverDisposition {
        let q = q.clamp(0.0, 1.0);
        DriverDisposition {
            q,
            accel_limit: self.accel_limit_base + self.accel_limit_slope * q,
            lat_accel_limit: (self.lat_accel_base_g + self.lat_accel_slope_g * q) * GRAVITY,
            visibility_scale: lerp(
                self.visibility_scale_cautious,
                self.visibility_scale_aggressive,
                q,
            ),
            prediction_time: lerp(
                self.prediction_time_cautious,
                self.prediction_time_aggressive,
                q,
            ),
            headway_time: lerp(self.headway_time_cautious, self.headway_time_aggressive, q),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.accel_limit_base > 0.0 && self.accel_limit_slope >= 0.0) {
            return Err("disposition accel limit must be positive and nondecreasing in q".into());
        }
        if !(self.lat_accel_base_g > 0.0 && self.lat_accel_slope_g >= 0.0) {
            return Err(
                "disposition lateral accel limit must be positive and nondecreasing in q".into(),
            );
        }
        if !(self.visibility_scale_cautious > 0.0 && self.visibility_scale_aggressive > 0.0) {
            return Err("disposition visibility scales must be positive".into());
        }
        if !(self.prediction_time_aggressive > 0.0
            && self.prediction_time_cautious > self.prediction_time_aggressive)
        {
            return Err("prediction time must be positive and strictly decreasing in q".into());
        }
        if !(self.headway_time_cautious > 0.0 && self.headway_time_aggressive > 0.0) {
            return Err("headway times must be positive".into());
        }
        Ok(())
    }
}

/// A driver's aggressiveness index together with every limit derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverDisposition {
    pub q: f64,
    /// g_l, m/s^2
    pub accel_limit: f64,
    /// a_yl, m/s^2
    pub lat_accel_limit: f64,
    /// alpha(q), dimensionless
    pub visibility_scale: f64,
    /// T(q), s
    pub prediction_time: f64,
    /// tau_h(q), s
    pub headway_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlGains {
    pub kp_speed: f64,
    pub kd_speed: f64,
    pub kp_headway: f64,
    pub kd_headway: f64,
    pub kp_lateral: f64,
    pub kd_lateral: f64,
    /// Weight of the speed loop when a leader is visible.
    pub blend_with_leader: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            kp_speed: 0.6,
            kd_speed: 0.1,
            kp_headway: 0.15,
            kd_headway: 0.6,
            kp_lateral: 0.01,
            kd_lateral: 0.02,
            blend_with_leader: 0.5,
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.kp_speed,
            self.kd_speed,
            self.kp_headway,
            self.kd_headway,
            self.kp_lateral,
            self.kd_lateral,
        ];
        if all.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err("controller gains must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.blend_with_leader) {
            return Err("gains.blend_with_leader must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Error signals for the longitudinal loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LongitudinalErrors {
    /// v_ref - v, m/s
    pub speed: f64,
    pub speed_rate: f64,
    /// (d - d_ref, its rate) when a leader is within visibility.
    pub headway: Option<(f64, f64)>,
}

/// Finite-difference derivative memory for one error signal.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorRate {
    prev: Option<f64>,
}

impl ErrorRate {
    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let rate = match self.prev {
            Some(p) => (error - p) / dt,
            None => 0.0,
        };
        self.prev = Some(error);
        rate
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

/// Bounds `[lo, hi]` of the commanded acceleration.
pub fn accel_bounds(disposition: &DriverDisposition, params: &VehicleParams) -> (f64, f64) {
    (
        -params.accel_limit,
        disposition.accel_limit.min(params.accel_limit),
    )
}

/// Blended PD acceleration, clamped to the disposition and physical limits.
/// Braking is bounded only by the physical limit.
pub fn longitudinal_command(
    errors: &LongitudinalErrors,
    gains: &ControlGains,
    disposition: &DriverDisposition,
    params: &VehicleParams,
) -> f64 {
    let speed_pd = gains.kp_speed * errors.speed + gains.kd_speed * errors.speed_rate;
    let raw = match errors.headway {
        Some((e, de)) => {
            let w = gains.blend_with_leader;
            let headway_pd = gains.kp_headway * e + gains.kd_headway * de;
            w * speed_pd + (1.0 - w) * headway_pd
        }
        None => speed_pd,
    };
    let (lo, hi) = accel_bounds(disposition, params);
    raw.clamp(lo, hi)
}

/// Steering limit (degrees) that keeps steady-state lateral acceleration
/// at `lat_accel` (m/s^2), from the lateral acceleration gain relation.
/// `understeer` is in deg/g. Returns `None` for non-positive speed.
pub fn steer_limit_from_lateral_accel(
    lat_accel: f64,
    speed: f64,
    wheelbase: f64,
    understeer: f64,
) -> Option<f64> {
    if !(speed > 0.0) {
        return None;
    }
    let v2 = speed * speed;
    Some(lat_accel / GRAVITY * (DEG_PER_RAD * wheelbase * GRAVITY + understeer * v2) / v2)
}

/// Symmetric steering bound in radians for the current speed.
pub fn steer_bound(
    disposition: &DriverDisposition,
    state: &VehicleState,
    params: &VehicleParams,
) -> f64 {
    let by_driver = steer_limit_from_lateral_accel(
        disposition.lat_accel_limit,
        state.v_long.max(crate::vehicle_dynamics::V_MIN_FLOOR),
        params.wheelbase(),
        params.understeer_gradient(),
    )
    .map(|deg| deg / DEG_PER_RAD)
    .unwrap_or(params.steer_limit);
    by_driver.min(params.steer_limit)
}

/// PD steering on the lateral error. `lat_error` is positive when the
/// reference lies to the vehicle's left.
pub fn steering_command(
    lat_error: f64,
    lat_error_rate: f64,
    gains: &ControlGains,
    disposition: &DriverDisposition,
    state: &VehicleState,
    params: &VehicleParams,
) -> f64 {
    let raw = gains.kp_lateral * lat_error + gains.kd_lateral * lat_error_rate;
    let bound = steer_bound(disposition, state, params);
    raw.clamp(-bound, bound)
}

/// Quintic lateral position profile between two lane centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralReference {
    pub from: f64,
    pub to: f64,
    pub start: f64,
    pub duration: f64,
}

impl LateralReference {
    pub fn hold(x: f64) -> Self {
        Self {
            from: x,
            to: x,
            start: 0.0,
            duration: 0.0,
        }
    }

    fn phase(&self, t: f64) -> Option<f64> {
        if self.duration <= 0.0 {
            return None;
        }
        Some(((t - self.start) / self.duration).clamp(0.0, 1.0))
    }

    pub fn position(&self, t: f64) -> f64 {
        match self.phase(t) {
            None => self.to,
            Some(s) => {
                let blend = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
                self.from + (self.to - self.from) * blend
            }
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match self.phase(t) {
            None => 0.0,
            Some(s) => {
                let d = 30.0 * s * s * (1.0 - s) * (1.0 - s);
                (self.to - self.from) * d / self.duration
            }
        }
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        match self.phase(t) {
            None => 0.0,
            Some(s) => {
                let dd = 60.0 * s - 180.0 * s * s + 120.0 * s * s * s;
                (self.to - self.from) * dd / (self.duration * self.duration)
            }
        }
    }

    pub fn peak_acceleration(&self) -> f64 {
        if self.duration <= 0.0 {
            return 0.0;
        }
        (self.to - self.from).abs() * QUINTIC_PEAK_ACCEL / (self.duration * self.duration)
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_finished(&self, t: f64) -> bool {
        t >= self.end()
    }
}

/// Minimal-duration quintic lane change whose peak lateral acceleration
/// equals the driver's limit.
pub fn plan_lane_change(
    from_center: f64,
    to_center: f64,
    speed: f64,
    disposition: &DriverDisposition,
    start: f64,
) -> LateralReference {
    debug_assert!(speed > 0.0);
    let offset = (to_center - from_center).abs();
    let duration = if offset == 0.0 {
        0.0
    } else {
        (QUINTIC_PEAK_ACCEL * offset / disposition.lat_accel_limit).sqrt()
    };
    LateralReference {
        from: from_center,
        to: to_center,
        start,
        duration,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> DriverDisposition {
        DispositionModel::default().disposition(0.5)
    }

    #[test]
    fn disposition_is_monotone() {
        let m = DispositionModel::default();
        let qs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for w in qs.windows(2) {
            let (a, b) = (m.disposition(w[0]), m.disposition(w[1]));
            assert!(b.prediction_time < a.prediction_time);
            assert!(b.accel_limit >= a.accel_limit);
            assert!(b.lat_accel_limit >= a.lat_accel_limit);
        }
        assert_eq!(m.disposition(0.0).accel_limit, 2.0);
        assert_eq!(m.disposition(1.0).accel_limit, 6.0);
        assert!((m.disposition(0.5).prediction_time - 1.75).abs() < 1e-12);
    }

    #[test]
    fn zero_error_gives_zero_command() {
        let p = VehicleParams::default();
        let g = ControlGains::default();
        let e = LongitudinalErrors {
            headway: Some((0.0, 0.0)),
            ..Default::default()
        };
        assert_eq!(longitudinal_command(&e, &g, &normal(), &p), 0.0);
        let s = VehicleState::straight(0.0, 0.0, 25.0);
        assert_eq!(steering_command(0.0, 0.0, &g, &normal(), &s, &p), 0.0);
    }

    #[test]
    fn accel_clamp_binds_on_disposition_limit() {
        let p = VehicleParams::default();
        let gains = ControlGains {
            kp_speed: 1.0,
            kd_speed: 0.1,
            ..Default::default()
        };
        let mut d = normal();
        d.accel_limit = 3.0;
        let e = LongitudinalErrors {
            speed: 10.0,
            ..Default::default()
        };
        assert_eq!(longitudinal_command(&e, &gains, &d, &p), 3.0);
        // braking is only limited physically
        let e = LongitudinalErrors {
            speed: -100.0,
            ..Default::default()
        };
        assert_eq!(longitudinal_command(&e, &gains, &d, &p), -p.accel_limit);
    }

    #[test]
    fn steering_clamp_returns_limit_exactly() {
        let p = VehicleParams::default();
        let g = ControlGains::default();
        let s = VehicleState::straight(0.0, 0.0, 27.8);
        let bound = steer_bound(&normal(), &s, &p);
        assert_eq!(steering_command(1e3, 0.0, &g, &normal(), &s, &p), bound);
        assert_eq!(steering_command(-1e3, 0.0, &g, &normal(), &s, &p), -bound);
        assert!(bound < p.steer_limit);
    }

    #[test]
    fn steer_limit_neutral_and_linear() {
        let (a, v, l) = (3.0, 20.0, 2.7);
        let neutral = steer_limit_from_lateral_accel(a, v, l, 0.0).unwrap();
        assert!((neutral - a * DEG_PER_RAD * l / (v * v)).abs() < 1e-12);
        let one = steer_limit_from_lateral_accel(a, v, l, 1.3).unwrap();
        let two = steer_limit_from_lateral_accel(2.0 * a, v, l, 1.3).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
        assert!(steer_limit_from_lateral_accel(a, 0.0, l, 1.0).is_none());
    }

    #[test]
    fn steer_limit_agrees_with_steady_state_yaw() {
        use crate::vehicle_dynamics::steady_state_yaw_rate;
        let p = VehicleParams::default();
        let v = 27.8;
        let a_yl = normal().lat_accel_limit;
        let deg = steer_limit_from_lateral_accel(a_yl, v, p.wheelbase(), p.understeer_gradient())
            .unwrap();
        let r = steady_state_yaw_rate(&p, v, deg / DEG_PER_RAD);
        assert!((r * v - a_yl).abs() / a_yl < 0.01);
    }

    #[test]
    fn lane_change_profile_endpoints_and_limits() {
        let d = normal();
        let r = plan_lane_change(3.3, 6.6, 27.8, &d, 1.0);
        assert_eq!(r.position(1.0), 3.3);
        assert_eq!(r.position(r.end()), 6.6);
        assert_eq!(r.velocity(1.0), 0.0);
        assert!(r.velocity(r.end()).abs() < 1e-12);
        assert!((r.peak_acceleration() - d.lat_accel_limit).abs() < 1e-9);

        let hold = plan_lane_change(3.3, 3.3, 27.8, &d, 0.0);
        assert_eq!(hold.duration, 0.0);
        assert_eq!(hold.position(5.0), 3.3);
    }

    #[test]
    fn aggressive_lane_change_is_shorter() {
        let m = DispositionModel::default();
        let slow = plan_lane_change(0.0, 3.3, 27.8, &m.disposition(0.2), 0.0);
        let fast = plan_lane_change(0.0, 3.3, 27.8, &m.disposition(0.8), 0.0);
        assert!(fast.duration < slow.duration);
    }

    #[test]
    fn lane_change_duration_is_brute_force_minimum() {
        let d = normal();
        let planned = plan_lane_change(3.3, 6.6, 27.8, &d, 0.0);
        // scan durations on a 10 ms grid and sample the profile densely
        let dt = 0.01;
        let mut minimal = None;
        for k in 1..2000 {
            let dur = k as f64 * dt;
            let trial = LateralReference {
                from: 3.3,
                to: 6.6,
                start: 0.0,
                duration: dur,
            };
            let peak = (0..=1000)
                .map(|i| trial.acceleration(dur * i as f64 / 1000.0).abs())
                .fold(0.0, f64::max);
            if peak <= d.lat_accel_limit {
                minimal = Some(dur);
                break;
            }
        }
        let minimal = minimal.unwrap();
        assert!((planned.duration - minimal).abs() <= dt);
    }

    #[test]
    fn error_rate_memory() {
        let mut r = ErrorRate::default();
        assert_eq!(r.update(1.0, 0.1), 0.0);
        assert!((r.update(1.5, 0.1) - 5.0).abs() < 1e-12);
        r.reset();
        assert_eq!(r.update(9.0, 0.1), 0.0);
    }
}
