//! Runtime control laws: discrete PID with anti-windup, LQR state feedback
//! about an operating point, and actuator saturation.

use nalgebra::{SMatrix, SVector};

use crate::airframe::AircraftConfig;
use crate::dynamics::{ControlInput, FlightState};

/// Integrator policy under output saturation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindupMode {
    /// Conditional integration: the integrator only updates while the output
    /// is unsaturated, or while the error drives it back toward the
    /// unsaturated region.
    Conditional,
    /// Plain integration with no windup protection. Used where a loop is
    /// meant to stay pinned at an actuator limit for a whole phase and hand
    /// over with authority (the supervisor resets all controller state at
    /// each phase transition, so windup never leaks across phases).
    Unbounded,
}

/// Parallel-form discrete PID with derivative on error by backward
/// difference. Output is clamped to the configured bounds.
#[derive(Debug, Clone)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub out_min: f64,
    pub out_max: f64,
    pub windup: WindupMode,
    integral: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(kp: f64, ki: f64, kd: f64, out_min: f64, out_max: f64) -> Self {
        assert!(out_min <= out_max, "output bounds must be ordered");
        Self {
            kp,
            ki,
            kd,
            out_min,
            out_max,
            windup: WindupMode::Conditional,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn with_windup(mut self, windup: WindupMode) -> Self {
        self.windup = windup;
        self
    }

    /// Clear integrator and derivative memory.
    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One controller update over a step of length `dt`.
    pub fn step(&mut self, reference: f64, measurement: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let error = reference - measurement;
        // No derivative kick on the first sample after a reset.
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(error);

        let candidate = self.integral + error * dt;
        let raw = self.kp * error + self.ki * candidate + self.kd * derivative;
        let out = raw.clamp(self.out_min, self.out_max);

        let accept = match self.windup {
            WindupMode::Unbounded => true,
            WindupMode::Conditional => {
                if raw > self.out_max {
                    error < 0.0
                } else if raw < self.out_min {
                    error > 0.0
                } else {
                    true
                }
            }
        };
        if accept {
            self.integral = candidate;
        }
        out
    }
}

/// LQR state feedback about a reference state and control.
///
/// The feedback state is the 4-vector (elevation, airspeed, flight path,
/// pitch); azimuth is not controlled. Angle errors are wrapped onto the
/// reference's branch before differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrLaw {
    /// Reference state (beta, V_a, gamma, theta) [rad, m/s, rad, rad].
    pub x_ref: [f64; 4],
    /// Reference control (F_p, omega_q) [N, rad/s].
    pub u_ref: [f64; 2],
    /// Feedback gain, 2x4.
    pub gain: SMatrix<f64, 2, 4>,
}

fn wrap_angle(x: f64) -> f64 {
    let mut y = x % std::f64::consts::TAU;
    if y > std::f64::consts::PI {
        y -= std::f64::consts::TAU;
    } else if y <= -std::f64::consts::PI {
        y += std::f64::consts::TAU;
    }
    y
}

impl LqrLaw {
    /// Error state x - x_ref with angle components wrapped.
    pub fn error_state(&self, state: &FlightState) -> SVector<f64, 4> {
        SVector::<f64, 4>::new(
            wrap_angle(state.elevation - self.x_ref[0]),
            state.airspeed - self.x_ref[1],
            wrap_angle(state.flight_path - self.x_ref[2]),
            wrap_angle(state.pitch - self.x_ref[3]),
        )
    }

    /// Feedback command before saturation: u = u_ref - K (x - x_ref).
    pub fn step_unsaturated(&self, state: &FlightState) -> ControlInput {
        let du = -self.gain * self.error_state(state);
        ControlInput {
            thrust: self.u_ref[0] + du[0],
            pitch_rate: self.u_ref[1] + du[1],
        }
    }

    /// Feedback command clamped to the actuator limits.
    pub fn step(&self, state: &FlightState, aircraft: &AircraftConfig) -> ControlInput {
        saturate(self.step_unsaturated(state), aircraft)
    }
}

/// Componentwise clamp of the command to the configured actuator bounds.
/// Idempotent.
pub fn saturate(u: ControlInput, aircraft: &AircraftConfig) -> ControlInput {
    ControlInput {
        thrust: u.thrust.clamp(aircraft.thrust_min, aircraft.thrust_max),
        pitch_rate: u
            .pitch_rate
            .clamp(-aircraft.pitch_rate_limit, aircraft.pitch_rate_limit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::test_support::default_stack;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pure_proportional() {
        let mut pid = Pid::new(1.0, 0.0, 0.0, -10.0, 10.0);
        assert_relative_eq!(pid.step(0.5, 0.0, 0.001), 0.5);
    }

    #[test]
    fn pure_integral_ramps_like_time() {
        let mut pid = Pid::new(0.0, 1.0, 0.0, -1e9, 1e9);
        let dt = 0.01;
        let mut u = 0.0;
        for _ in 0..500 {
            u = pid.step(1.0, 0.0, dt);
        }
        assert_relative_eq!(u, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn saturation_freezes_integrator() {
        let mut pid = Pid::new(1.0, 1.0, 0.0, 0.0, 1.5);
        let u = pid.step(2.3, 0.0, 0.001); // raw = 2.3 + eps -> clamped
        assert_eq!(u, 1.5);
        // Positive error drives deeper into saturation: candidate rejected.
        assert_eq!(pid.integral(), 0.0);
    }

    #[test]
    fn error_driving_back_unfreezes_integrator() {
        // A derivative spike pins the output at the upper bound while the
        // error is already negative; the integrator must keep unwinding.
        let mut pid = Pid::new(0.0, 1.0, 5.0, 0.0, 1.5);
        let _ = pid.step(0.0, 1.0, 0.001);
        let u = pid.step(0.0, 0.05, 0.001);
        assert_eq!(u, 1.5);
        assert!(pid.integral() < 0.0);
    }

    #[test]
    fn unbounded_mode_accumulates_through_saturation() {
        let mut pid = Pid::new(1.0, 1.0, 0.0, 0.0, 1.5).with_windup(WindupMode::Unbounded);
        for _ in 0..100 {
            let _ = pid.step(2.3, 0.0, 0.01);
        }
        assert_relative_eq!(pid.integral(), 2.3, max_relative = 1e-12);
    }

    #[test]
    fn reset_clears_memory() {
        let mut pid = Pid::new(1.0, 1.0, 1.0, -10.0, 10.0);
        let _ = pid.step(1.0, 0.0, 0.01);
        pid.reset();
        assert_eq!(pid.integral(), 0.0);
        // First step after reset has no derivative term.
        let u = pid.step(1.0, 0.0, 0.01);
        assert_relative_eq!(u, 1.0 + 0.01, max_relative = 1e-12);
    }

    #[test]
    fn lqr_returns_reference_at_reference() {
        let law = LqrLaw {
            x_ref: [0.1, 10.84, 0.0, 0.0],
            u_ref: [0.07, 0.0],
            gain: SMatrix::<f64, 2, 4>::from_row_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]),
        };
        let state = FlightState {
            azimuth: 3.0,
            elevation: 0.1,
            airspeed: 10.84,
            flight_path: 0.0,
            pitch: 0.0,
            grounded: false,
        };
        let u = law.step_unsaturated(&state);
        assert_relative_eq!(u.thrust, 0.07, max_relative = 1e-15);
        assert_relative_eq!(u.pitch_rate, 0.0, max_relative = 1e-15);
    }

    #[test]
    fn zero_gain_always_returns_reference() {
        let law = LqrLaw {
            x_ref: [0.1, 10.84, 0.0, 0.0],
            u_ref: [0.07, 0.01],
            gain: SMatrix::zeros(),
        };
        let state = FlightState {
            azimuth: 0.0,
            elevation: 0.5,
            airspeed: 3.0,
            flight_path: -0.2,
            pitch: 0.3,
            grounded: false,
        };
        let u = law.step_unsaturated(&state);
        assert_eq!(u.thrust, 0.07);
        assert_eq!(u.pitch_rate, 0.01);
    }

    #[test]
    fn saturate_clamps_to_table_bounds() {
        let (aircraft, _, _, _) = default_stack();
        let u = saturate(
            ControlInput {
                thrust: 2.0,
                pitch_rate: 0.0,
            },
            &aircraft,
        );
        assert_eq!(u.thrust, 1.5);
        let u = saturate(
            ControlInput {
                thrust: 0.5,
                pitch_rate: -30f64.to_radians(),
            },
            &aircraft,
        );
        assert_relative_eq!(u.pitch_rate, -20f64.to_radians(), max_relative = 1e-15);
        let inside = ControlInput {
            thrust: 0.7,
            pitch_rate: 0.1,
        };
        assert_eq!(saturate(inside, &aircraft), inside);
    }

    proptest! {
        // saturate . saturate = saturate
        #[test]
        fn saturation_is_idempotent(thrust in -5.0f64..5.0, rate in -2.0f64..2.0) {
            let (aircraft, _, _, _) = default_stack();
            let once = saturate(ControlInput { thrust, pitch_rate: rate }, &aircraft);
            let twice = saturate(once, &aircraft);
            prop_assert_eq!(once, twice);
        }

        // Doubling all gains doubles the unsaturated output for the same
        // error history.
        #[test]
        fn pid_output_scales_with_gains(
            kp in 0.0f64..5.0,
            ki in 0.0f64..5.0,
            kd in 0.0f64..5.0,
            errors in proptest::collection::vec(-2.0f64..2.0, 1..40),
        ) {
            let mut a = Pid::new(kp, ki, kd, -1e12, 1e12);
            let mut b = Pid::new(2.0 * kp, 2.0 * ki, 2.0 * kd, -1e12, 1e12);
            let dt = 0.01;
            let mut ua = 0.0;
            let mut ub = 0.0;
            for e in &errors {
                ua = a.step(*e, 0.0, dt);
                ub = b.step(*e, 0.0, dt);
            }
            prop_assert!((ub - 2.0 * ua).abs() <= 1e-9 * ua.abs().max(1.0));
        }

        // The unsaturated LQR law is affine in the state.
        #[test]
        fn lqr_is_affine(
            d_beta in -0.2f64..0.2,
            d_v in -2.0f64..2.0,
            d_gamma in -0.2f64..0.2,
            d_theta in -0.2f64..0.2,
        ) {
            let law = LqrLaw {
                x_ref: [0.12, 10.0, 0.0, 0.05],
                u_ref: [0.4, 0.02],
                gain: SMatrix::<f64, 2, 4>::from_row_slice(&[
                    0.3, -1.2, 4.0, 0.9,
                    2.0, 0.1, -0.7, 1.5,
                ]),
            };
            let mk = |s: f64| FlightState {
                azimuth: 0.0,
                elevation: law.x_ref[0] + s * d_beta,
                airspeed: law.x_ref[1] + s * d_v,
                flight_path: law.x_ref[2] + s * d_gamma,
                pitch: law.x_ref[3] + s * d_theta,
                grounded: false,
            };
            let plus = law.step_unsaturated(&mk(1.0));
            let minus = law.step_unsaturated(&mk(-1.0));
            let center = law.step_unsaturated(&mk(0.0));
            prop_assert!((plus.thrust + minus.thrust - 2.0 * center.thrust).abs() < 1e-12);
            prop_assert!((plus.pitch_rate + minus.pitch_rate - 2.0 * center.pitch_rate).abs() < 1e-12);
        }
    }
}
