//! Longitudinal equations of motion for circular tethered flight.
//!
//! State: azimuth `phi`, elevation `beta`, airspeed `V_a`, flight-path angle
//! `gamma`, pitch `theta`, plus a grounded flag. Controls: thrust `F_p` and
//! pitch rate `omega_q`. The tether is rigid, taut, and of constant length,
//! so the airborne aircraft moves on a sphere of radius `r`; the ground roll
//! is a circle of the same radius at zero elevation.
//!
//! Angle-of-attack is always derived as `alpha = theta - gamma`, never
//! stored. All angles are in radians; degrees appear only at the config and
//! telemetry boundaries.

use crate::airframe::{aero_forces, AeroPolar, AircraftConfig, Environment};
use crate::error::DynamicsError;

/// Airspeed floor for the airborne model [m/s]. The flight-path equation
/// divides by `V_a`; the supervisor keeps flight speeds far above this.
pub const V_MIN_AIRBORNE: f64 = 0.5;

/// Kinematic state of the tethered aircraft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    /// Azimuth around the anchor [rad]. Unwrapped; grows over a run.
    pub azimuth: f64,
    /// Elevation of the tether above the horizontal plane [rad].
    pub elevation: f64,
    /// Airspeed magnitude [m/s].
    pub airspeed: f64,
    /// Flight-path angle of the airspeed vector above the horizontal [rad].
    pub flight_path: f64,
    /// Pitch angle of the body axis above the horizontal [rad].
    pub pitch: f64,
    /// True while rolling on the ground (elevation and flight path are zero).
    pub grounded: bool,
}

impl FlightState {
    /// Motionless on the ground.
    pub fn rest() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
            airspeed: 0.0,
            flight_path: 0.0,
            pitch: 0.0,
            grounded: true,
        }
    }

    /// Aircraft angle-of-attack [rad], derived from pitch and flight path.
    pub fn alpha(&self) -> f64 {
        self.pitch - self.flight_path
    }

    /// Height above the ground plane [m] for tether length `r`.
    pub fn height(&self, tether: &TetherConfig) -> f64 {
        tether.length * self.elevation.sin()
    }
}

/// Commanded inputs: propeller thrust and pitch rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Thrust along the body axis [N].
    pub thrust: f64,
    /// Pitch rate [rad/s].
    pub pitch_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        thrust: 0.0,
        pitch_rate: 0.0,
    };
}

/// Rigid tether of constant length, attached at the wing tip in line with
/// the center of mass so the aero forces stay in the tangent plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TetherConfig {
    /// Tether length = path radius [m].
    pub length: f64,
}

impl TetherConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.length > 0.0) {
            return Err(("length_m", format!("must be positive, got {}", self.length)));
        }
        Ok(())
    }
}

/// Time derivative of [`FlightState`] (grounded flag excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub azimuth_rate: f64,
    pub elevation_rate: f64,
    pub airspeed_rate: f64,
    pub flight_path_rate: f64,
    pub pitch_rate: f64,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        self.azimuth_rate.is_finite()
            && self.elevation_rate.is_finite()
            && self.airspeed_rate.is_finite()
            && self.flight_path_rate.is_finite()
            && self.pitch_rate.is_finite()
    }
}

/// Airborne dynamics: spherical kinematics plus the force balance solved
/// for the airspeed and flight-path rates.
pub fn rhs_airborne(
    state: &FlightState,
    control: &ControlInput,
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    tether: &TetherConfig,
) -> Result<StateDerivative, DynamicsError> {
    if state.grounded {
        return Err(DynamicsError::RegimeMismatch(
            "airborne dynamics on a grounded state",
        ));
    }
    if state.airspeed < V_MIN_AIRBORNE {
        return Err(DynamicsError::AirspeedSingular {
            airspeed: state.airspeed,
            minimum: V_MIN_AIRBORNE,
        });
    }
    if !(state.elevation < std::f64::consts::FRAC_PI_2) {
        return Err(DynamicsError::ElevationRange {
            beta_deg: state.elevation.to_degrees(),
        });
    }

    let alpha = state.alpha();
    let (lift, drag) = aero_forces(aircraft, env, polar, state.airspeed, alpha)?;

    let m = aircraft.mass;
    let g = env.gravity;
    let r = tether.length;
    let v = state.airspeed;
    let (sin_b, cos_b) = state.elevation.sin_cos();
    let (sin_g, cos_g) = state.flight_path.sin_cos();
    let (sin_a, cos_a) = alpha.sin_cos();

    let azimuth_rate = v * cos_g / (r * cos_b);
    let elevation_rate = v * sin_g / r;
    let airspeed_rate = (-drag + control.thrust * cos_a - m * g * cos_b * sin_g) / m;
    let flight_path_rate = (lift + control.thrust * sin_a
        - m * g * cos_b * cos_g
        - m * v * v / r * (sin_b / cos_b) * cos_g)
        / (m * v);

    Ok(StateDerivative {
        azimuth_rate,
        elevation_rate,
        airspeed_rate,
        flight_path_rate,
        pitch_rate: control.pitch_rate,
    })
}

/// Ground-roll dynamics: circular taxi at zero elevation with rolling
/// friction on the unloaded weight. Pitch-down is blocked at zero so the
/// gear never digs in, and the aircraft cannot roll backwards.
pub fn rhs_ground_roll(
    state: &FlightState,
    control: &ControlInput,
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    tether: &TetherConfig,
) -> Result<StateDerivative, DynamicsError> {
    if !state.grounded {
        return Err(DynamicsError::RegimeMismatch(
            "ground-roll dynamics on an airborne state",
        ));
    }

    let v = state.airspeed.max(0.0);
    let theta = state.pitch;
    // On the ground gamma = 0, so alpha = theta.
    let (lift, drag) = aero_forces(aircraft, env, polar, v, theta)?;

    let m = aircraft.mass;
    let g = env.gravity;
    let (sin_t, cos_t) = theta.sin_cos();
    let normal = (m * g - lift - control.thrust * sin_t).max(0.0);

    let mut airspeed_rate =
        (-drag + control.thrust * cos_t - aircraft.rolling_friction * normal) / m;
    if state.airspeed <= 0.0 && airspeed_rate < 0.0 {
        // Static rest: friction cannot pull the aircraft backwards.
        airspeed_rate = 0.0;
    }

    let pitch_rate = if theta <= 0.0 && control.pitch_rate < 0.0 {
        0.0
    } else {
        control.pitch_rate
    };

    Ok(StateDerivative {
        azimuth_rate: v / tether.length,
        elevation_rate: 0.0,
        airspeed_rate,
        flight_path_rate: 0.0,
        pitch_rate,
    })
}

/// Normal force on the gear during ground roll [N]; zero at lift-off.
pub fn ground_normal_force(
    state: &FlightState,
    control: &ControlInput,
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
) -> Result<f64, DynamicsError> {
    let (lift, _) = aero_forces(aircraft, env, polar, state.airspeed.max(0.0), state.pitch)?;
    Ok((aircraft.mass * env.gravity - lift - control.thrust * state.pitch.sin()).max(0.0))
}

/// True when a grounded state is ready to leave the ground: the gear is
/// unloaded and the airborne flight-path rate would be nonnegative.
pub fn lift_off_ready(
    state: &FlightState,
    control: &ControlInput,
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    tether: &TetherConfig,
) -> Result<bool, DynamicsError> {
    if !state.grounded || state.airspeed < V_MIN_AIRBORNE {
        return Ok(false);
    }
    let normal = ground_normal_force(state, control, aircraft, env, polar)?;
    if normal > 0.0 {
        return Ok(false);
    }
    let mut airborne = *state;
    airborne.grounded = false;
    airborne.elevation = 0.0;
    airborne.flight_path = 0.0;
    let dot = rhs_airborne(&airborne, control, aircraft, env, polar, tether)?;
    Ok(dot.flight_path_rate >= 0.0)
}

/// Tether tension [N] recovered from the radial balance with constant
/// tether length. Nonnegative means taut; negative values are returned so
/// the caller can flag a slack-tether violation. Valid for grounded states
/// as well, where the rotation about the anchor still loads the tether.
pub fn tether_tension(
    state: &FlightState,
    aircraft: &AircraftConfig,
    env: &Environment,
    tether: &TetherConfig,
) -> f64 {
    let r = tether.length;
    let v = state.airspeed.max(0.0);
    let (sin_b, cos_b) = if state.grounded {
        (0.0, 1.0)
    } else {
        state.elevation.sin_cos()
    };
    let (sin_g, cos_g) = if state.grounded {
        (0.0, 1.0)
    } else {
        state.flight_path.sin_cos()
    };
    let azimuth_rate = v * cos_g / (r * cos_b);
    let elevation_rate = v * sin_g / r;
    aircraft.mass
        * r
        * (elevation_rate * elevation_rate + azimuth_rate * azimuth_rate * cos_b * cos_b)
        - aircraft.mass * env.gravity * sin_b
}

/// Height above ground for elevation `beta`: `h = r sin(beta)`.
pub fn beta_to_height(beta: f64, tether: &TetherConfig) -> Result<f64, DynamicsError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&beta) {
        return Err(DynamicsError::ElevationRange {
            beta_deg: beta.to_degrees(),
        });
    }
    Ok(tether.length * beta.sin())
}

/// Elevation for height `h`: `beta = asin(h / r)`.
pub fn height_to_beta(height: f64, tether: &TetherConfig) -> Result<f64, DynamicsError> {
    if !(0.0..=tether.length).contains(&height) {
        return Err(DynamicsError::HeightUnreachable {
            height,
            length: tether.length,
        });
    }
    Ok((height / tether.length).asin())
}
