//! Physical aircraft and environment parameters, and the aerodynamic
//! coefficient model `c_L(alpha)`, `c_D(alpha)` with its force evaluations.
//!
//! The polar is a piecewise-linear breakpoint table over aircraft
//! angle-of-attack. Evaluation outside the table range is an error, never an
//! extrapolation: the equations of motion are only trusted where coefficient
//! data exists.

use crate::error::DynamicsError;

/// Physical aircraft parameters and actuator limits.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftConfig {
    /// Mass [kg].
    pub mass: f64,
    /// Wing reference area [m^2].
    pub wing_area: f64,
    /// Wingspan [m].
    pub wingspan: f64,
    /// Wing incidence angle [rad]. Metadata only: the polar is stored
    /// directly against aircraft angle-of-attack.
    pub incidence: f64,
    /// Thrust lower bound [N].
    pub thrust_min: f64,
    /// Thrust upper bound [N].
    pub thrust_max: f64,
    /// Symmetric pitch-rate limit [rad/s].
    pub pitch_rate_limit: f64,
    /// Rolling friction coefficient of the landing gear [-].
    pub rolling_friction: f64,
}

impl AircraftConfig {
    /// Validate the structural invariants. Returns the offending field name.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.mass > 0.0) {
            return Err(("mass_kg", format!("must be positive, got {}", self.mass)));
        }
        if !(self.wing_area > 0.0) {
            return Err((
                "wing_area_m2",
                format!("must be positive, got {}", self.wing_area),
            ));
        }
        if !(self.wingspan > 0.0) {
            return Err((
                "wingspan_m",
                format!("must be positive, got {}", self.wingspan),
            ));
        }
        if !(self.thrust_min >= 0.0) {
            return Err((
                "thrust_min_n",
                format!("must be nonnegative, got {}", self.thrust_min),
            ));
        }
        if !(self.thrust_min < self.thrust_max) {
            return Err((
                "thrust_max_n",
                format!(
                    "bounds must be ordered, got [{}, {}]",
                    self.thrust_min, self.thrust_max
                ),
            ));
        }
        if !(self.pitch_rate_limit > 0.0) {
            return Err((
                "pitch_rate_limit_degs",
                format!("must be positive, got {}", self.pitch_rate_limit),
            ));
        }
        if !(self.rolling_friction >= 0.0) {
            return Err((
                "rolling_friction",
                format!("must be nonnegative, got {}", self.rolling_friction),
            ));
        }
        Ok(())
    }
}

/// Ambient environment. The in-scope model assumes still air; a nonzero
/// wind speed is rejected at configuration load.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// Air density [kg/m^3].
    pub air_density: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Wind speed [m/s]. Must be zero.
    pub wind_speed: f64,
}

impl Environment {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.air_density > 0.0) {
            return Err((
                "air_density",
                format!("must be positive, got {}", self.air_density),
            ));
        }
        if !(self.gravity > 0.0) {
            return Err(("gravity", format!("must be positive, got {}", self.gravity)));
        }
        if self.wind_speed != 0.0 {
            return Err((
                "wind_speed",
                format!(
                    "the model covers still air only (tether plane alignment relies on it); got {}",
                    self.wind_speed
                ),
            ));
        }
        Ok(())
    }

    /// Dynamic pressure times reference area at airspeed `v` [N].
    pub fn dynamic_force(&self, wing_area: f64, airspeed: f64) -> f64 {
        0.5 * self.air_density * wing_area * airspeed * airspeed
    }
}

/// One breakpoint of the aerodynamic polar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    /// Aircraft angle-of-attack [rad].
    pub alpha: f64,
    /// Lift coefficient [-].
    pub cl: f64,
    /// Drag coefficient [-].
    pub cd: f64,
}

/// Piecewise-linear lift/drag polar over aircraft angle-of-attack.
///
/// Construction checks that the breakpoints are strictly increasing, that
/// drag is positive everywhere, that the tabulated lift maximum sits at the
/// declared stall angle, and that the tabulated L/D maximum sits at the
/// declared steady angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroPolar {
    points: Vec<PolarPoint>,
    /// Angle of maximum lift [rad].
    stall_alpha: f64,
    /// Angle of maximum lift-to-drag ratio [rad].
    steady_alpha: f64,
}

impl AeroPolar {
    pub fn new(
        points: Vec<PolarPoint>,
        stall_alpha: f64,
        steady_alpha: f64,
    ) -> Result<Self, (&'static str, String)> {
        if points.len() < 2 {
            return Err((
                "polar",
                format!("need at least 2 breakpoints, got {}", points.len()),
            ));
        }
        for pair in points.windows(2) {
            if !(pair[1].alpha > pair[0].alpha) {
                return Err((
                    "polar",
                    format!(
                        "breakpoints must be strictly increasing in alpha: {:.4} then {:.4} rad",
                        pair[0].alpha, pair[1].alpha
                    ),
                ));
            }
        }
        for p in &points {
            if !(p.cd > 0.0) {
                return Err((
                    "polar",
                    format!(
                        "drag coefficient must be positive, got {} at alpha {:.4} rad",
                        p.cd, p.alpha
                    ),
                ));
            }
            if !p.cl.is_finite() {
                return Err((
                    "polar",
                    format!("non-finite cl at alpha {:.4} rad", p.alpha),
                ));
            }
        }
        let argmax_cl = points
            .iter()
            .max_by(|a, b| a.cl.total_cmp(&b.cl))
            .expect("nonempty");
        if (argmax_cl.alpha - stall_alpha).abs() > 1e-12 {
            return Err((
                "stall_alpha_deg",
                format!(
                    "tabulated lift maximum is at {:.4} deg, not the declared stall angle {:.4} deg",
                    argmax_cl.alpha.to_degrees(),
                    stall_alpha.to_degrees()
                ),
            ));
        }
        let argmax_ld = points
            .iter()
            .max_by(|a, b| (a.cl / a.cd).total_cmp(&(b.cl / b.cd)))
            .expect("nonempty");
        if (argmax_ld.alpha - steady_alpha).abs() > 1e-12 {
            return Err((
                "steady_alpha_deg",
                format!(
                    "tabulated L/D maximum is at {:.4} deg, not the declared steady angle {:.4} deg",
                    argmax_ld.alpha.to_degrees(),
                    steady_alpha.to_degrees()
                ),
            ));
        }
        Ok(Self {
            points,
            stall_alpha,
            steady_alpha,
        })
    }

    pub fn points(&self) -> &[PolarPoint] {
        &self.points
    }

    pub fn stall_alpha(&self) -> f64 {
        self.stall_alpha
    }

    pub fn steady_alpha(&self) -> f64 {
        self.steady_alpha
    }

    pub fn min_alpha(&self) -> f64 {
        self.points.first().expect("nonempty").alpha
    }

    pub fn max_alpha(&self) -> f64 {
        self.points.last().expect("nonempty").alpha
    }

    /// Lift and drag coefficients at aircraft angle-of-attack `alpha` [rad],
    /// by linear interpolation on the breakpoint table.
    pub fn coefficients(&self, alpha: f64) -> Result<(f64, f64), DynamicsError> {
        if !alpha.is_finite() || alpha < self.min_alpha() || alpha > self.max_alpha() {
            return Err(DynamicsError::AlphaOutOfRange {
                alpha_deg: alpha.to_degrees(),
                min_deg: self.min_alpha().to_degrees(),
                max_deg: self.max_alpha().to_degrees(),
            });
        }
        // partition_point: index of the first breakpoint with alpha_i > alpha.
        let hi = self
            .points
            .partition_point(|p| p.alpha <= alpha)
            .min(self.points.len() - 1)
            .max(1);
        let a = &self.points[hi - 1];
        let b = &self.points[hi];
        let w = (alpha - a.alpha) / (b.alpha - a.alpha);
        Ok((a.cl + w * (b.cl - a.cl), a.cd + w * (b.cd - a.cd)))
    }
}

/// Aerodynamic lift and drag magnitudes `(F_L, F_D)` [N] at airspeed `v`
/// and aircraft angle-of-attack `alpha`.
pub fn aero_forces(
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    airspeed: f64,
    alpha: f64,
) -> Result<(f64, f64), DynamicsError> {
    if airspeed < 0.0 {
        return Err(DynamicsError::NegativeAirspeed(airspeed));
    }
    let (cl, cd) = polar.coefficients(alpha)?;
    let q = env.dynamic_force(aircraft.wing_area, airspeed);
    Ok((q * cl, q * cd))
}
