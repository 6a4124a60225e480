//! Flight-envelope analytics: the maximum attainable elevation for a given
//! tether length and the level-flight speed over elevation and radius.
//!
//! Level circling at elevation `beta` balances lift against the gravity and
//! rotation components normal to the path. The balance degenerates as the
//! lift-per-speed-squared margin over the rotation term vanishes, which
//! bounds the elevation for a given tether length regardless of speed.

use crate::airframe::{AeroPolar, AircraftConfig, Environment};
use crate::error::DynamicsError;

/// Level-speed query result: the required airspeed, or infeasibility when
/// the elevation is at or beyond the attainable bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSpeed {
    Feasible(f64),
    Infeasible,
}

impl LevelSpeed {
    pub fn speed(&self) -> Option<f64> {
        match self {
            LevelSpeed::Feasible(v) => Some(*v),
            LevelSpeed::Infeasible => None,
        }
    }
}

/// Maximum attainable elevation for tether length `r` at angle-of-attack
/// `alpha`: `beta_max = atan(0.5 rho A c_L r / m)`.
pub fn beta_max(
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    alpha: f64,
    tether_length: f64,
) -> Result<f64, DynamicsError> {
    let (cl, _) = polar.coefficients(alpha)?;
    let half_rho_a = 0.5 * env.air_density * aircraft.wing_area;
    Ok((half_rho_a * cl * tether_length / aircraft.mass).atan())
}

/// Airspeed for steady level circling at elevation `beta`, without thrust
/// assistance:
/// `V^2 = m g cos(beta) / (0.5 rho A c_L - (m / r) tan(beta))`.
///
/// A bounded thrust assist along the body axis may be included for
/// sensitivity studies; it subtracts `F_p sin(alpha)` from the lift demand.
pub fn level_speed_with_thrust(
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    alpha: f64,
    beta: f64,
    tether_length: f64,
    thrust: f64,
) -> Result<LevelSpeed, DynamicsError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&beta) {
        return Err(DynamicsError::ElevationRange {
            beta_deg: beta.to_degrees(),
        });
    }
    let (cl, _) = polar.coefficients(alpha)?;
    let half_rho_a = 0.5 * env.air_density * aircraft.wing_area;
    let denom = half_rho_a * cl - aircraft.mass / tether_length * beta.tan();
    if denom <= 0.0 {
        return Ok(LevelSpeed::Infeasible);
    }
    let numer = aircraft.mass * env.gravity * beta.cos() - thrust * alpha.sin();
    if numer <= 0.0 {
        // Thrust alone carries the weight; any speed works downward of here.
        return Ok(LevelSpeed::Feasible(0.0));
    }
    Ok(LevelSpeed::Feasible((numer / denom).sqrt()))
}

/// Unassisted level speed (the default balance).
pub fn level_speed(
    aircraft: &AircraftConfig,
    env: &Environment,
    polar: &AeroPolar,
    alpha: f64,
    beta: f64,
    tether_length: f64,
) -> Result<LevelSpeed, DynamicsError> {
    level_speed_with_thrust(aircraft, env, polar, alpha, beta, tether_length, 0.0)
}

/// Grid specification for envelope sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeQuery {
    /// Tether lengths [m], strictly increasing.
    pub tether_lengths: Vec<f64>,
    /// Elevations [rad], strictly increasing.
    pub elevations: Vec<f64>,
    /// Angle-of-attack choices [rad].
    pub alphas: Vec<f64>,
    /// Thrust assist included in the balance [N]; zero for the plain curve.
    pub assist_thrust: f64,
}

/// One evaluated envelope grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub tether_length: f64,
    pub beta: f64,
    pub level: LevelSpeed,
}

impl EnvelopeQuery {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (key, grid) in [
            ("r_grid", &self.tether_lengths),
            ("beta_grid", &self.elevations),
        ] {
            if grid.is_empty() {
                return Err((key, "grid must be non-empty".into()));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err((key, "grid must be strictly increasing".into()));
            }
        }
        if self.alphas.is_empty() {
            return Err(("alpha_grid", "need at least one angle-of-attack".into()));
        }
        if self.tether_lengths[0] <= 0.0 {
            return Err(("r_grid", "tether lengths must be positive".into()));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.elevations[0])
            || self.elevations.last().copied().unwrap_or(0.0) >= std::f64::consts::FRAC_PI_2
        {
            return Err(("beta_grid", "elevations must lie in [0, 90) deg".into()));
        }
        Ok(())
    }

    /// Evaluate the level-speed surface for one angle-of-attack.
    pub fn evaluate(
        &self,
        aircraft: &AircraftConfig,
        env: &Environment,
        polar: &AeroPolar,
        alpha: f64,
    ) -> Result<Vec<EnvelopePoint>, DynamicsError> {
        let mut out = Vec::with_capacity(self.tether_lengths.len() * self.elevations.len());
        for &r in &self.tether_lengths {
            for &beta in &self.elevations {
                let level = level_speed_with_thrust(
                    aircraft,
                    env,
                    polar,
                    alpha,
                    beta,
                    r,
                    self.assist_thrust,
                )?;
                out.push(EnvelopePoint {
                    tether_length: r,
                    beta,
                    level,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airframe::PolarPoint;
    use crate::config::test_support::default_stack;
    use crate::dynamics::{rhs_airborne, ControlInput, FlightState};
    use approx::assert_relative_eq;

    #[test]
    fn no_lift_means_no_elevation() {
        let (aircraft, env, _, _) = default_stack();
        // A polar with zero lift at its low end; query exactly there.
        let polar = AeroPolar::new(
            vec![
                PolarPoint {
                    alpha: -0.1,
                    cl: 0.0,
                    cd: 0.02,
                },
                PolarPoint {
                    alpha: 0.0,
                    cl: 0.5,
                    cd: 0.009,
                },
                PolarPoint {
                    alpha: 0.1,
                    cl: 1.0,
                    cd: 0.02,
                },
            ],
            0.1,
            0.0,
        )
        .unwrap();
        let b = beta_max(&aircraft, &env, &polar, -0.1, 2.4).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn stall_lift_bound_at_default_radius() {
        let (aircraft, env, polar, _) = default_stack();
        let b = beta_max(&aircraft, &env, &polar, 9f64.to_radians(), 2.4).unwrap();
        // Independent closed-form evaluation.
        let oracle = (0.5_f64 * 1.225 * 0.0576 * 1.4002 * 2.4 / 0.35).atan();
        assert_relative_eq!(b, oracle, max_relative = 1e-12);
        assert_relative_eq!(b.to_degrees(), 18.71, epsilon = 0.01);
    }

    #[test]
    fn beta_max_grows_and_saturates_with_radius() {
        let (aircraft, env, polar, _) = default_stack();
        let alpha = 9f64.to_radians();
        let mut prev = 0.0;
        let mut prev_gain = f64::INFINITY;
        for k in 1..60 {
            let r = 0.5 * k as f64;
            let b = beta_max(&aircraft, &env, &polar, alpha, r).unwrap();
            assert!(b > prev, "not increasing at r = {r}");
            let gain = b - prev;
            assert!(gain < prev_gain + 1e-12, "gain not shrinking at r = {r}");
            prev = b;
            prev_gain = gain;
        }
    }

    #[test]
    fn level_speed_at_zero_elevation() {
        let (aircraft, env, polar, _) = default_stack();
        let v = level_speed(&aircraft, &env, &polar, 9f64.to_radians(), 0.0, 2.4)
            .unwrap()
            .speed()
            .unwrap();
        let (cl, _) = polar.coefficients(9f64.to_radians()).unwrap();
        let oracle = (aircraft.mass * env.gravity
            / (0.5 * env.air_density * aircraft.wing_area * cl))
            .sqrt();
        assert_relative_eq!(v, oracle, max_relative = 1e-12);
        assert_relative_eq!(v, 8.33, epsilon = 5e-3);
    }

    #[test]
    fn level_speed_is_infeasible_at_the_bound() {
        let (aircraft, env, polar, _) = default_stack();
        let alpha = 9f64.to_radians();
        let bound = beta_max(&aircraft, &env, &polar, alpha, 2.4).unwrap();
        assert_eq!(
            level_speed(&aircraft, &env, &polar, alpha, bound, 2.4).unwrap(),
            LevelSpeed::Infeasible
        );
        // Just inside the bound is feasible (and fast).
        let v = level_speed(&aircraft, &env, &polar, alpha, bound - 1e-6, 2.4)
            .unwrap()
            .speed()
            .unwrap();
        assert!(v > 50.0);
    }

    #[test]
    fn level_speed_balances_the_flight_path_equation() {
        let (aircraft, env, polar, tether) = default_stack();
        let alpha = 9f64.to_radians();
        let beta = 10f64.to_radians();
        let v = level_speed(&aircraft, &env, &polar, alpha, beta, tether.length)
            .unwrap()
            .speed()
            .unwrap();
        assert_relative_eq!(v, 11.94, epsilon = 5e-3);
        // Back-substitute: gamma = 0, theta = alpha, no thrust.
        let state = FlightState {
            azimuth: 0.0,
            elevation: beta,
            airspeed: v,
            flight_path: 0.0,
            pitch: alpha,
            grounded: false,
        };
        let dot = rhs_airborne(
            &state,
            &ControlInput::ZERO,
            &aircraft,
            &env,
            &polar,
            &tether,
        )
        .unwrap();
        assert!(
            dot.flight_path_rate.abs() <= 1e-9,
            "path rate {}",
            dot.flight_path_rate
        );
    }

    #[test]
    fn level_speed_increases_toward_the_bound() {
        let (aircraft, env, polar, _) = default_stack();
        let alpha = 9f64.to_radians();
        let bound = beta_max(&aircraft, &env, &polar, alpha, 2.4).unwrap();
        let mut prev = 0.0;
        let mut feasible_top = 0.0;
        let n = 2000;
        for k in 0..n {
            let beta = bound * 1.2 * k as f64 / n as f64;
            match level_speed(&aircraft, &env, &polar, alpha, beta, 2.4).unwrap() {
                LevelSpeed::Feasible(v) => {
                    assert!(v > prev, "not increasing at beta {beta}");
                    prev = v;
                    feasible_top = beta;
                }
                LevelSpeed::Infeasible => {
                    assert!(beta >= bound - 1e-9, "infeasible below the bound at {beta}");
                }
            }
        }
        // Feasibility boundary converges to beta_max at grid resolution.
        assert!((bound - feasible_top).abs() <= bound * 1.2 / n as f64 + 1e-12);
    }

    #[test]
    fn query_validation_catches_bad_grids() {
        let q = EnvelopeQuery {
            tether_lengths: vec![1.0, 0.5],
            elevations: vec![0.0, 0.1],
            alphas: vec![0.0],
            assist_thrust: 0.0,
        };
        assert!(q.validate().is_err());
        let q = EnvelopeQuery {
            tether_lengths: vec![],
            elevations: vec![0.0],
            alphas: vec![0.0],
            assist_thrust: 0.0,
        };
        assert!(q.validate().is_err());
    }
}
