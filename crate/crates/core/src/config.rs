//! Configuration ingestion: a TOML schema mirroring the physical tables,
//! strict validation (unknown keys are errors), degree-to-radian conversion
//! at the boundary, and a deterministic echo for round-trip checks.
//!
//! Keys in the physical sections (`aircraft`, `env`, `tether`, `aero`,
//! `phases`, `limits`) may be omitted; each omission falls back to the
//! built-in default and logs a notice. Controller tables are required in
//! full. `sim` and `scenario` default silently.

use serde::{Deserialize, Serialize};

use crate::airframe::{AeroPolar, AircraftConfig, Environment, PolarPoint};
use crate::control::WindupMode;
use crate::dynamics::TetherConfig;
use crate::error::ConfigError;
use crate::sim::{Models, SimSettings};
use crate::supervisor::{PhaseParams, ScenarioSpec};

/// The configuration shipped with the toolkit (small-scale aircraft,
/// full take-off/landing scenario with the landing command at t = 20 s).
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../default_config.toml");

/// Fully validated run configuration, angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub aircraft: AircraftConfig,
    pub env: Environment,
    pub tether: TetherConfig,
    pub polar: AeroPolar,
    pub phases: PhaseParams,
    pub controllers: ControllerSet,
    pub sim: SimSettings,
    pub scenario: ScenarioSpec,
}

impl RunConfig {
    pub fn models(&self) -> Models<'_> {
        Models {
            aircraft: &self.aircraft,
            env: &self.env,
            polar: &self.polar,
            tether: &self.tether,
        }
    }
}

/// One PID loop: gains, reference (radians or m/s), integrator policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PidSettings {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub reference: f64,
    pub windup: WindupMode,
}

/// One LQR phase: reference state and diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSettings {
    /// (beta, V_a, gamma, theta) [rad, m/s, rad, rad].
    pub x_ref: [f64; 4],
    pub state_weights: [f64; 4],
    pub control_weights: [f64; 2],
}

/// Where LQR operating points come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Use the configured reference states verbatim, with the thrust set
    /// from the airspeed-rate balance at the reference. Residuals of the
    /// other balances are reported, not hidden; feedback absorbs them.
    Published,
    /// Re-solve each reference as an exact trim of the active polar,
    /// freeing the airspeed.
    Retrimmed,
}

/// Everything the supervisor binds per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSet {
    pub reference_mode: ReferenceMode,
    pub p1_pitch: PidSettings,
    pub p1_speed: PidSettings,
    pub p2_pitch: PidSettings,
    pub p2_speed: PidSettings,
    pub p3: LqrSettings,
    pub p4: LqrSettings,
    pub p5_path: PidSettings,
    pub p5_speed: PidSettings,
    pub p5_theta_ceiling: f64,
    pub p6: LqrSettings,
    pub p7_pitch: PidSettings,
}

/// Parsed configuration plus load notices and the effective raw form used
/// for echoing.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    /// One line per defaulted or cross-checked key.
    pub notices: Vec<String>,
    effective: RawConfig,
}

impl LoadedConfig {
    /// Serialize the effective configuration (defaults filled in). Parsing
    /// the echo reproduces an equal [`RunConfig`].
    pub fn echo(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(&self.effective).map_err(|e| ConfigError::Echo(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Raw schema (degrees at the boundary)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    aircraft: RawAircraft,
    env: RawEnv,
    tether: RawTether,
    aero: RawAero,
    phases: RawPhases,
    limits: RawLimits,
    controllers: RawControllers,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim: Option<RawSim>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<RawScenario>,
}

macro_rules! opt_fields_struct {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $(
                #[serde(skip_serializing_if = "Option::is_none")]
                $field: Option<$ty>,
            )*
        }
    };
}

opt_fields_struct!(RawAircraft {
    mass_kg: f64,
    wing_area_m2: f64,
    wingspan_m: f64,
    incidence_deg: f64,
    rolling_friction: f64,
});

opt_fields_struct!(RawEnv {
    air_density: f64,
    gravity: f64,
    wind_speed: f64,
});

opt_fields_struct!(RawTether {
    length_m: f64,
    attachment: String,
});

opt_fields_struct!(RawAero {
    stall_alpha_deg: f64,
    steady_alpha_deg: f64,
    polar: Vec<RawPolarRow>,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolarRow {
    alpha_deg: f64,
    cl: f64,
    cd: f64,
}

opt_fields_struct!(RawPhases {
    v_rot: f64,
    v_loiter: f64,
    v_glide: f64,
    gamma_climb_deg: f64,
    gamma_glide_deg: f64,
    theta_rot_deg: f64,
    theta_flare_deg: f64,
    h_loiter_m: f64,
    h_flare_m: f64,
});

opt_fields_struct!(RawLimits {
    thrust_min_n: f64,
    thrust_max_n: f64,
    pitch_rate_limit_degs: f64,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControllers {
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_mode: Option<String>,
    p1: RawDualPid,
    p2: RawDualPid,
    p3: RawLqr,
    p4: RawLqr,
    p5: RawP5,
    p6: RawLqr,
    p7: RawP7,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDualPid {
    pitch: RawAnglePid,
    airspeed: RawSpeedPid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawP5 {
    theta_ceiling_deg: f64,
    path: RawAnglePid,
    airspeed: RawSpeedPid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawP7 {
    pitch: RawAnglePid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnglePid {
    kp: f64,
    ki: f64,
    kd: f64,
    ref_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    windup: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpeedPid {
    kp: f64,
    ki: f64,
    kd: f64,
    ref_mps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    windup: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLqr {
    beta_ref_deg: f64,
    va_ref: f64,
    gamma_ref_deg: f64,
    theta_ref_deg: f64,
    q: [f64; 4],
    r: [f64; 2],
}

opt_fields_struct!(RawSim {
    dt: f64,
    max_time: f64,
    event_tolerance: f64,
});

opt_fields_struct!(RawScenario {
    takeoff_at: f64,
    land_at: f64,
    stop_speed: f64,
});

// ---------------------------------------------------------------------------
// Defaults
// ---------------------------------------------------------------------------

// Keep in sync with the table in default_config.toml.
fn default_polar_rows() -> Vec<RawPolarRow> {
    vec![
        RawPolarRow {
            alpha_deg: -6.0,
            cl: 1.3025,
            cd: 0.022,
        },
        RawPolarRow {
            alpha_deg: 0.0,
            cl: 1.341_633_1,
            cd: 0.017_524_63,
        },
        RawPolarRow {
            alpha_deg: 9.0,
            cl: 1.4002,
            cd: 0.038_554_19,
        },
        RawPolarRow {
            alpha_deg: 14.0,
            cl: 1.3995,
            cd: 0.26,
        },
    ]
}

struct Defaulter<'a> {
    source: &'a str,
    notices: Vec<String>,
}

impl<'a> Defaulter<'a> {
    fn take<T>(&mut self, slot: &mut Option<T>, key: &str, default: T) -> T
    where
        T: Clone + std::fmt::Debug,
    {
        match slot {
            Some(v) => v.clone(),
            None => {
                self.notices
                    .push(format!("{key} not set; using default {default:?}"));
                *slot = Some(default.clone());
                default
            }
        }
    }

    fn invalid(&self, section: &str, field: &str, reason: String) -> ConfigError {
        let key = format!("{section}.{field}");
        ConfigError::Invalid {
            line: find_key_line(self.source, field),
            key,
            reason,
        }
    }
}

/// Best-effort line lookup for a key's final path segment.
fn find_key_line(source: &str, field: &str) -> Option<usize> {
    for (idx, line) in source.lines().enumerate() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix(field) {
            let rest = rest.trim_start();
            if rest.starts_with('=') {
                return Some(idx + 1);
            }
        }
    }
    None
}

fn parse_windup(
    raw: &Option<String>,
    section: &str,
    d: &Defaulter,
) -> Result<WindupMode, ConfigError> {
    match raw.as_deref() {
        None | Some("conditional") => Ok(WindupMode::Conditional),
        Some("unbounded") => Ok(WindupMode::Unbounded),
        Some(other) => Err(d.invalid(
            section,
            "windup",
            format!("expected \"conditional\" or \"unbounded\", got \"{other}\""),
        )),
    }
}

fn angle_pid_settings(
    raw: &RawAnglePid,
    section: &str,
    d: &Defaulter,
) -> Result<PidSettings, ConfigError> {
    Ok(PidSettings {
        kp: raw.kp,
        ki: raw.ki,
        kd: raw.kd,
        reference: raw.ref_deg.to_radians(),
        windup: parse_windup(&raw.windup, section, d)?,
    })
}

fn speed_pid_settings(
    raw: &RawSpeedPid,
    section: &str,
    d: &Defaulter,
) -> Result<PidSettings, ConfigError> {
    Ok(PidSettings {
        kp: raw.kp,
        ki: raw.ki,
        kd: raw.kd,
        reference: raw.ref_mps,
        windup: parse_windup(&raw.windup, section, d)?,
    })
}

fn lqr_settings(raw: &RawLqr, section: &str, d: &Defaulter) -> Result<LqrSettings, ConfigError> {
    for (i, q) in raw.q.iter().enumerate() {
        if *q < 0.0 {
            return Err(d.invalid(section, "q", format!("q[{i}] = {q} must be nonnegative")));
        }
    }
    for (j, r) in raw.r.iter().enumerate() {
        if *r <= 0.0 {
            return Err(d.invalid(section, "r", format!("r[{j}] = {r} must be positive")));
        }
    }
    Ok(LqrSettings {
        x_ref: [
            raw.beta_ref_deg.to_radians(),
            raw.va_ref,
            raw.gamma_ref_deg.to_radians(),
            raw.theta_ref_deg.to_radians(),
        ],
        state_weights: raw.q,
        control_weights: raw.r,
    })
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(l) => ConfigError::Parse(format!("line {l}: {}", e.message())),
            None => ConfigError::Parse(e.message().to_string()),
        }
    })?;

    let mut d = Defaulter {
        source: text,
        notices: Vec::new(),
    };

    // Aircraft.
    let aircraft = AircraftConfig {
        mass: d.take(&mut raw.aircraft.mass_kg, "aircraft.mass_kg", 0.350),
        wing_area: d.take(
            &mut raw.aircraft.wing_area_m2,
            "aircraft.wing_area_m2",
            0.0576,
        ),
        wingspan: d.take(&mut raw.aircraft.wingspan_m, "aircraft.wingspan_m", 0.60),
        incidence: d
            .take(
                &mut raw.aircraft.incidence_deg,
                "aircraft.incidence_deg",
                6.0,
            )
            .to_radians(),
        thrust_min: d.take(&mut raw.limits.thrust_min_n, "limits.thrust_min_n", 0.0),
        thrust_max: d.take(&mut raw.limits.thrust_max_n, "limits.thrust_max_n", 1.5),
        pitch_rate_limit: d
            .take(
                &mut raw.limits.pitch_rate_limit_degs,
                "limits.pitch_rate_limit_degs",
                20.0,
            )
            .to_radians(),
        rolling_friction: d.take(
            &mut raw.aircraft.rolling_friction,
            "aircraft.rolling_friction",
            0.03,
        ),
    };
    aircraft.validate().map_err(|(field, reason)| {
        let section = if field.starts_with("thrust") || field.starts_with("pitch_rate") {
            "limits"
        } else {
            "aircraft"
        };
        d.invalid(section, field, reason)
    })?;

    // Environment.
    let env = Environment {
        air_density: d.take(&mut raw.env.air_density, "env.air_density", 1.225),
        gravity: d.take(&mut raw.env.gravity, "env.gravity", 9.8),
        wind_speed: d.take(&mut raw.env.wind_speed, "env.wind_speed", 0.0),
    };
    env.validate()
        .map_err(|(field, reason)| d.invalid("env", field, reason))?;

    // Tether.
    let tether = TetherConfig {
        length: d.take(&mut raw.tether.length_m, "tether.length_m", 2.4),
    };
    tether
        .validate()
        .map_err(|(field, reason)| d.invalid("tether", field, reason))?;
    let _attachment = d.take(
        &mut raw.tether.attachment,
        "tether.attachment",
        "wing tip, aligned with center of mass".to_string(),
    );

    // Polar.
    let rows = d.take(&mut raw.aero.polar, "aero.polar", default_polar_rows());
    let stall = d
        .take(&mut raw.aero.stall_alpha_deg, "aero.stall_alpha_deg", 9.0)
        .to_radians();
    let steady = d
        .take(&mut raw.aero.steady_alpha_deg, "aero.steady_alpha_deg", 0.0)
        .to_radians();
    let points: Vec<PolarPoint> = rows
        .iter()
        .map(|r| PolarPoint {
            alpha: r.alpha_deg.to_radians(),
            cl: r.cl,
            cd: r.cd,
        })
        .collect();
    let polar = AeroPolar::new(points, stall, steady)
        .map_err(|(field, reason)| d.invalid("aero", field, reason))?;

    // Phase parameters.
    let phases = PhaseParams {
        v_rot: d.take(&mut raw.phases.v_rot, "phases.v_rot", 7.98),
        theta_rot: d
            .take(&mut raw.phases.theta_rot_deg, "phases.theta_rot_deg", 9.0)
            .to_radians(),
        h_loiter: d.take(&mut raw.phases.h_loiter_m, "phases.h_loiter_m", 0.3),
        v_loiter: d.take(&mut raw.phases.v_loiter, "phases.v_loiter", 10.84),
        v_glide: d.take(&mut raw.phases.v_glide, "phases.v_glide", 8.29),
        h_flare: d.take(&mut raw.phases.h_flare_m, "phases.h_flare_m", 0.063),
        gamma_climb: d
            .take(
                &mut raw.phases.gamma_climb_deg,
                "phases.gamma_climb_deg",
                3.0,
            )
            .to_radians(),
        gamma_glide: d
            .take(
                &mut raw.phases.gamma_glide_deg,
                "phases.gamma_glide_deg",
                -1.0,
            )
            .to_radians(),
        theta_flare: d
            .take(
                &mut raw.phases.theta_flare_deg,
                "phases.theta_flare_deg",
                12.0,
            )
            .to_radians(),
    };
    phases
        .validate()
        .map_err(|(field, reason)| d.invalid("phases", field, reason))?;

    // Controllers.
    let reference_mode = match raw.controllers.reference_mode.as_deref() {
        None | Some("published") => ReferenceMode::Published,
        Some("retrimmed") => ReferenceMode::Retrimmed,
        Some(other) => {
            return Err(d.invalid(
                "controllers",
                "reference_mode",
                format!("expected \"published\" or \"retrimmed\", got \"{other}\""),
            ))
        }
    };
    let controllers = ControllerSet {
        reference_mode,
        p1_pitch: angle_pid_settings(&raw.controllers.p1.pitch, "controllers.p1.pitch", &d)?,
        p1_speed: speed_pid_settings(&raw.controllers.p1.airspeed, "controllers.p1.airspeed", &d)?,
        p2_pitch: angle_pid_settings(&raw.controllers.p2.pitch, "controllers.p2.pitch", &d)?,
        p2_speed: speed_pid_settings(&raw.controllers.p2.airspeed, "controllers.p2.airspeed", &d)?,
        p3: lqr_settings(&raw.controllers.p3, "controllers.p3", &d)?,
        p4: lqr_settings(&raw.controllers.p4, "controllers.p4", &d)?,
        p5_path: angle_pid_settings(&raw.controllers.p5.path, "controllers.p5.path", &d)?,
        p5_speed: speed_pid_settings(&raw.controllers.p5.airspeed, "controllers.p5.airspeed", &d)?,
        p5_theta_ceiling: raw.controllers.p5.theta_ceiling_deg.to_radians(),
        p6: lqr_settings(&raw.controllers.p6, "controllers.p6", &d)?,
        p7_pitch: angle_pid_settings(&raw.controllers.p7.pitch, "controllers.p7.pitch", &d)?,
    };

    // Sim and scenario.
    let mut raw_sim = raw.sim.take().unwrap_or_default();
    let dt = d.take(&mut raw_sim.dt, "sim.dt", 1e-3);
    let sim = SimSettings {
        dt,
        max_time: d.take(&mut raw_sim.max_time, "sim.max_time", 60.0),
        event_tolerance: d.take(&mut raw_sim.event_tolerance, "sim.event_tolerance", dt),
    };
    raw.sim = Some(raw_sim);
    sim.validate().map_err(|e| ConfigError::Invalid {
        key: "sim".into(),
        line: find_key_line(text, "dt"),
        reason: e.to_string(),
    })?;

    let mut raw_scn = raw.scenario.take().unwrap_or_default();
    let scenario = ScenarioSpec {
        takeoff_at: d.take(&mut raw_scn.takeoff_at, "scenario.takeoff_at", 0.0),
        land_at: d.take(&mut raw_scn.land_at, "scenario.land_at", 20.0),
        stop_speed: d.take(&mut raw_scn.stop_speed, "scenario.stop_speed", 0.05),
    };
    raw.scenario = Some(raw_scn);
    scenario
        .validate()
        .map_err(|(field, reason)| d.invalid("scenario", field, reason))?;

    // Cross-checks between phase thresholds and controller references are
    // advisory: mismatches are legal but worth a notice.
    let mut notices = std::mem::take(&mut d.notices);
    let checks = [
        (
            "phases.v_loiter vs controllers.p4.va_ref",
            phases.v_loiter,
            controllers.p4.x_ref[1],
        ),
        (
            "phases.gamma_climb_deg vs controllers.p3.gamma_ref_deg",
            phases.gamma_climb,
            controllers.p3.x_ref[2],
        ),
        (
            "phases.gamma_glide_deg vs controllers.p6.gamma_ref_deg",
            phases.gamma_glide,
            controllers.p6.x_ref[2],
        ),
        (
            "phases.theta_flare_deg vs controllers.p7.pitch.ref_deg",
            phases.theta_flare,
            controllers.p7_pitch.reference,
        ),
    ];
    for (what, a, b) in checks {
        if (a - b).abs() > 1e-9 {
            notices.push(format!("{what}: {a} != {b} (allowed, but unusual)"));
        }
    }

    Ok(LoadedConfig {
        run: RunConfig {
            aircraft,
            env,
            tether,
            polar,
            phases,
            controllers,
            sim,
            scenario,
        },
        notices,
        effective: raw,
    })
}
