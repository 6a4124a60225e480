//! Top-layer supervisory control: phase definitions, transition predicates,
//! per-phase controller binding, and full scenario execution.
//!
//! The automatic sequence is linear: Rest, ground acceleration (P1),
//! rotation (P2), initial climb (P3), loiter (P4), deceleration to glide
//! (P5), glide (P6), flare (P7), roll-out (P8), back to Rest. The reel-out
//! states that would extend a real mission beyond loiter exist in the enum
//! as boundary stubs and reject entry.

use thiserror::Error;

use crate::airframe::AircraftConfig;
use crate::config::{ControllerSet, LqrSettings, PidSettings, ReferenceMode, RunConfig};
use crate::control::{saturate, LqrLaw, Pid};
use crate::dynamics::{ControlInput, FlightState, TetherConfig};
use crate::error::{ConfigError, SimError, SynthesisError};
use crate::sim::{run_until, ExitReason, Models, TelemetryRecord};
use crate::synthesis::{design_lqr, solve_operating_point, AirspeedTarget, LqrDesign, TrimSpec};

/// Supervisory phase identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Rest,
    /// Ground acceleration to rotation speed.
    P1,
    /// Rotation: pitch-up at rotation speed.
    P2,
    /// Initial climb to loiter altitude.
    P3,
    /// Loiter: level circling at constant altitude.
    P4,
    /// Deceleration to glide speed.
    P5,
    /// Glide descent.
    P6,
    /// Flare before touchdown.
    P7,
    /// Roll-out to rest, propulsion off.
    P8,
    /// Boundary stub: reel-out ascent is outside this toolkit.
    Ascend,
    /// Boundary stub: on-tether power production is outside this toolkit.
    TetheredFlight,
    /// Boundary stub: reel-in descent is outside this toolkit.
    Descend,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Rest => "Rest",
            Phase::P1 => "P1",
            Phase::P2 => "P2",
            Phase::P3 => "P3",
            Phase::P4 => "P4",
            Phase::P5 => "P5",
            Phase::P6 => "P6",
            Phase::P7 => "P7",
            Phase::P8 => "P8",
            Phase::Ascend => "Ascend",
            Phase::TetheredFlight => "TetheredFlight",
            Phase::Descend => "Descend",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase-transition thresholds. Angles in radians, heights in meters,
/// speeds in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseParams {
    /// Rotation speed: ground roll ends at or above it.
    pub v_rot: f64,
    /// Pitch threshold ending the rotation.
    pub theta_rot: f64,
    /// Loiter altitude; climb ends when reached.
    pub h_loiter: f64,
    /// Loiter speed (reference value, cross-checked against the loiter
    /// controller's airspeed reference).
    pub v_loiter: f64,
    /// Glide speed: deceleration ends at or below it.
    pub v_glide: f64,
    /// Flare altitude; glide ends when reached.
    pub h_flare: f64,
    /// Climb path angle reference value.
    pub gamma_climb: f64,
    /// Glide path angle reference value.
    pub gamma_glide: f64,
    /// Flare pitch reference value.
    pub theta_flare: f64,
}

impl PhaseParams {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (key, v) in [
            ("v_rot", self.v_rot),
            ("theta_rot_deg", self.theta_rot),
            ("h_loiter_m", self.h_loiter),
            ("v_loiter", self.v_loiter),
            ("v_glide", self.v_glide),
            ("h_flare_m", self.h_flare),
        ] {
            if !(v > 0.0) {
                return Err((key, format!("must be positive, got {v}")));
            }
        }
        if !(self.h_flare < self.h_loiter) {
            return Err((
                "h_flare_m",
                format!(
                    "flare altitude {} must sit below loiter altitude {}",
                    self.h_flare, self.h_loiter
                ),
            ));
        }
        Ok(())
    }
}

/// Operator commands as batch timestamps, plus the rest threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Time at which the take-off command is issued [s].
    pub takeoff_at: f64,
    /// Time at which the landing command is issued [s].
    pub land_at: f64,
    /// Ground speed below which the roll-out is considered stopped [m/s].
    pub stop_speed: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.takeoff_at >= 0.0) {
            return Err((
                "takeoff_at",
                format!("must be nonnegative, got {}", self.takeoff_at),
            ));
        }
        if !(self.takeoff_at < self.land_at) {
            return Err((
                "land_at",
                format!(
                    "landing time {} must follow take-off time {}",
                    self.land_at, self.takeoff_at
                ),
            ));
        }
        if !(self.stop_speed > 0.0) {
            return Err((
                "stop_speed",
                format!("must be positive, got {}", self.stop_speed),
            ));
        }
        Ok(())
    }
}

/// Next phase for the current state; returns the current phase unchanged
/// while its exit condition is false. Total over all phases.
pub fn next_phase(
    current: Phase,
    t: f64,
    state: &FlightState,
    params: &PhaseParams,
    scenario: &ScenarioSpec,
    tether: &TetherConfig,
) -> Phase {
    let h = state.height(tether);
    match current {
        Phase::Rest => {
            if t >= scenario.takeoff_at {
                Phase::P1
            } else {
                Phase::Rest
            }
        }
        Phase::P1 => {
            if state.airspeed >= params.v_rot {
                Phase::P2
            } else {
                Phase::P1
            }
        }
        Phase::P2 => {
            if state.pitch >= params.theta_rot {
                Phase::P3
            } else {
                Phase::P2
            }
        }
        Phase::P3 => {
            if h >= params.h_loiter {
                Phase::P4
            } else {
                Phase::P3
            }
        }
        Phase::P4 => {
            if t >= scenario.land_at {
                Phase::P5
            } else {
                Phase::P4
            }
        }
        Phase::P5 => {
            if state.airspeed <= params.v_glide {
                Phase::P6
            } else {
                Phase::P5
            }
        }
        Phase::P6 => {
            if h <= params.h_flare {
                Phase::P7
            } else {
                Phase::P6
            }
        }
        Phase::P7 => {
            if state.grounded {
                Phase::P8
            } else {
                Phase::P7
            }
        }
        Phase::P8 => {
            if state.airspeed <= scenario.stop_speed {
                Phase::Rest
            } else {
                Phase::P8
            }
        }
        stub => stub,
    }
}

/// The three offline LQR designs used by the scenario.
#[derive(Debug, Clone)]
pub struct PhaseDesigns {
    pub climb: LqrDesign,
    pub loiter: LqrDesign,
    pub glide: LqrDesign,
}

/// Build the operating point and feedback gain for one LQR phase according
/// to the configured reference mode.
pub fn design_for_settings(
    settings: &LqrSettings,
    mode: ReferenceMode,
    models: &Models,
) -> Result<LqrDesign, SynthesisError> {
    let alpha = settings.x_ref[3] - settings.x_ref[2];
    let airspeed = match mode {
        ReferenceMode::Published => AirspeedTarget::Pinned(settings.x_ref[1]),
        ReferenceMode::Retrimmed => AirspeedTarget::Free {
            guess: settings.x_ref[1],
        },
    };
    let spec = TrimSpec {
        elevation: settings.x_ref[0],
        flight_path: settings.x_ref[2],
        alpha,
        airspeed,
    };
    let point = solve_operating_point(&spec, models)?;
    design_lqr(
        &point,
        settings.state_weights,
        settings.control_weights,
        models,
    )
}

/// Synthesize the climb, loiter, and glide designs for a configuration.
pub fn synthesize_designs(config: &RunConfig) -> Result<PhaseDesigns, SynthesisError> {
    let models = config.models();
    let mode = config.controllers.reference_mode;
    Ok(PhaseDesigns {
        climb: design_for_settings(&config.controllers.p3, mode, &models)?,
        loiter: design_for_settings(&config.controllers.p4, mode, &models)?,
        glide: design_for_settings(&config.controllers.p6, mode, &models)?,
    })
}

/// A controller bound to one phase. Holds the references and whatever
/// internal state the law carries; rebuilt (and therefore reset) at every
/// phase transition.
#[derive(Debug, Clone)]
pub enum BoundController {
    /// Constant command.
    OpenLoop(ControlInput),
    /// Pitch PID on the pitch rate plus airspeed PID on the thrust.
    DualPid {
        pitch: Pid,
        pitch_ref: f64,
        speed: Pid,
        speed_ref: f64,
    },
    /// Flight-path PID on the pitch rate with a hard pitch ceiling, plus
    /// airspeed PID on the thrust.
    PathHold {
        path: Pid,
        path_ref: f64,
        speed: Pid,
        speed_ref: f64,
        theta_ceiling: f64,
    },
    /// Pitch PID on the pitch rate with the thrust forced.
    PitchOnly {
        pitch: Pid,
        pitch_ref: f64,
        thrust: f64,
    },
    /// LQR state feedback about the phase operating point.
    StateFeedback(LqrLaw),
}

impl BoundController {
    /// Compute the saturated command for this step.
    pub fn command(
        &mut self,
        state: &FlightState,
        dt: f64,
        aircraft: &AircraftConfig,
    ) -> ControlInput {
        let raw = match self {
            BoundController::OpenLoop(u) => *u,
            BoundController::DualPid {
                pitch,
                pitch_ref,
                speed,
                speed_ref,
            } => ControlInput {
                thrust: speed.step(*speed_ref, state.airspeed, dt),
                pitch_rate: pitch.step(*pitch_ref, state.pitch, dt),
            },
            BoundController::PathHold {
                path,
                path_ref,
                speed,
                speed_ref,
                theta_ceiling,
            } => {
                let mut pitch_rate = path.step(*path_ref, state.flight_path, dt);
                if state.pitch >= *theta_ceiling && pitch_rate > 0.0 {
                    pitch_rate = 0.0;
                }
                ControlInput {
                    thrust: speed.step(*speed_ref, state.airspeed, dt),
                    pitch_rate,
                }
            }
            BoundController::PitchOnly {
                pitch,
                pitch_ref,
                thrust,
            } => ControlInput {
                thrust: *thrust,
                pitch_rate: pitch.step(*pitch_ref, state.pitch, dt),
            },
            BoundController::StateFeedback(law) => {
                let mut fb = *state;
                if fb.grounded {
                    // Ground contact pins elevation and flight path; their
                    // tracking errors carry no information until the gear
                    // unloads, and feeding them biases the free channels.
                    fb.elevation = law.x_ref[0];
                    fb.flight_path = law.x_ref[2];
                }
                law.step_unsaturated(&fb)
            }
        };
        saturate(raw, aircraft)
    }
}

fn angle_pid(settings: &PidSettings, aircraft: &AircraftConfig) -> Pid {
    Pid::new(
        settings.kp,
        settings.ki,
        settings.kd,
        -aircraft.pitch_rate_limit,
        aircraft.pitch_rate_limit,
    )
    .with_windup(settings.windup)
}

fn speed_pid(settings: &PidSettings, aircraft: &AircraftConfig) -> Pid {
    Pid::new(
        settings.kp,
        settings.ki,
        settings.kd,
        aircraft.thrust_min,
        aircraft.thrust_max,
    )
    .with_windup(settings.windup)
}

/// Bind the configured controller for a phase. LQR phases need their
/// synthesized design; the boundary stubs reject entry.
pub fn references_for_phase(
    phase: Phase,
    controllers: &ControllerSet,
    designs: &PhaseDesigns,
    aircraft: &AircraftConfig,
) -> Result<BoundController, ConfigError> {
    match phase {
        Phase::Rest | Phase::P8 => Ok(BoundController::OpenLoop(ControlInput::ZERO)),
        Phase::P1 => Ok(BoundController::DualPid {
            pitch: angle_pid(&controllers.p1_pitch, aircraft),
            pitch_ref: controllers.p1_pitch.reference,
            speed: speed_pid(&controllers.p1_speed, aircraft),
            speed_ref: controllers.p1_speed.reference,
        }),
        Phase::P2 => Ok(BoundController::DualPid {
            pitch: angle_pid(&controllers.p2_pitch, aircraft),
            pitch_ref: controllers.p2_pitch.reference,
            speed: speed_pid(&controllers.p2_speed, aircraft),
            speed_ref: controllers.p2_speed.reference,
        }),
        Phase::P3 => Ok(BoundController::StateFeedback(designs.climb.law())),
        Phase::P4 => Ok(BoundController::StateFeedback(designs.loiter.law())),
        Phase::P5 => Ok(BoundController::PathHold {
            path: angle_pid(&controllers.p5_path, aircraft),
            path_ref: controllers.p5_path.reference,
            speed: speed_pid(&controllers.p5_speed, aircraft),
            speed_ref: controllers.p5_speed.reference,
            theta_ceiling: controllers.p5_theta_ceiling,
        }),
        Phase::P6 => Ok(BoundController::StateFeedback(designs.glide.law())),
        Phase::P7 => Ok(BoundController::PitchOnly {
            pitch: angle_pid(&controllers.p7_pitch, aircraft),
            pitch_ref: controllers.p7_pitch.reference,
            thrust: 0.0,
        }),
        Phase::Ascend | Phase::TetheredFlight | Phase::Descend => {
            Err(ConfigError::MissingController(format!(
                "phase {phase} is a boundary stub outside the take-off and landing sequence"
            )))
        }
    }
}

/// One visited interval in the phase log.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInterval {
    pub phase: Phase,
    pub entry_time: f64,
    /// None while active (only the last interval of a timed-out run).
    pub exit_time: Option<f64>,
}

/// How a scenario ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioExit {
    /// The aircraft returned to rest; the full sequence ran.
    Completed { final_time: f64 },
    /// Simulated time ran out with the named phase still active.
    TimedOut { phase: Phase },
}

/// Full scenario output.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub telemetry: Vec<TelemetryRecord>,
    pub phase_log: Vec<PhaseInterval>,
    pub exit: ScenarioExit,
    /// Airborne records with negative tether tension (slack flag).
    pub slack_tether_records: u64,
}

/// Scenario-level error.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Execute the configured scenario from rest: synthesize the LQR designs,
/// then run the phase sequence with controller state reset at every
/// transition. Telemetry carries one record per step; transitions latch at
/// step boundaries. A timeout returns the partial telemetry with the stuck
/// phase named in the exit.
pub fn run_scenario(config: &RunConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let designs = synthesize_designs(config)?;
    run_scenario_with_designs(config, &designs)
}

/// As [`run_scenario`] but reusing existing designs.
pub fn run_scenario_with_designs(
    config: &RunConfig,
    designs: &PhaseDesigns,
) -> Result<ScenarioOutcome, ScenarioError> {
    config.sim.validate()?;
    let models = config.models();
    let dt = config.sim.dt;
    let max_steps = (config.sim.max_time / dt).round() as u64;

    let mut state = FlightState::rest();
    let mut phase = Phase::Rest;
    let mut step: u64 = 0;
    let mut telemetry: Vec<TelemetryRecord> = Vec::new();
    let mut phase_log = vec![PhaseInterval {
        phase,
        entry_time: 0.0,
        exit_time: None,
    }];
    let mut slack = 0u64;

    loop {
        let mut controller =
            references_for_phase(phase, &config.controllers, designs, &config.aircraft)?;
        let current = phase;
        let out = run_until(
            state,
            &models,
            &mut |_t, s: &FlightState| controller.command(s, dt, &config.aircraft),
            |t, s| {
                next_phase(
                    current,
                    t,
                    s,
                    &config.phases,
                    &config.scenario,
                    models.tether,
                ) != current
            },
            current,
            dt,
            step,
            max_steps.saturating_sub(step),
        )?;
        slack += out
            .telemetry
            .iter()
            .filter(|r| !r.grounded && r.tension < 0.0)
            .count() as u64;
        telemetry.extend(out.telemetry);
        state = out.state;
        step += out.steps;
        let now = step as f64 * dt;

        match out.exit {
            ExitReason::Timeout => {
                return Ok(ScenarioOutcome {
                    telemetry,
                    phase_log,
                    exit: ScenarioExit::TimedOut { phase },
                    slack_tether_records: slack,
                });
            }
            ExitReason::Predicate => {
                let next = next_phase(
                    phase,
                    now,
                    &state,
                    &config.phases,
                    &config.scenario,
                    models.tether,
                );
                if let Some(last) = phase_log.last_mut() {
                    last.exit_time = Some(now);
                }
                if phase == Phase::P8 && next == Phase::Rest {
                    phase_log.push(PhaseInterval {
                        phase: Phase::Rest,
                        entry_time: now,
                        exit_time: Some(now),
                    });
                    let rec = TelemetryRecord::capture(
                        now,
                        Phase::Rest,
                        &state,
                        &ControlInput::ZERO,
                        &models,
                    )
                    .map_err(|source| SimError::Stage { stage: 0, source })?;
                    telemetry.push(rec);
                    return Ok(ScenarioOutcome {
                        telemetry,
                        phase_log,
                        exit: ScenarioExit::Completed { final_time: now },
                        slack_tether_records: slack,
                    });
                }
                phase = next;
                phase_log.push(PhaseInterval {
                    phase,
                    entry_time: now,
                    exit_time: None,
                });
            }
        }
    }
}
