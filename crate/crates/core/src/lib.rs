//! Simulation and control-design toolkit for circular take-off and landing
//! (CTOL) of a motorized aircraft tethered to a fixed ground anchor.
//!
//! The aircraft is constrained to a sphere whose radius is the tether length.
//! A longitudinal point-mass model couples spherical kinematics with lift,
//! drag, thrust, and gravity. A supervisory state machine sequences the
//! take-off, loiter, approach, and landing phases, delegating to PID loops
//! and LQR state feedback synthesized offline from the linearized model.
//!
//! Module map:
//! - [`airframe`] — physical parameters and the aerodynamic polar
//! - [`dynamics`] — airborne and ground-roll equations of motion, tether
//!   tension, elevation/height geometry
//! - [`control`] — runtime control laws: PID with anti-windup, LQR state
//!   feedback, actuator saturation
//! - [`sim`] — fixed-step RK4 kernel, event-latched runs, telemetry capture
//! - [`synthesis`] — trim solving, numeric linearization, continuous
//!   algebraic Riccati solution, LQR gain design
//! - [`supervisor`] — phase state machine and full scenario execution
//! - [`envelope`] — attainable-elevation and level-speed analysis
//! - [`config`] — TOML configuration schema, validation, echo
//! - [`telemetry`] — deterministic CSV serialization

pub mod airframe;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod sim;
pub mod supervisor;
pub mod synthesis;
pub mod telemetry;

pub use airframe::{AeroPolar, AircraftConfig, Environment, PolarPoint};
pub use config::{parse_config, LoadedConfig, RunConfig};
pub use control::{saturate, LqrLaw, Pid, WindupMode};
pub use dynamics::{ControlInput, FlightState, StateDerivative, TetherConfig};
pub use error::{ConfigError, DynamicsError, SimError, SynthesisError, TelemetryError};
pub use sim::{Models, SimSettings, TelemetryRecord};
pub use supervisor::{run_scenario, Phase, ScenarioOutcome, ScenarioSpec};
pub use synthesis::{LinearModel, LqrDesign, OperatingPoint};
