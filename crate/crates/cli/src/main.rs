//! Command-line runner: full scenario execution, design dumps, envelope
//! grids, and parameter sweeps, all emitting deterministic plain-text
//! artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 synthesis error,
//! 4 scenario timeout.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ctol_core::config::{parse_config, LoadedConfig, DEFAULT_CONFIG_TOML};
use ctol_core::envelope::{beta_max, EnvelopeQuery, LevelSpeed};
use ctol_core::error::{ConfigError, SynthesisError};
use ctol_core::supervisor::{
    run_scenario_with_designs, synthesize_designs, Phase, ScenarioError, ScenarioExit,
    ScenarioOutcome,
};
use ctol_core::telemetry::{format_phase_log, format_telemetry};

const EXIT_CONFIG: i32 = 2;
const EXIT_SYNTHESIS: i32 = 3;
const EXIT_TIMEOUT: i32 = 4;

#[derive(Parser)]
#[command(
    name = "ctol",
    about = "Circular take-off and landing simulator for a tethered motorized aircraft",
    version
)]
struct Cli {
    /// Configuration file; the built-in default configuration is used when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the integration step [s].
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the landing command time [s].
    #[arg(long = "land-at", global = true)]
    land_at: Option<f64>,
    /// Run the built-in invariant suite and exit.
    #[arg(long = "seed-check", global = true, default_value_t = false)]
    seed_check: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full take-off/loiter/landing scenario and write telemetry.
    Run,
    /// Dump the operating points, linear models, gains, Riccati solutions,
    /// and closed-loop eigenvalues of the LQR phases.
    Linearize,
    /// Emit the attainable-elevation bound and level-speed grids.
    Envelope {
        /// Angles-of-attack to evaluate, degrees, comma separated.
        #[arg(long, default_value = "0,9")]
        alpha_deg: String,
        #[arg(long, default_value_t = 0.6)]
        r_min: f64,
        #[arg(long, default_value_t = 6.0)]
        r_max: f64,
        #[arg(long, default_value_t = 28)]
        r_count: usize,
        #[arg(long, default_value_t = 30.0)]
        beta_max_deg: f64,
        #[arg(long, default_value_t = 121)]
        beta_count: usize,
        /// Thrust assist included in the balance [N].
        #[arg(long, default_value_t = 0.0)]
        thrust: f64,
    },
    /// Re-run the scenario over a grid of values for one numeric config key.
    Sweep {
        /// Dotted config key, e.g. tether.length_m.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
}

enum CliError {
    Config(ConfigError),
    Synthesis(SynthesisError),
    Timeout(Phase),
    Io(std::io::Error),
    Usage(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Synthesis(_) => EXIT_SYNTHESIS,
            CliError::Timeout(_) => EXIT_TIMEOUT,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Synthesis(e) => write!(f, "{e}"),
            CliError::Timeout(p) => write!(f, "scenario timed out with phase {p} still active"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        CliError::Synthesis(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Synthesis(s) => CliError::Synthesis(s),
            ScenarioError::Config(c) => CliError::Config(c),
            ScenarioError::Sim(s) => CliError::Usage(format!("simulation failed: {s}")),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    }
}

fn load(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)?,
        None => DEFAULT_CONFIG_TOML.to_string(),
    };
    let mut loaded = parse_config(&text)?;
    for n in &loaded.notices {
        eprintln!("notice: {n}");
    }
    if let Some(dt) = cli.dt {
        loaded.run.sim.dt = dt;
        loaded.run.sim.event_tolerance = loaded.run.sim.event_tolerance.min(dt);
        loaded
            .run
            .sim
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(land) = cli.land_at {
        loaded.run.scenario.land_at = land;
        loaded
            .run
            .scenario
            .validate()
            .map_err(|(k, r)| CliError::Usage(format!("scenario.{k}: {r}")))?;
    }
    Ok(loaded)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.seed_check {
        return seed_check();
    }
    match &cli.command {
        None => Err(CliError::Usage(
            "a subcommand is required (run, linearize, envelope, sweep); see --help".into(),
        )),
        Some(Command::Run) => cmd_run(&cli),
        Some(Command::Linearize) => cmd_linearize(&cli),
        Some(Command::Envelope {
            alpha_deg,
            r_min,
            r_max,
            r_count,
            beta_max_deg,
            beta_count,
            thrust,
        }) => cmd_envelope(
            &cli,
            alpha_deg,
            *r_min,
            *r_max,
            *r_count,
            *beta_max_deg,
            *beta_count,
            *thrust,
        ),
        Some(Command::Sweep { key, values }) => cmd_sweep(&cli, key, values),
    }
}

fn write_outcome(dir: &Path, outcome: &ScenarioOutcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let telemetry =
        format_telemetry(&outcome.telemetry).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(dir.join("telemetry.csv"), telemetry)?;
    fs::write(
        dir.join("phase_log.csv"),
        format_phase_log(&outcome.phase_log),
    )?;
    Ok(())
}

fn print_summary(outcome: &ScenarioOutcome) {
    println!("phase log:");
    for e in &outcome.phase_log {
        match e.exit_time {
            Some(x) => println!(
                "  {:>14}  {:>8.3} -> {:>8.3} s  ({:.3} s)",
                e.phase.name(),
                e.entry_time,
                x,
                x - e.entry_time
            ),
            None => println!(
                "  {:>14}  {:>8.3} -> (active)",
                e.phase.name(),
                e.entry_time
            ),
        }
    }
    println!("telemetry records: {}", outcome.telemetry.len());
    println!("slack-tether records: {}", outcome.slack_tether_records);
}

fn cmd_run(cli: &Cli) -> Result<(), CliError> {
    let loaded = load(cli)?;
    let designs = synthesize_designs(&loaded.run)?;
    let outcome = run_scenario_with_designs(&loaded.run, &designs)?;
    write_outcome(&cli.out, &outcome)?;
    print_summary(&outcome);
    match outcome.exit {
        ScenarioExit::Completed { final_time } => {
            println!("completed at t = {final_time:.3} s");
            println!("wrote {}", cli.out.join("telemetry.csv").display());
            Ok(())
        }
        ScenarioExit::TimedOut { phase } => Err(CliError::Timeout(phase)),
    }
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_linearize(cli: &Cli) -> Result<(), CliError> {
    let loaded = load(cli)?;
    let designs = synthesize_designs(&loaded.run)?;
    let mut text = String::new();
    text.push_str("# LQR design dump\n");
    text.push_str("# state order: beta [rad], va [m/s], gamma [rad], theta [rad]\n");
    text.push_str("# control order: thrust [N], pitch_rate [rad/s]\n");
    text.push_str("# matrices printed row by row, space separated\n");
    for (phase, design) in [
        (Phase::P3, &designs.climb),
        (Phase::P4, &designs.loiter),
        (Phase::P6, &designs.glide),
    ] {
        let op = &design.operating_point;
        text.push_str(&format!("\nphase: {phase}\n"));
        text.push_str(&format!(
            "x_ref: {}\nu_ref: {}\n",
            fmt_row(op.state),
            fmt_row(op.control)
        ));
        text.push_str(&format!("trim_residual: {:e}\n", op.residual));
        text.push_str(&format!("exact_trim: {}\n", op.is_exact()));
        text.push_str(&format!("thrust_saturated: {}\n", op.thrust_saturated));
        if let Some(demand) = op.balancing_thrust_demand {
            text.push_str(&format!("path_balance_thrust_demand: {demand}\n"));
        }
        for i in 0..4 {
            text.push_str(&format!(
                "A[{i}]: {}\n",
                fmt_row((0..4).map(|j| design.model.a[(i, j)]))
            ));
        }
        for i in 0..4 {
            text.push_str(&format!(
                "B[{i}]: {}\n",
                fmt_row((0..2).map(|j| design.model.b[(i, j)]))
            ));
        }
        text.push_str(&format!("Q_diag: {}\n", fmt_row(design.state_weights)));
        text.push_str(&format!("R_diag: {}\n", fmt_row(design.control_weights)));
        for i in 0..2 {
            text.push_str(&format!(
                "K[{i}]: {}\n",
                fmt_row((0..4).map(|j| design.gain[(i, j)]))
            ));
        }
        for i in 0..4 {
            text.push_str(&format!(
                "P[{i}]: {}\n",
                fmt_row((0..4).map(|j| design.riccati[(i, j)]))
            ));
        }
        let eigs = design
            .closed_loop_eigenvalues
            .iter()
            .map(|e| format!("{}{:+}i", e.re, e.im))
            .collect::<Vec<_>>()
            .join(" ");
        text.push_str(&format!("closed_loop_eigenvalues: {eigs}\n"));
        text.push_str(&format!("care_residual: {:e}\n", design.care_residual));
    }
    print!("{text}");
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join("designs.txt"), text)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_envelope(
    cli: &Cli,
    alpha_deg: &str,
    r_min: f64,
    r_max: f64,
    r_count: usize,
    beta_top_deg: f64,
    beta_count: usize,
    thrust: f64,
) -> Result<(), CliError> {
    let loaded = load(cli)?;
    let cfg = &loaded.run;
    let alphas: Vec<f64> = alpha_deg
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map(f64::to_radians)
                .map_err(|e| CliError::Usage(format!("bad alpha list entry {s:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if r_count < 2 || beta_count < 2 {
        return Err(CliError::Usage(
            "r_count and beta_count must be at least 2".into(),
        ));
    }
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    };
    let query = EnvelopeQuery {
        tether_lengths: grid(r_min, r_max, r_count),
        elevations: grid(0.0, beta_top_deg.to_radians(), beta_count),
        alphas: alphas.clone(),
        assist_thrust: thrust,
    };
    query
        .validate()
        .map_err(|(k, r)| CliError::Usage(format!("envelope {k}: {r}")))?;
    fs::create_dir_all(&cli.out)?;

    // Attainable-elevation bound per alpha over the radius grid.
    let mut bound = String::from("alpha_deg,r,beta_max_deg\n");
    for &alpha in &alphas {
        for &r in &query.tether_lengths {
            let b = beta_max(&cfg.aircraft, &cfg.env, &cfg.polar, alpha, r)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            bound.push_str(&format!(
                "{},{},{}\n",
                alpha.to_degrees(),
                r,
                b.to_degrees()
            ));
        }
    }
    fs::write(cli.out.join("beta_max.csv"), bound)?;

    // Level-speed grid, one file per alpha.
    for &alpha in &alphas {
        let points = query
            .evaluate(&cfg.aircraft, &cfg.env, &cfg.polar, alpha)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut text = String::from("r,beta_deg,va,feasible\n");
        for p in points {
            match p.level {
                LevelSpeed::Feasible(v) => text.push_str(&format!(
                    "{},{},{},1\n",
                    p.tether_length,
                    p.beta.to_degrees(),
                    v
                )),
                LevelSpeed::Infeasible => {
                    text.push_str(&format!("{},{},,0\n", p.tether_length, p.beta.to_degrees()))
                }
            }
        }
        let tag = format!("{:.2}", alpha.to_degrees()).replace('.', "p").replace('-', "m");
        let path = cli.out.join(format!("level_speed_alpha_{tag}.csv"));
        fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    println!("wrote {}", cli.out.join("beta_max.csv").display());
    Ok(())
}

fn set_numeric_key(doc: &mut toml::Value, key: &str, value: f64) -> Result<(), CliError> {
    let mut cursor = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        // Numeric path segments index into arrays (e.g. aero.polar.2.cd).
        let slot: Option<&mut toml::Value> = match (part.parse::<usize>(), &mut *cursor) {
            (Ok(idx), toml::Value::Array(items)) => items.get_mut(idx),
            (_, toml::Value::Table(table)) => table.get_mut(*part),
            _ => {
                return Err(CliError::Usage(format!(
                    "config key `{key}`: `{part}` does not address a table or array"
                )))
            }
        };
        let Some(slot) = slot else {
            return Err(CliError::Usage(format!(
                "config key `{key}`: `{part}` not found"
            )));
        };
        if last {
            return match slot {
                toml::Value::Float(_) | toml::Value::Integer(_) => {
                    *slot = toml::Value::Float(value);
                    Ok(())
                }
                _ => Err(CliError::Usage(format!(
                    "config key `{key}` is not numeric"
                ))),
            };
        }
        cursor = slot;
    }
    Err(CliError::Usage("sweep key must be non-empty".into()))
}

fn cmd_sweep(cli: &Cli, key: &str, values: &str) -> Result<(), CliError> {
    if key.is_empty() {
        return Err(CliError::Usage("sweep key must be non-empty".into()));
    }
    let base_text = match &cli.config {
        Some(path) => fs::read_to_string(path)?,
        None => DEFAULT_CONFIG_TOML.to_string(),
    };
    let values: Vec<f64> = values
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad sweep value {s:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }

    // Validate every grid point up front so a typo fails fast.
    let mut jobs = Vec::new();
    for &v in &values {
        let mut doc: toml::Value = base_text
            .parse()
            .map_err(|e| CliError::Usage(format!("config parse failed: {e}")))?;
        set_numeric_key(&mut doc, key, v)?;
        let text = toml::to_string(&doc).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut loaded = parse_config(&text)?;
        if let Some(dt) = cli.dt {
            loaded.run.sim.dt = dt;
            loaded.run.sim.event_tolerance = loaded.run.sim.event_tolerance.min(dt);
        }
        if let Some(land) = cli.land_at {
            loaded.run.scenario.land_at = land;
        }
        jobs.push((v, loaded.run));
    }

    // Each worker owns its full model stack and writes only its own files.
    let results: Vec<(f64, Result<ScenarioOutcome, String>)> = jobs
        .into_par_iter()
        .map(|(v, run)| {
            let outcome = synthesize_designs(&run)
                .map_err(|e| e.to_string())
                .and_then(|designs| {
                    run_scenario_with_designs(&run, &designs).map_err(|e| e.to_string())
                });
            (v, outcome)
        })
        .collect();

    fs::create_dir_all(&cli.out)?;
    let key_tag: String = key.replace('.', "_");
    let mut summary = String::from("value,exit,final_phase,end_time,records\n");
    let mut failed = false;
    for (v, res) in &results {
        match res {
            Ok(outcome) => {
                let dir = cli.out.join(format!("sweep_{key_tag}_{v}"));
                write_outcome(&dir, outcome)?;
                let (exit, phase, end) = match outcome.exit {
                    ScenarioExit::Completed { final_time } => {
                        ("completed", Phase::Rest, final_time)
                    }
                    ScenarioExit::TimedOut { phase } => ("timeout", phase, f64::NAN),
                };
                summary.push_str(&format!(
                    "{v},{exit},{phase},{end},{}\n",
                    outcome.telemetry.len()
                ));
            }
            Err(msg) => {
                failed = true;
                summary.push_str(&format!("{v},error,,,\n"));
                eprintln!("sweep point {key} = {v} failed: {msg}");
            }
        }
    }
    fs::write(
        cli.out.join(format!("sweep_{key_tag}_summary.csv")),
        summary,
    )?;
    println!("swept {} over {} points", key, results.len());
    if failed {
        return Err(CliError::Usage("one or more sweep points failed".into()));
    }
    Ok(())
}

fn seed_check() -> Result<(), CliError> {
    use ctol_core::control::saturate;
    use ctol_core::dynamics::{
        beta_to_height, height_to_beta, rhs_airborne, ControlInput, FlightState,
    };

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{}  {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let loaded = parse_config(DEFAULT_CONFIG_TOML)?;
    let cfg = loaded.run;
    check(
        "default configuration loads with zero notices",
        loaded.notices.is_empty(),
    );

    let mut sat_ok = true;
    for t in [-1.0, 0.0, 0.7, 1.5, 3.0] {
        for w in [-1.0, -0.3, 0.0, 0.3, 1.0] {
            let once = saturate(
                ControlInput {
                    thrust: t,
                    pitch_rate: w,
                },
                &cfg.aircraft,
            );
            let twice = saturate(once, &cfg.aircraft);
            sat_ok &= once == twice
                && (cfg.aircraft.thrust_min..=cfg.aircraft.thrust_max).contains(&once.thrust)
                && once.pitch_rate.abs() <= cfg.aircraft.pitch_rate_limit;
        }
    }
    check("saturation clamps and is idempotent", sat_ok);

    let mut geo_ok = true;
    for k in 0..=90 {
        let beta = (k as f64).to_radians().min(std::f64::consts::FRAC_PI_2);
        let h = beta_to_height(beta, &cfg.tether).unwrap();
        geo_ok &= (height_to_beta(h, &cfg.tether).unwrap() - beta).abs() <= 1e-12;
    }
    check("elevation/height geometry round-trips", geo_ok);

    let mut energy_ok = true;
    for k in 1..200 {
        let state = FlightState {
            azimuth: 0.0,
            elevation: 0.002 * k as f64,
            airspeed: 6.0 + 0.02 * k as f64,
            flight_path: -0.05 + 0.0005 * k as f64,
            pitch: 0.01 * (k % 12) as f64,
            grounded: false,
        };
        let control = ControlInput {
            thrust: 0.01 * (k % 150) as f64,
            pitch_rate: 0.0,
        };
        let dot = rhs_airborne(
            &state,
            &control,
            &cfg.aircraft,
            &cfg.env,
            &cfg.polar,
            &cfg.tether,
        )
        .unwrap();
        let (_, drag) = ctol_core::airframe::aero_forces(
            &cfg.aircraft,
            &cfg.env,
            &cfg.polar,
            state.airspeed,
            state.alpha(),
        )
        .unwrap();
        let h_rate = cfg.tether.length * dot.elevation_rate * state.elevation.cos();
        let residual = cfg.aircraft.mass * state.airspeed * dot.airspeed_rate
            + cfg.aircraft.mass * cfg.env.gravity * h_rate
            - state.airspeed * (control.thrust * state.alpha().cos() - drag);
        energy_ok &= residual.abs()
            <= 1e-9 * (cfg.aircraft.mass * cfg.env.gravity * state.airspeed).max(1.0);
    }
    check("pointwise energy identity holds on a state grid", energy_ok);

    match synthesize_designs(&cfg) {
        Ok(designs) => {
            let mut cert_ok = true;
            for d in [&designs.climb, &designs.loiter, &designs.glide] {
                cert_ok &= d.care_residual <= 1e-8;
                cert_ok &= d.closed_loop_eigenvalues.iter().all(|e| e.re < 0.0);
            }
            check("LQR certificates (residual, stability) hold", cert_ok);
        }
        Err(e) => {
            check(&format!("LQR synthesis ({e})"), false);
        }
    }

    if failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{failures} invariant checks failed"
        )))
    }
}
