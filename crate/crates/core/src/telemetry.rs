//! Deterministic CSV serialization of telemetry and phase logs.
//!
//! The column set and order are frozen; numbers are written in Rust's
//! shortest round-trip decimal form, so identical runs produce
//! byte-identical files.

use std::io::Write;

use crate::error::TelemetryError;
use crate::sim::TelemetryRecord;
use crate::supervisor::PhaseInterval;

/// Frozen telemetry header.
pub const TELEMETRY_HEADER: &str =
    "t,phase,phi_deg,beta_deg,h,va,gamma_deg,theta_deg,alpha_deg,fp,omega_q_degs,fl,fd,ft,grounded";

/// Frozen phase-log header.
pub const PHASE_LOG_HEADER: &str = "phase,entry_t,exit_t";

fn format_row(r: &TelemetryRecord, out: &mut String) {
    use std::fmt::Write as _;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.t,
        r.phase,
        r.azimuth_deg,
        r.elevation_deg,
        r.height,
        r.airspeed,
        r.flight_path_deg,
        r.pitch_deg,
        r.alpha_deg,
        r.thrust,
        r.pitch_rate_degs,
        r.lift,
        r.drag,
        r.tension,
        u8::from(r.grounded),
    );
}

/// Render records to the frozen CSV form. Refuses an empty stream.
pub fn format_telemetry(records: &[TelemetryRecord]) -> Result<String, TelemetryError> {
    if records.is_empty() {
        return Err(TelemetryError::Empty);
    }
    let mut out = String::with_capacity(records.len() * 96 + TELEMETRY_HEADER.len() + 1);
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for r in records {
        format_row(r, &mut out);
    }
    Ok(out)
}

/// Write records as CSV; returns the byte count written.
pub fn write_telemetry(
    records: &[TelemetryRecord],
    dest: &mut impl Write,
) -> Result<u64, TelemetryError> {
    let text = format_telemetry(records)?;
    dest.write_all(text.as_bytes())?;
    Ok(text.len() as u64)
}

/// Render the phase log; an open interval leaves the exit column empty.
pub fn format_phase_log(log: &[PhaseInterval]) -> String {
    let mut out = String::from(PHASE_LOG_HEADER);
    out.push('\n');
    for e in log {
        match e.exit_time {
            Some(x) => out.push_str(&format!("{},{},{}\n", e.phase, e.entry_time, x)),
            None => out.push_str(&format!("{},{},\n", e.phase, e.entry_time)),
        }
    }
    out
}
