//! CSV and JSON serializations of tables, snapshots and estimate campaigns.
//!
//! Every floating-point field is written with 15 significant digits.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::engine::{support_radius, ParticleSnapshot};
use crate::error::Result;
use crate::rare_event::EstimateResult;
use crate::rate::RateRow;

/// Placeholder written in numeric columns of rows outside the parameter domain.
pub const DOMAIN_MARKER: &str = "domain_error";

/// Format like C's `%.15g`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Round to 15 significant digits, for embedding in JSON as a number.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn write_rate_table_csv<W: Write>(mut out: W, rows: &[RateRow]) -> Result<()> {
    writeln!(out, "theta,a,rho_hat,I,rate")?;
    for row in rows {
        match row.solution {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sig(row.theta),
                fmt_sig(row.a),
                fmt_sig(s.rho_hat),
                fmt_sig(s.infimum),
                fmt_sig(s.infimum * row.beta)
            )?,
            None => writeln!(
                out,
                "{},{},{DOMAIN_MARKER},{DOMAIN_MARKER},{DOMAIN_MARKER}",
                fmt_sig(row.theta),
                fmt_sig(row.a)
            )?,
        }
    }
    Ok(())
}

pub fn rate_table_json(rows: &[RateRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| match row.solution {
                Some(s) => json!({
                    "theta": round_sig(row.theta),
                    "a": round_sig(row.a),
                    "rho_hat": round_sig(s.rho_hat),
                    "I": round_sig(s.infimum),
                    "rate": round_sig(s.infimum * row.beta),
                    "at_boundary": s.at_boundary,
                    "valid": true,
                }),
                None => json!({
                    "theta": round_sig(row.theta),
                    "a": round_sig(row.a),
                    "valid": false,
                    "error": row.error,
                }),
            })
            .collect(),
    )
}

pub fn write_snapshot_csv_header<W: Write>(mut out: W, dim: usize) -> Result<()> {
    write!(out, "replica,time")?;
    for j in 1..=dim {
        write!(out, ",x{j}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// One row per particle, no header.
pub fn write_snapshot_rows<W: Write>(mut out: W, replica: u64, snapshot: &ParticleSnapshot) -> Result<()> {
    let time = fmt_sig(snapshot.time());
    for x in snapshot.positions() {
        write!(out, "{replica},{time}")?;
        for v in x {
            write!(out, ",{}", fmt_sig(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMass {
    pub region: String,
    pub mass: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotSummary {
    pub replica: u64,
    pub time: f64,
    pub n: u64,
    pub m_t: f64,
    pub masses: Vec<RegionMass>,
}

impl SnapshotSummary {
    pub fn new(replica: u64, snapshot: &ParticleSnapshot, masses: Vec<RegionMass>) -> Self {
        Self {
            replica,
            time: round_sig(snapshot.time()),
            n: snapshot.len() as u64,
            m_t: round_sig(support_radius(snapshot)),
            masses,
        }
    }
}

pub fn write_campaign_csv<W: Write>(mut out: W, estimates: &[EstimateResult]) -> Result<()> {
    writeln!(out, "t,method,p_hat,stderr,replicas")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(e.t),
            e.method.as_str(),
            fmt_sig(e.p_hat),
            fmt_sig(e.stderr),
            e.replicas
        )?;
    }
    Ok(())
}
