//! Layered configuration: command-line flags over a `key=value` file over a
//! previous report, with defaults filling whatever is left.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use bbmtail::engine::DEFAULT_MAX_PARTICLES;
use bbmtail::RateInput;

use crate::args::{CommandName, EventChoice, Flags, FloatList, Format, MethodChoice, Overrides};
use crate::error::CliError;

/// Fully resolved campaign configuration, recorded verbatim in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub command: CommandName,
    pub beta: f64,
    pub dim: usize,
    pub theta: f64,
    pub a: f64,
    pub radius: f64,
    pub center: Vec<f64>,
    pub event: EventChoice,
    pub t: f64,
    pub t_grid: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
    /// `None` selects the optimal suppression fraction.
    pub rho: Option<f64>,
    pub method: MethodChoice,
    pub out: Option<String>,
    pub format: Format,
    pub max_particles: u64,
    pub theta_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
}

/// A resolved configuration plus the names of the keys that took defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: CampaignConfig,
    pub defaulted: Vec<&'static str>,
}

pub const KEYS: [&str; 18] = [
    "beta",
    "dim",
    "theta",
    "a",
    "radius",
    "center",
    "event",
    "t",
    "t_grid",
    "replicas",
    "seed",
    "rho",
    "method",
    "out",
    "format",
    "max_particles",
    "theta_grid",
    "a_grid",
];

fn default_grid() -> Vec<f64> {
    (0..20).map(|k| k as f64 / 20.0).collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| format!("key '{key}': malformed value '{}'", value.trim()))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, String> {
    T::from_str(value.trim(), true).map_err(|_| {
        let names: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        format!(
            "key '{key}': '{}' is not one of {}",
            value.trim(),
            names.join(", ")
        )
    })
}

fn parse_list(key: &str, value: &str) -> Result<FloatList, String> {
    value.parse::<FloatList>().map_err(|e| format!("key '{key}': {e}"))
}

fn set_key(o: &mut Overrides, key: &str, value: &str) -> Result<(), String> {
    match key {
        "beta" => o.beta = Some(parse_value(key, value)?),
        "dim" => o.dim = Some(parse_value(key, value)?),
        "theta" => o.theta = Some(parse_value(key, value)?),
        "a" => o.a = Some(parse_value(key, value)?),
        "radius" => o.radius = Some(parse_value(key, value)?),
        "center" => o.center = Some(parse_list(key, value)?),
        "event" => o.event = Some(parse_enum(key, value)?),
        "t" => o.t = Some(parse_value(key, value)?),
        "t_grid" => o.t_grid = Some(parse_list(key, value)?),
        "replicas" => o.replicas = Some(parse_value(key, value)?),
        "seed" => o.seed = Some(parse_value(key, value)?),
        "rho" => o.rho = Some(parse_value(key, value)?),
        "method" => o.method = Some(parse_enum(key, value)?),
        "out" => o.out = Some(value.trim().to_string()),
        "format" => o.format = Some(parse_enum(key, value)?),
        "max_particles" => o.max_particles = Some(parse_value(key, value)?),
        "theta_grid" => o.theta_grid = Some(parse_list(key, value)?),
        "a_grid" => o.a_grid = Some(parse_list(key, value)?),
        other => {
            return Err(format!(
                "unknown key '{other}' (expected one of: {})",
                KEYS.join(", ")
            ))
        }
    }
    Ok(())
}

/// Parse a flat `key=value` file. `#` starts a comment; keys may use `-` or `_`.
pub fn parse_config_text(text: &str, source_name: &str) -> Result<Overrides, CliError> {
    let mut out = Overrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let fail = |message: String| CliError::Config {
            source_name: source_name.to_string(),
            line: Some(idx + 1),
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(format!("expected key=value, found '{line}'")));
        };
        let key = key.trim().replace('-', "_");
        set_key(&mut out, &key, value).map_err(fail)?;
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Configuration recorded under `config` in a JSON report. The output
/// location is not inherited, so a re-run never overwrites the original.
pub fn overrides_from_report(path: &Path, command: CommandName) -> Result<Overrides, CliError> {
    let text = read_text(path)?;
    let fail = |message: String| CliError::Config {
        source_name: path.display().to_string(),
        line: None,
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| fail(format!("not a JSON report: {e}")))?;
    let cfg: CampaignConfig = serde_json::from_value(value["config"].clone())
        .map_err(|e| fail(format!("report has no usable 'config': {e}")))?;
    if cfg.command != command {
        return Err(fail(format!(
            "report was written by '{}', not '{}'",
            cfg.command.as_str(),
            command.as_str()
        )));
    }
    Ok(Overrides {
        beta: Some(cfg.beta),
        dim: Some(cfg.dim),
        theta: Some(cfg.theta),
        a: Some(cfg.a),
        radius: Some(cfg.radius),
        center: Some(FloatList(cfg.center)),
        event: Some(cfg.event),
        t: Some(cfg.t),
        t_grid: Some(FloatList(cfg.t_grid)),
        replicas: Some(cfg.replicas),
        seed: Some(cfg.seed),
        rho: cfg.rho,
        method: Some(cfg.method),
        out: None,
        format: Some(cfg.format),
        max_particles: Some(cfg.max_particles),
        theta_grid: Some(FloatList(cfg.theta_grid)),
        a_grid: Some(FloatList(cfg.a_grid)),
    })
}

/// Layer the sources named in `flags`, fill defaults and validate.
pub fn parse_config(command: CommandName, flags: &Flags) -> Result<Resolved, CliError> {
    let mut layered = flags.values.clone();
    if let Some(path) = &flags.config {
        let file = parse_config_text(&read_text(path)?, &path.display().to_string())?;
        layered = layered.or(file);
    }
    if let Some(path) = &flags.from_report {
        layered = layered.or(overrides_from_report(path, command)?);
    }
    if flags.threads == Some(0) {
        return Err(CliError::config("threads must be at least 1"));
    }
    resolve(command, layered)
}

/// Fill defaults and validate.
pub fn resolve(command: CommandName, o: Overrides) -> Result<Resolved, CliError> {
    let mut defaulted = Vec::new();
    macro_rules! take {
        ($field:ident, $default:expr) => {
            match o.$field {
                Some(v) => v,
                None => {
                    defaulted.push(stringify!($field));
                    $default
                }
            }
        };
    }
    let beta = take!(beta, 1.0);
    let dim = take!(dim, 1);
    let theta = take!(theta, 0.0);
    let a = take!(a, 0.0);
    let radius = take!(radius, 1.0);
    let center = take!(center, FloatList(vec![0.0; dim])).0;
    let event = take!(event, EventChoice::Empty);
    let t = take!(t, 1.0);
    let t_grid = take!(t_grid, FloatList((2..=8).map(f64::from).collect())).0;
    let replicas = take!(replicas, if command == CommandName::Simulate { 1 } else { 10_000 });
    let seed = take!(seed, 1);
    if o.rho.is_none() {
        defaulted.push("rho");
    }
    let method = take!(method, MethodChoice::Both);
    let out = match o.out {
        Some(v) => Some(v),
        None => {
            defaulted.push("out");
            matches!(command, CommandName::Simulate | CommandName::Estimate)
                .then(|| command.as_str().to_string())
        }
    };
    let format = take!(format, Format::Csv);
    let max_particles = take!(max_particles, DEFAULT_MAX_PARTICLES);
    let theta_grid = take!(theta_grid, FloatList(default_grid())).0;
    let a_grid = take!(a_grid, FloatList(default_grid())).0;

    let config = CampaignConfig {
        command,
        beta,
        dim,
        theta,
        a,
        radius,
        center,
        event,
        t,
        t_grid,
        replicas,
        seed,
        rho: o.rho,
        method,
        out,
        format,
        max_particles,
        theta_grid,
        a_grid,
    };
    config.validate()?;
    Ok(Resolved { config, defaulted })
}

fn domain(msg: String) -> CliError {
    CliError::Core(bbmtail::Error::Domain(msg))
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(domain(format!("beta = {} must be > 0", self.beta)));
        }
        if self.dim == 0 {
            return Err(domain("dim must be at least 1".into()));
        }
        if self.center.len() != self.dim {
            return Err(CliError::config(format!(
                "center has {} coordinates but dim = {}",
                self.center.len(),
                self.dim
            )));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(domain(format!("radius = {} must be > 0", self.radius)));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(domain(format!("t = {} must be >= 0", self.t)));
        }
        if self.replicas == 0 {
            return Err(domain("replicas must be at least 1".into()));
        }
        if self.max_particles == 0 {
            return Err(domain("max_particles must be at least 1".into()));
        }
        match self.command {
            CommandName::Rate => {
                RateInput::new(self.theta, self.a, self.beta)?;
            }
            CommandName::Table => {
                if self.theta_grid.is_empty() || self.a_grid.is_empty() {
                    return Err(CliError::config("theta_grid and a_grid must be non-empty"));
                }
            }
            CommandName::Estimate => self.validate_campaign()?,
            _ => {}
        }
        Ok(())
    }

    fn validate_campaign(&self) -> Result<(), CliError> {
        RateInput::new(self.theta, self.a, self.beta)?;
        if self.event == EventChoice::Empty && self.a != 0.0 {
            return Err(CliError::config(format!(
                "a = {} has no effect on the 'empty' event; use --event inside or outside",
                self.a
            )));
        }
        if self.t_grid.is_empty() {
            return Err(CliError::config("t_grid must contain at least one time"));
        }
        if let Some(bad) = self.t_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(domain(format!("t_grid entry {bad} must be finite and >= 0")));
        }
        if let Some(w) = self.t_grid.windows(2).find(|w| w[1] <= w[0]) {
            return Err(CliError::config(format!(
                "t_grid must be strictly increasing ({} is followed by {})",
                w[0], w[1]
            )));
        }
        Ok(())
    }
}
