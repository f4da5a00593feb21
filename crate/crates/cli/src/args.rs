use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bbmtail::export::round_sig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "bbmtail", version, about = "Lower-tail large deviations of branching Brownian motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the minimizer, the infimum and the decay rate for one (theta, a).
    Rate(Flags),
    /// Tabulate the rate over a grid of (theta, a).
    Table(Flags),
    /// Simulate replicas and export particle snapshots.
    Simulate(Flags),
    /// Print the expected local mass of a ball.
    Expect(Flags),
    /// Estimate an event probability over a time grid and fit its decay.
    Estimate(Flags),
    /// Run the invariant suites.
    Validate(Flags),
}

impl Command {
    pub fn name(&self) -> CommandName {
        match self {
            Command::Rate(_) => CommandName::Rate,
            Command::Table(_) => CommandName::Table,
            Command::Simulate(_) => CommandName::Simulate,
            Command::Expect(_) => CommandName::Expect,
            Command::Estimate(_) => CommandName::Estimate,
            Command::Validate(_) => CommandName::Validate,
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Rate(f)
            | Command::Table(f)
            | Command::Simulate(f)
            | Command::Expect(f)
            | Command::Estimate(f)
            | Command::Validate(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Rate,
    Table,
    Simulate,
    Expect,
    Estimate,
    Validate,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::Rate => "rate",
            CommandName::Table => "table",
            CommandName::Simulate => "simulate",
            CommandName::Expect => "expect",
            CommandName::Estimate => "estimate",
            CommandName::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Re-run the configuration recorded in a JSON report.
    #[arg(long, value_name = "PATH")]
    pub from_report: Option<PathBuf>,

    /// Worker threads for replica loops (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub values: Overrides,
}

/// Every configurable value, each optional so that sources can be layered.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    /// Branching rate.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Spatial dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Ball speed in units of sqrt(2 beta).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Lower-tail threshold exponent.
    #[arg(long)]
    pub a: Option<f64>,
    /// Radius of the base ball.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Centre of the base ball, comma separated.
    #[arg(long, value_name = "LIST")]
    pub center: Option<FloatList>,
    /// Event: empty moving ball, too little mass inside it, or nothing outside an expanding ball.
    #[arg(long, value_enum)]
    pub event: Option<EventChoice>,
    /// Time horizon for simulate and expect.
    #[arg(long)]
    pub t: Option<f64>,
    /// Horizons for estimate: a comma list or start:stop:step.
    #[arg(long, value_name = "LIST")]
    pub t_grid: Option<FloatList>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Branch-suppression fraction for the importance sampler (default: optimal).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Output path (table) or file stem (simulate, estimate).
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub max_particles: Option<u64>,
    /// Theta values for table.
    #[arg(long, value_name = "LIST")]
    pub theta_grid: Option<FloatList>,
    /// Values of a for table.
    #[arg(long, value_name = "LIST")]
    pub a_grid: Option<FloatList>,
}

impl Overrides {
    /// Field-wise `self` if set, otherwise `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            beta: self.beta.or(other.beta),
            dim: self.dim.or(other.dim),
            theta: self.theta.or(other.theta),
            a: self.a.or(other.a),
            radius: self.radius.or(other.radius),
            center: self.center.or(other.center),
            event: self.event.or(other.event),
            t: self.t.or(other.t),
            t_grid: self.t_grid.or(other.t_grid),
            replicas: self.replicas.or(other.replicas),
            seed: self.seed.or(other.seed),
            rho: self.rho.or(other.rho),
            method: self.method.or(other.method),
            out: self.out.or(other.out),
            format: self.format.or(other.format),
            max_particles: self.max_particles.or(other.max_particles),
            theta_grid: self.theta_grid.or(other.theta_grid),
            a_grid: self.a_grid.or(other.a_grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventChoice {
    Empty,
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Naive,
    Importance,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Comma-separated floats, or an inclusive `start:stop:step` range.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn parse_number(token: &str) -> Result<f64, String> {
    let token = token.trim();
    token
        .parse::<f64>()
        .map_err(|_| format!("malformed number '{token}'"))
}

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(FloatList(Vec::new()));
        }
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [start, stop, step] = parts[..] else {
                return Err(format!("range '{s}' must have the form start:stop:step"));
            };
            let (start, stop, step) = (parse_number(start)?, parse_number(stop)?, parse_number(step)?);
            if !(step > 0.0 && step.is_finite()) {
                return Err(format!("range step {step} must be > 0"));
            }
            let count = ((stop - start) / step + 1e-9).floor();
            if !(0.0..1e6).contains(&count) {
                return Err(format!("range '{s}' is empty or too long"));
            }
            return Ok(FloatList(
                (0..=count as usize)
                    .map(|k| round_sig(start + k as f64 * step))
                    .collect(),
            ));
        }
        s.split(',').map(parse_number).collect::<Result<_, _>>().map(FloatList)
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_lists() {
        assert_eq!("1, 2.5,3e-1".parse::<FloatList>().unwrap().0, vec![1.0, 2.5, 0.3]);
        assert_eq!("2:8:2".parse::<FloatList>().unwrap().0, vec![2.0, 4.0, 6.0, 8.0]);
        let grid = "0:0.95:0.05".parse::<FloatList>().unwrap().0;
        assert_eq!(grid.len(), 20);
        assert_eq!(grid[3], 0.15);
        assert!("".parse::<FloatList>().unwrap().0.is_empty());
        let err = "1,x2".parse::<FloatList>().unwrap_err();
        assert!(err.contains("'x2'"), "{err}");
        assert!("1:2".parse::<FloatList>().is_err());
        assert!("1:2:0".parse::<FloatList>().is_err());
    }

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from([
            "bbmtail", "estimate", "--theta", "0.5", "--t-grid", "2,3,4", "--event", "outside",
            "--max-particles", "100",
        ])
        .unwrap();
        assert_eq!(cli.command.name(), CommandName::Estimate);
        let v = &cli.command.flags().values;
        assert_eq!(v.theta, Some(0.5));
        assert_eq!(v.t_grid.as_ref().unwrap().0, vec![2.0, 3.0, 4.0]);
        assert_eq!(v.event, Some(EventChoice::Outside));
        assert_eq!(v.max_particles, Some(100));
        assert!(Cli::try_parse_from(["bbmtail", "rate", "--beta", "one"]).is_err());
        assert!(Cli::try_parse_from(["bbmtail", "rate", "--bogus", "1"]).is_err());
    }

    #[test]
    fn layering_prefers_the_first_source() {
        let top = Overrides {
            beta: Some(2.0),
            ..Default::default()
        };
        let bottom = Overrides {
            beta: Some(1.0),
            dim: Some(3),
            ..Default::default()
        };
        let merged = top.or(bottom);
        assert_eq!(merged.beta, Some(2.0));
        assert_eq!(merged.dim, Some(3));
    }
}
