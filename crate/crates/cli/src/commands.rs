use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;
use serde_json::{json, Value};

use bbmtail::export::{
    fmt_sig, rate_table_json, round_sig, write_campaign_csv, write_rate_table_csv,
    write_snapshot_csv_header, write_snapshot_rows, RegionMass, SnapshotSummary,
};
use bbmtail::gaussian::MeasureMethod;
use bbmtail::rare_event::EventKind;
use bbmtail::rate::{rate_static_ball, rate_empty_moving_ball};
use bbmtail::rng::derive_seed;
use bbmtail::validation::run_all;
use bbmtail::{
    decay_slope, expected_local_mass, importance_lower_bound, local_mass, mass_outside,
    minimize_rate, naive_mc, rate_table, simulate_replica, theory_rate, Ball, EstimateResult,
    EventSpec, McRun, Method, MovingBallSpec, RateInput, SimConfig,
};

use crate::args::{CommandName, EventChoice, Format, MethodChoice};
use crate::config::{CampaignConfig, Resolved};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    NumericMinimizer,
    MonteCarlo,
}

/// A reported number together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub provenance: Provenance,
}

impl Quantity {
    fn new(value: f64, provenance: Provenance) -> Self {
        Self { value, provenance }
    }
}

fn header(resolved: &Resolved) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(resolved.config.command));
    map.insert("config".into(), json!(resolved.config));
    map.insert("defaulted".into(), json!(resolved.defaulted));
    map
}

fn create(path: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn run_command(resolved: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    match resolved.config.command {
        CommandName::Rate => rate(resolved, out),
        CommandName::Table => table(&resolved.config, out),
        CommandName::Simulate => simulate(resolved, out),
        CommandName::Expect => expect(resolved, out),
        CommandName::Estimate => estimate(resolved, out),
        CommandName::Validate => validate(&resolved.config, out),
    }
}

fn rate(resolved: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &resolved.config;
    let input = RateInput::new(cfg.theta, cfg.a, cfg.beta)?;
    let sol = minimize_rate(&input)?;
    let closed = if cfg.theta == 0.0 {
        Some(rate_static_ball(cfg.a, cfg.beta)?)
    } else if cfg.a == 0.0 {
        Some(rate_empty_moving_ball(cfg.theta, cfg.beta)?)
    } else {
        None
    };
    let numeric = Provenance::NumericMinimizer;
    match cfg.format {
        Format::Csv => {
            writeln!(out, "theta = {}", fmt_sig(cfg.theta))?;
            writeln!(out, "a = {}", fmt_sig(cfg.a))?;
            writeln!(out, "beta = {}", fmt_sig(cfg.beta))?;
            writeln!(out, "rho_hat = {}", fmt_sig(sol.rho_hat))?;
            writeln!(out, "I = {}", fmt_sig(sol.infimum))?;
            writeln!(out, "rate = {}", fmt_sig(cfg.beta * sol.infimum))?;
            if let Some(c) = closed {
                writeln!(out, "closed_form_rate = {}", fmt_sig(c))?;
            }
            if sol.at_boundary {
                writeln!(out, "minimum attained at rho_bar")?;
            }
        }
        Format::Json => {
            let mut map = header(resolved);
            map.insert("rho_hat".into(), json!(Quantity::new(round_sig(sol.rho_hat), numeric)));
            map.insert("I".into(), json!(Quantity::new(round_sig(sol.infimum), numeric)));
            map.insert(
                "rate".into(),
                json!(Quantity::new(round_sig(cfg.beta * sol.infimum), numeric)),
            );
            map.insert("at_boundary".into(), json!(sol.at_boundary));
            if let Some(c) = closed {
                map.insert(
                    "closed_form_rate".into(),
                    json!(Quantity::new(round_sig(c), Provenance::ClosedForm)),
                );
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&Value::Object(map))?)?;
        }
    }
    Ok(())
}

fn table(cfg: &CampaignConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = rate_table(&cfg.theta_grid, &cfg.a_grid, cfg.beta);
    let mut sink: Box<dyn Write + '_> = match &cfg.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(out),
    };
    match cfg.format {
        Format::Csv => write_rate_table_csv(&mut sink, &rows)?,
        Format::Json => {
            writeln!(sink, "{}", serde_json::to_string_pretty(&rate_table_json(&rows))?)?
        }
    }
    sink.flush()?;
    Ok(())
}

fn simulate(resolved: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &resolved.config;
    let stem = cfg.out.as_deref().unwrap_or("simulate");
    let sim = SimConfig::new(cfg.beta, cfg.dim, cfg.t)?
        .with_seed(cfg.seed)
        .with_max_particles(cfg.max_particles);
    let ball = Ball::new(cfg.center.clone(), cfg.radius)?;
    let csv_path = format!("{stem}.csv");
    let mut csv = create(&csv_path)?;
    write_snapshot_csv_header(&mut csv, cfg.dim)?;
    let mut summaries = Vec::new();
    for i in 0..cfg.replicas {
        let snap = simulate_replica(&sim, i)?;
        write_snapshot_rows(&mut csv, i, &snap)?;
        let masses = vec![
            RegionMass {
                region: "inside_ball".into(),
                mass: local_mass(&snap, &ball),
            },
            RegionMass {
                region: "outside_radius".into(),
                mass: mass_outside(&snap, cfg.radius),
            },
        ];
        summaries.push(SnapshotSummary::new(i, &snap, masses));
    }
    csv.flush()?;
    let json_path = format!("{stem}.json");
    let mut map = header(resolved);
    map.insert("snapshots".into(), json!(summaries));
    let mut file = create(&json_path)?;
    writeln!(file, "{}", serde_json::to_string_pretty(&Value::Object(map))?)?;
    file.flush()?;
    let total: u64 = summaries.iter().map(|s| s.n).sum();
    writeln!(
        out,
        "{} replicas, {total} particles at t = {}; wrote {csv_path} and {json_path}",
        cfg.replicas,
        fmt_sig(cfg.t)
    )?;
    Ok(())
}

fn measure_provenance(method: MeasureMethod) -> Provenance {
    match method {
        MeasureMethod::ErrorFunction | MeasureMethod::RadialQuadrature => Provenance::ClosedForm,
        MeasureMethod::QuasiMonteCarlo => Provenance::MonteCarlo,
    }
}

fn expect(resolved: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &resolved.config;
    let ball = Ball::new(cfg.center.clone(), cfg.radius)?;
    let m = expected_local_mass(cfg.beta, cfg.t, &ball, cfg.dim)?;
    match cfg.format {
        Format::Csv => {
            writeln!(out, "expected_local_mass = {}", fmt_sig(m.value))?;
            writeln!(out, "error_bound = {}", fmt_sig(m.error_bound))?;
            writeln!(out, "method = {}", json!(m.method).as_str().unwrap_or_default())?;
        }
        Format::Json => {
            let mut map = header(resolved);
            let prov = measure_provenance(m.method);
            map.insert("expected_local_mass".into(), json!(Quantity::new(round_sig(m.value), prov)));
            map.insert("error_bound".into(), json!(Quantity::new(round_sig(m.error_bound), prov)));
            map.insert("method".into(), json!(m.method));
            writeln!(out, "{}", serde_json::to_string_pretty(&Value::Object(map))?)?;
        }
    }
    Ok(())
}

/// The event described by the configuration.
pub fn event_spec(cfg: &CampaignConfig) -> Result<EventSpec, CliError> {
    let moving = || -> Result<MovingBallSpec, CliError> {
        let base = Ball::new(cfg.center.clone(), cfg.radius)?;
        Ok(MovingBallSpec::new(base, cfg.theta, cfg.beta, None)?)
    };
    Ok(match cfg.event {
        EventChoice::Empty => EventSpec::empty(moving()?),
        EventChoice::Inside => EventSpec::inside(moving()?, cfg.a)?,
        EventChoice::Outside => EventSpec::outside(cfg.theta, cfg.a)?,
    })
}

fn methods(choice: MethodChoice) -> &'static [Method] {
    match choice {
        MethodChoice::Naive => &[Method::Naive],
        MethodChoice::Importance => &[Method::ImportanceLowerBound],
        MethodChoice::Both => &[Method::Naive, Method::ImportanceLowerBound],
    }
}

/// Seed of one campaign cell; depends only on the master seed, the time and
/// the method, so adding grid points leaves other cells unchanged.
pub fn cell_seed(master: u64, t: f64, method: Method) -> u64 {
    let label = match method {
        Method::Naive => 0,
        Method::ImportanceLowerBound => 1,
    };
    derive_seed(derive_seed(master, t.to_bits()), label)
}

/// Run both estimators over the time grid.
pub fn run_campaign(cfg: &CampaignConfig, spec: &EventSpec) -> Result<Vec<EstimateResult>, CliError> {
    let mut estimates = Vec::new();
    for &t in &cfg.t_grid {
        for &method in methods(cfg.method) {
            let run = McRun {
                max_particles: cfg.max_particles,
                ..McRun::new(cfg.beta, cfg.dim, t, cfg.replicas, cell_seed(cfg.seed, t, method))
            };
            estimates.push(match method {
                Method::Naive => naive_mc(spec, &run)?,
                Method::ImportanceLowerBound => importance_lower_bound(spec, &run, cfg.rho)?,
            });
        }
    }
    Ok(estimates)
}

fn estimate(resolved: &Resolved, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &resolved.config;
    let stem = cfg.out.as_deref().unwrap_or("estimate");
    let spec = event_spec(cfg)?;
    let theory = theory_rate(&spec, cfg.beta)?;
    let theory_provenance = match spec.kind() {
        EventKind::LowerTailOutsideExpandingBall => Provenance::ClosedForm,
        _ => Provenance::NumericMinimizer,
    };
    let estimates = run_campaign(cfg, &spec)?;

    let csv_path = format!("{stem}.csv");
    let mut csv = create(&csv_path)?;
    write_campaign_csv(&mut csv, &estimates)?;
    csv.flush()?;

    let mut fits = Vec::new();
    let mut excluded = Vec::new();
    let mut first_failure = None;
    for &method in methods(cfg.method) {
        let cells: Vec<EstimateResult> =
            estimates.iter().filter(|e| e.method == method).copied().collect();
        for e in cells.iter().filter(|e| e.p_hat == 0.0) {
            excluded.push(json!({ "t": e.t, "method": method.as_str() }));
        }
        let usable: Vec<EstimateResult> = cells.into_iter().filter(|e| e.p_hat > 0.0).collect();
        match decay_slope(&usable) {
            Ok(fit) => {
                let fitted_rate = -fit.slope;
                writeln!(
                    out,
                    "{}: slope {} +- {} over {} points; theory rate {}; fitted/theory {}",
                    method.as_str(),
                    fmt_sig(fit.slope),
                    fmt_sig(fit.slope_stderr),
                    fit.points,
                    fmt_sig(theory),
                    fmt_sig(fitted_rate / theory)
                )?;
                fits.push(json!({
                    "method": method.as_str(),
                    "slope": Quantity::new(fit.slope, Provenance::MonteCarlo),
                    "slope_stderr": Quantity::new(fit.slope_stderr, Provenance::MonteCarlo),
                    "intercept": Quantity::new(fit.intercept, Provenance::MonteCarlo),
                    "ratio_to_theory": Quantity::new(fitted_rate / theory, Provenance::MonteCarlo),
                    "points": fit.points,
                }));
            }
            Err(e) => {
                writeln!(out, "{}: no slope fit: {e}", method.as_str())?;
                fits.push(json!({ "method": method.as_str(), "error": e.to_string() }));
                first_failure.get_or_insert(e);
            }
        }
    }

    let rows: Vec<Value> = estimates
        .iter()
        .map(|e| {
            json!({
                "t": e.t,
                "method": e.method.as_str(),
                "p_hat": Quantity::new(e.p_hat, Provenance::MonteCarlo),
                "stderr": Quantity::new(e.stderr, Provenance::MonteCarlo),
                "replicas": e.replicas,
                "hits": e.hits,
                "rho": e.rho,
            })
        })
        .collect();
    let mut map = header(resolved);
    map.insert("event".into(), json!({ "kind": spec.kind(), "theta": spec.theta(), "a": spec.a() }));
    map.insert("theory_rate".into(), json!(Quantity::new(theory, theory_provenance)));
    map.insert("estimates".into(), Value::Array(rows));
    map.insert("fits".into(), Value::Array(fits));
    map.insert("excluded_zero_cells".into(), Value::Array(excluded));
    let json_path = format!("{stem}.json");
    let mut file = create(&json_path)?;
    writeln!(file, "{}", serde_json::to_string_pretty(&Value::Object(map))?)?;
    file.flush()?;
    writeln!(out, "wrote {csv_path} and {json_path}")?;

    match first_failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn validate(cfg: &CampaignConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = run_all();
    let total: usize = reports.iter().map(|r| r.checks.len()).sum();
    let failed: usize = reports.iter().map(|r| r.failed()).sum();
    match cfg.format {
        Format::Csv => {
            for r in &reports {
                for c in &r.checks {
                    let mark = if c.passed { "PASS" } else { "FAIL" };
                    writeln!(out, "{mark} {}: {} ({})", r.suite, c.name, c.detail)?;
                }
            }
            for r in &reports {
                writeln!(out, "{}: {} passed, {} failed", r.suite, r.passed(), r.failed())?;
            }
            writeln!(out, "total: {} passed, {failed} failed", total - failed)?;
        }
        Format::Json => {
            let summary = json!({
                "schema_version": SCHEMA_VERSION,
                "suites": reports.iter().map(|r| json!({
                    "suite": r.suite,
                    "passed": r.passed(),
                    "failed": r.failed(),
                    "checks": r.checks,
                })).collect::<Vec<_>>(),
                "passed": total - failed,
                "failed": failed,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
    }
    if failed > 0 {
        return Err(CliError::ValidationFailed { failed, total });
    }
    Ok(())
}
