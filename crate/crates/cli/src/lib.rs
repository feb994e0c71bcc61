//! Command implementations for the `bnm` binary.
//!
//! Every command produces a [`CommandResult`]: a JSON payload for standard
//! output, diagnostic lines for standard error, and an exit code.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | validation failure |
//! | 2 | certification failure |
//! | 3 | usage, parse or internal error |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bnm::equilibrium::{proportional_start, uniform_start};
use bnm::io::{parse_plan, parse_scenario, scenario_to_json, IoError, PlanFile};
use bnm::scenarios::{ScenarioError, SCENARIO_NAMES};
use bnm::{
    best_response_dynamics, builtin, certify, opt_dp, opt_refine, optimal_welfare,
    plan_investment, welfare_upper_bound_greedy, Allocation, CityInstance, DynamicsConfig,
    EquilibriumReport, OptError, PlannerError,
};
use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bnm", version, about = "Equilibria, optimal welfare and investment planning for neighbourhood games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and print its normalized form.
    Validate { path: PathBuf },
    /// Optimal social welfare with the greedy upper bound.
    Opt {
        path: PathBuf,
        /// Dynamic-program grid (default N/10^4).
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Run best-response dynamics to an equilibrium.
    Dynamics {
        path: PathBuf,
        /// `uniform`, `proportional`, or a JSON file holding an allocation array.
        #[arg(long, default_value = "uniform")]
        start: String,
        #[arg(long)]
        step: Option<f64>,
        /// Regret tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write the trajectory as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Synthesize an investment plan.
    Plan {
        path: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Welfare benchmark W (default: computed optimum).
        #[arg(long)]
        benchmark: Option<f64>,
        /// Also write the plan JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a plan's cost and the worst post-plan equilibrium.
    Certify {
        path: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Grid resolution for the equilibrium oracle (default N/10^3).
        #[arg(long)]
        resolution: Option<f64>,
        /// Welfare benchmark W (default: computed optimum).
        #[arg(long)]
        benchmark: Option<f64>,
        /// Certify this plan file instead of synthesizing one.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Built-in scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// List built-in scenario names.
    List,
    /// Write a built-in scenario as JSON.
    Emit {
        name: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    /// JSON document for standard output.
    pub payload: Option<String>,
    /// Lines for standard error.
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Validation(String, Vec<String>),
    #[error("{0}")]
    Internal(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Invalid(inv) => Failure::Validation(
                "invalid scenario".into(),
                inv.violations.iter().map(|v| v.to_string()).collect(),
            ),
            IoError::PlanTotalMismatch { .. } => Failure::Validation("invalid plan".into(), vec![e.to_string()]),
            IoError::Parse(_) => Failure::Internal(e.to_string()),
        }
    }
}

macro_rules! internal_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Internal(e.to_string())
            }
        }
    )*};
}

internal_from!(OptError, PlannerError, ScenarioError, std::io::Error, csv::Error, serde_json::Error);

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CityInstance, Failure> {
    Ok(parse_scenario(&read(path)?)?)
}

fn ok(payload: String) -> Result<CommandResult, Failure> {
    Ok(CommandResult {
        exit_code: EXIT_OK,
        payload: Some(payload),
        diagnostics: Vec::new(),
    })
}

pub fn run(cli: Cli) -> CommandResult {
    let outcome = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Opt { path, grid } => cmd_opt(&path, grid),
        Command::Dynamics {
            path,
            start,
            step,
            tol,
            max_iters,
            trace,
        } => cmd_dynamics(&path, &start, step, tol, max_iters, trace.as_deref()),
        Command::Plan {
            path,
            epsilon,
            benchmark,
            out,
        } => cmd_plan(&path, epsilon, benchmark, out.as_deref()),
        Command::Certify {
            path,
            epsilon,
            resolution,
            benchmark,
            plan,
        } => cmd_certify(&path, epsilon, resolution, benchmark, plan.as_deref()),
        Command::Scenario(ScenarioCommand::List) => ok(pretty(&SCENARIO_NAMES)),
        Command::Scenario(ScenarioCommand::Emit {
            name,
            delta,
            epsilon,
            out,
        }) => cmd_emit(&name, delta, epsilon, out.as_deref()),
    };
    match outcome {
        Ok(result) => result,
        Err(Failure::Validation(summary, violations)) => {
            #[derive(Serialize)]
            struct Invalid<'a> {
                valid: bool,
                violations: &'a [String],
            }
            let mut diagnostics = vec![summary];
            diagnostics.extend(violations.iter().map(|v| format!("  {v}")));
            CommandResult {
                exit_code: EXIT_VALIDATION,
                payload: Some(pretty(&Invalid {
                    valid: false,
                    violations: &violations,
                })),
                diagnostics,
            }
        }
        Err(Failure::Internal(message)) => CommandResult {
            exit_code: EXIT_INTERNAL,
            payload: None,
            diagnostics: vec![format!("error: {message}")],
        },
    }
}

fn cmd_validate(path: &Path) -> Result<CommandResult, Failure> {
    ok(scenario_to_json(&load(path)?))
}

#[derive(Serialize)]
struct OptPayload {
    value: f64,
    allocation: Allocation,
    upper_bound: f64,
    grid: f64,
}

fn cmd_opt(path: &Path, grid: Option<f64>) -> Result<CommandResult, Failure> {
    let instance = load(path)?;
    let result = match grid {
        Some(g) => opt_refine(&instance, &opt_dp(&instance, g)?),
        None => optimal_welfare(&instance)?,
    };
    ok(pretty(&OptPayload {
        value: result.value,
        upper_bound: welfare_upper_bound_greedy(&instance),
        grid: result.grid,
        allocation: result.allocation,
    }))
}

fn start_allocation(instance: &CityInstance, start: &str) -> Result<Allocation, Failure> {
    match start {
        "uniform" => Ok(uniform_start(instance)),
        "proportional" => Ok(proportional_start(instance)),
        file => {
            let values: Vec<f64> = serde_json::from_str(&read(Path::new(file))?)?;
            Allocation::new(instance, values)
                .map_err(|e| Failure::Validation("invalid start allocation".into(), vec![e.to_string()]))
        }
    }
}

fn write_trace(path: &Path, instance: &CityInstance, report: &EquilibriumReport) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(instance.neighbourhoods().iter().map(|n| format!("x_{}", n.name)));
    header.extend(["welfare", "max_regret", "potential"].map(String::from));
    w.write_record(&header)?;
    for p in report.trace.as_deref().unwrap_or_default() {
        let mut row = vec![p.iteration.to_string()];
        row.extend(p.allocation.iter().map(f64::to_string));
        row.extend([p.welfare, p.max_regret, p.potential].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_dynamics(
    path: &Path,
    start: &str,
    step: Option<f64>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    trace: Option<&Path>,
) -> Result<CommandResult, Failure> {
    let instance = load(path)?;
    let start = start_allocation(&instance, start)?;
    let mut config = DynamicsConfig::for_instance(&instance);
    if let Some(s) = step {
        if !(s.is_finite() && s > 0.0) {
            return Err(Failure::Internal(format!("--step must be positive, got {s}")));
        }
        config.initial_step = s;
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::Internal(format!("--tol must be non-negative, got {t}")));
        }
        config.regret_tol = t;
    }
    if let Some(m) = max_iters {
        config.max_iters = m;
    }
    config.record_trace = trace.is_some();
    let mut report = best_response_dynamics(&instance, &start, &config);
    if let Some(p) = trace {
        write_trace(p, &instance, &report)?;
    }
    report.trace = None;
    let mut result = ok(pretty(&report))?;
    if !report.converged {
        result.diagnostics.push(format!(
            "warning: no convergence after {} iterations; best regret {}",
            report.iterations, report.max_regret
        ));
    }
    Ok(result)
}

fn benchmark_or_opt(instance: &CityInstance, benchmark: Option<f64>) -> Result<f64, Failure> {
    match benchmark {
        Some(w) => Ok(w),
        None => Ok(optimal_welfare(instance)?.value),
    }
}

fn cmd_plan(path: &Path, epsilon: f64, benchmark: Option<f64>, out: Option<&Path>) -> Result<CommandResult, Failure> {
    let instance = load(path)?;
    let w = benchmark_or_opt(&instance, benchmark)?;
    let (plan, diagnostics) = plan_investment(&instance, epsilon, w)?;
    let file = PlanFile::new(&plan, Some(&diagnostics));
    if let Some(p) = out {
        fs::write(p, pretty(&file))?;
    }
    #[derive(Serialize)]
    struct PlanPayload<'a> {
        plan: &'a PlanFile,
        diagnostics: &'a bnm::PlannerDiagnostics,
    }
    ok(pretty(&PlanPayload {
        plan: &file,
        diagnostics: &diagnostics,
    }))
}

fn cmd_certify(
    path: &Path,
    epsilon: f64,
    resolution: Option<f64>,
    benchmark: Option<f64>,
    plan_path: Option<&Path>,
) -> Result<CommandResult, Failure> {
    let instance = load(path)?;
    let w = benchmark_or_opt(&instance, benchmark)?;
    let plan = match plan_path {
        Some(p) => parse_plan(&read(p)?)?,
        None => plan_investment(&instance, epsilon, w)?.0,
    };
    let resolution = resolution.unwrap_or(instance.population() / 1e3);
    let cert = certify(&instance, &plan, epsilon, w, resolution)?;
    let mut diagnostics = Vec::new();
    if cert.heuristic_equilibria {
        diagnostics.push("note: equilibria found by multi-start dynamics, not the exhaustive grid".into());
    }
    if !cert.cost_ok {
        diagnostics.push(format!("cost {} exceeds bound {}", cert.total_cost, cert.cost_bound));
    }
    if !cert.welfare_ok {
        diagnostics.push(format!(
            "worst equilibrium welfare {} is below {} - {}",
            cert.worst_eq_welfare, cert.welfare_floor, cert.tolerance
        ));
    }
    Ok(CommandResult {
        exit_code: if cert.passed() { EXIT_OK } else { EXIT_CERTIFICATION },
        payload: Some(pretty(&cert)),
        diagnostics,
    })
}

fn cmd_emit(name: &str, delta: Option<f64>, epsilon: Option<f64>, out: Option<&Path>) -> Result<CommandResult, Failure> {
    let mut params = BTreeMap::new();
    if let Some(d) = delta {
        params.insert("delta".to_string(), d);
    }
    if let Some(e) = epsilon {
        params.insert("epsilon".to_string(), e);
    }
    let scenario = builtin(name, &params)?;
    let text = scenario_to_json(&scenario.instance);
    match out {
        Some(p) => {
            fs::write(p, &text)?;
            #[derive(Serialize)]
            struct Written<'a> {
                name: &'a str,
                path: String,
                neighbourhoods: usize,
                population: f64,
            }
            ok(pretty(&Written {
                name,
                path: p.display().to_string(),
                neighbourhoods: scenario.instance.len(),
                population: scenario.instance.population(),
            }))
        }
        None => ok(text),
    }
}
