//! Command-line interface. Every command prints one JSON report on stdout.
//!
//! Exit codes: 0 ok, 1 invalid input, 2 measure not barycentered at the cone
//! point, 3 solver did not converge, 4 net hypothesis fails, 5 a verified
//! inequality fails.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gram::{
    build_delta_problem_at_apex, build_delta_tilde_problem, oracle_solve, solve, GramProblem, ProblemDump,
    SolverConfig, SolverResult, ORACLE_MAX_ATOMS,
};
use crate::invariants::{delta_tilde_space, SearchConfig, SpaceSearch};
use crate::io::{space_to_json, MeasureJson, SpaceInput};
use crate::measure::{barycenter_defect, base_defect, find_admissible_measure, BarycenterReport, WeightedMeasure};
use crate::metric::{FiniteMetricSpace, DEFAULT_METRIC_TOL};
use crate::net::{
    constant_general, general_hypothesis_check, greedy_net, net_bound_pipeline,
    write_constants_csv, PipelineConfig,
};
use crate::verify::{run_verify, GeneralNetParams, VerifyConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID_INPUT: u8 = 1;
pub const EXIT_INADMISSIBLE: u8 = 2;
pub const EXIT_UNCONVERGED: u8 = 3;
pub const EXIT_HYPOTHESIS: u8 = 4;
pub const EXIT_CHECK_FAILED: u8 = 5;

const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "delta-forge", version, about = "Gram-matrix invariants of measures on Euclidean cones")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the metric axioms of a distance matrix or graph.
    Validate(ValidateArgs),
    /// δ of a cone measure barycentered at the cone point.
    Delta(InvariantArgs),
    /// δ̃ of a measure on the base space.
    DeltaTilde(InvariantArgs),
    /// Solve a dumped Gram problem.
    Solve(SolveArgs),
    /// Lower estimate of δ̃ over all admissible measures on a space.
    DeltaTildeSpace(SpaceArgs),
    /// Run every comparison check on random admissible measures.
    Verify(VerifyArgs),
    /// Net-based upper bound on δ̃ with the explicit constants.
    NetBound(NetBoundArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Distance matrix (CSV or JSON) or graph (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Metric tolerance for the triangle inequality and symmetry.
    #[arg(long, default_value_t = DEFAULT_METRIC_TOL)]
    pub metric_tol: f64,
    /// Also write the report to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, env = "DELTA_FORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Constraint feasibility tolerance of the solver.
    #[arg(long, default_value_t = 1e-7)]
    pub feas_tol: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, feas_tol: self.feas_tol, restarts: self.restarts.max(1), ..SolverConfig::default() }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Include the (shortest-path) distance matrix in the report.
    #[arg(long)]
    pub emit_matrix: bool,
}

#[derive(Debug, Args)]
pub struct InvariantArgs {
    #[command(flatten)]
    pub common: Common,
    /// Measure JSON.
    #[arg(long)]
    pub measure: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Barycenter defect tolerance.
    #[arg(long, default_value_t = crate::measure::DEFAULT_DEFECT_TOL)]
    pub tol: f64,
    /// Cross-check with the full-matrix solver (at most 8 atoms).
    #[arg(long)]
    pub oracle: bool,
    /// Write the Gram problem to this file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem dump JSON.
    #[arg(long)]
    pub problem: PathBuf,
    /// Overrides the seed stored in the dump.
    #[arg(long, env = "DELTA_FORGE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1e-7)]
    pub feas_tol: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = crate::measure::DEFAULT_DEFECT_TOL)]
    pub tol: f64,
    /// Weight grid resolution for spaces with at most 4 points.
    #[arg(long, default_value_t = 24)]
    pub grid: usize,
    #[arg(long, default_value_t = 3)]
    pub starts: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Slack on comparisons between invariant values.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = PI / 12.0)]
    pub net_radius: f64,
    #[command(flatten)]
    pub general: GeneralArgs,
}

#[derive(Debug, Args)]
pub struct GeneralArgs {
    /// Separation angle θ in (0, π/2).
    #[arg(long, requires_all = ["alpha", "eps"])]
    pub theta: Option<f64>,
    /// Fraction α of separating net points.
    #[arg(long, requires_all = ["theta", "eps"])]
    pub alpha: Option<f64>,
    /// Separation gap ε.
    #[arg(long, requires_all = ["theta", "alpha"])]
    pub eps: Option<f64>,
}

impl GeneralArgs {
    fn params(&self) -> Option<GeneralNetParams> {
        Some(GeneralNetParams { theta: self.theta?, alpha: self.alpha?, eps: self.eps? })
    }
}

#[derive(Debug, Args)]
pub struct NetBoundArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base measure JSON; an admissible measure is found if omitted.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = PI / 12.0)]
    pub net_radius: f64,
    #[arg(long)]
    pub oracle: bool,
    /// Write the table of (N, C(N)) to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Largest N in the CSV table.
    #[arg(long, default_value_t = 100)]
    pub csv_max_n: usize,
    #[command(flatten)]
    pub general: GeneralArgs,
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli))
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> u8 {
    let (result, json_path) = match cli.command {
        Command::Validate(a) => (cmd_validate(&a), a.common.json),
        Command::Delta(a) => (cmd_invariant(&a, true), a.common.json),
        Command::DeltaTilde(a) => (cmd_invariant(&a, false), a.common.json),
        Command::Solve(a) => (cmd_solve(&a), a.json),
        Command::DeltaTildeSpace(a) => (cmd_space(&a), a.common.json),
        Command::Verify(a) => (cmd_verify(&a), a.common.json),
        Command::NetBound(a) => (cmd_net_bound(&a), a.common.json),
    };
    let (report, code) = result.unwrap_or_else(error_report);
    let text = serde_json::to_string_pretty(&round_numbers(report)).expect("JSON values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    if let Some(p) = json_path {
        if let Err(e) = std::fs::write(&p, format!("{text}\n")) {
            eprintln!("cannot write {}: {e}", p.display());
            return EXIT_INVALID_INPUT;
        }
    }
    code
}

fn error_report(e: Error) -> (Value, u8) {
    eprintln!("error: {e}");
    match e {
        Error::Inadmissible { defect, witness } => (
            json!({ "admissible": false, "defect": defect, "witness": witness, "error": format!("{}", Error::Inadmissible { defect, witness }) }),
            EXIT_INADMISSIBLE,
        ),
        Error::MarginalBarycenter { factor, defect } => {
            (json!({ "admissible": false, "factor": factor, "defect": defect }), EXIT_INADMISSIBLE)
        }
        Error::InvalidMetric(v) => {
            let msg = Error::InvalidMetric(v.clone()).to_string();
            (json!({ "valid": false, "violations": v, "error": msg }), EXIT_INVALID_INPUT)
        }
        other => (json!({ "error": other.to_string() }), EXIT_INVALID_INPUT),
    }
}

/// Rounds every float to 12 significant digits.
pub fn round_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float");
            json!(r)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_numbers).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_numbers(v))).collect()),
        other => other,
    }
}

fn load_space(c: &Common) -> Result<FiniteMetricSpace> {
    SpaceInput::read(&c.input)?.into_space(c.metric_tol)
}

fn solver_summary(r: &SolverResult) -> Value {
    json!({
        "primal_value": r.primal_value,
        "max_infeasibility": r.max_infeasibility,
        "lower_bound": if r.lower_bound.is_finite() { json!(r.lower_bound) } else { Value::Null },
        "iterations": r.iterations,
        "restarts": r.restarts,
        "seed": r.seed,
        "converged": r.converged,
    })
}

fn cmd_validate(a: &ValidateArgs) -> Result<(Value, u8)> {
    let input = SpaceInput::read(&a.common.input)?;
    let kind = match input {
        SpaceInput::Matrix(_) => "matrix",
        SpaceInput::Graph { .. } => "graph",
    };
    let x = input.into_space(a.common.metric_tol)?;
    let mut report = json!({ "valid": true, "kind": kind, "n": x.len(), "diameter": x.diam() });
    if a.emit_matrix {
        report["matrix"] = serde_json::from_str(&space_to_json(&x)?)?;
    }
    Ok((report, EXIT_OK))
}

fn cmd_invariant(a: &InvariantArgs, cone: bool) -> Result<(Value, u8)> {
    let x = Arc::new(load_space(&a.common)?);
    let m = MeasureJson::read(&a.measure)?;
    let (problem, bary): (GramProblem, BarycenterReport) = if cone {
        let nu = m.cone_measure(x.clone())?;
        let bary = barycenter_defect(&nu, a.tol).require()?;
        (build_delta_problem_at_apex(&nu)?, bary)
    } else {
        let mu = m.base_measure()?;
        let bary = base_defect(&x, &mu, a.tol).require()?;
        (build_delta_tilde_problem(&x, &mu)?, bary)
    };
    let cfg = a.solver.config();
    if let Some(p) = &a.dump {
        write_dump(p, &problem.to_dump(cfg.seed))?;
    }
    let res = solve(&problem, &cfg);
    let mut report = json!({
        "invariant": if cone { "delta" } else { "delta_tilde" },
        "value": res.primal_value,
        "admissible": true,
        "defect": bary.defect,
        "marginal_admissibility": bary.marginal,
        "atoms": problem.m(),
        "solver": solver_summary(&res),
        "label": "finite-sample invariant",
    });
    if a.oracle {
        report["oracle"] = oracle_report(&problem, res.primal_value);
    }
    Ok((report, if res.converged { EXIT_OK } else { EXIT_UNCONVERGED }))
}

fn oracle_report(p: &GramProblem, value: f64) -> Value {
    if p.m() > ORACLE_MAX_ATOMS {
        return json!({ "skipped": format!("{} atoms exceed {}", p.m(), ORACLE_MAX_ATOMS) });
    }
    match oracle_solve(p) {
        Ok(o) => json!({
            "value": o.primal_value,
            "difference": value - o.primal_value,
            "converged": o.converged,
            "max_infeasibility": o.max_infeasibility,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn write_dump(path: &Path, dump: &ProblemDump) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(dump)?)?;
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<(Value, u8)> {
    let text = std::fs::read_to_string(&a.problem)?;
    let dump: ProblemDump = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let problem = GramProblem::from_dump(&dump)?;
    let cfg = SolverConfig {
        seed: a.seed.unwrap_or(dump.seed),
        feas_tol: a.feas_tol,
        restarts: a.restarts.max(1),
        ..SolverConfig::default()
    };
    let res = solve(&problem, &cfg);
    let mut report = json!({
        "value": res.primal_value,
        "value_bits": format!("{:016x}", res.primal_value.to_bits()),
        "atoms": problem.m(),
        "solver": solver_summary(&res),
    });
    if a.oracle {
        report["oracle"] = oracle_report(&problem, res.primal_value);
    }
    Ok((report, if res.converged { EXIT_OK } else { EXIT_UNCONVERGED }))
}

fn cmd_space(a: &SpaceArgs) -> Result<(Value, u8)> {
    let x = load_space(&a.common)?;
    let cfg = SearchConfig {
        seed: a.solver.seed,
        starts: a.starts,
        grid: a.grid,
        solver: SolverConfig { restarts: a.solver.restarts.clamp(1, 2), ..a.solver.config() },
        tol: a.tol,
        ..SearchConfig::default()
    };
    match delta_tilde_space(&x, &cfg) {
        SpaceSearch::NoAdmissibleMeasure => Ok((
            json!({ "admissible": false, "value": Value::Null, "note": "no measure on the space is barycentered at the cone point; the supremum is -inf" }),
            EXIT_INADMISSIBLE,
        )),
        SpaceSearch::Estimate { value, measure, evaluations, converged } => Ok((
            json!({
                "admissible": true,
                "lower_estimate": value,
                "measure": MeasureJson::from_base(&measure),
                "evaluations": evaluations,
                "ascent_converged": converged,
                "exhaustive_grid": x.len() <= 4 && a.grid > 0,
                "label": "finite-sample invariant",
            }),
            EXIT_OK,
        )),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<(Value, u8)> {
    let x = load_space(&a.common)?;
    let cfg = VerifyConfig {
        trials: a.trials,
        seed: a.solver.seed,
        jobs: a.jobs,
        tol: a.tol,
        oracle: a.oracle,
        solver: a.solver.config(),
        net_radius: a.net_radius,
        general: a.general.params(),
        ..VerifyConfig::default()
    };
    let r = run_verify(&x, &cfg)?;
    let code = if r.all_passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok((serde_json::to_value(&r)?, code))
}

fn cmd_net_bound(a: &NetBoundArgs) -> Result<(Value, u8)> {
    let x = load_space(&a.common)?;
    if let Some(p) = &a.csv {
        let f = std::fs::File::create(p)?;
        write_constants_csv(f, a.csv_max_n)?;
    }
    let mu: WeightedMeasure = match &a.measure {
        Some(p) => MeasureJson::read(p)?.base_measure()?,
        None => find_admissible_measure(&x, crate::measure::DEFAULT_DEFECT_TOL).ok_or_else(|| {
            let d = crate::measure::admissibility_game(&x, &(0..x.len()).collect::<Vec<_>>(), None);
            let b = base_defect(&x, &d.1, 0.0);
            Error::Inadmissible { defect: b.defect, witness: b.witness }
        })?,
    };
    let backend = if a.oracle && x.len() <= ORACLE_MAX_ATOMS {
        crate::invariants::Backend::Oracle
    } else {
        crate::invariants::Backend::Solver(a.solver.config())
    };

    if let Some(g) = a.general.params() {
        let net = greedy_net(&x, a.net_radius)?;
        let (c, c2) = constant_general(g.theta, g.alpha, g.eps)?;
        let h = general_hypothesis_check(&x, &net.centers, g.theta, g.alpha, g.eps);
        let mut report = json!({
            "mode": "separated-net",
            "theta": g.theta,
            "alpha": g.alpha,
            "eps": g.eps,
            "N": net.len(),
            "centers": net.centers,
            "c": c,
            "c_squared": c2,
            "hypothesis": h,
        });
        if !h.holds {
            return Ok((report, EXIT_HYPOTHESIS));
        }
        base_defect(&x, &mu, crate::measure::DEFAULT_DEFECT_TOL).require()?;
        let v = backend.run(&build_delta_tilde_problem(&x, &mu)?)?.primal_value;
        report["sdp_value"] = json!(v);
        report["bound_ok"] = json!(v <= c2 + a.tol);
        let code = if v <= c2 + a.tol { EXIT_OK } else { EXIT_CHECK_FAILED };
        return Ok((report, code));
    }

    let cfg = PipelineConfig { net_radius: a.net_radius, tol: a.tol, backend, ..PipelineConfig::default() };
    let r = net_bound_pipeline(&x, &mu, &cfg)?;
    let code = if r.chain_ok { EXIT_OK } else { EXIT_CHECK_FAILED };
    let mut report = serde_json::to_value(&r)?;
    report["C_N_table_written"] = json!(a.csv.is_some());
    Ok((report, code))
}
