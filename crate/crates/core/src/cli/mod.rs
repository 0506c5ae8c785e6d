//! Command-line front end.
//!
//! Every subcommand writes one table, as CSV (default) or JSON, to `--out` or
//! stdout. The first line of a CSV file is `# spec: <json>` holding the
//! resolved run settings; JSON files carry them under `"spec"`. The
//! worker count is not one of those settings and never changes a file.

pub mod output;
pub mod spec;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::mc::{
    susceptibility_sweep, sweep, sweep_with_samples, weight_histogram, zero_variance_probability, SweepTemplate,
};
use crate::optimizer::Constraint;
use crate::replica::{
    general_l1_solve, noshort_solution, unconstrained_solution, AssetUniverse, Penalty, RegularizerParams,
    ReplicaSolution,
};
use crate::weights::build_mixture;

use output::{emit, read_rows, render, Cell, Format, Table};
use spec::{parse_grid, parse_penalty, penalty_json, regularizer, RunSpec, SigmaSpec};

const REPLICA_COLUMNS: &str = "Columns: r, status, lambda, delta, q0, q0_tilde, f, n0.\n\
Status is one of ok, critical-boundary, beyond-critical, domain, no-convergence;\n\
rows other than ok leave the numeric columns empty.";
const SIMULATE_COLUMNS: &str = "Columns: r_nominal, r, t, trials, lambda_hat_mean, lambda_hat_se,\n\
q0_tilde_hat_mean, q0_tilde_hat_se, zero_fraction_mean, zero_fraction_se, objective_mean,\n\
objective_se, zero_variance_probability. T = round(N / r_nominal) and r = N / T.\n\
With --experimental-delta, delta_proxy_mean and delta_proxy_se follow.";
const COMPARE_COLUMNS: &str = "Columns: r, quantity, analytic, simulated, se, z, verdict.\n\
Pairs lambda/lambda_hat, q0_tilde/q0_tilde_hat and n0/zero_fraction; z = |simulated - analytic| / se,\n\
verdict pass when z <= 3. A final row with quantity 'all' holds the overall verdict.";
const PHASE_COLUMNS: &str = "Columns: r_nominal, r, t, trials, probability, se.";
const WEIGHTS_COLUMNS: &str = "Columns: kind, w_lower, w_upper, empirical, analytic, se.\n\
kind 'atom': mass at zero (empirical share, analytic n0, standard error);\n\
kind 'bin': density of the nonzero weights on [w_lower, w_upper);\n\
kind 'l1': L1 distance between binned empirical and analytic masses.";

/// z-score above which a simulated point disagrees with theory.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "minvar", version, about = "Minimum-variance portfolios in high dimension: replica curves and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic saddle-point curves over an r grid.
    #[command(after_help = REPLICA_COLUMNS)]
    Replica(CommonArgs),
    /// Monte Carlo means and standard errors over an r grid.
    #[command(after_help = SIMULATE_COLUMNS)]
    Simulate(SimulateArgs),
    /// z-scores of a simulation file against an analytic file.
    #[command(after_help = COMPARE_COLUMNS)]
    Compare(CompareArgs),
    /// Probability of a zero-variance no-short optimum over an r grid.
    #[command(after_help = PHASE_COLUMNS)]
    Phase(SimArgs),
    /// Pooled weight histogram at one r against the analytic distribution.
    #[command(after_help = WEIGHTS_COLUMNS)]
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    Equality,
    Noshort,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Equality => Constraint::Equality,
            ConstraintArg::Noshort => Constraint::NoShort,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `start:stop:step` (stop included) or a comma-separated list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub r_grid: String,
    /// Number of assets; defaults to 100, or to the length of a sigma file.
    #[arg(long)]
    pub n: Option<usize>,
    /// `const:<v>`, `file:<path>` or `lognormal:<mu>,<s>,<seed>`.
    #[arg(long, default_value = "const:1")]
    pub sigma: String,
    #[arg(long, value_enum, default_value = "noshort")]
    pub constraint: ConstraintArg,
    /// Penalty on positive weights; defaults to 0.
    #[arg(long)]
    pub eta1: Option<f64>,
    /// Penalty on negative weights, a number or `inf`; defaults from --constraint.
    #[arg(long, value_parser = parse_penalty)]
    pub eta2: Option<Penalty>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker cap; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also report a linear-response estimate of the susceptibility
    /// (columns delta_proxy_mean, delta_proxy_se). Experimental.
    #[arg(long)]
    pub experimental_delta: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0.05)]
    pub bin_width: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Output of `replica`.
    #[arg(long)]
    pub analytic: PathBuf,
    /// Output of `simulate`.
    #[arg(long)]
    pub simulation: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Process exit code for an error: 2 for bad input, 3 for solver failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Spec(_) | Error::Domain(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let (spec, table, format, out) = match cli.command {
        Command::Replica(a) => {
            let (spec, reg) = resolve(&a, "replica", None, None, None)?;
            let table = cmd_replica(&spec, &reg)?;
            (spec, table, a.format, a.out)
        }
        Command::Simulate(a) => {
            let s = &a.sim;
            let (mut spec, reg) = resolve(&s.common, "simulate", Some(s.trials), Some(s.seed), None)?;
            spec.experimental_delta = a.experimental_delta;
            require_corner(&reg)?;
            let table = cmd_simulate(&spec, s.threads)?;
            (spec, table, s.common.format, s.common.out.clone())
        }
        Command::Phase(a) => {
            if a.common.constraint != ConstraintArg::Noshort {
                return Err(Error::Spec("the phase scan is defined for the no-short problem only".into()));
            }
            let (spec, reg) = resolve(&a.common, "phase", Some(a.trials), Some(a.seed), None)?;
            require_corner(&reg)?;
            let table = cmd_phase(&spec, a.threads)?;
            (spec, table, a.common.format, a.common.out)
        }
        Command::Weights(a) => {
            let s = &a.sim;
            let (spec, reg) = resolve(&s.common, "weights", Some(s.trials), Some(s.seed), Some(a.bin_width))?;
            require_corner(&reg)?;
            let table = cmd_weights(&spec, &reg, s.threads)?;
            (spec, table, s.common.format, s.common.out.clone())
        }
        Command::Compare(a) => {
            let (spec, table) = cmd_compare(&a)?;
            (spec, table, a.format, a.out)
        }
    };
    emit(&render(&spec, &table, format)?, out.as_deref())
}

fn resolve(
    a: &CommonArgs,
    command: &str,
    trials: Option<usize>,
    seed: Option<u64>,
    bin_width: Option<f64>,
) -> Result<(RunSpec, RegularizerParams)> {
    let r_grid = parse_grid(&a.r_grid)?;
    let sigma = SigmaSpec::parse(&a.sigma)?;
    let n = match (&sigma, a.n) {
        (SigmaSpec::File(_), n) => n,
        (_, Some(n)) => Some(n),
        (_, None) => Some(100),
    };
    if n == Some(0) {
        return Err(Error::Spec("--n must be at least 1".into()));
    }
    if trials == Some(0) || trials == Some(1) {
        return Err(Error::Spec("--trials must be at least 2".into()));
    }
    if let Some(b) = bin_width {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Spec(format!("--bin-width must be positive, got {b}")));
        }
    }
    let sigmas = sigma.resolve(n)?;
    let constraint = Constraint::from(a.constraint);
    let reg = regularizer(constraint, a.eta1, a.eta2)?;
    let spec = RunSpec {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        r_grid,
        n: Some(sigmas.len()),
        trials,
        sigma: Some(a.sigma.clone()),
        sigmas,
        constraint: Some(constraint),
        eta1: Some(reg.eta1),
        eta2: penalty_json(reg.eta2),
        seed,
        bin_width,
        inputs: vec![],
        experimental_delta: false,
    };
    Ok((spec, reg))
}

fn require_corner(reg: &RegularizerParams) -> Result<()> {
    if reg.is_unconstrained() || reg.is_no_short() {
        Ok(())
    } else {
        Err(Error::Spec("simulations cover the equality and no-short problems only; drop --eta1/--eta2".into()))
    }
}

/// The solver matching the penalties: closed form, no-short root or general system.
pub fn solve_replica(universe: &AssetUniverse, r: f64, reg: &RegularizerParams) -> Result<ReplicaSolution> {
    if reg.is_unconstrained() {
        unconstrained_solution(universe, r)
    } else if reg.is_no_short() {
        noshort_solution(universe, r)
    } else {
        general_l1_solve(universe, r, reg)
    }
}

/// Row status for a solver outcome.
pub fn status_code(res: &Result<ReplicaSolution>) -> &'static str {
    match res {
        Ok(_) => "ok",
        Err(Error::PhaseBoundary { r }) if *r == 1.0 => "critical-boundary",
        Err(Error::CriticalPhase { r, critical }) if r == critical => "critical-boundary",
        Err(Error::PhaseBoundary { .. }) | Err(Error::CriticalPhase { .. }) => "beyond-critical",
        Err(Error::NoConvergence { .. }) => "no-convergence",
        Err(_) => "domain",
    }
}

fn cmd_replica(spec: &RunSpec, reg: &RegularizerParams) -> Result<Table> {
    let universe = spec.universe()?;
    let mut table = Table::new(&["r", "status", "lambda", "delta", "q0", "q0_tilde", "f", "n0"]);
    for &r in &spec.r_grid {
        let res = solve_replica(&universe, r, reg);
        let status = status_code(&res);
        let values: Vec<Cell> = match &res {
            Ok(s) => [s.lambda, s.delta, s.q0, s.q0_tilde, s.f, s.n0].iter().map(|&v| v.into()).collect(),
            Err(_) => vec![Cell::Missing; 6],
        };
        let mut row = vec![r.into(), status.into()];
        row.extend(values);
        table.push(row);
    }
    Ok(table)
}

fn template(spec: &RunSpec, threads: Option<usize>) -> Result<SweepTemplate> {
    Ok(SweepTemplate {
        universe: spec.universe()?,
        constraint: spec.constraint.unwrap_or(Constraint::NoShort),
        seed: spec.seed.unwrap_or_default(),
        threads,
    })
}

fn cmd_simulate(spec: &RunSpec, threads: Option<usize>) -> Result<Table> {
    let tpl = template(spec, threads)?;
    let trials = spec.trials.unwrap_or(2);
    let summary = sweep(&spec.r_grid, trials, &tpl)?;
    let mut headers = vec![
        "r_nominal",
        "r",
        "t",
        "trials",
        "lambda_hat_mean",
        "lambda_hat_se",
        "q0_tilde_hat_mean",
        "q0_tilde_hat_se",
        "zero_fraction_mean",
        "zero_fraction_se",
        "objective_mean",
        "objective_se",
        "zero_variance_probability",
    ];
    let delta = if spec.experimental_delta {
        headers.extend(["delta_proxy_mean", "delta_proxy_se"]);
        Some(susceptibility_sweep(&spec.r_grid, trials, &tpl)?)
    } else {
        None
    };
    let mut table = Table::new(&headers);
    for (k, p) in summary.points.iter().enumerate() {
        let mut row = vec![
            p.r_nominal.into(),
            p.r.into(),
            p.t.into(),
            p.trials.into(),
            p.lambda_hat.mean.into(),
            p.lambda_hat.se.into(),
            p.q0_tilde_hat.mean.into(),
            p.q0_tilde_hat.se.into(),
            p.zero_fraction.mean.into(),
            p.zero_fraction.se.into(),
            p.objective.mean.into(),
            p.objective.se.into(),
            p.zero_variance_probability.into(),
        ];
        if let Some(d) = &delta {
            row.extend([d[k].mean.into(), d[k].se.into()]);
        }
        table.push(row);
    }
    Ok(table)
}

fn cmd_phase(spec: &RunSpec, threads: Option<usize>) -> Result<Table> {
    let curve = zero_variance_probability(
        &spec.r_grid,
        &spec.universe()?,
        spec.trials.unwrap_or(2),
        spec.seed.unwrap_or_default(),
        threads,
    )?;
    let mut table = Table::new(&["r_nominal", "r", "t", "trials", "probability", "se"]);
    for p in curve {
        table.push(vec![p.r_nominal.into(), p.r.into(), p.t.into(), p.trials.into(), p.probability.into(), p.se.into()]);
    }
    Ok(table)
}

fn cmd_weights(spec: &RunSpec, reg: &RegularizerParams, threads: Option<usize>) -> Result<Table> {
    if spec.r_grid.len() != 1 {
        return Err(Error::Spec("weights takes a single r value in --r-grid".into()));
    }
    let tpl = template(spec, threads)?;
    let run = sweep_with_samples(&spec.r_grid, spec.trials.unwrap_or(2), &tpl)?;
    let r = run.summary.points[0].r;
    let mixture = solve_replica(&tpl.universe, r, reg).ok().map(|s| build_mixture(&s, reg));
    let width = spec.bin_width.unwrap_or(0.05);
    let hist = weight_histogram(&run.samples[0], width, mixture.as_ref())?;

    let mut table = Table::new(&["kind", "w_lower", "w_upper", "empirical", "analytic", "se"]);
    table.push(vec![
        "atom".into(),
        0.0.into(),
        0.0.into(),
        hist.atom_mass.into(),
        mixture.as_ref().map(|m| m.atom()).into(),
        hist.atom_se.into(),
    ]);
    for (k, d) in hist.density.iter().enumerate() {
        let lo = hist.lower + k as f64 * width;
        let analytic = hist.analytic_mass.as_ref().map(|m| m[k] / width);
        table.push(vec!["bin".into(), lo.into(), (lo + width).into(), (*d).into(), analytic.into(), Cell::Missing]);
    }
    table.push(vec!["l1".into(), Cell::Missing, Cell::Missing, hist.l1_distance.into(), Cell::Missing, Cell::Missing]);
    Ok(table)
}

fn number(row: &Map<String, Value>, key: &str) -> Option<f64> {
    row.get(key).and_then(Value::as_f64)
}

fn cmd_compare(a: &CompareArgs) -> Result<(RunSpec, Table)> {
    let analytic = read_rows(&a.analytic)?;
    let simulation = read_rows(&a.simulation)?;
    let a_r: Vec<f64> = analytic
        .iter()
        .map(|row| number(row, "r").ok_or_else(|| Error::Spec("analytic file has rows without r".into())))
        .collect::<Result<_>>()?;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);

    let mut table = Table::new(&["r", "quantity", "analytic", "simulated", "se", "z", "verdict"]);
    let mut all_pass = true;
    let mut grid = Vec::new();
    for sim in &simulation {
        let r = number(sim, "r").ok_or_else(|| Error::Spec("simulation file has rows without r".into()))?;
        let r_nominal = number(sim, "r_nominal").unwrap_or(r);
        let k = a_r
            .iter()
            .position(|&x| close(x, r))
            .or_else(|| a_r.iter().position(|&x| close(x, r_nominal)))
            .ok_or_else(|| Error::Spec(format!("grid mismatch: no analytic row for r = {r} (nominal {r_nominal})")))?;
        grid.push(r);
        for (an_key, sim_key) in [("lambda", "lambda_hat"), ("q0_tilde", "q0_tilde_hat"), ("n0", "zero_fraction")] {
            let an = number(&analytic[k], an_key);
            let mean = number(sim, &format!("{sim_key}_mean"));
            let se = number(sim, &format!("{sim_key}_se"));
            let (z, verdict) = match (an, mean, se) {
                (Some(x), Some(m), Some(s)) if s > 0.0 => {
                    let z = (m - x).abs() / s;
                    (Some(z), if z <= Z_THRESHOLD { "pass" } else { "fail" })
                }
                (Some(x), Some(m), Some(_)) if m == x => (Some(0.0), "pass"),
                (Some(_), Some(_), Some(_)) => (None, "fail"),
                _ => (None, "n/a"),
            };
            all_pass &= verdict != "fail";
            table.push(vec![r.into(), an_key.into(), an.into(), mean.into(), se.into(), z.into(), verdict.into()]);
        }
    }
    let overall = if all_pass { "pass" } else { "fail" };
    table.push(vec![Cell::Missing, "all".into(), Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing, overall.into()]);
    eprintln!("compare: overall verdict {overall} at |z| <= {Z_THRESHOLD}");

    let spec = RunSpec {
        command: "compare".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        r_grid: grid,
        n: None,
        trials: None,
        sigma: None,
        sigmas: vec![],
        constraint: None,
        eta1: None,
        eta2: Value::Null,
        seed: None,
        bin_width: None,
        inputs: vec![a.analytic.display().to_string(), a.simulation.display().to_string()],
        experimental_delta: false,
    };
    Ok((spec, table))
}
