//! Command-line surface for the branching-process toolkit.
//!
//! Subcommands: `analytic` (transform tables), `classify` (regime report),
//! `predict` (survival asymptote vs exact), `simulate` (per-replicate
//! records), `verify` (Monte Carlo comparison suites).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 verification failure.

mod config;
mod output;

use branching::analytic::AnalyticEngine;
use branching::asymptotics::{classify, predict_survival};
use branching::error::Error as CoreError;
use branching::simulate::{SimConfig, Simulator, DEFAULT_MAX_EVENTS, DEFAULT_MAX_POPULATION};
use branching::verify::{
    check_lemma2, check_stationary_pgf, estimate_survival, run_replicates,
    survival_estimate_from, ComparisonReport, Estimate, TolerancePolicy,
};
use clap::{Parser, Subcommand};
use config::RunConfig;
use output::{Cell, Format, Table};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "branching",
    about = "Critical branching processes with heavy-tailed offspring and decaying Poisson immigration",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value configuration file (# comments allowed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable, later wins).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Write the table here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Cap on parallel replicate workers (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Random seed (required by simulate and verify; no wall-clock default).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate F(t;0), q(t), R(t), Q(t), I(t), and P_t over t_grid.
    Analytic,
    /// Report the regime tag, limit tag, constants, and normalization.
    Classify,
    /// Compare the exact survival probability with the regime asymptote.
    Predict,
    /// Stream per-replicate terminal records of the immigration process.
    Simulate,
    /// Run a named Monte Carlo comparison suite (key: suite).
    Verify,
}

enum CliError {
    Config(String),
    Numeric(String),
    Verification,
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain { .. }
            | CoreError::UnsupportedFamily(_)
            | CoreError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Verification) => {
            eprintln!("verification failure: one or more hard gates failed");
            ExitCode::from(4)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse_file(&text).map_err(CliError::Config)?
        }
        None => RunConfig::default(),
    };
    config.apply_set_args(&cli.sets).map_err(CliError::Config)?;

    let format: Format = cli
        .format
        .as_deref()
        .or(config.get("output_format"))
        .unwrap_or("csv")
        .parse()
        .map_err(CliError::Config)?;
    let output_path = cli
        .output
        .clone()
        .or_else(|| config.get("output_path").map(PathBuf::from));
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => config.u64("seed").map_err(CliError::Config)?,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0)) // 0 = available parallelism
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let (table, verification_failed) = pool.install(|| match cli.command {
        Command::Analytic => cmd_analytic(&config).map(|t| (t, false)),
        Command::Classify => cmd_classify(&config).map(|t| (t, false)),
        Command::Predict => cmd_predict(&config).map(|t| (t, false)),
        Command::Simulate => cmd_simulate(&config, seed).map(|t| (t, false)),
        Command::Verify => cmd_verify(&config, seed),
    })?;

    match output_path {
        Some(path) => {
            let mut file = std::fs::File::create(&path)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            table
                .write(format, &mut file)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table
                .write(format, &mut lock)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            lock.flush().ok();
        }
    }
    if verification_failed {
        return Err(CliError::Verification);
    }
    Ok(())
}

fn t_grid(config: &RunConfig) -> Result<Vec<f64>, CliError> {
    let grid = match config.grid("t_grid").map_err(CliError::Config)? {
        Some(g) => g,
        None => match config.f64("t").map_err(CliError::Config)? {
            Some(t) => vec![t],
            None => return Err(CliError::Config("missing t_grid (or t)".into())),
        },
    };
    if grid.is_empty() {
        return Err(CliError::Config("t_grid is empty".into()));
    }
    if grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(CliError::Config("t_grid entries must be >= 0".into()));
    }
    Ok(grid)
}

fn cmd_analytic(config: &RunConfig) -> Result<Table, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let grid = t_grid(config)?;
    let engine = AnalyticEngine::with_defaults(lawset)?;
    let mut table = Table::new(vec!["t", "F(t;0)", "q(t)", "R(t)", "Q(t)", "I(t)", "P_t"]);
    for &t in &grid {
        table.push(vec![
            t.into(),
            engine.f(t, 0.0)?.into(),
            engine.q0(t)?.into(),
            engine.r_cum(t)?.into(),
            engine.q_cum(t)?.into(),
            engine.i_conv(t, 0.0)?.into(),
            engine.p_survival(t)?.into(),
        ]);
    }
    Ok(table)
}

fn opt_cell(v: Option<f64>) -> Cell {
    Cell::Num(v.unwrap_or(f64::INFINITY))
}

fn cmd_classify(config: &RunConfig) -> Result<Table, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let engine = AnalyticEngine::with_defaults(lawset)?;
    let regime = classify(&engine)?;
    let mut table = Table::new(vec![
        "tag",
        "limit_tag",
        "survival_theorem",
        "limit_theorem",
        "Q",
        "R",
        "d",
        "K",
        "normalization",
    ]);
    table.push(vec![
        regime.tag.label().into(),
        regime.limit_tag.label().into(),
        regime.tag.theorem().into(),
        regime.limit_tag.theorem().into(),
        opt_cell(regime.q_total),
        opt_cell(regime.r_total),
        match regime.d {
            Some(d) => Cell::Num(d),
            None => Cell::Text(String::new()),
        },
        match regime.k {
            Some(k) => Cell::Num(k),
            None => Cell::Text(String::new()),
        },
        regime.limit_tag.normalization().to_string().into(),
    ]);
    Ok(table)
}

fn cmd_predict(config: &RunConfig) -> Result<Table, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let grid = t_grid(config)?;
    if grid.iter().any(|t| *t <= 0.0) {
        return Err(CliError::Config("predict needs strictly positive t".into()));
    }
    let engine = AnalyticEngine::with_defaults(lawset)?;
    let regime = classify(&engine)?;
    let mut table = Table::new(vec!["t", "P_t", "predicted", "ratio"]);
    for &t in &grid {
        let exact = engine.p_survival(t)?;
        let predicted = predict_survival(&regime, &engine, t)?;
        table.push(vec![
            t.into(),
            exact.into(),
            predicted.into(),
            (exact / predicted).into(),
        ]);
    }
    Ok(table)
}

fn sim_parameters(config: &RunConfig, seed: Option<u64>) -> Result<(SimConfig, usize), CliError> {
    let t = config
        .f64("t")
        .map_err(CliError::Config)?
        .ok_or_else(|| CliError::Config("missing key t".into()))?;
    let seed = seed.ok_or_else(|| {
        CliError::Config("randomized commands require an explicit --seed (or seed key)".into())
    })?;
    let n_reps = config
        .u64("n_reps")
        .map_err(CliError::Config)?
        .ok_or_else(|| CliError::Config("missing key n_reps".into()))? as usize;
    if n_reps == 0 {
        return Err(CliError::Config("n_reps must be >= 1".into()));
    }
    let mut base = SimConfig::new(t, seed);
    base.max_population = config
        .u64("max_population")
        .map_err(CliError::Config)?
        .unwrap_or(DEFAULT_MAX_POPULATION);
    base.max_events = config
        .u64("max_events")
        .map_err(CliError::Config)?
        .unwrap_or(DEFAULT_MAX_EVENTS);
    Ok((base, n_reps))
}

fn cmd_simulate(config: &RunConfig, seed: Option<u64>) -> Result<Table, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let (base, n_reps) = sim_parameters(config, seed)?;
    let sim = Simulator::new(&lawset)?;
    let outcomes = run_replicates(&sim, &base, n_reps)?;
    let mut table = Table::new(vec![
        "replicate_index",
        "population",
        "survived",
        "saturated",
        "truncated",
        "n_branch_events",
        "n_immigration_events",
    ]);
    for (i, o) in outcomes.iter().enumerate() {
        table.push(vec![
            (i as u64).into(),
            o.population.into(),
            o.survived.into(),
            o.saturated.into(),
            o.truncated.into(),
            o.n_branch_events.into(),
            o.n_immigration_events.into(),
        ]);
    }
    Ok(table)
}

fn report_rows(table: &mut Table, reports: &[ComparisonReport]) {
    for r in reports {
        table.push(vec![
            r.quantity.clone().into(),
            r.empirical.mean.into(),
            r.empirical.stderr.into(),
            (r.empirical.n as u64).into(),
            (r.empirical.n_survived as u64).into(),
            (r.empirical.n_saturated as u64).into(),
            (r.empirical.n_truncated as u64).into(),
            r.predicted.into(),
            r.z_score.into(),
            r.policy.label().into(),
            r.pass.into(),
            r.inconclusive.into(),
        ]);
    }
}

fn verify_table() -> Table {
    Table::new(vec![
        "quantity",
        "mean",
        "stderr",
        "n",
        "n_survived",
        "n_saturated",
        "n_truncated",
        "predicted",
        "z_score",
        "policy",
        "pass",
        "inconclusive",
    ])
}

fn standard_lawset(theta: f64, alpha: f64, gamma: f64) -> Result<branching::LawSet, CliError> {
    use branching::laws::*;
    Ok(branching::LawSet::new(
        OffspringLaw::standard(gamma)?,
        ImmigrationLaw::sibuya(alpha)?,
        IntensityLaw::standard(theta, 1.0)?,
        1.0,
    )?)
}

fn cmd_verify(config: &RunConfig, seed: Option<u64>) -> Result<(Table, bool), CliError> {
    let suite = config
        .get("suite")
        .ok_or_else(|| CliError::Config("missing key suite".into()))?
        .to_string();
    let mut table = verify_table();
    let reports = match suite.as_str() {
        "analytic-gates" => verify_analytic_gates(config, seed)?,
        "survival" => verify_survival(config, seed)?,
        "lemma2" => {
            let lawset = config.lawset().map_err(CliError::Config)?;
            let engine = AnalyticEngine::with_defaults(lawset)?;
            check_lemma2(&engine, 1e6, &[0.5, 1.0, 2.0], &[0.5, 1.0, 2.0])?
        }
        "stationary" => verify_stationary(config, seed)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown suite {other:?} (expected analytic-gates, survival, lemma2, stationary)"
            )))
        }
    };
    report_rows(&mut table, &reports);
    for r in &reports {
        if let Some(warning) = r.empirical.exclusion_warning() {
            eprintln!("warning: {}: {warning}", r.quantity);
        }
    }
    let failed = reports.iter().any(|r| !r.pass && !r.inconclusive);
    Ok((table, failed))
}

/// The fixed hard gates: simulator versus closed-form transforms on the
/// canonical law sets.
fn verify_analytic_gates(
    config: &RunConfig,
    seed: Option<u64>,
) -> Result<Vec<ComparisonReport>, CliError> {
    let seed = seed.ok_or_else(|| {
        CliError::Config("randomized commands require an explicit --seed (or seed key)".into())
    })?;
    let n_reps = config
        .u64("n_reps")
        .map_err(CliError::Config)?
        .unwrap_or(100_000) as usize;
    if n_reps < 100 {
        return Err(CliError::Config("n_reps must be >= 100".into()));
    }
    let mut reports = Vec::new();

    let binary = standard_lawset(2.0, 1.0, 1.0)?;
    let heavy = standard_lawset(2.0, 0.5, 0.5)?;
    let sim_binary = Simulator::new(&binary)?;
    let sim_heavy = Simulator::new(&heavy)?;
    let engine = AnalyticEngine::with_defaults(binary)?;

    let z_survival = |sim: &Simulator, t: f64, seed: u64| -> Result<Estimate, CoreError> {
        let outcomes: Result<Vec<_>, _> = (0..n_reps as u64)
            .map(|i| sim.run_z(&SimConfig::new(t, seed).replicate(i), 1))
            .collect();
        Ok(survival_estimate_from(&outcomes?))
    };
    reports.push(ComparisonReport::build(
        "P(Z(2)>0) binary vs 1/2",
        z_survival(&sim_binary, 2.0, seed)?,
        0.5,
        TolerancePolicy::Ci3Sigma,
    ));
    reports.push(ComparisonReport::build(
        "P(Z(3)>0) gamma=0.5 vs 1/4",
        z_survival(&sim_heavy, 3.0, seed.wrapping_add(1))?,
        0.25,
        TolerancePolicy::Ci3Sigma,
    ));
    reports.push(ComparisonReport::build(
        "P(Y(1)>0) binary vs 1-exp(-I(1))",
        estimate_survival(
            &sim_binary,
            &SimConfig::new(1.0, seed.wrapping_add(2)),
            n_reps,
        )?,
        engine.p_survival(1.0)?,
        TolerancePolicy::Ci3Sigma,
    ));
    for t in [1.0, 5.0] {
        let outcomes: Result<Vec<_>, CoreError> = (0..n_reps as u64)
            .map(|i| {
                sim_binary.run_z(
                    &SimConfig::new(t, seed.wrapping_add(3 + t as u64)).replicate(i),
                    1,
                )
            })
            .collect();
        let outcomes = outcomes?;
        for s in [0.3f64, 0.7] {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for o in &outcomes {
                let v = s.powf(o.population as f64);
                sum += v;
                sumsq += v * v;
            }
            let n = outcomes.len();
            let mean = sum / n as f64;
            let var = ((sumsq - sum * sum / n as f64) / (n as f64 - 1.0)).max(0.0);
            let est = Estimate {
                mean,
                stderr: (var / n as f64).sqrt(),
                n,
                n_survived: outcomes.iter().filter(|o| o.survived).count(),
                n_saturated: 0,
                n_truncated: 0,
            };
            reports.push(ComparisonReport::build(
                format!("E[s^Z(t)] s={s} t={t} vs F(t;s)"),
                est,
                engine.f(t, s)?,
                TolerancePolicy::Ci3Sigma,
            ));
        }
    }
    Ok(reports)
}

/// Survival of the configured law set versus the exact `1 - exp(-I(t))`.
fn verify_survival(config: &RunConfig, seed: Option<u64>) -> Result<Vec<ComparisonReport>, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let (base, n_reps) = sim_parameters(config, seed)?;
    let sim = Simulator::new(&lawset)?;
    let engine = AnalyticEngine::with_defaults(lawset)?;
    let est = estimate_survival(&sim, &base, n_reps)?;
    Ok(vec![ComparisonReport::build(
        format!("P(Y({})>0) vs 1-exp(-I)", base.t_end),
        est,
        engine.p_survival(base.t_end)?,
        TolerancePolicy::Ci3Sigma,
    )])
}

/// Conditional generating function of the configured law set against the
/// exact finite-t value (hard) and the stationary limit (soft).
fn verify_stationary(
    config: &RunConfig,
    seed: Option<u64>,
) -> Result<Vec<ComparisonReport>, CliError> {
    let lawset = config.lawset().map_err(CliError::Config)?;
    let (base, n_reps) = sim_parameters(config, seed)?;
    let s_grid = config
        .grid("s_grid")
        .map_err(CliError::Config)?
        .unwrap_or_else(|| vec![0.1, 0.3, 0.5, 0.7, 0.9]);
    let sim = Simulator::new(&lawset)?;
    let engine = AnalyticEngine::with_defaults(lawset)?;
    // Soft-row slack: the analytically known finite-t gap plus noise room.
    let q_total = engine
        .q_total()?
        .finite()
        .ok_or(CoreError::UnavailableConstant("Q"))?;
    let mut gap = 0.0f64;
    for &s in &s_grid {
        let exact = engine.cond_pgf(base.t_end, s)?;
        let limit = 1.0
            - engine
                .delta(s)?
                .finite()
                .ok_or(CoreError::UnavailableConstant("Delta(s)"))?
                / q_total;
        gap = gap.max((exact - limit).abs());
    }
    Ok(check_stationary_pgf(
        &sim,
        &engine,
        &base,
        n_reps,
        &s_grid,
        gap + 0.02,
    )?)
}
