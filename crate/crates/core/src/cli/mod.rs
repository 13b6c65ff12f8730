//! Command-line experiment runner.
//!
//! Exit codes: `0` success, `1` I/O failure, `2` configuration error, `3`
//! numerical failure (including violated certificates).

pub mod config;
pub mod presets;
pub mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bounds::{self, BoundError, Grid};
use crate::inar::{self, ModelError, ModelSpec, TriangularSpec};
use crate::laws::{self, IntensityMeasure, LawError};
use crate::limits::{self, LimitError};
use crate::montecarlo::{self, SimConfig, SimError};
use crate::pmf::{Pmf, PmfError};
pub use config::{ConfigError, Experiment, ExperimentConfig, Format};
pub use presets::{build_preset, preset_catalog, Process, Scenario, Target};
pub use report::{ConvergenceReport, ConvergenceRow, LawReport, LawRow, Report};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "INAR_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PmfError> for CliError {
    fn from(e: PmfError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<LawError> for CliError {
    fn from(e: LawError) -> Self {
        match e {
            LawError::TailTooLarge { .. } | LawError::SupportTooLarge(_) | LawError::Pmf(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tolerance { .. } | ModelError::StateCap { .. } | ModelError::Pmf(_) => {
                CliError::Numeric(e.to_string())
            }
            ModelError::Law(law) => law.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<LimitError> for CliError {
    fn from(e: LimitError) -> Self {
        match e {
            LimitError::Model(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Law(l) => l.into(),
            BoundError::Model(m) => m.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GridArg {
    Coarse,
    Fine,
}

#[derive(Debug, Parser)]
#[command(name = "inar", version, about = "Exact laws and limit checks for nearly critical INAR(1) processes")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file; defaults to $INAR_OUTPUT_DIR/<scenario>-<experiment>.<ext>, else stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the Monte Carlo and sweep seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs an experiment file (TOML or JSON).
    Run { config: PathBuf },
    /// Prints the preset catalog as JSON.
    Presets,
    /// Sweeps the bound certificates.
    VerifyBounds {
        #[arg(long, value_enum, default_value = "coarse")]
        grid: GridArg,
    },
    /// Runs a short battery of internal consistency checks.
    Selftest,
}

/// Parses `std::env::args` and runs; the return value is the process exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("inar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(t) = cli.tolerance {
                cfg.tolerance = t;
            }
            if let (Some(seed), Some(mc)) = (cli.seed, cfg.mc.as_mut()) {
                mc.seed = seed;
            }
            if let Some(f) = cli.format {
                cfg.output.format = f;
            }
            if let Some(p) = &cli.output {
                cfg.output.path = Some(p.clone());
            }
            let report = run_with_seed(&cfg, cli.seed)?;
            let name = format!("{}-{}", scenario_name(&report), experiment_slug(cfg.experiment));
            emit(&report, cfg.output.format, cfg.output.path.as_deref(), &name)?;
            Ok(if report.passed() { 0 } else { 3 })
        }
        Command::Presets => {
            let text = serde_json::to_string_pretty(&preset_catalog()).map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
            Ok(0)
        }
        Command::VerifyBounds { grid } => {
            let grid = match grid {
                GridArg::Coarse => Grid::Coarse,
                GridArg::Fine => Grid::Fine,
            };
            let report = Report::Bounds { sweeps: bounds::sweep(grid, cli.seed.unwrap_or(0))? };
            emit(&report, cli.format.unwrap_or_default(), cli.output.as_deref(), "verify-bounds")?;
            Ok(if report.passed() { 0 } else { 3 })
        }
        Command::Selftest => Ok(if selftest() { 0 } else { 3 }),
    }
}

fn scenario_name(report: &Report) -> String {
    match report {
        Report::Convergence(r) => r.scenario.clone(),
        Report::Law(r) => r.scenario.clone(),
        Report::Conditions { scenario, .. } => scenario.clone(),
        Report::Bounds { .. } => "bounds".into(),
    }
}

fn experiment_slug(e: Experiment) -> &'static str {
    match e {
        Experiment::Exact => "exact",
        Experiment::Simulate => "simulate",
        Experiment::LimitCheck => "limit-check",
        Experiment::BoundsSweep => "bounds-sweep",
        Experiment::Convergence => "convergence",
    }
}

fn emit(report: &Report, format: Format, path: Option<&std::path::Path>, name: &str) -> Result<(), CliError> {
    let text = report.render(format).map_err(CliError::Io)?;
    let path = path.map(PathBuf::from).or_else(|| {
        std::env::var_os(OUTPUT_DIR_ENV).map(|dir| PathBuf::from(dir).join(format!("{name}.{}", format.extension())))
    });
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::Io(e.to_string()))?;
            }
            std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(())
}

/// Validates the config and runs the experiment it describes.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    run_with_seed(config, None)
}

fn run_with_seed(config: &ExperimentConfig, seed: Option<u64>) -> Result<Report, CliError> {
    config.validate()?;
    let scenario = config.scenario()?;
    let tol = config.tolerance;
    match config.experiment {
        Experiment::Convergence => Ok(Report::Convergence(convergence(&scenario, &config.n_list, tol)?)),
        Experiment::Exact => {
            let mut rows = Vec::new();
            for &n in &config.n_list {
                let law = scenario_law(&scenario, n, tol)?;
                rows.extend(law.probs().iter().enumerate().map(|(k, &p)| LawRow { n, k: Some(k), probability: p }));
                rows.push(LawRow { n, k: None, probability: law.tail_mass() });
            }
            Ok(Report::Law(LawReport { scenario: scenario.name, rows }))
        }
        Experiment::Simulate => {
            let Process::Inar { model } = &scenario.process else {
                return Err(CliError::Config("simulate needs an INAR model".into()));
            };
            let mc = config.mc.as_ref().expect("validated");
            let mut rows = Vec::new();
            for &n in &config.n_list {
                let start = Instant::now();
                let sim = SimConfig {
                    replicates: mc.replicates,
                    horizon: n,
                    seed: seed.unwrap_or(mc.seed),
                    worker_hint: mc.worker_hint,
                };
                let empirical = montecarlo::empirical_pmf(model, &sim)?;
                let exact = inar::exact_law(model, n, tol)?;
                let tv = empirical.pmf.tv_distance(&exact);
                rows.push(ConvergenceRow {
                    n,
                    tv: tv.estimate,
                    tv_lo: tv.lower,
                    tv_hi: tv.upper,
                    target: "exact".into(),
                    bound: None,
                    wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
            Ok(Report::Convergence(ConvergenceReport {
                scenario: scenario.name,
                experiment: Experiment::Simulate,
                rows,
            }))
        }
        Experiment::LimitCheck => {
            let conditions = match &scenario.process {
                Process::Inar { model } => limits::check_hypotheses(model, scenario.theorem, &config.n_list)?,
                Process::Triangular { spec } => limits::check_triangular(spec, scenario.theorem, &config.n_list)?,
            };
            Ok(Report::Conditions { scenario: scenario.name, conditions })
        }
        Experiment::BoundsSweep => {
            let seed = seed.or(config.mc.as_ref().map(|m| m.seed)).unwrap_or(0);
            Ok(Report::Bounds { sweeps: bounds::sweep(Grid::Coarse, seed)? })
        }
    }
}

fn scenario_law(scenario: &Scenario, n: usize, tol: f64) -> Result<Pmf, CliError> {
    Ok(match &scenario.process {
        Process::Inar { model } => inar::exact_law(model, n, tol)?,
        Process::Triangular { spec } => inar::triangular_law(spec, n, tol)?,
    })
}

fn target_law(target: &Target, tol: f64) -> Result<Pmf, CliError> {
    Ok(match target {
        Target::Poisson { lambda } => laws::poisson(*lambda, tol)?,
        Target::CompoundPoisson { measure } => laws::compound_poisson(measure, tol)?,
    })
}

/// Distance of the exact law to the scenario target along `n_list`.
pub fn convergence(scenario: &Scenario, n_list: &[usize], tol: f64) -> Result<ConvergenceReport, CliError> {
    let target = scenario
        .target
        .as_ref()
        .ok_or_else(|| CliError::Config("convergence needs a target (model.target)".into()))?;
    let target_pmf = target_law(target, tol)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let start = Instant::now();
        let law = scenario_law(scenario, n, tol)?;
        let tv = law.tv_distance(&target_pmf);
        let bound = match &scenario.process {
            Process::Inar { model } => inar_bound(model, target, n)?,
            Process::Triangular { spec } => triangular_bound(spec, target, n)?,
        };
        rows.push(ConvergenceRow {
            n,
            tv: tv.estimate,
            tv_lo: tv.lower,
            tv_hi: tv.upper,
            target: target.label(),
            bound,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(ConvergenceReport { scenario: scenario.name.clone(), experiment: Experiment::Convergence, rows })
}

/// Closed-form upper bound on the distance to the target, when available.
///
/// Poisson targets: `Σ (3/2) m₂ρ² + (m₁ρ)² + |Σ m₁ρ − λ|`. Compound Poisson
/// targets: `Σ (m₁ρ)² + ‖ν − μ‖₁` with `ν = Σ_k Bi(ε_k, ρ_{[k,n]})` on the
/// positive integers. Heavy-tailed immigration gives no bound.
fn inar_bound(model: &ModelSpec, target: &Target, n: usize) -> Result<Option<f64>, CliError> {
    match target {
        Target::Poisson { lambda } => {
            Ok(bounds::poisson_chain_bound(model, n)?.map(|(b, mean)| b + (mean - lambda).abs()))
        }
        Target::CompoundPoisson { measure } => {
            let products = model.rho_products(n)?;
            let mut acc = 0.0;
            let mut nu: Vec<f64> = Vec::new();
            for (k, &p) in (1..=n).zip(&products) {
                let law = model.immigration(k)?;
                let laws::ImmigrationLaw::Finite { pmf } = &law else {
                    if law.is_heavy_tailed() {
                        return Ok(None);
                    }
                    // Poisson immigration: its thinning is Poisson with mean rate·p.
                    let m1 = law.factorial_moment(1)?.value;
                    acc += (m1 * p).powi(2);
                    let thinned = law.thinned(p, 1e-15)?;
                    add_positive(&mut nu, &thinned);
                    continue;
                };
                if pmf.tail_mass() > 0.0 {
                    return Ok(None);
                }
                acc += (pmf.mean().value * p).powi(2);
                add_positive(&mut nu, &laws::binomial_mixture(pmf, p)?);
            }
            Ok(Some(acc + intensity_gap(&nu, measure)))
        }
    }
}

fn add_positive(nu: &mut Vec<f64>, pmf: &Pmf) {
    if nu.len() < pmf.len().saturating_sub(1) {
        nu.resize(pmf.len() - 1, 0.0);
    }
    for (slot, &p) in nu.iter_mut().zip(pmf.probs().iter().skip(1)) {
        *slot += p;
    }
}

/// `‖ν − μ‖₁`, charging the unstored part of `μ` in full.
fn intensity_gap(nu: &[f64], mu: &IntensityMeasure) -> f64 {
    let len = nu.len().max(mu.support_len());
    let stored: f64 = (1..=len).map(|j| (nu.get(j - 1).copied().unwrap_or(0.0) - mu.weight(j)).abs()).sum();
    stored + mu.residual().max(mu.tail_bound())
}

fn triangular_bound(spec: &TriangularSpec, target: &Target, n: usize) -> Result<Option<f64>, CliError> {
    let Target::Poisson { lambda } = target else {
        return Ok(None);
    };
    let mut bound = 0.0;
    let mut mean = 0.0;
    for entry in spec.row(n)? {
        let m1 = entry.law.mean().value;
        let m2 = entry.law.factorial_moment(2)?.value;
        bound += 1.5 * m2 * entry.p * entry.p + (m1 * entry.p).powi(2);
        mean += m1 * entry.p;
    }
    Ok(Some(bound + (mean - lambda).abs()))
}

/// Quick internal consistency battery; prints one line per check.
pub fn selftest() -> bool {
    let mut ok = true;
    let mut report = |name: &str, result: Result<bool, CliError>| {
        let pass = matches!(result, Ok(true));
        match result {
            Ok(_) => println!("{} {name}", if pass { "PASS" } else { "FAIL" }),
            Err(e) => println!("FAIL {name}: {e}"),
        }
        ok &= pass;
    };

    report("exact law matches brute force", (|| {
        let model = ModelSpec::new(
            "selftest",
            inar::RhoSchedule::Explicit { values: vec![0.3, 0.6, 0.8, 0.5, 0.9] },
            inar::ImmigrationSchedule::Constant {
                law: laws::ImmigrationLaw::Finite { pmf: Pmf::canonicalize(vec![0.5, 0.3, 0.2], 0.0)? },
            },
        );
        let exact = inar::exact_law(&model, 5, 1e-14)?;
        let brute = inar::brute_force_law(&model, 5, 64)?;
        Ok(exact.tv_distance(&brute).estimate < 1e-12)
    })());

    report("thm31 within 1/n envelope", (|| {
        let scenario = build_preset("thm31", &Default::default(), 1e-12)?;
        let r = convergence(&scenario, &[10, 100], 1e-12)?;
        Ok(r.rows.iter().all(|row| row.tv <= 1.0 / row.n as f64))
    })());

    report("bound sweep has no violations", (|| {
        Ok(bounds::sweep(Grid::Coarse, 0)?.iter().all(|s| s.passed()))
    })());

    report("report round trip", (|| {
        let scenario = build_preset("thm41", &Default::default(), 1e-12)?;
        let r = convergence(&scenario, &[5, 20], 1e-12)?;
        let text = Report::Convergence(r.clone()).render(Format::Csv).map_err(CliError::Io)?;
        let back = ConvergenceReport::from_csv(&r.scenario, r.experiment, &text).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(back == r)
    })());

    ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_commands() {
        let cli = Cli::try_parse_from(["inar", "verify-bounds", "--grid", "fine", "--format", "json"]).unwrap();
        assert!(matches!(cli.command, Command::VerifyBounds { grid: GridArg::Fine }));
        assert_eq!(cli.format, Some(Format::Json));
        assert!(Cli::try_parse_from(["inar", "run"]).is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(ConfigError::EmptyHorizons).exit_code(), 2);
        assert_eq!(CliError::from(ModelError::Tolerance { tail: 1.0, tolerance: 1e-9 }).exit_code(), 3);
        assert_eq!(CliError::from(ModelError::Undefined(3)).exit_code(), 2);
    }

    #[test]
    fn thm51_bound_column() {
        let scenario = build_preset("thm51-bounded", &Default::default(), 1e-10).unwrap();
        let r = convergence(&scenario, &[20, 40], 1e-10).unwrap();
        for row in &r.rows {
            let bound = row.bound.unwrap();
            assert!(row.tv <= bound, "{row:?}");
        }
    }

    #[test]
    fn selftest_passes() {
        assert!(selftest());
    }
}
