//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines;
use crate::config::{CorrectiveMode, RunConfig, SchemeSelection};
use crate::error::{Error, Result};
use crate::forecast::{generate_synthetic_profiles, ForecastSeries};
use crate::io::{read_to_string, write_atomic};
use crate::method::{ControllerKind, Method};
use crate::sim::{run_comparison, ComparisonReport, ComparisonSetup};
use crate::solver::{self, PriceScheme};

pub const CONFIG_FILE: &str = "heatdp.conf";
pub const THREADS_ENV: &str = "HEATDP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "heatdp",
    version,
    about = "Hot-water tank control by stochastic dynamic programming"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file (flat `section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed_base: Option<u64>,
    /// Number of seeded realizations.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// Restrict to one price scheme (default: as configured).
    #[arg(long, global = true, value_parser = ["fixed", "dynamic"])]
    pub price_scheme: Option<String>,
    #[arg(long, global = true, value_parser = ["on", "off", "both"])]
    pub corrective: Option<String>,
    #[arg(long, global = true, value_parser = ["stochastic-dp", "deterministic-dp", "shortest-path", "pi"])]
    pub method: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic forecast series and a config file.
    Generate {
        #[arg(long)]
        days: Option<usize>,
        /// Step length in minutes.
        #[arg(long)]
        dt_min: Option<f64>,
    },
    /// Solve one method's policy table on the forecast series.
    Solve {
        /// Also write the cost-to-go table.
        #[arg(long)]
        cost_to_go: bool,
    },
    /// Simulate one method on every seeded realization.
    Simulate,
    /// Compare all configured methods and write the report.
    Compare,
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("heatdp: {e}");
            e.exit_code()
        }
    }
}

/// Size the global worker pool from `HEATDP_THREADS` (0 or unset = automatic).
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a whole number, got `{raw}`")))?;
    if n > 0 {
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let cfg = load_config(&cli.global)?;
    let out = &cli.global.out;
    match &cli.command {
        Command::Generate { days, dt_min } => cmd_generate(cfg, out, *days, *dt_min),
        Command::Solve { cost_to_go } => {
            cmd_solve(&cfg, out, require_method(&cli.global)?, *cost_to_go)
        }
        Command::Simulate => cmd_simulate(&cfg, out, require_method(&cli.global)?),
        Command::Compare => cmd_compare(&cfg, out, cli.global.method.as_deref()),
    }
}

fn require_method(global: &GlobalArgs) -> Result<Method> {
    global
        .method
        .as_deref()
        .ok_or_else(|| Error::Config("--method is required for this command".into()))?
        .parse()
}

/// Config file plus command-line overrides.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::parse(&read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(b) = global.seed_base {
        cfg.seed_base = b;
    }
    if let Some(n) = global.seeds {
        cfg.seeds = n;
    }
    if let Some(s) = &global.price_scheme {
        cfg.price_scheme = s.parse::<SchemeSelection>()?;
    }
    if let Some(c) = &global.corrective {
        cfg.corrective = c.parse::<CorrectiveMode>()?;
    }
    cfg.refresh()?;
    Ok(cfg)
}

fn series_path(cfg: &RunConfig, out: &Path) -> PathBuf {
    let p = PathBuf::from(&cfg.series_path);
    if p.is_absolute() {
        p
    } else {
        out.join(p)
    }
}

fn load_series(cfg: &RunConfig, out: &Path) -> Result<ForecastSeries> {
    let path = series_path(cfg, out);
    ForecastSeries::from_csv(&read_to_string(&path)?)
}

pub fn cmd_generate(
    mut cfg: RunConfig,
    out: &Path,
    days: Option<usize>,
    dt_min: Option<f64>,
) -> Result<()> {
    if let Some(d) = days {
        cfg.profile.days = d;
    }
    if let Some(m) = dt_min {
        cfg.profile.dt = m * 60.0;
    }
    cfg.refresh()?;
    let series = generate_synthetic_profiles(&cfg.profile)?;
    let hash = cfg.hash();
    write_atomic(&series_path(&cfg, out), series.to_csv(&hash).as_bytes())?;
    write_atomic(&out.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    println!(
        "wrote {} steps to {} (config hash {hash})",
        series.len(),
        series_path(&cfg, out).display()
    );
    Ok(())
}

fn file_stem(method: Method, scheme: &PriceScheme) -> String {
    format!("{}_{}", method.as_str(), scheme.name())
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, method: Method, with_cost: bool) -> Result<()> {
    if !method.has_policy() {
        return Err(Error::Config(
            "the PI controller has no offline policy".into(),
        ));
    }
    let series = load_series(cfg, out)?;
    let grid = cfg.grid.grid(series.len(), series.dt)?;
    let hash = cfg.hash();
    for scheme in cfg.schemes() {
        let (policy, cost) = match method {
            Method::StochasticDp => {
                solver::solve(&series, &cfg.tank, &grid, &scheme, cfg.comfort_penalty)?
            }
            Method::DeterministicDp => baselines::solve_deterministic_dp(
                &series,
                &cfg.tank,
                &grid,
                &scheme,
                cfg.comfort_penalty,
            )?,
            Method::ShortestPath => {
                let s = baselines::solve_shortest_path(
                    &series,
                    &cfg.tank,
                    &grid,
                    &scheme,
                    cfg.comfort_penalty,
                )?;
                if !s.unreachable.is_empty() {
                    eprintln!(
                        "heatdp: {} nodes without a feasible edge were given full heat",
                        s.unreachable.len()
                    );
                }
                (s.policy, s.path_cost)
            }
            Method::Pi => unreachable!("checked above"),
        };
        let policy = policy.with_config_hash(hash.clone());
        let stem = file_stem(method, &scheme);
        write_atomic(
            &out.join(format!("policy_{stem}.csv")),
            policy.to_csv().as_bytes(),
        )?;
        if with_cost {
            write_atomic(
                &out.join(format!("cost_to_go_{stem}.csv")),
                cost.to_csv(&grid, &hash).as_bytes(),
            )?;
        }
        println!(
            "solved {stem}: {} x {} table",
            grid.horizon,
            grid.n_states()
        );
    }
    Ok(())
}

fn comparison(
    cfg: &RunConfig,
    series: &ForecastSeries,
    scheme: PriceScheme,
    kinds: Vec<ControllerKind>,
) -> Result<ComparisonReport> {
    let setup = ComparisonSetup {
        grid: cfg.grid.grid(series.len(), series.dt)?,
        series: series.clone(),
        tank: cfg.tank.clone(),
        scheme,
        comfort_penalty: cfg.comfort_penalty,
        pi: cfg.pi,
        controllers: kinds,
        seeds: cfg.seed_list(),
        initial_temp: cfg.initial_temp,
        config_hash: cfg.hash(),
        currency: cfg.currency.clone(),
    };
    run_comparison(&setup)
}

fn trace_name(kind: ControllerKind, seed: u64) -> String {
    let suffix = if kind.corrective { "_corrective" } else { "" };
    format!("{}{suffix}_seed{seed}.csv", kind.method.as_str())
}

fn write_traces(report: &ComparisonReport, dir: &Path) -> Result<()> {
    for r in &report.results {
        write_atomic(
            &dir.join(trace_name(r.controller, r.seed)),
            r.to_csv(&report.config_hash).as_bytes(),
        )?;
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path, method: Method) -> Result<()> {
    let series = load_series(cfg, out)?;
    let kinds: Vec<ControllerKind> = cfg
        .corrective
        .settings()
        .iter()
        .map(|&c| ControllerKind::new(method, c))
        .collect();
    for scheme in cfg.schemes() {
        let report = comparison(cfg, &series, scheme, kinds.clone())?;
        let stem = file_stem(method, &scheme);
        write_traces(&report, &out.join("traces").join(scheme.name()))?;
        write_atomic(
            &out.join(format!("simulate_{stem}.csv")),
            report.per_seed_csv().as_bytes(),
        )?;
        for s in &report.summaries {
            println!(
                "{} {}: mean cost {:.4} {}, mean violations {:.2}",
                scheme.name(),
                s.controller,
                s.mean_cost,
                cfg.currency,
                s.mean_violations
            );
        }
    }
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig, out: &Path, only: Option<&str>) -> Result<()> {
    let series = load_series(cfg, out)?;
    let mut cfg = cfg.clone();
    if let Some(m) = only {
        cfg.controllers = vec![m.parse()?];
    }
    let kinds = cfg.controller_kinds();
    for scheme in cfg.schemes() {
        let report = comparison(&cfg, &series, scheme, kinds.clone())?;
        let name = scheme.name();
        write_traces(&report, &out.join("traces").join(name))?;
        write_atomic(
            &out.join(format!("report_{name}.csv")),
            report.to_csv().as_bytes(),
        )?;
        write_atomic(
            &out.join(format!("report_{name}.txt")),
            report.to_table().as_bytes(),
        )?;
        write_atomic(
            &out.join(format!("per_seed_{name}.csv")),
            report.per_seed_csv().as_bytes(),
        )?;
        write_atomic(
            &out.join(format!("plot_temperature_{name}.csv")),
            report.temperature_plot_csv().as_bytes(),
        )?;
        write_atomic(
            &out.join(format!("plot_cost_{name}.csv")),
            report.cost_plot_csv().as_bytes(),
        )?;
        print!("{}", report.to_table());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "heatdp",
            "--seeds",
            "3",
            "compare",
            "--price-scheme",
            "fixed",
            "--corrective",
            "off",
        ])
        .unwrap();
        let cfg = load_config(&cli.global).unwrap();
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.schemes().len(), 1);
        assert_eq!(cfg.controller_kinds().len(), 4);
        assert!(Cli::try_parse_from(["heatdp", "--method", "mpc", "solve"]).is_err());
    }

    #[test]
    fn trace_names() {
        let k = ControllerKind::new(Method::ShortestPath, true);
        assert_eq!(trace_name(k, 4), "shortest-path_corrective_seed4.csv");
    }
}
