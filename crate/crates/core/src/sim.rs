//! Closed-loop simulation on realized trajectories and multi-seed comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::baselines::{
    corrective_wrap, pi_step, solve_deterministic_dp, solve_shortest_path, PiConfig, PiState,
};
use crate::error::{Error, Result};
use crate::forecast::{realize, ForecastSeries, Realization};
use crate::grid::StateGrid;
use crate::io::{parse_flag, CsvDoc, ParsedCsv};
use crate::method::{ControllerKind, Method};
use crate::models::TankParams;
use crate::policy::{policy_lookup, Policy};
use crate::solver::{self, grid_energy_kwh, PriceScheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// End-of-step physical temperature, °C.
    pub temp: f64,
    pub control: f64,
    /// Signed, positive when bought.
    pub grid_energy: f64,
    pub cash_flow: f64,
    pub violation: bool,
    pub corrective_active: bool,
    /// The policy lookup fell outside the grid and used a boundary state.
    pub lookup_clamped: bool,
}

const TRACE_COLUMNS: [&str; 8] = [
    "k",
    "temp_c",
    "control",
    "grid_energy_kwh",
    "cash_flow",
    "violation",
    "corrective_active",
    "lookup_clamped",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub controller: ControllerKind,
    pub seed: u64,
    pub trace: Vec<StepRecord>,
    pub total_cost: f64,
    pub violation_count: usize,
}

impl SimulationResult {
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut doc = CsvDoc::new();
        doc.meta("kind", "trace")
            .meta("method", self.controller.method)
            .meta("corrective", self.controller.corrective)
            .meta("seed", self.seed)
            .meta("total_cost", self.total_cost)
            .meta("violation_count", self.violation_count)
            .meta("config_hash", config_hash);
        doc.row(TRACE_COLUMNS);
        for r in &self.trace {
            doc.row([
                r.k.to_string(),
                r.temp.to_string(),
                r.control.to_string(),
                r.grid_energy.to_string(),
                r.cash_flow.to_string(),
                u8::from(r.violation).to_string(),
                u8::from(r.corrective_active).to_string(),
                u8::from(r.lookup_clamped).to_string(),
            ]);
        }
        doc.finish()
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let csv = ParsedCsv::parse(text, "trace csv")?;
        let method: Method = csv
            .meta
            .get("method")
            .ok_or_else(|| Error::parse("trace csv", "missing metadata `method`"))?
            .parse()?;
        let corrective: bool = csv.meta_value("corrective")?;
        let cols = csv.require_columns(&TRACE_COLUMNS)?;
        let flag = |r: usize, c: usize| -> Result<bool> {
            parse_flag(&csv.rows[r][c]).ok_or_else(|| {
                Error::parse(
                    "trace csv",
                    format!("row {}: bad flag `{}`", r + 1, csv.rows[r][c]),
                )
            })
        };
        let mut trace = Vec::with_capacity(csv.rows.len());
        for r in 0..csv.rows.len() {
            trace.push(StepRecord {
                k: csv.field(r, cols[0])?,
                temp: csv.field(r, cols[1])?,
                control: csv.field(r, cols[2])?,
                grid_energy: csv.field(r, cols[3])?,
                cash_flow: csv.field(r, cols[4])?,
                violation: flag(r, cols[5])?,
                corrective_active: flag(r, cols[6])?,
                lookup_clamped: flag(r, cols[7])?,
            });
        }
        Ok(SimulationResult {
            controller: ControllerKind::new(method, corrective),
            seed: csv.meta_value("seed")?,
            total_cost: csv.meta_value("total_cost")?,
            violation_count: csv.meta_value("violation_count")?,
            trace,
        })
    }
}

/// Prefix sums of the cash flows.
pub fn accumulate_costs(trace: &[StepRecord]) -> Vec<f64> {
    trace
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r.cash_flow;
            Some(*acc)
        })
        .collect()
}

/// How a controller picks its control from the measured temperature.
#[derive(Debug, Clone)]
pub enum ControlLaw {
    Policy(Arc<Policy>),
    Pi(PiConfig),
}

/// A controller ready to run in closed loop.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: ControllerKind,
    pub law: ControlLaw,
}

impl Controller {
    pub fn policy(policy: Arc<Policy>, corrective: bool) -> Self {
        Controller {
            kind: ControllerKind::new(policy.method, corrective),
            law: ControlLaw::Policy(policy),
        }
    }

    pub fn pi(config: PiConfig, corrective: bool) -> Self {
        Controller {
            kind: ControllerKind::new(Method::Pi, corrective),
            law: ControlLaw::Pi(config),
        }
    }
}

/// Simulate one controller on one realization, starting from `initial_temp`.
pub fn run_closed_loop(
    controller: &Controller,
    realization: &Realization,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    initial_temp: f64,
) -> Result<SimulationResult> {
    if realization.len() != grid.horizon {
        return Err(Error::Config(format!(
            "realization has {} steps but the grid horizon is {}",
            realization.len(),
            grid.horizon
        )));
    }
    if let ControlLaw::Policy(p) = &controller.law {
        if p.grid.horizon != grid.horizon || p.grid.n_states() != grid.n_states() {
            return Err(Error::Config(
                "policy grid does not match the simulation grid".into(),
            ));
        }
    }
    if !initial_temp.is_finite() {
        return Err(Error::Config(format!(
            "initial temperature {initial_temp} is not finite"
        )));
    }
    let step = tank.step(grid.dt)?;
    let mut temp = initial_temp;
    let mut pi = PiState::default();
    let mut trace = Vec::with_capacity(grid.horizon);
    let mut total_cost = 0.0;
    let mut violation_count = 0;
    for (k, real) in realization.points.iter().enumerate() {
        let (base, lookup_clamped) = match &controller.law {
            ControlLaw::Policy(p) => {
                let l = policy_lookup(p, k, temp)?;
                (l.control, l.clamped)
            }
            ControlLaw::Pi(cfg) => {
                let (u, next) = pi_step(pi, temp, grid.dt, cfg);
                pi = next;
                (grid.snap_control(u), false)
            }
        };
        let control = if controller.kind.corrective {
            corrective_wrap(base, temp, grid)
        } else {
            base
        };
        let corrective_active = controller.kind.corrective && temp < grid.comfort_min;
        temp = step.advance(temp, control, real.water);
        if !temp.is_finite() {
            return Err(Error::Numerical(format!(
                "temperature became non-finite at step {k} ({})",
                controller.kind
            )));
        }
        let grid_energy = grid_energy_kwh(real.pv, real.el, control, tank.p_max, grid.dt);
        let cash_flow = scheme.cash_flow(grid_energy, real.price);
        let violation = temp < grid.comfort_min;
        total_cost += cash_flow;
        violation_count += usize::from(violation);
        trace.push(StepRecord {
            k,
            temp,
            control,
            grid_energy,
            cash_flow,
            violation,
            corrective_active,
            lookup_clamped,
        });
    }
    Ok(SimulationResult {
        controller: controller.kind,
        seed: realization.seed,
        trace,
        total_cost,
        violation_count,
    })
}

/// Everything a multi-seed comparison needs.
#[derive(Debug, Clone)]
pub struct ComparisonSetup {
    pub series: ForecastSeries,
    pub tank: TankParams,
    pub grid: StateGrid,
    pub scheme: PriceScheme,
    pub comfort_penalty: f64,
    pub pi: PiConfig,
    pub controllers: Vec<ControllerKind>,
    pub seeds: Vec<u64>,
    pub initial_temp: f64,
    pub config_hash: String,
    pub currency: String,
}

/// Aggregates for one controller over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSummary {
    pub controller: ControllerKind,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_violations: f64,
    pub std_violations: f64,
}

impl ControllerSummary {
    fn from_results(controller: ControllerKind, results: &[&SimulationResult]) -> Self {
        let costs: Vec<f64> = results.iter().map(|r| r.total_cost).collect();
        let viol: Vec<f64> = results.iter().map(|r| r.violation_count as f64).collect();
        let (mean_cost, std_cost) = mean_std(&costs);
        let (mean_violations, std_violations) = mean_std(&viol);
        ControllerSummary {
            controller,
            mean_cost,
            std_cost,
            mean_violations,
            std_violations,
        }
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub scheme: PriceScheme,
    pub config_hash: String,
    pub currency: String,
    pub seeds: Vec<u64>,
    /// Sorted by controller.
    pub summaries: Vec<ControllerSummary>,
    /// Sorted by controller, then seed order.
    pub results: Vec<SimulationResult>,
    /// Policies solved for the run, keyed by method.
    pub policies: BTreeMap<Method, Arc<Policy>>,
}

/// Solve the policy for a method on the prediction series.
pub fn solve_policy(
    method: Method,
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    comfort_penalty: f64,
) -> Result<Policy> {
    match method {
        Method::StochasticDp => Ok(solver::solve(series, tank, grid, scheme, comfort_penalty)?.0),
        Method::DeterministicDp => {
            Ok(solve_deterministic_dp(series, tank, grid, scheme, comfort_penalty)?.0)
        }
        Method::ShortestPath => {
            Ok(solve_shortest_path(series, tank, grid, scheme, comfort_penalty)?.policy)
        }
        Method::Pi => Err(Error::Config(
            "the PI controller has no offline policy".into(),
        )),
    }
}

pub fn run_comparison(setup: &ComparisonSetup) -> Result<ComparisonReport> {
    if setup.controllers.is_empty() || setup.seeds.is_empty() {
        return Err(Error::Config(
            "comparison needs at least one controller and one seed".into(),
        ));
    }
    setup.pi.validate()?;
    let mut controllers = setup.controllers.clone();
    controllers.sort();
    controllers.dedup();

    let mut policies = BTreeMap::new();
    for kind in &controllers {
        if kind.method.has_policy() && !policies.contains_key(&kind.method) {
            let policy = solve_policy(
                kind.method,
                &setup.series,
                &setup.tank,
                &setup.grid,
                &setup.scheme,
                setup.comfort_penalty,
            )?
            .with_config_hash(setup.config_hash.clone());
            policies.insert(kind.method, Arc::new(policy));
        }
    }
    let runners: Vec<Controller> = controllers
        .iter()
        .map(|kind| match policies.get(&kind.method) {
            Some(p) => Controller::policy(Arc::clone(p), kind.corrective),
            None => Controller::pi(setup.pi, kind.corrective),
        })
        .collect();

    let realizations: Vec<Realization> = setup
        .seeds
        .par_iter()
        .map(|&seed| realize(&setup.series, seed))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..runners.len())
        .flat_map(|c| (0..realizations.len()).map(move |s| (c, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, s)| {
            run_closed_loop(
                &runners[c],
                &realizations[s],
                &setup.tank,
                &setup.grid,
                &setup.scheme,
                setup.initial_temp,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = controllers
        .iter()
        .map(|&kind| {
            let mine: Vec<&SimulationResult> =
                results.iter().filter(|r| r.controller == kind).collect();
            ControllerSummary::from_results(kind, &mine)
        })
        .collect();
    Ok(ComparisonReport {
        scheme: setup.scheme,
        config_hash: setup.config_hash.clone(),
        currency: setup.currency.clone(),
        seeds: setup.seeds.clone(),
        summaries,
        results,
        policies,
    })
}

impl ComparisonReport {
    pub fn summary(&self, kind: ControllerKind) -> Option<&ControllerSummary> {
        self.summaries.iter().find(|s| s.controller == kind)
    }

    pub fn results_for(&self, kind: ControllerKind) -> impl Iterator<Item = &SimulationResult> {
        self.results.iter().filter(move |r| r.controller == kind)
    }

    fn meta(&self, doc: &mut CsvDoc, kind: &str) {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        doc.meta("kind", kind)
            .meta("price_scheme", self.scheme.name())
            .meta("currency", &self.currency)
            .meta("seeds", seeds.join(" "))
            .meta("config_hash", &self.config_hash);
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new();
        self.meta(&mut doc, "report");
        doc.row([
            "method",
            "corrective",
            "mean_cost",
            "std_cost",
            "mean_violations",
            "std_violations",
            "runs",
        ]);
        for s in &self.summaries {
            doc.row([
                s.controller.method.to_string(),
                s.controller.corrective.to_string(),
                s.mean_cost.to_string(),
                s.std_cost.to_string(),
                s.mean_violations.to_string(),
                s.std_violations.to_string(),
                self.seeds.len().to_string(),
            ]);
        }
        doc.finish()
    }

    pub fn per_seed_csv(&self) -> String {
        let mut doc = CsvDoc::new();
        self.meta(&mut doc, "per_seed");
        doc.row(["method", "corrective", "seed", "total_cost", "violations"]);
        for r in &self.results {
            doc.row([
                r.controller.method.to_string(),
                r.controller.corrective.to_string(),
                r.seed.to_string(),
                r.total_cost.to_string(),
                r.violation_count.to_string(),
            ]);
        }
        doc.finish()
    }

    /// Aligned text table: one row per method, cost and violations without and
    /// with corrective actions.
    pub fn to_table(&self) -> String {
        let cell = |method: Method, corrective: bool| -> (String, String) {
            match self.summary(ControllerKind::new(method, corrective)) {
                Some(s) => (
                    format!("{:.4}", s.mean_cost),
                    format!("{:.1}", s.mean_violations),
                ),
                None => ("-".into(), "-".into()),
            }
        };
        let cost_head = format!("Cost/{}", self.currency);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# price scheme: {}, runs: {}, config hash: {}",
            self.scheme.name(),
            self.seeds.len(),
            self.config_hash
        );
        let _ = writeln!(
            out,
            "{:<18} | {:^25} | {:^25}",
            "", "no corrective actions", "corrective actions"
        );
        let _ = writeln!(
            out,
            "{:<18} | {:>12} {:>12} | {:>12} {:>12}",
            "Method", cost_head, "violations", cost_head, "violations"
        );
        let _ = writeln!(out, "{}", "-".repeat(18 + 3 + 25 + 3 + 25));
        let mut methods: Vec<Method> = self.summaries.iter().map(|s| s.controller.method).collect();
        methods.dedup();
        for m in methods {
            let (c0, v0) = cell(m, false);
            let (c1, v1) = cell(m, true);
            let _ = writeln!(
                out,
                "{:<18} | {c0:>12} {v0:>12} | {c1:>12} {v1:>12}",
                m.label()
            );
        }
        out
    }

    /// One row per step, one column per controller: temperatures of the first seed.
    pub fn temperature_plot_csv(&self) -> String {
        self.plot_csv("plot_temperature", |r| {
            r.trace.iter().map(|s| s.temp).collect()
        })
    }

    /// One row per step, one column per controller: accumulated cost of the first seed.
    pub fn cost_plot_csv(&self) -> String {
        self.plot_csv("plot_accumulated_cost", |r| accumulate_costs(&r.trace))
    }

    fn plot_csv(&self, kind: &str, series: impl Fn(&SimulationResult) -> Vec<f64>) -> String {
        let mut doc = CsvDoc::new();
        self.meta(&mut doc, kind);
        let seed = self.seeds[0];
        doc.meta("plot_seed", seed);
        let runs: Vec<&SimulationResult> = self.results.iter().filter(|r| r.seed == seed).collect();
        let mut header = vec!["k".to_string()];
        header.extend(runs.iter().map(|r| r.controller.to_string()));
        doc.row(header);
        let columns: Vec<Vec<f64>> = runs.iter().map(|r| series(r)).collect();
        let steps = columns.first().map_or(0, Vec::len);
        for k in 0..steps {
            let mut row = vec![k.to_string()];
            row.extend(columns.iter().map(|c| c[k].to_string()));
            doc.row(row);
        }
        doc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{ForecastPoint, RealizedPoint};

    fn flat_series(horizon: usize, water: f64) -> ForecastSeries {
        let p = ForecastPoint {
            water_pred: water,
            pv_pred: 500.0,
            el_pred: 300.0,
            price_pred: 0.3,
            water_sigma: water * 2.0 / 3.0,
            ..ForecastPoint::default()
        };
        ForecastSeries::new(900.0, vec![p; horizon]).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        assert!(accumulate_costs(&[]).is_empty());
        let rec = |c| StepRecord {
            k: 0,
            temp: 60.0,
            control: 0.0,
            grid_energy: 0.0,
            cash_flow: c,
            violation: false,
            corrective_active: false,
            lookup_clamped: false,
        };
        let acc = accumulate_costs(&[rec(0.1), rec(-0.05), rec(0.2)]);
        assert_eq!(acc.len(), 3);
        assert!((acc[0] - 0.1).abs() < 1e-15);
        assert!((acc[1] - 0.05).abs() < 1e-15);
        assert!((acc[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pi_holds_setpoint_without_draw() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(96, 900.0).unwrap();
        let series = flat_series(96, 0.0);
        let real = realize(&series, 1);
        let pi = PiConfig {
            setpoint: 65.0,
            ..PiConfig::default()
        };
        let scheme = PriceScheme::Fixed {
            buy: 0.3,
            sell: 0.1,
        };
        let res = run_closed_loop(
            &Controller::pi(pi, false),
            &real,
            &tank,
            &grid,
            &scheme,
            65.0,
        )
        .unwrap();
        assert_eq!(res.violation_count, 0);
        let sum: f64 = res.trace.iter().map(|r| r.cash_flow).sum();
        assert!((sum - res.total_cost).abs() < 1e-9);
        for r in &res.trace {
            assert_eq!(grid.snap_control(r.control), r.control);
        }
    }

    #[test]
    fn noise_free_run_tracks_cost_to_go() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(12, 900.0).unwrap();
        let series = flat_series(12, 3.0).without_noise();
        let scheme = PriceScheme::Fixed {
            buy: 0.3,
            sell: 0.1,
        };
        let (policy, cost) = solver::solve(&series, &tank, &grid, &scheme, 10.0).unwrap();
        let real = Realization::from_means(&series, 0);
        let start = grid.temp(grid.locate(62.0).0);
        let res = run_closed_loop(
            &Controller::policy(Arc::new(policy), false),
            &real,
            &tank,
            &grid,
            &scheme,
            start,
        )
        .unwrap();
        let expected = cost.get(0, grid.locate(start).0);
        // each step's cash flow depends only on u; grid rounding can change u by one level per step
        let per_step = tank.p_max * grid.du * grid.dt / 3.6e6 * 0.3;
        assert!(
            (res.total_cost - expected).abs() <= per_step * 12.0,
            "{} vs {expected}",
            res.total_cost
        );
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(4, 900.0).unwrap();
        let real = Realization {
            dt: 900.0,
            seed: 0,
            points: vec![RealizedPoint::default(); 3],
        };
        let err = run_closed_loop(
            &Controller::pi(PiConfig::default(), false),
            &real,
            &tank,
            &grid,
            &PriceScheme::Dynamic,
            60.0,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn trace_round_trip() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(16, 900.0).unwrap();
        let series = flat_series(16, 4.0);
        let real = realize(&series, 9);
        let res = run_closed_loop(
            &Controller::pi(PiConfig::default(), true),
            &real,
            &tank,
            &grid,
            &PriceScheme::Dynamic,
            60.0,
        )
        .unwrap();
        let back = SimulationResult::from_csv(&res.to_csv("h")).unwrap();
        assert_eq!(back, res);
    }

    fn setup(
        controllers: Vec<ControllerKind>,
        seeds: Vec<u64>,
        zero_noise: bool,
    ) -> ComparisonSetup {
        let mut series = flat_series(16, 4.0);
        if zero_noise {
            series = series.without_noise();
        }
        ComparisonSetup {
            series,
            tank: TankParams::default(),
            grid: StateGrid::default_for(16, 900.0).unwrap(),
            scheme: PriceScheme::Fixed {
                buy: 0.3,
                sell: 0.1,
            },
            comfort_penalty: 10.0,
            pi: PiConfig::default(),
            controllers,
            seeds,
            initial_temp: 60.0,
            config_hash: "test".into(),
            currency: "EUR".into(),
        }
    }

    #[test]
    fn single_run_report_matches_result() {
        let kind = ControllerKind::new(Method::DeterministicDp, false);
        let report = run_comparison(&setup(vec![kind], vec![3], false)).unwrap();
        assert_eq!(report.results.len(), 1);
        let s = report.summary(kind).unwrap();
        assert_eq!(s.mean_cost, report.results[0].total_cost);
        assert_eq!(s.mean_violations, report.results[0].violation_count as f64);
        assert_eq!((s.std_cost, s.std_violations), (0.0, 0.0));
    }

    #[test]
    fn zero_noise_dp_variants_cost_the_same() {
        let kinds = vec![
            ControllerKind::new(Method::StochasticDp, false),
            ControllerKind::new(Method::DeterministicDp, false),
        ];
        let report = run_comparison(&setup(kinds.clone(), vec![1, 2], true)).unwrap();
        assert_eq!(
            report.policies[&Method::StochasticDp].table(),
            report.policies[&Method::DeterministicDp].table()
        );
        assert_eq!(
            report.summary(kinds[0]).unwrap().mean_cost,
            report.summary(kinds[1]).unwrap().mean_cost
        );
    }

    #[test]
    fn reports_are_deterministic() {
        let kinds: Vec<ControllerKind> = Method::ALL
            .iter()
            .flat_map(|&m| [ControllerKind::new(m, false), ControllerKind::new(m, true)])
            .collect();
        let a = run_comparison(&setup(kinds.clone(), vec![5, 6, 7], false)).unwrap();
        let b = run_comparison(&setup(kinds, vec![5, 6, 7], false)).unwrap();
        assert_eq!(a.results.len(), 24);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.per_seed_csv(), b.per_seed_csv());
        assert_eq!(a.to_table(), b.to_table());
        assert_eq!(a.temperature_plot_csv(), b.temperature_plot_csv());
        assert!(a.to_table().contains("stochastic DP"));
    }
}
