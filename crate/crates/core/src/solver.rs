//! Finite-horizon stochastic dynamic programming over the tank temperature grid.
//!
//! Backward induction from the terminal layer. For every state and admissible
//! control the expected stage cost is evaluated at the forecast means, and the
//! expectation of the next cost-to-go is taken over the water-draw distribution
//! by interval inversion: the draw interval that lands in each temperature cell
//! is recovered in closed form from the affine step map and integrated with the
//! draw CDF.
//!
//! Conventions shared with the deterministic baselines:
//! - the terminal cost is `comfort_penalty` for sub-comfort states and zero otherwise;
//! - every step adds `comfort_penalty` times the probability of ending in a
//!   sub-comfort state;
//! - a control `u > 0` is admissible only if the mean-draw next state stays at or
//!   below `comfort_max` (and on the grid); `u = 0` is always admissible;
//! - ties go to the smallest control.

use rayon::prelude::*;

use crate::distribution::DrawModel;
use crate::error::{Error, Result};
use crate::forecast::{ForecastPoint, ForecastSeries};
use crate::grid::{Overflow, StateGrid};
use crate::method::Method;
use crate::models::{round_step, TankParams, TankStep};
use crate::policy::{CostToGo, Policy};

const JOULES_PER_KWH: f64 = 3.6e6;

/// How energy exchanged with the grid is priced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceScheme {
    /// Constant tariff: `buy` for imported energy, `sell` for exported energy.
    Fixed { buy: f64, sell: f64 },
    /// Real-time price taken from the forecast (or realized) price signal.
    Dynamic,
}

impl PriceScheme {
    pub fn name(&self) -> &'static str {
        match self {
            PriceScheme::Fixed { .. } => "fixed",
            PriceScheme::Dynamic => "dynamic",
        }
    }

    /// Money paid for `energy_kwh` (positive = bought). `price_signal` is used
    /// only by the dynamic scheme.
    pub fn cash_flow(&self, energy_kwh: f64, price_signal: f64) -> f64 {
        match *self {
            PriceScheme::Fixed { buy, sell } => {
                if energy_kwh > 0.0 {
                    energy_kwh * buy
                } else {
                    energy_kwh * sell
                }
            }
            PriceScheme::Dynamic => energy_kwh * price_signal,
        }
    }
}

/// Energy bought from the grid over one step, kWh (negative when exporting).
pub fn grid_energy_kwh(pv_w: f64, el_w: f64, control: f64, p_max: f64, dt: f64) -> f64 {
    (-pv_w + el_w + p_max * control) * dt / JOULES_PER_KWH
}

/// Stage cost evaluated at the predicted means.
pub fn expected_stage_cost(
    control: f64,
    point: &ForecastPoint,
    scheme: &PriceScheme,
    tank: &TankParams,
    dt: f64,
) -> f64 {
    let energy = grid_energy_kwh(point.pv_pred, point.el_pred, control, tank.p_max, dt);
    scheme.cash_flow(energy, point.price_pred)
}

/// One step of the decision problem: the draw distribution and the expected
/// stage cost of every control on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProblem {
    pub draw: DrawModel,
    pub stage_costs: Vec<f64>,
}

impl StepProblem {
    pub fn from_forecast(
        point: &ForecastPoint,
        scheme: &PriceScheme,
        tank: &TankParams,
        grid: &StateGrid,
    ) -> Result<Self> {
        Ok(StepProblem {
            draw: DrawModel::gaussian(point.water_pred, point.water_sigma)?,
            stage_costs: (0..grid.n_controls())
                .map(|c| expected_stage_cost(grid.control(c), point, scheme, tank, grid.dt))
                .collect(),
        })
    }
}

/// Build the per-step problems of a forecast series.
pub fn step_problems(
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
) -> Result<Vec<StepProblem>> {
    check_series(series, grid)?;
    series
        .points
        .iter()
        .map(|p| StepProblem::from_forecast(p, scheme, tank, grid))
        .collect()
}

pub(crate) fn check_series(series: &ForecastSeries, grid: &StateGrid) -> Result<()> {
    series.validate()?;
    if series.len() != grid.horizon {
        return Err(Error::Config(format!(
            "series has {} steps but the grid horizon is {}",
            series.len(),
            grid.horizon
        )));
    }
    if (series.dt - grid.dt).abs() > 1e-9 * grid.dt {
        return Err(Error::Config(format!(
            "series step {} s differs from grid step {} s",
            series.dt, grid.dt
        )));
    }
    Ok(())
}

pub(crate) fn check_penalty(penalty: f64) -> Result<()> {
    if penalty.is_finite() && penalty >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "comfort penalty must be finite and >= 0, got {penalty}"
        )))
    }
}

/// Terminal layer: zero for comfortable states, the comfort penalty otherwise.
pub fn terminal_cost(grid: &StateGrid, comfort_penalty: f64) -> Vec<f64> {
    (0..grid.n_states())
        .map(|s| {
            if grid.is_sub_comfort(s) {
                comfort_penalty
            } else {
                0.0
            }
        })
        .collect()
}

/// Whether control `u` may be applied in state `state` given the nominal draw.
pub(crate) fn admissible(
    step: &TankStep,
    grid: &StateGrid,
    state: usize,
    u: f64,
    nominal_draw: f64,
) -> bool {
    if u == 0.0 {
        return true;
    }
    let out = round_step(step.advance(grid.temp(state), u, nominal_draw), grid);
    out.overflow != Overflow::Above && !grid.exceeds_comfort_max(out.index)
}

/// Contiguous window of next states `[lo, hi]` with non-zero probability.
struct Window {
    lo: usize,
    hi: usize,
    /// Un-rounded next temperature at zero draw.
    zero_draw: f64,
}

fn reachable_window(
    step: &TankStep,
    grid: &StateGrid,
    temp: f64,
    u: f64,
    draw: &DrawModel,
) -> Window {
    let zero_draw = step.advance(temp, u, 0.0);
    let hi = grid.locate(zero_draw).0;
    let lo = grid.locate(step.advance(temp, u, draw.upper_support())).0;
    Window { lo, hi, zero_draw }
}

/// Visit `(next_state, probability)` pairs from the highest state downwards.
///
/// `c_j = P(next >= lower edge of cell j)` is read off the clipped draw CDF at
/// the inverted draw; cell `j` gets `c_j - c_{j+1}`. The top cell of the window
/// also absorbs everything above the grid and the bottom cell everything below
/// its upper edge, so the probabilities telescope to one.
#[inline]
fn for_each_transition(
    step: &TankStep,
    grid: &StateGrid,
    state: usize,
    u: f64,
    draw: &DrawModel,
    mut visit: impl FnMut(usize, f64),
) {
    let temp = grid.temp(state);
    if draw.is_degenerate() {
        let out = round_step(step.advance(temp, u, draw.nominal()), grid);
        visit(out.index, 1.0);
        return;
    }
    let w = reachable_window(step, grid, temp, u, draw);
    let slope = step.draw_slope();
    let mut above = 0.0;
    for j in (w.lo..=w.hi).rev() {
        let c = if j == w.lo {
            1.0
        } else {
            draw.clipped_cdf((w.zero_draw - grid.cell_lower(j)) / slope)
        };
        visit(j, c - above);
        above = c;
    }
}

/// Next-state distribution of `state` under control `u`, in ascending state order.
pub fn transition_distribution(
    state: usize,
    u: f64,
    draw: &DrawModel,
    tank: &TankParams,
    grid: &StateGrid,
) -> Result<Vec<(usize, f64)>> {
    if state >= grid.n_states() {
        return Err(Error::Domain(format!("state {state} outside the grid")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!(
            "control must lie in [0, 1], got {u}"
        )));
    }
    let step = tank.step(grid.dt)?;
    let mut out = Vec::new();
    for_each_transition(&step, grid, state, u, draw, |j, p| {
        if p > 0.0 {
            out.push((j, p));
        }
    });
    if out.is_empty() {
        return Err(Error::Numerical(format!(
            "empty reachable window for state {state}, u={u}"
        )));
    }
    out.reverse();
    Ok(out)
}

/// Convenience wrapper building the Gaussian draw model from a forecast point.
pub fn transition_distribution_for(
    state: usize,
    u: f64,
    point: &ForecastPoint,
    tank: &TankParams,
    grid: &StateGrid,
) -> Result<Vec<(usize, f64)>> {
    let draw = DrawModel::gaussian(point.water_pred, point.water_sigma)?;
    transition_distribution(state, u, &draw, tank, grid)
}

/// One Bellman backup: fill `values`/`controls` for a layer from the next layer.
pub fn bellman_backup(
    problem: &StepProblem,
    tank: &TankParams,
    grid: &StateGrid,
    comfort_penalty: f64,
    next: &[f64],
    values: &mut [f64],
    controls: &mut [u16],
) -> Result<()> {
    let n = grid.n_states();
    if next.len() != n || values.len() != n || controls.len() != n {
        return Err(Error::Config("layer sizes do not match the grid".into()));
    }
    if problem.stage_costs.len() != grid.n_controls() {
        return Err(Error::Config(format!(
            "{} stage costs for {} controls",
            problem.stage_costs.len(),
            grid.n_controls()
        )));
    }
    let step = tank.step(grid.dt)?;
    let nominal = problem.draw.nominal();
    values
        .par_iter_mut()
        .zip(controls.par_iter_mut())
        .enumerate()
        .for_each(|(state, (value, control))| {
            let mut best = f64::INFINITY;
            let mut best_c = 0u16;
            for c in 0..grid.n_controls() {
                let u = grid.control(c);
                if !admissible(&step, grid, state, u, nominal) {
                    // the mean next state only grows with u
                    break;
                }
                let mut expected = 0.0;
                let mut below = 0.0;
                for_each_transition(&step, grid, state, u, &problem.draw, |j, p| {
                    expected += p * next[j];
                    if grid.is_sub_comfort(j) {
                        below += p;
                    }
                });
                let q = problem.stage_costs[c] + expected + comfort_penalty * below;
                if q < best {
                    best = q;
                    best_c = c as u16;
                }
            }
            *value = best;
            *control = best_c;
        });
    Ok(())
}

/// Backward induction over explicit step problems.
pub fn solve_steps(
    problems: &[StepProblem],
    tank: &TankParams,
    grid: &StateGrid,
    comfort_penalty: f64,
) -> Result<(Vec<u16>, CostToGo)> {
    check_penalty(comfort_penalty)?;
    if problems.len() != grid.horizon {
        return Err(Error::Config(format!(
            "{} step problems for horizon {}",
            problems.len(),
            grid.horizon
        )));
    }
    let n = grid.n_states();
    let horizon = grid.horizon;
    let mut values = vec![0.0; (horizon + 1) * n];
    let mut controls = vec![0u16; horizon * n];
    values[horizon * n..].copy_from_slice(&terminal_cost(grid, comfort_penalty));
    for k in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * n);
        bellman_backup(
            &problems[k],
            tank,
            grid,
            comfort_penalty,
            &tail[..n],
            &mut head[k * n..],
            &mut controls[k * n..(k + 1) * n],
        )?;
    }
    let cost = CostToGo::new(n, values);
    if !cost.all_finite() {
        return Err(Error::Numerical(
            "cost-to-go table contains non-finite values".into(),
        ));
    }
    Ok((controls, cost))
}

/// Solve the stochastic DP for a forecast series.
pub fn solve(
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    comfort_penalty: f64,
) -> Result<(Policy, CostToGo)> {
    let problems = step_problems(series, tank, grid, scheme)?;
    let (controls, cost) = solve_steps(&problems, tank, grid, comfort_penalty)?;
    Ok((
        Policy::new(grid.clone(), Method::StochasticDp, controls)?,
        cost,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{tank_step, TankTemperature};

    fn fixed() -> PriceScheme {
        PriceScheme::Fixed {
            buy: 0.30,
            sell: 0.10,
        }
    }

    #[test]
    fn stage_cost_examples() {
        let tank = TankParams::default();
        let p0 = ForecastPoint::default();
        assert_eq!(expected_stage_cost(0.0, &p0, &fixed(), &tank, 900.0), 0.0);

        let buy = ForecastPoint {
            el_pred: 1000.0,
            price_pred: 0.30,
            ..ForecastPoint::default()
        };
        let c = expected_stage_cost(0.0, &buy, &PriceScheme::Dynamic, &tank, 900.0);
        assert!((c - 0.075).abs() < 1e-12);
        let c = expected_stage_cost(0.0, &buy, &fixed(), &tank, 900.0);
        assert!((c - 0.075).abs() < 1e-12);

        let export = ForecastPoint {
            pv_pred: 2000.0,
            el_pred: 1000.0,
            ..ForecastPoint::default()
        };
        let c = expected_stage_cost(0.0, &export, &fixed(), &tank, 900.0);
        assert!((c + 0.025).abs() < 1e-12);
    }

    #[test]
    fn equal_buy_sell_reduces_to_single_price() {
        let tank = TankParams::default();
        let same = PriceScheme::Fixed {
            buy: 0.2,
            sell: 0.2,
        };
        for (pv, u) in [(3000.0, 0.0), (0.0, 0.5), (1500.0, 0.2)] {
            let p = ForecastPoint {
                pv_pred: pv,
                el_pred: 400.0,
                price_pred: 0.2,
                ..ForecastPoint::default()
            };
            let a = expected_stage_cost(u, &p, &same, &tank, 900.0);
            let b = expected_stage_cost(u, &p, &PriceScheme::Dynamic, &tank, 900.0);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_is_point_mass_on_tank_step() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(1, 900.0).unwrap();
        let draw = DrawModel::gaussian(4.0, 0.0).unwrap();
        let s = grid.locate(63.0).0;
        let dist = transition_distribution(s, 0.35, &draw, &tank, &grid).unwrap();
        let det = tank_step(TankTemperature::new(63.0).unwrap(), 0.35, 4.0, &tank, &grid).unwrap();
        assert_eq!(dist, vec![(det.index, 1.0)]);
    }

    #[test]
    fn transition_sums_to_one() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(1, 900.0).unwrap();
        for (mean, sigma) in [(2.0, 1.33), (10.0, 6.6), (0.1, 0.07), (40.0, 26.0)] {
            let draw = DrawModel::gaussian(mean, sigma).unwrap();
            for s in [0, 120, 200, 333, 550] {
                let d = transition_distribution(s, 0.5, &draw, &tank, &grid).unwrap();
                let total: f64 = d.iter().map(|x| x.1).sum();
                assert!((total - 1.0).abs() < 1e-9, "{total}");
                assert!(d.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }
    }

    #[test]
    fn negative_draw_mass_lands_on_zero_draw_state() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(1, 900.0).unwrap();
        let draw = DrawModel::gaussian(2.0, 1.33).unwrap();
        let s = grid.locate(60.0).0;
        let d = transition_distribution(s, 0.5, &draw, &tank, &grid).unwrap();
        let zero_state = tank_step(TankTemperature::new(60.0).unwrap(), 0.5, 0.0, &tank, &grid)
            .unwrap()
            .index;
        let top = *d.last().unwrap();
        assert_eq!(top.0, zero_state);
        let p_negative = crate::distribution::standard_normal_cdf(-2.0 / 1.33);
        assert!(top.1 >= p_negative);
    }

    #[test]
    fn horizon_one_prefers_no_heating() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(1, 900.0).unwrap();
        let series = ForecastSeries::new(
            900.0,
            vec![ForecastPoint {
                price_pred: 0.3,
                ..ForecastPoint::default()
            }],
        )
        .unwrap();
        let (policy, cost) = solve(&series, &tank, &grid, &fixed(), 10.0).unwrap();
        let warm = grid.locate(70.0).0;
        assert_eq!(policy.control(0, warm), 0.0);
        assert_eq!(cost.get(0, warm), 0.0);
        // just above the band edge, cooling would cross into the penalty region
        let edge = grid.locate(60.1).0;
        assert!(policy.control(0, edge) > 0.0);
    }

    #[test]
    fn horizon_mismatch_is_config_error() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(2, 900.0).unwrap();
        let series = ForecastSeries::new(900.0, vec![ForecastPoint::default()]).unwrap();
        assert!(matches!(
            solve(&series, &tank, &grid, &fixed(), 10.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn inadmissible_controls_are_skipped() {
        let tank = TankParams::default();
        let grid = StateGrid::default_for(1, 900.0).unwrap();
        let step = tank.step(900.0).unwrap();
        let hot = grid.locate(79.0).0;
        assert!(admissible(&step, &grid, hot, 0.0, 0.0));
        assert!(!admissible(&step, &grid, hot, 1.0, 0.0));
        let very_hot = grid.locate(90.0).0;
        assert!(admissible(&step, &grid, very_hot, 0.0, 0.0));
        assert!(!admissible(&step, &grid, very_hot, 0.05, 0.0));
    }
}
