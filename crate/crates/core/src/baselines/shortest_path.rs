//! Shortest path through the time-expanded temperature graph.
//!
//! Nodes are `(k, state)`. An edge to `(k + 1, target)` exists when the
//! continuous heater input that maps the state exactly onto the target grid
//! temperature under the predicted draw lies in `[0, 1]`. Edge weights are the
//! stage cost at that input plus the comfort penalty for sub-comfort targets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::ForecastSeries;
use crate::grid::StateGrid;
use crate::method::Method;
use crate::models::{round_step, TankParams};
use crate::policy::{CostToGo, Policy};
use crate::solver::{check_penalty, check_series, expected_stage_cost, terminal_cost, PriceScheme};

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ShortestPathSolution {
    /// First-edge controls snapped to the control grid.
    pub policy: Policy,
    /// Shortest path cost from every node to the terminal layer.
    pub path_cost: CostToGo,
    /// Un-snapped first-edge controls, step-major.
    pub edge_controls: Vec<f64>,
    /// Nodes with no outgoing edge, given max heat.
    pub unreachable: Vec<(usize, usize)>,
}

impl ShortestPathSolution {
    pub fn edge_control(&self, k: usize, state: usize) -> f64 {
        self.edge_controls[k * self.policy.grid.n_states() + state]
    }
}

struct NodeChoice {
    value: f64,
    control: f64,
    reachable: bool,
}

pub fn solve_shortest_path(
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    comfort_penalty: f64,
) -> Result<ShortestPathSolution> {
    check_series(series, grid)?;
    check_penalty(comfort_penalty)?;
    let step = tank.step(grid.dt)?;
    let n = grid.n_states();
    let horizon = grid.horizon;
    let mut values = vec![0.0; (horizon + 1) * n];
    let mut edge_controls = vec![0.0; horizon * n];
    let mut unreachable = Vec::new();
    values[horizon * n..].copy_from_slice(&terminal_cost(grid, comfort_penalty));

    for k in (0..horizon).rev() {
        let point = &series.points[k];
        let draw = point.water_pred.max(0.0);
        let next = &values[(k + 1) * n..(k + 2) * n];
        let relax = |s: usize| -> NodeChoice {
            let temp = grid.temp(s);
            let lo = grid.locate(step.advance(temp, 0.0, draw)).0;
            let hi = grid.locate(step.advance(temp, 1.0, draw)).0;
            let mut best = NodeChoice {
                value: f64::INFINITY,
                control: 1.0,
                reachable: false,
            };
            #[allow(clippy::needless_range_loop)]
            for j in lo.saturating_sub(1)..=(hi + 1).min(n - 1) {
                let u = step.control_for_target(temp, draw, grid.temp(j));
                if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&u) {
                    continue;
                }
                let u = u.clamp(0.0, 1.0);
                if best.reachable && grid.exceeds_comfort_max(j) {
                    break;
                }
                let penalty = if grid.is_sub_comfort(j) {
                    comfort_penalty
                } else {
                    0.0
                };
                let q = expected_stage_cost(u, point, scheme, tank, grid.dt) + penalty + next[j];
                if q < best.value {
                    best = NodeChoice {
                        value: q,
                        control: u,
                        reachable: true,
                    };
                }
            }
            if !best.reachable {
                // no grid temperature is exactly reachable: heat fully and follow the clamped step
                let j = round_step(step.advance(temp, 1.0, draw), grid).index;
                let penalty = if grid.is_sub_comfort(j) {
                    comfort_penalty
                } else {
                    0.0
                };
                best.value =
                    expected_stage_cost(1.0, point, scheme, tank, grid.dt) + penalty + next[j];
            }
            best
        };
        let layer: Vec<NodeChoice> = (0..n).into_par_iter().map(relax).collect();
        for (s, choice) in layer.into_iter().enumerate() {
            values[k * n + s] = choice.value;
            edge_controls[k * n + s] = choice.control;
            if !choice.reachable {
                unreachable.push((k, s));
            }
        }
    }

    let path_cost = CostToGo::new(n, values);
    if !path_cost.all_finite() {
        return Err(Error::Numerical(
            "shortest path costs contain non-finite values".into(),
        ));
    }
    let controls = edge_controls
        .iter()
        .map(|&u| grid.control_index(u) as u16)
        .collect();
    Ok(ShortestPathSolution {
        policy: Policy::new(grid.clone(), Method::ShortestPath, controls)?,
        path_cost,
        edge_controls,
        unreachable,
    })
}
