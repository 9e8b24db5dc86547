use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::ForecastSeries;
use crate::grid::StateGrid;
use crate::method::Method;
use crate::models::{round_step, TankParams};
use crate::policy::{CostToGo, Policy};
use crate::solver::{
    admissible, check_penalty, check_series, expected_stage_cost, terminal_cost, PriceScheme,
};

/// Backward induction with every random quantity replaced by its predicted mean.
///
/// Uses the same terminal cost, comfort penalty, admissible set and tie-breaking
/// as the stochastic solver.
pub fn solve_deterministic_dp(
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    comfort_penalty: f64,
) -> Result<(Policy, CostToGo)> {
    check_series(series, grid)?;
    check_penalty(comfort_penalty)?;
    let step = tank.step(grid.dt)?;
    let n = grid.n_states();
    let horizon = grid.horizon;
    let mut values = vec![0.0; (horizon + 1) * n];
    let mut controls = vec![0u16; horizon * n];
    values[horizon * n..].copy_from_slice(&terminal_cost(grid, comfort_penalty));

    for k in (0..horizon).rev() {
        let point = &series.points[k];
        let draw = point.water_pred.max(0.0);
        let stage: Vec<f64> = (0..grid.n_controls())
            .map(|c| expected_stage_cost(grid.control(c), point, scheme, tank, grid.dt))
            .collect();
        let (head, tail) = values.split_at_mut((k + 1) * n);
        let next = &tail[..n];
        head[k * n..]
            .par_iter_mut()
            .zip(controls[k * n..(k + 1) * n].par_iter_mut())
            .enumerate()
            .for_each(|(s, (value, control))| {
                let mut best = f64::INFINITY;
                let mut best_c = 0u16;
                for (c, stage_cost) in stage.iter().enumerate() {
                    let u = grid.control(c);
                    if !admissible(&step, grid, s, u, draw) {
                        break;
                    }
                    let j = round_step(step.advance(grid.temp(s), u, draw), grid).index;
                    let penalty = if grid.is_sub_comfort(j) {
                        comfort_penalty
                    } else {
                        0.0
                    };
                    let q = stage_cost + next[j] + penalty;
                    if q < best {
                        best = q;
                        best_c = c as u16;
                    }
                }
                *value = best;
                *control = best_c;
            });
    }

    let cost = CostToGo::new(n, values);
    if !cost.all_finite() {
        return Err(Error::Numerical(
            "cost-to-go table contains non-finite values".into(),
        ));
    }
    Ok((
        Policy::new(grid.clone(), Method::DeterministicDp, controls)?,
        cost,
    ))
}
