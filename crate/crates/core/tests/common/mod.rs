//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use heatdp::distribution::DrawModel;
use heatdp::forecast::{ForecastPoint, ForecastSeries};
use heatdp::grid::StateGrid;
use heatdp::models::{tank_step, TankParams, TankTemperature};
use heatdp::solver::{expected_stage_cost, PriceScheme, StepProblem};

/// Trapezoidal step in its textbook form:
/// `T'(1 + α) = T(1 − α) + 2α·T_room + β·u − γ·ω`.
pub fn textbook_step(tank: &TankParams, dt: f64, temp: f64, u: f64, draw: f64) -> f64 {
    let c = tank.c_w * tank.m_w;
    let alpha = tank.a * dt / (2.0 * c);
    let beta = tank.p_max * dt / c;
    let gamma = (tank.t_out - tank.t_in) / tank.m_w;
    (temp * (1.0 - alpha) + 2.0 * alpha * tank.t_room + beta * u - gamma * draw) / (1.0 + alpha)
}

/// Right-hand side of the tank ODE with the draw given as a mass flow in kg/s.
pub fn tank_rhs(tank: &TankParams, temp: f64, flow: f64, u: f64) -> f64 {
    let c = tank.c_w * tank.m_w;
    -(tank.a / c) * (temp - tank.t_room) - (flow / tank.m_w) * (tank.t_out - tank.t_in)
        + tank.p_max / c * u
}

/// Classic fourth-order Runge-Kutta over `steps` substeps of `h` seconds.
pub fn rk4(tank: &TankParams, temp: f64, flow: f64, u: f64, h: f64, steps: usize) -> f64 {
    let mut x = temp;
    for _ in 0..steps {
        let k1 = tank_rhs(tank, x, flow, u);
        let k2 = tank_rhs(tank, x + 0.5 * h * k1, flow, u);
        let k3 = tank_rhs(tank, x + 0.5 * h * k2, flow, u);
        let k4 = tank_rhs(tank, x + h * k3, flow, u);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

pub fn nearest_index(grid: &StateGrid, temp: f64) -> (usize, bool) {
    let raw = ((temp - grid.t_min) / grid.dx).round();
    let top = (grid.n_states() - 1) as f64;
    (raw.clamp(0.0, top) as usize, raw > top)
}

pub fn sub_comfort(grid: &StateGrid, j: usize) -> bool {
    grid.t_min + (j as f64 - 0.5) * grid.dx < grid.comfort_min - 1e-9
}

pub fn above_comfort(grid: &StateGrid, j: usize) -> bool {
    grid.t_min + j as f64 * grid.dx > grid.comfort_max + 1e-9
}

pub fn stage_cost(
    point: &ForecastPoint,
    scheme: &PriceScheme,
    tank: &TankParams,
    dt: f64,
    u: f64,
) -> f64 {
    let kwh = (tank.p_max * u + point.el_pred - point.pv_pred) * dt / 3_600_000.0;
    match scheme {
        PriceScheme::Fixed { buy, sell } => kwh * if kwh > 0.0 { *buy } else { *sell },
        PriceScheme::Dynamic => kwh * point.price_pred,
    }
}

fn admissible(tank: &TankParams, grid: &StateGrid, s: usize, u: f64, nominal: f64) -> bool {
    if u == 0.0 {
        return true;
    }
    let (j, over) = nearest_index(grid, textbook_step(tank, grid.dt, grid.temp(s), u, nominal));
    !over && !above_comfort(grid, j)
}

pub struct EnumerationResult {
    pub cost: f64,
    /// Smallest first control whose best continuation is within `tie_tol` of the optimum.
    pub first_control: usize,
}

/// Exhaustive search over every control sequence from state `s0`.
pub fn enumerate_deterministic(
    series: &ForecastSeries,
    tank: &TankParams,
    grid: &StateGrid,
    scheme: &PriceScheme,
    penalty: f64,
    s0: usize,
    tie_tol: f64,
) -> EnumerationResult {
    let m = grid.n_controls();
    let h = grid.horizon;
    let mut best_by_first = vec![f64::INFINITY; m];
    let total = m.pow(h as u32);
    'seq: for code in 0..total {
        let mut rest = code;
        let mut seq = Vec::with_capacity(h);
        for _ in 0..h {
            seq.push(rest % m);
            rest /= m;
        }
        let mut s = s0;
        let mut cost = 0.0;
        for (k, &c) in seq.iter().enumerate() {
            let p = &series.points[k];
            let u = c as f64 / (m - 1) as f64;
            let draw = p.water_pred.max(0.0);
            if !admissible(tank, grid, s, u, draw) {
                continue 'seq;
            }
            let j = nearest_index(grid, textbook_step(tank, grid.dt, grid.temp(s), u, draw)).0;
            cost += stage_cost(p, scheme, tank, grid.dt, u);
            if sub_comfort(grid, j) {
                cost += penalty;
            }
            s = j;
        }
        if sub_comfort(grid, s) {
            cost += penalty;
        }
        let first = seq[0];
        if cost < best_by_first[first] {
            best_by_first[first] = cost;
        }
    }
    let cost = best_by_first.iter().cloned().fold(f64::INFINITY, f64::min);
    let first_control = best_by_first
        .iter()
        .position(|&c| c <= cost + tie_tol)
        .unwrap();
    EnumerationResult {
        cost,
        first_control,
    }
}

/// Optimal expected cost over the full disturbance tree, by plain recursion.
/// `trees[k]` lists the `(draw, probability)` branches of step `k`.
pub fn tree_expectation(inst: &TinyInstance, trees: &[Vec<(f64, f64)>], k: usize, s: usize) -> f64 {
    let grid = &inst.grid;
    if k == grid.horizon {
        return if sub_comfort(grid, s) {
            inst.penalty
        } else {
            0.0
        };
    }
    let m = grid.n_controls();
    let branches = &trees[k];
    let nominal = branches.iter().map(|&(w, p)| w * p).sum::<f64>().max(0.0);
    let mut best = f64::INFINITY;
    for c in 0..m {
        let u = c as f64 / (m - 1) as f64;
        if !admissible(&inst.tank, grid, s, u, nominal) {
            continue;
        }
        let mut q = stage_cost(&inst.series.points[k], &inst.scheme, &inst.tank, grid.dt, u);
        for &(w, p) in branches {
            let next = textbook_step(&inst.tank, grid.dt, grid.temp(s), u, w.max(0.0));
            let j = nearest_index(grid, next).0;
            let pen = if sub_comfort(grid, j) {
                inst.penalty
            } else {
                0.0
            };
            q += p * (pen + tree_expectation(inst, trees, k + 1, j));
        }
        best = best.min(q);
    }
    best
}

/// Empirical next-state distribution from `samples` Gaussian draws pushed through `tank_step`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_kernel(
    tank: &TankParams,
    grid: &StateGrid,
    s: usize,
    u: f64,
    mean: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean, sigma).unwrap();
    let start = TankTemperature::new(grid.temp(s)).unwrap();
    let mut counts = vec![0usize; grid.n_states()];
    for _ in 0..samples {
        let w: f64 = normal.sample(&mut rng);
        let out = tank_step(start, u, w.max(0.0), tank, grid).unwrap();
        counts[out.index] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect()
}

pub fn total_variation(dense: &[f64], sparse: &[(usize, f64)]) -> f64 {
    let mut q = vec![0.0; dense.len()];
    for &(j, p) in sparse {
        q[j] += p;
    }
    0.5 * dense
        .iter()
        .zip(&q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// A small random problem: grid of at most 6 states and 3 controls, horizon at most 4.
pub struct TinyInstance {
    pub tank: TankParams,
    pub grid: StateGrid,
    pub series: ForecastSeries,
    pub scheme: PriceScheme,
    pub penalty: f64,
}

pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states = rng.random_range(3..=6usize);
    let du = if rng.random_bool(0.5) { 0.5 } else { 1.0 };
    let horizon = rng.random_range(1..=4usize);
    let dx = [0.2, 0.5, 1.0][rng.random_range(0..3)];
    let t_min = 50.0 + rng.random_range(0..10) as f64;
    let t_max = t_min + (n_states - 1) as f64 * dx;
    let span = t_max - t_min;
    let comfort_min = t_min + span * rng.random_range(0.05..0.6);
    let comfort_max = comfort_min + (t_max - comfort_min) * rng.random_range(0.3..0.95);
    let dt = rng.random_range(60.0..600.0);
    let grid = StateGrid::new(t_min, t_max, dx, du, comfort_min, comfort_max, horizon, dt).unwrap();
    let tank = TankParams::new(
        rng.random_range(0.5..10.0),
        4181.3,
        rng.random_range(50.0..300.0),
        10.0,
        60.0,
        rng.random_range(15.0..25.0),
        rng.random_range(300.0..3000.0),
    )
    .unwrap();
    let points = (0..horizon)
        .map(|_| ForecastPoint {
            water_pred: if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..2.0)
            },
            pv_pred: if rng.random_bool(0.4) {
                0.0
            } else {
                rng.random_range(0.0..3000.0)
            },
            el_pred: rng.random_range(0.0..1500.0),
            price_pred: rng.random_range(-0.05..0.5),
            ..ForecastPoint::default()
        })
        .collect();
    let scheme = if rng.random_bool(0.5) {
        let sell = rng.random_range(0.0..0.2);
        PriceScheme::Fixed {
            buy: sell + rng.random_range(0.0..0.3),
            sell,
        }
    } else {
        PriceScheme::Dynamic
    };
    TinyInstance {
        tank,
        grid,
        series: ForecastSeries::new(dt, points).unwrap(),
        scheme,
        penalty: rng.random_range(0.0..5.0),
    }
}

/// Three-point quantization of a Gaussian draw: mean and mean ± sigma·√3 with weights 1/6, 2/3, 1/6.
pub fn three_point(mean: f64, sigma: f64) -> Vec<(f64, f64)> {
    let d = sigma * 3f64.sqrt();
    vec![
        (mean - d, 1.0 / 6.0),
        (mean, 2.0 / 3.0),
        (mean + d, 1.0 / 6.0),
    ]
}

pub fn discrete_problems(
    inst: &TinyInstance,
    sigma_ratio: f64,
) -> (Vec<StepProblem>, Vec<Vec<(f64, f64)>>) {
    let mut problems = Vec::new();
    let mut trees = Vec::new();
    for p in &inst.series.points {
        let pts = three_point(p.water_pred, sigma_ratio * p.water_pred);
        let stage_costs = (0..inst.grid.n_controls())
            .map(|c| {
                expected_stage_cost(
                    inst.grid.control(c),
                    p,
                    &inst.scheme,
                    &inst.tank,
                    inst.grid.dt,
                )
            })
            .collect();
        problems.push(StepProblem {
            draw: DrawModel::discrete(pts.clone()).unwrap(),
            stage_costs,
        });
        trees.push(pts);
    }
    (problems, trees)
}
