//! Comparison controllers and the corrective-action wrapper.

mod deterministic;
mod pi;
mod shortest_path;

pub use deterministic::solve_deterministic_dp;
pub use pi::{pi_step, PiConfig, PiState};
pub use shortest_path::{solve_shortest_path, ShortestPathSolution};

use crate::grid::StateGrid;

/// Full heating while the measured temperature is below the comfort band,
/// otherwise the base control unchanged.
pub fn corrective_wrap(base_control: f64, measured_temp: f64, grid: &StateGrid) -> f64 {
    if measured_temp < grid.comfort_min {
        1.0
    } else {
        base_control
    }
}
