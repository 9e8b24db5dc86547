//! Discretized temperature and control axes over a finite horizon.

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Where a temperature fell relative to the grid range after rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    None,
    Below,
    Above,
}

impl Overflow {
    pub fn is_clamped(self) -> bool {
        self != Overflow::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub dx: f64,
    pub du: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
    pub horizon: usize,
    /// Step length in seconds.
    pub dt: f64,
    n_states: usize,
    n_controls: usize,
    first_comfortable: usize,
}

impl StateGrid {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t_min: f64,
        t_max: f64,
        dx: f64,
        du: f64,
        comfort_min: f64,
        comfort_max: f64,
        horizon: usize,
        dt: f64,
    ) -> Result<Self> {
        let all_finite = [t_min, t_max, dx, du, comfort_min, comfort_max, dt]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("grid values must be finite".into()));
        }
        if dx <= 0.0 || du <= 0.0 || dt <= 0.0 {
            return Err(Error::Config(
                "grid steps dx, du and dt must be positive".into(),
            ));
        }
        if !(t_min < comfort_min && comfort_min < comfort_max && comfort_max < t_max) {
            return Err(Error::Config(format!(
                "grid range must strictly contain the comfort band: \
                 t_min={t_min} comfort_min={comfort_min} comfort_max={comfort_max} t_max={t_max}"
            )));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least one step".into()));
        }
        let spans = (t_max - t_min) / dx;
        if (spans - spans.round()).abs() > ALIGN_TOL * spans.max(1.0) {
            return Err(Error::Config(format!(
                "temperature range {t_min}..{t_max} is not a whole number of dx={dx} steps"
            )));
        }
        let levels = 1.0 / du;
        if (levels - levels.round()).abs() > ALIGN_TOL * levels.max(1.0) || levels.round() < 1.0 {
            return Err(Error::Config(format!(
                "1/du must be a whole number, got du={du}"
            )));
        }
        let n_states = spans.round() as usize + 1;
        let n_controls = levels.round() as usize + 1;
        if n_controls > u16::MAX as usize {
            return Err(Error::Config("control grid too fine".into()));
        }
        // A state is comfortable when its whole rounding cell lies at or above comfort_min.
        let first = ((comfort_min - t_min) / dx + 0.5 - ALIGN_TOL)
            .ceil()
            .max(0.0) as usize;
        Ok(StateGrid {
            t_min,
            t_max,
            dx,
            du,
            comfort_min,
            comfort_max,
            horizon,
            dt,
            n_states,
            n_controls,
            first_comfortable: first.min(n_states),
        })
    }

    /// The experimental grid: 40..95 °C at 0.1 °C, controls at 0.05, comfort 60..80 °C.
    pub fn default_for(horizon: usize, dt: f64) -> Result<Self> {
        StateGrid::new(40.0, 95.0, 0.1, 0.05, 60.0, 80.0, horizon, dt)
    }

    /// Same axes with a different horizon/step.
    pub fn with_horizon(&self, horizon: usize, dt: f64) -> Result<Self> {
        StateGrid::new(
            self.t_min,
            self.t_max,
            self.dx,
            self.du,
            self.comfort_min,
            self.comfort_max,
            horizon,
            dt,
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn temp(&self, idx: usize) -> f64 {
        self.t_min + idx as f64 * self.dx
    }

    pub fn control(&self, idx: usize) -> f64 {
        idx as f64 / (self.n_controls - 1) as f64
    }

    /// Nearest control index, ties away from zero.
    pub fn control_index(&self, u: f64) -> usize {
        let raw = (u * (self.n_controls - 1) as f64).round();
        raw.clamp(0.0, (self.n_controls - 1) as f64) as usize
    }

    pub fn snap_control(&self, u: f64) -> f64 {
        self.control(self.control_index(u))
    }

    /// Round a temperature to the nearest grid state (ties away from zero on the
    /// offset from `t_min`), clamping to the boundary states.
    pub fn locate(&self, temp: f64) -> (usize, Overflow) {
        let offset = ((temp - self.t_min) / self.dx).round();
        if offset < 0.0 {
            (0, Overflow::Below)
        } else if offset > (self.n_states - 1) as f64 {
            (self.n_states - 1, Overflow::Above)
        } else {
            (offset as usize, Overflow::None)
        }
    }

    /// Lower edge of the rounding cell of state `idx`.
    pub fn cell_lower(&self, idx: usize) -> f64 {
        self.t_min + (idx as f64 - 0.5) * self.dx
    }

    /// Index of the lowest state whose rounding cell lies entirely at or above
    /// `comfort_min`.
    pub fn first_comfortable(&self) -> usize {
        self.first_comfortable
    }

    pub fn is_sub_comfort(&self, idx: usize) -> bool {
        idx < self.first_comfortable
    }

    pub fn exceeds_comfort_max(&self, idx: usize) -> bool {
        self.temp(idx) > self.comfort_max + ALIGN_TOL * self.dx
    }
}
