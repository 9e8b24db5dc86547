//! PV generator and hot-water tank models.
//!
//! Everything here works in SI base units: seconds, watts, joules, kilograms
//! and degrees Celsius. Parameters quoted in other units (J/min, J/g, kW) are
//! converted once by the `from_table_units` constructors.

use crate::error::{Error, Result};
use crate::grid::{Overflow, StateGrid};

/// PV module and array parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PvParams {
    /// Module power at standard test conditions, W.
    pub p_stc: f64,
    /// Irradiance at STC, W/m².
    pub i_stc: f64,
    /// Irradiance at NOCT conditions, W/m².
    pub i_noct: f64,
    /// Nominal operating cell temperature, °C.
    pub noct: f64,
    /// Ambient temperature at NOCT conditions, °C.
    pub t_amb_noct: f64,
    /// Cell temperature at STC, °C.
    pub t_j_stc: f64,
    /// Power temperature coefficient at the maximum power point, 1/°C.
    pub gamma: f64,
    pub n_series: u32,
    pub n_parallel: u32,
}

impl Default for PvParams {
    fn default() -> Self {
        PvParams {
            p_stc: 165.0,
            i_stc: 1000.0,
            i_noct: 800.0,
            noct: 45.5,
            t_amb_noct: 20.0,
            t_j_stc: 25.0,
            gamma: 0.00043,
            n_series: 5,
            n_parallel: 2,
        }
    }
}

impl PvParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.p_stc,
            self.i_stc,
            self.i_noct,
            self.noct,
            self.t_amb_noct,
            self.t_j_stc,
            self.gamma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("PV parameters must be finite".into()));
        }
        if self.p_stc <= 0.0 || self.i_stc <= 0.0 || self.i_noct <= 0.0 {
            return Err(Error::Config(
                "p_stc, i_stc and i_noct must be positive".into(),
            ));
        }
        if self.n_series < 1 || self.n_parallel < 1 {
            return Err(Error::Config(
                "PV module counts must be at least one".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::Config("gamma must be non-negative".into()));
        }
        Ok(())
    }

    /// Array rating at STC, W.
    pub fn rated_power(&self) -> f64 {
        self.p_stc * f64::from(self.n_series) * f64::from(self.n_parallel)
    }
}

/// Cell temperature from irradiance (W/m²) and ambient temperature (°C).
pub fn cell_temperature(irradiance: f64, ambient: f64, params: &PvParams) -> Result<f64> {
    if !(irradiance >= 0.0) {
        return Err(Error::Domain(format!(
            "irradiance must be >= 0, got {irradiance}"
        )));
    }
    Ok(ambient + (irradiance / params.i_noct) * (params.noct - params.t_amb_noct))
}

/// Electrical output of the whole array, W. Clamped at zero when the
/// temperature derating would make it negative.
pub fn pv_power(irradiance: f64, ambient: f64, params: &PvParams) -> Result<f64> {
    let t_j = cell_temperature(irradiance, ambient, params)?;
    let derate = 1.0 - params.gamma * (t_j - params.t_j_stc);
    let power = params.p_stc
        * (irradiance / params.i_stc)
        * derate
        * f64::from(params.n_series)
        * f64::from(params.n_parallel);
    Ok(power.max(0.0))
}

/// Fully mixed hot-water tank.
#[derive(Debug, Clone, PartialEq)]
pub struct TankParams {
    /// Wall heat-loss coefficient, W/°C.
    pub a: f64,
    /// Specific heat of water, J/(kg·°C).
    pub c_w: f64,
    /// Water mass, kg.
    pub m_w: f64,
    /// Cold inlet temperature, °C.
    pub t_in: f64,
    /// Delivered hot-water temperature, °C.
    pub t_out: f64,
    pub t_room: f64,
    /// Heating element design power, W.
    pub p_max: f64,
    capacity: f64,
}

impl TankParams {
    pub fn new(
        a: f64,
        c_w: f64,
        m_w: f64,
        t_in: f64,
        t_out: f64,
        t_room: f64,
        p_max: f64,
    ) -> Result<Self> {
        let values = [a, c_w, m_w, t_in, t_out, t_room, p_max];
        if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config(format!(
                "tank parameters must be finite and positive: {values:?}"
            )));
        }
        if t_out <= t_in {
            return Err(Error::Config(format!(
                "t_out ({t_out}) must exceed t_in ({t_in})"
            )));
        }
        Ok(TankParams {
            a,
            c_w,
            m_w,
            t_in,
            t_out,
            t_room,
            p_max,
            capacity: c_w * m_w,
        })
    }

    /// Build from the units used in parameter tables: `a` in J/(min·°C),
    /// `c_w` in J/(g·°C) and `p_max` in kW.
    pub fn from_table_units(
        a_j_per_min_c: f64,
        c_w_j_per_g_c: f64,
        m_w_kg: f64,
        t_in: f64,
        t_out: f64,
        t_room: f64,
        p_max_kw: f64,
    ) -> Result<Self> {
        TankParams::new(
            a_j_per_min_c / 60.0,
            c_w_j_per_g_c * 1000.0,
            m_w_kg,
            t_in,
            t_out,
            t_room,
            p_max_kw * 1000.0,
        )
    }

    /// Thermal capacity `c_w * m_w`, J/°C.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Coefficients of the trapezoidal one-step map for a step of `dt` seconds.
    pub fn step(&self, dt: f64) -> Result<TankStep> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let half = self.a * dt / (2.0 * self.capacity);
        Ok(TankStep {
            t_room: self.t_room,
            denom: 1.0 + half,
            loss: 2.0 * half,
            heat: self.p_max * dt / self.capacity,
            draw: (self.t_out - self.t_in) / self.m_w,
        })
    }
}

impl Default for TankParams {
    fn default() -> Self {
        TankParams::from_table_units(128.38, 4.1813, 196.82, 10.0, 60.0, 22.0, 4.5)
            .expect("built-in tank parameters are valid")
    }
}

/// Tank water temperature, °C.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TankTemperature(f64);

impl TankTemperature {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(TankTemperature(value))
        } else {
            Err(Error::Numerical(format!(
                "non-finite tank temperature {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Right-hand side of the tank energy balance, °C/s.
///
/// `draw_rate` is the hot-water mass flow in kg/s.
pub fn tank_derivative(
    temp: f64,
    draw_rate: f64,
    control: f64,
    params: &TankParams,
) -> Result<f64> {
    check_control(control)?;
    if !(draw_rate >= 0.0) {
        return Err(Error::Domain(format!(
            "draw rate must be >= 0, got {draw_rate}"
        )));
    }
    let c = params.capacity;
    Ok(-(params.a / c) * (temp - params.t_room)
        - draw_rate * (params.t_out - params.t_in) / params.m_w
        + (params.p_max / c) * control)
}

fn check_control(control: f64) -> Result<()> {
    if (0.0..=1.0).contains(&control) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "control must lie in [0, 1], got {control}"
        )))
    }
}

/// Trapezoidal one-step tank map for a fixed step length.
///
/// Solving the trapezoidal rule for the next temperature gives
/// `x' = x + (-loss*(x - t_room) + heat*u - draw*w) / denom`, which is affine in
/// the control `u` and in the drawn mass `w` (kg over the step). Written in this
/// form the room-temperature equilibrium is an exact fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankStep {
    t_room: f64,
    denom: f64,
    loss: f64,
    heat: f64,
    draw: f64,
}

impl TankStep {
    /// Un-rounded next temperature.
    #[inline]
    pub fn advance(&self, temp: f64, control: f64, draw_mass: f64) -> f64 {
        temp + (-self.loss * (temp - self.t_room) + self.heat * control - self.draw * draw_mass)
            / self.denom
    }

    /// Temperature change per kg drawn (positive number).
    #[inline]
    pub fn draw_slope(&self) -> f64 {
        self.draw / self.denom
    }

    /// Temperature change from full heating over the step.
    #[inline]
    pub fn heat_slope(&self) -> f64 {
        self.heat / self.denom
    }

    /// Drawn mass that takes `temp` to `target` under `control`. May be negative.
    #[inline]
    pub fn draw_for_target(&self, temp: f64, control: f64, target: f64) -> f64 {
        (-self.loss * (temp - self.t_room) + self.heat * control - (target - temp) * self.denom)
            / self.draw
    }

    /// Control that takes `temp` to `target` under `draw_mass`. May fall outside [0, 1].
    #[inline]
    pub fn control_for_target(&self, temp: f64, draw_mass: f64, target: f64) -> f64 {
        ((target - temp) * self.denom + self.loss * (temp - self.t_room) + self.draw * draw_mass)
            / self.heat
    }
}

/// Result of one discretized tank step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Next temperature before rounding.
    pub unrounded: f64,
    /// Grid index of the rounded next temperature.
    pub index: usize,
    /// Rounded (grid) next temperature.
    pub temp: TankTemperature,
    /// Set when the result fell outside the grid and was clamped.
    pub overflow: Overflow,
}

/// Advance the tank by one grid step and round the result onto the grid.
pub fn tank_step(
    state: TankTemperature,
    control: f64,
    draw_mass: f64,
    params: &TankParams,
    grid: &StateGrid,
) -> Result<StepOutcome> {
    check_control(control)?;
    if !(draw_mass >= 0.0) {
        return Err(Error::Domain(format!(
            "draw mass must be >= 0, got {draw_mass}"
        )));
    }
    let step = params.step(grid.dt)?;
    Ok(round_step(
        step.advance(state.value(), control, draw_mass),
        grid,
    ))
}

pub(crate) fn round_step(unrounded: f64, grid: &StateGrid) -> StepOutcome {
    let (index, overflow) = grid.locate(unrounded);
    StepOutcome {
        unrounded,
        index,
        temp: TankTemperature(grid.temp(index)),
        overflow,
    }
}

/// Drawn mass (kg) that makes the un-rounded step map `state` onto `target_temp`.
pub fn tank_step_unrounded_inverse_for_draw(
    state: TankTemperature,
    control: f64,
    target_temp: f64,
    dt: f64,
    params: &TankParams,
) -> Result<f64> {
    let step = params.step(dt)?;
    Ok(step.draw_for_target(state.value(), control, target_temp))
}
