use crate::error::{Error, Result};

/// Proportional-integral thermostat with a clamped integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiConfig {
    /// Target temperature, °C.
    pub setpoint: f64,
    /// Per °C.
    pub kp: f64,
    /// Per (°C·s).
    pub ki: f64,
}

impl Default for PiConfig {
    fn default() -> Self {
        PiConfig {
            setpoint: 60.0,
            kp: 0.5,
            ki: 0.002,
        }
    }
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.setpoint.is_finite() || !(self.kp >= 0.0) || !(self.ki >= 0.0) {
            return Err(Error::Config(format!(
                "invalid PI settings: setpoint={}, kp={}, ki={}",
                self.setpoint, self.kp, self.ki
            )));
        }
        if !self.kp.is_finite() || !self.ki.is_finite() {
            return Err(Error::Config("PI gains must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiState {
    /// Accumulated error, °C·s.
    pub integral: f64,
}

impl PiState {
    /// Integral contribution to the control, always within [-1, 1].
    pub fn integral_term(&self, config: &PiConfig) -> f64 {
        config.ki * self.integral
    }
}

/// One controller update. The integral is clamped so its contribution stays
/// within [-1, 1].
pub fn pi_step(state: PiState, measured_temp: f64, dt: f64, config: &PiConfig) -> (f64, PiState) {
    let error = config.setpoint - measured_temp;
    let mut integral = state.integral + error * dt;
    if config.ki > 0.0 {
        let bound = 1.0 / config.ki;
        integral = integral.clamp(-bound, bound);
    } else {
        integral = 0.0;
    }
    let control = (config.kp * error + config.ki * integral).clamp(0.0, 1.0);
    (control, PiState { integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TankParams;

    #[test]
    fn step_examples() {
        let cfg = PiConfig::default();
        let (u, _) = pi_step(PiState::default(), 60.0, 900.0, &cfg);
        assert_eq!(u, 0.0);
        let (u, s) = pi_step(PiState::default(), 40.0, 900.0, &cfg);
        assert_eq!(u, 1.0);
        assert!(s.integral_term(&cfg).abs() <= 1.0);
        let (u, s) = pi_step(PiState { integral: 1e9 }, 90.0, 900.0, &cfg);
        assert_eq!(u, 0.0);
        assert!((s.integral_term(&cfg) - 1.0).abs() < 1e-12 || s.integral_term(&cfg) < 1.0);
    }

    #[test]
    fn converges_under_zero_draw() {
        let tank = TankParams::default();
        let cfg = PiConfig::default();
        let dt = 900.0;
        let step = tank.step(dt).unwrap();
        let mut temp = 55.0;
        let mut state = PiState::default();
        for _ in 0..400 {
            let (u, s) = pi_step(state, temp, dt, &cfg);
            state = s;
            temp = step.advance(temp, u, 0.0);
        }
        assert!((temp - cfg.setpoint).abs() < 0.2, "{temp}");
    }
}
