//! VAV temperature loop, fan-power cascade loop and the first-order
//! actuator/fan lags between them.
//!
//! Both PI loops integrate with the forward rectangle rule at the simulation
//! step and use conditional integration for anti-windup: the integrator holds
//! while the output is saturated in the direction the error is pushing it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::fahrenheit_delta_to_kelvin;

/// Controller and actuator parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Temperature loop proportional gain, (kg/s)/K.
    pub kp_temp: f64,
    /// Temperature loop integral gain, (kg/s)/(K s).
    pub ki_temp: f64,
    /// Power loop proportional gain, K/W.
    pub kp_power: f64,
    /// Power loop integral gain, K/(W s).
    pub ki_power: f64,
    /// Supply airflow (VAV damper) time constant, s.
    pub tau_supply: f64,
    /// Fan power time constant, s.
    pub tau_fan: f64,
    /// Linear fan power coefficient, W/(kg/s).
    pub fan_coefficient: f64,
    /// Nominal room setpoint, °C.
    pub setpoint_nominal: f64,
    /// Airflow ceiling as a multiple of the initial equilibrium flow.
    pub flow_limit_factor: f64,
    /// Symmetric clamp on the power loop's setpoint adjustment, K.
    pub setpoint_adjust_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::auditorium()
    }
}

impl ControllerGains {
    /// Published VAV tuning with the loop gains read per degree Fahrenheit of
    /// error (temperature loop) and per degree Fahrenheit of output (power
    /// loop), converted to SI.
    pub fn auditorium() -> Self {
        let per_f = fahrenheit_delta_to_kelvin(1.0);
        Self {
            kp_temp: 2.0 / per_f,
            ki_temp: 0.001 / per_f,
            kp_power: 3.33e-3 * per_f,
            ki_power: 2.083e-5 * per_f,
            ..Self::auditorium_si()
        }
    }

    /// The same published numbers taken literally as SI gains.
    pub fn auditorium_si() -> Self {
        Self {
            kp_temp: 2.0,
            ki_temp: 0.001,
            kp_power: 3.33e-3,
            ki_power: 2.083e-5,
            tau_supply: 30.0,
            tau_fan: 150.0,
            fan_coefficient: 220.8,
            setpoint_nominal: 21.7,
            flow_limit_factor: 4.0,
            setpoint_adjust_limit: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_supply", self.tau_supply),
            ("tau_fan", self.tau_fan),
            ("fan_coefficient", self.fan_coefficient),
            ("ki_temp", self.ki_temp),
            ("flow_limit_factor", self.flow_limit_factor),
            ("setpoint_adjust_limit", self.setpoint_adjust_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("kp_temp", self.kp_temp),
            ("kp_power", self.kp_power),
            ("ki_power", self.ki_power),
            ("setpoint_nominal", self.setpoint_nominal),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// `x⁺ = target + (x − target)·exp(−dt/τ)`, the exact zero-order-hold update
/// of `τ ẋ = target − x`.
pub fn first_order_lag(current: f64, target: f64, tau: f64, dt: f64) -> f64 {
    target + (current - target) * (-dt / tau).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetMode {
    /// Zero the power loop integrator only.
    Power,
    /// Zero both integrators.
    All,
}

/// Integrator and lag states of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlState {
    /// Accumulated room temperature error, K s.
    pub temp_integral: f64,
    /// Accumulated fan power error, W s.
    pub power_integral: f64,
    /// Lagged supply airflow, kg/s.
    pub supply_flow: f64,
    /// Lagged fan power, W.
    pub fan_power: f64,
}

impl ControlState {
    /// State carrying `flow` in steady state with zero temperature error.
    pub fn at_steady_flow(flow: f64, gains: &ControllerGains) -> Self {
        Self {
            temp_integral: flow / gains.ki_temp,
            power_integral: 0.0,
            supply_flow: flow,
            fan_power: gains.fan_coefficient * flow,
        }
    }

    /// Temperature loop: returns the desired supply airflow in `[0, flow_max]`.
    /// A room warmer than the setpoint asks for more air.
    pub fn temperature_pi_step(
        &mut self,
        room_temp: f64,
        setpoint: f64,
        gains: &ControllerGains,
        flow_max: f64,
        dt: f64,
    ) -> f64 {
        let error = room_temp - setpoint;
        let candidate = self.temp_integral + error * dt;
        let raw = gains.kp_temp * error + gains.ki_temp * candidate;
        let winding_up = (raw > flow_max && error > 0.0) || (raw < 0.0 && error < 0.0);
        if !winding_up {
            self.temp_integral = candidate;
        }
        (gains.kp_temp * error + gains.ki_temp * self.temp_integral).clamp(0.0, flow_max)
    }

    pub fn airflow_lag_step(&mut self, desired: f64, tau: f64, dt: f64) -> f64 {
        self.supply_flow = first_order_lag(self.supply_flow, desired.max(0.0), tau, dt).max(0.0);
        self.supply_flow
    }

    /// Fan power lag driven by the current (already lagged) airflow.
    pub fn fan_power_step(&mut self, coefficient: f64, tau: f64, dt: f64) -> f64 {
        let target = coefficient * self.supply_flow;
        self.fan_power = first_order_lag(self.fan_power, target, tau, dt).max(0.0);
        self.fan_power
    }

    /// Power loop: returns the setpoint adjustment in K. Raising fan power in
    /// cooling mode means lowering the setpoint, hence the negative sign.
    pub fn power_pi_step(
        &mut self,
        reference: f64,
        measured_diff: f64,
        gains: &ControllerGains,
        dt: f64,
    ) -> f64 {
        let limit = gains.setpoint_adjust_limit;
        let error = reference - measured_diff;
        let candidate = self.power_integral + error * dt;
        let raw = gains.kp_power * error + gains.ki_power * candidate;
        let winding_up = raw.abs() > limit && raw.signum() == error.signum();
        if !winding_up {
            self.power_integral = candidate;
        }
        -(gains.kp_power * error + gains.ki_power * self.power_integral).clamp(-limit, limit)
    }

    /// Zeroes integrators at engagement boundaries. Lag states are physical
    /// signals and are never touched.
    pub fn reset(&mut self, mode: ResetMode) {
        self.power_integral = 0.0;
        if mode == ResetMode::All {
            self.temp_integral = 0.0;
        }
    }

    /// Re-seeds the temperature integrator so that the loop, at `setpoint`,
    /// commands exactly `flow_command` on the next evaluation.
    pub fn bumpless_handback(
        &mut self,
        room_temp: f64,
        setpoint: f64,
        flow_command: f64,
        gains: &ControllerGains,
    ) {
        let error = room_temp - setpoint;
        self.temp_integral = (flow_command - gains.kp_temp * error) / gains.ki_temp;
    }
}
