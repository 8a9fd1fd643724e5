//! Battery storage behind a bidirectional DC/DC converter.
//!
//! Sign convention: positive power discharges the battery onto the DC bus,
//! negative power charges it. Powers are kW, capacity kWh.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
    pub efficiency_charge: f64,
    pub efficiency_discharge: f64,
    /// Converter power tracking time constant (s). Zero tracks instantly.
    pub tracking_time_constant: f64,
    /// SOC band an exhausted direction must clear before it is re-enabled.
    pub hysteresis: f64,
}

impl Default for BatteryParams {
    /// 100 kWh is an arbitrary desk-scale capacity; 10 kW limits match the
    /// battery flows of the reference case studies.
    fn default() -> Self {
        Self {
            capacity_kwh: 100.0,
            soc_max: 0.95,
            soc_min: 0.20,
            p_charge_max: 10.0,
            p_discharge_max: 10.0,
            efficiency_charge: 0.95,
            efficiency_discharge: 0.95,
            tracking_time_constant: 0.020,
            hysteresis: 0.01,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.capacity_kwh.is_finite() && self.capacity_kwh > 0.0) {
            return Err(format!("capacity must be positive, got {}", self.capacity_kwh));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(format!(
                "SOC limits must satisfy 0 <= soc_min < soc_max <= 1, got soc_min={} soc_max={}",
                self.soc_min, self.soc_max
            ));
        }
        for (name, v) in [("p_charge_max", self.p_charge_max), ("p_discharge_max", self.p_discharge_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in
            [("efficiency_charge", self.efficiency_charge), ("efficiency_discharge", self.efficiency_discharge)]
        {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.tracking_time_constant.is_finite() && self.tracking_time_constant >= 0.0) {
            return Err(format!("tau must be non-negative, got {}", self.tracking_time_constant));
        }
        if !(self.hysteresis.is_finite() && self.hysteresis >= 0.0) {
            return Err(format!("hysteresis must be non-negative, got {}", self.hysteresis));
        }
        Ok(())
    }

    /// Largest SOC change one step of `dt` seconds can produce.
    pub fn one_step_soc_bound(&self, dt: f64) -> f64 {
        self.p_charge_max.max(self.p_discharge_max) * dt / (self.capacity_kwh * 3600.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    /// Realized converter power (kW).
    pub p_bat: f64,
    /// Reference after limit and SOC clamping (kW).
    pub p_ref: f64,
}

impl BatteryState {
    pub fn new(soc: f64) -> Self {
        Self { soc: soc.clamp(0.0, 1.0), p_bat: 0.0, p_ref: 0.0 }
    }
}

/// Clamp a requested power to converter limits and SOC authority.
pub fn effective_reference(soc: f64, params: &BatteryParams, p_ref: f64) -> f64 {
    let mut p = p_ref.clamp(-params.p_charge_max, params.p_discharge_max);
    if soc >= params.soc_max {
        p = p.max(0.0);
    }
    if soc <= params.soc_min {
        p = p.min(0.0);
    }
    p
}

/// Advance the battery by `dt` seconds under reference `p_ref`.
///
/// Realized power follows the clamped reference with an exact first-order
/// lag and is held over the step for SOC integration. When SOC authority
/// forbids a direction the converter disconnects that direction at once.
pub fn battery_advance(state: &BatteryState, params: &BatteryParams, p_ref: f64, dt: f64) -> BatteryState {
    let target = effective_reference(state.soc, params, p_ref);
    let mut p_bat = if params.tracking_time_constant > 0.0 {
        let decay = (-dt / params.tracking_time_constant).exp();
        target + (state.p_bat - target) * decay
    } else {
        target
    };
    if state.soc >= params.soc_max {
        p_bat = p_bat.max(0.0);
    }
    if state.soc <= params.soc_min {
        p_bat = p_bat.min(0.0);
    }
    p_bat = p_bat.clamp(-params.p_charge_max, params.p_discharge_max);

    let energy_scale = params.capacity_kwh * 3600.0;
    let dsoc = if p_bat >= 0.0 {
        -p_bat * dt / (energy_scale * params.efficiency_discharge)
    } else {
        -p_bat * params.efficiency_charge * dt / energy_scale
    };
    BatteryState { soc: (state.soc + dsoc).clamp(0.0, 1.0), p_bat, p_ref: target }
}

/// SOC hysteresis latch used by the supervisor.
///
/// A direction is blocked when SOC reaches its limit and released only once
/// SOC is back inside the limit by the hysteresis band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SocGate {
    pub charge_blocked: bool,
    pub discharge_blocked: bool,
}

impl SocGate {
    pub fn from_soc(soc: f64, params: &BatteryParams) -> Self {
        Self::default().update(soc, params)
    }

    pub fn update(self, soc: f64, params: &BatteryParams) -> Self {
        let charge_blocked = if soc >= params.soc_max {
            true
        } else if soc < params.soc_max - params.hysteresis {
            false
        } else {
            self.charge_blocked
        };
        let discharge_blocked = if soc <= params.soc_min {
            true
        } else if soc > params.soc_min + params.hysteresis {
            false
        } else {
            self.discharge_blocked
        };
        Self { charge_blocked, discharge_blocked }
    }
}
