//! Averaged DC bus and grid-tied inverter.
//!
//! The grid is an infinite bus at fixed line voltage with an ideal PLL, so
//! the d axis is aligned with the grid voltage and `v_q = 0`. Power
//! relations in that frame (amplitude-invariant transform):
//!
//! ```text
//! P = 3/2 * v_d * i_d        (positive = exported to the grid)
//! Q = -3/2 * v_d * i_q       (positive = supplied to the grid)
//! ```
//!
//! The outer loop is a PI on the DC bus voltage producing `i_d_ref`; the
//! inner current loops are first-order lags. The DC-link capacitor is
//! integrated in energy, which is exact for constant power over a step.
//!
//! Some texts call the abc-to-dq rotation a Clarke transform; what is
//! implemented here is the rotating-frame (Park) transform.

use std::f64::consts::PI;

use crate::error::InverterError;

const TWO_THIRDS_PI: f64 = 2.0 * PI / 3.0;

/// Bus voltage below which the DC link is considered collapsed (V).
pub const BUS_GUARD_VOLTAGE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterParams {
    /// DC-link capacitance (F).
    pub capacitance: f64,
    /// DC bus voltage reference at start (V).
    pub v_dc_ref: f64,
    /// Grid line-to-line RMS voltage (V).
    pub v_ll: f64,
    /// Grid frequency (Hz).
    pub frequency: f64,
    /// Voltage loop proportional gain (A/V).
    pub kp: f64,
    /// Voltage loop integral gain (A/(V*s)).
    pub ki: f64,
    /// Inner current loop time constant (s).
    pub current_tau: f64,
    /// Peak phase current limit (A).
    pub current_limit: f64,
    pub efficiency: f64,
}

impl Default for InverterParams {
    fn default() -> Self {
        let mut p = Self {
            capacitance: 1.0,
            v_dc_ref: 450.0,
            v_ll: 208.0,
            frequency: 60.0,
            kp: 0.0,
            ki: 0.0,
            current_tau: 0.005,
            current_limit: 1200.0,
            efficiency: 1.0,
        };
        let (kp, ki) = p.pole_placement_gains(DEFAULT_LOOP_BANDWIDTH, DEFAULT_LOOP_DAMPING);
        p.kp = kp;
        p.ki = ki;
        p
    }
}

/// Natural frequency of the default voltage loop (rad/s).
pub const DEFAULT_LOOP_BANDWIDTH: f64 = 50.0;
pub const DEFAULT_LOOP_DAMPING: f64 = 0.8;

impl InverterParams {
    /// Peak phase grid voltage, the d-axis voltage under ideal PLL lock.
    pub fn grid_voltage_d(&self) -> f64 {
        self.v_ll * (2.0f64 / 3.0).sqrt()
    }

    /// PI gains placing the linearized voltage loop poles at natural
    /// frequency `omega_n` with damping `zeta`, ignoring the current lag.
    ///
    /// Linearized around `v_dc_ref`: `C*V*dv/dt = -3/2*v_d*i_d + ...`.
    pub fn pole_placement_gains(&self, omega_n: f64, zeta: f64) -> (f64, f64) {
        let plant_gain = 1.5 * self.grid_voltage_d() / (self.capacitance * self.v_dc_ref);
        (2.0 * zeta * omega_n / plant_gain, omega_n * omega_n / plant_gain)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("capacitance", self.capacitance),
            ("v_dc_ref", self.v_dc_ref),
            ("v_ll", self.v_ll),
            ("frequency", self.frequency),
            ("current_tau", self.current_tau),
            ("current_limit", self.current_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("kp", self.kp), ("ki", self.ki)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(format!("efficiency must lie in (0, 1], got {}", self.efficiency));
        }
        if self.v_dc_ref <= BUS_GUARD_VOLTAGE {
            return Err(format!("v_dc_ref must exceed the {BUS_GUARD_VOLTAGE} V guard"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcBusState {
    pub v_dc: f64,
    pub capacitance: f64,
}

impl DcBusState {
    /// Stored energy (J).
    pub fn energy(&self) -> f64 {
        0.5 * self.capacitance * self.v_dc * self.v_dc
    }
}

/// Integrate the capacitor energy over `dt` with constant `p_in`/`p_out` (kW).
pub fn bus_advance(bus: &DcBusState, p_in: f64, p_out: f64, dt: f64) -> Result<DcBusState, InverterError> {
    let energy = bus.energy() + (p_in - p_out) * 1e3 * dt;
    let floor = 0.5 * bus.capacitance * BUS_GUARD_VOLTAGE * BUS_GUARD_VOLTAGE;
    if !(energy > floor) {
        let v_dc = (2.0 * energy.max(0.0) / bus.capacitance).sqrt();
        return Err(InverterError::BusCollapse { v_dc, guard: BUS_GUARD_VOLTAGE });
    }
    Ok(DcBusState { v_dc: (2.0 * energy / bus.capacitance).sqrt(), capacitance: bus.capacitance })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterState {
    pub i_d: f64,
    pub i_q: f64,
    pub i_d_ref: f64,
    pub i_q_ref: f64,
    /// Integral of the bus voltage error (V*s).
    pub pi_integrator: f64,
    pub current_time_constant: f64,
    /// d-axis grid voltage, peak phase (V).
    pub grid_voltage_d: f64,
    pub efficiency: f64,
    pub current_limit: f64,
    /// Set when the reactive reference was cut to fit the current limit.
    pub q_saturated: bool,
}

impl InverterState {
    pub fn new(params: &InverterParams) -> Self {
        Self {
            i_d: 0.0,
            i_q: 0.0,
            i_d_ref: 0.0,
            i_q_ref: 0.0,
            pi_integrator: 0.0,
            current_time_constant: params.current_tau,
            grid_voltage_d: params.grid_voltage_d(),
            efficiency: params.efficiency,
            current_limit: params.current_limit,
            q_saturated: false,
        }
    }

    /// Active power drawn from the DC side by the bridge (kW).
    pub fn dc_power(&self) -> f64 {
        1.5 * self.grid_voltage_d * self.i_d * 1e-3
    }

    /// Active power delivered to the grid (kW, export positive).
    pub fn grid_power(&self) -> f64 {
        ac_power(self.dc_power(), self.efficiency)
    }

    /// Reactive power supplied to the grid (kVAr).
    pub fn reactive_power(&self) -> f64 {
        -1.5 * self.grid_voltage_d * self.i_q * 1e-3
    }
}

/// AC-side active power for a bridge drawing `p_dc` from the DC side.
pub fn ac_power(p_dc: f64, efficiency: f64) -> f64 {
    if p_dc >= 0.0 {
        p_dc * efficiency
    } else {
        p_dc / efficiency
    }
}

fn lag(value: f64, target: f64, tau: f64, dt: f64) -> f64 {
    target + (value - target) * (-dt / tau).exp()
}

/// DC voltage PI step: sets `i_d_ref` and moves `i_d` toward it.
///
/// Conditional integration: while the output sits on the current limit the
/// integrator only accepts error that pulls it back inside.
pub fn voltage_loop_step(
    bus: &DcBusState,
    inv: &InverterState,
    v_dc_ref: f64,
    dt: f64,
    kp: f64,
    ki: f64,
) -> InverterState {
    let error = bus.v_dc - v_dc_ref;
    let limit = inv.current_limit;
    let candidate = inv.pi_integrator + error * dt;
    let unclamped = kp * error + ki * candidate;
    let (integrator, i_d_ref) = if unclamped > limit {
        let keep = if error > 0.0 { inv.pi_integrator } else { candidate };
        (keep, (kp * error + ki * keep).clamp(-limit, limit))
    } else if unclamped < -limit {
        let keep = if error < 0.0 { inv.pi_integrator } else { candidate };
        (keep, (kp * error + ki * keep).clamp(-limit, limit))
    } else {
        (candidate, unclamped)
    };
    InverterState {
        pi_integrator: integrator,
        i_d_ref,
        i_d: lag(inv.i_d, i_d_ref, inv.current_time_constant, dt),
        ..*inv
    }
}

/// Reactive power step toward `q_ref` (kVAr, positive supplied to the grid).
///
/// The q-axis gets whatever current the d axis leaves under the limit.
pub fn q_loop_step(inv: &InverterState, q_ref: f64, dt: f64) -> Result<InverterState, InverterError> {
    if inv.grid_voltage_d == 0.0 {
        return Err(InverterError::ZeroGridVoltage);
    }
    let wanted = -q_ref * 1e3 / (1.5 * inv.grid_voltage_d);
    let headroom = (inv.current_limit.powi(2) - inv.i_d_ref.powi(2)).max(0.0).sqrt();
    let i_q_ref = wanted.clamp(-headroom, headroom);
    Ok(InverterState {
        i_q_ref,
        i_q: lag(inv.i_q, i_q_ref, inv.current_time_constant, dt),
        q_saturated: i_q_ref != wanted,
        ..*inv
    })
}

/// Amplitude-invariant abc -> dq rotation.
///
/// A balanced set `x_k = M*cos(theta + phi - k*2pi/3)` maps to
/// `(M*cos(phi), M*sin(phi))`: aligned with `theta` gives `(M, 0)`, leading
/// by 90 degrees gives `(0, M)`.
pub fn dq_transform(i_abc: [f64; 3], theta: f64) -> (f64, f64) {
    let [a, b, c] = i_abc;
    let (s0, c0) = theta.sin_cos();
    let (s1, c1) = (theta - TWO_THIRDS_PI).sin_cos();
    let (s2, c2) = (theta + TWO_THIRDS_PI).sin_cos();
    let d = 2.0 / 3.0 * (a * c0 + b * c1 + c * c2);
    let q = -2.0 / 3.0 * (a * s0 + b * s1 + c * s2);
    (d, q)
}

/// Inverse of [`dq_transform`] for a zero-sequence-free set.
pub fn inverse_dq(i_d: f64, i_q: f64, theta: f64) -> [f64; 3] {
    let phase = |shift: f64| {
        let (s, c) = (theta + shift).sin_cos();
        i_d * c - i_q * s
    };
    [phase(0.0), phase(-TWO_THIRDS_PI), phase(TWO_THIRDS_PI)]
}
