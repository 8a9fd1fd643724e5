//! PV-side boost converter control.
//!
//! The converter is averaged: its terminal voltage follows the commanded
//! reference through a first-order lag. The controller produces that
//! reference either by incremental-conductance MPPT or by integral
//! curtailment to a power reference on the high-voltage side of the MPP.

use crate::error::PvError;
use crate::pv::{self, EnvConditions, PvOperatingPoint, PvParams};

/// Conductance tolerance used to call dI/dV equal to -I/V (S).
pub const CONDUCTANCE_EPS: f64 = 1e-6;

pub const DEFAULT_UPDATE_PERIOD: f64 = 0.010;
/// Default IncCond step as a fraction of the open-circuit voltage.
pub const DEFAULT_STEP_FRACTION: f64 = 0.005;
pub const DEFAULT_CURTAIL_GAIN: f64 = 6e-5;
pub const DEFAULT_CONVERTER_TAU: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PvControlMode {
    Mppt,
    /// Curtail to this power (kW).
    PowerReference(f64),
}

impl PvControlMode {
    pub fn label(&self) -> &'static str {
        match self {
            PvControlMode::Mppt => "mppt",
            PvControlMode::PowerReference(_) => "pref",
        }
    }
}

/// Reference-generation state shared by both control modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptState {
    /// Commanded terminal voltage (V).
    pub v_ref: f64,
    pub prev_voltage: f64,
    pub prev_current: f64,
    /// IncCond perturbation (V).
    pub step_size: f64,
    /// Seconds between controller updates.
    pub update_period: f64,
    pub time_since_update: f64,
    /// Supervisor's open-circuit voltage estimate (V); upper clamp for v_ref.
    pub v_oc_estimate: f64,
    /// Supervisor's MPP voltage estimate (V); lower clamp while curtailing.
    pub v_mpp_estimate: f64,
}

impl MpptState {
    pub fn new(v_ref: f64, step_size: f64, update_period: f64, v_oc_estimate: f64, v_mpp_estimate: f64) -> Self {
        Self {
            v_ref: v_ref.clamp(0.0, v_oc_estimate.max(0.0)),
            prev_voltage: 0.0,
            prev_current: 0.0,
            step_size,
            update_period,
            time_since_update: 0.0,
            v_oc_estimate,
            v_mpp_estimate,
        }
    }

    fn clamp_ref(&mut self, lo: f64) {
        self.v_ref = self.v_ref.clamp(lo.min(self.v_oc_estimate), self.v_oc_estimate);
    }
}

/// One incremental-conductance update.
pub fn incond_step(state: &MpptState, measured: &PvOperatingPoint) -> MpptState {
    let mut next = *state;
    let dv = measured.voltage - state.prev_voltage;
    let di = measured.current - state.prev_current;
    let step = state.step_size;
    if dv == 0.0 {
        if di > 0.0 {
            next.v_ref += step;
        } else if di < 0.0 {
            next.v_ref -= step;
        }
    } else if measured.voltage <= 0.0 {
        // -I/V is undefined at the origin; power can only grow from here.
        next.v_ref += step;
    } else {
        let incremental = di / dv;
        let instantaneous = -measured.current / measured.voltage;
        if (incremental - instantaneous).abs() <= CONDUCTANCE_EPS {
            // at the MPP
        } else if incremental > instantaneous {
            next.v_ref += step;
        } else {
            next.v_ref -= step;
        }
    }
    next.clamp_ref(0.0);
    next.prev_voltage = measured.voltage;
    next.prev_current = measured.current;
    next
}

/// One curtailment update toward `p_ref` (W), integral action with `gain` (V/W).
///
/// The reference stays in `[v_mpp_estimate, v_oc_estimate]` where power
/// falls monotonically with voltage, so the loop is a stable integrator.
/// A reference above the available maximum pins v_ref at the MPP.
pub fn curtail_step(state: &MpptState, measured: &PvOperatingPoint, p_ref: f64, gain: f64) -> MpptState {
    let mut next = *state;
    next.v_ref += gain * (measured.power - p_ref.max(0.0));
    next.clamp_ref(state.v_mpp_estimate);
    next.prev_voltage = measured.voltage;
    next.prev_current = measured.current;
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterState {
    pub terminal_voltage: f64,
    /// Voltage tracking time constant (s).
    pub tracking_time_constant: f64,
    pub efficiency: f64,
}

/// Exact first-order response of the terminal voltage toward `v_ref` over `dt`.
pub fn converter_advance(conv: &ConverterState, v_ref: f64, dt: f64) -> ConverterState {
    let decay = (-dt / conv.tracking_time_constant).exp();
    ConverterState { terminal_voltage: v_ref + (conv.terminal_voltage - v_ref) * decay, ..*conv }
}

/// Tunables for [`PvController`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvControlParams {
    pub update_period: f64,
    /// IncCond step as a fraction of the STC open-circuit voltage.
    pub step_fraction: f64,
    /// Curtailment integral gain (V/W).
    pub curtail_gain: f64,
    pub converter_tau: f64,
    pub converter_efficiency: f64,
}

impl Default for PvControlParams {
    fn default() -> Self {
        Self {
            update_period: DEFAULT_UPDATE_PERIOD,
            step_fraction: DEFAULT_STEP_FRACTION,
            curtail_gain: DEFAULT_CURTAIL_GAIN,
            converter_tau: DEFAULT_CONVERTER_TAU,
            converter_efficiency: 1.0,
        }
    }
}

impl PvControlParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("mppt_period", self.update_period),
            ("mppt_step", self.step_fraction),
            ("curtail_gain", self.curtail_gain),
            ("converter_tau", self.converter_tau),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.converter_efficiency > 0.0 && self.converter_efficiency <= 1.0) {
            return Err(format!("converter_efficiency must lie in (0, 1], got {}", self.converter_efficiency));
        }
        Ok(())
    }
}

/// Closed loop of reference generator and averaged converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvController {
    pub mode: PvControlMode,
    pub mppt: MpptState,
    pub converter: ConverterState,
    pub curtail_gain: f64,
}

/// Output of one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvStep {
    pub terminal: PvOperatingPoint,
    /// Power delivered to the DC bus (W).
    pub delivered: f64,
}

impl PvController {
    /// Controller parked at `start_voltage` with estimates for `env`.
    pub fn new(
        params: &PvParams,
        ctl: &PvControlParams,
        env: &EnvConditions,
        start_voltage: f64,
    ) -> Result<Self, PvError> {
        let v_oc_stc = pv::open_circuit_voltage(params, &EnvConditions::stc(params))?;
        let v_oc = pv::open_circuit_voltage(params, env)?;
        let v_mpp = pv::true_mpp(params, env)?.voltage;
        Ok(Self::with_estimates(ctl, v_oc_stc, v_oc, v_mpp, start_voltage))
    }

    /// Like [`PvController::new`] with precomputed voltages. The IncCond
    /// step is `ctl.step_fraction * v_oc_stc`.
    pub fn with_estimates(ctl: &PvControlParams, v_oc_stc: f64, v_oc: f64, v_mpp: f64, start_voltage: f64) -> Self {
        Self {
            mode: PvControlMode::Mppt,
            mppt: MpptState::new(start_voltage, ctl.step_fraction * v_oc_stc, ctl.update_period, v_oc, v_mpp),
            converter: ConverterState {
                terminal_voltage: start_voltage.clamp(0.0, v_oc.max(0.0)),
                tracking_time_constant: ctl.converter_tau,
                efficiency: ctl.converter_efficiency,
            },
            curtail_gain: ctl.curtail_gain,
        }
    }

    pub fn set_estimates(&mut self, v_oc: f64, v_mpp: f64) {
        self.mppt.v_oc_estimate = v_oc;
        self.mppt.v_mpp_estimate = v_mpp;
        self.mppt.clamp_ref(0.0);
    }

    /// Advance the converter by `dt`, measure, and run the reference update
    /// when its period has elapsed.
    pub fn step(&mut self, params: &PvParams, env: &EnvConditions, dt: f64) -> Result<PvStep, PvError> {
        self.converter = converter_advance(&self.converter, self.mppt.v_ref, dt);
        let voltage = self.converter.terminal_voltage.max(0.0);
        let terminal = pv::operating_point(params, env, voltage)?;

        self.mppt.time_since_update += dt;
        // Tolerance absorbs accumulated rounding of dt sums.
        if self.mppt.time_since_update >= self.mppt.update_period - 1e-9 * self.mppt.update_period {
            let elapsed = self.mppt.time_since_update;
            self.mppt = match self.mode {
                PvControlMode::Mppt => incond_step(&self.mppt, &terminal),
                PvControlMode::PowerReference(p_kw) => {
                    curtail_step(&self.mppt, &terminal, p_kw * 1e3, self.curtail_gain)
                }
            };
            self.mppt.time_since_update = (elapsed - self.mppt.update_period).max(0.0);
        }
        Ok(PvStep { terminal, delivered: terminal.power * self.converter.efficiency })
    }
}
