//! Fixed-timestep orchestration of PV, battery, inverter and DC bus under
//! the supervisory dispatcher.
//!
//! Each step of `dt` seconds:
//!
//! 1. apply events due at this step boundary (in list order);
//! 2. every EMS period, dispatch using the true MPP as available PV power;
//! 3. step the PV controller, battery, inverter current loops and DC bus;
//! 4. audit the power balance including converter losses and the
//!    capacitor energy derivative;
//! 5. log every `log_decimation` steps.
//!
//! A run is a pure function of its [`Scenario`].

use std::f64::consts::PI;

use crate::battery::{self, BatteryParams, BatteryState, SocGate};
use crate::ems::{self, CaseLabel, Dispatch, GridRequest};
use crate::error::{InverterError, PvError, ScenarioError, SummaryError};
use crate::inverter::{self, DcBusState, InverterParams, InverterState, BUS_GUARD_VOLTAGE};
use crate::mppt::{PvControlMode, PvControlParams, PvController};
use crate::pv::{self, EnvConditions, PvParams};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_TEMPERATURE: f64 = 25.0;
/// Consecutive infeasible EMS periods tolerated before the run faults.
pub const DEFAULT_MAX_INFEASIBLE_PERIODS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Irradiance (W/m2).
    SetIrradiance(f64),
    /// Cell temperature (degC).
    SetTemperature(f64),
    /// DC load (kW).
    SetDcLoad(f64),
    SetGridRequest(GridRequest),
    /// DC bus voltage reference (V).
    SetVdcRef(f64),
    /// Reactive power reference (kVAr).
    SetQRef(f64),
}

impl EventKind {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            EventKind::SetIrradiance(g) => g.is_finite() && g >= 0.0,
            EventKind::SetTemperature(t) => t.is_finite() && t > -273.15,
            EventKind::SetDcLoad(p) => p.is_finite() && p >= 0.0,
            EventKind::SetGridRequest(g) => return g.validate(),
            EventKind::SetVdcRef(v) => {
                if !(v.is_finite() && v > BUS_GUARD_VOLTAGE) {
                    return Err(format!("vdc_ref must exceed the {BUS_GUARD_VOLTAGE} V guard, got {v}"));
                }
                true
            }
            EventKind::SetQRef(q) => q.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid value {self:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Seconds from the start of the run.
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self { time, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Simulated time (s).
    pub duration: f64,
    /// Step (s).
    pub dt: f64,
    pub log_decimation: usize,
    /// Supervisory dispatch period (s).
    pub ems_period: f64,
    pub max_infeasible_periods: u32,
    pub pv: PvParams,
    pub pv_control: PvControlParams,
    pub battery: BatteryParams,
    pub inverter: InverterParams,
    /// Grid request and limits in force at t = 0.
    pub grid: GridRequest,
    pub initial_soc: f64,
    pub events: Vec<Event>,
}

impl Scenario {
    /// Scenario with every default and no events: dark, unloaded, idle grid.
    pub fn with_defaults(duration: f64) -> Result<Self, PvError> {
        Ok(Self {
            duration,
            dt: DEFAULT_DT,
            log_decimation: 1,
            ems_period: ems::DEFAULT_EMS_PERIOD,
            max_infeasible_periods: DEFAULT_MAX_INFEASIBLE_PERIODS,
            pv: PvParams::calibrated(pv::DEFAULT_RATED_POWER_KW)?,
            pv_control: PvControlParams::default(),
            battery: BatteryParams::default(),
            inverter: InverterParams::default(),
            grid: GridRequest::default(),
            initial_soc: 0.5,
            events: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return err(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.duration) {
            return err(format!("dt must be positive and at most the duration, got {}", self.dt));
        }
        if self.log_decimation == 0 {
            return err("log_decimation must be at least 1".into());
        }
        if !(self.ems_period.is_finite() && self.ems_period > 0.0) {
            return err(format!("ems period must be positive, got {}", self.ems_period));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return err(format!("initial_soc must lie in [0, 1], got {}", self.initial_soc));
        }
        self.pv.validate().map_err(|e| ScenarioError(e.to_string()))?;
        self.pv_control.validate().map_err(ScenarioError)?;
        self.battery.validate().map_err(ScenarioError)?;
        self.inverter.validate().map_err(ScenarioError)?;
        self.grid.validate().map_err(ScenarioError)?;
        let mut previous = 0.0;
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.time.is_finite() && ev.time >= 0.0 && ev.time <= self.duration) {
                return err(format!("event {i} at t={} lies outside [0, duration]", ev.time));
            }
            if ev.time < previous {
                return err(format!("event {i} at t={} precedes t={previous}", ev.time));
            }
            previous = ev.time;
            if let Err(m) = ev.kind.validate() {
                return err(format!("event {i} at t={}: {m}", ev.time));
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Per-record condition flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordFlags {
    /// Reactive reference cut by the current limit.
    pub q_saturated: bool,
    /// d-axis current reference on the limit.
    pub d_saturated: bool,
    /// Dispatch could not meet demand; load was shed.
    pub infeasible: bool,
    pub bus_fault: bool,
}

impl RecordFlags {
    const NAMES: [&'static str; 4] = ["q_sat", "d_sat", "infeasible", "bus_fault"];

    fn bits(&self) -> [bool; 4] {
        [self.q_saturated, self.d_saturated, self.infeasible, self.bus_fault]
    }

    pub fn any(&self) -> bool {
        self.bits().iter().any(|&b| b)
    }

    /// `|`-joined flag names, `-` when none is set.
    pub fn encode(&self) -> String {
        let set: Vec<&str> = Self::NAMES.iter().zip(self.bits()).filter_map(|(name, on)| on.then_some(*name)).collect();
        if set.is_empty() {
            "-".to_string()
        } else {
            set.join("|")
        }
    }

    pub fn decode(s: &str) -> Result<Self, String> {
        let mut flags = Self::default();
        if s == "-" {
            return Ok(flags);
        }
        for name in s.split('|') {
            match name {
                "q_sat" => flags.q_saturated = true,
                "d_sat" => flags.d_saturated = true,
                "infeasible" => flags.infeasible = true,
                "bus_fault" => flags.bus_fault = true,
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
        Ok(flags)
    }
}

/// One logged step. Powers kW, voltages V, currents A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub irradiance: f64,
    pub p_pv: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub v_pv_ref: f64,
    pub pv_mode: PvControlMode,
    pub p_pv_ref: f64,
    pub p_bat: f64,
    pub p_bat_ref: f64,
    pub soc: f64,
    /// Load actually served.
    pub p_load: f64,
    pub p_grid: f64,
    pub p_grid_set: f64,
    pub q_grid: f64,
    pub q_set: f64,
    pub v_dc: f64,
    /// `p_pv + p_bat - p_grid - p_load - p_loss - p_capacitor`.
    pub balance_residual: f64,
    pub case_label: CaseLabel,
    pub flags: RecordFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimFault {
    BusCollapse { t: f64, v_dc: f64 },
    PersistentInfeasibility { t: f64, shortfall: f64 },
    PvModel { t: f64, error: PvError },
    Inverter { t: f64, error: InverterError },
}

impl std::fmt::Display for SimFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimFault::BusCollapse { t, v_dc } => write!(f, "DC bus collapse at t={t:.4} s (v_dc={v_dc:.2} V)"),
            SimFault::PersistentInfeasibility { t, shortfall } => {
                write!(f, "persistent infeasibility at t={t:.4} s ({shortfall:.3} kW unserved)")
            }
            SimFault::PvModel { t, error } => write!(f, "PV model failure at t={t:.4} s: {error}"),
            SimFault::Inverter { t, error } => write!(f, "inverter failure at t={t:.4} s: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub fault: Option<SimFault>,
    /// EMS periods that ended in load shedding.
    pub infeasible_periods: usize,
    pub max_abs_residual: f64,
    pub final_soc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<SimRecord>,
    pub summary: RunSummary,
}

struct MppCache {
    p_mpp_kw: f64,
    v_mpp: f64,
    v_oc: f64,
}

impl MppCache {
    fn compute(params: &PvParams, env: &EnvConditions) -> Result<Self, PvError> {
        let mpp = pv::true_mpp(params, env)?;
        Ok(Self { p_mpp_kw: mpp.power * 1e-3, v_mpp: mpp.voltage, v_oc: pv::open_circuit_voltage(params, env)? })
    }
}

struct Exogenous {
    env: EnvConditions,
    load: f64,
    grid: GridRequest,
    v_dc_ref: f64,
}

impl Exogenous {
    /// Applies one event; returns whether the PV environment changed.
    fn apply(&mut self, kind: &EventKind) -> bool {
        match *kind {
            EventKind::SetIrradiance(g) => {
                self.env.irradiance = g;
                true
            }
            EventKind::SetTemperature(t) => {
                self.env.cell_temperature = t;
                true
            }
            EventKind::SetDcLoad(p) => {
                self.load = p;
                false
            }
            EventKind::SetGridRequest(g) => {
                self.grid = g;
                false
            }
            EventKind::SetVdcRef(v) => {
                self.v_dc_ref = v;
                false
            }
            EventKind::SetQRef(q) => {
                self.grid.q_request = q;
                false
            }
        }
    }
}

/// First step index at or after `time`; events never move backward.
fn event_step(time: f64, dt: f64) -> usize {
    let raw = time / dt;
    let nearest = raw.round();
    // absorb representation error such as 1.0/0.001 = 999.9999999999999
    if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Run `scenario` to completion or to the first fault.
pub fn run(scenario: &Scenario) -> Result<SimOutput, ScenarioError> {
    scenario.validate()?;
    let dt = scenario.dt;
    let n_steps = scenario.step_count();
    let ems_every = ((scenario.ems_period / dt).round() as usize).max(1);
    let inv_params = &scenario.inverter;

    let mut exo = Exogenous {
        env: EnvConditions { irradiance: 0.0, cell_temperature: DEFAULT_TEMPERATURE },
        load: 0.0,
        grid: scenario.grid,
        v_dc_ref: inv_params.v_dc_ref,
    };
    let mut next_event = 0;
    let events = &scenario.events;
    while next_event < events.len() && event_step(events[next_event].time, dt) == 0 {
        exo.apply(&events[next_event].kind);
        next_event += 1;
    }

    let pv_fail = |t, error| ScenarioError(format!("{}", SimFault::PvModel { t, error }));
    let mut mpp = MppCache::compute(&scenario.pv, &exo.env).map_err(|e| pv_fail(0.0, e))?;
    let v_oc_stc =
        pv::open_circuit_voltage(&scenario.pv, &EnvConditions::stc(&scenario.pv)).map_err(|e| pv_fail(0.0, e))?;
    let mut pv_ctl = PvController::with_estimates(&scenario.pv_control, v_oc_stc, mpp.v_oc, mpp.v_mpp, mpp.v_mpp);
    let mut bat = BatteryState::new(scenario.initial_soc);
    let mut gate = SocGate::from_soc(bat.soc, &scenario.battery);
    let mut bus = DcBusState { v_dc: exo.v_dc_ref, capacitance: inv_params.capacitance };
    let mut inv = InverterState::new(inv_params);
    // Warm start: inverter already carrying the PV surplus at t = 0.
    if inv_params.ki > 0.0 {
        let p_start = mpp.p_mpp_kw * scenario.pv_control.converter_efficiency - exo.load;
        let i_d = (p_start * 1e3 / (1.5 * inv.grid_voltage_d)).clamp(-inv.current_limit, inv.current_limit);
        inv.i_d = i_d;
        inv.i_d_ref = i_d;
        inv.pi_integrator = i_d / inv_params.ki;
    }

    let mut dispatch = Dispatch {
        pv_mode: PvControlMode::Mppt,
        p_pv_ref: mpp.p_mpp_kw,
        p_bat_ref: 0.0,
        p_grid_set: 0.0,
        q_set: exo.grid.q_request,
        load_shed: 0.0,
        case_label: CaseLabel::Other,
    };
    let mut infeasible_streak = 0u32;
    let mut infeasible_periods = 0usize;
    let mut records = Vec::with_capacity(n_steps / scenario.log_decimation + 1);
    let mut fault = None;
    let mut max_abs_residual: f64 = 0.0;
    let omega = 2.0 * PI * inv_params.frequency;
    let mut steps_done = 0;

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let t_end = (k + 1) as f64 * dt;

        let mut env_changed = false;
        while next_event < events.len() && event_step(events[next_event].time, dt) <= k {
            env_changed |= exo.apply(&events[next_event].kind);
            next_event += 1;
        }
        if env_changed {
            match MppCache::compute(&scenario.pv, &exo.env) {
                Ok(m) => mpp = m,
                Err(error) => {
                    fault = Some(SimFault::PvModel { t, error });
                    break;
                }
            }
            pv_ctl.set_estimates(mpp.v_oc, mpp.v_mpp);
        }

        let mut flags = RecordFlags::default();
        if k % ems_every == 0 {
            match ems::dispatch(mpp.p_mpp_kw, exo.load, &exo.grid, bat.soc, &scenario.battery, &mut gate) {
                Ok(d) => {
                    dispatch = d;
                    infeasible_streak = 0;
                }
                Err(infeasible) => {
                    dispatch = infeasible.fallback;
                    infeasible_streak += 1;
                    infeasible_periods += 1;
                    if infeasible_streak > scenario.max_infeasible_periods {
                        fault = Some(SimFault::PersistentInfeasibility { t, shortfall: infeasible.shortfall });
                    }
                }
            }
            if pv_ctl.mode != dispatch.pv_mode {
                pv_ctl.mode = dispatch.pv_mode;
            }
        }
        if fault.is_some() {
            break;
        }
        flags.infeasible = dispatch.load_shed > 0.0;
        let load_served = (exo.load - dispatch.load_shed).max(0.0);

        let pv_step = match pv_ctl.step(&scenario.pv, &exo.env, dt) {
            Ok(s) => s,
            Err(error) => {
                fault = Some(SimFault::PvModel { t, error });
                break;
            }
        };
        let p_pv = pv_step.terminal.power * 1e-3;
        let p_pv_dc = pv_step.delivered * 1e-3;

        bat = battery::battery_advance(&bat, &scenario.battery, dispatch.p_bat_ref, dt);

        inv = inverter::voltage_loop_step(&bus, &inv, exo.v_dc_ref, dt, inv_params.kp, inv_params.ki);
        inv = match inverter::q_loop_step(&inv, exo.grid.q_request, dt) {
            Ok(i) => i,
            Err(error) => {
                fault = Some(SimFault::Inverter { t, error });
                break;
            }
        };
        flags.q_saturated = inv.q_saturated;
        flags.d_saturated = inv.i_d_ref.abs() >= inv.current_limit;

        // Measure the dq currents through the three-phase waveform at the
        // PLL angle, as the real controller would.
        let theta = (omega * t_end) % (2.0 * PI);
        let (i_d, i_q) = inverter::dq_transform(inverter::inverse_dq(inv.i_d, inv.i_q, theta), theta);
        let p_inv_dc = 1.5 * inv.grid_voltage_d * i_d * 1e-3;
        let p_grid = inverter::ac_power(p_inv_dc, inv.efficiency);
        let q_grid = -1.5 * inv.grid_voltage_d * i_q * 1e-3;

        let energy_before = bus.energy();
        let p_in = p_pv_dc + bat.p_bat;
        let p_out = load_served + p_inv_dc;
        let bus_result = inverter::bus_advance(&bus, p_in, p_out, dt);
        let p_capacitor = match &bus_result {
            Ok(next) => (next.energy() - energy_before) / dt * 1e-3,
            Err(_) => p_in - p_out,
        };
        let p_loss = (p_pv - p_pv_dc) + (p_inv_dc - p_grid);
        let balance_residual = p_pv + bat.p_bat - p_grid - load_served - p_loss - p_capacitor;
        max_abs_residual = max_abs_residual.max(balance_residual.abs());

        let collapsed = match bus_result {
            Ok(next) => {
                bus = next;
                None
            }
            Err(InverterError::BusCollapse { v_dc, .. }) => Some(v_dc),
            Err(error) => {
                fault = Some(SimFault::Inverter { t, error });
                break;
            }
        };
        flags.bus_fault = collapsed.is_some();
        steps_done = k + 1;

        if (k + 1) % scenario.log_decimation == 0 || collapsed.is_some() {
            records.push(SimRecord {
                t: t_end,
                irradiance: exo.env.irradiance,
                p_pv,
                v_pv: pv_step.terminal.voltage,
                i_pv: pv_step.terminal.current,
                v_pv_ref: pv_ctl.mppt.v_ref,
                pv_mode: dispatch.pv_mode,
                p_pv_ref: dispatch.p_pv_ref,
                p_bat: bat.p_bat,
                p_bat_ref: bat.p_ref,
                soc: bat.soc,
                p_load: load_served,
                p_grid,
                p_grid_set: dispatch.p_grid_set,
                q_grid,
                q_set: exo.grid.q_request,
                v_dc: collapsed.unwrap_or(bus.v_dc),
                balance_residual,
                case_label: dispatch.case_label,
                flags,
            });
        }
        if let Some(v_dc) = collapsed {
            fault = Some(SimFault::BusCollapse { t: t_end, v_dc });
            break;
        }
    }

    Ok(SimOutput {
        records,
        summary: RunSummary { steps: steps_done, fault, infeasible_periods, max_abs_residual, final_soc: bat.soc },
    })
}

/// Numeric record columns, in CSV order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Irradiance,
    PPv,
    VPv,
    IPv,
    VPvRef,
    PPvRef,
    PBat,
    PBatRef,
    Soc,
    PLoad,
    PGrid,
    PGridSet,
    QGrid,
    QSet,
    VDc,
    BalanceResidual,
}

impl Channel {
    pub const ALL: [Channel; 16] = [
        Channel::Irradiance,
        Channel::PPv,
        Channel::VPv,
        Channel::IPv,
        Channel::VPvRef,
        Channel::PPvRef,
        Channel::PBat,
        Channel::PBatRef,
        Channel::Soc,
        Channel::PLoad,
        Channel::PGrid,
        Channel::PGridSet,
        Channel::QGrid,
        Channel::QSet,
        Channel::VDc,
        Channel::BalanceResidual,
    ];

    /// Column name including unit.
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Irradiance => "irradiance_wm2",
            Channel::PPv => "p_pv_kw",
            Channel::VPv => "v_pv_v",
            Channel::IPv => "i_pv_a",
            Channel::VPvRef => "v_pv_ref_v",
            Channel::PPvRef => "p_pv_ref_kw",
            Channel::PBat => "p_bat_kw",
            Channel::PBatRef => "p_bat_ref_kw",
            Channel::Soc => "soc",
            Channel::PLoad => "p_load_kw",
            Channel::PGrid => "p_grid_kw",
            Channel::PGridSet => "p_grid_set_kw",
            Channel::QGrid => "q_grid_kvar",
            Channel::QSet => "q_set_kvar",
            Channel::VDc => "v_dc_v",
            Channel::BalanceResidual => "balance_residual_kw",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn value(&self, r: &SimRecord) -> f64 {
        match self {
            Channel::Irradiance => r.irradiance,
            Channel::PPv => r.p_pv,
            Channel::VPv => r.v_pv,
            Channel::IPv => r.i_pv,
            Channel::VPvRef => r.v_pv_ref,
            Channel::PPvRef => r.p_pv_ref,
            Channel::PBat => r.p_bat,
            Channel::PBatRef => r.p_bat_ref,
            Channel::Soc => r.soc,
            Channel::PLoad => r.p_load,
            Channel::PGrid => r.p_grid,
            Channel::PGridSet => r.p_grid_set,
            Channel::QGrid => r.q_grid,
            Channel::QSet => r.q_set,
            Channel::VDc => r.v_dc,
            Channel::BalanceResidual => r.balance_residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub channel: Channel,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateSummary {
    pub window: f64,
    pub samples: usize,
    pub stats: Vec<ChannelStats>,
}

impl SteadyStateSummary {
    pub fn get(&self, channel: Channel) -> &ChannelStats {
        self.stats.iter().find(|s| s.channel == channel).expect("every channel is summarized")
    }

    pub fn mean(&self, channel: Channel) -> f64 {
        self.get(channel).mean
    }
}

/// Mean, min and max of every channel over the trailing `window` seconds.
pub fn steady_state_summary(records: &[SimRecord], window: f64) -> Result<SteadyStateSummary, SummaryError> {
    let Some(last) = records.last() else {
        return Err(SummaryError::EmptyWindow { window });
    };
    let span = last.t;
    if window > span * (1.0 + 1e-12) {
        return Err(SummaryError::WindowTooLong { window, span });
    }
    let start = last.t - window;
    let slice: Vec<&SimRecord> = records.iter().filter(|r| r.t > start + 1e-9 * span.max(1.0)).collect();
    if slice.is_empty() || !(window > 0.0) {
        return Err(SummaryError::EmptyWindow { window });
    }
    let n = slice.len() as f64;
    let stats = Channel::ALL
        .into_iter()
        .map(|channel| {
            let first = channel.value(slice[0]);
            let (mut dev_sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for r in &slice {
                let v = channel.value(r);
                // deviations from the first sample keep a constant channel exact
                dev_sum += v - first;
                min = min.min(v);
                max = max.max(v);
            }
            ChannelStats { channel, mean: first + dev_sum / n, min, max }
        })
        .collect();
    Ok(SteadyStateSummary { window, samples: slice.len(), stats })
}
