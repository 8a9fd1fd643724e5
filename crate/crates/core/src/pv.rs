//! Single-diode PV array model.
//!
//! The array is `cells_series` identical cells per string and
//! `strings_parallel` identical strings. Every per-cell quantity in
//! [`PvParams`] is scaled to the array at evaluation time:
//!
//! ```text
//! I_cell = Iph - I0 * (exp((v + I_cell*Rs) / (n*Vt)) - 1) - (v + I_cell*Rs) / Rsh
//! v      = V_array / cells_series
//! I      = I_cell * strings_parallel
//! ```
//!
//! `Iph` scales linearly with irradiance and with temperature through
//! `current_temp_coeff`; `Vt` is proportional to absolute cell temperature.
//! The saturation current is held constant, so the open-circuit voltage
//! temperature dependence is whatever the equation produces.

use crate::error::PvError;

const KELVIN_OFFSET: f64 = 273.15;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_REL_TOL: f64 = 1e-9;
const NEWTON_DAMPING: f64 = 0.5;

/// Voltage resolution of the brute-force MPP sweep.
pub const MPP_SWEEP_STEP: f64 = 1e-3;
/// Bracket width at which golden-section refinement stops.
pub const MPP_REFINE_TOL: f64 = 1e-6;

/// Default array rating in kW.
pub const DEFAULT_RATED_POWER_KW: f64 = 165.0;

/// Single-diode array parameters. Electrical values are per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvParams {
    /// Cell photocurrent at `irradiance_stc` and `temp_stc` (A).
    pub photocurrent_stc: f64,
    /// Diode saturation current (A).
    pub saturation_current: f64,
    /// Cell series resistance (ohm).
    pub series_resistance: f64,
    /// Cell shunt resistance (ohm).
    pub shunt_resistance: f64,
    pub ideality_factor: f64,
    /// kT/q at `temp_stc` (V).
    pub thermal_voltage_stc: f64,
    pub cells_series: u32,
    pub strings_parallel: u32,
    /// Photocurrent temperature coefficient (A/degC).
    pub current_temp_coeff: f64,
    /// Reference irradiance (W/m2).
    pub irradiance_stc: f64,
    /// Reference cell temperature (degC).
    pub temp_stc: f64,
}

impl PvParams {
    /// Uncalibrated cell template: a typical crystalline-silicon cell,
    /// 576 cells per string (eight 72-cell modules).
    pub fn template() -> Self {
        Self {
            photocurrent_stc: 8.5,
            saturation_current: 1.5e-8,
            series_resistance: 0.004,
            shunt_resistance: 8.0,
            ideality_factor: 1.2,
            thermal_voltage_stc: thermal_voltage(25.0),
            cells_series: 576,
            strings_parallel: 1,
            current_temp_coeff: 0.0045,
            irradiance_stc: 1000.0,
            temp_stc: 25.0,
        }
    }

    /// Template scaled to `rated_power_kw` at STC.
    ///
    /// The string count is picked from the template's per-string rating,
    /// then the photocurrent is bisected until the STC maximum power hits
    /// the rating.
    pub fn calibrated(rated_power_kw: f64) -> Result<Self, PvError> {
        if !(rated_power_kw.is_finite() && rated_power_kw > 0.0) {
            return Err(PvError::InvalidParams(format!(
                "rated power must be positive and finite, got {rated_power_kw} kW"
            )));
        }
        let target = rated_power_kw * 1e3;
        let mut params = Self::template();
        let stc = EnvConditions::stc(&params);
        let per_string = mpp_golden(&params, &stc)?.power;
        params.strings_parallel = ((target / per_string).round() as u32).max(1);

        let base = params.photocurrent_stc;
        let power_at = |scale: f64| -> Result<f64, PvError> {
            let mut p = params;
            p.photocurrent_stc = base * scale;
            Ok(mpp_golden(&p, &EnvConditions::stc(&p))?.power)
        };
        let (mut lo, mut hi) = (0.25, 4.0);
        if power_at(lo)? > target || power_at(hi)? < target {
            return Err(PvError::InvalidParams(format!("cannot calibrate template to {rated_power_kw} kW")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if power_at(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        params.photocurrent_stc = base * 0.5 * (lo + hi);
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PvError> {
        let positive = [
            ("photocurrent_stc", self.photocurrent_stc),
            ("saturation_current", self.saturation_current),
            ("series_resistance", self.series_resistance),
            ("shunt_resistance", self.shunt_resistance),
            ("thermal_voltage_stc", self.thermal_voltage_stc),
            ("irradiance_stc", self.irradiance_stc),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PvError::InvalidParams(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if !(1.0..=2.0).contains(&self.ideality_factor) {
            return Err(PvError::InvalidParams(format!(
                "ideality_factor must lie in [1, 2], got {}",
                self.ideality_factor
            )));
        }
        if self.cells_series == 0 || self.strings_parallel == 0 {
            return Err(PvError::InvalidParams("cells_series and strings_parallel must be at least 1".into()));
        }
        if !self.current_temp_coeff.is_finite() || !self.temp_stc.is_finite() {
            return Err(PvError::InvalidParams("temperature coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Cell photocurrent under `env`, floored at zero.
    pub fn photocurrent(&self, env: &EnvConditions) -> f64 {
        let at_temp = self.photocurrent_stc + self.current_temp_coeff * (env.cell_temperature - self.temp_stc);
        (at_temp * env.irradiance / self.irradiance_stc).max(0.0)
    }

    /// Diode thermal voltage `n*Vt` at the cell temperature.
    fn modified_thermal_voltage(&self, env: &EnvConditions) -> f64 {
        let ratio = (env.cell_temperature + KELVIN_OFFSET) / (self.temp_stc + KELVIN_OFFSET);
        self.ideality_factor * self.thermal_voltage_stc * ratio
    }
}

/// kT/q at `celsius`.
pub fn thermal_voltage(celsius: f64) -> f64 {
    const BOLTZMANN: f64 = 1.380_649e-23;
    const CHARGE: f64 = 1.602_176_634e-19;
    BOLTZMANN * (celsius + KELVIN_OFFSET) / CHARGE
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConditions {
    /// Plane-of-array irradiance (W/m2).
    pub irradiance: f64,
    /// Cell temperature (degC).
    pub cell_temperature: f64,
}

impl EnvConditions {
    pub fn new(irradiance: f64, cell_temperature: f64) -> Result<Self, PvError> {
        if !(irradiance.is_finite() && irradiance >= 0.0) {
            return Err(PvError::InvalidEnv(format!("irradiance must be finite and non-negative, got {irradiance}")));
        }
        if !cell_temperature.is_finite() || cell_temperature <= -KELVIN_OFFSET {
            return Err(PvError::InvalidEnv(format!(
                "cell temperature must be finite and above absolute zero, got {cell_temperature}"
            )));
        }
        Ok(Self { irradiance, cell_temperature })
    }

    /// Standard test conditions of `params`.
    pub fn stc(params: &PvParams) -> Self {
        Self { irradiance: params.irradiance_stc, cell_temperature: params.temp_stc }
    }
}

/// A point on the array I-V curve. `power` is always `voltage * current`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PvOperatingPoint {
    pub voltage: f64,
    pub current: f64,
    pub power: f64,
}

impl PvOperatingPoint {
    pub fn new(voltage: f64, current: f64) -> Self {
        Self { voltage, current, power: voltage * current }
    }
}

/// Array current at `terminal_voltage`.
///
/// Solves the implicit diode equation with damped Newton starting at the
/// photocurrent. Voltages at or beyond open circuit return zero.
pub fn pv_current(params: &PvParams, env: &EnvConditions, terminal_voltage: f64) -> Result<f64, PvError> {
    let non_converged = |iterations| PvError::NonConvergence {
        voltage: terminal_voltage,
        irradiance: env.irradiance,
        temperature: env.cell_temperature,
        iterations,
    };
    if !(terminal_voltage.is_finite() && terminal_voltage >= 0.0) {
        return Err(PvError::InvalidVoltage(terminal_voltage));
    }
    let iph = params.photocurrent(env);
    if iph <= 0.0 {
        return Ok(0.0);
    }
    let v = terminal_voltage / params.cells_series as f64;
    let a = params.modified_thermal_voltage(env);
    let i0 = params.saturation_current;
    let rs = params.series_resistance;
    let rsh = params.shunt_resistance;

    let residual = |i: f64| {
        let vd = v + i * rs;
        iph - i0 * (vd / a).exp_m1() - vd / rsh - i
    };
    // The residual is strictly decreasing in i, so a non-positive value at
    // zero means the root is at or below zero.
    if residual(0.0) <= 0.0 {
        return Ok(0.0);
    }

    // Root lies in (0, iph]; keep a bracket so damping always has a fallback.
    let (mut lo, mut hi) = (0.0_f64, iph);
    let mut i = iph;
    let mut f = residual(i);
    for iter in 0..NEWTON_MAX_ITER {
        if f == 0.0 {
            return Ok(i * params.strings_parallel as f64);
        }
        if f > 0.0 {
            lo = lo.max(i);
        } else {
            hi = hi.min(i);
        }
        let slope = -i0 * rs / a * ((v + i * rs) / a).exp() - rs / rsh - 1.0;
        let mut step = -f / slope;
        let mut next = i + step;
        let mut f_next = residual(next);
        let mut halvings = 0;
        while !(next > lo && next <= hi && f_next.abs() <= f.abs()) {
            if halvings == 40 {
                next = 0.5 * (lo + hi);
                f_next = residual(next);
                step = next - i;
                break;
            }
            step *= NEWTON_DAMPING;
            next = i + step;
            f_next = residual(next);
            halvings += 1;
        }
        if !next.is_finite() {
            return Err(non_converged(iter + 1));
        }
        let converged = step.abs() <= NEWTON_REL_TOL * next.abs().max(1e-15 * iph);
        i = next;
        f = f_next;
        if converged {
            return Ok(i.max(0.0) * params.strings_parallel as f64);
        }
    }
    Err(non_converged(NEWTON_MAX_ITER))
}

/// Operating point at `voltage`.
pub fn operating_point(params: &PvParams, env: &EnvConditions, voltage: f64) -> Result<PvOperatingPoint, PvError> {
    Ok(PvOperatingPoint::new(voltage, pv_current(params, env, voltage)?))
}

/// Array open-circuit voltage.
pub fn open_circuit_voltage(params: &PvParams, env: &EnvConditions) -> Result<f64, PvError> {
    let iph = params.photocurrent(env);
    if iph <= 0.0 {
        return Ok(0.0);
    }
    let a = params.modified_thermal_voltage(env);
    let i0 = params.saturation_current;
    let rsh = params.shunt_resistance;
    let g = |v: f64| iph - i0 * (v / a).exp_m1() - v / rsh;
    // Ignoring the shunt gives an upper bound; g is concave and decreasing,
    // so Newton from above converges monotonically.
    let mut v = a * (iph / i0).ln_1p();
    for _ in 0..NEWTON_MAX_ITER {
        let slope = -i0 / a * (v / a).exp() - 1.0 / rsh;
        let step = -g(v) / slope;
        v += step;
        if step.abs() <= 1e-13 * v.abs() {
            return Ok(v * params.cells_series as f64);
        }
    }
    Err(PvError::NonConvergence {
        voltage: v * params.cells_series as f64,
        irradiance: env.irradiance,
        temperature: env.cell_temperature,
        iterations: NEWTON_MAX_ITER,
    })
}

/// Uniformly sampled P(V) curve over `[v_min, v_max]`.
pub fn pv_power_curve(
    params: &PvParams,
    env: &EnvConditions,
    v_min: f64,
    v_max: f64,
    n_points: usize,
) -> Result<Vec<PvOperatingPoint>, PvError> {
    if !(v_min < v_max) || n_points < 2 || v_min < 0.0 {
        return Err(PvError::InvalidSweep { v_min, v_max, n_points });
    }
    let span = v_max - v_min;
    (0..n_points)
        .map(|k| {
            let v = if k + 1 == n_points { v_max } else { v_min + span * k as f64 / (n_points - 1) as f64 };
            operating_point(params, env, v)
        })
        .collect()
}

/// Maximum power point: 1 mV sweep over `[0, V_oc]` refined by golden section.
pub fn true_mpp(params: &PvParams, env: &EnvConditions) -> Result<PvOperatingPoint, PvError> {
    let v_oc = open_circuit_voltage(params, env)?;
    if v_oc <= 0.0 {
        return Ok(PvOperatingPoint::default());
    }
    let n = (v_oc / MPP_SWEEP_STEP).ceil() as usize + 1;
    let mut best = PvOperatingPoint::default();
    for k in 0..n {
        let v = (k as f64 * MPP_SWEEP_STEP).min(v_oc);
        let op = operating_point(params, env, v)?;
        if op.power > best.power {
            best = op;
        }
    }
    let lo = (best.voltage - MPP_SWEEP_STEP).max(0.0);
    let hi = (best.voltage + MPP_SWEEP_STEP).min(v_oc);
    let refined = golden_max(params, env, lo, hi)?;
    Ok(if refined.power >= best.power { refined } else { best })
}

/// Golden-section MPP over the whole `[0, V_oc]` range. P(V) is unimodal on
/// that interval, so this is exact up to the bracket tolerance and far
/// cheaper than the sweep.
pub fn mpp_golden(params: &PvParams, env: &EnvConditions) -> Result<PvOperatingPoint, PvError> {
    let v_oc = open_circuit_voltage(params, env)?;
    if v_oc <= 0.0 {
        return Ok(PvOperatingPoint::default());
    }
    golden_max(params, env, 0.0, v_oc)
}

fn golden_max(params: &PvParams, env: &EnvConditions, mut a: f64, mut b: f64) -> Result<PvOperatingPoint, PvError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let power = |v: f64| operating_point(params, env, v).map(|op| op.power);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (power(c)?, power(d)?);
    while b - a > MPP_REFINE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = power(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = power(d)?;
        }
    }
    operating_point(params, env, 0.5 * (a + b))
}
