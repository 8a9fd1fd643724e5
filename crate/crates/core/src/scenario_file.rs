//! Plain-text scenario files.
//!
//! An INI-like format: `[section]` headers, `key = value` pairs (several per
//! line allowed), `#` comments. Units are fixed per key and never written.
//!
//! ```text
//! [meta]
//! duration = 5            # s
//! dt = 0.001              # s
//! log_decimation = 1
//!
//! [pv]
//! rated_power = 165       # kW, calibrates the default cell template
//!
//! [battery]
//! initial_soc = 0.6
//!
//! [events]
//! t=0 irradiance 1000     # W/m2
//! t=0 load 50             # kW
//! t=1 grid 105            # kW export request, or `max`
//! ```
//!
//! | section | key | unit |
//! |---|---|---|
//! | meta | `duration`, `dt` | s |
//! | meta | `log_decimation` | steps |
//! | pv | `rated_power` | kW |
//! | pv | `photocurrent_stc`, `saturation_current` | A |
//! | pv | `series_resistance`, `shunt_resistance` | ohm |
//! | pv | `ideality_factor` | - |
//! | pv | `thermal_voltage_stc` | V |
//! | pv | `cells_series`, `strings_parallel` | count |
//! | pv | `current_temp_coeff` | A/degC |
//! | pv | `irradiance_stc` | W/m2 |
//! | pv | `temp_stc` | degC |
//! | pv | `mppt_period`, `converter_tau` | s |
//! | pv | `mppt_step` | fraction of STC open-circuit voltage |
//! | pv | `curtail_gain` | V/W |
//! | pv | `converter_efficiency` | - |
//! | battery | `capacity` | kWh |
//! | battery | `p_charge_max`, `p_discharge_max` | kW |
//! | battery | `soc_min`, `soc_max`, `hysteresis`, `initial_soc` | fraction |
//! | battery | `efficiency_charge`, `efficiency_discharge` | - |
//! | battery | `tau` | s |
//! | inverter | `capacitance` | F |
//! | inverter | `v_dc_ref`, `v_ll` | V |
//! | inverter | `frequency` | Hz |
//! | inverter | `kp` | A/V |
//! | inverter | `ki` | A/(V s) |
//! | inverter | `loop_bandwidth` | rad/s |
//! | inverter | `loop_damping` | - |
//! | inverter | `current_tau` | s |
//! | inverter | `current_limit` | A |
//! | inverter | `efficiency` | - |
//! | ems | `period` | s |
//! | ems | `p_request` | kW or `max` |
//! | ems | `q_request` | kVAr |
//! | ems | `p_import_limit`, `p_export_limit` | kW |
//! | ems | `max_infeasible_periods` | count |
//!
//! When `kp`/`ki` are absent they come from pole placement with
//! `loop_bandwidth` and `loop_damping`. Event lines are
//! `t=<s> <kind> <value> [key=value ...]` in non-decreasing time, with kinds
//! `irradiance`, `temperature`, `load`, `grid`, `vdc_ref`, `q_ref`. A `grid`
//! event accepts `q`, `p_import_limit` and `p_export_limit`; missing limits
//! default to the `[ems]` ones.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::battery::BatteryParams;
use crate::ems::{GridPower, GridRequest};
use crate::error::{ParseError, ParseErrorKind};
use crate::inverter::{InverterParams, DEFAULT_LOOP_BANDWIDTH, DEFAULT_LOOP_DAMPING};
use crate::mppt::PvControlParams;
use crate::pv::{PvParams, DEFAULT_RATED_POWER_KW};
use crate::sim::{Event, EventKind, Scenario};

const SECTIONS: [&str; 5] = ["meta", "pv", "battery", "inverter", "ems"];

const META_KEYS: [&str; 3] = ["duration", "dt", "log_decimation"];
const PV_CELL_KEYS: [&str; 12] = [
    "photocurrent_stc",
    "saturation_current",
    "series_resistance",
    "shunt_resistance",
    "ideality_factor",
    "thermal_voltage_stc",
    "cells_series",
    "strings_parallel",
    "current_temp_coeff",
    "irradiance_stc",
    "temp_stc",
    "rated_power",
];
const PV_CONTROL_KEYS: [&str; 5] =
    ["mppt_period", "mppt_step", "curtail_gain", "converter_tau", "converter_efficiency"];
const BATTERY_KEYS: [&str; 10] = [
    "capacity",
    "soc_min",
    "soc_max",
    "p_charge_max",
    "p_discharge_max",
    "efficiency_charge",
    "efficiency_discharge",
    "tau",
    "hysteresis",
    "initial_soc",
];
const INVERTER_KEYS: [&str; 11] = [
    "capacitance",
    "v_dc_ref",
    "v_ll",
    "frequency",
    "kp",
    "ki",
    "loop_bandwidth",
    "loop_damping",
    "current_tau",
    "current_limit",
    "efficiency",
];
const EMS_KEYS: [&str; 6] =
    ["period", "p_request", "q_request", "p_import_limit", "p_export_limit", "max_infeasible_periods"];

fn allowed_keys(section: &str) -> Vec<&'static str> {
    match section {
        "meta" => META_KEYS.to_vec(),
        "pv" => PV_CELL_KEYS.iter().chain(PV_CONTROL_KEYS.iter()).copied().collect(),
        "battery" => BATTERY_KEYS.to_vec(),
        "inverter" => INVERTER_KEYS.to_vec(),
        "ems" => EMS_KEYS.to_vec(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Tok<'_> {
    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.column, kind }
    }

    fn bad(&self, key: &str, reason: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::BadValue { key: key.to_string(), reason: reason.into() })
    }

    fn number(&self, key: &str) -> Result<f64, ParseError> {
        match self.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.bad(key, format!("expected a finite number, found `{}`", self.text))),
        }
    }

    fn count(&self, key: &str) -> Result<u64, ParseError> {
        self.text
            .parse::<u64>()
            .map_err(|_| self.bad(key, format!("expected a non-negative integer, found `{}`", self.text)))
    }

    fn grid_power(&self, key: &str) -> Result<GridPower, ParseError> {
        if self.text == "max" {
            Ok(GridPower::AbsorbMax)
        } else {
            Ok(GridPower::Export(self.number(key)?))
        }
    }
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, column, kind: ParseErrorKind::Syntax(msg.into()) }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn column(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn word(&mut self) -> Option<Tok<'a>> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| c.is_whitespace() || c == '=').unwrap_or(rest.len());
        if len == 0 {
            return None;
        }
        let tok = Tok { text: &rest[..len], line: self.line, column: self.column() };
        self.pos += len;
        Some(tok)
    }

    /// `key = value`, whitespace around `=` optional.
    fn pair(&mut self) -> Result<(Tok<'a>, Tok<'a>), ParseError> {
        self.skip_ws();
        let column = self.column();
        let key = self.word().ok_or_else(|| syntax(self.line, column, "expected `key = value`"))?;
        if !key.text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(key.line, key.column, format!("invalid key `{}`", key.text)));
        }
        self.skip_ws();
        if !self.src[self.pos..].starts_with('=') {
            return Err(syntax(self.line, self.column(), format!("expected `=` after `{}`", key.text)));
        }
        self.pos += 1;
        let column = self.column();
        let value =
            self.word().ok_or_else(|| syntax(self.line, column, format!("missing value for `{}`", key.text)))?;
        Ok((key, value))
    }
}

struct RawEvent<'a> {
    time: Tok<'a>,
    kind: Tok<'a>,
    value: Tok<'a>,
    options: Vec<(Tok<'a>, Tok<'a>)>,
}

#[derive(Default)]
struct Section<'a> {
    header: Option<Tok<'a>>,
    keys: HashMap<&'a str, (Tok<'a>, Tok<'a>)>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<Tok<'a>> {
        self.keys.get(key).map(|(_, v)| *v)
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, ParseError> {
        self.get(key).map_or(Ok(default), |t| t.number(key))
    }

    /// Location of a key of this section named in `message`.
    fn named_key(&self, message: &str) -> Option<(usize, usize)> {
        message
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find_map(|word| self.keys.get(word))
            .map(|(k, _)| (k.line, k.column))
    }

    /// Location of the key named in `message`, else the section header.
    fn locate(&self, message: &str) -> (usize, usize) {
        self.named_key(message).or(self.header.map(|h| (h.line, h.column))).unwrap_or((1, 1))
    }

    fn invalid(&self, message: String) -> ParseError {
        let (line, column) = self.locate(&message);
        ParseError { line, column, kind: ParseErrorKind::Invalid(message) }
    }
}

/// Parse a scenario file into a validated [`Scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut sections: HashMap<&str, Section> = SECTIONS.iter().map(|s| (*s, Section::default())).collect();
    let mut events: Vec<RawEvent> = Vec::new();
    let mut current: Option<&str> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let column = content[..indent].chars().count() + 1;
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name =
                inner.strip_suffix(']').ok_or_else(|| syntax(line_no, column, "unterminated section header"))?.trim();
            if name != "events" && !SECTIONS.contains(&name) {
                return Err(ParseError {
                    line: line_no,
                    column,
                    kind: ParseErrorKind::UnknownSection(name.to_string()),
                });
            }
            if let Some(section) = sections.get_mut(name) {
                section.header.get_or_insert(Tok { text: name, line: line_no, column });
            }
            current = Some(name);
            continue;
        }
        let mut cursor = Cursor { src: content, pos: 0, line: line_no };
        match current {
            None => return Err(syntax(line_no, column, "key outside of any section")),
            Some("events") => events.push(parse_event_line(&mut cursor)?),
            Some(name) => {
                let allowed = allowed_keys(name);
                let section = sections.get_mut(name).expect("known section");
                while !cursor.at_end() {
                    let (key, value) = cursor.pair()?;
                    if !allowed.contains(&key.text) {
                        return Err(key.error(ParseErrorKind::UnknownKey {
                            section: name.to_string(),
                            key: key.text.to_string(),
                        }));
                    }
                    if section.keys.insert(key.text, (key, value)).is_some() {
                        return Err(key.error(ParseErrorKind::DuplicateKey(key.text.to_string())));
                    }
                }
            }
        }
    }

    build(&sections, &events)
}

fn parse_event_line<'a>(cursor: &mut Cursor<'a>) -> Result<RawEvent<'a>, ParseError> {
    let (t_key, time) = cursor.pair()?;
    if t_key.text != "t" {
        return Err(syntax(t_key.line, t_key.column, "event lines start with `t=<seconds>`"));
    }
    let column = cursor.column();
    let kind = cursor.word().ok_or_else(|| syntax(cursor.line, column, "missing event kind"))?;
    let column = cursor.column();
    let value =
        cursor.word().ok_or_else(|| syntax(cursor.line, column, format!("missing value for event `{}`", kind.text)))?;
    let mut options = Vec::new();
    while !cursor.at_end() {
        options.push(cursor.pair()?);
    }
    Ok(RawEvent { time, kind, value, options })
}

fn build(sections: &HashMap<&str, Section>, raw_events: &[RawEvent]) -> Result<Scenario, ParseError> {
    let meta = &sections["meta"];
    let pv_sec = &sections["pv"];
    let bat_sec = &sections["battery"];
    let inv_sec = &sections["inverter"];
    let ems_sec = &sections["ems"];

    let duration_tok = meta.get("duration").ok_or_else(|| {
        let (line, column) = meta.header.map_or((1, 1), |h| (h.line, h.column));
        ParseError { line, column, kind: ParseErrorKind::Invalid("missing required key `duration` in [meta]".into()) }
    })?;
    let mut s = Scenario {
        duration: duration_tok.number("duration")?,
        dt: meta.number("dt", crate::sim::DEFAULT_DT)?,
        log_decimation: match meta.get("log_decimation") {
            Some(t) => t.count("log_decimation")? as usize,
            None => 1,
        },
        ems_period: ems_sec.number("period", crate::ems::DEFAULT_EMS_PERIOD)?,
        max_infeasible_periods: match ems_sec.get("max_infeasible_periods") {
            Some(t) => u32::try_from(t.count("max_infeasible_periods")?)
                .map_err(|_| t.bad("max_infeasible_periods", "too large"))?,
            None => crate::sim::DEFAULT_MAX_INFEASIBLE_PERIODS,
        },
        pv: pv_params(pv_sec)?,
        pv_control: PvControlParams {
            update_period: pv_sec.number("mppt_period", crate::mppt::DEFAULT_UPDATE_PERIOD)?,
            step_fraction: pv_sec.number("mppt_step", crate::mppt::DEFAULT_STEP_FRACTION)?,
            curtail_gain: pv_sec.number("curtail_gain", crate::mppt::DEFAULT_CURTAIL_GAIN)?,
            converter_tau: pv_sec.number("converter_tau", crate::mppt::DEFAULT_CONVERTER_TAU)?,
            converter_efficiency: pv_sec.number("converter_efficiency", 1.0)?,
        },
        battery: battery_params(bat_sec)?,
        inverter: inverter_params(inv_sec)?,
        grid: GridRequest {
            p_request: match ems_sec.get("p_request") {
                Some(t) => t.grid_power("p_request")?,
                None => GridPower::Export(0.0),
            },
            q_request: ems_sec.number("q_request", 0.0)?,
            p_import_limit: ems_sec.number("p_import_limit", crate::ems::DEFAULT_GRID_LIMIT_KW)?,
            p_export_limit: ems_sec.number("p_export_limit", crate::ems::DEFAULT_GRID_LIMIT_KW)?,
        },
        initial_soc: bat_sec.number("initial_soc", 0.5)?,
        events: Vec::new(),
    };
    s.pv_control.validate().map_err(|m| pv_sec.invalid(m))?;
    s.grid.validate().map_err(|m| ems_sec.invalid(m))?;

    let mut previous: Option<f64> = None;
    for raw in raw_events {
        let event = event(raw, &s.grid)?;
        if let Some(prev) = previous {
            if event.time < prev {
                return Err(raw.time.error(ParseErrorKind::UnsortedEvents { t: event.time, previous: prev }));
            }
        }
        if !(0.0..=s.duration).contains(&event.time) {
            return Err(raw.time.bad("t", format!("event time must lie in [0, {}] s", s.duration)));
        }
        event.kind.validate().map_err(|m| raw.value.bad(raw.kind.text, m))?;
        previous = Some(event.time);
        s.events.push(event);
    }

    s.validate().map_err(|e| {
        let message = e.0;
        let (line, column) = [meta, bat_sec, ems_sec]
            .into_iter()
            .find_map(|sec| sec.named_key(&message))
            .unwrap_or_else(|| meta.locate(&message));
        ParseError { line, column, kind: ParseErrorKind::Invalid(message) }
    })?;
    Ok(s)
}

fn pv_params(sec: &Section) -> Result<PvParams, ParseError> {
    let cell_fields = &PV_CELL_KEYS[..11];
    let mut p = if let Some(t) = sec.get("rated_power") {
        let rated = t.number("rated_power")?;
        PvParams::calibrated(rated).map_err(|e| t.bad("rated_power", e.to_string()))?
    } else if cell_fields.iter().all(|k| sec.get(k).is_some()) {
        PvParams::template()
    } else {
        PvParams::calibrated(DEFAULT_RATED_POWER_KW).map_err(|e| sec.invalid(e.to_string()))?
    };
    let f64s: [(&str, &mut f64); 9] = [
        ("photocurrent_stc", &mut p.photocurrent_stc),
        ("saturation_current", &mut p.saturation_current),
        ("series_resistance", &mut p.series_resistance),
        ("shunt_resistance", &mut p.shunt_resistance),
        ("ideality_factor", &mut p.ideality_factor),
        ("thermal_voltage_stc", &mut p.thermal_voltage_stc),
        ("current_temp_coeff", &mut p.current_temp_coeff),
        ("irradiance_stc", &mut p.irradiance_stc),
        ("temp_stc", &mut p.temp_stc),
    ];
    for (key, field) in f64s {
        if let Some(t) = sec.get(key) {
            *field = t.number(key)?;
        }
    }
    for (key, field) in [("cells_series", &mut p.cells_series), ("strings_parallel", &mut p.strings_parallel)] {
        if let Some(t) = sec.get(key) {
            *field = u32::try_from(t.count(key)?).map_err(|_| t.bad(key, "too large"))?;
        }
    }
    p.validate().map_err(|e| sec.invalid(e.to_string()))?;
    Ok(p)
}

fn battery_params(sec: &Section) -> Result<BatteryParams, ParseError> {
    let d = BatteryParams::default();
    let p = BatteryParams {
        capacity_kwh: sec.number("capacity", d.capacity_kwh)?,
        soc_max: sec.number("soc_max", d.soc_max)?,
        soc_min: sec.number("soc_min", d.soc_min)?,
        p_charge_max: sec.number("p_charge_max", d.p_charge_max)?,
        p_discharge_max: sec.number("p_discharge_max", d.p_discharge_max)?,
        efficiency_charge: sec.number("efficiency_charge", d.efficiency_charge)?,
        efficiency_discharge: sec.number("efficiency_discharge", d.efficiency_discharge)?,
        tracking_time_constant: sec.number("tau", d.tracking_time_constant)?,
        hysteresis: sec.number("hysteresis", d.hysteresis)?,
    };
    p.validate().map_err(|m| sec.invalid(m))?;
    Ok(p)
}

fn inverter_params(sec: &Section) -> Result<InverterParams, ParseError> {
    let d = InverterParams::default();
    let mut p = InverterParams {
        capacitance: sec.number("capacitance", d.capacitance)?,
        v_dc_ref: sec.number("v_dc_ref", d.v_dc_ref)?,
        v_ll: sec.number("v_ll", d.v_ll)?,
        frequency: sec.number("frequency", d.frequency)?,
        kp: 0.0,
        ki: 0.0,
        current_tau: sec.number("current_tau", d.current_tau)?,
        current_limit: sec.number("current_limit", d.current_limit)?,
        efficiency: sec.number("efficiency", d.efficiency)?,
    };
    let bandwidth = sec.number("loop_bandwidth", DEFAULT_LOOP_BANDWIDTH)?;
    let damping = sec.number("loop_damping", DEFAULT_LOOP_DAMPING)?;
    let (kp, ki) = p.pole_placement_gains(bandwidth, damping);
    p.kp = sec.number("kp", kp)?;
    p.ki = sec.number("ki", ki)?;
    p.validate().map_err(|m| sec.invalid(m))?;
    Ok(p)
}

fn event(raw: &RawEvent, grid_defaults: &GridRequest) -> Result<Event, ParseError> {
    let time = raw.time.number("t")?;
    let name = raw.kind.text;
    if name != "grid" {
        if let Some((k, _)) = raw.options.first() {
            return Err(k.error(ParseErrorKind::UnknownKey { section: "events".into(), key: k.text.to_string() }));
        }
    }
    let kind = match name {
        "irradiance" => EventKind::SetIrradiance(raw.value.number(name)?),
        "temperature" => EventKind::SetTemperature(raw.value.number(name)?),
        "load" => EventKind::SetDcLoad(raw.value.number(name)?),
        "vdc_ref" => EventKind::SetVdcRef(raw.value.number(name)?),
        "q_ref" => EventKind::SetQRef(raw.value.number(name)?),
        "grid" => {
            let mut g = GridRequest { p_request: raw.value.grid_power(name)?, ..*grid_defaults };
            let mut seen: Vec<&str> = Vec::new();
            for (k, v) in &raw.options {
                if seen.contains(&k.text) {
                    return Err(k.error(ParseErrorKind::DuplicateKey(k.text.to_string())));
                }
                seen.push(k.text);
                match k.text {
                    "q" => g.q_request = v.number("q")?,
                    "p_import_limit" => g.p_import_limit = v.number(k.text)?,
                    "p_export_limit" => g.p_export_limit = v.number(k.text)?,
                    other => {
                        return Err(
                            k.error(ParseErrorKind::UnknownKey { section: "events".into(), key: other.to_string() })
                        )
                    }
                }
            }
            EventKind::SetGridRequest(g)
        }
        other => return Err(raw.kind.error(ParseErrorKind::UnknownEvent(other.to_string()))),
    };
    Ok(Event::new(time, kind))
}

fn grid_power_text(p: GridPower) -> String {
    match p {
        GridPower::Export(v) => format!("{v}"),
        GridPower::AbsorbMax => "max".to_string(),
    }
}

/// Serialize every field of `s` explicitly; [`parse_scenario`] reads it
/// back to an identical scenario.
pub fn write_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let w = &mut out;
    let pv = &s.pv;
    let c = &s.pv_control;
    let b = &s.battery;
    let inv = &s.inverter;
    let g = &s.grid;
    // Writing to a String cannot fail.
    let _ = writeln!(w, "[meta]\nduration = {}\ndt = {}\nlog_decimation = {}\n", s.duration, s.dt, s.log_decimation);
    let _ = writeln!(w, "{}", pv_section(pv));
    let _ = writeln!(
        w,
        "mppt_period = {}\nmppt_step = {}\ncurtail_gain = {}\nconverter_tau = {}\nconverter_efficiency = {}\n",
        c.update_period, c.step_fraction, c.curtail_gain, c.converter_tau, c.converter_efficiency
    );
    let _ = writeln!(
        w,
        "[battery]\ncapacity = {}\nsoc_min = {}\nsoc_max = {}\np_charge_max = {}\np_discharge_max = {}\n\
         efficiency_charge = {}\nefficiency_discharge = {}\ntau = {}\nhysteresis = {}\ninitial_soc = {}\n",
        b.capacity_kwh,
        b.soc_min,
        b.soc_max,
        b.p_charge_max,
        b.p_discharge_max,
        b.efficiency_charge,
        b.efficiency_discharge,
        b.tracking_time_constant,
        b.hysteresis,
        s.initial_soc
    );
    let _ = writeln!(
        w,
        "[inverter]\ncapacitance = {}\nv_dc_ref = {}\nv_ll = {}\nfrequency = {}\nkp = {}\nki = {}\n\
         current_tau = {}\ncurrent_limit = {}\nefficiency = {}\n",
        inv.capacitance,
        inv.v_dc_ref,
        inv.v_ll,
        inv.frequency,
        inv.kp,
        inv.ki,
        inv.current_tau,
        inv.current_limit,
        inv.efficiency
    );
    let _ = writeln!(
        w,
        "[ems]\nperiod = {}\np_request = {}\nq_request = {}\np_import_limit = {}\np_export_limit = {}\nmax_infeasible_periods = {}\n",
        s.ems_period,
        grid_power_text(g.p_request),
        g.q_request,
        g.p_import_limit,
        g.p_export_limit,
        s.max_infeasible_periods
    );
    let _ = writeln!(w, "[events]");
    for ev in &s.events {
        let t = ev.time;
        let _ = match ev.kind {
            EventKind::SetIrradiance(v) => writeln!(w, "t={t} irradiance {v}"),
            EventKind::SetTemperature(v) => writeln!(w, "t={t} temperature {v}"),
            EventKind::SetDcLoad(v) => writeln!(w, "t={t} load {v}"),
            EventKind::SetVdcRef(v) => writeln!(w, "t={t} vdc_ref {v}"),
            EventKind::SetQRef(v) => writeln!(w, "t={t} q_ref {v}"),
            EventKind::SetGridRequest(r) => writeln!(
                w,
                "t={t} grid {} q={} p_import_limit={} p_export_limit={}",
                grid_power_text(r.p_request),
                r.q_request,
                r.p_import_limit,
                r.p_export_limit
            ),
        };
    }
    out
}

/// `[pv]` header and every cell parameter of `pv`.
pub fn pv_section(pv: &PvParams) -> String {
    format!(
        "[pv]\nphotocurrent_stc = {}\nsaturation_current = {}\nseries_resistance = {}\nshunt_resistance = {}\n\
         ideality_factor = {}\nthermal_voltage_stc = {}\ncells_series = {}\nstrings_parallel = {}\n\
         current_temp_coeff = {}\nirradiance_stc = {}\ntemp_stc = {}",
        pv.photocurrent_stc,
        pv.saturation_current,
        pv.series_resistance,
        pv.shunt_resistance,
        pv.ideality_factor,
        pv.thermal_voltage_stc,
        pv.cells_series,
        pv.strings_parallel,
        pv.current_temp_coeff,
        pv.irradiance_stc,
        pv.temp_stc
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[meta]\nduration = 2\n";

    fn err(text: &str) -> ParseError {
        parse_scenario(text).unwrap_err()
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s, Scenario::with_defaults(2.0).unwrap());
    }

    #[test]
    fn several_pairs_per_line_and_comments() {
        let s =
            parse_scenario("[meta] # run\nduration=3 dt = 0.002   # s\n[battery]\nsoc_min=0.1 soc_max=0.9\n").unwrap();
        assert_eq!((s.duration, s.dt), (3.0, 0.002));
        assert_eq!((s.battery.soc_min, s.battery.soc_max), (0.1, 0.9));
    }

    #[test]
    fn inverted_soc_limits_point_at_key() {
        let e = err("[meta]\nduration = 2\n[battery]\nsoc_min=0.95 soc_max=0.20\n");
        assert_eq!((e.line, e.column), (4, 1));
        let msg = e.to_string();
        assert!(msg.contains("soc_min < soc_max"), "{msg}");
    }

    #[test]
    fn unknown_key_located() {
        let e = err("[meta]\nduration = 2\n[battery]\n  capacity = 5 bogus = 1\n");
        assert_eq!((e.line, e.column), (4, 16));
        assert!(matches!(e.kind, ParseErrorKind::UnknownKey { .. }));
    }

    #[test]
    fn unknown_section_rejected() {
        let e = err("[meta]\nduration = 2\n[grid]\n");
        assert_eq!(e.kind, ParseErrorKind::UnknownSection("grid".into()));
        assert_eq!(e.line, 3);
    }

    #[test]
    fn units_are_not_accepted_in_values() {
        let e = err("[meta]\nduration = 5s\n");
        assert!(matches!(e.kind, ParseErrorKind::BadValue { .. }));
        assert_eq!((e.line, e.column), (2, 12));
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = err("[meta]\nduration = 2 duration = 3\n");
        assert_eq!(e.kind, ParseErrorKind::DuplicateKey("duration".into()));
    }

    #[test]
    fn missing_duration_rejected() {
        assert!(matches!(err("[meta]\ndt = 0.001\n").kind, ParseErrorKind::Invalid(_)));
    }

    #[test]
    fn unsorted_events_rejected() {
        let e = err("[meta]\nduration = 2\n[events]\nt=1 load 5\nt=0.5 load 6\n");
        assert_eq!(e.line, 5);
        assert!(matches!(e.kind, ParseErrorKind::UnsortedEvents { .. }));
    }

    #[test]
    fn event_syntax() {
        let s = parse_scenario(
            "[meta]\nduration = 2\n[ems]\np_export_limit = 300\n[events]\n\
             t=0 irradiance 800\nt = 0.5 grid max q=5\nt=1 grid 20 p_import_limit=100\nt=1.5 q_ref -3\n",
        )
        .unwrap();
        assert_eq!(s.events.len(), 4);
        assert_eq!(s.events[0].kind, EventKind::SetIrradiance(800.0));
        let EventKind::SetGridRequest(g) = s.events[1].kind else { panic!() };
        assert_eq!(g.p_request, GridPower::AbsorbMax);
        assert_eq!((g.q_request, g.p_export_limit, g.p_import_limit), (5.0, 300.0, 500.0));
        let EventKind::SetGridRequest(g) = s.events[2].kind else { panic!() };
        assert_eq!(g.p_import_limit, 100.0);
        assert_eq!(s.events[3].kind, EventKind::SetQRef(-3.0));
    }

    #[test]
    fn bad_events() {
        assert!(matches!(err("[meta]\nduration=2\n[events]\nt=1 fog 3\n").kind, ParseErrorKind::UnknownEvent(_)));
        assert!(matches!(err("[meta]\nduration=2\n[events]\nt=3 load 3\n").kind, ParseErrorKind::BadValue { .. }));
        assert!(matches!(err("[meta]\nduration=2\n[events]\nt=1 load -3\n").kind, ParseErrorKind::BadValue { .. }));
        assert!(matches!(err("[meta]\nduration=2\n[events]\nt=1 load\n").kind, ParseErrorKind::Syntax(_)));
        assert!(matches!(err("[meta]\nduration=2\n[events]\nx=1 load 3\n").kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(err("duration = 2\n").kind, ParseErrorKind::Syntax(_)));
        assert!(matches!(err("[meta\n").kind, ParseErrorKind::Syntax(_)));
        let e = err("[meta]\nduration 2\n");
        assert_eq!((e.line, e.column), (2, 10));
    }

    #[test]
    fn writer_round_trips() {
        let mut s = Scenario::with_defaults(3.0).unwrap();
        s.inverter.kp = 12.345678901234567;
        s.grid.p_request = GridPower::AbsorbMax;
        s.events = vec![
            Event::new(0.0, EventKind::SetIrradiance(1000.0)),
            Event::new(0.25, EventKind::SetGridRequest(GridRequest { q_request: 7.5, ..GridRequest::default() })),
            Event::new(2.0, EventKind::SetVdcRef(500.0)),
        ];
        let text = write_scenario(&s);
        assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}
