//! CSV time series of [`SimRecord`]s.
//!
//! Fixed column order (units in the names):
//!
//! ```text
//! t_s, irradiance_wm2, p_pv_kw, v_pv_v, i_pv_a, v_pv_ref_v, pv_mode,
//! p_pv_ref_kw, p_bat_kw, p_bat_ref_kw, soc, p_load_kw, p_grid_kw,
//! p_grid_set_kw, q_grid_kvar, q_set_kvar, v_dc_v, balance_residual_kw,
//! case_label, flags
//! ```
//!
//! Separator `,`, line end `\n`, numbers at 6 significant digits in `%g`
//! style. `pv_mode` is `mppt` or `pref`; `flags` is `-` or `|`-joined names.

use std::io::{BufRead, Write};

use crate::error::CsvError;
use crate::mppt::PvControlMode;
use crate::sim::{Channel, RecordFlags, SimRecord};

pub const COLUMNS: [&str; 20] = [
    "t_s",
    "irradiance_wm2",
    "p_pv_kw",
    "v_pv_v",
    "i_pv_a",
    "v_pv_ref_v",
    "pv_mode",
    "p_pv_ref_kw",
    "p_bat_kw",
    "p_bat_ref_kw",
    "soc",
    "p_load_kw",
    "p_grid_kw",
    "p_grid_set_kw",
    "q_grid_kvar",
    "q_set_kvar",
    "v_dc_v",
    "balance_residual_kw",
    "case_label",
    "flags",
];

pub fn header() -> String {
    COLUMNS.join(",")
}

/// `x` rounded to 6 significant digits, trailing zeros dropped, switching
/// to exponent notation outside `[1e-4, 1e6)` like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent format always has an `e`");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if !(-4..6).contains(&exponent) {
        return format!("{}e{exponent}", trim_fraction(mantissa));
    }
    let decimals = (5 - exponent) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row(r: &SimRecord) -> String {
    let n = format_sig6;
    [
        n(r.t),
        n(r.irradiance),
        n(r.p_pv),
        n(r.v_pv),
        n(r.i_pv),
        n(r.v_pv_ref),
        r.pv_mode.label().to_string(),
        n(r.p_pv_ref),
        n(r.p_bat),
        n(r.p_bat_ref),
        n(r.soc),
        n(r.p_load),
        n(r.p_grid),
        n(r.p_grid_set),
        n(r.q_grid),
        n(r.q_set),
        n(r.v_dc),
        n(r.balance_residual),
        r.case_label.to_string(),
        r.flags.encode(),
    ]
    .join(",")
}

pub fn write_records<W: Write>(mut out: W, records: &[SimRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", header())?;
    for r in records {
        writeln!(out, "{}", row(r))?;
    }
    out.flush()
}

pub fn to_string(records: &[SimRecord]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Parse a CSV written by [`write_records`].
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<SimRecord>, CsvError> {
    let mut lines = input.lines();
    let head = lines.next().transpose()?.unwrap_or_default();
    if head != header() {
        return Err(CsvError::Format { line: 1, reason: "unexpected header".into() });
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| CsvError::Format { line: line_no, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(bad(format!("expected {} fields, found {}", COLUMNS.len(), fields.len())));
        }
        let num = |i: usize| -> Result<f64, CsvError> {
            fields[i].parse::<f64>().map_err(|_| bad(format!("column {} is not a number: `{}`", COLUMNS[i], fields[i])))
        };
        let p_pv_ref = num(7)?;
        let pv_mode = match fields[6] {
            "mppt" => PvControlMode::Mppt,
            "pref" => PvControlMode::PowerReference(p_pv_ref),
            other => return Err(bad(format!("unknown pv_mode `{other}`"))),
        };
        records.push(SimRecord {
            t: num(0)?,
            irradiance: num(1)?,
            p_pv: num(2)?,
            v_pv: num(3)?,
            i_pv: num(4)?,
            v_pv_ref: num(5)?,
            pv_mode,
            p_pv_ref,
            p_bat: num(8)?,
            p_bat_ref: num(9)?,
            soc: num(10)?,
            p_load: num(11)?,
            p_grid: num(12)?,
            p_grid_set: num(13)?,
            q_grid: num(14)?,
            q_set: num(15)?,
            v_dc: num(16)?,
            balance_residual: num(17)?,
            case_label: fields[18].parse().map_err(bad)?,
            flags: RecordFlags::decode(fields[19]).map_err(bad)?,
        });
    }
    Ok(records)
}

/// Column name of a numeric channel; every channel is a CSV column.
pub fn channel_column(channel: Channel) -> &'static str {
    channel.name()
}
