//! Centralized dispatch: picks the PV control mode and the battery and grid
//! setpoints so that, with converter losses neglected,
//!
//! ```text
//! p_pv + p_bat = p_grid + p_load
//! ```
//!
//! All powers are kW. `p_bat > 0` discharges, `p_grid > 0` exports.

use std::fmt;

use thiserror::Error;

use crate::battery::{BatteryParams, SocGate};
use crate::mppt::PvControlMode;

pub const DEFAULT_GRID_LIMIT_KW: f64 = 500.0;
pub const DEFAULT_EMS_PERIOD: f64 = 0.050;

/// Active power the utility asks the microgrid to export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPower {
    /// Fixed export request (kW, >= 0).
    Export(f64),
    /// Export as much as the microgrid can.
    AbsorbMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRequest {
    pub p_request: GridPower,
    /// Reactive power request (kVAr).
    pub q_request: f64,
    pub p_import_limit: f64,
    pub p_export_limit: f64,
}

impl Default for GridRequest {
    fn default() -> Self {
        Self {
            p_request: GridPower::Export(0.0),
            q_request: 0.0,
            p_import_limit: DEFAULT_GRID_LIMIT_KW,
            p_export_limit: DEFAULT_GRID_LIMIT_KW,
        }
    }
}

impl GridRequest {
    /// Export request with `AbsorbMax` replaced by the export limit.
    pub fn resolved_request(&self) -> f64 {
        match self.p_request {
            GridPower::Export(p) => p.clamp(0.0, self.p_export_limit),
            GridPower::AbsorbMax => self.p_export_limit,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("p_import_limit", self.p_import_limit), ("p_export_limit", self.p_export_limit)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let GridPower::Export(p) = self.p_request {
            if !(p.is_finite() && p >= 0.0) {
                return Err(format!("grid request must be finite and non-negative, got {p}"));
            }
        }
        if !self.q_request.is_finite() {
            return Err("reactive power request must be finite".into());
        }
        Ok(())
    }
}

/// Which of the five reference operating situations the inputs fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    /// PV surplus, battery not full: battery absorbs the excess.
    Case1,
    /// PV surplus, battery full: PV curtailed.
    Case2,
    /// Deficit within battery capability.
    Case3,
    /// Deficit beyond battery capability: export what is available.
    Case4,
    /// PV short of the DC load, battery depleted: import.
    Case5,
    Other,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::Case1 => "case1",
            CaseLabel::Case2 => "case2",
            CaseLabel::Case3 => "case3",
            CaseLabel::Case4 => "case4",
            CaseLabel::Case5 => "case5",
            CaseLabel::Other => "other",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CaseLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "case1" => CaseLabel::Case1,
            "case2" => CaseLabel::Case2,
            "case3" => CaseLabel::Case3,
            "case4" => CaseLabel::Case4,
            "case5" => CaseLabel::Case5,
            "other" => CaseLabel::Other,
            _ => return Err(format!("unknown case label `{s}`")),
        })
    }
}

/// Supervisor output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispatch {
    pub pv_mode: PvControlMode,
    pub p_pv_ref: f64,
    pub p_bat_ref: f64,
    pub p_grid_set: f64,
    pub q_set: f64,
    /// Load disconnected because demand could not be met (kW, 0 normally).
    pub load_shed: f64,
    pub case_label: CaseLabel,
}

impl Dispatch {
    /// `p_pv_ref + p_bat_ref - p_grid_set - (p_load - load_shed)`.
    pub fn balance_residual(&self, p_load: f64) -> f64 {
        self.p_pv_ref + self.p_bat_ref - self.p_grid_set - (p_load - self.load_shed)
    }
}

/// Demand exceeds PV, battery and import capacity together.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("infeasible dispatch: {shortfall:.3} kW of load cannot be supplied")]
pub struct Infeasible {
    pub shortfall: f64,
    /// Balanced dispatch with the shortfall shed from the load.
    pub fallback: Dispatch,
}

/// Classify the operating situation. `p_request` must already be resolved
/// (see [`GridRequest::resolved_request`]).
pub fn classify_case(p_mpp_available: f64, p_load: f64, p_request: f64, soc: f64, bat: &BatteryParams) -> CaseLabel {
    let demand = p_load + p_request;
    if p_mpp_available < p_load && soc <= bat.soc_min {
        CaseLabel::Case5
    } else if p_mpp_available > demand {
        if soc < bat.soc_max {
            CaseLabel::Case1
        } else {
            CaseLabel::Case2
        }
    } else if p_mpp_available < demand && soc >= bat.soc_min {
        if demand <= p_mpp_available + bat.p_discharge_max {
            CaseLabel::Case3
        } else {
            CaseLabel::Case4
        }
    } else {
        CaseLabel::Other
    }
}

/// Decide the setpoints for one supervisory period.
///
/// `gate` carries the SOC hysteresis latch between calls and is updated
/// from `soc` before deciding.
pub fn dispatch(
    p_mpp_available: f64,
    p_load: f64,
    grid: &GridRequest,
    soc: f64,
    bat: &BatteryParams,
    gate: &mut SocGate,
) -> Result<Dispatch, Infeasible> {
    *gate = gate.update(soc, bat);
    let p_mpp = p_mpp_available.max(0.0);
    let p_load = p_load.max(0.0);
    let request = grid.resolved_request();
    let surplus = p_mpp - p_load - request;
    let case_label = classify_case(p_mpp, p_load, request, soc, bat);

    let mut pv_mode = PvControlMode::Mppt;
    let mut p_pv_ref = p_mpp;
    let mut p_bat_ref = 0.0;
    let mut shortfall = 0.0;

    if surplus > 0.0 {
        if !gate.charge_blocked {
            let charge = surplus.min(bat.p_charge_max);
            p_bat_ref = -charge;
            let remainder = surplus - charge;
            let extra_export = remainder.min(grid.p_export_limit - request).max(0.0);
            let p_grid = request + extra_export;
            if remainder - extra_export > 0.0 {
                p_pv_ref = p_load + p_grid + charge;
                pv_mode = PvControlMode::PowerReference(p_pv_ref);
            }
        } else {
            p_pv_ref = request + p_load;
            pv_mode = PvControlMode::PowerReference(p_pv_ref);
        }
    } else if surplus < 0.0 {
        let deficit = -surplus;
        if !gate.discharge_blocked {
            let discharge = deficit.min(bat.p_discharge_max);
            p_bat_ref = discharge;
            let p_grid = request - (deficit - discharge);
            if p_grid < -grid.p_import_limit {
                shortfall = -grid.p_import_limit - p_grid;
            }
        } else {
            let p_grid = request - deficit;
            if p_grid < -grid.p_import_limit {
                shortfall = -grid.p_import_limit - p_grid;
            } else if !gate.charge_blocked {
                let headroom = grid.p_import_limit + p_grid.min(0.0);
                p_bat_ref = -bat.p_charge_max.min(headroom);
            }
        }
    }

    let load_shed = shortfall;
    // Grid setpoint last so the balance closes exactly.
    let p_grid_set = p_pv_ref + p_bat_ref - (p_load - load_shed);
    let out = Dispatch { pv_mode, p_pv_ref, p_bat_ref, p_grid_set, q_set: grid.q_request, load_shed, case_label };
    if shortfall > 0.0 {
        Err(Infeasible { shortfall, fallback: out })
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p_mpp: f64, load: f64, request: f64, soc: f64) -> Dispatch {
        let grid = GridRequest { p_request: GridPower::Export(request), ..GridRequest::default() };
        let bat = BatteryParams::default();
        let mut gate = SocGate::from_soc(soc, &bat);
        dispatch(p_mpp, load, &grid, soc, &bat, &mut gate).unwrap()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} != {b}");
    }

    #[test]
    fn excess_pv_charges_battery() {
        let d = run(165.0, 50.0, 105.0, 0.60);
        assert_eq!(d.pv_mode, PvControlMode::Mppt);
        assert_close(d.p_bat_ref, -10.0);
        assert_close(d.p_grid_set, 105.0);
        assert_eq!(d.case_label, CaseLabel::Case1);
    }

    #[test]
    fn full_battery_curtails_pv() {
        let d = run(165.0, 50.0, 100.0, 0.96);
        assert_eq!(d.pv_mode, PvControlMode::PowerReference(150.0));
        assert_close(d.p_pv_ref, 150.0);
        assert_eq!(d.p_bat_ref, 0.0);
        assert_close(d.p_grid_set, 100.0);
        assert_eq!(d.case_label, CaseLabel::Case2);
    }

    #[test]
    fn deficit_discharges_battery() {
        let d = run(165.0, 50.0, 125.0, 0.60);
        assert_eq!(d.pv_mode, PvControlMode::Mppt);
        assert_close(d.p_bat_ref, 10.0);
        assert_close(d.p_grid_set, 125.0);
        assert_eq!(d.case_label, CaseLabel::Case3);
    }

    #[test]
    fn absorb_max_exports_everything_available() {
        let grid = GridRequest { p_request: GridPower::AbsorbMax, ..GridRequest::default() };
        let bat = BatteryParams::default();
        let mut gate = SocGate::from_soc(0.6, &bat);
        let d = dispatch(165.0, 50.0, &grid, 0.6, &bat, &mut gate).unwrap();
        assert_close(d.p_bat_ref, 10.0);
        assert_close(d.p_grid_set, 125.0);
        assert_eq!(d.case_label, CaseLabel::Case4);
    }

    #[test]
    fn depleted_battery_imports_and_recharges() {
        let d = run(165.0, 190.0, 0.0, 0.19);
        assert_eq!(d.pv_mode, PvControlMode::Mppt);
        assert_close(d.p_bat_ref, -10.0);
        assert_close(d.p_grid_set, -35.0);
        assert_eq!(d.case_label, CaseLabel::Case5);
    }

    #[test]
    fn null_system() {
        let d = run(0.0, 0.0, 0.0, 0.5);
        assert_eq!(d.pv_mode, PvControlMode::Mppt);
        assert_eq!(d.p_bat_ref, 0.0);
        assert_eq!(d.p_grid_set, 0.0);
    }

    #[test]
    fn exactly_full_counts_as_full() {
        let bat = BatteryParams::default();
        assert_eq!(classify_case(165.0, 50.0, 105.0, 0.95, &bat), CaseLabel::Case2);
        let d = run(165.0, 50.0, 105.0, 0.95);
        assert_eq!(d.p_bat_ref, 0.0);
        assert_close(d.p_pv_ref, 155.0);
    }

    #[test]
    fn unabsorbable_excess_is_curtailed() {
        let grid = GridRequest { p_request: GridPower::Export(0.0), p_export_limit: 20.0, ..GridRequest::default() };
        let bat = BatteryParams::default();
        let mut gate = SocGate::from_soc(0.5, &bat);
        let d = dispatch(165.0, 50.0, &grid, 0.5, &bat, &mut gate).unwrap();
        assert_close(d.p_bat_ref, -10.0);
        assert_close(d.p_grid_set, 20.0);
        assert_eq!(d.pv_mode, PvControlMode::PowerReference(80.0));
    }

    #[test]
    fn infeasible_reports_shortfall() {
        let grid = GridRequest { p_import_limit: 20.0, ..GridRequest::default() };
        let bat = BatteryParams::default();
        let mut gate = SocGate::from_soc(0.5, &bat);
        let err = dispatch(0.0, 100.0, &grid, 0.5, &bat, &mut gate).unwrap_err();
        assert_close(err.shortfall, 70.0);
        assert_close(err.fallback.p_grid_set, -20.0);
        assert_close(err.fallback.balance_residual(100.0), 0.0);
    }

    #[test]
    fn hysteresis_keeps_charging_blocked() {
        let bat = BatteryParams::default();
        let grid = GridRequest { p_request: GridPower::Export(105.0), ..GridRequest::default() };
        let mut gate = SocGate::from_soc(0.95, &bat);
        let d = dispatch(165.0, 50.0, &grid, 0.945, &bat, &mut gate).unwrap();
        assert_eq!(d.p_bat_ref, 0.0);
        let d = dispatch(165.0, 50.0, &grid, 0.935, &bat, &mut gate).unwrap();
        assert_close(d.p_bat_ref, -10.0);
    }
}
