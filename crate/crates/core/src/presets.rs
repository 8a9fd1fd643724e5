//! The five reference operating cases as runnable scenarios.
//!
//! Every preset runs 5 s at full sun (1000 W/m2, 25 degC) with a 50 kW DC
//! load and no grid request at t = 0; the case-defining change happens at
//! t = 1 s. Initial SOC selects the battery situation. The 5 s horizon and
//! 1 s event time are choices of this crate, as is the 100 kWh capacity.

use crate::ems::{GridPower, GridRequest};
use crate::error::PvError;
use crate::sim::{Event, EventKind, Scenario};

pub const PRESET_DURATION: f64 = 5.0;
pub const CASE_EVENT_TIME: f64 = 1.0;

/// Shipped scenario files, byte-identical to the files under `presets/`.
pub const PRESET_FILES: [&str; 5] = [
    include_str!("../presets/case1.scn"),
    include_str!("../presets/case2.scn"),
    include_str!("../presets/case3.scn"),
    include_str!("../presets/case4.scn"),
    include_str!("../presets/case5.scn"),
];

fn base(initial_soc: f64) -> Result<Scenario, PvError> {
    let mut s = Scenario::with_defaults(PRESET_DURATION)?;
    s.initial_soc = initial_soc;
    s.events = vec![
        Event::new(0.0, EventKind::SetIrradiance(1000.0)),
        Event::new(0.0, EventKind::SetTemperature(25.0)),
        Event::new(0.0, EventKind::SetDcLoad(50.0)),
    ];
    Ok(s)
}

fn request(p_request: GridPower) -> EventKind {
    EventKind::SetGridRequest(GridRequest { p_request, ..GridRequest::default() })
}

/// Surplus PV, battery below its upper limit: battery charges.
pub fn case1() -> Result<Scenario, PvError> {
    let mut s = base(0.60)?;
    s.events.push(Event::new(CASE_EVENT_TIME, request(GridPower::Export(105.0))));
    Ok(s)
}

/// Surplus PV, battery full: PV curtailed to load plus request.
pub fn case2() -> Result<Scenario, PvError> {
    let mut s = base(0.96)?;
    s.events.push(Event::new(CASE_EVENT_TIME, request(GridPower::Export(100.0))));
    Ok(s)
}

/// Demand slightly above PV: battery covers the gap.
pub fn case3() -> Result<Scenario, PvError> {
    let mut s = base(0.60)?;
    s.events.push(Event::new(CASE_EVENT_TIME, request(GridPower::Export(125.0))));
    Ok(s)
}

/// Grid takes everything: PV at MPP plus battery at its discharge limit.
pub fn case4() -> Result<Scenario, PvError> {
    let mut s = base(0.60)?;
    s.events.push(Event::new(CASE_EVENT_TIME, request(GridPower::AbsorbMax)));
    Ok(s)
}

/// Load rises past PV with a depleted battery: import and recharge.
pub fn case5() -> Result<Scenario, PvError> {
    let mut s = base(0.19)?;
    s.events.push(Event::new(CASE_EVENT_TIME, EventKind::SetDcLoad(190.0)));
    Ok(s)
}

/// Preset by case number 1..=5.
pub fn preset(case: u8) -> Option<Result<Scenario, PvError>> {
    Some(match case {
        1 => case1(),
        2 => case2(),
        3 => case3(),
        4 => case4(),
        5 => case5(),
        _ => return None,
    })
}
