//! Fixed-timestep simulator and supervisory control for a grid-connected
//! PV-battery DC microgrid.
//!
//! The PV array feeds the DC bus through a boost converter run by
//! incremental-conductance MPPT or power-reference curtailment; a battery
//! sits behind a bidirectional converter with SOC limits; a grid-tied
//! inverter holds the DC bus voltage and sets reactive power. A central
//! dispatcher ([`ems::dispatch`]) decides the PV mode and the battery and
//! grid setpoints so that PV plus battery power equals grid plus load.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod cli;
pub mod csv;
pub mod ems;
pub mod error;
pub mod inverter;
pub mod mppt;
pub mod presets;
pub mod pv;
pub mod scenario_file;
pub mod sim;

pub use ems::{dispatch, CaseLabel, Dispatch, GridPower, GridRequest};
pub use sim::{run, steady_state_summary, Scenario, SimOutput, SimRecord};
