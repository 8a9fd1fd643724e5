use proptest::prelude::*;
use proptest::test_runner::TestRunner;
use pvgrid::battery::{BatteryParams, SocGate};
use pvgrid::ems::{classify_case, dispatch, CaseLabel, GridPower, GridRequest};
use pvgrid::mppt::PvControlMode;

/// The five operating situations exactly as stated in words, each a set
/// membership test; overlapping conditions may match several.
fn literal_cases(p_pv: f64, p_load: f64, p_grid: f64, soc: f64, p_bat_max: f64) -> Vec<CaseLabel> {
    let demand = p_load + p_grid;
    let mut out = Vec::new();
    if p_pv > demand && soc < 0.95 {
        out.push(CaseLabel::Case1);
    }
    if p_pv > demand && soc >= 0.95 {
        out.push(CaseLabel::Case2);
    }
    // upper bound taken inclusive, so the exact boundary counts as Case 3
    if p_pv < demand && demand <= p_pv + p_bat_max && soc >= 0.20 {
        out.push(CaseLabel::Case3);
    }
    if p_pv + p_bat_max < demand && soc >= 0.20 {
        out.push(CaseLabel::Case4);
    }
    if p_pv < p_load && soc <= 0.20 {
        out.push(CaseLabel::Case5);
    }
    out
}

struct Tuple {
    p_mpp: f64,
    p_load: f64,
    grid: GridRequest,
    soc: f64,
    gate: SocGate,
}

/// Half the draws are continuous, half sit on a coarse lattice so that
/// ties and limit boundaries come up often.
fn draw(rng: &mut proptest::test_runner::TestRng) -> Tuple {
    let lattice = rng.random_bool(0.5);
    let mut value = |hi: f64, step: f64| {
        if lattice {
            (rng.random_range(0.0..=hi) / step).round() * step
        } else {
            rng.random_range(0.0..=hi)
        }
    };
    let p_mpp = value(300.0, 5.0);
    let p_load = value(300.0, 5.0);
    let p_request = value(200.0, 5.0);
    let p_import_limit = value(400.0, 50.0);
    let p_export_limit = value(400.0, 50.0);
    let soc = value(1.0, 0.01);
    let q_request = value(40.0, 10.0) - 20.0;
    let absorb = rng.random_bool(0.1);
    let gate = SocGate { charge_blocked: rng.random_bool(0.5), discharge_blocked: rng.random_bool(0.5) };
    Tuple {
        p_mpp,
        p_load,
        grid: GridRequest {
            p_request: if absorb { GridPower::AbsorbMax } else { GridPower::Export(p_request) },
            q_request,
            p_import_limit,
            p_export_limit,
        },
        soc,
        gate,
    }
}

/// Dispatch `draws` random tuples and check balance, authority, PV
/// feasibility, limits and classification. Returns the infeasible count.
pub fn randomized_dispatch_check(draws: usize) -> usize {
    let bat = BatteryParams::default();
    let mut runner = TestRunner::deterministic();
    let rng = runner.rng();
    let mut infeasible = 0usize;
    for n in 0..draws {
        let t = draw(rng);
        let mut gate = t.gate;
        let result = dispatch(t.p_mpp, t.p_load, &t.grid, t.soc, &bat, &mut gate);
        let d = match result {
            Ok(d) => d,
            Err(e) => {
                infeasible += 1;
                assert!(e.shortfall > 0.0);
                e.fallback
            }
        };
        let scale = t.p_mpp + t.p_load + t.grid.p_export_limit + 1.0;
        assert!(d.balance_residual(t.p_load).abs() <= 1e-12 * scale, "draw {n}: balance");
        assert!(d.p_pv_ref >= 0.0 && d.p_pv_ref <= t.p_mpp, "draw {n}: PV feasibility");
        match d.pv_mode {
            PvControlMode::Mppt => assert_eq!(d.p_pv_ref, t.p_mpp, "draw {n}"),
            PvControlMode::PowerReference(p) => {
                assert_eq!(p, d.p_pv_ref);
                assert!(p < t.p_mpp, "draw {n}: curtailing without excess");
            }
        }
        assert!(d.p_bat_ref >= -bat.p_charge_max && d.p_bat_ref <= bat.p_discharge_max, "draw {n}");
        if t.soc >= bat.soc_max || gate.charge_blocked {
            assert!(d.p_bat_ref >= 0.0, "draw {n}: charging while full");
        }
        if t.soc <= bat.soc_min || gate.discharge_blocked {
            assert!(d.p_bat_ref <= 0.0, "draw {n}: discharging while empty");
        }
        let tol = 1e-12 * scale;
        assert!(d.p_grid_set <= t.grid.p_export_limit + tol, "draw {n}: export limit");
        assert!(d.p_grid_set >= -t.grid.p_import_limit - tol, "draw {n}: import limit");
        assert_eq!(d.q_set, t.grid.q_request);

        let resolved = t.grid.resolved_request();
        let label = classify_case(t.p_mpp, t.p_load, resolved, t.soc, &bat);
        assert_eq!(label, d.case_label);
        let literal = literal_cases(t.p_mpp, t.p_load, resolved, t.soc, bat.p_discharge_max);
        if literal.is_empty() {
            assert_eq!(label, CaseLabel::Other, "draw {n}");
        } else {
            assert!(literal.contains(&label), "draw {n}: {label:?} not in {literal:?}");
        }
    }
    assert!(infeasible > 0, "the draw never exercised load shedding");
    infeasible
}
