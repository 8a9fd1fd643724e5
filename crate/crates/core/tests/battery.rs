use proptest::prelude::*;
use pvgrid::battery::{battery_advance, BatteryParams, BatteryState, SocGate};

fn params(tau: f64, eta: f64) -> BatteryParams {
    BatteryParams {
        tracking_time_constant: tau,
        efficiency_charge: eta,
        efficiency_discharge: eta,
        ..BatteryParams::default()
    }
}

fn references() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0..30.0f64, 1..400)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn soc_stays_in_window(
        soc0 in 0.20..0.95f64,
        refs in references(),
        dt in 1e-3..2.0f64,
        tau in 0.0..0.1f64,
        eta in 0.8..1.0f64,
    ) {
        let p = params(tau, eta);
        let delta = p.one_step_soc_bound(dt);
        let mut s = BatteryState::new(soc0);
        for r in refs {
            s = battery_advance(&s, &p, r, dt);
            prop_assert!(s.soc >= p.soc_min - delta && s.soc <= p.soc_max + delta, "soc {}", s.soc);
        }
    }

    #[test]
    fn realized_power_within_limits(soc0 in 0.0..1.0f64, refs in references(), dt in 1e-4..1.0f64, tau in 0.0..0.1f64) {
        let p = params(tau, 0.95);
        let mut s = BatteryState::new(soc0);
        for r in refs {
            s = battery_advance(&s, &p, r, dt);
            prop_assert!(s.p_bat >= -p.p_charge_max && s.p_bat <= p.p_discharge_max);
        }
    }

    #[test]
    fn lossless_energy_accounting(soc0 in 0.3..0.85f64, refs in references(), dt in 1e-3..1.0f64, tau in 0.0..0.1f64) {
        let p = params(tau, 1.0);
        let mut s = BatteryState::new(soc0);
        let mut energy_out = 0.0;
        for r in refs {
            s = battery_advance(&s, &p, r, dt);
            energy_out += s.p_bat * dt;
        }
        let stored = p.capacity_kwh * 3600.0 * (s.soc - soc0);
        prop_assert!((stored + energy_out).abs() <= 1e-9 * energy_out.abs().max(p.capacity_kwh * 3600.0 * 1e-6));
    }

    #[test]
    fn sign_convention(soc0 in 0.25..0.9f64, p_ref in 0.1..10.0f64, dt in 1e-3..1.0f64, eta in 0.5..1.0f64) {
        let p = params(0.0, eta);
        let discharged = battery_advance(&BatteryState::new(soc0), &p, p_ref, dt);
        prop_assert!(discharged.p_bat > 0.0 && discharged.soc < soc0);
        let charged = battery_advance(&BatteryState::new(soc0), &p, -p_ref, dt);
        prop_assert!(charged.p_bat < 0.0 && charged.soc > soc0);
    }

    #[test]
    fn gate_blocks_only_at_limits(soc in 0.0..1.0f64) {
        let p = BatteryParams::default();
        let g = SocGate::from_soc(soc, &p);
        prop_assert_eq!(g.charge_blocked, soc >= p.soc_max);
        prop_assert_eq!(g.discharge_blocked, soc <= p.soc_min);
    }
}

#[test]
fn depleted_battery_may_still_charge() {
    let p = BatteryParams::default();
    let mut s = BatteryState::new(0.19);
    for _ in 0..1000 {
        s = battery_advance(&s, &p, -10.0, 1e-3);
    }
    assert!((s.p_bat + 10.0).abs() < 1e-9);
    assert!(s.soc > 0.19);
}
