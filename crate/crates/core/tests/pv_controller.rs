use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use pvgrid::mppt::{
    converter_advance, curtail_step, incond_step, ConverterState, MpptState, PvControlMode, PvControlParams,
    PvController,
};
use pvgrid::pv::{self, EnvConditions, PvOperatingPoint, PvParams};

fn calibrated() -> PvParams {
    PvParams::calibrated(165.0).unwrap()
}

fn env(g: f64) -> EnvConditions {
    EnvConditions::new(g, 25.0).unwrap()
}

struct Trace {
    power: Vec<f64>,
    v_ref: Vec<f64>,
}

/// Run `controller` for `steps` steps of `dt`, logging power (W) and v_ref.
fn simulate(c: &mut PvController, p: &PvParams, e: &EnvConditions, steps: usize, dt: f64) -> Trace {
    let mut trace = Trace { power: Vec::with_capacity(steps), v_ref: Vec::with_capacity(steps) };
    for _ in 0..steps {
        let s = c.step(p, e, dt).unwrap();
        trace.power.push(s.terminal.power);
        trace.v_ref.push(c.mppt.v_ref);
    }
    trace
}

fn started_at(p: &PvParams, e: &EnvConditions, fraction_of_voc: f64) -> PvController {
    let voc = pv::open_circuit_voltage(p, e).unwrap();
    PvController::new(p, &PvControlParams::default(), e, fraction_of_voc * voc).unwrap()
}

#[test]
fn hold_when_nothing_changes() {
    let s = MpptState::new(200.0, 1.8, 0.01, 350.0, 290.0);
    let at = PvOperatingPoint::new(200.0, 500.0);
    let s = incond_step(&s, &at);
    let next = incond_step(&s, &at);
    assert_eq!(next.v_ref, s.v_ref);
}

#[test]
fn left_of_mpp_steps_up_by_exactly_one_step() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let a = pv::operating_point(&p, &e, 150.0).unwrap();
    let b = pv::operating_point(&p, &e, 151.0).unwrap();
    let mut s = MpptState::new(151.0, 1.8, 0.01, 357.7, 289.9);
    s.prev_voltage = a.voltage;
    s.prev_current = a.current;
    let next = incond_step(&s, &b);
    assert_eq!(next.v_ref, 151.0 + 1.8);
}

#[test]
fn right_of_mpp_steps_down() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let a = pv::operating_point(&p, &e, 320.0).unwrap();
    let b = pv::operating_point(&p, &e, 321.0).unwrap();
    let mut s = MpptState::new(321.0, 1.8, 0.01, 357.7, 289.9);
    s.prev_voltage = a.voltage;
    s.prev_current = a.current;
    assert_eq!(incond_step(&s, &b).v_ref, 321.0 - 1.8);
}

#[test]
fn converter_first_order_response() {
    let c = ConverterState { terminal_voltage: 0.0, tracking_time_constant: 0.002, efficiency: 1.0 };
    assert_abs_diff_eq!(converter_advance(&c, 100.0, 0.002).terminal_voltage, 63.21, epsilon = 0.01);
    let far = converter_advance(&c, 100.0, 0.02).terminal_voltage;
    assert!((far - 100.0).abs() <= 1e-4 * 100.0);
    let still = ConverterState { terminal_voltage: 42.0, ..c };
    assert_eq!(converter_advance(&still, 42.0, 0.5).terminal_voltage, 42.0);
}

#[test]
fn incond_converges_from_half_voc() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut c = started_at(&p, &e, 0.5);
    let step = c.mppt.step_size;
    let period = c.mppt.update_period;
    simulate(&mut c, &p, &e, 2000, period);
    let v_mpp = pv::true_mpp(&p, &e).unwrap().voltage;
    assert!((c.mppt.v_ref - v_mpp).abs() <= 2.0 * step, "{} vs {v_mpp}", c.mppt.v_ref);
}

#[test]
fn curtails_to_150_kw() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut c = started_at(&p, &e, 0.8);
    c.mode = PvControlMode::PowerReference(150.0);
    let t = simulate(&mut c, &p, &e, 4000, 1e-3);
    let tail = &t.power[3000..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((mean - 150e3).abs() <= 0.01 * 150e3, "{mean}");
}

#[test]
fn zero_reference_parks_at_open_circuit() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut c = started_at(&p, &e, 0.8);
    c.mode = PvControlMode::PowerReference(0.0);
    let t = simulate(&mut c, &p, &e, 4000, 1e-3);
    assert!(t.power.last().unwrap().abs() <= 1e3);
    assert_abs_diff_eq!(c.mppt.v_ref, c.mppt.v_oc_estimate, epsilon = 1e-9);
}

#[test]
fn reference_above_mpp_saturates_at_mpp() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut c = started_at(&p, &e, 0.8);
    c.mode = PvControlMode::PowerReference(200.0);
    let t = simulate(&mut c, &p, &e, 4000, 1e-3);
    assert!((t.power.last().unwrap() - 165e3).abs() <= 0.01 * 165e3);
}

#[test]
fn curtailment_never_leaves_the_right_branch() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut s = MpptState::new(300.0, 1.8, 0.01, 357.7, 289.9);
    for _ in 0..100 {
        let m = pv::operating_point(&p, &e, s.v_ref).unwrap();
        s = curtail_step(&s, &m, 500e3, 6e-5);
        assert!(s.v_ref >= 289.9 && s.v_ref <= 357.7);
    }
    assert_eq!(s.v_ref, 289.9);
}

#[test]
fn delivered_power_includes_efficiency() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let ctl = PvControlParams { converter_efficiency: 0.97, ..PvControlParams::default() };
    let voc = pv::open_circuit_voltage(&p, &e).unwrap();
    let mut c = PvController::new(&p, &ctl, &e, 0.6 * voc).unwrap();
    for k in 0..500 {
        if k == 250 {
            c.mode = PvControlMode::PowerReference(90.0);
        }
        let s = c.step(&p, &e, 1e-3).unwrap();
        assert_eq!(s.delivered, s.terminal.power * 0.97);
    }
}

#[test]
fn mode_switch_is_smooth() {
    let p = calibrated();
    let e = EnvConditions::stc(&p);
    let mut c = started_at(&p, &e, 0.5);
    simulate(&mut c, &p, &e, 3000, 1e-3);
    let p_now = c.step(&p, &e, 1e-3).unwrap().terminal.power;
    c.mode = PvControlMode::PowerReference(p_now * 1e-3);
    let t = simulate(&mut c, &p, &e, 2000, 1e-3);
    let worst = t.power.iter().map(|x| (x - p_now).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.02 * p_now, "{worst} W against {p_now} W");
}

/// Power lost when stepping one perturbation either side of the MPP.
fn one_step_band(p: &PvParams, e: &EnvConditions, step: f64) -> f64 {
    let mpp = pv::true_mpp(p, e).unwrap();
    let lo = pv::operating_point(p, e, mpp.voltage - step).unwrap().power;
    let hi = pv::operating_point(p, e, mpp.voltage + step).unwrap().power;
    mpp.power - lo.min(hi)
}

fn assert_tracks(g: f64) -> Result<(), TestCaseError> {
    let p = calibrated();
    let e = env(g);
    let mut c = started_at(&p, &e, 0.5);
    let step = c.mppt.step_size;
    let t = simulate(&mut c, &p, &e, 6000, 1e-3);
    let mpp = pv::true_mpp(&p, &e).unwrap();
    let tolerance = (0.01 * mpp.power).max(one_step_band(&p, &e, step));
    for (k, (&pw, &v)) in t.power.iter().zip(&t.v_ref).enumerate().skip(4000) {
        prop_assert!(mpp.power - pw <= tolerance, "G={} step {}: {} W vs {} W", g, k, pw, mpp.power);
        prop_assert!((v - mpp.voltage).abs() <= 2.0 * step, "G={} step {}: v_ref {}", g, k, v);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn incond_tracks_any_irradiance(g in 100.0..1100.0f64) {
        assert_tracks(g)?;
    }

    #[test]
    fn curtailment_accuracy(fraction in 0.05..0.95f64, g in 300.0..1000.0f64) {
        let p = calibrated();
        let e = env(g);
        let available = pv::true_mpp(&p, &e).unwrap().power;
        let p_ref = fraction * available;
        let mut c = started_at(&p, &e, 0.5);
        c.mode = PvControlMode::PowerReference(p_ref * 1e-3);
        let t = simulate(&mut c, &p, &e, 5000, 1e-3);
        let tail = &t.power[4000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        prop_assert!((mean - p_ref).abs() <= 0.01 * p_ref, "{} W vs {} W", mean, p_ref);
    }
}
