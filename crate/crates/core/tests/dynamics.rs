//! Time-domain behaviour of the integrator against closed-form and
//! quasi-static references.

use mirrorsim::charging::ChargeModelParams;
use mirrorsim::drive::{build_toggle, Schedule, Waveform};
use mirrorsim::dynamics::{simulate, switching_time, ContactKind, SimState, Simulation};
use mirrorsim::model::{DeviceConfig, DeviceSpec, Side};
use mirrorsim::quasistatics::{find_pull_in, find_release};

fn lightly_damped(zeta: f64) -> DeviceConfig {
    let spec = DeviceSpec {
        damping_ratio: zeta,
        ..DeviceSpec::default()
    };
    DeviceConfig::from_spec(&spec, ChargeModelParams::default()).unwrap()
}

#[test]
fn free_ringing_matches_damped_oscillator() {
    let zeta = 0.05;
    let d = lightly_damped(zeta);
    let w0 = d.mechanics.omega0();
    let wd = w0 * (1.0 - zeta * zeta).sqrt();
    let theta0 = 1e-3 * d.theta_max();
    let periods = 10.0;
    let duration = periods * 2.0 * std::f64::consts::PI / wd;
    let schedule = Schedule::grounded(duration).unwrap();
    let initial = SimState {
        theta: theta0,
        ..SimState::at_rest()
    };
    let trace = Simulation::new(&d, &schedule, 1e-6).initial(initial).run(duration).unwrap();

    let exact = |t: f64| {
        theta0 * (-zeta * w0 * t).exp() * ((wd * t).cos() + zeta * w0 / wd * (wd * t).sin())
    };
    let worst = trace
        .rows
        .iter()
        .map(|r| (r.theta - exact(r.t)).abs())
        .fold(0.0, f64::max);
    // Accumulated over ten periods.
    assert!(worst <= 1e-5 * theta0, "largest deviation {worst:e} rad");

    // Frequency from interpolated downward zero crossings.
    let crossings: Vec<f64> = trace
        .rows
        .windows(2)
        .filter(|w| w[0].theta > 0.0 && w[1].theta <= 0.0)
        .map(|w| w[0].t + w[0].theta / (w[0].theta - w[1].theta) * (w[1].t - w[0].t))
        .collect();
    assert!(crossings.len() >= 8);
    let measured = (crossings.len() - 1) as f64 / (crossings[crossings.len() - 1] - crossings[0]);
    let expected = d.mechanics.resonance_f0 * (1.0 - zeta * zeta).sqrt();
    assert!((measured / expected - 1.0).abs() < 1e-3, "{measured} Hz vs {expected} Hz");
}

#[test]
fn identical_runs_give_identical_traces() {
    let d = DeviceConfig::paper_mirror();
    let v_pi = find_pull_in(&d, 0.0).unwrap().v_pi;
    let schedule = build_toggle(2e-3, 1.1 * v_pi, 20e-3).unwrap();
    let a = simulate(&d, &schedule, 20e-3, 2e-6).unwrap();
    let b = simulate(&d, &schedule, 20e-3, 2e-6).unwrap();
    assert_eq!(a, b);
    assert!(!a.events.is_empty());
}

fn step_response(fraction: f64) -> Option<f64> {
    let d = DeviceConfig::paper_mirror().without_charging();
    let v = fraction * find_pull_in(&d, 0.0).unwrap().v_pi;
    let schedule = Schedule::single(Side::Right, Waveform::DcLevel { level_v: v }, 5e-3).unwrap();
    let trace = simulate(&d, &schedule, 5e-3, 1e-6).unwrap();
    switching_time(&trace, 0.0, Side::Right)
}

#[test]
fn switching_time_above_pull_in_is_sub_millisecond_scale() {
    let t = step_response(1.2).expect("lands");
    assert!(t > 0.1e-3 && t < 3e-3, "{t} s");
    assert!(step_response(0.5).is_none());
}

#[test]
fn step_above_pull_in_lands_and_stays() {
    let d = DeviceConfig::paper_mirror().without_charging();
    let v = 1.05 * find_pull_in(&d, 0.0).unwrap().v_pi;
    let schedule = Schedule::single(Side::Right, Waveform::DcLevel { level_v: v }, 10e-3).unwrap();
    let trace = simulate(&d, &schedule, 10e-3, 1e-6).unwrap();
    let landing = trace.events.iter().position(|e| e.kind == ContactKind::Landing).expect("lands");
    assert_eq!(trace.events[landing].side, Side::Right);
    assert!(trace.events[landing..].iter().all(|e| e.kind == ContactKind::Landing));
    let last = trace.rows.last().unwrap();
    assert_eq!(last.landed, 1);
    assert_eq!(last.theta, d.theta_max());
}

#[test]
fn bipolar_hold_keeps_mirror_landed_for_a_thousand_periods() {
    let d = DeviceConfig::paper_mirror();
    let amplitude = find_release(&d, 0.0).voltage() / 0.9;
    let f = 70e3;
    let duration = 1000.0 / f;
    let schedule = Schedule::single(
        Side::Right,
        Waveform::BipolarSquare {
            frequency_hz: f,
            amplitude_v: amplitude,
        },
        duration,
    )
    .unwrap();
    let trace = Simulation::new(&d, &schedule, 1.0 / (4.0 * f))
        .initial(SimState::landed_on(Side::Right, &d))
        .run(duration)
        .unwrap();
    assert!(trace.events.is_empty(), "{:?}", trace.events);
    assert!(trace.rows.iter().all(|r| r.landed == 1));
}

#[test]
fn unheld_mirror_releases_when_drive_drops_below_release() {
    let d = DeviceConfig::paper_mirror().without_charging();
    let vm = find_release(&d, 0.0).voltage();
    let schedule = Schedule::single(Side::Right, Waveform::DcLevel { level_v: 0.95 * vm }, 5e-3).unwrap();
    let trace = Simulation::new(&d, &schedule, 1e-6)
        .initial(SimState::landed_on(Side::Right, &d))
        .run(5e-3)
        .unwrap();
    assert_eq!(trace.events.first().map(|e| e.kind), Some(ContactKind::Release));
    assert_eq!(trace.rows.last().unwrap().landed, 0);

    let held = Schedule::single(Side::Right, Waveform::DcLevel { level_v: 1.05 * vm }, 5e-3).unwrap();
    let trace = Simulation::new(&d, &held, 1e-6)
        .initial(SimState::landed_on(Side::Right, &d))
        .run(5e-3)
        .unwrap();
    assert!(trace.events.is_empty());
}
