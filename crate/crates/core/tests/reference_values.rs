//! Hand-evaluated reference values, each checked against a formula written
//! out here rather than the library's own.

use mirrorsim::charging::{stuck_check, sigma_for_shift, voltage_shift};
use mirrorsim::drive::{build_hold_with_interruptions, build_toggle, Waveform};
use mirrorsim::electrostatics::{contact_field, dtorque_dtheta, torque_closed_form, TorqueContext};
use mirrorsim::model::{derive_gap, derive_inertia, derive_stiffness, DeviceConfig, Side};
use mirrorsim::quasistatics::{analytic_small_signal_slope, find_release, small_signal_fit_range, VOLTAGE_TOL};

const EPS0: f64 = 8.854_187_812_8e-12;

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * b.abs()
}

#[test]
fn reference_plate_inertia() {
    let d = DeviceConfig::paper_mirror();
    let expected = 2329.0 * 600e-6 * 10e-6 * (600e-6f64).powi(3) / 12.0;
    assert!(close(expected, 2.515e-16, 1e-3));
    assert!(close(derive_inertia(&d.geometry, d.density).unwrap(), expected, 1e-12));
    assert!(derive_inertia(&d.geometry, 0.0).is_err());
}

#[test]
fn gap_from_stop_angle() {
    let h = derive_gap(300e-6, 1.6f64.to_radians()).unwrap();
    assert!(close(h, 8.380e-6, 1e-3), "{h}");
    assert!(close(derive_gap(1.0, std::f64::consts::FRAC_PI_4).unwrap(), 1.0, 1e-15));
}

#[test]
fn stiffness_for_three_kilohertz() {
    let k = derive_stiffness(2.515e-16, 3000.0).unwrap();
    let omega = 2.0 * std::f64::consts::PI * 3000.0;
    assert!(close(k, 2.515e-16 * omega * omega, 1e-14));
    assert!(close(k, 8.94e-8, 1e-3), "{k}");
    assert!(close(derive_stiffness(2.515e-16, 12000.0).unwrap(), 16.0 * k, 1e-14));
    assert!(derive_stiffness(2.515e-16, 0.0).is_err());
}

#[test]
fn flat_plate_torque_at_ten_volts() {
    let d = DeviceConfig::paper_mirror();
    let g = d.geometry;
    let d0 = g.gap_h + d.oxide.thickness / d.oxide.relative_permittivity;
    assert!(close(d0, 8.508e-6, 1e-3), "{d0}");
    // Uniform pressure eps0 V^2 / (2 d0^2) over the strip, moment arm x.
    let pressure = EPS0 * 100.0 / (2.0 * d0 * d0);
    let expected = pressure * g.width_w * (g.electrode_outer_r2.powi(2) - g.electrode_inner_r1.powi(2)) / 2.0;
    assert!(close(expected, 1.53e-10, 4e-3), "{expected}");
    let ctx = TorqueContext::new(&d);
    assert!(close(torque_closed_form(0.0, 10.0, &ctx).unwrap(), expected, 1e-12));
}

#[test]
fn torque_slope_matches_central_difference() {
    let d = DeviceConfig::paper_mirror();
    let ctx = TorqueContext::new(&d);
    let theta = 0.5 * d.theta_max();
    let h = 1e-5 * theta;
    let fd = (torque_closed_form(theta + h, 10.0, &ctx).unwrap() - torque_closed_form(theta - h, 10.0, &ctx).unwrap())
        / (2.0 * h);
    assert!(close(dtorque_dtheta(theta, 10.0, &ctx).unwrap(), fd, 1e-6));
}

#[test]
fn small_signal_slope_from_linearisation() {
    let d = DeviceConfig::paper_mirror();
    let g = d.geometry;
    let d0 = g.gap_h + d.oxide.thickness / d.oxide.relative_permittivity;
    let hand = EPS0 * g.width_w * (g.electrode_outer_r2.powi(2) - g.electrode_inner_r1.powi(2))
        / (4.0 * d0 * d0 * d.stiffness());
    assert!(close(analytic_small_signal_slope(&d), hand, 1e-12));
    let fit = small_signal_fit_range(&d, 0.05, 40).unwrap();
    assert!(close(fit.slope, hand, 5e-3), "{} vs {hand}", fit.slope);
    let wide = small_signal_fit_range(&d, 0.3, 40).unwrap();
    let narrow = small_signal_fit_range(&d, 0.1, 40).unwrap();
    assert!(wide.r_squared >= 0.999);
    assert!(narrow.r_squared >= wide.r_squared);
}

#[test]
fn drift_charge_gives_twenty_six_volts() {
    let oxide = DeviceConfig::paper_mirror().oxide;
    let hand = 1.796e-3 * 0.5e-6 / (3.9 * EPS0);
    assert!(close(hand, 26.0, 1e-3), "{hand}");
    assert!(close(voltage_shift(1.796e-3, &oxide), hand, 1e-12));
    assert!(close(voltage_shift(2.0 * 1.796e-3, &oxide), 2.0 * hand, 1e-14));
    assert!(close(sigma_for_shift(hand, &oxide), 1.796e-3, 1e-12));
}

#[test]
fn oxide_field_at_contact() {
    let d = DeviceConfig::paper_mirror();
    assert!(close(contact_field(50.0, &d.oxide), 1.0e8, 1e-12));
    assert_eq!(contact_field(0.0, &d.oxide), 0.0);
    let thick = mirrorsim::model::OxideParams {
        thickness: 1e-6,
        relative_permittivity: 3.9,
    };
    assert!(close(contact_field(100.0, &thick), 1.0e8, 1e-12));
}

#[test]
fn stuck_boundary_sits_at_release_voltage() {
    let d = DeviceConfig::paper_mirror();
    let vm = find_release(&d, 0.0).voltage();
    assert!(!stuck_check(0.0, &d));
    assert!(!stuck_check(sigma_for_shift(0.5 * vm, &d.oxide), &d));
    // Either side of the balance, outside the release-search tolerance.
    assert!(stuck_check(sigma_for_shift(vm + 2.0 * VOLTAGE_TOL, &d.oxide), &d));
    assert!(!stuck_check(sigma_for_shift(vm - 2.0 * VOLTAGE_TOL, &d.oxide), &d));
    assert!(find_release(&d, sigma_for_shift(vm + 1.0, &d.oxide)).is_stuck());
}

#[test]
fn waveform_samples() {
    let tri = Waveform::Triangle {
        frequency_hz: 4.0,
        v_min: 0.0,
        v_max: 100.0,
    };
    assert!(close(tri.sample(0.125), 100.0, 1e-12));
    let bip = Waveform::BipolarSquare {
        frequency_hz: 70e3,
        amplitude_v: 40.0,
    };
    assert_eq!(bip.sample(0.0), 40.0);
    assert_eq!(bip.sample(1.0 / 140e3), -40.0);
    assert_eq!(Waveform::Ground.sample(3.7), 0.0);
}

#[test]
fn triangle_rms_from_midpoint_average() {
    let tri = Waveform::Triangle {
        frequency_hz: 4.0,
        v_min: 0.0,
        v_max: 100.0,
    };
    let n = 100_000;
    let mean_sq: f64 = (0..n)
        .map(|i| tri.sample((i as f64 + 0.5) / n as f64 * 0.25).powi(2))
        .sum::<f64>()
        / n as f64;
    assert!(close(mean_sq.sqrt(), 100.0 / 3f64.sqrt(), 1e-6));
    assert!(close(tri.rms(), 57.735, 1e-5));
    assert_eq!(Waveform::DcLevel { level_v: -12.0 }.rms(), 12.0);
    assert_eq!(bip_rms(33.0), 33.0);
}

fn bip_rms(a: f64) -> f64 {
    Waveform::BipolarSquare {
        frequency_hz: 1e3,
        amplitude_v: a,
    }
    .rms()
}

#[test]
fn three_hourly_interruptions() {
    let s = build_hold_with_interruptions(60.0, 70e3, 3600.0, 2e-3, 3.0 * 3600.0).unwrap();
    let grounds = s
        .right
        .segments()
        .iter()
        .filter(|seg| seg.waveform == Waveform::Ground)
        .count();
    assert_eq!(grounds, 3);
    assert!(build_hold_with_interruptions(60.0, 70e3, 3600.0, 0.0, 3600.0).is_err());
}

#[test]
fn toggle_covers_ten_periods() {
    let s = build_toggle(2e-3, 80.0, 20e-3).unwrap();
    assert_eq!(s.right.segments().len(), 20);
    for i in 0..20 {
        let t = (i as f64 + 0.5) * 1e-3;
        let (l, r) = s.sample(t);
        let driven = if i % 2 == 0 { Side::Right } else { Side::Left };
        assert_eq!(if driven == Side::Right { (l, r) } else { (r, l) }, (0.0, 80.0), "half {i}");
    }
    assert!(build_toggle(2e-3, 80.0, 0.0).is_err());
}
