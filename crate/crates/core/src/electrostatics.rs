//! Electrostatic torque on a tilted rigid plate over a partial electrode.
//!
//! Each strip of the plate at distance `r` from the torsion axis is treated as
//! a parallel-plate capacitor with local gap `d0 - r*theta`, where
//! `d0 = gap_h + t_ox/eps_r` carries the oxide as a series dielectric.
//! Fringing fields are ignored. Integrating the strip moments over the
//! electrode `[r1, r2]` gives
//!
//! ```text
//! T = eps0 w V^2 / (2 theta^2) * [G(r2 theta/d0) - G(r1 theta/d0)]
//! G(u) = ln(1 - u) + u / (1 - u)
//! ```
//!
//! which has a removable singularity at `theta = 0`; below
//! [`SERIES_THRESHOLD`]` * theta_max` a power series is used instead.

use crate::charging::voltage_shift;
use crate::error::{Error, Result};
use crate::model::{DeviceConfig, MirrorGeometry, OxideParams};
use crate::quadrature;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Fraction of `theta_max` below which the series form is used.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Number of series terms (powers `u^2 .. u^SERIES_TERMS+1`).
const SERIES_TERMS: i32 = 10;

/// Below this `|u|` the derivative kernel switches to its series.
const KERNEL_SERIES_U: f64 = 1e-2;

/// Electrode geometry reduced to what the torque needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueContext {
    /// Effective electrostatic gap, m.
    pub d0: f64,
    pub r1: f64,
    pub r2: f64,
    pub width: f64,
    pub theta_max: f64,
}

impl TorqueContext {
    pub fn new(device: &DeviceConfig) -> TorqueContext {
        TorqueContext::from_parts(&device.geometry, &device.oxide)
    }

    pub fn from_parts(geometry: &MirrorGeometry, oxide: &OxideParams) -> TorqueContext {
        TorqueContext {
            d0: geometry.gap_h + oxide.thickness / oxide.relative_permittivity,
            r1: geometry.electrode_inner_r1,
            r2: geometry.electrode_outer_r2,
            width: geometry.width_w,
            theta_max: geometry.theta_max,
        }
    }

    /// Largest angle at which the torque is defined: the stop angle, or the
    /// angle where the outer electrode edge would close the gap if that comes
    /// first.
    pub fn theta_reach(&self) -> f64 {
        self.theta_max.min(self.d0 / self.r2)
    }

    fn check(&self, theta: f64) -> Result<()> {
        if theta.is_finite() && theta.abs() <= self.theta_max && self.d0 - self.r2 * theta > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain {
                theta,
                theta_max: self.theta_max,
            })
        }
    }

    fn prefactor(&self, voltage: f64) -> f64 {
        0.5 * VACUUM_PERMITTIVITY * self.width * voltage * voltage
    }

    fn in_series_band(&self, theta: f64) -> bool {
        theta.abs() < SERIES_THRESHOLD * self.theta_max
    }

    /// `sum_n c_n (r2^n - r1^n) theta^(n - offset) / d0^n` for `n = start..`.
    fn moment_series(&self, theta: f64, start: i32, coeff: impl Fn(f64) -> f64, offset: i32) -> f64 {
        let mut sum = 0.0;
        for n in start..start + SERIES_TERMS {
            let nf = f64::from(n);
            let span = (self.r2 / self.d0).powi(n) - (self.r1 / self.d0).powi(n);
            sum += coeff(nf) * span * theta.powi(n - offset);
        }
        sum
    }
}

/// `ln(1 - u) + u/(1 - u)`, i.e. `sum_{n>=2} (n-1)/n u^n`.
fn g_kernel(u: f64) -> f64 {
    (-u).ln_1p() + u / (1.0 - u)
}

/// `u^2/(1-u)^2 - 2 G(u)` = `sum_{n>=3} (n-1)(n-2)/n u^n`.
fn k_kernel(u: f64) -> f64 {
    if u.abs() < KERNEL_SERIES_U {
        let mut sum = 0.0;
        let mut power = u * u * u;
        for n in 3..20 {
            let nf = f64::from(n);
            sum += (nf - 1.0) * (nf - 2.0) / nf * power;
            power *= u;
        }
        sum
    } else {
        let q = u / (1.0 - u);
        q * q - 2.0 * g_kernel(u)
    }
}

/// Torque pulling the plate toward an electrode at voltage `voltage`, N·m.
///
/// `theta` is the tilt toward that electrode and may be negative (tilted
/// away). Depends on `voltage` only through `voltage^2`.
pub fn torque_closed_form(theta: f64, voltage: f64, ctx: &TorqueContext) -> Result<f64> {
    ctx.check(theta)?;
    if voltage == 0.0 {
        return Ok(0.0);
    }
    let c = ctx.prefactor(voltage);
    if ctx.in_series_band(theta) {
        return Ok(c * ctx.moment_series(theta, 2, |n| (n - 1.0) / n, 2));
    }
    let u1 = ctx.r1 * theta / ctx.d0;
    let u2 = ctx.r2 * theta / ctx.d0;
    Ok(c * (g_kernel(u2) - g_kernel(u1)) / (theta * theta))
}

/// The same torque by adaptive quadrature of the strip moment
/// `eps0 w V^2 r / (2 (d0 - r theta)^2)` over the electrode.
pub fn torque_quadrature(theta: f64, voltage: f64, ctx: &TorqueContext) -> Result<f64> {
    ctx.check(theta)?;
    if voltage == 0.0 {
        return Ok(0.0);
    }
    let c = ctx.prefactor(voltage);
    let integrand = |r: f64| {
        let gap = ctx.d0 - r * theta;
        r / (gap * gap)
    };
    let q = quadrature::integrate(integrand, ctx.r1, ctx.r2, 1e-12, 60)?;
    Ok(c * q.value)
}

/// Angle derivative of [`torque_closed_form`], N·m/rad.
pub fn dtorque_dtheta(theta: f64, voltage: f64, ctx: &TorqueContext) -> Result<f64> {
    ctx.check(theta)?;
    if voltage == 0.0 {
        return Ok(0.0);
    }
    let c = ctx.prefactor(voltage);
    if ctx.in_series_band(theta) {
        return Ok(c * ctx.moment_series(theta, 3, |n| (n - 1.0) * (n - 2.0) / n, 3));
    }
    let u1 = ctx.r1 * theta / ctx.d0;
    let u2 = ctx.r2 * theta / ctx.d0;
    Ok(c * (k_kernel(u2) - k_kernel(u1)) / (theta * theta * theta))
}

/// Net torque on the plate from both electrodes, positive toward the right.
///
/// Each electrode acts with its applied voltage minus the shift from the
/// charge trapped on that side.
pub fn net_torque(
    theta: f64,
    v_left: f64,
    v_right: f64,
    sigma_left: f64,
    sigma_right: f64,
    device: &DeviceConfig,
) -> Result<f64> {
    let ctx = TorqueContext::new(device);
    net_torque_with(&ctx, &device.oxide, theta, v_left, v_right, sigma_left, sigma_right)
}

/// [`net_torque`] with a precomputed context, for inner loops.
pub fn net_torque_with(
    ctx: &TorqueContext,
    oxide: &OxideParams,
    theta: f64,
    v_left: f64,
    v_right: f64,
    sigma_left: f64,
    sigma_right: f64,
) -> Result<f64> {
    let right = torque_closed_form(theta, v_right - voltage_shift(sigma_right, oxide), ctx)?;
    let left = torque_closed_form(-theta, v_left - voltage_shift(sigma_left, oxide), ctx)?;
    Ok(right - left)
}

/// Field across the oxide in the landed contact region, V/m.
pub fn contact_field(v_effective: f64, oxide: &OxideParams) -> f64 {
    v_effective.abs() / oxide.thickness
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> TorqueContext {
        TorqueContext::new(&DeviceConfig::paper_mirror())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_voltage_gives_zero_torque() {
        let c = ctx();
        for th in [0.0, 0.3 * c.theta_max, -c.theta_max, c.theta_max] {
            assert_eq!(torque_closed_form(th, 0.0, &c).unwrap(), 0.0);
            assert_eq!(torque_quadrature(th, 0.0, &c).unwrap(), 0.0);
            assert_eq!(dtorque_dtheta(th, 0.0, &c).unwrap(), 0.0);
        }
    }

    #[test]
    fn flat_plate_limit_at_ten_volts() {
        // eps0 * w * V^2 * (r2^2 - r1^2) / (4 d0^2) by hand with d0 = 8.50796e-6 m.
        let c = ctx();
        let t = torque_closed_form(0.0, 10.0, &c).unwrap();
        assert!(rel(t, 1.5266e-10) < 1e-3, "T = {t}");
        let by_hand = VACUUM_PERMITTIVITY * c.width * 100.0 * (c.r2 * c.r2 - c.r1 * c.r1) / (4.0 * c.d0 * c.d0);
        assert!(rel(t, by_hand) < 1e-14);
        let q = torque_quadrature(0.0, 10.0, &c).unwrap();
        assert!(rel(q, by_hand) < 1e-9);
    }

    #[test]
    fn continuous_across_series_switch() {
        let c = ctx();
        let edge = SERIES_THRESHOLD * c.theta_max;
        let below = torque_closed_form(edge * (1.0 - 1e-12), 50.0, &c).unwrap();
        let above = torque_closed_form(edge, 50.0, &c).unwrap();
        assert!(rel(below, above) < 1e-9, "jump {}", rel(below, above));
        let d_below = dtorque_dtheta(edge * (1.0 - 1e-12), 50.0, &c).unwrap();
        let d_above = dtorque_dtheta(edge, 50.0, &c).unwrap();
        assert!(rel(d_below, d_above) < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_difference_mid_range() {
        let c = ctx();
        let th = 0.5 * c.theta_max;
        let h = 1e-6 * c.theta_max;
        let fd = (torque_closed_form(th + h, 10.0, &c).unwrap() - torque_closed_form(th - h, 10.0, &c).unwrap())
            / (2.0 * h);
        let an = dtorque_dtheta(th, 10.0, &c).unwrap();
        assert!(rel(an, fd) < 1e-6, "{an} vs {fd}");
    }

    #[test]
    fn derivative_positive_on_open_range() {
        let c = ctx();
        for i in 1..200 {
            let th = c.theta_max * f64::from(i) / 200.0;
            assert!(dtorque_dtheta(th, 10.0, &c).unwrap() > 0.0);
        }
    }

    #[test]
    fn out_of_range_angle_is_a_domain_error() {
        let c = ctx();
        assert!(matches!(
            torque_closed_form(1.01 * c.theta_max, 10.0, &c),
            Err(Error::Domain { .. })
        ));
        assert!(torque_quadrature(f64::NAN, 10.0, &c).is_err());
    }

    #[test]
    fn net_torque_reductions() {
        let d = DeviceConfig::paper_mirror();
        let tm = d.theta_max();
        assert_eq!(net_torque(0.4 * tm, 0.0, 0.0, 0.0, 0.0, &d).unwrap(), 0.0);
        assert_eq!(net_torque(0.0, 30.0, 30.0, 0.0, 0.0, &d).unwrap(), 0.0);
        let single = net_torque(0.4 * tm, 0.0, 30.0, 0.0, 0.0, &d).unwrap();
        assert_eq!(single, torque_closed_form(0.4 * tm, 30.0, &TorqueContext::new(&d)).unwrap());
    }

    #[test]
    fn contact_field_examples() {
        let ox = OxideParams {
            thickness: 0.5e-6,
            relative_permittivity: 3.9,
        };
        assert!((contact_field(50.0, &ox) - 1.0e8).abs() < 1e-6);
        assert_eq!(contact_field(0.0, &ox), 0.0);
        let thick = OxideParams {
            thickness: 1e-6,
            relative_permittivity: 3.9,
        };
        assert!((contact_field(-100.0, &thick) - 1.0e8).abs() < 1e-6);
    }
}
