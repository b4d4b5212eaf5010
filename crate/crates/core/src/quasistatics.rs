//! Static equilibria of a single-electrode actuation.
//!
//! The opposite electrode is grounded. An equilibrium is a root of
//! `g(theta) = k theta - T(theta, V - Vsh(sigma))` on `[0, theta_max)`,
//! stable when `k - dT/dtheta > 0`. Pull-in is the voltage where the stable
//! branch disappears; release is the voltage where the landed torque at the
//! stop drops below the spring torque.
//!
//! All voltage searches run on the effective voltage `V - Vsh(sigma)` and add
//! the shift back at the end, so charge moves both thresholds by exactly the
//! same amount.

use serde::Serialize;

use crate::charging::voltage_shift;
use crate::electrostatics::{dtorque_dtheta, torque_closed_form, TorqueContext};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::DeviceConfig;

/// Points in the sign-change scan over `[0, theta_max)`.
pub const SCAN_POINTS: usize = 2048;
/// Angle bisection tolerance as a fraction of `theta_max`.
pub const ANGLE_TOL: f64 = 1e-9;
/// Voltage bisection tolerance, V.
pub const VOLTAGE_TOL: f64 = 1e-4;
/// Upper limit for the pull-in bracket search, V.
pub const VOLTAGE_CAP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub theta: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullIn {
    pub v_pi: f64,
    pub theta_pin: f64,
}

/// Outcome of the release search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Release {
    /// The mirror leaves the stop once the voltage falls below `V_m`.
    At(f64),
    /// Trapped charge alone holds the mirror at zero volts. `hold_threshold`
    /// is still the upper holding voltage.
    Stuck { hold_threshold: f64 },
}

impl Release {
    /// Upper holding threshold, defined in both cases.
    pub fn voltage(&self) -> f64 {
        match *self {
            Release::At(v) => v,
            Release::Stuck { hold_threshold } => hold_threshold,
        }
    }

    pub fn is_stuck(&self) -> bool {
        matches!(self, Release::Stuck { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HysteresisResult {
    /// `(V, theta)` on the rising sweep.
    pub up_branch: Vec<(f64, f64)>,
    /// `(V, theta)` on the falling sweep, in falling order.
    pub down_branch: Vec<(f64, f64)>,
    /// First swept voltage that lands the mirror; `None` if it never does.
    pub v_pi: Option<f64>,
    /// Last stable angle before the jump.
    pub theta_pin: Option<f64>,
    /// First voltage on the way down at which the mirror has left the stop.
    pub v_m: Option<f64>,
    /// True when `V_max` stayed below pull-in.
    pub no_commutation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallSignalFit {
    /// Least-squares slope of theta against V², rad/V².
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Precomputed single-electrode statics for one device.
struct Statics {
    ctx: TorqueContext,
    k: f64,
    theta_max: f64,
}

impl Statics {
    fn new(device: &DeviceConfig) -> Statics {
        Statics {
            ctx: TorqueContext::new(device),
            k: device.stiffness(),
            theta_max: device.theta_max(),
        }
    }

    fn residual(&self, theta: f64, v_eff: f64) -> f64 {
        self.k * theta - torque_closed_form(theta, v_eff, &self.ctx).expect("scan stays in range")
    }

    fn is_stable(&self, theta: f64, v_eff: f64) -> bool {
        self.k - dtorque_dtheta(theta, v_eff, &self.ctx).expect("scan stays in range") > 0.0
    }

    fn grid(&self, i: usize) -> f64 {
        self.theta_max * i as f64 / SCAN_POINTS as f64
    }

    /// Bisect a bracketed root of the residual.
    fn refine(&self, mut lo: f64, mut hi: f64, v_eff: f64) -> f64 {
        let mut g_lo = self.residual(lo, v_eff);
        let tol = ANGLE_TOL * self.theta_max;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let g_mid = self.residual(mid, v_eff);
            if g_mid == 0.0 {
                return mid;
            }
            if (g_mid > 0.0) == (g_lo > 0.0) {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn equilibria(&self, v_eff: f64) -> Vec<EquilibriumPoint> {
        let mut out = Vec::new();
        let mut prev_theta = 0.0;
        let mut prev_g = self.residual(0.0, v_eff);
        if prev_g == 0.0 {
            out.push(EquilibriumPoint {
                theta: 0.0,
                stable: self.is_stable(0.0, v_eff),
            });
        }
        for i in 1..SCAN_POINTS {
            let theta = self.grid(i);
            let g = self.residual(theta, v_eff);
            let root = if g == 0.0 {
                Some(theta)
            } else if prev_g != 0.0 && (g > 0.0) != (prev_g > 0.0) {
                Some(self.refine(prev_theta, theta, v_eff))
            } else {
                None
            };
            if let Some(theta) = root {
                out.push(EquilibriumPoint {
                    theta,
                    stable: self.is_stable(theta, v_eff),
                });
            }
            prev_theta = theta;
            prev_g = g;
        }
        out
    }

    fn lowest_stable(&self, v_eff: f64) -> Option<f64> {
        self.equilibria(v_eff).into_iter().find(|p| p.stable).map(|p| p.theta)
    }

    fn held_at_stop(&self, v_eff: f64) -> bool {
        torque_closed_form(self.theta_max, v_eff, &self.ctx).expect("stop angle in range") >= self.k * self.theta_max
    }

    /// Effective pull-in voltage (no charge), by bisection on the existence
    /// of a stable interior equilibrium.
    fn pull_in_effective(&self) -> Result<f64> {
        let mut hi = 1.0;
        while self.lowest_stable(hi).is_some() {
            hi *= 2.0;
            if hi > VOLTAGE_CAP {
                return Err(Error::NoPullIn { cap: VOLTAGE_CAP });
            }
        }
        let mut lo = 0.0;
        while hi - lo > VOLTAGE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.lowest_stable(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Fold angle: where `T(theta, 1) = theta * T'(theta, 1)`, i.e. where the
    /// voltage along the equilibrium curve peaks. Independent of stiffness.
    fn fold_angle(&self, v_below: f64) -> f64 {
        let eq = self.equilibria(v_below);
        let stable = eq.iter().find(|p| p.stable).map_or(0.0, |p| p.theta);
        let unstable = eq
            .iter()
            .find(|p| !p.stable && p.theta > stable)
            .map_or(self.theta_max, |p| p.theta);
        let h = |theta: f64| {
            torque_closed_form(theta, 1.0, &self.ctx).expect("in range")
                - theta * dtorque_dtheta(theta, 1.0, &self.ctx).expect("in range")
        };
        let (mut lo, mut hi) = (stable, unstable);
        if h(hi) > 0.0 {
            // No sign change before the stop: the branch ends at the stop.
            return hi;
        }
        let tol = 1e-13 * self.theta_max;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn release_effective(&self) -> f64 {
        let mut hi = 1.0;
        while !self.held_at_stop(hi) {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > VOLTAGE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.held_at_stop(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// All equilibria at applied voltage `voltage` with trapped charge `sigma`.
pub fn equilibria(voltage: f64, device: &DeviceConfig, sigma: f64) -> Vec<EquilibriumPoint> {
    let v_eff = voltage - voltage_shift(sigma, &device.oxide);
    Statics::new(device).equilibria(v_eff)
}

/// Pull-in voltage and the last stable angle before it.
pub fn find_pull_in(device: &DeviceConfig, sigma: f64) -> Result<PullIn> {
    let s = Statics::new(device);
    let v_eff = s.pull_in_effective()?;
    let theta_pin = s.fold_angle(v_eff - VOLTAGE_TOL);
    Ok(PullIn {
        v_pi: voltage_shift(sigma, &device.oxide) + v_eff,
        theta_pin,
    })
}

/// Release (maintaining) voltage of a mirror landed on the charged side.
pub fn find_release(device: &DeviceConfig, sigma: f64) -> Release {
    let s = Statics::new(device);
    let shift = voltage_shift(sigma, &device.oxide);
    let v_m = shift + s.release_effective();
    if s.held_at_stop(-shift) {
        Release::Stuck { hold_threshold: v_m }
    } else {
        Release::At(v_m)
    }
}

/// Static response to a 0 → `v_max` → 0 sweep in `steps` voltage steps.
pub fn hysteresis_sweep(device: &DeviceConfig, v_max: f64, steps: usize, sigma: f64) -> HysteresisResult {
    hysteresis_sweep_with(device, v_max, steps, sigma, Execution::default())
}

/// [`hysteresis_sweep`] with an explicit execution strategy. The per-voltage
/// equilibrium solves are independent and run data-parallel.
pub fn hysteresis_sweep_with(
    device: &DeviceConfig,
    v_max: f64,
    steps: usize,
    sigma: f64,
    exec: Execution,
) -> HysteresisResult {
    let s = Statics::new(device);
    let shift = voltage_shift(sigma, &device.oxide);
    let steps = steps.max(1);
    let volts: Vec<f64> = (0..=steps).map(|i| v_max * i as f64 / steps as f64).collect();
    let solved: Vec<(Option<f64>, bool)> = exec.map(&volts, |&v| {
        let v_eff = v - shift;
        (s.lowest_stable(v_eff), s.held_at_stop(v_eff))
    });

    let theta_max = s.theta_max;
    let mut up_branch = Vec::with_capacity(volts.len());
    let mut v_pi = None;
    let mut theta_pin = None;
    let mut last_stable = None;
    for (&v, &(stable, _)) in volts.iter().zip(&solved) {
        match (v_pi, stable) {
            (None, Some(theta)) => {
                last_stable = Some(theta);
                up_branch.push((v, theta));
            }
            (None, None) => {
                v_pi = Some(v);
                theta_pin = last_stable;
                up_branch.push((v, theta_max));
            }
            (Some(_), _) => up_branch.push((v, theta_max)),
        }
    }

    let mut down_branch = Vec::with_capacity(volts.len());
    let mut v_m = None;
    let mut landed = v_pi.is_some();
    for (&v, &(stable, held)) in volts.iter().zip(&solved).rev() {
        if landed && !held {
            landed = false;
            v_m = Some(v);
        }
        if landed {
            down_branch.push((v, theta_max));
        } else {
            // Without a stable root the mirror snaps back onto the stop.
            match stable {
                Some(theta) => down_branch.push((v, theta)),
                None => {
                    landed = true;
                    down_branch.push((v, theta_max));
                }
            }
        }
    }

    HysteresisResult {
        up_branch,
        down_branch,
        v_pi,
        theta_pin,
        v_m,
        no_commutation: v_pi.is_none(),
    }
}

/// Least-squares fit of the stable angle against V² over `[0, 0.3 V_pi]`.
pub fn small_signal_fit(device: &DeviceConfig) -> Result<SmallSignalFit> {
    small_signal_fit_range(device, 0.3, 40)
}

/// [`small_signal_fit`] over `[0, fraction * V_pi]` with `samples` points.
pub fn small_signal_fit_range(device: &DeviceConfig, fraction: f64, samples: usize) -> Result<SmallSignalFit> {
    let v_pi = find_pull_in(device, 0.0)?.v_pi;
    let s = Statics::new(device);
    let samples = samples.max(20);
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for i in 0..samples {
        let v = fraction * v_pi * i as f64 / (samples - 1) as f64;
        let theta = s
            .lowest_stable(v)
            .ok_or_else(|| Error::Integration(format!("no stable equilibrium at {v} V inside the fit range")))?;
        xs.push(v * v);
        ys.push(theta);
    }
    Ok(least_squares(&xs, &ys))
}

fn least_squares(xs: &[f64], ys: &[f64]) -> SmallSignalFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    SmallSignalFit {
        slope,
        intercept,
        r_squared: 1.0 - ss_res / ss_tot,
    }
}

/// Small-angle slope `dtheta/d(V^2)` at `V -> 0`.
pub fn analytic_small_signal_slope(device: &DeviceConfig) -> f64 {
    let ctx = TorqueContext::new(device);
    torque_closed_form(0.0, 1.0, &ctx).expect("zero angle") / device.stiffness()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charging::sigma_for_shift;

    fn device() -> DeviceConfig {
        DeviceConfig::paper_mirror()
    }

    #[test]
    fn zero_volts_single_rest_point() {
        let eq = equilibria(0.0, &device(), 0.0);
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].theta, 0.0);
        assert!(eq[0].stable);
    }

    #[test]
    fn roots_satisfy_residual_bound() {
        let d = device();
        let k = d.stiffness();
        let ctx = TorqueContext::new(&d);
        for v in [5.0, 20.0, 40.0, 60.0] {
            for p in equilibria(v, &d, 0.0) {
                let g = k * p.theta - torque_closed_form(p.theta, v, &ctx).unwrap();
                assert!(g.abs() <= k * d.theta_max() * 1e-8, "g = {g} at {v} V");
            }
        }
    }

    #[test]
    fn fold_neighbourhood_root_counts() {
        let d = device();
        let pi = find_pull_in(&d, 0.0).unwrap();
        let below = equilibria(0.99 * pi.v_pi, &d, 0.0);
        let interior: Vec<_> = below.iter().filter(|p| p.theta > 0.0).collect();
        assert_eq!(interior.len(), 2, "{below:?}");
        assert!(interior[0].stable && !interior[1].stable);
        assert!(equilibria(1.01 * pi.v_pi, &d, 0.0).iter().all(|p| !p.stable));
    }

    #[test]
    fn pull_in_brackets() {
        let d = device();
        let pi = find_pull_in(&d, 0.0).unwrap();
        assert!(!equilibria(pi.v_pi - VOLTAGE_TOL, &d, 0.0).iter().all(|p| !p.stable));
        assert!(equilibria(pi.v_pi + VOLTAGE_TOL, &d, 0.0).iter().all(|p| !p.stable));
        assert!(pi.theta_pin < d.theta_max());
    }

    #[test]
    fn stiffness_scaling_doubles_pull_in() {
        let d = device();
        let d4 = d.with_stiffness(4.0 * d.stiffness()).unwrap();
        let a = find_pull_in(&d, 0.0).unwrap();
        let b = find_pull_in(&d4, 0.0).unwrap();
        assert!((b.v_pi / a.v_pi - 2.0).abs() < 1e-5);
        assert!(((b.theta_pin - a.theta_pin) / a.theta_pin).abs() < 1e-9);
        let ma = find_release(&d, 0.0).voltage();
        let mb = find_release(&d4, 0.0).voltage();
        assert!((mb / ma - 2.0).abs() < 1e-5);
    }

    #[test]
    fn charge_shifts_pull_in_by_exactly_the_shift() {
        let d = device();
        let sigma = sigma_for_shift(26.0, &d.oxide);
        let a = find_pull_in(&d, 0.0).unwrap().v_pi;
        let b = find_pull_in(&d, sigma).unwrap().v_pi;
        assert!((b - a - 26.0).abs() < 1e-9, "{}", b - a);
    }

    #[test]
    fn release_below_pull_in() {
        let d = device();
        let vm = find_release(&d, 0.0);
        assert!(matches!(vm, Release::At(_)));
        assert!(vm.voltage() < find_pull_in(&d, 0.0).unwrap().v_pi);
    }

    #[test]
    fn charge_beyond_release_voltage_sticks() {
        let d = device();
        let vm0 = find_release(&d, 0.0).voltage();
        let sigma = sigma_for_shift(vm0 + 1.0, &d.oxide);
        assert!(find_release(&d, sigma).is_stuck());
        assert!(crate::charging::stuck_check(sigma, &d));
    }

    #[test]
    fn sweep_jumps_to_stop_and_releases() {
        let d = device();
        let r = hysteresis_sweep(&d, 100.0, 1000, 0.0);
        let pi = find_pull_in(&d, 0.0).unwrap();
        let vm = find_release(&d, 0.0).voltage();
        let step = 0.1;
        let v_pi = r.v_pi.unwrap();
        let v_m = r.v_m.unwrap();
        assert!((v_pi - pi.v_pi).abs() <= step + VOLTAGE_TOL, "{v_pi} vs {}", pi.v_pi);
        assert!((v_m - vm).abs() <= step + VOLTAGE_TOL, "{v_m} vs {vm}");
        assert!(r.up_branch.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(r.up_branch.last().unwrap().1, d.theta_max());
        assert!(r.theta_pin.unwrap() < d.theta_max());
        assert!(!r.no_commutation);
    }

    #[test]
    fn sweep_below_pull_in_is_flagged() {
        let r = hysteresis_sweep(&device(), 10.0, 200, 0.0);
        assert!(r.no_commutation);
        assert!(r.v_pi.is_none() && r.v_m.is_none());
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let d = device();
        let a = hysteresis_sweep_with(&d, 100.0, 300, 0.0, Execution::Parallel);
        let b = hysteresis_sweep_with(&d, 100.0, 300, 0.0, Execution::Sequential);
        assert_eq!(a, b);
    }

    #[test]
    fn small_signal_fit_is_linear() {
        let d = device();
        let fit = small_signal_fit(&d).unwrap();
        assert!(fit.r_squared >= 0.999, "{fit:?}");
        let tight = small_signal_fit_range(&d, 0.1, 40).unwrap();
        assert!(tight.r_squared >= fit.r_squared);
        let analytic = analytic_small_signal_slope(&d);
        assert!(((tight.slope - analytic) / analytic).abs() < 0.02);
    }
}
