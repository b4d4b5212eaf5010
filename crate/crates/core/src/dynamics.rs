//! Transient motion with contact at the stops.
//!
//! Free flight integrates `J theta'' + b theta' + k theta = T_net(theta, t)`
//! with a fixed-step classical RK4. When a step carries the plate past
//! `±theta_max` the crossing is bracketed by bisection on the step fraction,
//! and the plate is stopped dead there (perfectly inelastic contact). A
//! landed plate stays down while the net torque pushes into the stop at least
//! as hard as the spring pulls back (`|T_net| >= k theta_max`), which is the
//! same balance that defines the static release voltage.
//!
//! Trapped charge advances alongside each mechanical step.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::charging::{step_charge, stuck_check, voltage_shift, ChargeState, SideFields};
use crate::drive::Schedule;
use crate::electrostatics::{net_torque_with, TorqueContext};
use crate::error::{Error, Result};
use crate::model::{DeviceConfig, Side};

/// Steps per mechanical resonance period, at least.
pub const STEPS_PER_RESONANCE: f64 = 50.0;
/// Steps per period of the fastest drive waveform, at least.
pub const STEPS_PER_DRIVE_PERIOD: f64 = 20.0;
/// Landing-time localisation, as a fraction of the step.
const EVENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimState {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub landed: Option<Side>,
    pub charge: ChargeState,
}

impl SimState {
    pub fn at_rest() -> SimState {
        SimState {
            t: 0.0,
            theta: 0.0,
            omega: 0.0,
            landed: None,
            charge: ChargeState::default(),
        }
    }

    pub fn landed_on(side: Side, device: &DeviceConfig) -> SimState {
        SimState {
            theta: side.sign() * device.theta_max(),
            landed: Some(side),
            ..SimState::at_rest()
        }
    }

    pub fn with_charge(mut self, charge: ChargeState) -> SimState {
        self.charge = charge;
        self
    }

    /// -1 landed left, +1 landed right, 0 in flight.
    pub fn landed_flag(&self) -> i8 {
        match self.landed {
            None => 0,
            Some(Side::Left) => -1,
            Some(Side::Right) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub theta: f64,
    pub omega: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub landed: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContactKind {
    Landing,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactEvent {
    pub t: f64,
    pub side: Side,
    pub kind: ContactKind,
}

/// Uniformly sampled record of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub sample_dt: f64,
    /// Stop angle of the simulated device, rad.
    pub theta_max: f64,
    pub events: Vec<ContactEvent>,
}

pub const TRACE_CSV_HEADER: &str =
    "t_s,theta_rad,omega_rad_s,v_left_V,v_right_V,sigma_left_C_m2,sigma_right_C_m2,landed";

impl Trace {
    /// CSV with the fixed column set, LF line endings, header first.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            use std::fmt::Write;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.t, r.theta, r.omega, r.v_left, r.v_right, r.sigma_left, r.sigma_right, r.landed
            );
        }
        out
    }
}

/// Final state and contact events of an observed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_state: SimState,
    pub events: Vec<ContactEvent>,
    pub dt: f64,
}

/// Largest admissible step for a device and schedule.
pub fn max_step(device: &DeviceConfig, schedule: &Schedule) -> f64 {
    let mech = 1.0 / (STEPS_PER_RESONANCE * device.mechanics.resonance_f0);
    match schedule.max_frequency() {
        Some(f) => mech.min(1.0 / (STEPS_PER_DRIVE_PERIOD * f)),
        None => mech,
    }
}

struct Integrator<'a> {
    device: &'a DeviceConfig,
    schedule: &'a Schedule,
    ctx: TorqueContext,
    freeze_charge: bool,
}

impl<'a> Integrator<'a> {
    fn new(device: &'a DeviceConfig, schedule: &'a Schedule, freeze_charge: bool) -> Self {
        Integrator {
            device,
            schedule,
            ctx: TorqueContext::new(device),
            freeze_charge,
        }
    }

    fn torque(&self, theta: f64, t: f64, charge: &ChargeState) -> f64 {
        let tm = self.ctx.theta_max;
        let (vl, vr) = self.schedule.sample(t);
        net_torque_with(
            &self.ctx,
            &self.device.oxide,
            theta.clamp(-tm, tm),
            vl,
            vr,
            charge.sigma_left,
            charge.sigma_right,
        )
        .unwrap_or(f64::NAN)
    }

    fn accel(&self, t: f64, theta: f64, omega: f64, charge: &ChargeState) -> f64 {
        let m = &self.device.mechanics;
        (self.torque(theta, t, charge) - m.damping_b * omega - m.stiffness_k * theta) / m.inertia_j
    }

    /// One RK4 step of length `h` from `(theta, omega)` at `t`.
    fn rk4(&self, t: f64, theta: f64, omega: f64, h: f64, charge: &ChargeState) -> (f64, f64) {
        let a1 = self.accel(t, theta, omega, charge);
        let (th2, om2) = (theta + 0.5 * h * omega, omega + 0.5 * h * a1);
        let a2 = self.accel(t + 0.5 * h, th2, om2, charge);
        let (th3, om3) = (theta + 0.5 * h * om2, omega + 0.5 * h * a2);
        let a3 = self.accel(t + 0.5 * h, th3, om3, charge);
        let (th4, om4) = (theta + h * om3, omega + h * a3);
        let a4 = self.accel(t + h, th4, om4, charge);
        (
            theta + h / 6.0 * (omega + 2.0 * om2 + 2.0 * om3 + om4),
            omega + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        )
    }

    /// Advance from `state` (at `state.t`) to `t_next`.
    fn advance(&self, state: &SimState, t_next: f64) -> Result<(SimState, Option<ContactEvent>)> {
        let t0 = state.t;
        let dt = t_next - t0;
        let theta_max = self.ctx.theta_max;
        let k = self.device.mechanics.stiffness_k;
        let mut next = *state;
        next.t = t_next;
        let mut event = None;
        let mut contact = state.landed;

        if let Some(side) = state.landed {
            let into_stop = side.sign() * self.torque(side.sign() * theta_max, t0, &state.charge);
            if into_stop >= k * theta_max {
                next.theta = side.sign() * theta_max;
                next.omega = 0.0;
            } else {
                next.landed = None;
                next.omega = 0.0;
                contact = None;
                event = Some(ContactEvent {
                    t: t0,
                    side,
                    kind: ContactKind::Release,
                });
            }
        }

        if next.landed.is_none() {
            // A plate released this step starts from rest at the stop.
            let theta0 = state.theta;
            let omega0 = if state.landed.is_some() { 0.0 } else { state.omega };
            let (theta1, omega1) = self.rk4(t0, theta0, omega0, dt, &state.charge);
            if theta1.abs() >= theta_max && theta1.is_finite() {
                let side = if theta1 > 0.0 { Side::Right } else { Side::Left };
                let (mut lo, mut hi) = (0.0, 1.0);
                while hi - lo > EVENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    let (th, _) = self.rk4(t0, theta0, omega0, mid * dt, &state.charge);
                    if th.abs() >= theta_max {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                next.theta = side.sign() * theta_max;
                next.omega = 0.0;
                next.landed = Some(side);
                event = Some(ContactEvent {
                    t: t0 + hi * dt,
                    side,
                    kind: ContactKind::Landing,
                });
            } else {
                next.theta = theta1;
                next.omega = omega1;
            }
            if !(next.theta.is_finite() && next.omega.is_finite()) {
                return Err(Error::Numerical {
                    t: t0,
                    theta: state.theta,
                    omega: state.omega,
                    reason: "non-finite state after free-flight step".into(),
                });
            }
        }

        if !self.freeze_charge {
            let (vl, vr) = self.schedule.sample(t0);
            let ox = &self.device.oxide;
            let fields = SideFields {
                left: (vl - voltage_shift(state.charge.sigma_left, ox)) / ox.thickness,
                right: (vr - voltage_shift(state.charge.sigma_right, ox)) / ox.thickness,
            };
            next.charge = step_charge(state.charge, fields, dt, contact, &self.device.charge_model)?;
        }
        Ok((next, event))
    }
}

fn check_step(device: &DeviceConfig, schedule: &Schedule, dt: f64) -> Result<()> {
    let limit = max_step(device, schedule);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-9) {
        return Err(Error::Integration(format!(
            "step {dt} s outside (0, {limit}] s required by the resonance and drive frequency"
        )));
    }
    Ok(())
}

/// Advance one fixed step of length `dt`.
pub fn step(state: &SimState, schedule: &Schedule, dt: f64, device: &DeviceConfig) -> Result<SimState> {
    check_step(device, schedule, dt)?;
    let integ = Integrator::new(device, schedule, false);
    integ.advance(state, state.t + dt).map(|(s, _)| s)
}

/// Run configuration: device, drive program, sampling and start state.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    device: &'a DeviceConfig,
    schedule: &'a Schedule,
    sample_dt: f64,
    initial: SimState,
    freeze_charge: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(device: &'a DeviceConfig, schedule: &'a Schedule, sample_dt: f64) -> Self {
        Simulation {
            device,
            schedule,
            sample_dt,
            initial: SimState::at_rest(),
            freeze_charge: false,
        }
    }

    pub fn initial(mut self, state: SimState) -> Self {
        self.initial = state;
        self
    }

    /// Hold trapped charge fixed for the whole run.
    pub fn freeze_charge(mut self, freeze: bool) -> Self {
        self.freeze_charge = freeze;
        self
    }

    /// Integration step actually used: the largest step that divides
    /// `sample_dt` evenly and respects [`max_step`].
    pub fn step_size(&self) -> f64 {
        let per_sample = (self.sample_dt / max_step(self.device, self.schedule) * (1.0 - 1e-12)).ceil().max(1.0);
        self.sample_dt / per_sample
    }

    fn row(&self, s: &SimState) -> TraceRow {
        let (v_left, v_right) = self.schedule.sample(s.t);
        TraceRow {
            t: s.t,
            theta: s.theta,
            omega: s.omega,
            v_left,
            v_right,
            sigma_left: s.charge.sigma_left,
            sigma_right: s.charge.sigma_right,
            landed: s.landed_flag(),
        }
    }

    /// Run for `duration`, handing every sample to `observe`. Returning
    /// `ControlFlow::Break` stops the run after that sample.
    pub fn run_observed<F>(&self, duration: f64, mut observe: F) -> Result<RunSummary>
    where
        F: FnMut(&TraceRow) -> ControlFlow<()>,
    {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Integration(format!("duration must be > 0, got {duration}")));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(Error::Integration(format!("sample_dt must be > 0, got {}", self.sample_dt)));
        }
        let per_sample = (self.sample_dt / max_step(self.device, self.schedule) * (1.0 - 1e-12))
            .ceil()
            .max(1.0) as u64;
        let dt = self.sample_dt / per_sample as f64;
        check_step(self.device, self.schedule, dt)?;
        let samples = (duration / self.sample_dt * (1.0 + 1e-12)).floor() as u64;
        let integ = Integrator::new(self.device, self.schedule, self.freeze_charge);
        let t0 = self.initial.t;
        let mut state = self.initial;
        let mut events = Vec::new();

        if observe(&self.row(&state)).is_break() {
            return Ok(RunSummary {
                final_state: state,
                events,
                dt,
            });
        }
        let mut n: u64 = 0;
        for _ in 0..samples {
            for _ in 0..per_sample {
                n += 1;
                let (next, event) = integ.advance(&state, t0 + n as f64 * dt)?;
                state = next;
                events.extend(event);
            }
            if observe(&self.row(&state)).is_break() {
                break;
            }
        }
        Ok(RunSummary {
            final_state: state,
            events,
            dt,
        })
    }

    /// Run for `duration` and keep every sample.
    pub fn run(&self, duration: f64) -> Result<Trace> {
        let mut rows = Vec::with_capacity((duration / self.sample_dt) as usize + 2);
        let summary = self.run_observed(duration, |r| {
            rows.push(*r);
            ControlFlow::Continue(())
        })?;
        Ok(Trace {
            rows,
            sample_dt: self.sample_dt,
            theta_max: self.device.theta_max(),
            events: summary.events,
        })
    }
}

/// Run from rest for `duration`, sampled every `sample_dt`.
pub fn simulate(device: &DeviceConfig, schedule: &Schedule, duration: f64, sample_dt: f64) -> Result<Trace> {
    Simulation::new(device, schedule, sample_dt).run(duration)
}

/// Delay from `edge_t` to the first sample at or beyond 90% of the stop on
/// `side`. `None` if the mirror never gets there.
pub fn switching_time(trace: &Trace, edge_t: f64, side: Side) -> Option<f64> {
    let threshold = 0.9 * trace.theta_max;
    let start = trace.rows.partition_point(|r| r.t < edge_t);
    trace.rows[start..]
        .iter()
        .find(|r| side.sign() * r.theta >= threshold)
        .map(|r| r.t - edge_t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseTrajectory {
    pub trace: Trace,
    pub stuck: bool,
    /// First sample below 99% of the stop angle.
    pub departure_time: Option<f64>,
}

/// Let a mirror landed on the right go with every electrode grounded and
/// `sigma` frozen on the landing side.
pub fn release_trajectory(device: &DeviceConfig, sigma: f64, sample_dt: f64) -> Result<ReleaseTrajectory> {
    let theta_max = device.theta_max();
    let horizon = 20.0 / device.mechanics.resonance_f0;
    let schedule = Schedule::grounded(horizon)?;
    let initial = SimState::landed_on(Side::Right, device).with_charge(ChargeState {
        sigma_left: 0.0,
        sigma_right: sigma,
    });
    let rest_omega = 0.01 * theta_max * device.mechanics.omega0();
    let mut rows = Vec::new();
    let summary = Simulation::new(device, &schedule, sample_dt)
        .initial(initial)
        .freeze_charge(true)
        .run_observed(horizon, |r| {
            rows.push(*r);
            if r.theta.abs() <= 0.01 * theta_max && r.omega.abs() <= rest_omega {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
    let departure_time = rows.iter().find(|r| r.theta.abs() < 0.99 * theta_max).map(|r| r.t);
    Ok(ReleaseTrajectory {
        trace: Trace {
            rows,
            sample_dt,
            theta_max,
            events: summary.events,
        },
        stuck: stuck_check(sigma, device),
        departure_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::Waveform;
    use crate::quasistatics::find_pull_in;

    #[test]
    fn zero_drive_from_rest_stays_at_rest() {
        let d = DeviceConfig::paper_mirror();
        let s = Schedule::grounded(1e-3).unwrap();
        let tr = simulate(&d, &s, 1e-3, 1e-5).unwrap();
        assert_eq!(tr.rows.len(), 101);
        assert!(tr.rows.iter().all(|r| r.theta == 0.0 && r.omega == 0.0 && r.landed == 0));
        assert!(tr.rows.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn step_rejects_oversized_dt() {
        let d = DeviceConfig::paper_mirror();
        let s = Schedule::grounded(1e-3).unwrap();
        let too_big = 2.0 * max_step(&d, &s);
        assert!(matches!(step(&SimState::at_rest(), &s, too_big, &d), Err(Error::Integration(_))));
    }

    #[test]
    fn pull_in_step_lands_and_stays() {
        let d = DeviceConfig::paper_mirror();
        let v_pi = find_pull_in(&d, 0.0).unwrap().v_pi;
        let s = Schedule::single(Side::Right, Waveform::DcLevel { level_v: 1.05 * v_pi }, 3e-3).unwrap();
        let tr = simulate(&d, &s, 3e-3, 1e-5).unwrap();
        let last = tr.rows.last().unwrap();
        assert_eq!(last.landed, 1);
        assert_eq!(last.theta, d.theta_max());
        assert_eq!(tr.events.iter().filter(|e| e.kind == ContactKind::Landing).count(), 1);
        assert!(tr.events.iter().all(|e| e.kind != ContactKind::Release));
    }

    #[test]
    fn grounded_release_settles_to_zero() {
        let d = DeviceConfig::paper_mirror();
        let r = release_trajectory(&d, 0.0, 1e-6).unwrap();
        assert!(!r.stuck);
        let last = r.trace.rows.last().unwrap();
        assert!(last.theta.abs() <= 0.01 * d.theta_max());
        assert_eq!(last.landed, 0);
    }
}
