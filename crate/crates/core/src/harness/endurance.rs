//! Side-to-side toggling at a fixed period, checking that every commutation
//! takes the same time.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::drive::build_toggle;
use crate::dynamics::{SimState, Simulation, Trace};
use crate::error::{Error, Result};
use crate::harness::report::{ExperimentReport, Table};
use crate::harness::sweep::COMMUTATION_FRACTION;
use crate::model::{DeviceConfig, Side};
use crate::quasistatics::find_pull_in;

/// Switching operations in the full-scale reliability test this run stands in
/// for. Not simulated.
pub const FULL_SCALE_OPERATIONS: f64 = 3.97e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnduranceSettings {
    pub period_s: f64,
    /// Drive level, V. `None` picks 1.1 x V_pi.
    pub v_on: Option<f64>,
    pub cycles: usize,
    pub sample_dt_s: f64,
    /// Cycles kept in the trace file.
    pub trace_cycles: usize,
}

impl Default for EnduranceSettings {
    fn default() -> Self {
        EnduranceSettings {
            period_s: 2e-3,
            v_on: None,
            cycles: 10_000,
            sample_dt_s: 2e-6,
            trace_cycles: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnduranceRow {
    pub cycle: usize,
    /// Left-to-right commutation time, s.
    pub switching_time: f64,
    /// Right-to-left commutation time, s.
    pub return_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnduranceOutcome {
    pub rows: Vec<EnduranceRow>,
    pub v_on: f64,
    /// Largest minus smallest commutation time over both directions.
    pub spread: f64,
    pub sample_dt: f64,
    pub report: ExperimentReport,
}

/// Toggle the mirror `cycles` times and time every commutation. Charging is
/// switched off so only the mechanics are exercised.
pub fn exp_endurance(device: &DeviceConfig, settings: &EnduranceSettings) -> Result<EnduranceOutcome> {
    let s = settings;
    if s.cycles == 0 {
        return Err(Error::config("experiment.endurance.cycles", "must be >= 1"));
    }
    if !(s.period_s > 0.0 && s.sample_dt_s > 0.0) {
        return Err(Error::config("experiment.endurance.period_s", "period and sample_dt_s must be > 0"));
    }
    let half = 0.5 * s.period_s;
    let per_half = (half / s.sample_dt_s).round();
    if per_half < 2.0 || (half / s.sample_dt_s - per_half).abs() > 1e-6 {
        return Err(Error::config(
            "experiment.endurance.sample_dt_s",
            "half the period must be a whole number (>= 2) of samples",
        ));
    }
    let per_half = per_half as usize;
    let device = device.without_charging();
    let v_pi = find_pull_in(&device, 0.0)?.v_pi;
    let v_on = s.v_on.unwrap_or(1.1 * v_pi);
    let total = s.cycles as f64 * s.period_s;
    let schedule = build_toggle(s.period_s, v_on, total)?;
    let threshold = COMMUTATION_FRACTION * device.theta_max();

    let halves = 2 * s.cycles;
    let mut times: Vec<Option<usize>> = vec![None; halves];
    let mut head = Vec::new();
    let keep = s.trace_cycles.min(s.cycles) * 2 * per_half;
    let mut missed = None;
    let mut n = 0usize;
    Simulation::new(&device, &schedule, s.sample_dt_s)
        .initial(SimState::landed_on(Side::Left, &device))
        .run_observed(total, |r| {
            let (h, pos) = (n / per_half, n % per_half);
            n += 1;
            if n <= keep + 1 {
                head.push(*r);
            }
            if h >= halves {
                return ControlFlow::Continue(());
            }
            let side = if h % 2 == 0 { Side::Right } else { Side::Left };
            if times[h].is_none() && side.sign() * r.theta >= threshold {
                times[h] = Some(pos);
            }
            if pos == per_half - 1 && times[h].is_none() {
                missed = Some(h);
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })?;
    if let Some(h) = missed {
        let dir = if h % 2 == 0 { "left-to-right" } else { "right-to-left" };
        return Err(Error::Experiment(format!(
            "missed {dir} commutation at cycle {} (V_on = {v_on} V, V_pi = {v_pi} V)",
            h / 2
        )));
    }

    let dt = s.sample_dt_s;
    let rows: Vec<EnduranceRow> = times
        .chunks(2)
        .enumerate()
        .map(|(cycle, pair)| EnduranceRow {
            cycle,
            switching_time: pair[0].expect("checked above") as f64 * dt,
            return_time: pair[1].expect("checked above") as f64 * dt,
        })
        .collect();
    let all = || rows.iter().flat_map(|r| [r.switching_time, r.return_time]);
    let spread = all().fold(f64::NEG_INFINITY, f64::max) - all().fold(f64::INFINITY, f64::min);

    let mut summary = Table::new(&["cycle", "switching_time_s", "return_time_s"]);
    for r in &rows {
        summary.push(vec![r.cycle.into(), r.switching_time.into(), r.return_time.into()]);
    }
    let mut report = ExperimentReport::new(
        "endurance",
        json!({ "device": device, "settings": settings }),
        summary,
    );
    report.note("v_on_V", v_on);
    report.note("v_pi_V", v_pi);
    report.note("spread_s", spread);
    report.note("spread_within_one_sample", spread <= dt * (1.0 + 1e-9));
    report.note("charging", "disabled");
    report.note(
        "scale",
        format!(
            "desk-scale run of {} cycles; the full-scale {FULL_SCALE_OPERATIONS:e} switching operations are not simulated",
            s.cycles
        ),
    );
    if v_on < 1.05 * v_pi {
        report.note("warning", format!("V_on = {v_on} V is below 1.05 x V_pi = {} V", 1.05 * v_pi));
    }
    report.traces.push((
        "trace".into(),
        Trace {
            rows: head,
            sample_dt: dt,
            theta_max: device.theta_max(),
            events: Vec::new(),
        },
    ));
    Ok(EnduranceOutcome {
        rows,
        v_on,
        spread,
        sample_dt: dt,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_run_is_uniform() {
        let s = EnduranceSettings {
            cycles: 5,
            ..EnduranceSettings::default()
        };
        let out = exp_endurance(&DeviceConfig::paper_mirror(), &s).unwrap();
        assert_eq!(out.rows.len(), 5);
        assert!(out.spread <= out.sample_dt);
        assert_eq!(out.report.trace("trace").unwrap().rows.len(), 2 * 2 * 500 + 1);
    }

    #[test]
    fn under_driven_fails_at_cycle_zero() {
        let d = DeviceConfig::paper_mirror();
        let v_pi = find_pull_in(&d, 0.0).unwrap().v_pi;
        let s = EnduranceSettings {
            cycles: 3,
            v_on: Some(0.9 * v_pi),
            ..EnduranceSettings::default()
        };
        match exp_endurance(&d, &s) {
            Err(Error::Experiment(msg)) => assert!(msg.contains("cycle 0"), "{msg}"),
            other => panic!("expected experiment failure, got {other:?}"),
        }
    }
}
