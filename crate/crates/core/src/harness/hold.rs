//! Long hold with periodic grounding windows, comparing the return
//! trajectories recorded in each window.
//!
//! Two arms run with identical timing: the bipolar high-frequency hold and a
//! DC hold at the same amplitude. Each window's trajectory is compared with
//! the first one by RMS angle difference, normalised by the stop angle.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::charging::{sigma_for_shift, ChargeModelParams};
use crate::drive::{build_hold_schedule, Schedule, Waveform};
use crate::dynamics::{ContactKind, Simulation, Trace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::report::{ExperimentReport, Table};
use crate::model::{DeviceConfig, Side};
use crate::quasistatics::{find_pull_in, find_release};

/// Default hold amplitude as a multiple of the uncharged pull-in voltage.
pub const DEFAULT_AMPLITUDE_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldSettings {
    pub frequency_hz: f64,
    /// Hold amplitude, V. `None` picks 1.2 x V_pi of the uncharged device.
    pub amplitude_v: Option<f64>,
    pub interrupts: usize,
    pub interrupt_every_s: f64,
    pub interrupt_len_s: f64,
    pub sample_dt_s: f64,
    pub control_arm: bool,
}

impl Default for HoldSettings {
    fn default() -> Self {
        HoldSettings {
            frequency_hz: 70e3,
            amplitude_v: None,
            interrupts: 10,
            interrupt_every_s: 10e-3,
            interrupt_len_s: 2e-3,
            sample_dt_s: 1e-6,
            control_arm: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Bipolar,
    Dc,
}

impl Arm {
    fn code(self) -> usize {
        match self {
            Arm::Bipolar => 0,
            Arm::Dc => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoldRow {
    pub arm: Arm,
    pub snapshot_index: usize,
    /// RMS angle difference to snapshot 0, as a fraction of the stop angle.
    pub rms_deviation: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldOutcome {
    pub rows: Vec<HoldRow>,
    pub amplitude: f64,
    /// Smallest trapped charge that sticks the mirror at zero volts.
    pub stuck_sigma: f64,
    pub report: ExperimentReport,
}

impl HoldOutcome {
    pub fn arm(&self, arm: Arm) -> impl Iterator<Item = &HoldRow> {
        self.rows.iter().filter(move |r| r.arm == arm)
    }
}

struct ArmRun {
    snapshots: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
    head: Trace,
}

fn whole_samples(span: f64, sample_dt: f64, field: &str) -> Result<usize> {
    let n = (span / sample_dt).round();
    if n < 1.0 || ((span / sample_dt) - n).abs() > 1e-6 {
        return Err(Error::config(
            format!("experiment.hold.{field}"),
            format!("{span} s is not a whole number of {sample_dt} s samples"),
        ));
    }
    Ok(n as usize)
}

/// RMS difference over the common support, normalised by `scale`.
pub fn rms_deviation(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ss: f64 = a.iter().zip(b).take(n).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / n as f64).sqrt() / scale
}

fn run_arm(device: &DeviceConfig, waveform: Waveform, s: &HoldSettings, arm: Arm) -> Result<ArmRun> {
    let per_window = whole_samples(s.interrupt_every_s, s.sample_dt_s, "interrupt_every_s")?;
    let per_gap = whole_samples(s.interrupt_len_s, s.sample_dt_s, "interrupt_len_s")?;
    let windows = s.interrupts.max(1);
    let total = windows as f64 * s.interrupt_every_s;
    let schedule = if s.interrupts == 0 {
        Schedule::single(Side::Right, waveform, total)?
    } else {
        build_hold_schedule(waveform, s.interrupt_every_s, s.interrupt_len_s, total)?
    };
    let gap_start = per_window - per_gap;
    let mut snapshots: Vec<Vec<f64>> = Vec::with_capacity(s.interrupts);
    let mut sigmas = Vec::with_capacity(s.interrupts);
    let mut head = Vec::with_capacity(per_window + 1);
    let mut not_landed = None;
    let mut n = 0usize;
    let summary = Simulation::new(device, &schedule, s.sample_dt_s).run_observed(total, |r| {
        let (w, pos) = (n / per_window, n % per_window);
        n += 1;
        if w == 0 {
            head.push(*r);
        }
        if s.interrupts > 0 && w < s.interrupts && pos >= gap_start {
            if pos == gap_start {
                if r.landed != 1 {
                    not_landed = Some(w);
                    return ControlFlow::Break(());
                }
                snapshots.push(Vec::with_capacity(per_gap));
                sigmas.push(r.sigma_right);
            }
            if let Some(snap) = snapshots.last_mut() {
                snap.push(r.theta);
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(w) = not_landed {
        return Err(Error::Experiment(format!(
            "{arm:?} hold: mirror not landed when interruption {w} began (amplitude too low)"
        )));
    }
    let window = s.interrupt_every_s;
    for e in summary.events.iter().filter(|e| e.kind == ContactKind::Release) {
        let pos = e.t - (e.t / window).floor() * window;
        if pos < window - s.interrupt_len_s - 1e-9 * window {
            return Err(Error::Experiment(format!(
                "{arm:?} hold: mirror released during the hold at t = {} s (amplitude too low)",
                e.t
            )));
        }
    }
    if s.interrupts == 0 && summary.final_state.landed != Some(Side::Right) {
        return Err(Error::Experiment(format!("{arm:?} hold: mirror never landed (amplitude too low)")));
    }
    Ok(ArmRun {
        snapshots,
        sigmas,
        head: Trace {
            rows: head,
            sample_dt: s.sample_dt_s,
            theta_max: device.theta_max(),
            events: summary.events.into_iter().filter(|e| e.t <= window).collect(),
        },
    })
}

/// Bipolar hold with grounding snapshots, plus an optional DC control arm.
pub fn exp_bipolar_hold(device: &DeviceConfig, settings: &HoldSettings, exec: Execution) -> Result<HoldOutcome> {
    let s = settings;
    let f0 = device.mechanics.resonance_f0;
    if !(s.frequency_hz > 0.0 && s.frequency_hz.is_finite()) {
        return Err(Error::config("experiment.hold.frequency_hz", "must be > 0"));
    }
    if !(s.interrupt_len_s > 0.0 && s.interrupt_len_s < s.interrupt_every_s) {
        return Err(Error::config(
            "experiment.hold.interrupt_len_s",
            "must be > 0 and shorter than interrupt_every_s",
        ));
    }
    if !(s.sample_dt_s > 0.0) {
        return Err(Error::config("experiment.hold.sample_dt_s", "must be > 0"));
    }
    let v_pi = find_pull_in(device, 0.0)?.v_pi;
    let release = find_release(device, 0.0);
    let amplitude = s.amplitude_v.unwrap_or(DEFAULT_AMPLITUDE_FACTOR * v_pi);
    if !(amplitude >= release.voltage() / 0.9) {
        return Err(Error::config(
            "experiment.hold.amplitude_v",
            format!("{amplitude} V is below V_m/0.9 = {} V", release.voltage() / 0.9),
        ));
    }

    let bipolar = Waveform::BipolarSquare {
        frequency_hz: s.frequency_hz,
        amplitude_v: amplitude,
    };
    let dc = Waveform::DcLevel { level_v: amplitude };
    let (bi_run, dc_run) = exec.join(
        || run_arm(device, bipolar, s, Arm::Bipolar),
        || s.control_arm.then(|| run_arm(device, dc, s, Arm::Dc)),
    );
    let bi_run = bi_run?;
    let dc_run = dc_run.transpose()?;

    let theta_max = device.theta_max();
    let mut rows = Vec::new();
    for (arm, run) in [(Arm::Bipolar, Some(&bi_run)), (Arm::Dc, dc_run.as_ref())] {
        let Some(run) = run else { continue };
        for (i, snap) in run.snapshots.iter().enumerate() {
            rows.push(HoldRow {
                arm,
                snapshot_index: i,
                rms_deviation: rms_deviation(snap, &run.snapshots[0], theta_max),
                sigma: run.sigmas[i],
            });
        }
    }

    let stuck_sigma = sigma_for_shift(release.voltage(), &device.oxide);
    let mut summary = Table::new(&["arm", "snapshot_index", "rms_deviation_frac", "sigma_C_m2"]);
    for r in &rows {
        summary.push(vec![r.arm.code().into(), r.snapshot_index.into(), r.rms_deviation.into(), r.sigma.into()]);
    }
    let mut snaps = Table::new(&["arm", "snapshot_index", "t_rel_s", "theta_rad"]);
    for (arm, run) in [(Arm::Bipolar, Some(&bi_run)), (Arm::Dc, dc_run.as_ref())] {
        let Some(run) = run else { continue };
        for (i, snap) in run.snapshots.iter().enumerate() {
            for (j, &theta) in snap.iter().enumerate() {
                snaps.push(vec![
                    arm.code().into(),
                    i.into(),
                    (j as f64 * s.sample_dt_s).into(),
                    theta.into(),
                ]);
            }
        }
    }

    let charge: ChargeModelParams = device.charge_model;
    let mut report = ExperimentReport::new("hold", json!({ "device": device, "settings": settings }), summary);
    report.note("amplitude_V", amplitude);
    report.note(
        "amplitude_choice",
        if s.amplitude_v.is_some() { "configured" } else { "1.2 x V_pi(sigma = 0)" },
    );
    report.note("arm_codes", json!({ "bipolar": 0, "dc": 1 }));
    report.note("stuck_sigma_C_m2", stuck_sigma);
    report.note("k_inj", charge.k_inj);
    if s.interrupts == 0 {
        report.note("hold_only", "no interruptions requested; the hold ran for one interrupt_every_s");
    }
    if s.frequency_hz < 10.0 * f0 {
        report.note(
            "warning",
            format!("hold frequency {} Hz is below 10 x f0 = {} Hz", s.frequency_hz, 10.0 * f0),
        );
    }
    report.tables.push(("snapshots".into(), snaps));
    report.traces.push(("trace".into(), bi_run.head));
    Ok(HoldOutcome {
        rows,
        amplitude,
        stuck_sigma,
        report,
    })
}
