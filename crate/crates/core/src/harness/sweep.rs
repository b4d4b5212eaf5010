//! Slow triangular sweep with dynamic extraction of the pull-in and release
//! voltages.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::drive::{Schedule, Waveform};
use crate::dynamics::{Simulation, Trace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::report::{ExperimentReport, Table};
use crate::model::{DeviceConfig, Side};
use crate::quasistatics::{find_pull_in, find_release, hysteresis_sweep_with};

/// Commutation is declared at this fraction of the stop angle.
pub const COMMUTATION_FRACTION: f64 = 0.9;
/// Release is declared once the angle falls back to this fraction.
pub const RELEASE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub frequency_hz: f64,
    pub v_max: f64,
    pub periods: usize,
    pub sample_dt_s: f64,
    /// Let trapped charge build up during the sweep. Off by default: the
    /// injection coefficient is time-compressed for the drift run and would
    /// bias a measurement sweep.
    pub charging: bool,
    /// Voltage steps of the static reference loop.
    pub static_steps: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            frequency_hz: 4.0,
            v_max: 100.0,
            periods: 3,
            sample_dt_s: 2e-5,
            charging: false,
            static_steps: 2000,
        }
    }
}

impl SweepSettings {
    fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::config("experiment.sweep.frequency_hz", "must be > 0"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::config("experiment.sweep.v_max", "must be > 0"));
        }
        if self.periods == 0 {
            return Err(Error::config("experiment.sweep.periods", "must be >= 1"));
        }
        if !(self.sample_dt_s > 0.0 && self.sample_dt_s * self.frequency_hz <= 1e-2) {
            return Err(Error::config(
                "experiment.sweep.sample_dt_s",
                "must be > 0 and at most 1% of the sweep period",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub period_index: usize,
    pub v_pi: Option<f64>,
    pub v_m: Option<f64>,
    /// Commutation or release was not seen in this period.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub static_v_pi: f64,
    pub static_v_m: f64,
    pub report: ExperimentReport,
}

/// Pull-in and release voltages seen in each period of a sampled sweep.
pub fn detect_transitions(trace: &Trace, frequency: f64, periods: usize) -> Vec<SweepRow> {
    let up = COMMUTATION_FRACTION * trace.theta_max;
    let down = RELEASE_FRACTION * trace.theta_max;
    let mut rows: Vec<SweepRow> = (0..periods)
        .map(|p| SweepRow {
            period_index: p,
            v_pi: None,
            v_m: None,
            flagged: true,
        })
        .collect();
    for r in &trace.rows {
        let p = (r.t * frequency * (1.0 + 1e-12)).floor() as usize;
        let Some(row) = rows.get_mut(p) else { break };
        match (row.v_pi, row.v_m) {
            (None, _) if r.theta >= up => row.v_pi = Some(r.v_right),
            (Some(_), None) if r.theta <= down => row.v_m = Some(r.v_right),
            _ => {}
        }
    }
    for row in &mut rows {
        row.flagged = row.v_pi.is_none() || row.v_m.is_none();
    }
    rows
}

/// Drive the right electrode with `periods` triangles `0 -> v_max -> 0` and
/// read off pull-in and release voltages in every period.
pub fn exp_triangular_sweep(device: &DeviceConfig, settings: &SweepSettings, exec: Execution) -> Result<SweepOutcome> {
    settings.validate()?;
    let device = if settings.charging { *device } else { device.without_charging() };
    let f = settings.frequency_hz;
    let duration = settings.periods as f64 / f;
    let schedule = Schedule::single(
        Side::Right,
        Waveform::Triangle {
            frequency_hz: f,
            v_min: 0.0,
            v_max: settings.v_max,
        },
        duration,
    )?;
    let trace = Simulation::new(&device, &schedule, settings.sample_dt_s).run(duration)?;
    let rows = detect_transitions(&trace, f, settings.periods);

    let static_v_pi = find_pull_in(&device, 0.0)?.v_pi;
    let static_v_m = find_release(&device, 0.0).voltage();
    let loop_ = hysteresis_sweep_with(&device, settings.v_max, settings.static_steps.max(100), 0.0, exec);

    let mut summary = Table::new(&[
        "period_index",
        "v_pi_detected_V",
        "v_m_detected_V",
        "v_pi_rel_error",
        "v_m_rel_error",
        "flagged",
    ]);
    for r in &rows {
        summary.push(vec![
            r.period_index.into(),
            r.v_pi.into(),
            r.v_m.into(),
            r.v_pi.map(|v| v / static_v_pi - 1.0).into(),
            r.v_m.map(|v| v / static_v_m - 1.0).into(),
            r.flagged.into(),
        ]);
    }
    let mut statics = Table::new(&["voltage_V", "theta_up_rad", "theta_down_rad"]);
    for (&(v, up), &(_, down)) in loop_.up_branch.iter().zip(loop_.down_branch.iter().rev()) {
        statics.push(vec![v.into(), up.into(), down.into()]);
    }

    let mut report = ExperimentReport::new(
        "sweep",
        json!({ "device": device, "settings": settings }),
        summary,
    );
    report.note("static_v_pi_V", static_v_pi);
    report.note("static_v_m_V", static_v_m);
    report.note("static_loop_v_pi_V", loop_.v_pi);
    report.note("static_loop_v_m_V", loop_.v_m);
    report.note("commutation_threshold_fraction", COMMUTATION_FRACTION);
    report.note("release_threshold_fraction", RELEASE_FRACTION);
    report.note("integration_step_s", Simulation::new(&device, &schedule, settings.sample_dt_s).step_size());
    if f > device.mechanics.resonance_f0 / 100.0 {
        report.note(
            "warning",
            format!(
                "sweep frequency {f} Hz exceeds f0/100 = {} Hz; dynamic lag will bias the extracted voltages",
                device.mechanics.resonance_f0 / 100.0
            ),
        );
    }
    report.tables.push(("static".into(), statics));
    report.traces.push(("trace".into(), trace));
    Ok(SweepOutcome {
        rows,
        static_v_pi,
        static_v_m,
        report,
    })
}
