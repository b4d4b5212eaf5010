//! Accelerated DC cycling and the resulting drift of the pull-in and release
//! voltages.
//!
//! Each cycle holds `v_on` on the right electrode for `hold_s`. When that is
//! enough to pull the mirror in (or the mirror is already stuck), the landed
//! contact sees `(v_on - Vsh) / t_ox` and charge is injected. The landing
//! transient and the grounded off phase are short against the hold and are
//! not integrated. Pull-in and release voltages at each probe come from the
//! static solvers with the current trapped charge.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::charging::{step_charge, stuck_check, voltage_shift, ChargeState, SideFields};
use crate::error::{Error, Result};
use crate::harness::report::{ExperimentReport, Table};
use crate::model::{DeviceConfig, Side};
use crate::quasistatics::{find_pull_in, find_release};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSettings {
    pub cycles: usize,
    pub hold_s: f64,
    pub probe_every: usize,
    pub v_on: f64,
    /// Charge sub-steps per hold.
    pub substeps: usize,
    /// Recalibrate `k_inj` so the run ends at `target_shift_v` before running.
    pub calibrate: bool,
    pub target_shift_v: f64,
    /// Wall-clock span the compressed run stands for; only used to report
    /// the compression factor.
    pub nominal_duration_s: f64,
}

impl Default for DriftSettings {
    fn default() -> Self {
        DriftSettings {
            cycles: 1000,
            hold_s: 10e-3,
            probe_every: 50,
            v_on: 100.0,
            substeps: 100,
            calibrate: false,
            target_shift_v: 26.0,
            nominal_duration_s: 30.0 * 86_400.0,
        }
    }
}

impl DriftSettings {
    fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("experiment.drift.{name}");
        if !(self.hold_s > 0.0 && self.hold_s.is_finite()) {
            return Err(Error::config(field("hold_s"), "must be > 0"));
        }
        if self.probe_every == 0 {
            return Err(Error::config(field("probe_every"), "must be >= 1"));
        }
        if self.substeps == 0 {
            return Err(Error::config(field("substeps"), "must be >= 1"));
        }
        if !self.v_on.is_finite() {
            return Err(Error::config(field("v_on"), "must be finite"));
        }
        if !(self.nominal_duration_s > 0.0) {
            return Err(Error::config(field("nominal_duration_s"), "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub cycle: usize,
    pub sigma: f64,
    pub v_pi: f64,
    pub v_m: f64,
    pub stuck: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftOutcome {
    pub rows: Vec<DriftRow>,
    /// Injection coefficient actually used.
    pub k_inj: f64,
    pub report: ExperimentReport,
}

impl DriftOutcome {
    pub fn delta_v_pi(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.v_pi) - self.rows.first().map_or(0.0, |r| r.v_pi)
    }

    pub fn delta_v_m(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.v_m) - self.rows.first().map_or(0.0, |r| r.v_m)
    }
}

/// Run the cycling, calling `probe(cycle, sigma)` at cycle 0, every
/// `probe_every` cycles and after the last one. Returns the final charge.
fn run_cycles(device: &DeviceConfig, settings: &DriftSettings, mut probe: impl FnMut(usize, f64)) -> Result<f64> {
    let v_pi0 = find_pull_in(device, 0.0)?.v_pi;
    let params = &device.charge_model;
    let dt = settings.hold_s / settings.substeps as f64;
    let mut state = ChargeState::default();
    probe(0, 0.0);
    for cycle in 1..=settings.cycles {
        let sigma = state.sigma_right;
        let shift = voltage_shift(sigma, &device.oxide);
        let landed = settings.v_on >= v_pi0 + shift || stuck_check(sigma, device);
        if landed {
            for _ in 0..settings.substeps {
                let field = (settings.v_on - voltage_shift(state.sigma_right, &device.oxide)) / device.oxide.thickness;
                let fields = SideFields { left: 0.0, right: field };
                state = step_charge(state, fields, dt, Some(Side::Right), params)?;
            }
        } else if params.tau_decay.is_finite() {
            state = step_charge(state, SideFields::default(), settings.hold_s.min(params.tau_decay / 10.0), None, params)?;
        }
        if cycle % settings.probe_every == 0 || cycle == settings.cycles {
            probe(cycle, state.sigma_right);
        }
    }
    Ok(state.sigma_right)
}

fn final_shift(device: &DeviceConfig, settings: &DriftSettings, k_inj: f64) -> Result<f64> {
    let mut d = *device;
    d.charge_model.k_inj = k_inj;
    let sigma = run_cycles(&d, settings, |_, _| {})?;
    Ok(voltage_shift(sigma, &d.oxide))
}

/// Injection coefficient that makes the compressed cycling end with a
/// pull-in shift of `target_shift` volts. Bisection in log space.
pub fn calibrate_injection(device: &DeviceConfig, settings: &DriftSettings, target_shift: f64) -> Result<f64> {
    settings.validate()?;
    if !(target_shift > 0.0 && target_shift.is_finite()) {
        return Err(Error::config("experiment.drift.target_shift_v", "must be > 0"));
    }
    if device.charge_model.landing_electrode_grounded {
        return Err(Error::Experiment(
            "cannot calibrate injection with a grounded landing electrode".into(),
        ));
    }
    let mut hi = 1e-12;
    while final_shift(device, settings, hi)? < target_shift {
        hi *= 10.0;
        if hi > 1.0 {
            return Err(Error::Experiment(format!(
                "no injection coefficient reaches a {target_shift} V shift in {} cycles",
                settings.cycles
            )));
        }
    }
    let mut lo = hi / 10.0;
    while final_shift(device, settings, lo)? >= target_shift {
        lo /= 10.0;
        if lo < 1e-40 {
            return Err(Error::Experiment("injection calibration failed to bracket the target".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi || hi / lo - 1.0 < 1e-14 {
            break;
        }
        if final_shift(device, settings, mid)? < target_shift {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Cycle a mirror with DC holds and follow pull-in and release voltages.
pub fn exp_dc_drift(device: &DeviceConfig, settings: &DriftSettings) -> Result<DriftOutcome> {
    settings.validate()?;
    let mut device = *device;
    if settings.calibrate {
        device.charge_model.k_inj = calibrate_injection(&device, settings, settings.target_shift_v)?;
    }
    let v_pi0 = find_pull_in(&device, 0.0)?.v_pi;
    let v_m0 = find_release(&device, 0.0).voltage();
    let mut rows = Vec::new();
    run_cycles(&device, settings, |cycle, sigma| {
        let shift = voltage_shift(sigma, &device.oxide);
        rows.push(DriftRow {
            cycle,
            sigma,
            v_pi: v_pi0 + shift,
            v_m: find_release(&device, sigma).voltage(),
            stuck: stuck_check(sigma, &device),
        });
    })?;

    let mut summary = Table::new(&["cycle", "sigma_C_m2", "v_pi_V", "v_m_V", "stuck"]);
    for r in &rows {
        summary.push(vec![r.cycle.into(), r.sigma.into(), r.v_pi.into(), r.v_m.into(), r.stuck.into()]);
    }
    let simulated = settings.cycles as f64 * settings.hold_s;
    let mut report = ExperimentReport::new("drift", json!({ "device": device, "settings": settings }), summary);
    report.note("k_inj", device.charge_model.k_inj);
    report.note("k_inj_calibrated", settings.calibrate);
    report.note("v_pi_initial_V", v_pi0);
    report.note("v_m_initial_V", v_m0);
    report.note("simulated_hold_time_s", simulated);
    report.note("nominal_duration_s", settings.nominal_duration_s);
    report.note("time_compression_factor", settings.nominal_duration_s / simulated);
    report.note(
        "model",
        "landed hold per cycle; landing transient and grounded off phase not integrated",
    );
    if device.charge_model.k_inj == 0.0 || device.charge_model.landing_electrode_grounded {
        report.note("warning", "charge injection is disabled; drift curves are flat");
    }
    let mut outcome = DriftOutcome {
        rows,
        k_inj: device.charge_model.k_inj,
        report,
    };
    let (dpi, dm) = (outcome.delta_v_pi(), outcome.delta_v_m());
    outcome.report.note("delta_v_pi_V", dpi);
    outcome.report.note("delta_v_m_V", dm);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charging::ChargeModelParams;

    fn short() -> DriftSettings {
        DriftSettings {
            cycles: 40,
            probe_every: 10,
            ..DriftSettings::default()
        }
    }

    #[test]
    fn probes_at_start_interval_and_end() {
        let s = DriftSettings {
            cycles: 25,
            ..short()
        };
        let out = exp_dc_drift(&DeviceConfig::paper_mirror(), &s).unwrap();
        let cycles: Vec<_> = out.rows.iter().map(|r| r.cycle).collect();
        assert_eq!(cycles, [0, 10, 20, 25]);
    }

    #[test]
    fn no_injection_means_flat_curves() {
        let d = DeviceConfig::paper_mirror().without_charging();
        let out = exp_dc_drift(&d, &short()).unwrap();
        assert!(out.rows.iter().all(|r| r.sigma == 0.0 && r.v_pi == out.rows[0].v_pi));
        assert_eq!(out.delta_v_m(), 0.0);
    }

    #[test]
    fn grounded_landing_electrode_blocks_calibration() {
        let d = DeviceConfig::paper_mirror()
            .with_charge_model(ChargeModelParams {
                landing_electrode_grounded: true,
                ..ChargeModelParams::default()
            })
            .unwrap();
        assert!(matches!(calibrate_injection(&d, &short(), 5.0), Err(Error::Experiment(_))));
    }

    #[test]
    fn calibration_hits_target() {
        let d = DeviceConfig::paper_mirror();
        let k = calibrate_injection(&d, &short(), 5.0).unwrap();
        assert!((final_shift(&d, &short(), k).unwrap() - 5.0).abs() < 1e-6);
    }
}
