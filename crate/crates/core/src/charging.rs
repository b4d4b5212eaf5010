//! Trapped oxide charge under the landing contact.
//!
//! Charge is lumped into one areal density per electrode side. A positive
//! density raises the voltage that side needs, through the flat-band-style
//! shift `Vsh = sigma * t_ox / (eps_r * eps0)`. Injection only happens while
//! the mirror rests on that side's oxide:
//!
//! ```text
//! dsigma/dt = [landed && !grounded_landing] * sign(E) * k_inj * max(|E| - E_th, 0)^p
//!             - sigma / tau_decay
//! ```

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::electrostatics::{torque_closed_form, TorqueContext, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::model::{DeviceConfig, OxideParams, Side};

/// Default injection coefficient, calibrated so that the compressed DC drift
/// run (1000 holds of 10 ms at 100 V) raises the pull-in voltage by 26 V.
pub const DEFAULT_K_INJ: f64 = 1.469_884_557_205_928e-12;

/// Default injection threshold field, V/m (0.5 MV/cm).
pub const DEFAULT_E_TH: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeModelParams {
    /// Injection coefficient, (C/m²)/s per (V/m)^p.
    pub k_inj: f64,
    /// Threshold field, V/m.
    #[serde(rename = "e_th_v_per_m")]
    pub e_th: f64,
    pub exponent_p: f64,
    /// Detrapping time constant, s. May be infinite (`"inf"` in JSON).
    #[serde(rename = "tau_decay_s", serialize_with = "ser_tau", deserialize_with = "de_tau")]
    pub tau_decay: f64,
    pub landing_electrode_grounded: bool,
}

impl Default for ChargeModelParams {
    fn default() -> Self {
        ChargeModelParams {
            k_inj: DEFAULT_K_INJ,
            e_th: DEFAULT_E_TH,
            exponent_p: 1.0,
            tau_decay: f64::INFINITY,
            landing_electrode_grounded: false,
        }
    }
}

impl ChargeModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_inj.is_finite() && self.k_inj >= 0.0) {
            return Err(Error::config("charge.k_inj", format!("must be >= 0, got {}", self.k_inj)));
        }
        if !(self.e_th.is_finite() && self.e_th >= 0.0) {
            return Err(Error::config("charge.e_th_v_per_m", "must be >= 0"));
        }
        if !(self.exponent_p.is_finite() && self.exponent_p >= 1.0) {
            return Err(Error::config("charge.exponent_p", "must be >= 1"));
        }
        if !(self.tau_decay > 0.0) || self.tau_decay.is_nan() {
            return Err(Error::config("charge.tau_decay_s", "must be > 0 or \"inf\""));
        }
        Ok(())
    }
}

fn ser_tau<S: Serializer>(tau: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if tau.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*tau)
    }
}

fn de_tau<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    struct TauVisitor;
    impl Visitor<'_> for TauVisitor {
        type Value = f64;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a positive number of seconds or \"inf\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
            match v.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }
    d.deserialize_any(TauVisitor)
}

/// Trapped charge per side, C/m². Zero for a fresh device.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ChargeState {
    pub sigma_left: f64,
    pub sigma_right: f64,
}

impl ChargeState {
    pub fn on(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.sigma_left,
            Side::Right => self.sigma_right,
        }
    }

    pub fn with(mut self, side: Side, sigma: f64) -> ChargeState {
        match side {
            Side::Left => self.sigma_left = sigma,
            Side::Right => self.sigma_right = sigma,
        }
        self
    }
}

/// Per-side oxide fields, V/m, signed like the effective voltage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideFields {
    pub left: f64,
    pub right: f64,
}

/// Voltage offset produced by trapped areal charge `sigma`.
pub fn voltage_shift(sigma: f64, oxide: &OxideParams) -> f64 {
    sigma * oxide.thickness / (oxide.relative_permittivity * VACUUM_PERMITTIVITY)
}

/// Inverse of [`voltage_shift`].
pub fn sigma_for_shift(shift: f64, oxide: &OxideParams) -> f64 {
    shift * oxide.relative_permittivity * VACUUM_PERMITTIVITY / oxide.thickness
}

fn injection_term(e_signed: f64, params: &ChargeModelParams, landed: bool) -> f64 {
    if !landed || params.landing_electrode_grounded || params.k_inj == 0.0 {
        return 0.0;
    }
    let excess = e_signed.abs() - params.e_th;
    if excess <= 0.0 {
        return 0.0;
    }
    e_signed.signum() * params.k_inj * excess.powf(params.exponent_p)
}

/// Rate of change of trapped charge on one side, (C/m²)/s.
pub fn injection_rate(e_signed: f64, sigma: f64, params: &ChargeModelParams, landed: bool) -> f64 {
    let decay = if params.tau_decay.is_finite() {
        sigma / params.tau_decay
    } else {
        0.0
    };
    injection_term(e_signed, params, landed) - decay
}

/// Advance both sides by `dt`.
///
/// Injection is held constant over the step; decay is integrated exactly, so
/// pure decay follows `exp(-t/tau)` for any admissible `dt`.
pub fn step_charge(
    state: ChargeState,
    fields: SideFields,
    dt: f64,
    landed: Option<Side>,
    params: &ChargeModelParams,
) -> Result<ChargeState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Integration(format!("charge step dt must be > 0, got {dt}")));
    }
    if params.tau_decay.is_finite() && dt > params.tau_decay / 10.0 {
        return Err(Error::Integration(format!(
            "charge step dt = {dt} s exceeds tau_decay/10 = {} s",
            params.tau_decay / 10.0
        )));
    }
    let advance = |sigma: f64, field: f64, side: Side| {
        let src = injection_term(field, params, landed == Some(side));
        if params.tau_decay.is_finite() {
            let decay = (-dt / params.tau_decay).exp();
            sigma * decay + src * params.tau_decay * (-(-dt / params.tau_decay).exp_m1())
        } else {
            sigma + src * dt
        }
    };
    Ok(ChargeState {
        sigma_left: advance(state.sigma_left, fields.left, Side::Left),
        sigma_right: advance(state.sigma_right, fields.right, Side::Right),
    })
}

/// Whether trapped charge `sigma` alone holds a landed mirror at the stop with
/// every electrode grounded. Closed condition: exact balance counts as stuck.
pub fn stuck_check(sigma: f64, device: &DeviceConfig) -> bool {
    let ctx = TorqueContext::new(device);
    let shift = voltage_shift(sigma, &device.oxide).abs();
    let theta_max = device.theta_max();
    torque_closed_form(theta_max, shift, &ctx).expect("stop angle is in range") >= device.stiffness() * theta_max
}
