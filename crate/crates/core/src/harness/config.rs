//! JSON run configuration: sections `device`, `charge`, `drive` and
//! `experiment`, plus `key=value` overrides addressed by dot paths.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::charging::ChargeModelParams;
use crate::drive::{Schedule, Segment, Waveform};
use crate::error::{Error, Result};
use crate::harness::drift::DriftSettings;
use crate::harness::endurance::EnduranceSettings;
use crate::harness::hold::HoldSettings;
use crate::harness::sweep::SweepSettings;
use crate::model::{DeviceConfig, DeviceSpec, Side};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSpec,
    pub charge: ChargeModelParams,
    /// Drive program for `simulate`. Absent means [`DriveSpec::default`].
    pub drive: Option<DriveSpec>,
    pub experiment: ExperimentSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub sweep: SweepSettings,
    pub drift: DriftSettings,
    pub hold: HoldSettings,
    pub endurance: EnduranceSettings,
    pub simulate: SimulateSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Rest,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    /// Run length, s. `None` runs to the end of the drive program.
    pub duration_s: Option<f64>,
    pub sample_dt_s: f64,
    pub initial: InitialState,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            duration_s: None,
            sample_dt_s: 1e-6,
            initial: InitialState::Rest,
        }
    }
}

/// One segment as written in the config: `{"duration_s": .., "type": .., ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub duration_s: f64,
    #[serde(flatten)]
    pub waveform: Waveform,
}

/// Drive program on one electrode; the other stays grounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub channel: Side,
    pub segments: Vec<SegmentSpec>,
}

impl Default for DriveSpec {
    /// An 80 V step on the right electrode for 2 ms, then 3 ms grounded.
    fn default() -> Self {
        DriveSpec {
            channel: Side::Right,
            segments: vec![
                SegmentSpec {
                    duration_s: 2e-3,
                    waveform: Waveform::DcLevel { level_v: 80.0 },
                },
                SegmentSpec {
                    duration_s: 3e-3,
                    waveform: Waveform::Ground,
                },
            ],
        }
    }
}

impl DriveSpec {
    pub fn schedule(&self) -> Result<Schedule> {
        if self.segments.is_empty() {
            return Err(Error::config("drive.segments", "at least one segment is required"));
        }
        let active: Vec<Segment> = self
            .segments
            .iter()
            .map(|s| Segment {
                duration: s.duration_s,
                waveform: s.waveform,
            })
            .collect();
        let total: f64 = active.iter().map(|s| s.duration).sum();
        let idle = vec![Segment {
            duration: total,
            waveform: Waveform::Ground,
        }];
        match self.channel {
            Side::Left => Schedule::new(active, idle),
            Side::Right => Schedule::new(idle, active),
        }
    }
}

impl RunConfig {
    pub fn device_config(&self) -> Result<DeviceConfig> {
        DeviceConfig::from_spec(&self.device, self.charge)
    }

    /// Fully populated document; loading it back gives the same config.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serialises to JSON")
    }
}

/// Parse a JSON document, reporting syntax errors with line and column.
pub fn parse_document(text: &str, origin: &str) -> Result<Value> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        Error::config(origin, format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    if !doc.is_object() {
        return Err(Error::config(origin, "top level must be a JSON object"));
    }
    Ok(doc)
}

/// Apply `path.to.key=value`. The value is read as JSON when it parses as
/// JSON and as a plain string otherwise. Numeric path parts index arrays.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config("--override", format!("expected key=value, got `{spec}`")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::config("--override", format!("malformed key path `{path}`")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::config(path, format!("`{part}` does not index an array")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(path, format!("index {idx} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::config(path, format!("`{part}` is inside a non-object value")));
            }
        };
    }
    unreachable!("loop returns on the last path part")
}

/// Typed config from a document.
pub fn resolve(doc: Value) -> Result<RunConfig> {
    serde_json::from_value(doc).map_err(|e| Error::config("config", e.to_string()))
}

/// Read `path` (or start from defaults), apply overrides and resolve.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            parse_document(&text, &p.display().to_string())?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    resolve(doc)
}
