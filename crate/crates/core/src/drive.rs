//! Electrode voltage programs.
//!
//! A [`Waveform`] is sampled with time measured from the start of its
//! segment. A [`Schedule`] strings segments together on the left and right
//! channels; both channels are referenced to the grounded mirror.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Side;

/// Phases this close to a period boundary snap onto it, so that sample times
/// built as `n * dt` land on the intended half-period.
const PHASE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Waveform {
    Ground,
    #[serde(rename = "dc")]
    DcLevel {
        level_v: f64,
    },
    Triangle {
        frequency_hz: f64,
        v_min: f64,
        v_max: f64,
    },
    Square {
        frequency_hz: f64,
        v_high: f64,
        v_low: f64,
        duty: f64,
    },
    #[serde(rename = "bipolar")]
    BipolarSquare {
        frequency_hz: f64,
        amplitude_v: f64,
    },
}

fn phase(t: f64, frequency: f64) -> f64 {
    let cycles = t * frequency;
    let p = cycles - cycles.floor();
    if 1.0 - p < PHASE_SNAP {
        0.0
    } else {
        p
    }
}

/// Whether phase `p` lies before the in-period switch point `edge`. Phases
/// within `PHASE_SNAP` below the edge count as past it, like the period
/// boundary itself.
fn before(p: f64, edge: f64) -> bool {
    p < edge - PHASE_SNAP
}

impl Waveform {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schedule(msg));
        match *self {
            Waveform::Ground => Ok(()),
            Waveform::DcLevel { level_v } if !level_v.is_finite() => bad("dc level must be finite".into()),
            Waveform::DcLevel { .. } => Ok(()),
            Waveform::Triangle {
                frequency_hz,
                v_min,
                v_max,
            } => {
                if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
                    bad(format!("triangle frequency must be > 0, got {frequency_hz}"))
                } else if !(v_max >= v_min) {
                    bad(format!("triangle needs v_max >= v_min ({v_min}, {v_max})"))
                } else {
                    Ok(())
                }
            }
            Waveform::Square {
                frequency_hz, duty, ..
            } => {
                if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
                    bad(format!("square frequency must be > 0, got {frequency_hz}"))
                } else if !(duty > 0.0 && duty < 1.0) {
                    bad(format!("square duty must lie in (0, 1), got {duty}"))
                } else {
                    Ok(())
                }
            }
            Waveform::BipolarSquare {
                frequency_hz,
                amplitude_v,
            } => {
                if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
                    bad(format!("bipolar frequency must be > 0, got {frequency_hz}"))
                } else if !(amplitude_v >= 0.0) {
                    bad(format!("bipolar amplitude must be >= 0, got {amplitude_v}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Voltage at time `t` after the segment start.
    pub fn sample(&self, t: f64) -> f64 {
        match *self {
            Waveform::Ground => 0.0,
            Waveform::DcLevel { level_v } => level_v,
            Waveform::Triangle {
                frequency_hz,
                v_min,
                v_max,
            } => {
                let p = phase(t, frequency_hz);
                let rise = if p < 0.5 { 2.0 * p } else { 2.0 * (1.0 - p) };
                v_min + (v_max - v_min) * rise
            }
            Waveform::Square {
                frequency_hz,
                v_high,
                v_low,
                duty,
            } => {
                if before(phase(t, frequency_hz), duty) {
                    v_high
                } else {
                    v_low
                }
            }
            Waveform::BipolarSquare {
                frequency_hz,
                amplitude_v,
            } => {
                if before(phase(t, frequency_hz), 0.5) {
                    amplitude_v
                } else {
                    -amplitude_v
                }
            }
        }
    }

    pub fn frequency(&self) -> Option<f64> {
        match *self {
            Waveform::Ground | Waveform::DcLevel { .. } => None,
            Waveform::Triangle { frequency_hz, .. }
            | Waveform::Square { frequency_hz, .. }
            | Waveform::BipolarSquare { frequency_hz, .. } => Some(frequency_hz),
        }
    }

    /// RMS over one period (constant levels return their magnitude).
    pub fn rms(&self) -> f64 {
        match *self {
            Waveform::Ground => 0.0,
            Waveform::DcLevel { level_v } => level_v.abs(),
            Waveform::Triangle { v_min, v_max, .. } => {
                // Mean of (v_min + (v_max - v_min) s)^2 for s uniform on [0, 1].
                ((v_min * v_min + v_min * v_max + v_max * v_max) / 3.0).sqrt()
            }
            Waveform::Square {
                v_high, v_low, duty, ..
            } => (duty * v_high * v_high + (1.0 - duty) * v_low * v_low).sqrt(),
            Waveform::BipolarSquare { amplitude_v, .. } => amplitude_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub duration: f64,
    pub waveform: Waveform,
}

/// Ordered segments of one channel with cumulative start times.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Channel {
    segments: Vec<Segment>,
    starts: Vec<f64>,
}

impl Channel {
    pub fn new(segments: Vec<Segment>) -> Result<Channel> {
        let mut starts = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        for s in &segments {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::Schedule(format!("segment duration must be > 0, got {}", s.duration)));
            }
            s.waveform.validate()?;
            starts.push(t);
            t += s.duration;
        }
        Ok(Channel { segments, starts })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Start time of every segment.
    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn duration(&self) -> f64 {
        match (self.starts.last(), self.segments.last()) {
            (Some(start), Some(seg)) => start + seg.duration,
            _ => 0.0,
        }
    }

    /// Index of the segment covering `t`. Segments are half-open; times past
    /// the end stay in the last segment. A time within a relative
    /// `PHASE_SNAP` below a boundary counts as on it, so that `n * dt` grids
    /// see every boundary at the same step regardless of round-off.
    pub fn segment_index(&self, t: f64) -> usize {
        self.starts
            .partition_point(|&s| s <= t + PHASE_SNAP * s.abs())
            .saturating_sub(1)
    }

    pub fn sample(&self, t: f64) -> f64 {
        if self.segments.is_empty() {
            return 0.0;
        }
        let i = self.segment_index(t);
        self.segments[i].waveform.sample((t - self.starts[i]).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub left: Channel,
    pub right: Channel,
    pub total_duration: f64,
}

impl Schedule {
    /// Both channels must cover the same span.
    pub fn new(left: Vec<Segment>, right: Vec<Segment>) -> Result<Schedule> {
        let left = Channel::new(left)?;
        let right = Channel::new(right)?;
        let (dl, dr) = (left.duration(), right.duration());
        if dl <= 0.0 || dr <= 0.0 {
            return Err(Error::Schedule("schedule is empty".into()));
        }
        if (dl - dr).abs() > 1e-9 * dl.max(dr) {
            return Err(Error::Schedule(format!(
                "channels cover different spans (left {dl} s, right {dr} s)"
            )));
        }
        Ok(Schedule {
            left,
            right,
            total_duration: dl.max(dr),
        })
    }

    /// One waveform on `side` for `duration`; the other channel grounded.
    pub fn single(side: Side, waveform: Waveform, duration: f64) -> Result<Schedule> {
        let active = vec![Segment { duration, waveform }];
        let idle = vec![Segment {
            duration,
            waveform: Waveform::Ground,
        }];
        match side {
            Side::Left => Schedule::new(active, idle),
            Side::Right => Schedule::new(idle, active),
        }
    }

    /// Both electrodes grounded for `duration`.
    pub fn grounded(duration: f64) -> Result<Schedule> {
        Schedule::single(Side::Right, Waveform::Ground, duration)
    }

    pub fn channel(&self, side: Side) -> &Channel {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// `(V_left, V_right)` at time `t`.
    pub fn sample(&self, t: f64) -> (f64, f64) {
        (self.left.sample(t), self.right.sample(t))
    }

    /// Highest waveform frequency on either channel, Hz.
    pub fn max_frequency(&self) -> Option<f64> {
        self.left
            .segments
            .iter()
            .chain(&self.right.segments)
            .filter_map(|s| s.waveform.frequency())
            .reduce(f64::max)
    }
}

/// Hold `waveform` on the right electrode, grounding both electrodes for
/// `interrupt_len` at the end of every `interrupt_every` window.
pub fn build_hold_schedule(
    waveform: Waveform,
    interrupt_every: f64,
    interrupt_len: f64,
    total: f64,
) -> Result<Schedule> {
    if !(interrupt_len > 0.0) {
        return Err(Error::Schedule(format!("interruption length must be > 0, got {interrupt_len}")));
    }
    if !(interrupt_len < interrupt_every) {
        return Err(Error::Schedule(format!(
            "interruption length {interrupt_len} s must be shorter than its period {interrupt_every} s"
        )));
    }
    if !(total > 0.0) {
        return Err(Error::Schedule(format!("total duration must be > 0, got {total}")));
    }
    let hold = |duration| Segment { duration, waveform };
    let ground = |duration| Segment {
        duration,
        waveform: Waveform::Ground,
    };
    let count = (total / interrupt_every * (1.0 + 1e-12)).floor() as usize;
    let mut right = Vec::with_capacity(2 * count + 1);
    for _ in 0..count {
        right.push(hold(interrupt_every - interrupt_len));
        right.push(ground(interrupt_len));
    }
    let remainder = total - count as f64 * interrupt_every;
    if remainder > 1e-12 * total {
        right.push(hold(remainder));
    }
    let left = vec![ground(total)];
    Schedule::new(left, right)
}

/// Bipolar high-frequency hold with periodic grounding windows.
pub fn build_hold_with_interruptions(
    amplitude: f64,
    frequency: f64,
    interrupt_every: f64,
    interrupt_len: f64,
    total: f64,
) -> Result<Schedule> {
    build_hold_schedule(
        Waveform::BipolarSquare {
            frequency_hz: frequency,
            amplitude_v: amplitude,
        },
        interrupt_every,
        interrupt_len,
        total,
    )
}

/// Side-to-side toggling: each period drives the right electrode for the
/// first half and the left electrode for the second.
pub fn build_toggle(period: f64, v_on: f64, total: f64) -> Result<Schedule> {
    if !(period > 0.0) {
        return Err(Error::Schedule(format!("toggle period must be > 0, got {period}")));
    }
    if !(total > 0.0) {
        return Err(Error::Schedule("toggle schedule is empty".into()));
    }
    let half = 0.5 * period;
    let halves = (total / half * (1.0 + 1e-12)).floor() as usize;
    if halves == 0 {
        return Err(Error::Schedule(format!("total {total} s is shorter than half a period")));
    }
    let on = Waveform::DcLevel { level_v: v_on };
    let mut left = Vec::with_capacity(halves);
    let mut right = Vec::with_capacity(halves);
    for i in 0..halves {
        let (l, r) = if i % 2 == 0 { (Waveform::Ground, on) } else { (on, Waveform::Ground) };
        left.push(Segment {
            duration: half,
            waveform: l,
        });
        right.push(Segment {
            duration: half,
            waveform: r,
        });
    }
    Schedule::new(left, right)
}
