//! Time-varying schedules for boundary values, withdrawals and compressor
//! ratios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicForm {
    /// `offset (1 + amplitude wave(omega (t - phase)))`
    #[default]
    Relative,
    /// `offset + amplitude wave(omega (t - phase))`
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sine,
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileShape {
    Constant {
        value: f64,
    },
    Harmonic {
        offset: f64,
        amplitude: f64,
        /// rad/s
        omega: f64,
        /// time shift, s
        phase: f64,
        form: HarmonicForm,
        waveform: Waveform,
        /// Before this time the profile holds the value it takes at `start`.
        start: Option<f64>,
    },
    PiecewiseLinear {
        knots: Vec<[f64; 2]>,
    },
    /// Right-open intervals `[t_{k-1}, t_end_k)`; past the last end the last
    /// value holds.
    StepSequence {
        intervals: Vec<[f64; 2]>,
    },
}

/// A scalar schedule `t -> value`, optionally periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct TimeProfile {
    pub shape: ProfileShape,
    pub period: Option<f64>,
}

/// Flat on-disk form of a [`TimeProfile`], e.g.
/// `{ type = "piecewise_linear", period = 86400, knots = [[0, 1.529], ...] }`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<HarmonicForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<Waveform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl TryFrom<ProfileSpec> for TimeProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Profile(format!("{} profile requires `{key}`", spec.kind)))
        };
        let shape = match spec.kind.as_str() {
            "constant" => ProfileShape::Constant {
                value: need(spec.value, "value")?,
            },
            "harmonic" => ProfileShape::Harmonic {
                offset: need(spec.offset, "offset")?,
                amplitude: need(spec.amplitude, "amplitude")?,
                omega: need(spec.omega, "omega")?,
                phase: spec.phase.unwrap_or(0.0),
                form: spec.form.unwrap_or_default(),
                waveform: spec.waveform.unwrap_or_default(),
                start: spec.start,
            },
            "piecewise_linear" => ProfileShape::PiecewiseLinear {
                knots: spec
                    .knots
                    .clone()
                    .ok_or_else(|| Error::Profile("piecewise_linear profile requires `knots`".into()))?,
            },
            "step_sequence" => ProfileShape::StepSequence {
                intervals: spec
                    .intervals
                    .clone()
                    .ok_or_else(|| Error::Profile("step_sequence profile requires `intervals`".into()))?,
            },
            other => return Err(Error::Profile(format!("unknown profile type `{other}`"))),
        };
        let profile = TimeProfile {
            shape,
            period: spec.period,
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl From<TimeProfile> for ProfileSpec {
    fn from(p: TimeProfile) -> Self {
        let mut spec = ProfileSpec {
            period: p.period,
            ..Default::default()
        };
        match p.shape {
            ProfileShape::Constant { value } => {
                spec.kind = "constant".into();
                spec.value = Some(value);
            }
            ProfileShape::Harmonic {
                offset,
                amplitude,
                omega,
                phase,
                form,
                waveform,
                start,
            } => {
                spec.kind = "harmonic".into();
                spec.offset = Some(offset);
                spec.amplitude = Some(amplitude);
                spec.omega = Some(omega);
                spec.phase = Some(phase);
                spec.form = Some(form);
                spec.waveform = Some(waveform);
                spec.start = start;
            }
            ProfileShape::PiecewiseLinear { knots } => {
                spec.kind = "piecewise_linear".into();
                spec.knots = Some(knots);
            }
            ProfileShape::StepSequence { intervals } => {
                spec.kind = "step_sequence".into();
                spec.intervals = Some(intervals);
            }
        }
        spec
    }
}

impl From<f64> for TimeProfile {
    fn from(value: f64) -> Self {
        TimeProfile::constant(value)
    }
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        TimeProfile {
            shape: ProfileShape::Constant { value },
            period: None,
        }
    }

    /// `offset (1 + amplitude sin(omega (t - phase)))`.
    pub fn harmonic(offset: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        TimeProfile {
            shape: ProfileShape::Harmonic {
                offset,
                amplitude,
                omega,
                phase,
                form: HarmonicForm::Relative,
                waveform: Waveform::Sine,
                start: None,
            },
            period: None,
        }
    }

    /// `base (1 + depth (1 - cos(2 pi cycles t / period)))`, periodic in `period`.
    pub fn raised_cosine(base: f64, depth: f64, cycles: f64, period: f64) -> Self {
        TimeProfile {
            shape: ProfileShape::Harmonic {
                offset: base * (1.0 + depth),
                amplitude: -base * depth,
                omega: 2.0 * PI * cycles / period,
                phase: 0.0,
                form: HarmonicForm::Affine,
                waveform: Waveform::Cosine,
                start: None,
            },
            period: Some(period),
        }
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let p = TimeProfile {
            shape: ProfileShape::PiecewiseLinear {
                knots: knots.into_iter().map(|(t, v)| [t, v]).collect(),
            },
            period: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn step_sequence(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let p = TimeProfile {
            shape: ProfileShape::StepSequence {
                intervals: intervals.into_iter().map(|(t, v)| [t, v]).collect(),
            },
            period: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        self.period = Some(period);
        self.validate()?;
        Ok(self)
    }

    pub fn with_start(mut self, t0: f64) -> Self {
        if let ProfileShape::Harmonic { start, .. } = &mut self.shape {
            *start = Some(t0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(period) = self.period {
            if !(period > 0.0) || !period.is_finite() {
                return Err(Error::Profile(format!("period must be positive, got {period}")));
            }
        }
        match &self.shape {
            ProfileShape::Constant { value } if !value.is_finite() => {
                Err(Error::Profile("constant value is not finite".into()))
            }
            ProfileShape::Harmonic {
                offset,
                amplitude,
                omega,
                phase,
                ..
            } if ![offset, amplitude, omega, phase].iter().all(|v| v.is_finite()) => {
                Err(Error::Profile("harmonic parameters must be finite".into()))
            }
            ProfileShape::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::Profile("piecewise_linear needs at least one knot".into()));
                }
                if knots.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::Profile(
                        "piecewise_linear knot times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            ProfileShape::StepSequence { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::Profile("step_sequence needs at least one interval".into()));
                }
                if intervals.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::Profile(
                        "step_sequence interval ends must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Value at time `t`. Times before the first knot clamp to the first value.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.eval_inner(t).0
    }

    /// Like [`evaluate`](Self::evaluate), but clamping is an error.
    pub fn evaluate_strict(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Profile(format!("negative evaluation time {t}")));
        }
        match self.eval_inner(t) {
            (v, false) => Ok(v),
            (_, true) => Err(Error::Profile(format!(
                "t = {t} s lies before the first knot; value was clamped"
            ))),
        }
    }

    /// Smallest and largest value the profile attains (sampled for harmonics).
    pub fn range(&self) -> (f64, f64) {
        match &self.shape {
            ProfileShape::Constant { value } => (*value, *value),
            ProfileShape::Harmonic {
                offset,
                amplitude,
                form,
                ..
            } => {
                let (lo, hi) = match form {
                    HarmonicForm::Relative => (offset * (1.0 - amplitude.abs()), offset * (1.0 + amplitude.abs())),
                    HarmonicForm::Affine => (offset - amplitude.abs(), offset + amplitude.abs()),
                };
                (lo.min(hi), lo.max(hi))
            }
            ProfileShape::PiecewiseLinear { knots } => min_max(knots.iter().map(|k| k[1])),
            ProfileShape::StepSequence { intervals } => min_max(intervals.iter().map(|k| k[1])),
        }
    }

    fn eval_inner(&self, t: f64) -> (f64, bool) {
        let t = match self.period {
            Some(period) => t.rem_euclid(period),
            None => t,
        };
        match &self.shape {
            ProfileShape::Constant { value } => (*value, false),
            ProfileShape::Harmonic {
                offset,
                amplitude,
                omega,
                phase,
                form,
                waveform,
                start,
            } => {
                let t = match start {
                    Some(t0) if t < *t0 => *t0,
                    _ => t,
                };
                let arg = omega * (t - phase);
                let wave = match waveform {
                    Waveform::Sine => arg.sin(),
                    Waveform::Cosine => arg.cos(),
                };
                let v = match form {
                    HarmonicForm::Relative => offset * (1.0 + amplitude * wave),
                    HarmonicForm::Affine => offset + amplitude * wave,
                };
                (v, false)
            }
            ProfileShape::PiecewiseLinear { knots } => interpolate(knots, t),
            ProfileShape::StepSequence { intervals } => {
                let idx = intervals.partition_point(|iv| iv[0] <= t);
                let idx = idx.min(intervals.len() - 1);
                (intervals[idx][1], false)
            }
        }
    }
}

fn interpolate(knots: &[[f64; 2]], t: f64) -> (f64, bool) {
    let first = knots[0];
    if t < first[0] {
        return (first[1], true);
    }
    let last = knots[knots.len() - 1];
    if t >= last[0] {
        return (last[1], false);
    }
    // first knot with time > t; guaranteed 1..len
    let hi = knots.partition_point(|k| k[0] <= t);
    let (a, b) = (knots[hi - 1], knots[hi]);
    if t == a[0] {
        return (a[1], false);
    }
    let w = (t - a[0]) / (b[0] - a[0]);
    (a[1] + w * (b[1] - a[1]), false)
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Daily operating schedules of the five-node test network.
pub mod five_node {
    use super::*;

    pub const DAY: f64 = 86400.0;
    pub const C1_0: f64 = 1.5290113;
    pub const C2_0: f64 = 1.1128863;
    pub const C3_0: f64 = 1.2242249;
    pub const D3_0: f64 = 150.0;
    pub const D5_0: f64 = 150.0;

    pub fn c1() -> TimeProfile {
        TimeProfile::raised_cosine(C1_0, -0.1, 1.0, DAY)
    }

    pub fn c2() -> TimeProfile {
        let shape = [1.0, 1.0, 1.4, 1.4, 1.0, 1.0];
        let times = [0.0, 21600.0, 25200.0, 64800.0, 68400.0, DAY];
        knots(times, shape, C2_0)
    }

    pub fn c3() -> TimeProfile {
        TimeProfile::raised_cosine(C3_0, 0.25, 3.0, DAY)
    }

    pub fn d3() -> TimeProfile {
        TimeProfile::raised_cosine(D3_0, -0.1, 2.0, DAY)
    }

    pub fn d5() -> TimeProfile {
        let shape = [1.0, 1.0, 1.2, 1.2, 1.0, 1.0];
        let times = [0.0, 12000.0, 15600.0, 48000.0, 51600.0, DAY];
        knots(times, shape, D5_0)
    }

    fn knots(times: [f64; 6], shape: [f64; 6], base: f64) -> TimeProfile {
        TimeProfile::piecewise_linear(times.iter().zip(shape).map(|(&t, s)| (t, s * base)).collect())
            .and_then(|p| p.with_period(DAY))
            .expect("fixed knots are valid")
    }
}
