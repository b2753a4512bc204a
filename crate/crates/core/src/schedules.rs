//! Blur schedules: training progress to blur strength.
//!
//! Progress is `tau = min(t, d*T) / (d*T)` where `d` is the active fraction
//! of training. Every family except `none` starts at strength 1 and reaches
//! exactly 0 at `tau = 1`; past `d*T` training continues on clean images.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::resample::BlurStrength;

/// Fraction of training during which the curriculum is active.
pub const DEFAULT_DURATION: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("unknown schedule family `{0}` (expected none, linear, step:N, pow2, sin or exp:K)")]
    UnknownFamily(String),
    #[error("invalid parameter in `{0}`")]
    BadParameter(String),
    #[error("step schedules need at least 2 stages, got {0}")]
    TooFewStages(u32),
    #[error("exponential rate must be finite and non-zero, got {0}")]
    BadRate(f64),
    #[error("duration fraction must lie in (0, 1], got {0}")]
    BadDuration(f64),
    #[error("clock step {t} outside [0, {total}]")]
    BadClock { t: u64, total: u64 },
}

/// Width context for the resolution-doubling family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pow2Geometry {
    pub full: u32,
    pub start: u32,
}

impl Default for Pow2Geometry {
    fn default() -> Self {
        Self { full: 128, start: 8 }
    }
}

impl Pow2Geometry {
    /// Number of doubling stages, at least one.
    pub fn stages(&self) -> u32 {
        if self.start == 0 || self.full <= self.start {
            return 1;
        }
        ((self.full as f64 / self.start as f64).log2().round() as u32).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleFamily {
    None,
    Linear,
    /// `n` equal-width descending stages.
    Step(u32),
    /// Resolution doubling with stage widths growing as powers of two.
    Pow2(Pow2Geometry),
    /// Cosine ramp `(1 + cos(pi * tau)) / 2`.
    Sin,
    /// Normalized exponential with rate `k`; `k < 0` lingers at high blur.
    Exp(f64),
}

impl ScheduleFamily {
    fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            ScheduleFamily::Step(n) if n < 2 => Err(ScheduleError::TooFewStages(n)),
            ScheduleFamily::Exp(k) if k == 0.0 || !k.is_finite() => Err(ScheduleError::BadRate(k)),
            _ => Ok(()),
        }
    }

    /// Strength at normalized progress `tau` in [0, 1].
    pub fn at(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        if matches!(self, ScheduleFamily::None) {
            return 0.0;
        }
        if tau >= 1.0 {
            return 0.0;
        }
        if tau <= 0.0 {
            return 1.0;
        }
        match *self {
            ScheduleFamily::None => 0.0,
            ScheduleFamily::Linear => 1.0 - tau,
            ScheduleFamily::Step(n) => {
                let n = n as f64;
                (1.0 - (tau * n).floor() / n).max(0.0)
            }
            ScheduleFamily::Sin => (1.0 + (PI * tau).cos()) / 2.0,
            ScheduleFamily::Exp(k) => (k * (1.0 - tau)).exp_m1() / k.exp_m1(),
            ScheduleFamily::Pow2(geom) => pow2_at(geom, tau),
        }
    }
}

fn pow2_at(geom: Pow2Geometry, tau: f64) -> f64 {
    if geom.full <= geom.start {
        return 1.0;
    }
    let stages = geom.stages();
    let total = (1u64 << stages) as f64 - 1.0;
    // Stage i covers a tau-interval of width 2^i / (2^K - 1).
    let mut stage = stages - 1;
    for i in 0..stages {
        let end = ((1u64 << (i + 1)) as f64 - 1.0) / total;
        if tau < end {
            stage = i;
            break;
        }
    }
    let res = (geom.start as u64 * (1u64 << stage)).min(geom.full as u64) as f64;
    (geom.full as f64 - res) / (geom.full - geom.start) as f64
}

impl fmt::Display for ScheduleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleFamily::None => f.write_str("none"),
            ScheduleFamily::Linear => f.write_str("linear"),
            ScheduleFamily::Step(n) => write!(f, "step:{n}"),
            ScheduleFamily::Pow2(_) => f.write_str("pow2"),
            ScheduleFamily::Sin => f.write_str("sin"),
            ScheduleFamily::Exp(k) => write!(f, "exp:{k:?}"),
        }
    }
}

impl FromStr for ScheduleFamily {
    type Err = ScheduleError;

    /// Parses `none`, `linear`, `step:N`, `pow2`, `sin` or `exp:K`.
    /// `pow2` gets the default geometry; rebind it with
    /// [`ScheduleSpec::with_pow2_geometry`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let family = match (name, arg) {
            ("none", None) => ScheduleFamily::None,
            ("linear", None) => ScheduleFamily::Linear,
            ("sin", None) => ScheduleFamily::Sin,
            ("pow2", None) => ScheduleFamily::Pow2(Pow2Geometry::default()),
            ("step", Some(a)) => {
                ScheduleFamily::Step(a.parse().map_err(|_| ScheduleError::BadParameter(s.into()))?)
            }
            ("exp", Some(a)) => {
                ScheduleFamily::Exp(a.parse().map_err(|_| ScheduleError::BadParameter(s.into()))?)
            }
            _ => return Err(ScheduleError::UnknownFamily(s.into())),
        };
        family.validate()?;
        Ok(family)
    }
}

/// Current training step `t` out of `total` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainClock {
    t: u64,
    total: u64,
}

impl TrainClock {
    pub fn new(t: u64, total: u64) -> Result<Self, ScheduleError> {
        if total == 0 || t > total {
            return Err(ScheduleError::BadClock { t, total });
        }
        Ok(Self { t, total })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec {
    family: ScheduleFamily,
    duration: f64,
}

impl ScheduleSpec {
    pub fn new(family: ScheduleFamily, duration: f64) -> Result<Self, ScheduleError> {
        family.validate()?;
        if !(duration > 0.0 && duration <= 1.0) {
            return Err(ScheduleError::BadDuration(duration));
        }
        Ok(Self { family, duration })
    }

    pub fn family(&self) -> ScheduleFamily {
        self.family
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn with_duration(self, duration: f64) -> Result<Self, ScheduleError> {
        Self::new(self.family, duration)
    }

    /// Rebinds the `pow2` family to a concrete width pair; other families are
    /// returned unchanged.
    pub fn with_pow2_geometry(mut self, geom: Pow2Geometry) -> Self {
        if let ScheduleFamily::Pow2(_) = self.family {
            self.family = ScheduleFamily::Pow2(geom);
        }
        self
    }

    /// Number of steps, `d*T`, during which the curriculum is active.
    pub fn active_steps(&self, total: u64) -> f64 {
        self.duration * total as f64
    }

    /// Normalized progress through the active phase.
    pub fn progress(&self, clock: TrainClock) -> f64 {
        let active = self.active_steps(clock.total);
        let t = clock.t as f64;
        if t >= active {
            1.0
        } else {
            (t / active).clamp(0.0, 1.0)
        }
    }

    pub fn strength(&self, clock: TrainClock) -> BlurStrength {
        let s = self.family.at(self.progress(clock)).clamp(0.0, 1.0);
        BlurStrength::new(s).expect("clamped")
    }
}

/// The ten schedule configurations of the ablation harness, each with the
/// default duration.
pub fn enumerate_families() -> Vec<ScheduleSpec> {
    [
        ScheduleFamily::None,
        ScheduleFamily::Linear,
        ScheduleFamily::Step(4),
        ScheduleFamily::Step(8),
        ScheduleFamily::Pow2(Pow2Geometry::default()),
        ScheduleFamily::Sin,
        ScheduleFamily::Exp(2.0),
        ScheduleFamily::Exp(5.0),
        ScheduleFamily::Exp(-2.0),
        ScheduleFamily::Exp(-5.0),
    ]
    .into_iter()
    .map(|f| ScheduleSpec::new(f, DEFAULT_DURATION).expect("valid family"))
    .collect()
}
