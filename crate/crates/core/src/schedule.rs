//! Kick timelines for the periodic and two-comb quasiperiodic rotor.
//!
//! Events are stored as `(comb, index)` pairs and their times are evaluated as
//! `index * period`, never accumulated, so forward and reversed passes see the
//! same gaps bit for bit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest denominator rejected by the commensurability guard.
pub const MAX_COMMENSURATE_DENOMINATOR: u64 = 1_000_000;

/// A kick period, either a literal value or an exact algebraic constant that
/// is evaluated on use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    Value(f64),
    /// `(1 + sqrt 5) / 2`
    Golden,
}

impl Period {
    pub fn value(self) -> f64 {
        match self {
            Period::Value(v) => v,
            Period::Golden => (1.0 + 5f64.sqrt()) / 2.0,
        }
    }

    fn descriptor(self) -> String {
        match self {
            Period::Value(v) => format!("{v:?}"),
            Period::Golden => "golden".to_string(),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Period::Value(v) => s.serialize_f64(*v),
            Period::Golden => s.serialize_str("golden"),
        }
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Int(i64),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Period::Value(v)),
            Repr::Int(v) => Ok(Period::Value(v as f64)),
            Repr::Name(n) if n == "golden" => Ok(Period::Golden),
            Repr::Name(n) => Err(serde::de::Error::custom(format!(
                "unknown period `{n}` (expected a number or \"golden\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleMode {
    Periodic {
        #[serde(default = "unit_period")]
        period: Period,
    },
    Quasiperiodic {
        #[serde(default = "unit_period")]
        t1: Period,
        #[serde(default = "golden_period")]
        t2: Period,
    },
}

fn unit_period() -> Period {
    Period::Value(1.0)
}

fn golden_period() -> Period {
    Period::Golden
}

impl ScheduleMode {
    /// `T = 1`.
    pub fn periodic() -> Self {
        ScheduleMode::Periodic {
            period: unit_period(),
        }
    }

    /// `T1 = 1`, `T2 = golden ratio`.
    pub fn quasiperiodic() -> Self {
        ScheduleMode::Quasiperiodic {
            t1: unit_period(),
            t2: golden_period(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, ScheduleMode::Periodic { .. })
    }

    /// Human-readable `(mode, T1, T2)` descriptor.
    pub fn describe(&self) -> String {
        match self {
            ScheduleMode::Periodic { period } => format!("periodic(T={})", period.descriptor()),
            ScheduleMode::Quasiperiodic { t1, t2 } => {
                format!("quasiperiodic(T1={}, T2={})", t1.descriptor(), t2.descriptor())
            }
        }
    }
}

impl Default for ScheduleMode {
    fn default() -> Self {
        ScheduleMode::quasiperiodic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comb {
    First,
    Second,
}

/// One kick, identified by the comb it belongs to and its index in that comb
/// (starting at 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KickEvent {
    pub comb: Comb,
    pub index: u64,
}

impl KickEvent {
    /// Index in the `T1` comb, 0 if the kick belongs to the `T2` comb.
    pub fn n1(&self) -> u64 {
        match self.comb {
            Comb::First => self.index,
            Comb::Second => 0,
        }
    }

    /// Index in the `T2` comb, 0 if the kick belongs to the `T1` comb.
    pub fn n2(&self) -> u64 {
        match self.comb {
            Comb::First => 0,
            Comb::Second => self.index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KickSchedule {
    mode: ScheduleMode,
    events: Vec<KickEvent>,
    t1: f64,
    t2: f64,
}

impl KickSchedule {
    pub fn mode(&self) -> &ScheduleMode {
        &self.mode
    }

    pub fn events(&self) -> &[KickEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event_time(&self, event: &KickEvent) -> f64 {
        match event.comb {
            Comb::First => event.index as f64 * self.t1,
            Comb::Second => event.index as f64 * self.t2,
        }
    }

    /// Evaluated event times.
    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| self.event_time(e)).collect()
    }

    /// Inter-kick gaps. The first gap runs from `t = 0` to the first kick.
    /// In periodic mode every gap is exactly `T`.
    pub fn gaps(&self) -> Vec<f64> {
        if let ScheduleMode::Periodic { .. } = self.mode {
            return vec![self.t1; self.events.len()];
        }
        let mut prev = 0.0;
        self.times()
            .into_iter()
            .map(|t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    }

    /// SHA-256 over the little-endian bits of the evaluated times and gaps.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.describe().as_bytes());
        for t in self.times() {
            h.update(t.to_bits().to_le_bytes());
        }
        for g in self.gaps() {
            h.update(g.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// First `horizon_kicks` events of the time-sorted union of `{n T1}` and
/// `{m T2}`, `n, m >= 1`.
pub fn build_schedule(mode: ScheduleMode, horizon_kicks: usize) -> Result<KickSchedule> {
    if horizon_kicks < 1 {
        return Err(Error::InvalidParam("schedule horizon must be >= 1 kick".into()));
    }
    match mode {
        ScheduleMode::Periodic { period } => {
            let t = check_period("T", period)?;
            let events = (1..=horizon_kicks as u64)
                .map(|index| KickEvent {
                    comb: Comb::First,
                    index,
                })
                .collect();
            Ok(KickSchedule {
                mode,
                events,
                t1: t,
                t2: t,
            })
        }
        ScheduleMode::Quasiperiodic { t1, t2 } => {
            let t1 = check_period("T1", t1)?;
            let t2 = check_period("T2", t2)?;
            if let Some((num, den)) = small_rational(t2 / t1, MAX_COMMENSURATE_DENOMINATOR) {
                return Err(Error::Commensurate { num, den });
            }
            let mut events = Vec::with_capacity(horizon_kicks);
            let (mut n, mut m) = (1u64, 1u64);
            let mut last = 0.0;
            while events.len() < horizon_kicks {
                let a = n as f64 * t1;
                let b = m as f64 * t2;
                let (event, time) = if a < b {
                    n += 1;
                    (
                        KickEvent {
                            comb: Comb::First,
                            index: n - 1,
                        },
                        a,
                    )
                } else {
                    m += 1;
                    (
                        KickEvent {
                            comb: Comb::Second,
                            index: m - 1,
                        },
                        b,
                    )
                };
                if time <= last {
                    return Err(Error::CoincidentKicks {
                        index: events.len(),
                        time,
                    });
                }
                last = time;
                events.push(event);
            }
            Ok(KickSchedule { mode, events, t1, t2 })
        }
    }
}

fn check_period(name: &str, p: Period) -> Result<f64> {
    let v = p.value();
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive, got {v}")))
    }
}

/// Returns `(p, q)` when `x` equals `p / q` to within a few ulps for some
/// `q <= max_den`, scanning the continued-fraction convergents of `x`.
pub fn small_rational(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0 && x.is_finite()) {
        return None;
    }
    let tol = 8.0 * f64::EPSILON * x;
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e18 {
            break;
        }
        let a_int = a as u128;
        let p2 = a_int * p1 + p0;
        let q2 = a_int * q1 + q0;
        if q2 > max_den as u128 {
            break;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol {
            return Some((p2 as u64, q2 as u64));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}
