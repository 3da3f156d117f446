//! Diagnostics on momentum-basis states. Everything except [`fidelity`] is a
//! function of the occupations `|a_l|^2` alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::RotorState;

/// Default presence threshold for the `lmax` criterion `|a_l|^2 > delta`.
pub const DEFAULT_DELTA: f64 = 1e-8;

/// `<n^2> = sum_l l^2 |a_l|^2`
pub fn n2_expectation(state: &RotorState) -> f64 {
    state.occupations().map(|(l, p)| (l * l) as f64 * p).sum()
}

/// Shannon entropy of the momentum distribution, in nats.
pub fn shannon_entropy(state: &RotorState) -> f64 {
    let s: f64 = state
        .occupations()
        .filter(|&(_, p)| p > 0.0)
        .map(|(_, p)| -p * p.ln())
        .sum();
    s + 0.0
}

/// `1 / sum_l |a_l|^4`
pub fn participation_ratio(state: &RotorState) -> f64 {
    let s: f64 = state.occupations().map(|(_, p)| p * p).sum();
    s.recip()
}

/// Largest `|l|` with `|a_l|^2 > delta`.
pub fn lmax(state: &RotorState, delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    state
        .occupations()
        .filter(|&(_, p)| p > delta)
        .map(|(l, _)| l.unsigned_abs())
        .max()
        .ok_or(Error::EmptyQualification(delta))
}

/// Perturbation threshold estimate `1 / lmax`.
pub fn threshold_estimate(state: &RotorState, delta: f64) -> Result<f64> {
    match lmax(state, delta)? {
        0 => Err(Error::ZeroLmax),
        l => Ok(1.0 / l as f64),
    }
}

/// `|<a|b>|^2`
pub fn fidelity(a: &RotorState, b: &RotorState) -> Result<f64> {
    a.same_basis(b)?;
    let overlap: num_complex::Complex64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes().iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr().min(1.0))
}

/// One row of an observable record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub kick: u64,
    pub time: f64,
    pub n2: f64,
    pub entropy: f64,
    pub pr: f64,
    pub lmax: u64,
    pub norm_err: f64,
    pub fidelity: Option<f64>,
}

impl Sample {
    /// Measures every observable on `state`. `lmax` is reported as 0 when no
    /// component exceeds `delta`.
    pub fn measure(
        state: &RotorState,
        kick: u64,
        time: f64,
        delta: f64,
        reference: Option<&RotorState>,
    ) -> Result<Self> {
        let lmax = match lmax(state, delta) {
            Ok(l) => l,
            Err(Error::EmptyQualification(_)) => 0,
            Err(e) => return Err(e),
        };
        let fidelity = reference.map(|r| fidelity(r, state)).transpose()?;
        Ok(Sample {
            kick,
            time,
            n2: n2_expectation(state),
            entropy: shannon_entropy(state),
            pr: participation_ratio(state),
            lmax,
            norm_err: (1.0 - state.norm()).abs(),
            fidelity,
        })
    }
}

/// Per-kick record. Rows are stored together so every column shares one
/// length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub samples: Vec<Sample>,
}

impl ObservableSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: Sample) {
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn kicks(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.kick).collect()
    }

    pub fn n2(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.n2).collect()
    }

    pub fn lmax(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.lmax).collect()
    }

    /// Samples with `kick >= from`.
    pub fn tail_from(&self, from: u64) -> ObservableSeries {
        ObservableSeries {
            samples: self.samples.iter().filter(|s| s.kick >= from).cloned().collect(),
        }
    }

    pub fn extend(&mut self, other: ObservableSeries) {
        self.samples.extend(other.samples);
    }
}
