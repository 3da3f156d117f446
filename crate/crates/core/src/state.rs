//! Rotor wavefunction in the momentum basis.
//!
//! Amplitudes `a_l` are stored for `l = -L ..= L` at vector index `l + L`.
//! The angle representation is never stored; the spectral propagator visits it
//! transiently.

use std::borrow::Cow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cutoff for long runs: `L = 2^13`, dimension 16385.
pub const DEFAULT_HALF_WIDTH: usize = 1 << 13;
/// Allowed `|1 - norm|` over a full run.
pub const DEFAULT_NORM_TOL: f64 = 1e-10;
/// Allowed `|a_{-L}|^2 + |a_{+L}|^2`.
pub const DEFAULT_EDGE_BUDGET: f64 = 1e-10;

/// How to prepare the initial wavepacket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSpec {
    /// All weight on a single momentum level.
    MomentumEigenstate { l0: i64 },
    /// Real Gaussian amplitudes whose occupation `|a_l|^2` has standard
    /// deviation `width` around `center`.
    GaussianPacket { center: i64, width: f64 },
}

impl Default for InitialStateSpec {
    fn default() -> Self {
        InitialStateSpec::MomentumEigenstate { l0: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub norm: f64,
    pub edge_mass: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorState {
    amplitudes: Vec<Complex64>,
    half_width: usize,
    hbar: f64,
    /// Pending phase gradient: the physical amplitudes are
    /// `amplitudes[l] * exp(i tilt l)`. Kept separate so that a phase-only
    /// perturbation leaves the stored moduli, and every occupation-based
    /// observable, bit-identical.
    tilt: f64,
    pub(crate) time: f64,
    pub(crate) kick_count: i64,
}

impl RotorState {
    pub fn new(spec: &InitialStateSpec, half_width: usize, hbar: f64) -> Result<Self> {
        check_basis(half_width, hbar)?;
        let dim = 2 * half_width + 1;
        let lw = half_width as i64;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];

        match *spec {
            InitialStateSpec::MomentumEigenstate { l0 } => {
                if l0.abs() >= lw {
                    return Err(Error::InvalidSpec(format!(
                        "momentum eigenstate l0 = {l0} must satisfy |l0| < L = {half_width}"
                    )));
                }
                amplitudes[(l0 + lw) as usize] = Complex64::new(1.0, 0.0);
            }
            InitialStateSpec::GaussianPacket { center, width } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                if (center.abs() as f64) + 4.0 * width >= half_width as f64 {
                    return Err(Error::InvalidSpec(format!(
                        "gaussian packet |{center}| + 4*{width} does not fit inside L = {half_width}"
                    )));
                }
                // |a_l|^2 ~ exp(-(l - c)^2 / (2 w^2))
                let inv = 1.0 / (4.0 * width * width);
                for (idx, a) in amplitudes.iter_mut().enumerate() {
                    let d = (idx as i64 - lw - center) as f64;
                    *a = Complex64::new((-d * d * inv).exp(), 0.0);
                }
                let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                let scale = norm.sqrt().recip();
                for a in &mut amplitudes {
                    *a *= scale;
                }
            }
        }

        Ok(RotorState {
            amplitudes,
            half_width,
            hbar,
            tilt: 0.0,
            time: 0.0,
            kick_count: 0,
        })
    }

    /// Builds a state from raw amplitudes (length `2L + 1`), normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>, hbar: f64) -> Result<Self> {
        let len = amplitudes.len();
        if len < 3 || len.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "amplitude vector length {len} is not 2L + 1 with L >= 1"
            )));
        }
        let half_width = (len - 1) / 2;
        check_basis(half_width, hbar)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "amplitudes have non-normalizable squared norm {norm}"
            )));
        }
        let scale = norm.sqrt().recip();
        let amplitudes = amplitudes.into_iter().map(|a| a * scale).collect();
        Ok(RotorState {
            amplitudes,
            half_width,
            hbar,
            tilt: 0.0,
            time: 0.0,
            kick_count: 0,
        })
    }

    /// Physical amplitudes from `l = -L` to `l = L`.
    pub fn amplitudes(&self) -> Cow<'_, [Complex64]> {
        if self.tilt == 0.0 {
            Cow::Borrowed(&self.amplitudes)
        } else {
            let mut v = self.amplitudes.clone();
            apply_tilt(&mut v, self.half_width, self.tilt);
            Cow::Owned(v)
        }
    }

    /// Mutable physical amplitudes; folds any pending tilt in first.
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        self.settle();
        &mut self.amplitudes
    }

    /// Folds the pending phase gradient into the stored amplitudes.
    pub(crate) fn settle(&mut self) {
        if self.tilt != 0.0 {
            apply_tilt(&mut self.amplitudes, self.half_width, self.tilt);
            self.tilt = 0.0;
        }
    }

    /// Multiplies every `a_l` by `exp(i epsilon l)` without touching the
    /// stored moduli.
    pub(crate) fn tilt_phase(&mut self, epsilon: f64) {
        self.tilt += epsilon;
    }

    /// Phase gradient not yet folded into the stored amplitudes.
    pub fn pending_tilt(&self) -> f64 {
        self.tilt
    }

    /// Amplitude of momentum level `l`, `None` outside the basis.
    pub fn amplitude(&self, l: i64) -> Option<Complex64> {
        let idx = l + self.half_width as i64;
        usize::try_from(idx)
            .ok()
            .and_then(|i| self.amplitudes.get(i).copied())
            .map(|a| {
                if self.tilt == 0.0 {
                    a
                } else {
                    let (s, c) = (l as f64 * self.tilt).sin_cos();
                    a * Complex64::new(c, s)
                }
            })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Net kicks applied: forward steps minus adjoint steps.
    pub fn kick_count(&self) -> i64 {
        self.kick_count
    }

    /// Iterates `(l, |a_l|^2)` over the basis.
    pub fn occupations(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let lw = self.half_width as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(move |(i, a)| (i as i64 - lw, a.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn edge_mass(&self) -> f64 {
        self.amplitudes[0].norm_sqr() + self.amplitudes[self.amplitudes.len() - 1].norm_sqr()
    }

    /// Reports normalization drift and edge occupancy without touching the
    /// amplitudes. `ok` requires both `|1 - norm|` and the edge mass to be
    /// within `tol`.
    pub fn check_norm(&self, tol: f64) -> NormReport {
        let norm = self.norm();
        let edge_mass = self.edge_mass();
        NormReport {
            norm,
            edge_mass,
            ok: (1.0 - norm).abs() <= tol && edge_mass <= tol,
        }
    }

    pub(crate) fn same_basis(&self, other: &RotorState) -> Result<()> {
        if self.half_width != other.half_width {
            return Err(Error::DimensionMismatch(format!(
                "L = {} vs L = {}",
                self.half_width, other.half_width
            )));
        }
        if self.hbar != other.hbar {
            return Err(Error::DimensionMismatch(format!(
                "hbar = {} vs hbar = {}",
                self.hbar, other.hbar
            )));
        }
        Ok(())
    }
}

fn check_basis(half_width: usize, hbar: f64) -> Result<()> {
    if half_width < 1 {
        return Err(Error::InvalidSpec("basis half-width L must be >= 1".into()));
    }
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidSpec(format!("hbar must be positive, got {hbar}")));
    }
    Ok(())
}

fn apply_tilt(amplitudes: &mut [Complex64], half_width: usize, tilt: f64) {
    let lw = half_width as i64;
    for (idx, a) in amplitudes.iter_mut().enumerate() {
        let (s, c) = ((idx as i64 - lw) as f64 * tilt).sin_cos();
        *a *= Complex64::new(c, s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_eigenstate_is_a_delta() {
        let s = RotorState::new(&InitialStateSpec::MomentumEigenstate { l0: 0 }, 8, 1.0).unwrap();
        assert_eq!(s.dim(), 17);
        for (l, p) in s.occupations() {
            assert_eq!(p, if l == 0 { 1.0 } else { 0.0 });
        }
        assert_eq!(s.amplitude(0), Some(Complex64::new(1.0, 0.0)));
        assert_eq!(s.amplitude(9), None);
        assert_eq!(s.time(), 0.0);
        assert_eq!(s.kick_count(), 0);
    }

    #[test]
    fn gaussian_is_normalized_and_spread() {
        let s = RotorState::new(
            &InitialStateSpec::GaussianPacket {
                center: 0,
                width: 2.0,
            },
            64,
            1.0,
        )
        .unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        // direct sum of l^2 |a_l|^2 over the raw vector
        let mut n2 = 0.0;
        for (i, a) in s.amplitudes().iter().enumerate() {
            let l = i as f64 - 64.0;
            n2 += l * l * (a.re * a.re + a.im * a.im);
        }
        assert!(n2 > 0.0);
        // sampled Gaussian with sigma = 2 has variance 4 to many digits
        assert!((n2 - 4.0).abs() < 1e-9, "{n2}");
    }

    #[test]
    fn constructor_is_bit_reproducible() {
        let spec = InitialStateSpec::GaussianPacket {
            center: 3,
            width: 5.5,
        };
        let a = RotorState::new(&spec, 100, 0.7).unwrap();
        let b = RotorState::new(&spec, 100, 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_specs() {
        let m = |l0| InitialStateSpec::MomentumEigenstate { l0 };
        assert!(matches!(
            RotorState::new(&m(0), 0, 1.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            RotorState::new(&m(0), 4, 0.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            RotorState::new(&m(0), 4, -1.0),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            RotorState::new(&m(4), 4, 1.0),
            Err(Error::InvalidSpec(_))
        ));
        let g = |c, w| InitialStateSpec::GaussianPacket { center: c, width: w };
        assert!(RotorState::new(&g(0, 0.0), 64, 1.0).is_err());
        assert!(RotorState::new(&g(0, f64::NAN), 64, 1.0).is_err());
        // |l0| + 4 sigma must stay strictly below L
        assert!(RotorState::new(&g(0, 16.0), 64, 1.0).is_err());
        assert!(RotorState::new(&g(60, 1.0), 64, 1.0).is_err());
        assert!(RotorState::new(&g(59, 1.0), 64, 1.0).is_ok());
    }

    #[test]
    fn norm_report_on_fresh_state() {
        let s = RotorState::new(&InitialStateSpec::default(), 16, 1.0).unwrap();
        let r = s.check_norm(1e-8);
        assert_eq!(r.norm, 1.0);
        assert_eq!(r.edge_mass, 0.0);
        assert!(r.ok);
    }

    #[test]
    fn norm_report_flags_edge_occupancy() {
        // a_{+L} = 0.5, remaining weight on l = 0
        let l = 8usize;
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * l + 1];
        amps[2 * l] = Complex64::new(0.5, 0.0);
        amps[l] = Complex64::new(0.75f64.sqrt(), 0.0);
        let s = RotorState::from_amplitudes(amps, 1.0).unwrap();
        let before = s.clone();
        let r = s.check_norm(1e-8);
        assert!((r.edge_mass - 0.25).abs() < 1e-15);
        assert!(!r.ok);
        assert_eq!(s, before);
    }

    #[test]
    fn from_amplitudes_validates_length() {
        let z = Complex64::new(0.0, 0.0);
        assert!(RotorState::from_amplitudes(vec![z; 4], 1.0).is_err());
        assert!(RotorState::from_amplitudes(vec![z; 1], 1.0).is_err());
        assert!(RotorState::from_amplitudes(vec![z; 5], 1.0).is_err());
    }

    #[test]
    fn pending_tilt_matches_eager_phases() {
        let spec = InitialStateSpec::GaussianPacket {
            center: 2,
            width: 3.0,
        };
        let mut s = RotorState::new(&spec, 32, 1.0).unwrap();
        let eager: Vec<Complex64> = s
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| a * Complex64::from_polar(1.0, (i as f64 - 32.0) * 0.3))
            .collect();
        let before: Vec<u64> = s.occupations().map(|(_, p)| p.to_bits()).collect();
        s.tilt_phase(0.3);
        let after: Vec<u64> = s.occupations().map(|(_, p)| p.to_bits()).collect();
        assert_eq!(after, before);
        for (a, b) in s.amplitudes().iter().zip(&eager) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!((s.amplitude(5).unwrap() - eager[37]).norm() < 1e-15);
        s.settle();
        assert_eq!(s.pending_tilt(), 0.0);
        for (a, b) in s.amplitudes().iter().zip(&eager) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
