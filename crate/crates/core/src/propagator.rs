//! One-step quantum map: free rotation over the gap preceding a kick, then the
//! kick itself,
//!
//! ```text
//! a_l <- sum_j i^{-(j-l)} exp(-i hbar j^2 dt / 2) J_{j-l}(K/hbar) a_j
//! ```
//!
//! Two independent kernels implement it. The banded kernel applies the Bessel
//! coefficients directly. The spectral kernel applies the free phase in the
//! momentum basis and the kick phase `exp(-i (K/hbar) cos theta)` on an angle
//! grid, moving between the two with FFTs. Adjoint steps apply the conjugate
//! kick first and the conjugate free phase second.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_with_tails;
use crate::error::{Error, Result};
use crate::state::RotorState;

/// Default Bessel tail tolerance.
pub const DEFAULT_BAND_TOL: f64 = 1e-14;
/// Default kick strength `K`.
pub const DEFAULT_KICK_STRENGTH: f64 = 5.0;
/// Default effective Planck constant.
pub const DEFAULT_HBAR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub kick_strength: f64,
    pub hbar: f64,
    pub dt: f64,
}

impl StepParams {
    /// `K = 0` is accepted and gives pure free rotation.
    pub fn new(kick_strength: f64, hbar: f64, dt: f64) -> Result<Self> {
        if !(kick_strength >= 0.0 && kick_strength.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "K must be >= 0, got {kick_strength}"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParam(format!("hbar must be > 0, got {hbar}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {dt}")));
        }
        Ok(StepParams {
            kick_strength,
            hbar,
            dt,
        })
    }

    pub fn kick_arg(&self) -> f64 {
        self.kick_strength / self.hbar
    }
}

/// `exp(-i hbar l^2 dt / 2)`. Both kernels share this so their free phases
/// agree bit for bit.
#[inline]
pub fn free_phase(hbar: f64, dt: f64, l: i64) -> Complex64 {
    let alpha = 0.5 * hbar * dt;
    let arg = alpha * (l * l) as f64;
    let (s, c) = arg.sin_cos();
    Complex64::new(c, -s)
}

/// `i^{-m}`
fn i_pow_neg(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Kick coefficients `i^{-m} J_m(K/hbar)` for `|m| <= B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselBand {
    kick_arg: f64,
    half_bandwidth: usize,
    coefficients: Vec<Complex64>,
    tail_mass: f64,
}

impl BesselBand {
    /// Band of an explicit half-width, however large.
    pub fn with_half_bandwidth(kick_arg: f64, half_bandwidth: usize) -> Self {
        let (j, tails) = bessel_j_with_tails(kick_arg, half_bandwidth);
        Self::assemble(kick_arg, &j, half_bandwidth, tails[half_bandwidth])
    }

    fn assemble(kick_arg: f64, j: &[f64], b: usize, tail_mass: f64) -> Self {
        let bi = b as i64;
        let coefficients = (-bi..=bi)
            .map(|m| {
                let jm = j[m.unsigned_abs() as usize];
                let jm = if m < 0 && m % 2 != 0 { -jm } else { jm };
                i_pow_neg(m) * jm
            })
            .collect();
        BesselBand {
            kick_arg,
            half_bandwidth: b,
            coefficients,
            tail_mass,
        }
    }

    pub fn kick_arg(&self) -> f64 {
        self.kick_arg
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    /// `sum_{|m| > B} J_m^2`
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `i^{-m} J_m`, zero outside the band.
    pub fn coefficient(&self, m: i64) -> Complex64 {
        if m.unsigned_abs() as usize > self.half_bandwidth {
            return Complex64::new(0.0, 0.0);
        }
        self.coefficients[(m + self.half_bandwidth as i64) as usize]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `sum_{|m| <= B} J_m^2`
    pub fn band_mass(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Smallest band whose discarded tail `sum_{|m|>B} J_m(K/hbar)^2` is below
/// `tol`.
pub fn build_band(kick_arg: f64, tol: f64) -> Result<BesselBand> {
    if !(kick_arg >= 0.0 && kick_arg.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "K/hbar must be >= 0, got {kick_arg}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "band tolerance must be > 0, got {tol}"
        )));
    }
    let mut reach = (kick_arg.ceil() as usize) + 32;
    loop {
        let (j, tails) = bessel_j_with_tails(kick_arg, reach);
        if let Some(b) = tails.iter().position(|&t| t < tol) {
            return Ok(BesselBand::assemble(kick_arg, &j, b, tails[b]));
        }
        reach *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    Bessel,
    #[default]
    Spectral,
}

/// Engine settings beyond the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    pub band_tol: f64,
    /// Spectral grid size; chosen from `L` and the band when `None`.
    pub grid: Option<usize>,
    /// Abort a step whose edge mass exceeds this. `None` disables the check.
    pub edge_budget: Option<f64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            band_tol: DEFAULT_BAND_TOL,
            grid: None,
            edge_budget: Some(crate::state::DEFAULT_EDGE_BUDGET),
        }
    }
}

/// Wrapped Bessel orders enter the spectral kernel as amplitudes, not as
/// squared tail mass, so the grid padding uses the squared tolerance.
fn alias_tol(band_tol: f64) -> f64 {
    (band_tol * band_tol).max(1e-300)
}

/// Smallest power of two that holds `2L + 1` levels plus the kick band
/// without wrap-around between the basis edges.
pub fn default_grid(half_width: usize, band_half_width: usize) -> usize {
    (2 * half_width + 1 + band_half_width).next_power_of_two()
}

struct SpectralKernel {
    grid: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `exp(-i (K/hbar) cos(2 pi k / N))`
    kick: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralKernel {
    fn new(kick_arg: f64, grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid);
        let inv = planner.plan_fft_inverse(grid);
        let kick = (0..grid)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / grid as f64;
                let (s, c) = (kick_arg * theta.cos()).sin_cos();
                Complex64::new(c, -s)
            })
            .collect();
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        SpectralKernel {
            grid,
            fwd,
            inv,
            kick,
            buf: vec![Complex64::new(0.0, 0.0); grid],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    #[inline]
    fn slot(&self, l: i64) -> usize {
        l.rem_euclid(self.grid as i64) as usize
    }

    /// Loads `a_l * w_l` onto the grid, applies the kick phase (or its
    /// conjugate) in angle space and returns to momentum space.
    fn kick(&mut self, amps: &mut [Complex64], phases: &[Complex64], adjoint: bool) {
        let lw = (amps.len() / 2) as i64;
        self.buf.fill(Complex64::new(0.0, 0.0));
        for (idx, a) in amps.iter().enumerate() {
            let l = idx as i64 - lw;
            let slot = self.slot(l);
            self.buf[slot] = if adjoint {
                *a
            } else {
                *a * phases[l.unsigned_abs() as usize]
            };
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        if adjoint {
            for (v, k) in self.buf.iter_mut().zip(&self.kick) {
                *v *= k.conj();
            }
        } else {
            for (v, k) in self.buf.iter_mut().zip(&self.kick) {
                *v *= k;
            }
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv_n = 1.0 / self.grid as f64;
        for (idx, a) in amps.iter_mut().enumerate() {
            let l = idx as i64 - lw;
            let v = self.buf[self.slot(l)] * inv_n;
            *a = if adjoint {
                v * phases[l.unsigned_abs() as usize].conj()
            } else {
                v
            };
        }
    }
}

enum Kernel {
    Bessel {
        band: BesselBand,
        scratch: Vec<Complex64>,
    },
    Spectral(SpectralKernel),
}

/// Reusable step engine bound to one `(K, hbar, L)`.
pub struct Propagator {
    kick_strength: f64,
    hbar: f64,
    half_width: usize,
    band_half_width: usize,
    edge_budget: Option<f64>,
    kernel: Kernel,
    /// Free phases for `|l| = 0 ..= L` at `phase_dt`.
    phases: Vec<Complex64>,
    phase_dt: Option<u64>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("kind", &self.kind())
            .field("kick_strength", &self.kick_strength)
            .field("hbar", &self.hbar)
            .field("half_width", &self.half_width)
            .field("band_half_width", &self.band_half_width)
            .field("grid", &self.grid())
            .finish()
    }
}

impl Propagator {
    pub fn new(
        kind: PropagatorKind,
        kick_strength: f64,
        hbar: f64,
        half_width: usize,
        opts: EngineOptions,
    ) -> Result<Self> {
        StepParams::new(kick_strength, hbar, 1.0)?;
        if half_width < 1 {
            return Err(Error::InvalidParam("L must be >= 1".into()));
        }
        let kick_arg = kick_strength / hbar;
        let band = build_band(kick_arg, opts.band_tol)?;
        match kind {
            PropagatorKind::Bessel => Ok(Self::with_band(
                kick_strength,
                hbar,
                half_width,
                band,
                opts.edge_budget,
            )),
            PropagatorKind::Spectral => {
                let grid = match opts.grid {
                    Some(g) => g,
                    None => {
                        let alias = build_band(kick_arg, alias_tol(opts.band_tol))?;
                        default_grid(half_width, alias.half_bandwidth())
                    }
                };
                let mut p = Self::spectral(kick_strength, hbar, half_width, grid)?;
                p.band_half_width = band.half_bandwidth();
                p.edge_budget = opts.edge_budget;
                Ok(p)
            }
        }
    }

    /// Banded kernel with an explicit band. No leakage budget unless given.
    pub fn with_band(
        kick_strength: f64,
        hbar: f64,
        half_width: usize,
        band: BesselBand,
        edge_budget: Option<f64>,
    ) -> Self {
        Propagator {
            kick_strength,
            hbar,
            half_width,
            band_half_width: band.half_bandwidth(),
            edge_budget,
            kernel: Kernel::Bessel {
                band,
                scratch: vec![Complex64::new(0.0, 0.0); 2 * half_width + 1],
            },
            phases: Vec::new(),
            phase_dt: None,
        }
    }

    /// Spectral kernel on an explicit grid. No leakage budget.
    pub fn spectral(kick_strength: f64, hbar: f64, half_width: usize, grid: usize) -> Result<Self> {
        StepParams::new(kick_strength, hbar, 1.0)?;
        let required = 2 * half_width + 1;
        if grid < required {
            return Err(Error::GridTooSmall { grid, required });
        }
        Ok(Propagator {
            kick_strength,
            hbar,
            half_width,
            band_half_width: 0,
            edge_budget: None,
            kernel: Kernel::Spectral(SpectralKernel::new(kick_strength / hbar, grid)),
            phases: Vec::new(),
            phase_dt: None,
        })
    }

    pub fn kind(&self) -> PropagatorKind {
        match self.kernel {
            Kernel::Bessel { .. } => PropagatorKind::Bessel,
            Kernel::Spectral(_) => PropagatorKind::Spectral,
        }
    }

    pub fn kick_strength(&self) -> f64 {
        self.kick_strength
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Grid size of the spectral kernel.
    pub fn grid(&self) -> Option<usize> {
        match &self.kernel {
            Kernel::Spectral(k) => Some(k.grid),
            Kernel::Bessel { .. } => None,
        }
    }

    /// Half-width of the Bessel band in use (banded kernel) or the band the
    /// grid was sized for (spectral kernel).
    pub fn band_half_width(&self) -> usize {
        self.band_half_width
    }

    pub fn edge_budget(&self) -> Option<f64> {
        self.edge_budget
    }

    pub fn set_edge_budget(&mut self, budget: Option<f64>) {
        self.edge_budget = budget;
    }

    fn check_state(&self, state: &RotorState, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {dt}")));
        }
        if state.half_width() != self.half_width {
            return Err(Error::DimensionMismatch(format!(
                "state has L = {}, propagator L = {}",
                state.half_width(),
                self.half_width
            )));
        }
        if state.hbar() != self.hbar {
            return Err(Error::DimensionMismatch(format!(
                "state has hbar = {}, propagator hbar = {}",
                state.hbar(),
                self.hbar
            )));
        }
        Ok(())
    }

    fn update_phases(&mut self, dt: f64) {
        if self.phase_dt == Some(dt.to_bits()) {
            return;
        }
        let hbar = self.hbar;
        self.phases.clear();
        self.phases
            .extend((0..=self.half_width as i64).map(|l| free_phase(hbar, dt, l)));
        self.phase_dt = Some(dt.to_bits());
    }

    fn check_leakage(&self, state: &RotorState) -> Result<()> {
        if let Some(budget) = self.edge_budget {
            let edge_mass = state.edge_mass();
            if edge_mass > budget {
                return Err(Error::Leakage {
                    edge_mass,
                    budget,
                    kick: state.kick_count(),
                });
            }
        }
        Ok(())
    }

    /// Free evolution over `dt`, then one kick.
    pub fn forward(&mut self, state: &mut RotorState, dt: f64) -> Result<()> {
        self.check_state(state, dt)?;
        self.update_phases(dt);
        let phases = &self.phases;
        match &mut self.kernel {
            Kernel::Bessel { band, scratch } => banded_forward(band, phases, state.amplitudes_mut(), scratch),
            Kernel::Spectral(k) => k.kick(state.amplitudes_mut(), phases, false),
        }
        state.time += dt;
        state.kick_count += 1;
        self.check_leakage(state)
    }

    /// Exact inverse of [`Propagator::forward`] for the same `dt`.
    pub fn adjoint(&mut self, state: &mut RotorState, dt: f64) -> Result<()> {
        self.check_state(state, dt)?;
        self.update_phases(dt);
        let phases = &self.phases;
        match &mut self.kernel {
            Kernel::Bessel { band, scratch } => banded_adjoint(band, phases, state.amplitudes_mut(), scratch),
            Kernel::Spectral(k) => k.kick(state.amplitudes_mut(), phases, true),
        }
        state.time -= dt;
        state.kick_count -= 1;
        self.check_leakage(state)
    }
}

fn banded_forward(band: &BesselBand, phases: &[Complex64], amps: &mut [Complex64], out: &mut [Complex64]) {
    let n = amps.len() as i64;
    let lw = n / 2;
    for (idx, a) in amps.iter_mut().enumerate() {
        let l = idx as i64 - lw;
        *a *= phases[l.unsigned_abs() as usize];
    }
    let b = band.half_bandwidth as i64;
    for (idx, o) in out.iter_mut().enumerate() {
        let i = idx as i64;
        let lo = (i - b).max(0);
        let hi = (i + b).min(n - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in lo..=hi {
            // coefficient index m = j - l
            acc += band.coefficients[(j - i + b) as usize] * amps[j as usize];
        }
        *o = acc;
    }
    amps.copy_from_slice(out);
}

fn banded_adjoint(band: &BesselBand, phases: &[Complex64], amps: &mut [Complex64], out: &mut [Complex64]) {
    let n = amps.len() as i64;
    let lw = n / 2;
    let b = band.half_bandwidth as i64;
    for (idx, o) in out.iter_mut().enumerate() {
        let i = idx as i64;
        let lo = (i - b).max(0);
        let hi = (i + b).min(n - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in lo..=hi {
            acc += band.coefficients[(j - i + b) as usize].conj() * amps[j as usize];
        }
        *o = acc * phases[(i - lw).unsigned_abs() as usize].conj();
    }
    amps.copy_from_slice(out);
}

fn check_band(p: &StepParams, band: &BesselBand) -> Result<()> {
    if band.kick_arg() != p.kick_arg() {
        return Err(Error::BandMismatch {
            band: band.kick_arg(),
            step: p.kick_arg(),
        });
    }
    Ok(())
}

/// One forward step with the banded kernel.
pub fn step_bessel(state: &RotorState, p: &StepParams, band: &BesselBand) -> Result<RotorState> {
    check_band(p, band)?;
    let mut out = state.clone();
    Propagator::with_band(p.kick_strength, p.hbar, state.half_width(), band.clone(), None)
        .forward(&mut out, p.dt)?;
    Ok(out)
}

/// One forward step with the spectral kernel on an `n_grid`-point angle grid.
pub fn step_spectral(state: &RotorState, p: &StepParams, n_grid: usize) -> Result<RotorState> {
    let mut out = state.clone();
    Propagator::spectral(p.kick_strength, p.hbar, state.half_width(), n_grid)?.forward(&mut out, p.dt)?;
    Ok(out)
}

/// Which kernel an adjoint step should use.
#[derive(Debug, Clone, Copy)]
pub enum AdjointKernel<'a> {
    Bessel(&'a BesselBand),
    Spectral { grid: usize },
}

/// One adjoint step, the inverse of the matching forward step.
pub fn step_adjoint(state: &RotorState, p: &StepParams, kernel: AdjointKernel<'_>) -> Result<RotorState> {
    let mut out = state.clone();
    let mut prop = match kernel {
        AdjointKernel::Bessel(band) => {
            check_band(p, band)?;
            Propagator::with_band(p.kick_strength, p.hbar, state.half_width(), band.clone(), None)
        }
        AdjointKernel::Spectral { grid } => {
            Propagator::spectral(p.kick_strength, p.hbar, state.half_width(), grid)?
        }
    };
    prop.adjoint(&mut out, p.dt)?;
    Ok(out)
}
