//! Self-check of the step kernels on a small basis: dense-matrix comparison,
//! kernel cross-check, adjoint round trip and norm conservation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::propagator::{
    build_band, default_grid, step_adjoint, step_bessel, step_spectral, AdjointKernel, BesselBand,
    StepParams, DEFAULT_BAND_TOL,
};
use crate::state::RotorState;

pub const KICK_ARGS: [f64; 3] = [0.5, 2.0, 5.0];
pub const DENSE_TOL: f64 = 1e-12;
pub const CROSS_TOL: f64 = 1e-10;
pub const ROUND_TRIP_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

/// `J_n(x)` from the integral `(1/2pi) int cos(n t - x sin t) dt` by the
/// trapezoid rule.
fn quadrature_j(n: i64, x: f64) -> f64 {
    const PTS: usize = 1024;
    let h = std::f64::consts::TAU / PTS as f64;
    (0..PTS)
        .map(|k| {
            let t = k as f64 * h;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / PTS as f64
}

fn dense_step(a: &[Complex64], half_width: usize, p: &StepParams) -> Vec<Complex64> {
    let l = half_width as i64;
    let x = p.kick_arg();
    let bessel: Vec<f64> = (-2 * l..=2 * l).map(|m| quadrature_j(m, x)).collect();
    let i_pow = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    (-l..=l)
        .map(|row| {
            (-l..=l)
                .map(|j| {
                    let m = j - row;
                    let phase = Complex64::from_polar(1.0, -p.hbar * (j * j) as f64 * p.dt / 2.0);
                    i_pow[m.rem_euclid(4) as usize]
                        * phase
                        * bessel[(m + 2 * l) as usize]
                        * a[(j + l) as usize]
                })
                .sum()
        })
        .collect()
}

fn random_state(rng: &mut ChaCha8Rng, half_width: usize, hbar: f64) -> Result<RotorState> {
    let amps = (0..2 * half_width + 1)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    RotorState::from_amplitudes(amps, hbar)
}

fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Runs every check at basis half-width `half_width` with a seeded RNG.
pub fn run_oracle_suite(half_width: usize, seed: u64) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport::default();
    let hbar = 1.0;
    let dt = 1.618_033_988_749_895;
    for &x in &KICK_ARGS {
        let p = StepParams::new(x * hbar, hbar, dt)?;
        let state = random_state(&mut rng, half_width, hbar)?;

        let full = BesselBand::with_half_bandwidth(x, 2 * half_width);
        let exact = step_bessel(&state, &p, &full)?;
        let dense = dense_step(&state.amplitudes(), half_width, &p);
        report.checks.push(Check {
            name: format!("dense matrix vs untruncated band, K/hbar = {x}"),
            value: max_abs(&exact.amplitudes(), &dense),
            tol: DENSE_TOL,
        });

        let alias = build_band(x, DEFAULT_BAND_TOL * DEFAULT_BAND_TOL)?;
        let grid = default_grid(half_width, alias.half_bandwidth());
        let spectral = step_spectral(&state, &p, grid)?;
        report.checks.push(Check {
            name: format!("spectral vs untruncated band (L2), K/hbar = {x}"),
            value: l2(&spectral.amplitudes(), &exact.amplitudes()),
            tol: CROSS_TOL,
        });

        let exact_grid = 2 * half_width + 1;
        let mut s = state.clone();
        for _ in 0..100 {
            s = step_spectral(&s, &p, exact_grid)?;
        }
        report.checks.push(Check {
            name: format!("norm after 100 circulant steps, K/hbar = {x}"),
            value: (s.norm() - 1.0).abs(),
            tol: NORM_TOL,
        });
        for _ in 0..100 {
            s = step_adjoint(&s, &p, AdjointKernel::Spectral { grid: exact_grid })?;
        }
        report.checks.push(Check {
            name: format!("forward/adjoint round trip over 100 steps, K/hbar = {x}"),
            value: max_abs(&s.amplitudes(), &state.amplitudes()),
            tol: ROUND_TRIP_TOL,
        });
    }
    Ok(report)
}
