//! Parameter scans over the echo protocol. Each grid point runs its reversed
//! leg with private state; the forward leg and the unperturbed baseline are
//! shared.

use rayon::prelude::*;

use super::{assemble_reversal, reverse_from, BreakPoint, ExperimentPlan, ReversalResult, RunContext};
use crate::error::{Error, Result, ScanSide};
use crate::observables::{self, ObservableSeries};
use crate::state::RotorState;

/// Presence thresholds at which the `1/lmax` estimate is always reported.
pub const ROBUSTNESS_DELTAS: [f64; 3] = [1e-6, 1e-8, 1e-10];

/// Final fidelity below which a resumed echo counts as irreversible.
pub const IRREVERSIBLE_FIDELITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub epsilon: f64,
    pub resume_kick: Option<u64>,
    pub final_fidelity: f64,
    pub irreversible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub lmax: u64,
    pub eps_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    /// Smallest grid epsilon whose echo resumes and ends below fidelity 1/2.
    pub eps_th_empirical: f64,
    /// `1/lmax` at the break for the plan's delta.
    pub eps_th_eq5: f64,
    /// `eps_th_empirical / eps_th_eq5`
    pub ratio: f64,
    /// `1/lmax` at the plan's delta and at [`ROBUSTNESS_DELTAS`].
    pub estimates: Vec<DeltaEstimate>,
    pub points: Vec<ScanPoint>,
    pub t_star: u64,
}

impl ScanReport {
    pub fn estimate(&self, delta: f64) -> Option<&DeltaEstimate> {
        self.estimates.iter().find(|e| e.delta == delta)
    }
}

fn delta_estimates(state: &RotorState, plan_delta: f64) -> Result<Vec<DeltaEstimate>> {
    let mut deltas = vec![plan_delta];
    deltas.extend(ROBUSTNESS_DELTAS.iter().filter(|&&d| d != plan_delta));
    deltas
        .into_iter()
        .map(|delta| {
            Ok(DeltaEstimate {
                delta,
                lmax: observables::lmax(state, delta)?,
                eps_th: observables::threshold_estimate(state, delta)?,
            })
        })
        .collect()
}

fn forward_to(ctx: &RunContext<'_>, t_star: u64) -> Result<BreakPoint> {
    let mut prop = ctx.plan.propagator()?;
    let mut state = ctx.initial.clone();
    let mut forward = ObservableSeries::new();
    ctx.forward(&mut prop, &mut state, 0, t_star, true, &mut forward)?;
    Ok(BreakPoint {
        state,
        forward,
        t_star,
    })
}

/// Runs the echo at every grid epsilon from a common break at `plan.t_star`
/// and compares the empirical threshold with `1/lmax`.
pub fn threshold_scan(plan: &ExperimentPlan, eps_grid: &[f64]) -> Result<ScanReport> {
    plan.validate()?;
    if eps_grid.is_empty() {
        return Err(Error::InvalidParam("epsilon grid is empty".into()));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParam("epsilon grid values must be positive".into()));
    }
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "epsilon grid must be strictly ascending".into(),
        ));
    }

    let ctx = RunContext::new(plan, plan.t_star)?;
    let bp = forward_to(&ctx, plan.t_star)?;
    let (baseline, _) = reverse_from(&ctx, &bp, 0.0)?;
    let detector = plan.detector();

    let points = eps_grid
        .par_iter()
        .map(|&epsilon| {
            let (leg, state) = reverse_from(&ctx, &bp, epsilon)?;
            let resume_kick = super::detect_resume(&leg, &baseline, detector)?;
            let final_fidelity = observables::fidelity(&ctx.initial, &state)?;
            Ok(ScanPoint {
                epsilon,
                resume_kick,
                final_fidelity,
                irreversible: resume_kick.is_some() && final_fidelity < IRREVERSIBLE_FIDELITY,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let Some(first) = points.iter().find(|p| p.irreversible) else {
        return Err(Error::InconclusiveScan(ScanSide::Lower));
    };
    if points.iter().all(|p| p.irreversible) {
        return Err(Error::InconclusiveScan(ScanSide::Upper));
    }
    let eps_th_empirical = first.epsilon;
    let eps_th_eq5 = observables::threshold_estimate(&bp.state, plan.delta)?;
    Ok(ScanReport {
        eps_th_empirical,
        eps_th_eq5,
        ratio: eps_th_empirical / eps_th_eq5,
        estimates: delta_estimates(&bp.state, plan.delta)?,
        points,
        t_star: plan.t_star,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TStarEntry {
    pub t_star: u64,
    pub result: ReversalResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TStarReport {
    pub epsilon: f64,
    pub entries: Vec<TStarEntry>,
}

impl TStarReport {
    /// `(t*, kicks from break to resume)` per grid point.
    pub fn delays(&self) -> Vec<(u64, Option<u64>)> {
        self.entries
            .iter()
            .map(|e| (e.t_star, e.result.resume_delay()))
            .collect()
    }
}

/// Breaks the same forward run at each `t*` and runs the echo with
/// `plan.epsilon` from each break.
pub fn tstar_scan(plan: &ExperimentPlan, t_stars: &[u64]) -> Result<TStarReport> {
    plan.validate_forward()?;
    if t_stars.is_empty() || t_stars.contains(&0) {
        return Err(Error::InvalidParam(
            "t* grid must be non-empty and positive".into(),
        ));
    }
    if t_stars.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("t* grid must be strictly ascending".into()));
    }
    let t_max = *t_stars.last().unwrap();
    let ctx = RunContext::new(plan, t_max)?;

    let mut prop = plan.propagator()?;
    let mut state = ctx.initial.clone();
    let mut forward = ObservableSeries::new();
    let mut breaks = Vec::with_capacity(t_stars.len());
    let mut at = 0;
    for &t in t_stars {
        ctx.forward(&mut prop, &mut state, at, t, at == 0, &mut forward)?;
        at = t;
        breaks.push(BreakPoint {
            state: state.clone(),
            forward: forward.clone(),
            t_star: t,
        });
    }

    let entries = breaks
        .par_iter()
        .map(|bp| {
            let baseline = reverse_from(&ctx, bp, 0.0)?;
            let reversed = if plan.epsilon == 0.0 {
                baseline.clone()
            } else {
                reverse_from(&ctx, bp, plan.epsilon)?
            };
            let result = assemble_reversal(&ctx, bp, &baseline.0, plan.epsilon, reversed)?;
            Ok(TStarEntry {
                t_star: bp.t_star,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TStarReport {
        epsilon: plan.epsilon,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeEntry {
    pub t_star: u64,
    pub lmax: u64,
    pub eps_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreezeReport {
    /// Detected localization time.
    pub tau: u64,
    pub entries: Vec<FreezeEntry>,
    /// `eps_th` strictly decreases across the grid points below `tau`.
    pub decreasing_before: bool,
    /// `(max - min) / first` of `eps_th` over the grid points above `tau`.
    pub variation_after: f64,
    /// `variation_after < 0.1`
    pub frozen: bool,
    /// Break used for the reversibility check (largest grid point).
    pub check_t_star: u64,
    /// `eps_th(check_t_star) / 10`
    pub check_epsilon: f64,
    pub check_fidelity: f64,
    /// `check_fidelity > 0.9`
    pub reversible: bool,
    /// Forward record used for the knee detection.
    pub forward: ObservableSeries,
}

/// Relative spread allowed for a frozen threshold.
pub const FREEZE_TOLERANCE: f64 = 0.1;
/// Fidelity a sub-threshold post-localization echo must keep.
pub const REVERSIBLE_FIDELITY: f64 = 0.9;

/// Periodic-rotor freeze experiment: `1/lmax` at breaks straddling the
/// localization time, plus a sub-threshold echo after localization.
pub fn localization_freeze(plan: &ExperimentPlan, t_star_grid: &[u64]) -> Result<FreezeReport> {
    plan.validate_forward()?;
    if !plan.schedule.is_periodic() {
        return Err(Error::InvalidParam(
            "localization_freeze needs a periodic schedule".into(),
        ));
    }
    if t_star_grid.is_empty() || t_star_grid.contains(&0) || t_star_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "t* grid must be positive and strictly ascending".into(),
        ));
    }
    let horizon = plan.total_kicks.max(*t_star_grid.last().unwrap());
    let ctx = RunContext::new(plan, horizon)?;

    let mut prop = plan.propagator()?;
    let mut state = ctx.initial.clone();
    let mut forward = ObservableSeries::new();
    let mut snapshots: Vec<(u64, RotorState)> = Vec::new();
    let mut at = 0;
    for &t in t_star_grid {
        ctx.forward(&mut prop, &mut state, at, t, at == 0, &mut forward)?;
        at = t;
        snapshots.push((t, state.clone()));
    }
    if at < horizon {
        ctx.forward(&mut prop, &mut state, at, horizon, at == 0, &mut forward)?;
    }

    let tau = super::detect_knee(
        &forward,
        plan.tolerances.plateau_window,
        plan.tolerances.plateau_slope_fraction,
    )
    .ok_or(Error::NoPlateau { horizon })?;

    let entries = snapshots
        .iter()
        .map(|(t, s)| {
            Ok(FreezeEntry {
                t_star: *t,
                lmax: observables::lmax(s, plan.delta)?,
                eps_th: observables::threshold_estimate(s, plan.delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let before: Vec<&FreezeEntry> = entries.iter().filter(|e| e.t_star < tau).collect();
    let after: Vec<&FreezeEntry> = entries.iter().filter(|e| e.t_star > tau).collect();
    if before.len() < 2 || after.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "t* grid must have at least two points on each side of tau = {tau} ({} below, {} above)",
            before.len(),
            after.len()
        )));
    }
    let decreasing_before = before.windows(2).all(|w| w[0].eps_th > w[1].eps_th);
    let (lo, hi) = after
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.eps_th), hi.max(e.eps_th))
        });
    let variation_after = (hi - lo) / after[0].eps_th;

    let (check_t_star, check_state) = snapshots.last().unwrap();
    let check_epsilon = entries.last().unwrap().eps_th / 10.0;
    let bp = BreakPoint {
        state: check_state.clone(),
        forward: ObservableSeries::new(),
        t_star: *check_t_star,
    };
    let (_, echoed) = reverse_from(&ctx, &bp, check_epsilon)?;
    let check_fidelity = observables::fidelity(&ctx.initial, &echoed)?;

    Ok(FreezeReport {
        tau,
        entries,
        decreasing_before,
        variation_after,
        frozen: variation_after < FREEZE_TOLERANCE,
        check_t_star: *check_t_star,
        check_epsilon,
        check_fidelity,
        reversible: check_fidelity > REVERSIBLE_FIDELITY,
        forward,
    })
}
