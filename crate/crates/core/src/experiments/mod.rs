//! Forward runs, break-time reversal echoes, and the scans built on them.

mod detect;
mod scan;

use serde::{Deserialize, Serialize};

pub use detect::{
    detect_knee, detect_resume, diffusion_check, linear_fit, plateau_check, DiffusionCheck, LinearFit,
    PlateauCheck, ResumeDetector,
};
pub use scan::{
    localization_freeze, threshold_scan, tstar_scan, DeltaEstimate, FreezeEntry, FreezeReport, ScanPoint,
    ScanReport, TStarEntry, TStarReport, ROBUSTNESS_DELTAS,
};

use crate::error::{Error, Result};
use crate::observables::{self, ObservableSeries, Sample};
use crate::propagator::{
    EngineOptions, Propagator, PropagatorKind, DEFAULT_BAND_TOL, DEFAULT_HBAR, DEFAULT_KICK_STRENGTH,
};
use crate::schedule::{build_schedule, ScheduleMode};
use crate::state::{InitialStateSpec, RotorState, DEFAULT_EDGE_BUDGET, DEFAULT_HALF_WIDTH, DEFAULT_NORM_TOL};

pub const DEFAULT_T_STAR: u64 = 10_000;
pub const DEFAULT_EPSILON: f64 = 3e-3;

/// Numerical budgets and detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Allowed `|1 - norm|` at every sample.
    pub norm: f64,
    /// Allowed edge occupancy after every step.
    pub edge_mass: f64,
    /// Bessel tail mass discarded by the band.
    pub band: f64,
    /// Relative `<n^2>` deviation that counts as departure from the retrace.
    pub resume_rho: f64,
    /// Consecutive samples the deviation must persist.
    pub resume_window: usize,
    /// Floor on the baseline `<n^2>` used as the deviation denominator.
    pub resume_floor: f64,
    /// Window, in samples, for the localization-knee slope fits.
    pub plateau_window: usize,
    /// Knee when the trailing slope drops below this fraction of the
    /// initial slope.
    pub plateau_slope_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: DEFAULT_NORM_TOL,
            edge_mass: DEFAULT_EDGE_BUDGET,
            band: DEFAULT_BAND_TOL,
            resume_rho: 0.1,
            resume_window: 5,
            resume_floor: 1.0,
            plateau_window: 50,
            plateau_slope_fraction: 0.05,
        }
    }
}

/// Declarative description of a forward / reverse / perturb protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub schedule: ScheduleMode,
    #[serde(rename = "K")]
    pub kick_strength: f64,
    pub hbar: f64,
    pub initial: InitialStateSpec,
    /// Momentum cutoff `L`.
    #[serde(rename = "L")]
    pub basis_half_width: usize,
    /// Spectral grid override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    pub t_star: u64,
    pub epsilon: f64,
    pub total_kicks: u64,
    pub record_every: u64,
    pub delta: f64,
    pub propagator: PropagatorKind,
    pub tolerances: Tolerances,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            schedule: ScheduleMode::quasiperiodic(),
            kick_strength: DEFAULT_KICK_STRENGTH,
            hbar: DEFAULT_HBAR,
            initial: InitialStateSpec::default(),
            basis_half_width: DEFAULT_HALF_WIDTH,
            grid: None,
            t_star: DEFAULT_T_STAR,
            epsilon: DEFAULT_EPSILON,
            total_kicks: 2 * DEFAULT_T_STAR,
            record_every: 1,
            delta: observables::DEFAULT_DELTA,
            propagator: PropagatorKind::Spectral,
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentPlan {
    /// Checks everything a forward run needs.
    pub fn validate_forward(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if !(self.kick_strength > 0.0 && self.kick_strength.is_finite()) {
            return bad(format!("K must be > 0, got {}", self.kick_strength));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad(format!("hbar must be > 0, got {}", self.hbar));
        }
        if self.basis_half_width < 1 {
            return bad("L must be >= 1".into());
        }
        if self.record_every < 1 {
            return bad("record_every must be >= 1".into());
        }
        // any normalized state has some |a_l|^2 >= 1/(2L+1)
        let dim = (2 * self.basis_half_width + 1) as f64;
        if !(self.delta > 0.0 && self.delta < 1.0 / dim) {
            return bad(format!(
                "delta must lie in (0, 1/(2L+1)) = (0, {:e}), got {}",
                1.0 / dim,
                self.delta
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        let t = &self.tolerances;
        if !(t.norm > 0.0 && t.edge_mass > 0.0 && t.band > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(t.resume_rho > 0.0 && t.resume_floor > 0.0) || t.resume_window < 1 {
            return bad("resume detector settings must be positive".into());
        }
        if t.plateau_window < 2 || !(t.plateau_slope_fraction > 0.0 && t.plateau_slope_fraction < 1.0) {
            return bad("plateau detector settings out of range".into());
        }
        if let Some(grid) = self.grid {
            let required = 2 * self.basis_half_width + 1;
            if grid < required {
                return Err(Error::GridTooSmall { grid, required });
            }
        }
        // surfaces bad initial states and periods before any stepping
        RotorState::new(&self.initial, self.basis_half_width, self.hbar)?;
        build_schedule(self.schedule, 1)?;
        Ok(())
    }

    /// Checks everything a reversal run needs.
    pub fn validate(&self) -> Result<()> {
        self.validate_forward()?;
        if self.t_star < 1 {
            return Err(Error::InvalidParam("t_star must be >= 1".into()));
        }
        if self.total_kicks < 2 * self.t_star {
            return Err(Error::InvalidParam(format!(
                "total_kicks = {} must be >= 2 * t_star = {}",
                self.total_kicks,
                2 * self.t_star
            )));
        }
        Ok(())
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            band_tol: self.tolerances.band,
            grid: self.grid,
            edge_budget: Some(self.tolerances.edge_mass),
        }
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::new(
            self.propagator,
            self.kick_strength,
            self.hbar,
            self.basis_half_width,
            self.engine_options(),
        )
    }

    pub fn initial_state(&self) -> Result<RotorState> {
        RotorState::new(&self.initial, self.basis_half_width, self.hbar)
    }

    pub fn detector(&self) -> ResumeDetector {
        ResumeDetector {
            rho: self.tolerances.resume_rho,
            window: self.tolerances.resume_window,
            floor: self.tolerances.resume_floor,
        }
    }
}

/// `a_l <- a_l exp(i l eps)`: a rigid angular shift `theta -> theta + eps`.
pub fn apply_perturbation(state: &RotorState, epsilon: f64) -> RotorState {
    let mut out = state.clone();
    perturb_in_place(&mut out, epsilon);
    out
}

pub(crate) fn perturb_in_place(state: &mut RotorState, epsilon: f64) {
    if epsilon != 0.0 {
        state.tilt_phase(epsilon);
    }
}

/// Shared, immutable context of a run: gaps, kick times and initial state.
pub(crate) struct RunContext<'a> {
    pub plan: &'a ExperimentPlan,
    pub gaps: Vec<f64>,
    pub times: Vec<f64>,
    pub initial: RotorState,
}

impl<'a> RunContext<'a> {
    pub fn new(plan: &'a ExperimentPlan, horizon: u64) -> Result<Self> {
        let schedule = build_schedule(plan.schedule, horizon as usize)?;
        Ok(RunContext {
            plan,
            gaps: schedule.gaps(),
            times: schedule.times(),
            initial: plan.initial_state()?,
        })
    }

    /// Time of the state after `k` forward kicks.
    fn time_at(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.times[k as usize - 1]
        }
    }

    fn record(&self, state: &RotorState, kick: u64, time: f64, series: &mut ObservableSeries) -> Result<()> {
        let s = Sample::measure(state, kick, time, self.plan.delta, Some(&self.initial))?;
        if s.norm_err > self.plan.tolerances.norm {
            return Err(Error::NormDrift {
                drift: s.norm_err,
                tol: self.plan.tolerances.norm,
                kick: state.kick_count(),
            });
        }
        series.push(s);
        Ok(())
    }

    /// Steps from kick `from` to kick `to`, recording every `record_every`
    /// kicks (including kick `from` itself when `include_start`).
    pub fn forward(
        &self,
        prop: &mut Propagator,
        state: &mut RotorState,
        from: u64,
        to: u64,
        include_start: bool,
        series: &mut ObservableSeries,
    ) -> Result<()> {
        let stride = self.plan.record_every;
        if include_start && from.is_multiple_of(stride) {
            self.record(state, from, self.time_at(from), series)?;
        }
        for k in from + 1..=to {
            prop.forward(state, self.gaps[k as usize - 1])?;
            if k % stride == 0 {
                self.record(state, k, self.time_at(k), series)?;
            }
        }
        Ok(())
    }

    /// Replays the adjoint steps over the gaps `t_star, ..., 1`. The sample
    /// after `m` adjoint steps is labelled kick `t_star + m` and carries the
    /// time of forward kick `t_star - m`.
    pub fn reverse(
        &self,
        prop: &mut Propagator,
        state: &mut RotorState,
        t_star: u64,
        series: &mut ObservableSeries,
    ) -> Result<()> {
        let stride = self.plan.record_every;
        for m in 1..=t_star {
            prop.adjoint(state, self.gaps[(t_star - m) as usize])?;
            let kick = t_star + m;
            if kick.is_multiple_of(stride) {
                self.record(state, kick, self.time_at(t_star - m), series)?;
            }
        }
        Ok(())
    }
}

fn abort(err: Error, partial: ObservableSeries) -> Error {
    match err {
        e @ (Error::Leakage { .. } | Error::NormDrift { .. }) => Error::Aborted {
            reason: Box::new(e),
            partial: Box::new(partial),
        },
        e => e,
    }
}

/// Evolves through the first `total_kicks` events, recording observables
/// every `record_every` kicks starting at kick 0.
pub fn run_forward(plan: &ExperimentPlan) -> Result<ObservableSeries> {
    plan.validate_forward()?;
    let mut series = ObservableSeries::new();
    if plan.total_kicks == 0 {
        return Ok(series);
    }
    let ctx = RunContext::new(plan, plan.total_kicks)?;
    let mut prop = plan.propagator()?;
    let mut state = ctx.initial.clone();
    match ctx.forward(&mut prop, &mut state, 0, plan.total_kicks, true, &mut series) {
        Ok(()) => Ok(series),
        Err(e) => Err(abort(e, series)),
    }
}

/// Outcome of one echo: forward `t*` kicks, perturb, replay `t*` adjoint
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversalResult {
    /// Forward leg followed by the perturbed reversed leg.
    pub series: ObservableSeries,
    /// Reversed leg of the unperturbed (`eps = 0`) echo.
    pub baseline: ObservableSeries,
    /// First reversed-leg kick where the perturbed echo leaves the retrace.
    pub resume_kick: Option<u64>,
    /// Fidelity with the initial state at the end of the reversed leg.
    pub final_fidelity: f64,
    /// `1 / lmax` at the break.
    pub eps_th_at_break: f64,
    pub lmax_at_break: u64,
    pub t_star: u64,
    pub epsilon: f64,
}

impl ReversalResult {
    /// Kicks from the break to the detected resume.
    pub fn resume_delay(&self) -> Option<u64> {
        self.resume_kick.map(|k| k - self.t_star)
    }

    /// The reversed part of [`ReversalResult::series`].
    pub fn reversed_leg(&self) -> ObservableSeries {
        self.series.tail_from(self.t_star + 1)
    }
}

/// State at the break plus everything recorded before it.
pub(crate) struct BreakPoint {
    pub state: RotorState,
    pub forward: ObservableSeries,
    pub t_star: u64,
}

/// Reversed leg from a break point with perturbation `epsilon`.
pub(crate) fn reverse_from(
    ctx: &RunContext<'_>,
    bp: &BreakPoint,
    epsilon: f64,
) -> Result<(ObservableSeries, RotorState)> {
    let mut prop = ctx.plan.propagator()?;
    let mut state = bp.state.clone();
    perturb_in_place(&mut state, epsilon);
    let mut series = ObservableSeries::new();
    match ctx.reverse(&mut prop, &mut state, bp.t_star, &mut series) {
        Ok(()) => Ok((series, state)),
        Err(e) => {
            let mut partial = bp.forward.clone();
            partial.extend(series);
            Err(abort(e, partial))
        }
    }
}

pub(crate) fn assemble_reversal(
    ctx: &RunContext<'_>,
    bp: &BreakPoint,
    baseline: &ObservableSeries,
    epsilon: f64,
    reversed: (ObservableSeries, RotorState),
) -> Result<ReversalResult> {
    let (leg, final_state) = reversed;
    let resume_kick = detect_resume(&leg, baseline, ctx.plan.detector())?;
    let lmax_at_break = observables::lmax(&bp.state, ctx.plan.delta)?;
    let eps_th_at_break = observables::threshold_estimate(&bp.state, ctx.plan.delta)?;
    let mut series = bp.forward.clone();
    series.extend(leg);
    Ok(ReversalResult {
        series,
        baseline: baseline.clone(),
        resume_kick,
        final_fidelity: observables::fidelity(&ctx.initial, &final_state)?,
        eps_th_at_break,
        lmax_at_break,
        t_star: bp.t_star,
        epsilon,
    })
}

/// Forward `t*` kicks, apply the phase perturbation once, then replay the
/// adjoint steps over the reversed gaps for `t*` kicks. The unperturbed echo
/// is run from the same break state and serves as the resume baseline.
pub fn run_reversal(plan: &ExperimentPlan) -> Result<ReversalResult> {
    plan.validate()?;
    let ctx = RunContext::new(plan, plan.t_star)?;
    let mut prop = plan.propagator()?;
    let mut state = ctx.initial.clone();
    let mut forward = ObservableSeries::new();
    ctx.forward(&mut prop, &mut state, 0, plan.t_star, true, &mut forward)
        .map_err(|e| abort(e, forward.clone()))?;
    let bp = BreakPoint {
        state,
        forward,
        t_star: plan.t_star,
    };

    let baseline_run = reverse_from(&ctx, &bp, 0.0)?;
    let reversed = if plan.epsilon == 0.0 {
        baseline_run.clone()
    } else {
        reverse_from(&ctx, &bp, plan.epsilon)?
    };
    assemble_reversal(&ctx, &bp, &baseline_run.0, plan.epsilon, reversed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{fidelity, lmax, n2_expectation, shannon_entropy};

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            basis_half_width: 256,
            t_star: 50,
            total_kicks: 100,
            delta: 1e-8,
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn perturbation_zero_is_identity() {
        let s = RotorState::new(
            &InitialStateSpec::GaussianPacket {
                center: 1,
                width: 3.0,
            },
            32,
            1.0,
        )
        .unwrap();
        assert_eq!(apply_perturbation(&s, 0.0), s);
    }

    #[test]
    fn perturbation_two_pi_is_identity_up_to_roundoff() {
        let s = RotorState::new(
            &InitialStateSpec::GaussianPacket {
                center: 1,
                width: 3.0,
            },
            32,
            1.0,
        )
        .unwrap();
        let p = apply_perturbation(&s, std::f64::consts::TAU);
        for (a, b) in s.amplitudes().iter().zip(p.amplitudes().iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn perturbation_keeps_occupations() {
        let s = RotorState::new(
            &InitialStateSpec::GaussianPacket {
                center: 0,
                width: 6.0,
            },
            64,
            1.0,
        )
        .unwrap();
        let p = apply_perturbation(&s, 0.3);
        assert_eq!(n2_expectation(&p), n2_expectation(&s));
        assert_eq!(shannon_entropy(&p), shannon_entropy(&s));
        assert_eq!(lmax(&p, 1e-8).unwrap(), lmax(&s, 1e-8).unwrap());
        assert!(fidelity(&s, &p).unwrap() < 1.0);
    }

    #[test]
    fn forward_zero_kicks_is_empty() {
        let plan = ExperimentPlan {
            total_kicks: 0,
            ..small_plan()
        };
        assert!(run_forward(&plan).unwrap().is_empty());
    }

    #[test]
    fn forward_records_on_stride() {
        let plan = ExperimentPlan {
            record_every: 10,
            ..small_plan()
        };
        let s = run_forward(&plan).unwrap();
        assert_eq!(s.kicks(), (0..=100).step_by(10).collect::<Vec<_>>());
        assert_eq!(s.samples[0].n2, 0.0);
        assert!(s.samples[1].n2 > 0.0);
    }

    #[test]
    fn leakage_aborts_with_partial_series() {
        let plan = ExperimentPlan {
            basis_half_width: 24,
            total_kicks: 200,
            ..small_plan()
        };
        match run_forward(&plan) {
            Err(Error::Aborted { reason, partial }) => {
                assert!(matches!(*reason, Error::Leakage { .. }));
                assert!(!partial.is_empty());
                assert_eq!(Error::Aborted { reason, partial }.category().exit_code(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_echo_small() {
        let plan = ExperimentPlan {
            epsilon: 0.0,
            ..small_plan()
        };
        let r = run_reversal(&plan).unwrap();
        assert!(r.final_fidelity > 1.0 - 1e-12);
        assert_eq!(r.resume_kick, None);
        assert_eq!(r.series.len(), 101);
        assert_eq!(r.reversed_leg().len(), 50);
        assert_eq!(r.baseline, r.reversed_leg());
    }

    #[test]
    fn reversal_validation() {
        let plan = ExperimentPlan {
            total_kicks: 99,
            ..small_plan()
        };
        assert!(matches!(run_reversal(&plan), Err(Error::InvalidParam(_))));
        let plan = ExperimentPlan {
            epsilon: -1.0,
            ..small_plan()
        };
        assert!(run_reversal(&plan).is_err());
    }

    #[test]
    fn reversal_is_deterministic() {
        let plan = ExperimentPlan {
            epsilon: 0.05,
            ..small_plan()
        };
        let a = run_reversal(&plan).unwrap();
        let b = run_reversal(&plan).unwrap();
        assert_eq!(a, b);
    }
}
