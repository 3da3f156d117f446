//! TOML run configuration.
//!
//! Every key is optional; omitted keys take the documented defaults and the
//! resolved plan is echoed back in full by [`plan_to_toml`].
//!
//! ```toml
//! schedule = "quasiperiodic"        # or "periodic", or a table:
//! # [schedule]
//! # mode = "quasiperiodic"
//! # t1 = 1.0
//! # t2 = "golden"                   # a number or "golden"
//! K = 5.0
//! hbar = 1.0
//! initial = { kind = "momentum_eigenstate", l0 = 0 }
//! L = 8192
//! t_star = 10000
//! epsilon = 3e-3
//! total_kicks = 20000               # defaults to 2 * t_star
//! record_every = 1
//! delta = 1e-8
//! propagator = "spectral"           # or "bessel"
//!
//! [tolerances]
//! norm = 1e-10
//! edge_mass = 1e-10
//! band = 1e-14
//! resume_rho = 0.1
//! resume_window = 5
//! resume_floor = 1.0
//! plateau_window = 50
//! plateau_slope_fraction = 0.05
//!
//! [scan]                            # optional grids for the scan commands
//! eps_grid = [1e-4, 1e-3, 1e-2]
//! t_star_grid = [5000, 10000, 20000]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentPlan, Tolerances};
use crate::propagator::PropagatorKind;
use crate::schedule::{build_schedule, ScheduleMode};
use crate::state::{InitialStateSpec, RotorState};

/// Optional scan grids carried alongside a plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrids {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star_grid: Option<Vec<u64>>,
}

/// A parsed config file: the plan plus optional scan grids.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub plan: ExperimentPlan,
    pub scan: ScanGrids,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScheduleRepr {
    Name(String),
    Table(ScheduleMode),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schedule: Option<ScheduleRepr>,
    #[serde(rename = "K")]
    kick_strength: Option<f64>,
    hbar: Option<f64>,
    initial: Option<InitialStateSpec>,
    #[serde(rename = "L")]
    basis_half_width: Option<usize>,
    grid: Option<usize>,
    t_star: Option<u64>,
    epsilon: Option<f64>,
    total_kicks: Option<u64>,
    record_every: Option<u64>,
    delta: Option<f64>,
    propagator: Option<PropagatorKind>,
    tolerances: Option<Tolerances>,
    scan: Option<ScanGrids>,
}

/// Parses and validates a config, filling omitted keys from defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::new(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().message().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, message)
    })?;

    let d = ExperimentPlan::default();
    let schedule = match raw.schedule {
        None => d.schedule,
        Some(ScheduleRepr::Table(m)) => m,
        Some(ScheduleRepr::Name(n)) => match n.as_str() {
            "quasiperiodic" => ScheduleMode::quasiperiodic(),
            "periodic" => ScheduleMode::periodic(),
            other => {
                return Err(Error::config(
                    "schedule",
                    format!("unknown schedule `{other}` (expected \"periodic\" or \"quasiperiodic\")"),
                ))
            }
        },
    };
    let t_star = raw.t_star.unwrap_or(d.t_star);
    let plan = ExperimentPlan {
        schedule,
        kick_strength: raw.kick_strength.unwrap_or(d.kick_strength),
        hbar: raw.hbar.unwrap_or(d.hbar),
        initial: raw.initial.unwrap_or(d.initial),
        basis_half_width: raw.basis_half_width.unwrap_or(d.basis_half_width),
        grid: raw.grid,
        t_star,
        epsilon: raw.epsilon.unwrap_or(d.epsilon),
        total_kicks: raw.total_kicks.unwrap_or(2 * t_star),
        record_every: raw.record_every.unwrap_or(d.record_every),
        delta: raw.delta.unwrap_or(d.delta),
        propagator: raw.propagator.unwrap_or(d.propagator),
        tolerances: raw.tolerances.unwrap_or_default(),
    };
    check_ranges(&plan)?;
    let scan = raw.scan.unwrap_or_default();
    if let Some(g) = &scan.eps_grid {
        if g.iter().any(|e| e.is_nan() || *e <= 0.0) || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "scan.eps_grid",
                "must be positive and strictly ascending",
            ));
        }
    }
    if let Some(g) = &scan.t_star_grid {
        if g.contains(&0) || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "scan.t_star_grid",
                "must be positive and strictly ascending",
            ));
        }
    }
    Ok(RunConfig { plan, scan })
}

/// Parses a config and returns only the plan.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan> {
    parse_config(text).map(|c| c.plan)
}

fn check_ranges(p: &ExperimentPlan) -> Result<()> {
    let fail = |path: &str, msg: String| Err(Error::config(path, msg));
    if !(p.kick_strength > 0.0 && p.kick_strength.is_finite()) {
        return fail("K", format!("must be > 0, got {}", p.kick_strength));
    }
    if !(p.hbar > 0.0 && p.hbar.is_finite()) {
        return fail("hbar", format!("must be > 0, got {}", p.hbar));
    }
    if p.basis_half_width < 1 {
        return fail("L", "must be >= 1".into());
    }
    if let Some(g) = p.grid {
        if g < 2 * p.basis_half_width + 1 {
            return fail(
                "grid",
                format!("must be >= 2L + 1 = {}", 2 * p.basis_half_width + 1),
            );
        }
    }
    if p.t_star < 1 {
        return fail("t_star", "must be >= 1".into());
    }
    if p.t_star > p.total_kicks / 2 {
        return fail(
            "t_star",
            format!(
                "t_star = {} exceeds total_kicks / 2 = {}",
                p.t_star,
                p.total_kicks / 2
            ),
        );
    }
    if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
        return fail("epsilon", format!("must be >= 0, got {}", p.epsilon));
    }
    if p.record_every < 1 {
        return fail("record_every", "must be >= 1".into());
    }
    let dim = (2 * p.basis_half_width + 1) as f64;
    if !(p.delta > 0.0 && p.delta < 1.0 / dim) {
        return fail("delta", format!("must lie in (0, 1/(2L+1)), got {}", p.delta));
    }
    if let Err(e) = RotorState::new(&p.initial, p.basis_half_width, p.hbar) {
        return fail("initial", e.to_string());
    }
    match build_schedule(p.schedule, 1) {
        Ok(_) => {}
        Err(e @ Error::Commensurate { .. }) => return Err(e),
        Err(e) => return fail("schedule", e.to_string()),
    }
    p.validate().map_err(|e| match e {
        Error::Config { .. } | Error::Commensurate { .. } => e,
        other => Error::config("tolerances", other.to_string()),
    })
}

/// Full plan echo in the config schema. `parse_plan(&plan_to_toml(p)) == p`.
pub fn plan_to_toml(plan: &ExperimentPlan) -> String {
    toml::to_string(plan).expect("plan is always representable as TOML")
}
