//! Run manifests: a TOML record of what was run, on which engine, and how it
//! ended, written next to every CSV artifact.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ExperimentPlan;
use crate::propagator::{Propagator, PropagatorKind};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineRecord {
    pub propagator: PropagatorKind,
    pub half_width: usize,
    pub band_half_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    pub band_tol: f64,
    pub norm_tol: f64,
    pub edge_budget: f64,
}

impl EngineRecord {
    pub fn new(plan: &ExperimentPlan, prop: &Propagator) -> Self {
        EngineRecord {
            propagator: prop.kind(),
            half_width: plan.basis_half_width,
            band_half_width: prop.band_half_width(),
            grid: prop.grid(),
            band_tol: plan.tolerances.band,
            norm_tol: plan.tolerances.norm,
            edge_budget: plan.tolerances.edge_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    /// Seconds since the Unix epoch when the manifest was written.
    pub timestamp: u64,
    pub command: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub schedule_digest: String,
    pub engine: EngineRecord,
    /// Files written by the run, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Command-specific scalar results.
    #[serde(default)]
    pub results: BTreeMap<String, toml::Value>,
    pub plan: ExperimentPlan,
}

impl RunManifest {
    pub fn new(command: &str, plan: &ExperimentPlan, engine: EngineRecord, schedule_digest: String) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            timestamp,
            command: command.to_string(),
            outcome: Outcome::Completed,
            reason: None,
            schedule_digest,
            engine,
            artifacts: Vec::new(),
            results: BTreeMap::new(),
            plan: plan.clone(),
        }
    }

    pub fn result(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        self.results.insert(key.to_string(), value.into());
        self
    }

    pub fn fail(&mut self, outcome: Outcome, err: &Error) {
        self.outcome = outcome;
        self.reason = Some(err.to_string());
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<manifest>", e.message().to_string()))
    }
}

/// gnuplot script plotting `<n^2>` against kick for the given CSV files.
pub fn gnuplot_script(title: &str, csv_files: &[&str]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{}'\n", title.replace('\'', "")));
    s.push_str("set xlabel 'kick'\nset ylabel '<n^2>'\nset key left top\n");
    let plots: Vec<String> = csv_files
        .iter()
        .map(|f| format!("'{f}' using 1:3 every ::1 with lines title '{f}'"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::build_schedule;

    #[test]
    fn manifest_round_trip() {
        let plan = ExperimentPlan {
            basis_half_width: 64,
            ..ExperimentPlan::default()
        };
        let prop = plan.propagator().unwrap();
        let digest = build_schedule(plan.schedule, 10).unwrap().digest();
        let mut m = RunManifest::new("forward", &plan, EngineRecord::new(&plan, &prop), digest);
        m.artifacts.push("series.csv".into());
        m.result("final_n2", 12.5).result("resume_kick", 17i64);
        let back = RunManifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn gnuplot_mentions_every_file() {
        let s = gnuplot_script("echo", &["a.csv", "b.csv"]);
        assert!(s.contains("'a.csv' using 1:3"));
        assert!(s.contains("'b.csv' using 1:3"));
    }
}
