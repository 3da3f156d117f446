//! `qkr` command-line driver.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    diffusion_check, localization_freeze, plateau_check, run_forward, run_reversal, threshold_scan,
    tstar_scan, ExperimentPlan,
};
use crate::io::{
    gnuplot_script, parse_config, plan_to_toml, write_freeze, write_scan, write_series, write_tstar,
    EngineRecord, Outcome, RunConfig, RunManifest,
};
use crate::observables::ObservableSeries;
use crate::schedule::build_schedule;
use crate::validate::run_oracle_suite;

#[derive(Parser, Debug)]
#[command(
    name = "qkr",
    version,
    about = "Kicked rotor simulator: forward runs, time-reversal echoes, threshold scans",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML config; every key is optional
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(short, long, default_value = "qkr-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward evolution for `total_kicks` kicks
    Forward {
        #[command(flatten)]
        common: Common,
    },
    /// Forward to t*, perturb by epsilon, run the reversed leg
    Reverse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        t_star: Option<u64>,
    },
    /// Echo at every epsilon of a grid from one break; compare with 1/lmax
    ScanEps {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending grid (overrides `[scan] eps_grid`)
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Echo with a fixed epsilon from several break times
    ScanTstar {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending grid (overrides `[scan] t_star_grid`)
        #[arg(long, value_delimiter = ',')]
        t_stars: Option<Vec<u64>>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Periodic-rotor threshold freeze around the localization time
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        t_stars: Option<Vec<u64>>,
    },
    /// Check the step kernels against a dense-matrix oracle
    Validate {
        #[arg(long, default_value_t = 32)]
        half_width: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the fully resolved plan for a config
    ShowPlan {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr()
                || e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            {
                2
            } else {
                0
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category().as_str());
            e.category().exit_code()
        }
    }
}

fn load(config: Option<&Path>) -> Result<RunConfig> {
    match config {
        None => parse_config(""),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?;
            parse_config(&text)
        }
    }
}

struct Output {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Output {
    fn new(dir: &Path, command: &str, plan: &ExperimentPlan, horizon: u64) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let prop = plan.propagator()?;
        let digest = build_schedule(plan.schedule, horizon.max(1) as usize)?.digest();
        let manifest = RunManifest::new(command, plan, EngineRecord::new(plan, &prop), digest);
        Ok(Output {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn series(&mut self, name: &str, s: &ObservableSeries) -> Result<()> {
        write_series(s, fs::File::create(self.dir.join(name))?)?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn file(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn table<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(fs::File) -> Result<()>,
    {
        write(fs::File::create(self.dir.join(name))?)?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<()> {
        fs::write(self.dir.join("manifest.toml"), self.manifest.to_toml())?;
        Ok(())
    }

    /// Records a failed run and passes the error through.
    fn fail(mut self, err: Error) -> Error {
        let outcome = match &err {
            Error::InconclusiveScan(_) => Outcome::Inconclusive,
            _ => Outcome::Aborted,
        };
        if let Error::Aborted { partial, .. } = &err {
            let _ = self.series("partial.csv", partial);
        }
        self.manifest.fail(outcome, &err);
        let _ = fs::write(self.dir.join("manifest.toml"), self.manifest.to_toml());
        err
    }
}

fn opt_int(v: Option<u64>) -> toml::Value {
    v.map(|x| toml::Value::Integer(x as i64))
        .unwrap_or_else(|| toml::Value::String("none".into()))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Forward { common } => {
            let plan = load(common.config.as_deref())?.plan;
            plan.validate_forward()?;
            let mut out = Output::new(&common.out, "forward", &plan, plan.total_kicks)?;
            let series = match run_forward(&plan) {
                Ok(s) => s,
                Err(e) => return Err(out.fail(e)),
            };
            out.series("series.csv", &series)?;
            out.file("plot.gp", &gnuplot_script("forward", &["series.csv"]))?;
            if let Some(last) = series.samples.last() {
                out.manifest
                    .result("final_n2", last.n2)
                    .result("final_lmax", last.lmax as i64);
                println!("kicks {}  <n^2> {:.6e}  lmax {}", last.kick, last.n2, last.lmax);
            }
            if let Some(d) = diffusion_check(&series) {
                out.manifest
                    .result("diffusion_slope", d.fit.slope)
                    .result("diffusion_r2", d.fit.r2)
                    .result("linear_growth", d.passes);
                println!(
                    "linear fit: slope {:.6e}  r2 {:.4}  linear_growth {}",
                    d.fit.slope, d.fit.r2, d.passes
                );
            }
            if let Some(p) = plateau_check(&series) {
                out.manifest
                    .result("plateau_late_mean", p.late_mean)
                    .result("plateau_mid_mean", p.mid_mean)
                    .result("plateau", p.passes);
                println!(
                    "plateau: late {:.6e}  mid {:.6e}  plateau {}",
                    p.late_mean, p.mid_mean, p.passes
                );
            }
            out.finish()
        }
        Command::Reverse {
            common,
            epsilon,
            t_star,
        } => {
            let mut plan = load(common.config.as_deref())?.plan;
            if let Some(e) = epsilon {
                plan.epsilon = e;
            }
            if let Some(t) = t_star {
                plan.t_star = t;
                plan.total_kicks = plan.total_kicks.max(2 * t);
            }
            plan.validate()?;
            let mut out = Output::new(&common.out, "reverse", &plan, plan.t_star)?;
            let r = match run_reversal(&plan) {
                Ok(r) => r,
                Err(e) => return Err(out.fail(e)),
            };
            out.series("series.csv", &r.series)?;
            out.series("baseline.csv", &r.baseline)?;
            out.file(
                "plot.gp",
                &gnuplot_script("echo", &["series.csv", "baseline.csv"]),
            )?;
            out.manifest
                .result("resume_kick", opt_int(r.resume_kick))
                .result("resume_delay", opt_int(r.resume_delay()))
                .result("final_fidelity", r.final_fidelity)
                .result("eps_th_at_break", r.eps_th_at_break)
                .result("lmax_at_break", r.lmax_at_break as i64);
            println!(
                "t* {}  epsilon {:e}  resume_kick {:?}  final_fidelity {:.6}  eps_th {:.4e}  lmax {}",
                r.t_star, r.epsilon, r.resume_kick, r.final_fidelity, r.eps_th_at_break, r.lmax_at_break
            );
            out.finish()
        }
        Command::ScanEps { common, eps } => {
            let cfg = load(common.config.as_deref())?;
            let plan = cfg.plan;
            let grid = eps.or(cfg.scan.eps_grid).ok_or_else(|| {
                Error::config(
                    "scan.eps_grid",
                    "no epsilon grid given (use --eps or [scan] eps_grid)",
                )
            })?;
            let mut out = Output::new(&common.out, "scan-eps", &plan, plan.t_star)?;
            let rep = match threshold_scan(&plan, &grid) {
                Ok(r) => r,
                Err(e) => return Err(out.fail(e)),
            };
            out.table("scan.csv", |f| write_scan(&rep, f))?;
            out.manifest
                .result("eps_th_empirical", rep.eps_th_empirical)
                .result("eps_th_eq5", rep.eps_th_eq5)
                .result("ratio", rep.ratio);
            for e in &rep.estimates {
                out.manifest
                    .result(&format!("lmax_delta_{:e}", e.delta), e.lmax as i64)
                    .result(
                        &format!("ratio_delta_{:e}", e.delta),
                        rep.eps_th_empirical * e.lmax as f64,
                    );
                println!(
                    "delta {:e}  lmax {}  1/lmax {:.4e}  ratio {:.3}",
                    e.delta,
                    e.lmax,
                    e.eps_th,
                    rep.eps_th_empirical / e.eps_th
                );
            }
            println!("eps_th_empirical {:e}", rep.eps_th_empirical);
            out.finish()
        }
        Command::ScanTstar {
            common,
            t_stars,
            epsilon,
        } => {
            let cfg = load(common.config.as_deref())?;
            let mut plan = cfg.plan;
            if let Some(e) = epsilon {
                plan.epsilon = e;
            }
            let grid = t_stars.or(cfg.scan.t_star_grid).ok_or_else(|| {
                Error::config(
                    "scan.t_star_grid",
                    "no t* grid given (use --t-stars or [scan] t_star_grid)",
                )
            })?;
            let horizon = grid.last().copied().unwrap_or(1);
            let mut out = Output::new(&common.out, "scan-tstar", &plan, horizon)?;
            let rep = match tstar_scan(&plan, &grid) {
                Ok(r) => r,
                Err(e) => return Err(out.fail(e)),
            };
            let mut names = Vec::new();
            for e in &rep.entries {
                let name = format!("series_tstar_{}.csv", e.t_star);
                out.series(&name, &e.result.series)?;
                names.push(name);
                println!(
                    "t* {}  resume_kick {:?}  delay {:?}  final_fidelity {:.6}",
                    e.t_star,
                    e.result.resume_kick,
                    e.result.resume_delay(),
                    e.result.final_fidelity
                );
            }
            out.table("tstar.csv", |f| write_tstar(&rep, f))?;
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            out.file("plot.gp", &gnuplot_script("break-time scan", &refs))?;
            out.finish()
        }
        Command::Localize { common, t_stars } => {
            let cfg = load(common.config.as_deref())?;
            let plan = cfg.plan;
            let grid = t_stars.or(cfg.scan.t_star_grid).ok_or_else(|| {
                Error::config(
                    "scan.t_star_grid",
                    "no t* grid given (use --t-stars or [scan] t_star_grid)",
                )
            })?;
            let horizon = plan.total_kicks.max(grid.last().copied().unwrap_or(1));
            let mut out = Output::new(&common.out, "localize", &plan, horizon)?;
            let rep = match localization_freeze(&plan, &grid) {
                Ok(r) => r,
                Err(e) => return Err(out.fail(e)),
            };
            out.series("forward.csv", &rep.forward)?;
            out.table("freeze.csv", |f| write_freeze(&rep, f))?;
            out.file("plot.gp", &gnuplot_script("localization", &["forward.csv"]))?;
            out.manifest
                .result("tau", rep.tau as i64)
                .result("decreasing_before", rep.decreasing_before)
                .result("variation_after", rep.variation_after)
                .result("frozen", rep.frozen)
                .result("check_t_star", rep.check_t_star as i64)
                .result("check_epsilon", rep.check_epsilon)
                .result("check_fidelity", rep.check_fidelity)
                .result("reversible", rep.reversible);
            println!("tau {}", rep.tau);
            for e in &rep.entries {
                println!("t* {}  lmax {}  eps_th {:.4e}", e.t_star, e.lmax, e.eps_th);
            }
            println!(
                "decreasing_before {}  variation_after {:.4}  frozen {}  fidelity at eps_th/10 {:.6}",
                rep.decreasing_before, rep.variation_after, rep.frozen, rep.check_fidelity
            );
            out.finish()
        }
        Command::Validate { half_width, seed } => {
            let rep = run_oracle_suite(half_width, seed)?;
            for c in &rep.checks {
                println!(
                    "{}  {}: {:.3e} (tol {:.0e})",
                    if c.passed() { "ok  " } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tol
                );
            }
            if rep.passed() {
                Ok(())
            } else {
                Err(Error::ValidationFailed {
                    failed: rep.checks.iter().filter(|c| !c.passed()).count(),
                    total: rep.checks.len(),
                })
            }
        }
        Command::ShowPlan { config } => {
            let plan = load(config.as_deref())?.plan;
            print!("{}", plan_to_toml(&plan));
            Ok(())
        }
    }
}
