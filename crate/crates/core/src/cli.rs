//! Command-line front end.
//!
//! Every command reads a JSON model file (or a built-in example profile),
//! writes a JSON [`RunReport`] to `--out` or stdout, prints diagnostics on
//! stderr and returns the exit code of the error class:
//! 0 ok, 2 validation, 3 unsupported regime, 4 non-convergence,
//! 5 Du boundary failure, 6 audit failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::dubounds::{du_optimize_rate, DuProfile};
use crate::error::{Error, Result};
use crate::model::{derive, validate, CaseClass, Mdp, RawModel};
use crate::operators::{OperatorKind, Policy};
use crate::policyeval::{finite_horizon, optimality_audit, MarkovPlan};
use crate::solver::{solve_derived, SolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Default horizon for `eval`.
pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "ezdp",
    version,
    about = "Certified value iteration for Epstein-Zin Markov decision processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a model by value iteration and report the certified solution.
    Solve {
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration CSV trace: iter,step_norm,apriori,aposteriori
        #[arg(long)]
        trace_csv: Option<PathBuf>,
    },
    /// Print the regime and contraction constants of a model.
    Classify { model: PathBuf },
    /// Optimize Du's convergence bound and compare it with the Banach bound.
    Bounds {
        #[arg(required_unless_present = "example", conflicts_with = "example")]
        model: Option<PathBuf>,
        /// Built-in profile (1: convex, 2: concave).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        example: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a Markov plan, or audit the optimal policy against random plans.
    Eval {
        model: PathBuf,
        /// JSON list of decision rules, one action per state each.
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        policy_file: Option<PathBuf>,
        /// Number of random plans for the optimality audit.
        #[arg(long, requires = "seed")]
        random: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce both built-in Du bound profiles.
    Reproduce {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters {
    pub n_states: usize,
    pub n_actions: usize,
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub model_name: Option<String>,
    pub parameters: Option<Parameters>,
    pub tolerance: Option<f64>,
    pub version: &'static str,
    /// Seconds since the Unix epoch at start.
    pub started_at: f64,
    pub elapsed_seconds: f64,
}

/// Report document: provenance plus the command's result.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<R> {
    pub provenance: Provenance,
    pub result: R,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub case: CaseClass,
    pub operator: OperatorKind,
    pub theta: f64,
    pub m_bound: f64,
    pub c: f64,
    pub delta: f64,
    pub summary: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Clock {
    started_at: f64,
    start: Instant,
}

impl Clock {
    fn start() -> Self {
        let started_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Self {
            started_at,
            start: Instant::now(),
        }
    }

    fn provenance(
        &self,
        command: &'static str,
        m: Option<&Mdp<f64>>,
        tolerance: Option<f64>,
    ) -> Provenance {
        Provenance {
            command,
            model_name: m.and_then(|m| m.name().map(str::to_owned)),
            parameters: m.map(|m| Parameters {
                n_states: m.n_states(),
                n_actions: m.n_actions(),
                beta: m.beta(),
                rho: m.rho(),
                gamma: m.gamma(),
            }),
            tolerance,
            version: env!("CARGO_PKG_VERSION"),
            started_at: self.started_at,
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let clock = Clock::start();
    match cmd {
        Command::Solve {
            model,
            tol,
            max_iter,
            out,
            trace_csv,
        } => {
            let m = load_model(&model)?;
            let d = derive(&m)?;
            let report = solve_derived(&m, &d, &SolveOptions { tol, max_iter })?;
            if let Some(path) = trace_csv {
                let mut csv = String::from("iter,step_norm,apriori,aposteriori\n");
                for t in &report.trace {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        t.iter, t.step_norm, t.apriori, t.aposteriori
                    ));
                }
                write_file(&path, &csv)?;
            }
            emit(
                out.as_deref(),
                &RunReport {
                    provenance: clock.provenance("solve", Some(&m), Some(tol)),
                    result: report,
                },
            )
        }
        Command::Classify { model } => {
            let m = load_model(&model)?;
            let d = derive(&m)?;
            let report = classify_report(&m, &d);
            println!("{}", report.summary);
            Ok(())
        }
        Command::Bounds {
            model,
            example,
            out,
        } => {
            let profile = match (example, model) {
                (Some(1), _) => DuProfile::example1(),
                (Some(2), _) => DuProfile::example2(),
                (_, Some(path)) => DuProfile::from_model(&load_model(&path)?)?,
                _ => {
                    return Err(Error::Malformed(
                        "bounds needs a model file or --example".into(),
                    ))
                }
            };
            let report = du_optimize_rate(&profile)?;
            eprintln!(
                "verdict: {:?} (Banach delta {}, Du rate {})",
                report.winner, report.banach_delta, report.rate
            );
            emit(
                out.as_deref(),
                &RunReport {
                    provenance: clock.provenance("bounds", Some(profile.model()), None),
                    result: report,
                },
            )
        }
        Command::Eval {
            model,
            policy_file,
            random,
            seed,
            horizon,
            tol,
            out,
        } => {
            let m = load_model(&model)?;
            let d = derive(&m)?;
            crate::policyeval::regime(&m)?;
            if let Some(n_random) = random {
                let sol = solve_derived(
                    &m,
                    &d,
                    &SolveOptions {
                        tol,
                        max_iter: DEFAULT_MAX_ITER,
                    },
                )?;
                let audit = optimality_audit(
                    &m,
                    &d,
                    &sol.v_star,
                    &sol.policy,
                    n_random,
                    horizon,
                    seed.unwrap_or(0),
                )?;
                emit(
                    out.as_deref(),
                    &RunReport {
                        provenance: clock.provenance("eval", Some(&m), Some(tol)),
                        result: audit,
                    },
                )
            } else {
                let path = policy_file.expect("clap enforces --policy-file or --random");
                let plan = load_plan(&m, &path)?.extended(horizon);
                let report = finite_horizon(&m, &d, &plan)?;
                emit(
                    out.as_deref(),
                    &RunReport {
                        provenance: clock.provenance("eval", Some(&m), Some(tol)),
                        result: report,
                    },
                )
            }
        }
        Command::Reproduce { out } => {
            let reports = vec![
                du_optimize_rate(&DuProfile::<f64>::example1())?,
                du_optimize_rate(&DuProfile::<f64>::example2())?,
            ];
            emit(
                out.as_deref(),
                &RunReport {
                    provenance: clock.provenance("reproduce", None, None),
                    result: reports,
                },
            )
        }
    }
}

/// Summary used by `classify`.
pub fn classify_report(m: &Mdp<f64>, d: &crate::model::DerivedParams<f64>) -> ClassifyReport {
    let tag = match d.case {
        CaseClass::ThetaOne => {
            let routed = if m.rho() < 1.0 { "Case2" } else { "Case3" };
            format!("ThetaOne routed to {routed} machinery")
        }
        other => format!("{other:?}"),
    };
    let summary = format!(
        "{tag}, θ={}, M={}, c={}, δ={}",
        d.theta, d.m_bound, d.c, d.delta
    );
    ClassifyReport {
        case: d.case,
        operator: d.kind,
        theta: d.theta,
        m_bound: d.m_bound,
        c: d.c,
        delta: d.delta,
        summary,
    }
}

pub fn load_model(path: &Path) -> Result<Mdp<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let raw: RawModel<f64> = serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    validate(raw)
}

/// A plan file is a JSON list of decision rules, e.g. `[[1, 0], [0, 0]]`.
pub fn load_plan(m: &Mdp<f64>, path: &Path) -> Result<MarkovPlan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let steps: Vec<Policy> = serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    MarkovPlan::new(m, steps)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::Malformed(format!("cannot write {}: {e}", path.display())))
}

fn emit<R: Serialize>(out: Option<&Path>, report: &RunReport<R>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Malformed(format!("serialization: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => write_file(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Malformed(format!("stdout: {e}"))),
    }
}
