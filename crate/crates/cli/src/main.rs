//! Command-line driver: validate, solve and generate instance files.
//!
//! Every command prints a JSON result document on stdout (or into `--out`) and a short
//! summary on stderr. Exit codes: 0 success, 1 infeasible, 2 input error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dopf::conic::{
    restore_exactness, solve_relaxation, Relaxation, RelaxationSpec, Restored, SolveStatus,
};
use dopf::gufp::{gufp_round, GufpError};
use dopf::io::{emit_instance, generate_instance, parse_instance, GeneratorProfile, ResultDocument};
use dopf::model::{rotate_instance, rotation_angle, validate_instance, RadialInstance};
use dopf::oracle::{brute_force_opf, OPF_LIMIT};
use dopf::qptas::{qptas_solve, GuessMode, ProfileMode, QptasConfig, QptasError};
use dopf::sweep::{check_feasibility, DEFAULT_TOL};

const THREADS_VAR: &str = "DOPF_THREADS";

#[derive(Parser)]
#[command(name = "dopf", version, about = "Optimal power flow with discrete demands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an instance and check the modelling assumptions.
    Validate {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the cone relaxation with every assignment relaxed.
    Relax {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimum by enumerating the inelastic users.
    Exact {
        file: PathBuf,
        #[arg(long, default_value_t = OPF_LIMIT)]
        limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximation scheme on a line network.
    Qptas {
        file: PathBuf,
        #[arg(long)]
        eps: f64,
        /// `full`, `capped:N` or `oracle`.
        #[arg(long, value_parser = parse_mode)]
        mode: ModeArg,
        /// Also try up to this many restricted profiles per group.
        #[arg(long)]
        profiles: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round the packing problem of a line network, with capacities taken from the
    /// fractional relaxation optimum.
    Gufp {
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random line instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        ni: usize,
        #[arg(long)]
        ne: usize,
        /// Spread demand angles around zero so the instance needs rotating.
        #[arg(long)]
        rotated: bool,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
}

#[derive(Debug, Clone)]
enum ModeArg {
    Full,
    Capped(usize),
    Oracle,
}

fn parse_mode(s: &str) -> Result<ModeArg, String> {
    match s {
        "full" => Ok(ModeArg::Full),
        "oracle" => Ok(ModeArg::Oracle),
        _ => s
            .strip_prefix("capped:")
            .and_then(|n| n.parse().ok())
            .map(ModeArg::Capped)
            .ok_or_else(|| format!("expected full, capped:N or oracle, got {s:?}")),
    }
}

/// Maps a failure to an exit code.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Input(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Success,
    Infeasible,
    Numerical,
}

impl Verdict {
    fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::Infeasible => 1,
            Self::Numerical => 3,
        }
    }

    fn of(status: SolveStatus) -> Self {
        match status {
            SolveStatus::Optimal => Self::Success,
            SolveStatus::Infeasible => Self::Infeasible,
            SolveStatus::NumericalFailure => Self::Numerical,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors and 0 for --help and --version
            e.exit();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(verdict) => ExitCode::from(verdict.code()),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_VAR} must be a thread count, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<RadialInstance> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn finish(doc: &ResultDocument, out: Option<&Path>) -> anyhow::Result<()> {
    eprintln!("{}", doc.summary());
    match out {
        Some(p) => std::fs::write(p, doc.to_json()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", doc.to_json());
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<Verdict, Failure> {
    let start = Instant::now();
    match command {
        Command::Validate { file, out } => {
            let inst = load(&file)?;
            let report = validate_instance(&inst);
            let verdict = if report.relaxation_ready() {
                Verdict::Success
            } else {
                Verdict::Infeasible
            };
            let status = if report.relaxation_ready() { "valid" } else { "assumptions-violated" };
            let mut doc = ResultDocument::new("validate", status);
            doc.detail("nodes", inst.m() + 1);
            doc.detail("users", inst.user_count());
            doc.detail("qptas_ready", report.qptas_ready());
            doc.validation = Some(report);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, out.as_deref())?;
            Ok(verdict)
        }
        Command::Relax { file, out } => {
            let inst = load(&file)?;
            let res = solve_relaxation(&inst, &RelaxationSpec::new(Relaxation::Rcopf));
            let mut doc = ResultDocument::new("relax", status_name(res.status));
            if let Some(st) = &res.state {
                doc = doc.with_state(st, check_feasibility(&inst, st, DEFAULT_TOL));
                doc.set_objective(res.objective);
            }
            doc.detail("iterations", res.iterations);
            doc.detail("reduced_accuracy", res.reduced_accuracy);
            doc.detail("message", &res.message);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, out.as_deref())?;
            Ok(Verdict::of(res.status))
        }
        Command::Exact { file, limit, out } => {
            let inst = load(&file)?;
            let res = brute_force_opf(&inst, limit).map_err(|e| Failure::Input(e.into()))?;
            let failures = res
                .statuses
                .iter()
                .filter(|s| **s == SolveStatus::NumericalFailure)
                .count();
            let verdict = match &res.restored {
                Some(r) if res.is_feasible() => restored_verdict(r),
                _ if failures > 0 => Verdict::Numerical,
                _ => Verdict::Infeasible,
            };
            let mut doc = ResultDocument::new("exact", verdict_name(verdict));
            if let Some(r) = &res.restored {
                doc = with_restored(doc, &inst, r);
            }
            doc.set_objective(res.value);
            doc.assignment = Some(res.assignment.clone());
            doc.detail("subproblems", res.subproblems);
            doc.detail("numerical_failures", failures);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, out.as_deref())?;
            Ok(verdict)
        }
        Command::Qptas {
            file,
            eps,
            mode,
            profiles,
            out,
        } => {
            let inst = load(&file)?;
            let guess_mode = match mode {
                ModeArg::Full => GuessMode::Full,
                ModeArg::Capped(n) => GuessMode::Capped(n),
                ModeArg::Oracle => {
                    let oracle = brute_force_opf(&inst, OPF_LIMIT).map_err(|e| Failure::Input(e.into()))?;
                    if !oracle.is_feasible() {
                        let mut doc = ResultDocument::new("qptas", "infeasible");
                        doc.detail("reason", "the reference optimum has no feasible assignment");
                        doc.wall_time_s = start.elapsed().as_secs_f64();
                        finish(&doc, out.as_deref())?;
                        return Ok(Verdict::Infeasible);
                    }
                    GuessMode::OracleGuess(oracle.assignment)
                }
            };
            let mut cfg = QptasConfig::new(eps, guess_mode);
            if let Some(limit) = profiles {
                cfg.profiles = ProfileMode::Enumerate { limit };
            }
            let res = qptas_solve(&inst, &cfg).map_err(qptas_failure)?;
            let mut verdict = Verdict::of(res.status);
            if verdict == Verdict::Success && !res.report.as_ref().is_some_and(|r| r.fully_feasible()) {
                verdict = Verdict::Numerical;
            }
            let mut doc = ResultDocument::new("qptas", verdict_name(verdict));
            if let (Some(st), Some(rep)) = (&res.state, &res.report) {
                doc = doc.with_state(st, rep.clone());
            }
            doc.set_objective(res.value);
            doc.assignment = Some(res.assignment.clone());
            doc.guess_count_log10 = Some(res.guess_count_log10);
            doc.guesses_evaluated = Some(res.guesses_evaluated);
            doc.detail("guesses_feasible", res.guesses_feasible);
            doc.detail("best_guess", res.best_guess);
            doc.detail("eps_internal", res.eps_internal);
            doc.detail("beta", res.beta);
            doc.detail("groups", res.groups);
            doc.detail("fallback", res.fallback);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, out.as_deref())?;
            Ok(verdict)
        }
        Command::Gufp { file, eps, out } => {
            let inst = load(&file)?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Failure::Input(anyhow::anyhow!("--eps must lie in (0, 1), got {eps}")));
            }
            let rotation = rotation_angle(&inst).map_err(|e| Failure::Input(e.into()))?;
            let rotated = rotate_instance(&inst, rotation);
            // capacities are the loads of the fractional optimum, so every packing-feasible
            // selection is dominated by a relaxed-feasible point
            let relaxed = solve_relaxation(&rotated, &RelaxationSpec::new(Relaxation::Rcopf));
            let Some(frac) = relaxed.state else {
                let mut doc = ResultDocument::new("gufp", status_name(relaxed.status));
                doc.detail("message", &relaxed.message);
                doc.wall_time_s = start.elapsed().as_secs_f64();
                finish(&doc, out.as_deref())?;
                return Ok(Verdict::of(relaxed.status));
            };
            let reduction = dopf::qptas::reduce_to_gufp(&rotated, &frac.x).map_err(gufp_failure)?;
            let rounding = gufp_round(&reduction.gufp, eps).map_err(gufp_failure)?;
            let mut x = vec![0.0; inst.user_count()];
            for (&k, &v) in reduction.users.iter().zip(&rounding.x) {
                x[k] = v;
            }
            // elastic users take their best response to the rounded selection
            let free = solve_relaxation(&inst, &RelaxationSpec::new(Relaxation::CopfInelastic(x.clone())));
            if let Some(st) = &free.state {
                for k in inst.elastic() {
                    x[k] = st.x[k].clamp(0.0, 1.0);
                }
            }
            let restored = restore_exactness(&inst, &x, DEFAULT_TOL);
            let verdict = restored_verdict(&restored);
            let mut doc = with_restored(ResultDocument::new("gufp", verdict_name(verdict)), &inst, &restored);
            doc.set_objective(restored.outcome.objective);
            doc.assignment = Some(x);
            doc.detail("packing_value", rounding.value);
            doc.detail("packing_lp_value", rounding.lp_value);
            doc.detail("eps_internal", rounding.eps);
            doc.detail("groups", rounding.groups);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, out.as_deref())?;
            Ok(verdict)
        }
        Command::Gen {
            seed,
            m,
            ni,
            ne,
            rotated,
            output,
        } => {
            if m == 0 {
                return Err(Failure::Input(anyhow::anyhow!("--m must be positive")));
            }
            let profile = if rotated {
                GeneratorProfile::Rotated
            } else {
                GeneratorProfile::Standard
            };
            let inst = generate_instance(seed, m, ni, ne, profile);
            std::fs::write(&output, emit_instance(&inst))
                .with_context(|| format!("writing {}", output.display()))?;
            let mut doc = ResultDocument::new("gen", "written");
            doc.detail("output", output.display().to_string());
            doc.detail("seed", seed);
            doc.wall_time_s = start.elapsed().as_secs_f64();
            finish(&doc, None)?;
            Ok(Verdict::Success)
        }
    }
}

fn with_restored(doc: ResultDocument, inst: &RadialInstance, r: &Restored) -> ResultDocument {
    match (&r.outcome.state, &r.report) {
        (Some(st), Some(rep)) => doc.with_state(st, rep.clone()),
        (Some(st), None) => doc.with_state(st, check_feasibility(inst, st, DEFAULT_TOL)),
        _ => doc,
    }
}

fn restored_verdict(r: &Restored) -> Verdict {
    match Verdict::of(r.outcome.status) {
        Verdict::Success if !r.report.as_ref().is_some_and(|rep| rep.feasible) => Verdict::Numerical,
        v => v,
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    verdict_name(Verdict::of(s))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Success => "optimal",
        Verdict::Infeasible => "infeasible",
        Verdict::Numerical => "numerical-failure",
    }
}

fn gufp_failure(e: GufpError) -> Failure {
    match e {
        GufpError::Lp(_) => Failure::Numerical(e.into()),
        _ => Failure::Input(e.into()),
    }
}

fn qptas_failure(e: QptasError) -> Failure {
    match e {
        QptasError::Gufp(GufpError::Lp(_)) => Failure::Numerical(e.into()),
        _ => Failure::Input(e.into()),
    }
}
