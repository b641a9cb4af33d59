//! Command-line front end: `solve`, `gen`, `oracle` and `dee`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Result;
use crate::instance::{parse_instance, random_instance, serialize_instance, ScpInstance};
use crate::oracle::{brute_force, goldstein_reduce, DEFAULT_LIMIT};
use crate::report::ReportDocument;
use crate::solver::{default_params, Prsm, SolverParams, UpperStrategy};

/// Exit code for I/O, parse and numerical errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit code for command-line usage errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code when a solve stops on the iteration cap.
pub const EXIT_MAX_ITER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "scp-dnn", version, about = "DNN relaxation solver for side-chain positioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UpperArg {
    Column,
    Eig,
    Both,
}

impl From<UpperArg> for UpperStrategy {
    fn from(a: UpperArg) -> Self {
        match a {
            UpperArg::Column => UpperStrategy::Column,
            UpperArg::Eig => UpperStrategy::Eig,
            UpperArg::Both => UpperStrategy::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance and write a JSON report.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Consecutive sub-tolerance iterations required to stop on residuals.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        bound_period: Option<usize>,
        /// Run dead-end elimination before solving.
        #[arg(long)]
        dee: bool,
        #[arg(long, value_enum, default_value = "both")]
        upper_source: UpperArg,
        /// Report `time_sec` as 0 so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded random instance.
    Gen {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        m_max: usize,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve exactly by enumeration.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        limit: u128,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply Goldstein dead-end elimination and write the reduced instance.
    Dee {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct OracleDocument<'a> {
    problem: &'a str,
    p: usize,
    n0: usize,
    optimum: f64,
    assignment: Vec<usize>,
    enumerated: u128,
}

#[derive(Debug, Serialize)]
struct DeeSummary<'a> {
    problem: &'a str,
    original_sizes: &'a [usize],
    reduced_sizes: &'a [usize],
    /// One-based surviving rotamers of every block.
    kept: Vec<Vec<usize>>,
    /// One-based original rotamer index of each reduced rotamer.
    mapping: Vec<usize>,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{rendered}");
            return 0;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn read_instance(path: &Path) -> Result<ScpInstance<f64>> {
    parse_instance(&fs::read_to_string(path)?)
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Solve {
            instance,
            beta,
            gamma,
            eps,
            max_iter,
            t,
            bound_period,
            dee,
            upper_source,
            no_timing,
            out,
        } => {
            let original = read_instance(&instance)?;
            let reduction = if dee { Some(goldstein_reduce(&original)?) } else { None };
            let target = reduction.as_ref().map_or(&original, |r| &r.reduced);

            let mut params: SolverParams<f64> = default_params(target);
            params.beta = beta.unwrap_or(params.beta);
            params.gamma = gamma.unwrap_or(params.gamma);
            params.epsilon = eps.unwrap_or(params.epsilon);
            params.max_iter = max_iter.unwrap_or(params.max_iter);
            params.t_consecutive = t.unwrap_or(params.t_consecutive);
            params.bound_period = bound_period.unwrap_or(params.bound_period);
            params.upper = upper_source.into();

            let mut report = Prsm::new(target, params.clone())?.run()?;
            if no_timing {
                report.time_sec = 0.0;
            }
            let assignment = match &reduction {
                Some(r) => r.lift_assignment(&report.assignment, original.partition())?,
                None => report.assignment.clone(),
            };
            let doc = ReportDocument::new(&original.name, target.p(), target.n0(), &report, &assignment, &params);
            emit(&doc.to_json()?, out.as_deref(), stdout)?;
            let _ = writeln!(
                stderr,
                "{}: lbd {:.6} ubd {:.6} rel.gap {:.3e} iter {} ({})",
                doc.problem, doc.lbd, doc.ubd, doc.rel_gap, doc.iter, doc.termination
            );
            Ok(if report.termination.is_success() { 0 } else { EXIT_MAX_ITER })
        }
        Command::Gen { p, m_max, lo, hi, seed, name, out } => {
            let mut inst = random_instance::<f64>(p, m_max, lo, hi, seed)?;
            if let Some(name) = name {
                inst.name = name;
            }
            emit(&serialize_instance(&inst), out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Oracle { instance, limit, out } => {
            let inst = read_instance(&instance)?;
            let res = brute_force(&inst, limit)?;
            let doc = OracleDocument {
                problem: &inst.name,
                p: inst.p(),
                n0: inst.n0(),
                optimum: res.optimum,
                assignment: res.argmin.choice().iter().map(|c| c + 1).collect(),
                enumerated: res.enumerated,
            };
            emit(&json_line(&doc)?, out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Dee { instance, out } => {
            let inst = read_instance(&instance)?;
            let red = goldstein_reduce(&inst)?;
            let summary = DeeSummary {
                problem: &inst.name,
                original_sizes: inst.partition().sizes(),
                reduced_sizes: red.reduced.partition().sizes(),
                kept: red.kept.iter().map(|k| k.iter().map(|c| c + 1).collect()).collect(),
                mapping: red.mapping.iter().map(|g| g + 1).collect(),
            };
            let summary = json_line(&summary)?;
            match out {
                Some(path) => {
                    fs::write(path, serialize_instance(&red.reduced))?;
                    stdout.write_all(summary.as_bytes())?;
                }
                None => {
                    stdout.write_all(serialize_instance(&red.reduced).as_bytes())?;
                    stderr.write_all(summary.as_bytes())?;
                }
            }
            Ok(0)
        }
    }
}
