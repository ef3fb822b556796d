//! Command-line front end: `eval`, `simulate`, `sweep`, `optimize` and
//! `quantum`.
//!
//! Single evaluations print a JSON envelope
//! `{"schema_version": "1", "command", "inputs", "results"}` on stdout;
//! `sweep` prints CSV. Diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid model, 3 runtime error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lhv_core::search::{evaluate, linspace};
use lhv_core::{
    ch_with_memory, estimate_ch_mc, maximize_ch, paper_model, quantum_reference, sweep_phi, validate_response, Angle,
    Error, LhvModel, MemoryKind, MemoryRule, ModelFile, RunReport, SearchSpace, Tally,
};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID_MODEL: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const SWEEP_HEADER: &str = "phi,b,term_scaled,term_quadratic,term_offset";

#[derive(Debug, Parser)]
#[command(name = "lhv", version, about = "Local hidden variable models with time-correlated detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form CH parameter at one angle.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        rule: RuleArgs,
        /// Effective angle φ.
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        /// Read angles in degrees.
        #[arg(long)]
        deg: bool,
        /// Print the resolved model as a model file instead of the envelope.
        #[arg(long)]
        emit_model: bool,
    },
    /// Monte Carlo estimate of the CH parameter.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long)]
        deg: bool,
        /// Number of two-event blocks per angle.
        #[arg(long, default_value_t = 1_000_000)]
        pairs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        threads: u32,
    },
    /// CSV table of the CH parameter over an angle grid.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, allow_negative_numbers = true)]
        phi_start: f64,
        #[arg(long, allow_negative_numbers = true)]
        phi_end: f64,
        /// Number of grid points, both ends included.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long)]
        deg: bool,
    },
    /// Multi-start Nelder–Mead maximization of the CH parameter.
    Optimize {
        /// Search space as inline JSON or a path to a JSON file.
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave the per-evaluation trace out of the output.
        #[arg(long)]
        no_trace: bool,
    },
    /// Quantum prediction for maximally entangled pairs.
    Quantum {
        /// Detector efficiency in [0, 1].
        #[arg(long)]
        eta: f64,
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long)]
        deg: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelChoice {
    Paper,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model (default: paper).
    #[arg(long, value_enum, conflicts_with = "model_file")]
    model: Option<ModelChoice>,
    /// JSON model file `{"alice": {a0,a1,a2}, "bob": {a0,a1,a2}}`.
    #[arg(long)]
    model_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleChoice {
    None,
    Inhibit,
    Enhance,
}

#[derive(Debug, Args)]
struct RuleArgs {
    #[arg(long, value_enum, default_value_t = RuleChoice::None)]
    rule: RuleChoice,
    /// Memory strength in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidResponse { .. } => EXIT_INVALID_MODEL,
            Error::Range { .. } | Error::EmptySpace | Error::InvalidSpace(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<String, Failure>;

/// Parses `argv` (including the program name), runs the command and writes
/// its output. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_RUNTIME
            }
        },
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Eval {
            model,
            rule,
            phi,
            deg,
            emit_model,
        } => cmd_eval(&model, &rule, angle(phi, deg), emit_model),
        Command::Simulate {
            model,
            rule,
            phi,
            deg,
            pairs,
            seed,
            threads,
        } => cmd_simulate(&model, &rule, angle(phi, deg), pairs, seed, threads as usize),
        Command::Sweep {
            model,
            rule,
            phi_start,
            phi_end,
            steps,
            deg,
        } => cmd_sweep(&model, &rule, angle(phi_start, deg), angle(phi_end, deg), steps as usize),
        Command::Optimize {
            space,
            restarts,
            seed,
            no_trace,
        } => cmd_optimize(&space, restarts, seed, !no_trace),
        Command::Quantum { eta, phi, deg } => cmd_quantum(eta, angle(phi, deg)),
    }
}

fn angle(value: f64, deg: bool) -> Angle {
    if deg {
        Angle::degrees(value)
    } else {
        Angle::radians(value)
    }
}

fn finite_angle(a: Angle, name: &str) -> Result<Angle, Failure> {
    if a.rad().is_finite() {
        Ok(a)
    } else {
        Err(Failure::usage(format!("{name} must be finite")))
    }
}

fn envelope(command: &str, inputs: Value, results: Value) -> CmdResult {
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "results": results,
    });
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Reads and validates a model file.
pub fn load_model_file(path: &Path) -> Result<LhvModel, (i32, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| (EXIT_USAGE, format!("{}: {e}", path.display())))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| (EXIT_USAGE, format!("{}: malformed model file: {e}", path.display())))?;
    LhvModel::try_from(file).map_err(|e| {
        let f = Failure::from(e);
        (f.code, format!("{}: {}", path.display(), f.message))
    })
}

fn resolve_model(args: &ModelArgs) -> Result<(LhvModel, Value), Failure> {
    match &args.model_file {
        Some(path) => {
            let model = load_model_file(path).map_err(|(code, message)| Failure { code, message })?;
            Ok((model, json!({ "file": path.display().to_string(), "coefficients": model.to_file() })))
        }
        None => {
            let model = paper_model();
            Ok((model, json!({ "builtin": "paper", "coefficients": model.to_file() })))
        }
    }
}

fn resolve_rule(args: &RuleArgs) -> Result<MemoryRule, Failure> {
    let kind = match args.rule {
        RuleChoice::None => return Ok(MemoryRule::memoryless()),
        RuleChoice::Inhibit => MemoryKind::Inhibit,
        RuleChoice::Enhance => MemoryKind::Enhance,
    };
    Ok(MemoryRule::new(kind, args.strength)?)
}

fn rule_json(rule: &MemoryRule) -> Value {
    json!({ "kind": rule.kind().name(), "strength": rule.effective_strength() })
}

fn cmd_eval(model: &ModelArgs, rule: &RuleArgs, phi: Angle, emit_model: bool) -> CmdResult {
    let phi = finite_angle(phi, "phi")?;
    let (model, model_json) = resolve_model(model)?;
    if emit_model {
        let mut text = serde_json::to_string_pretty(&model.to_file()).expect("plain data serializes");
        text.push('\n');
        return Ok(text);
    }
    let rule = resolve_rule(rule)?;
    let br = ch_with_memory(&model, &rule, phi)?;
    let inputs = json!({ "model": model_json, "rule": rule_json(&rule), "phi": phi.normalized().rad() });
    let results = json!({
        "b": br.b,
        "decomposition": br.decomposition,
        "rates_phi": br.rates_phi,
        "rates_3phi": br.rates_3phi,
        "validity": {
            "alice": validate_response(model.alice()),
            "bob": validate_response(model.bob()),
        },
    });
    envelope("eval", inputs, results)
}

fn run_summary(r: &RunReport) -> Value {
    json!({
        "tally": r.tally,
        "p_a": r.p_a,
        "p_b": r.p_b,
        "p_ab": r.p_ab,
        "batch_means": {
            "p_a": r.batch_estimate(Tally::p_a),
            "p_b": r.batch_estimate(Tally::p_b),
            "p_ab": r.batch_estimate(Tally::p_ab),
        },
    })
}

fn cmd_simulate(model: &ModelArgs, rule: &RuleArgs, phi: Angle, pairs: u64, seed: u64, threads: usize) -> CmdResult {
    let phi = finite_angle(phi, "phi")?;
    let (model, model_json) = resolve_model(model)?;
    let rule = resolve_rule(rule)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    })?;
    let est = pool.install(|| estimate_ch_mc(&model, &rule, phi, pairs, seed))?;
    let analytic = ch_with_memory(&model, &rule, phi).ok().map(|br| br.b);
    let inputs = json!({
        "model": model_json,
        "rule": rule_json(&rule),
        "phi": phi.normalized().rad(),
        "pairs": pairs,
        "seed": seed,
        "threads": threads,
    });
    let results = json!({
        "b": est.b,
        "analytic_b": analytic,
        "at_phi": run_summary(&est.at_phi),
        "at_3phi": run_summary(&est.at_3phi),
    });
    envelope("simulate", inputs, results)
}

fn cmd_sweep(model: &ModelArgs, rule: &RuleArgs, start: Angle, end: Angle, steps: usize) -> CmdResult {
    let start = finite_angle(start, "phi-start")?;
    let end = finite_angle(end, "phi-end")?;
    let (model, _) = resolve_model(model)?;
    let rule = resolve_rule(rule)?;
    let rows = sweep_phi(&model, &rule, &linspace(start, end, steps))?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in rows {
        let br = row.breakdown;
        let _ = write!(csv, "{},{}", row.phi.rad(), br.b);
        match br.decomposition {
            Some(d) => {
                let _ = writeln!(csv, ",{},{},{}", d.scaled, d.quadratic, d.offset);
            }
            None => csv.push_str(",,,\n"),
        }
    }
    Ok(csv)
}

fn load_space(arg: &str) -> Result<SearchSpace, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::usage(format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("malformed search space: {e}")))
}

fn cmd_optimize(space: &str, restarts: usize, seed: u64, with_trace: bool) -> CmdResult {
    let space = load_space(space)?;
    let result = maximize_ch(&space, restarts, seed)?;
    let check = evaluate(space.rule, &result.best_params);
    let mut results = to_value(&result);
    results["reevaluated_b"] = json!(check.b);
    if !with_trace {
        results.as_object_mut().expect("struct serializes to object").remove("trace");
    }
    let inputs = json!({ "space": space, "restarts": restarts, "seed": seed });
    envelope("optimize", inputs, results)
}

fn cmd_quantum(eta: f64, phi: Angle) -> CmdResult {
    let phi = finite_angle(phi, "phi")?;
    let b_qm = quantum_reference(eta, phi)?;
    envelope(
        "quantum",
        json!({ "eta": eta, "phi": phi.normalized().rad() }),
        json!({ "b_qm": b_qm, "violates_bound": b_qm > 1.0 }),
    )
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
