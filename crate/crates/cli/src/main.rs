//! Command-line front end for `mixident`.
//!
//! Every command prints a JSON run report on stdout; diagnostics go to
//! stderr. Exit codes: 0 success / equal / certified, 1 difference or
//! confusable alternative found, 2 inconclusive, 64 malformed input,
//! 65 invariant violation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mixident::construct::{build_counterexample, ConstructOptions};
use mixident::identify::{
    check_equal_laws, confusability_search, independence_certificate, reduce_common, CertificateVerdict, SearchConfig,
};
use mixident::lemma::run_lemma_trials;
use mixident::simulate::{bernoulli_reduce, empirical_moment, sample_groups};
use mixident::{group_law, tensor_distance, Error, Execution, Layout, Mixture, Rational, Scalar};
use serde_json::{json, Map, Value};

const EXIT_OK: u8 = 0;
const EXIT_FOUND: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_INPUT: u8 = 64;
const EXIT_INVARIANT: u8 = 65;

#[derive(Parser, Debug)]
#[command(
    name = "mixident",
    version,
    about = "Identifiability of finite mixtures from grouped samples"
)]
struct Cli {
    /// Run every command on a single thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build two distinct m-component mixtures with equal order-(2m-2) laws.
    Construct(ConstructArgs),
    /// Compare the order-n laws of two mixtures.
    Check(CheckArgs),
    /// Certify that two mixtures have different order-n laws.
    Certify(PairArgs),
    /// Search for a different mixture with (nearly) the same order-n law.
    Search(SearchArgs),
    /// Sample groups from a mixture and report the empirical law.
    Simulate(SimulateArgs),
    /// Law of the group sum of a two-atom mixture.
    ReduceBinomial(ReduceArgs),
    /// Randomized checks of the tensor-power rank laws.
    LemmaTests(LemmaArgs),
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    d: u64,
    /// Draw the mixing parameters (and bases with --random-base) from this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    random_base: bool,
    /// Write the left mixture to this file.
    #[arg(long)]
    out_left: Option<PathBuf>,
    /// Write the right mixture to this file.
    #[arg(long)]
    out_right: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Max-abs tolerance; defaults to 0 for exact inputs and 1e-12 otherwise.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Objectives at or below this count as a confusable alternative.
    #[arg(long, default_value_t = 1e-8)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    groups: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the groups here: JSON lines for `.jsonl`, CSV otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct RunReport {
    command: &'static str,
    inputs: Value,
    outputs: Value,
    timings: Map<String, Value>,
    seed: Option<u64>,
}

impl RunReport {
    fn new(command: &'static str, inputs: Value, seed: Option<u64>) -> Self {
        RunReport {
            command,
            inputs,
            outputs: Value::Null,
            timings: Map::new(),
            seed,
        }
    }

    /// Runs `f` and records its wall time under `phase`.
    fn timed<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.timings
            .insert(phase.to_string(), json!(start.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": self.timings,
            "seed": self.seed,
        })
    }
}

/// A mixture file read exactly when possible.
enum Loaded {
    Exact(Mixture<Rational>),
    Float(Mixture<f64>),
}

impl Loaded {
    fn float(&self) -> mixident::Result<Mixture<f64>> {
        match self {
            Loaded::Exact(m) => m.convert(),
            Loaded::Float(m) => Ok(m.clone()),
        }
    }

    fn exact(&self) -> Option<&Mixture<Rational>> {
        match self {
            Loaded::Exact(m) => Some(m),
            Loaded::Float(_) => None,
        }
    }

    fn backend(&self) -> &'static str {
        match self {
            Loaded::Exact(_) => "rational",
            Loaded::Float(_) => "f64",
        }
    }
}

fn load_mixture(path: &Path) -> mixident::Result<Loaded> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    match Mixture::<Rational>::from_json(&value) {
        Ok(m) => Ok(Loaded::Exact(m)),
        Err(_) => Mixture::<f64>::from_json(&value).map(Loaded::Float),
    }
}

fn write_json(path: &Path, value: &Value) -> mixident::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn exit_for(error: &Error) -> u8 {
    if error.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_INVARIANT
    }
}

fn execution(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn construct(args: &ConstructArgs, report: &mut RunReport) -> mixident::Result<u8> {
    let opts = ConstructOptions {
        m: args.m as usize,
        d: args.d as usize,
        seed: args.seed,
        random_base: args.random_base,
    };
    let pair = report.timed("construct", || build_counterexample(opts))?;
    report.timed("write", || -> mixident::Result<()> {
        if let Some(path) = &args.out_left {
            write_json(path, &pair.p.to_json())?;
        }
        if let Some(path) = &args.out_right {
            write_json(path, &pair.q.to_json())?;
        }
        Ok(())
    })?;
    report.outputs = pair.to_json();
    Ok(EXIT_OK)
}

fn check(args: &CheckArgs, report: &mut RunReport) -> mixident::Result<u8> {
    let (left, right) = report.timed("load", || -> mixident::Result<_> {
        Ok((load_mixture(&args.pair.left)?, load_mixture(&args.pair.right)?))
    })?;
    let n = args.pair.n;
    let (verdict, equal) = report.timed("check", || -> mixident::Result<_> {
        match (left.exact(), right.exact()) {
            (Some(p), Some(q)) => {
                let v = check_equal_laws(p, q, n, args.tol.unwrap_or(0.0))?;
                Ok((v.to_json(), v.equal))
            }
            _ => {
                let v = check_equal_laws(&left.float()?, &right.float()?, n, args.tol.unwrap_or(1e-12))?;
                Ok((v.to_json(), v.equal))
            }
        }
    })?;
    let mut out = verdict;
    out["backend"] = json!(if left.exact().is_some() && right.exact().is_some() {
        "rational"
    } else {
        "f64"
    });
    report.outputs = out;
    Ok(if equal { EXIT_OK } else { EXIT_FOUND })
}

fn certify_with<T: Scalar>(p: &Mixture<T>, q: &Mixture<T>, n: usize) -> mixident::Result<(Value, u8)> {
    let reduction = reduce_common(p, q, T::MERGE_TOL)?;
    let mut out = json!({ "reduction": reduction.to_json() });
    if reduction.identical {
        out["verdict"] = json!("identical");
        return Ok((out, EXIT_FOUND));
    }
    let (left, right) = (
        reduction.left.expect("not identical"),
        reduction.right.expect("not identical"),
    );
    let cert = independence_certificate(&left, &right, n)?;
    let code = match cert.verdict {
        CertificateVerdict::CertifiedDistinct => EXIT_OK,
        CertificateVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    out["verdict"] = cert.to_json()["verdict"].clone();
    out["certificate"] = cert.to_json();
    Ok((out, code))
}

fn certify(args: &PairArgs, report: &mut RunReport) -> mixident::Result<u8> {
    let (left, right) = report.timed("load", || -> mixident::Result<_> {
        Ok((load_mixture(&args.left)?, load_mixture(&args.right)?))
    })?;
    let (mut out, code) = report.timed("certify", || match (left.exact(), right.exact()) {
        (Some(p), Some(q)) => certify_with(p, q, args.n),
        _ => certify_with(&left.float()?, &right.float()?, args.n),
    })?;
    out["backend"] = json!(if left.exact().is_some() && right.exact().is_some() {
        "rational"
    } else {
        "f64"
    });
    report.outputs = out;
    Ok(code)
}

fn search(args: &SearchArgs, exec: Execution, report: &mut RunReport) -> mixident::Result<u8> {
    let target = report.timed("load", || load_mixture(&args.target))?;
    let target = target.float()?;
    let config = SearchConfig {
        restarts: args.restarts,
        delta: args.delta,
        seed: args.seed,
        execution: exec,
        ..SearchConfig::default()
    };
    let result = report.timed("search", || confusability_search(&target, args.n, &config))?;
    let identifying_order = 2 * target.order() - 1;
    let (verdict, code) = if result.objective <= args.threshold {
        ("confusable_alternative_found", EXIT_FOUND)
    } else if args.n >= identifying_order {
        ("no_alternative_found", EXIT_OK)
    } else {
        ("inconclusive", EXIT_INCONCLUSIVE)
    };
    let mut out = result.to_json();
    out["verdict"] = json!(verdict);
    out["threshold"] = json!(args.threshold);
    out["identifying_order"] = json!(identifying_order);
    report.outputs = out;
    Ok(code)
}

fn simulate(args: &SimulateArgs, exec: Execution, report: &mut RunReport) -> mixident::Result<u8> {
    let mixture = report.timed("load", || load_mixture(&args.mixture))?.float()?;
    let data = report.timed("sample", || {
        sample_groups(&mixture, args.n, args.groups, args.seed, exec)
    })?;
    let empirical = report.timed("moment", || empirical_moment::<f64>(&data, exec))?;
    let truth = group_law(&mixture, args.n, Layout::Dense)?;
    let distance = tensor_distance(&empirical, &truth)?;
    if let Some(path) = &args.out {
        report.timed("write", || -> mixident::Result<()> {
            let file = BufWriter::new(File::create(path)?);
            if path.extension().is_some_and(|e| e == "jsonl") {
                data.write_jsonl(file)
            } else {
                data.write_csv(file)
            }
        })?;
    }
    report.outputs = json!({
        "groups": data.len(),
        "n": args.n,
        "d": data.dim(),
        "empirical": empirical.to_json(),
        "distance_to_law": { "max_abs": distance.max_abs, "l2": distance.l2() },
        "out": args.out.as_ref().map(|p| p.display().to_string()),
    });
    Ok(EXIT_OK)
}

fn reduce_binomial(args: &ReduceArgs, report: &mut RunReport) -> mixident::Result<u8> {
    let mixture = report.timed("load", || load_mixture(&args.mixture))?;
    let pmf = report.timed("reduce", || -> mixident::Result<Vec<Value>> {
        Ok(match &mixture {
            Loaded::Exact(m) => bernoulli_reduce(m, args.n)?.iter().map(Scalar::to_json).collect(),
            Loaded::Float(m) => bernoulli_reduce(m, args.n)?.iter().map(Scalar::to_json).collect(),
        })
    })?;
    report.outputs = json!({ "n": args.n, "pmf": pmf, "backend": mixture.backend() });
    Ok(EXIT_OK)
}

fn lemma_tests(args: &LemmaArgs, exec: Execution, report: &mut RunReport) -> mixident::Result<u8> {
    let result = report.timed("trials", || run_lemma_trials(args.trials, args.seed, exec))?;
    report.outputs = result.to_json();
    Ok(if result.passed() { EXIT_OK } else { EXIT_FOUND })
}

fn run(cli: &Cli) -> (RunReport, mixident::Result<u8>) {
    let exec = execution(cli);
    let path = |p: &Path| p.display().to_string();
    match &cli.command {
        Command::Construct(a) => {
            let mut r = RunReport::new(
                "construct",
                json!({ "m": a.m, "d": a.d, "seed": a.seed, "random_base": a.random_base,
                        "out_left": a.out_left.as_deref().map(path), "out_right": a.out_right.as_deref().map(path) }),
                a.seed,
            );
            let code = construct(a, &mut r);
            (r, code)
        }
        Command::Check(a) => {
            let mut r = RunReport::new(
                "check",
                json!({ "left": path(&a.pair.left), "right": path(&a.pair.right), "n": a.pair.n, "tol": a.tol }),
                None,
            );
            let code = check(a, &mut r);
            (r, code)
        }
        Command::Certify(a) => {
            let mut r = RunReport::new(
                "certify",
                json!({ "left": path(&a.left), "right": path(&a.right), "n": a.n }),
                None,
            );
            let code = certify(a, &mut r);
            (r, code)
        }
        Command::Search(a) => {
            let mut r = RunReport::new(
                "search",
                json!({ "target": path(&a.target), "n": a.n, "restarts": a.restarts, "delta": a.delta,
                        "seed": a.seed, "threshold": a.threshold }),
                Some(a.seed),
            );
            let code = search(a, exec, &mut r);
            (r, code)
        }
        Command::Simulate(a) => {
            let mut r = RunReport::new(
                "simulate",
                json!({ "mixture": path(&a.mixture), "n": a.n, "groups": a.groups, "seed": a.seed,
                        "out": a.out.as_deref().map(path) }),
                Some(a.seed),
            );
            let code = simulate(a, exec, &mut r);
            (r, code)
        }
        Command::ReduceBinomial(a) => {
            let mut r = RunReport::new(
                "reduce-binomial",
                json!({ "mixture": path(&a.mixture), "n": a.n }),
                None,
            );
            let code = reduce_binomial(a, &mut r);
            (r, code)
        }
        Command::LemmaTests(a) => {
            let mut r = RunReport::new(
                "lemma-tests",
                json!({ "trials": a.trials, "seed": a.seed }),
                Some(a.seed),
            );
            let code = lemma_tests(a, exec, &mut r);
            (r, code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let (mut report, result) = run(&cli);
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mixident {}: {e}", report.command);
            report.outputs = json!({ "error": e.to_string() });
            exit_for(&e)
        }
    };
    let text = match serde_json::to_string_pretty(&report.to_json()) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("cannot serialize report: {e}");
            return ExitCode::from(EXIT_INVARIANT);
        }
    };
    // A closed downstream pipe is not an error of this run.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    ExitCode::from(code)
}
