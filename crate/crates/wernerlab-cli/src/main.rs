//! Command-line front end for the wernerlab library.
//!
//! Subcommands: `eval` (form values with per-subset breakdown), `verify`
//! (named check suites), `search` (fixed-rank minimization), `alpha`
//! (boundary bisection) and `sweep` ((p, γ) grids to CSV).
//!
//! Exit codes: 0 success, 1 a verify suite failed, 2 bad input or I/O,
//! 3 a violation was found while `--expect-positive` was set.  The default
//! seed is 7, overridable by the `WERNERLAB_SEED` environment variable or
//! per-command `--seed`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wernerlab::forms::{appendix_counterexample, q_form_breakdown, FormSpec};
use wernerlab::search::{
    alpha_opt_estimate, minimize_form, random_matrix, sweep_csv, sweep_grid, EnsembleKind, Field,
    DEFAULT_MAX_ITERS, DEFAULT_RESTARTS, VIOLATION_THRESHOLD,
};
use wernerlab::suites::{run_suite, SuiteConfig, DEFAULT_SEED, DEFAULT_TRIALS};
use wernerlab::tensorspace::{flip, MultipartiteMatrix};
use wernerlab::werner::{werner_state, WernerParams};
use wernerlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wernerlab",
    version,
    about = "Partial-trace quadratic forms: evaluation, verification, violation search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a form on a matrix from JSON or a named builder.
    Eval(EvalArgs),
    /// Run one of the named verification suites.
    Verify(VerifyArgs),
    /// Minimize a form over unit-norm rank-r operators.
    Search(SearchArgs),
    /// Bisect for the largest non-violated |α|.
    Alpha(AlphaArgs),
    /// Tabulate α boundary estimates over a (p, γ) grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Builder {
    /// Identity on the given dims.
    Identity,
    /// Flip (swap) operator on [d, d].
    Flip,
    /// Werner state ρ_α on [d, d].
    Werner,
    /// The exact violating family C(n, d) near α = −1/2.
    Appendix,
    /// Seeded rank-1 plus normal-part sample on the given dims.
    Structured,
}

#[derive(Args)]
struct EvalArgs {
    /// Matrix JSON file ({"dims", "re", "im"}).
    #[arg(long, conflicts_with = "builder")]
    input: Option<PathBuf>,
    /// Canonical matrix builder (no file needed).
    #[arg(long)]
    builder: Option<Builder>,
    /// Subsystem dimensions for the identity/structured builders.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Copy count for the appendix builder.
    #[arg(long)]
    n: Option<usize>,
    /// Local dimension for the flip/werner/appendix builders.
    #[arg(long)]
    d: Option<usize>,
    /// Offset below −1/2 for the appendix builder.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Rank of the structured builder sample.
    #[arg(long)]
    rank: Option<usize>,
    /// Scalar field of the structured builder sample.
    #[arg(long, default_value = "complex", value_parser = parse_field)]
    field: Field,
    /// Seed for the structured builder sample.
    #[arg(long)]
    seed: Option<u64>,
    /// Sign pattern v (defaults to all ones).
    #[arg(long, value_delimiter = ',')]
    v: Option<Vec<u8>>,
    /// Schatten exponent p ("inf" allowed).
    #[arg(long, default_value = "2", allow_negative_numbers = true)]
    p: f64,
    /// Norm power γ.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Form parameter α.
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name: rank1, cor33, thm45, tripartite, spectral-bounds,
    /// creation-annihilation, werner-equivalence, appendix, lemma-a1.
    #[arg(long)]
    suite: String,
    /// Trials per randomized check.
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest copy count for the lemma-a1 grid.
    #[arg(long, default_value_t = 12)]
    n_max: usize,
}

#[derive(Args)]
struct SearchArgs {
    /// Sign pattern v.
    #[arg(long, value_delimiter = ',')]
    v: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Factorization rank (defaults to full).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value = "complex", value_parser = parse_field)]
    field: Field,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value = "2", allow_negative_numbers = true)]
    p: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Exit 3 if the minimum violates positivity.
    #[arg(long)]
    expect_positive: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaArgs {
    #[arg(long, value_delimiter = ',')]
    v: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value = "complex", value_parser = parse_field)]
    field: Field,
    #[arg(long, default_value = "2", allow_negative_numbers = true)]
    p: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Bisection width at which to stop.
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Exit 3 if any probe found a violation.
    #[arg(long)]
    expect_positive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    v: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value = "complex", value_parser = parse_field)]
    field: Field,
    /// p axis: "start:end:step", a comma list, or one value.
    #[arg(long)]
    p: String,
    /// γ axis, same syntax as --p.
    #[arg(long)]
    gamma: String,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Exit 3 if any cell's estimate dipped below 1.
    #[arg(long)]
    expect_positive: bool,
    /// CSV output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_field(s: &str) -> std::result::Result<Field, String> {
    Field::from_str(s).map_err(|e| e.to_string())
}

/// --seed flag, else WERNERLAB_SEED, else the library default.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("WERNERLAB_SEED") {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Argument(format!("WERNERLAB_SEED must be a u64, got '{text}'"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Axis syntax: "start:end:step" (inclusive), "a,b,c", or a single value.
fn parse_axis(text: &str) -> Result<Vec<f64>> {
    let parse_one = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Argument(format!("cannot parse '{t}' as a number")))
    };
    if let Some((start_text, rest)) = text.split_once(':') {
        let (end_text, step_text) = rest
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("range '{text}' needs start:end:step")))?;
        let (start, end, step) = (
            parse_one(start_text)?,
            parse_one(end_text)?,
            parse_one(step_text)?,
        );
        if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
            return Err(Error::Argument(format!(
                "range '{text}' must have finite start ≤ end and step > 0"
            )));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| start + k as f64 * step).collect())
    } else {
        text.split(',').map(parse_one).collect()
    }
}

fn full_rank(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let require = |opt: Option<usize>, what: &str| -> Result<usize> {
        opt.ok_or_else(|| Error::Argument(format!("builder needs --{what}")))
    };
    let (matrix, source) = match (&args.input, args.builder) {
        (Some(path), None) => (
            MultipartiteMatrix::load_json(path)?,
            format!("file:{}", path.display()),
        ),
        (None, Some(Builder::Identity)) => {
            let dims = args
                .dims
                .clone()
                .ok_or_else(|| Error::Argument("identity builder needs --dims".into()))?;
            (MultipartiteMatrix::identity(dims)?, "identity".into())
        }
        (None, Some(Builder::Flip)) => {
            let d = require(args.d, "d")?;
            (flip(d)?, format!("flip(d={d})"))
        }
        (None, Some(Builder::Werner)) => {
            let d = require(args.d, "d")?;
            let params = WernerParams::new(d, args.alpha)?;
            (werner_state(&params)?, format!("werner(d={d}, α=alpha)"))
        }
        (None, Some(Builder::Appendix)) => {
            let n = require(args.n, "n")?;
            let d = require(args.d, "d")?;
            let eps = args
                .eps
                .ok_or_else(|| Error::Argument("appendix builder needs --eps".into()))?;
            let (c, _, _) = appendix_counterexample(n, d, eps)?;
            (c, format!("appendix(n={n}, d={d}, eps={eps})"))
        }
        (None, Some(Builder::Structured)) => {
            let dims = args
                .dims
                .clone()
                .ok_or_else(|| Error::Argument("structured builder needs --dims".into()))?;
            let rank = require(args.rank, "rank")?;
            let seed = resolve_seed(args.seed)?;
            let c = random_matrix(
                EnsembleKind::StructuredRank1PlusNormal,
                &dims,
                rank,
                args.field,
                seed,
            )?;
            (c, format!("structured(rank={rank}, seed={seed})"))
        }
        _ => {
            return Err(Error::Argument(
                "provide exactly one of --input or --builder".into(),
            ))
        }
    };

    let v = args
        .v
        .unwrap_or_else(|| vec![1; matrix.n_subsystems()]);
    let spec = FormSpec::new(v, args.p, args.gamma, args.alpha)?;
    let terms = q_form_breakdown(&spec, &matrix)?;
    let q: f64 = terms.iter().map(|t| t.value).sum();

    println!(
        "source={source} dims={:?} v={:?} p={} gamma={} alpha={}",
        matrix.dims(),
        spec.v,
        spec.p,
        spec.gamma,
        spec.alpha
    );
    for term in &terms {
        println!(
            "  J={:<12} coeff {:+.6e}  norm {:.12e}  term {:+.12e}",
            term.subset.to_string(),
            term.coefficient,
            term.norm,
            term.value
        );
    }
    println!("q = {q:.12e}");
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let config = SuiteConfig {
        trials: args.trials,
        seed: resolve_seed(args.seed)?,
        n_max: args.n_max,
    };
    let report = run_suite(&args.suite, &config)?;
    println!(
        "suite {} (trials {}, seed {}, n_max {})",
        report.suite, config.trials, config.seed, config.n_max
    );
    print!("{}", report.render());
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_search(args: SearchArgs) -> Result<u8> {
    let spec = FormSpec::new(args.v.clone(), args.p, args.gamma, args.alpha)?;
    let rank = args.rank.unwrap_or_else(|| full_rank(&args.dims));
    let seed = resolve_seed(args.seed)?;
    let report = minimize_form(
        &spec,
        &args.dims,
        rank,
        args.field,
        args.restarts,
        args.max_iters,
        seed,
    )?;
    let violated = report.best_value < VIOLATION_THRESHOLD;
    let doc = json!({
        "command": "search",
        "violation_threshold": VIOLATION_THRESHOLD,
        "violated": violated,
        "report": report,
    });
    write_or_print(&args.out, &serde_json::to_string_pretty(&doc)?)?;
    eprintln!(
        "best_value = {:.12e} ({})",
        report.best_value,
        if violated { "violation" } else { "no violation" }
    );
    Ok(if violated && args.expect_positive { 3 } else { 0 })
}

fn cmd_alpha(args: AlphaArgs) -> Result<u8> {
    let spec = FormSpec::new(args.v.clone(), args.p, args.gamma, 0.0)?;
    let rank = args.rank.unwrap_or_else(|| full_rank(&args.dims));
    let seed = resolve_seed(args.seed)?;
    let estimate = alpha_opt_estimate(
        &spec.v,
        args.p,
        args.gamma,
        rank,
        &args.dims,
        args.field,
        args.tol,
        seed,
        args.restarts,
        args.max_iters,
    )?;
    let violated = estimate.probes.iter().any(|probe| probe.violated);
    let doc = json!({
        "command": "alpha",
        "config": {
            "v": spec.v,
            "p": serde_json::to_value(&spec)?["p"].clone(),
            "gamma": args.gamma,
            "dims": args.dims,
            "rank": rank,
            "field": args.field,
            "bisect_tol": args.tol,
            "seed": seed,
            "restarts": args.restarts,
            "max_iters": args.max_iters,
        },
        "estimate": estimate,
    });
    write_or_print(&args.out, &serde_json::to_string_pretty(&doc)?)?;
    eprintln!(
        "alpha_opt estimate = {:.6} (probes: {})",
        estimate.estimate,
        estimate.probes.len()
    );
    Ok(if violated && args.expect_positive { 3 } else { 0 })
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let p_values = parse_axis(&args.p)?;
    let gamma_values = parse_axis(&args.gamma)?;
    let rank = args.rank.unwrap_or_else(|| full_rank(&args.dims));
    let seed = resolve_seed(args.seed)?;
    let rows = sweep_grid(
        &args.v,
        &p_values,
        &gamma_values,
        rank,
        &args.dims,
        args.field,
        args.tol,
        seed,
        args.restarts,
        args.max_iters,
        args.out.as_deref(),
    )?;
    if args.out.is_none() {
        print!("{}", sweep_csv(&rows));
    }
    eprintln!(
        "sweep: {} rows ({} x {}), dims {:?}, rank {}, field {}, tol {}, seed {}, restarts {}, max_iters {}{}",
        rows.len(),
        p_values.len(),
        gamma_values.len(),
        args.dims,
        rank,
        args.field,
        args.tol,
        seed,
        args.restarts,
        args.max_iters,
        args.out
            .as_ref()
            .map(|p| format!(", wrote {}", p.display()))
            .unwrap_or_default()
    );
    let violated = rows.iter().any(|row| row.estimate < 1.0);
    Ok(if violated && args.expect_positive { 3 } else { 0 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Search(args) => cmd_search(args),
        Command::Alpha(args) => cmd_alpha(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
