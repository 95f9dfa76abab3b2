//! `rsi` — randomized subspace iteration experiment harness.
//!
//! Subcommands:
//!   gen    write a synthesized matrix (text format) to a file
//!   run    one trial: synthesize or load A, iterate, print one CSV row
//!   trace  like `run --trace`, plus a verbose inequality report on stderr
//!   sweep  a seeded grid of trials with a per-cell summary
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 all trials in some
//! cell failed outright.

use clap::{Args, Parser, Subcommand};
use rsi_core::harness::{
    make_spectrum, parse_spectrum, run_trial, run_trial_on_matrix, render_summary, sweep,
    synthesis_rng, synthesize_matrix, write_csv, SweepConfig, TrialConfig, CSV_HEADER,
};
use rsi_core::matrix::{fmt_f64, Matrix};
use rsi_core::subspace::IterationConfig;
use rsi_core::tracer::{trace, TraceReport, TraceStatus};
use std::fs;
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rsi", version, about = "Gap-independent randomized subspace iteration harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a matrix with a prescribed spectrum and write it to a file.
    Gen(GenArgs),
    /// Run a single trial and print one CSV row to stdout.
    Run(RunArgs),
    /// Run a single trial with the full diagnostic trace; the verbose
    /// inequality report goes to stderr.
    Trace(RunArgs),
    /// Run a grid of trials; CSV to --out (or stdout), summary to stderr.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Spectrum spec: flat:V | step:POS:HIGH:LOW | geometric:FIRST:RATIO |
    /// zero-gap:HEAD:KNEE:RATIO | custom:V1,V2,...
    #[arg(long)]
    spectrum: String,
    /// Knee position for zero-gap spectra.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Explicit iteration count, overriding the schedule.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 1)]
    reorth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Spectrum spec (see `gen`); required unless --matrix is given.
    #[arg(long)]
    spectrum: Option<String>,
    /// Load A from a matrix text file instead of synthesizing.
    #[arg(long)]
    matrix: Option<String>,
    /// Populate the trace columns of the CSV row.
    #[arg(long)]
    trace: bool,
    /// Measure the residual with the exact SVD oracle instead of the power
    /// method (desk scale only).
    #[arg(long)]
    exact_residual: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// One or more epsilon values (repeat the flag or comma-separate).
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Multipliers applied to the scheduled t (result clamped to >= 1).
    #[arg(long = "t-mult", value_delimiter = ',', default_values_t = [1.0])]
    t_mult: Vec<f64>,
    /// Spectrum specs; repeat the flag for several families.
    #[arg(long, required = true)]
    spectrum: Vec<String>,
    /// Trials per cell (stream indices 0..N).
    #[arg(long)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reorth: usize,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    exact_residual: bool,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Run(args) => cmd_run(&args, false),
        Command::Trace(args) => cmd_run(&args, true),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Io(String),
}

impl From<rsi_core::Error> for CliError {
    fn from(e: rsi_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn cmd_gen(args: &GenArgs) -> Result<u8, CliError> {
    let length = args.n.min(args.m);
    let spec = parse_spectrum(&args.spectrum, length, args.k)?;
    let sigma = make_spectrum(&spec)?;
    let mut rng = synthesis_rng(args.seed, args.stream);
    let a = synthesize_matrix(&sigma, args.n, args.m, &mut rng)?;
    fs::write(&args.out, a.to_text())?;
    Ok(0)
}

fn cmd_run(args: &RunArgs, force_trace: bool) -> Result<u8, CliError> {
    let with_trace = args.trace || force_trace;
    let record = if let Some(path) = &args.matrix {
        let text = fs::read_to_string(path)?;
        let a = Matrix::from_text(&text)?;
        let cfg = TrialConfig {
            n: a.rows(),
            m: a.cols(),
            k: args.k,
            epsilon: args.eps,
            c: args.c,
            t_override: args.t,
            reorth_period: args.reorth,
            seed: args.seed,
            stream: args.stream,
            // placeholder; run_trial_on_matrix reads ground truth from the oracle
            spectrum: rsi_core::harness::SpectrumSpec::Custom { values: vec![1.0] },
            with_trace,
            exact_residual: args.exact_residual,
        };
        if with_trace {
            print_trace_report(&a, &cfg)?;
        }
        run_trial_on_matrix(&cfg, &a)
    } else {
        let spectrum_text = args
            .spectrum
            .as_ref()
            .ok_or_else(|| CliError::Usage("either --spectrum or --matrix is required".into()))?;
        if args.n == 0 || args.m == 0 {
            return Err(CliError::Usage("--n and --m are required with --spectrum".into()));
        }
        let spectrum = parse_spectrum(spectrum_text, args.n.min(args.m), args.k)?;
        let cfg = TrialConfig {
            n: args.n,
            m: args.m,
            k: args.k,
            epsilon: args.eps,
            c: args.c,
            t_override: args.t,
            reorth_period: args.reorth,
            seed: args.seed,
            stream: args.stream,
            spectrum,
            with_trace,
            exact_residual: args.exact_residual,
        };
        if with_trace {
            let sigma = make_spectrum(&cfg.spectrum)?;
            let mut mrng = synthesis_rng(cfg.seed, cfg.stream);
            let a = synthesize_matrix(&sigma, cfg.n, cfg.m, &mut mrng)?;
            print_trace_report(&a, &cfg)?;
        }
        run_trial(&cfg)
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", CSV_HEADER)?;
    writeln!(out, "{}", record.csv_row())?;
    Ok(0)
}

fn print_trace_report(a: &Matrix, cfg: &TrialConfig) -> Result<(), CliError> {
    let icfg = IterationConfig {
        k: cfg.k,
        epsilon: cfg.epsilon,
        c: cfg.c,
        t_override: cfg.t_override,
        reorth_period: cfg.reorth_period,
        seed: cfg.seed,
        stream_index: cfg.stream,
    };
    let report = trace(a, &icfg)?;
    eprint!("{}", render_trace(&report));
    Ok(())
}

fn render_trace(r: &TraceReport) -> String {
    let mut s = String::new();
    let skp1 = r.sigma_kplus1();
    s.push_str(&format!(
        "trace: k={} eps={} t_used={} status={:?}\n",
        r.k, r.epsilon, r.t_used, r.status
    ));
    s.push_str(&format!(
        "  sigma_1 = {}  sigma_k+1 = {}\n",
        fmt_f64(r.sigma.first().copied().unwrap_or(0.0)),
        fmt_f64(skp1)
    ));
    s.push_str(&format!(
        "  residual bound:      {} <= {}  [{}]\n",
        fmt_f64(r.residual),
        fmt_f64(r.bound),
        pass(r.residual <= r.bound * (1.0 + 1e-6) || skp1 == 0.0)
    ));
    s.push_str(&format!(
        "  sketch blocks:       |G'2| = {}  |G'1^-1| = {}\n",
        fmt_f64(r.g2_norm),
        fmt_f64(r.g1_inv_norm)
    ));
    match r.kprime {
        Some(kp) => s.push_str(&format!("  effective rank k' = {}\n", kp)),
        None => s.push_str("  effective rank: none (bound trivially satisfied)\n"),
    }
    match &r.y {
        Some(y) => {
            let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            s.push_str(&format!(
                "  worst direction:     |y| = {}  [{}]\n",
                fmt_f64(ynorm),
                pass((ynorm - 1.0).abs() <= 1e-9)
            ));
            if let Some(worst) = r.worst_margin() {
                s.push_str(&format!(
                    "  coefficient margins: worst = {}  [{}]\n",
                    fmt_f64(worst),
                    pass(worst >= -1e-6)
                ));
            }
            if r.status == TraceStatus::Ok {
                s.push_str(&format!(
                    "  tail energy:         {} <= {}  [{}]  (unsquared form: {})\n",
                    fmt_f64(r.tail_sum),
                    fmt_f64(r.tail_limit),
                    pass(r.tail_sum <= r.tail_limit * (1.0 + 1e-9)),
                    fmt_f64(r.tail_limit_unsquared)
                ));
            }
        }
        None => s.push_str("  worst direction: degenerate (span captured everything)\n"),
    }
    s.push_str(&format!(
        "  iteration threshold: t_used = {} vs min_t = {}  (sigma-scaled form: {})\n",
        r.t_used,
        fmt_f64(r.min_t),
        fmt_f64(r.min_t_sigma_scaled)
    ));
    if (r.t_used as f64) >= r.min_t {
        s.push_str(&format!(
            "  sufficiency:         t_used >= min_t so bound must hold  [{}]\n",
            pass(r.residual <= r.bound * (1.0 + 1e-6) || skp1 == 0.0)
        ));
    }
    s
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, CliError> {
    let length = args.n.min(args.m);
    let spectra = args
        .spectrum
        .iter()
        .map(|s| parse_spectrum(s, length, args.k))
        .collect::<rsi_core::Result<Vec<_>>>()?;
    let cfg = SweepConfig {
        n: args.n,
        m: args.m,
        k: args.k,
        c: args.c,
        epsilons: args.eps.clone(),
        t_multipliers: args.t_mult.clone(),
        spectra,
        seeds: args.seeds,
        seed: args.seed,
        reorth_period: args.reorth,
        with_trace: args.trace,
        exact_residual: args.exact_residual,
    };
    let (records, summaries) = sweep(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            write_csv(&records, &mut file)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_csv(&records, &mut out)?;
        }
    }
    eprint!("{}", render_summary(&summaries));
    let any_dead_cell = summaries.iter().any(|s| s.trials > 0 && s.errors == s.trials);
    if any_dead_cell {
        eprintln!("error: at least one cell failed on every trial");
        return Ok(3);
    }
    Ok(0)
}
