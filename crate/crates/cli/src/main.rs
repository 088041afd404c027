//! `stein-gamma` command-line driver.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stein_gamma::bounds::{cached_constant, BoundReport};
use stein_gamma::distance::{W1Method, EXACT_CAP};
use stein_gamma::experiments::{
    example1_sweep, example2_sweep, fit_rate, sweep_rows, GapConfig, RateSeries, SweepRow, DEFAULT_SAMPLES,
    DEFAULT_SWEEP,
};
use stein_gamma::stein::{suite, two_sided_grid};
use stein_gamma::{selftest, GammaNu, QuadratureSpec, SteinEvaluator, TestFunction};

const EXIT_INVARIANT: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "stein-gamma",
    version,
    about = "Centered Gamma approximation bounds for Wiener chaos vectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, clap::Args)]
struct Options {
    /// Degrees of freedom of the target law.
    #[arg(long, global = true, default_value_t = 1.0)]
    nu: f64,
    /// Comma separated values of n.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    n_sweep: Vec<usize>,
    /// Decay exponent of Example 2.
    #[arg(long, global = true, default_value_t = 1.0)]
    a: f64,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the invariant checks of every module.
    Selftest,
    /// Sweep Example 1: U_n against F(1) jointly with G.
    Example1,
    /// Sweep Example 2: U_n against F(1) jointly with V_n.
    Example2,
    /// Tabulate the Stein solution for one test function.
    SteinSolve {
        /// One of: x, x*y1, sin, tanh, bump, x*cos(y1).
        #[arg(long, default_value = "sin")]
        h: String,
        /// Value of y_1.
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        y: f64,
        /// Grid points per side of -nu.
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Fit convergence rates of both examples.
    Rates,
}

#[derive(Debug, Serialize)]
struct Metadata {
    command: &'static str,
    seed: u64,
    version: &'static str,
    started: String,
    finished: String,
}

#[derive(Debug, Serialize)]
struct Envelope<T: Serialize> {
    metadata: Metadata,
    #[serde(flatten)]
    body: T,
}

/// Why a command stopped early.
enum Failure {
    Usage(String),
    Invariant(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::Io(io::Error::other(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(io::Error::other(e))
    }
}

impl From<stein_gamma::Error> for Failure {
    fn from(e: stein_gamma::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

fn now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

struct Output {
    opts_out: Option<PathBuf>,
    format: Format,
    started: String,
    seed: u64,
}

impl Output {
    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.opts_out {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn json<T: Serialize>(&self, command: &'static str, body: T) -> Result<(), Failure> {
        let env = Envelope {
            metadata: Metadata {
                command,
                seed: self.seed,
                version: env!("CARGO_PKG_VERSION"),
                started: self.started.clone(),
                finished: now(),
            },
            body,
        };
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, &env)?;
        writeln!(w)?;
        Ok(())
    }

    fn csv<T: Serialize>(&self, rows: &[T]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(self.writer()?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate(opts: &Options) -> Result<(), Failure> {
    GammaNu::new(opts.nu)?;
    if opts.a.is_nan() || opts.a <= 0.0 {
        return Err(Failure::Usage(format!("--a must be positive, got {}", opts.a)));
    }
    if opts.n_sweep.is_empty() || opts.n_sweep.iter().any(|&n| n < 2) {
        return Err(Failure::Usage("--n-sweep values must be at least 2".into()));
    }
    Ok(())
}

fn run_selftest(out: &Output) -> Result<(), Failure> {
    let report = selftest::run(out.seed);
    match out.format {
        Format::Json => out.json("selftest", &report)?,
        Format::Csv => out.csv(&report.checks)?,
    }
    for c in report.failures() {
        eprintln!("FAIL {}/{}: {}", c.module, c.name, c.detail);
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Invariant("selftest failed".into()))
    }
}

#[derive(Serialize)]
struct Example1Body {
    constant: f64,
    points: Vec<stein_gamma::experiments::SweepPoint>,
    rate: Option<RateSeries>,
}

fn run_example1(opts: &Options, out: &Output) -> Result<(), Failure> {
    let points = example1_sweep(&opts.n_sweep, opts.samples, opts.seed)?;
    let mut violations = vec![];
    for p in &points {
        if let (Some(e), Some(b)) = (p.empirical, p.dw_bound) {
            if e.mean > b + 3.0 * e.std_error {
                violations.push(format!("n {}: empirical {} above bound {}", p.n, e.mean, b));
            }
        }
    }
    let rows: Vec<SweepRow> = sweep_rows(points.iter().map(|p| (p.n, &p.report, p.empirical.map(|e| e.mean))));
    match out.format {
        Format::Csv => out.csv(&rows)?,
        Format::Json => {
            let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
            let totals: Vec<f64> = points.iter().map(|p| p.report.total).collect();
            let body = Example1Body {
                constant: cached_constant(1.0)?,
                rate: fit_rate(&ns, &totals).ok(),
                points,
            };
            out.json("example1", body)?
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(violations.join("; ")))
    }
}

#[derive(Serialize)]
struct Example2Body {
    a: f64,
    points: Vec<stein_gamma::experiments::Example2Point>,
    rate: Option<RateSeries>,
    covariance_rate: Option<RateSeries>,
}

fn pair_sum(n: usize, a: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..=n {
        for j in i + 1..=n {
            s += ((i * j) as f64).powf(-a);
        }
    }
    4.0 / ((n - 1) as f64).powi(2) * s
}

fn run_example2(opts: &Options, out: &Output) -> Result<(), Failure> {
    let gap = (opts.samples >= 2).then(|| GapConfig {
        samples: opts.samples.min(EXACT_CAP),
        replicates: 1,
        method: W1Method::Exact,
    });
    let points = example2_sweep(&opts.n_sweep, opts.a, gap, opts.seed)?;
    let mut violations = vec![];
    for p in &points {
        if p.rank + 1 != 2 * p.n {
            violations.push(format!("n {}: frame rank {} (expected {})", p.n, p.rank, 2 * p.n - 1));
        } else {
            eprintln!("n {}: frame rank {} (g_1 = h_1)", p.n, p.rank);
        }
        let want = pair_sum(p.n, opts.a);
        if (p.cross_covariance - want).abs() > 1e-12 {
            violations.push(format!("n {}: E[UV] {} vs {}", p.n, p.cross_covariance, want));
        }
    }
    let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    match out.format {
        Format::Csv => {
            let rows = sweep_rows(
                points
                    .iter()
                    .map(|p| (p.n, &p.report, p.independence_gap.map(|g| g.mean))),
            );
            out.csv(&rows)?
        }
        Format::Json => {
            let totals: Vec<f64> = points.iter().map(|p| p.report.total).collect();
            let cov: Vec<f64> = points.iter().map(|p| p.cross_covariance).collect();
            let body = Example2Body {
                a: opts.a,
                rate: fit_rate(&ns, &totals).ok(),
                covariance_rate: fit_rate(&ns, &cov).ok(),
                points,
            };
            out.json("example2", body)?
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(violations.join("; ")))
    }
}

fn test_function(name: &str) -> Option<TestFunction> {
    Some(match name {
        "x" => suite::identity(),
        "x*y1" => suite::x_times_y1(),
        "sin" => suite::sine(),
        "tanh" => suite::damped_tanh(),
        "bump" => suite::gaussian_bump(),
        "x*cos(y1)" => suite::x_cos_y1(),
        _ => return None,
    })
}

#[derive(Serialize)]
struct SolveRow {
    x: f64,
    f: f64,
    df_dx: f64,
    residual: f64,
}

#[derive(Serialize)]
struct SolveBody {
    nu: f64,
    h: String,
    y: f64,
    constant: f64,
    max_residual: f64,
    rows: Vec<SolveRow>,
}

fn run_stein_solve(opts: &Options, out: &Output, h: &str, y: f64, points: usize) -> Result<(), Failure> {
    let func = test_function(h).ok_or_else(|| Failure::Usage(format!("unknown test function {h}")))?;
    if points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let law = GammaNu::new(opts.nu)?;
    let ev = SteinEvaluator::new(law, func.clone(), QuadratureSpec::default());
    let eh = ev.expected_h(&[y]).map_err(|e| Failure::Invariant(e.to_string()))?;
    let mut rows = vec![];
    for x in two_sided_grid(opts.nu, points, 50.0) {
        let (f, df) = ev
            .value_and_direct_derivative(x, &[y])
            .map_err(|e| Failure::Invariant(e.to_string()))?;
        let residual = (2.0 * (x + opts.nu) * df - x * f - (func.value(x, &[y]) - eh)).abs();
        rows.push(SolveRow {
            x,
            f,
            df_dx: df,
            residual,
        });
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    match out.format {
        Format::Csv => out.csv(&rows)?,
        Format::Json => {
            let body = SolveBody {
                nu: opts.nu,
                h: h.to_string(),
                y,
                constant: cached_constant(opts.nu)?,
                max_residual,
                rows,
            };
            out.json("stein-solve", body)?
        }
    }
    if max_residual < 1e-6 {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("residual {max_residual:e}")))
    }
}

#[derive(Serialize)]
struct RateRow {
    series: &'static str,
    slope: f64,
    intercept: f64,
    residual: f64,
}

fn run_rates(opts: &Options, out: &Output) -> Result<(), Failure> {
    if opts.n_sweep.len() < 4 {
        return Err(Failure::Usage("rates needs at least 4 sweep points".into()));
    }
    let ns = &opts.n_sweep;
    let e1 = example1_sweep(ns, 0, opts.seed)?;
    let e2 = example2_sweep(ns, opts.a, None, opts.seed)?;
    let r1: Vec<&BoundReport> = e1.iter().map(|p| &p.report).collect();
    let r2: Vec<&BoundReport> = e2.iter().map(|p| &p.report).collect();
    let of = |rs: &[&BoundReport], f: fn(&BoundReport) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let cov: Vec<f64> = e2.iter().map(|p| p.cross_covariance).collect();
    let series: Vec<(&'static str, RateSeries)> = vec![
        ("example1_discrepancy", fit_rate(ns, &of(&r1, |r| r.discrepancy))?),
        ("example1_cross", fit_rate(ns, &of(&r1, BoundReport::cross_total))?),
        ("example1_bound", fit_rate(ns, &of(&r1, |r| r.total))?),
        ("example2_covariance", fit_rate(ns, &cov)?),
        ("example2_bound", fit_rate(ns, &of(&r2, |r| r.total))?),
    ];
    match out.format {
        Format::Csv => {
            let rows: Vec<RateRow> = series
                .iter()
                .map(|(name, s)| RateRow {
                    series: name,
                    slope: s.slope,
                    intercept: s.intercept,
                    residual: s.residual,
                })
                .collect();
            out.csv(&rows)?
        }
        Format::Json => {
            let body: std::collections::BTreeMap<&str, RateSeries> = series.into_iter().collect();
            out.json("rates", body)?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = &cli.opts;
    let out = Output {
        opts_out: opts.out.clone(),
        format: opts.format,
        started: now(),
        seed: opts.seed,
    };
    let result = validate(opts).and_then(|()| match &cli.command {
        Command::Selftest => run_selftest(&out),
        Command::Example1 => run_example1(opts, &out),
        Command::Example2 => run_example2(opts, &out),
        Command::SteinSolve { h, y, points } => run_stein_solve(opts, &out, h, *y, *points),
        Command::Rates => run_rates(opts, &out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("invariant failure: {m}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}
