//! Command-line front end. All tabular output is CSV.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and parse errors, 3
//! for internal errors.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::baseline::{count_mmd_evals, exhaustive_known, Algorithm};
use crate::detect::{test_known, test_unknown, Hypothesis, KnownTestOptions, UnknownTestOptions};
use crate::error::{Error, Result};
use crate::harness::{self, ErrorEstimates, TestChoice};
use crate::kernel::KernelSpec;
use crate::mmd::SequenceSet;
use crate::simgen::{generate, max_outliers, ScenarioSpec};
use crate::theory::{self, GaussianSpec};

#[derive(Debug, Parser)]
#[command(
    name = "outlier-mmd",
    version,
    about = "MMD-based outlier hypothesis tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a test on sequences read from a CSV file.
    Detect(DetectArgs),
    /// Monte Carlo error estimates over a grid of sequence lengths.
    Simulate(SimulateArgs),
    /// Monte Carlo error estimates over a grid of thresholds.
    SweepLambda(SweepLambdaArgs),
    /// Population MMD^2 and the error-exponent lower bounds.
    Bounds(BoundsArgs),
    /// Estimator-call counts (and optionally wall times) per algorithm.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DistributionArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu_nominal: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_nominal: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub mu_anomalous: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_anomalous: f64,
}

impl DistributionArgs {
    fn specs(&self) -> Result<(GaussianSpec, GaussianSpec)> {
        Ok((
            GaussianSpec::new(self.mu_nominal, self.sigma_nominal)?,
            GaussianSpec::new(self.mu_anomalous, self.sigma_anomalous)?,
        ))
    }

    fn population_mmd2(&self, sigma0: f64) -> Result<f64> {
        let (p, q) = self.specs()?;
        theory::gaussian_population_mmd2(&p, &q, sigma0)
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["s", "lambda"])))]
pub struct DetectArgs {
    /// Input file, one sequence per line; `-` reads stdin.
    pub input: PathBuf,
    /// Known outlier count.
    #[arg(long = "s")]
    pub s: Option<usize>,
    /// Threshold for the unknown-count test.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = KnownTestOptions::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the first non-comment line.
    #[arg(long)]
    pub has_header: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "M", default_value_t = 10)]
    pub m: usize,
    /// Sequence lengths, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "5,10,15,20,25,30,35,40,45,50,55,60,65"
    )]
    pub n: Vec<usize>,
    /// Planted outlier count; 0 simulates the all-nominal hypothesis.
    #[arg(long = "s", default_value_t = 2)]
    pub s: usize,
    /// Cap on the outlier count for the unknown-count test
    /// (default ceil(M/2) - 1).
    #[arg(long = "T")]
    pub t_max: Option<usize>,
    /// Absolute threshold; selects the unknown-count test.
    #[arg(long, conflicts_with = "alpha")]
    pub lambda: Option<f64>,
    /// Threshold as a fraction of the population MMD^2; selects the
    /// unknown-count test.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = KnownTestOptions::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub dist: DistributionArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepLambdaArgs {
    #[arg(long = "M", default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long = "s", default_value_t = 2)]
    pub s: usize,
    /// Threshold fractions of the population MMD^2, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    )]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub dist: DistributionArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("threshold").required(true).args(["lambda", "alpha"])))]
pub struct BoundsArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[command(flatten)]
    pub dist: DistributionArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Numbers of sequences, comma-separated.
    #[arg(long = "M", value_delimiter = ',', default_value = "8,12,16,20")]
    pub m: Vec<usize>,
    #[arg(long = "s", default_value_t = 3)]
    pub s: usize,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Threshold fraction of the population MMD^2 for the unknown-count test.
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = KnownTestOptions::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run every algorithm, exhaustive search included, and add a
    /// wall-time column. The output is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub dist: DistributionArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Internal(_) => 3,
        _ => 2,
    }
}

/// `%.17g`: 17 significant digits, fixed or scientific notation, trailing
/// zeros removed. Round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Parses sequences: one per line, comma-separated decimals, `#` comment
/// lines and blank lines skipped. Line and column numbers in errors are
/// 1-based; the column is the field position.
pub fn parse_sequences<R: Read>(reader: R, has_header: bool) -> Result<SequenceSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => Error::Parse {
                line: pos.line() as usize,
                column: 1,
                message: e.to_string(),
            },
            None => Error::Io(e.to_string()),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .map(|(col, tok)| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        column: col + 1,
                        message: format!("`{tok}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(first.len()) + 1,
                    message: format!(
                        "sequence has {} values; earlier sequences have {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    SequenceSet::from_rows(rows)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::SweepLambda(a) => cmd_sweep_lambda(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn format_decision(h: &Hypothesis) -> String {
    match h {
        Hypothesis::Reject => "REJECT".into(),
        Hypothesis::Outliers(b) => {
            let idx: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
            format!("OUTLIERS: {}", idx.join(","))
        }
    }
}

pub fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let seqs = if a.input.as_os_str() == "-" {
        parse_sequences(io::stdin().lock(), a.has_header)?
    } else {
        parse_sequences(File::open(&a.input)?, a.has_header)?
    };
    let kernel = KernelSpec::gaussian(a.sigma0)?;
    let (decision, trace) = match (a.s, a.lambda) {
        (Some(s), None) => {
            let opts = KnownTestOptions {
                s,
                max_iterations: a.max_iterations,
                seed: a.seed,
            };
            test_known(&seqs, &opts, &kernel)?
        }
        (None, Some(lambda)) => {
            let opts = UnknownTestOptions {
                lambda,
                seed: a.seed,
            };
            test_unknown(&seqs, &opts, &kernel)?
        }
        _ => {
            return Err(Error::Config(
                "exactly one of --s and --lambda is required".into(),
            ))
        }
    };
    let mut out = open_output(&a.out)?;
    writeln!(out, "{}", format_decision(&decision))?;
    writeln!(out, "iterations: {}", trace.iterations)?;
    writeln!(out, "mmd_evaluations: {}", trace.mmd_evals())?;
    out.flush()?;
    Ok(())
}

/// Column names shared by the simulation tables.
pub const ESTIMATE_COLUMNS: [&str; 11] = [
    "n",
    "trials",
    "miscls_count",
    "false_reject_count",
    "false_alarm_count",
    "beta_hat",
    "zeta_hat",
    "fa_hat",
    "beta_se",
    "zeta_se",
    "fa_se",
];

fn estimate_fields(n: usize, e: &ErrorEstimates) -> Vec<String> {
    vec![
        n.to_string(),
        e.trials.to_string(),
        e.miscls_count.to_string(),
        e.false_reject_count.to_string(),
        e.false_alarm_count.to_string(),
        format_float(e.beta_hat()),
        format_float(e.zeta_hat()),
        format_float(e.fa_hat()),
        format_float(e.beta_se()),
        format_float(e.zeta_se()),
        format_float(e.fa_se()),
    ]
}

fn resolve_lambda(
    lambda: Option<f64>,
    alpha: Option<f64>,
    mmd2: impl FnOnce() -> Result<f64>,
) -> Result<Option<f64>> {
    match (lambda, alpha) {
        (Some(l), None) => Ok(Some(l)),
        (None, Some(a)) => Ok(Some(a * mmd2()?)),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(Error::Config(
            "--lambda and --alpha are mutually exclusive".into(),
        )),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let kernel = KernelSpec::gaussian(a.sigma0)?;
    let (nominal, anomalous) = a.dist.specs()?;
    let lambda = resolve_lambda(a.lambda, a.alpha, || a.dist.population_mmd2(a.sigma0))?;
    let test = match lambda {
        Some(lambda) => TestChoice::Unknown {
            lambda,
            t_max: a.t_max.unwrap_or_else(|| max_outliers(a.m)),
        },
        None => {
            if a.t_max.is_some() {
                return Err(Error::Config(
                    "--T applies to the unknown-count test; give --lambda or --alpha".into(),
                ));
            }
            TestChoice::Known {
                s: a.s,
                max_iterations: a.max_iterations,
            }
        }
    };
    let base = ScenarioSpec::with_leading_outliers(a.m, a.n[0], nominal, anomalous, a.s, a.seed);
    let table = harness::sweep_n(&base, &kernel, test, &a.n, a.trials, a.jobs)?;
    let mut w = csv::Writer::from_writer(open_output(&a.out)?);
    w.write_record(ESTIMATE_COLUMNS).map_err(csv_err)?;
    for (n, est) in &table {
        w.write_record(estimate_fields(*n, est)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep_lambda(a: &SweepLambdaArgs) -> Result<()> {
    let kernel = KernelSpec::gaussian(a.sigma0)?;
    let (nominal, anomalous) = a.dist.specs()?;
    let base = ScenarioSpec::with_leading_outliers(a.m, a.n, nominal, anomalous, a.s, a.seed);
    let rows = harness::sweep_lambda(&base, &kernel, &a.alpha, a.n, a.trials, a.jobs)?;
    let mut w = csv::Writer::from_writer(open_output(&a.out)?);
    let header: Vec<&str> = ["alpha", "lambda"]
        .into_iter()
        .chain(ESTIMATE_COLUMNS)
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in &rows {
        // Misclassification and false reject come from the planted-outlier
        // runs, false alarm from the all-nominal runs on the same seeds.
        let merged = ErrorEstimates {
            trials: row.nonnull.trials,
            miscls_count: row.nonnull.miscls_count,
            false_reject_count: row.nonnull.false_reject_count,
            false_alarm_count: row.null.false_alarm_count,
            exceeded_t_count: row.nonnull.exceeded_t_count + row.null.exceeded_t_count,
        };
        let mut fields = vec![format_float(row.alpha), format_float(row.lambda)];
        fields.extend(estimate_fields(a.n, &merged));
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let kernel = KernelSpec::gaussian(a.sigma0)?;
    let mmd2 = a.dist.population_mmd2(a.sigma0)?;
    let lambda = resolve_lambda(a.lambda, a.alpha, || Ok(mmd2))?
        .ok_or_else(|| Error::Config("one of --lambda and --alpha is required".into()))?;
    let k0 = kernel.bound();
    let b = theory::exponent_bounds_unknown(mmd2, k0, lambda)?;
    let crossover = theory::crossover_lambda(mmd2)?;
    let mut w = csv::Writer::from_writer(open_output(&a.out)?);
    w.write_record([
        "mmd2",
        "k0",
        "lambda",
        "misclassification_bound",
        "false_reject_bound",
        "false_alarm_bound",
        "crossover_lambda",
    ])
    .map_err(csv_err)?;
    w.write_record(
        [
            mmd2,
            k0,
            lambda,
            b.misclassification_bound,
            b.false_reject_bound,
            b.false_alarm_bound,
            crossover,
        ]
        .map(format_float),
    )
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let kernel = KernelSpec::gaussian(a.sigma0)?;
    let (nominal, anomalous) = a.dist.specs()?;
    let lambda = a.alpha * a.dist.population_mmd2(a.sigma0)?;
    let mut w = csv::Writer::from_writer(open_output(&a.out)?);
    let mut header = vec![
        "M",
        "s",
        "n",
        "algorithm",
        "iterations",
        "pairwise_calls",
        "pooled_calls",
        "estimator_calls",
        "kernel_evals",
    ];
    if a.timing {
        header.push("wall_seconds");
    }
    w.write_record(&header).map_err(csv_err)?;

    for &m in &a.m {
        let spec = ScenarioSpec::with_leading_outliers(m, a.n, nominal, anomalous, a.s, a.seed);
        let seqs = generate(&spec)?;
        for algorithm in [Algorithm::Known, Algorithm::Unknown, Algorithm::Exhaustive] {
            let start = Instant::now();
            let (iterations, count) = match algorithm {
                Algorithm::Known => {
                    let opts = KnownTestOptions {
                        s: a.s,
                        max_iterations: a.max_iterations,
                        seed: a.seed,
                    };
                    let (_, trace) = test_known(&seqs, &opts, &kernel)?;
                    let count = count_mmd_evals(m, a.s, trace.iterations, a.n, algorithm)?;
                    if (count.pairwise_calls, count.pooled_calls)
                        != (trace.pairwise_calls, trace.pooled_calls)
                    {
                        return Err(Error::Internal(
                            "known-count test call count disagrees with closed form".into(),
                        ));
                    }
                    (trace.iterations, count)
                }
                Algorithm::Unknown => {
                    let opts = UnknownTestOptions {
                        lambda,
                        seed: a.seed,
                    };
                    let (_, trace) = test_unknown(&seqs, &opts, &kernel)?;
                    let count = count_mmd_evals(m, a.s, 0, a.n, algorithm)?;
                    if count.pairwise_calls != trace.pairwise_calls {
                        return Err(Error::Internal(
                            "unknown-count test call count disagrees with closed form".into(),
                        ));
                    }
                    (0, count)
                }
                Algorithm::Exhaustive => {
                    let count = if a.timing {
                        exhaustive_known(&seqs, a.s, &kernel)?.1
                    } else {
                        count_mmd_evals(m, a.s, 0, a.n, algorithm)?
                    };
                    (0, count)
                }
            };
            let elapsed = start.elapsed().as_secs_f64();
            let mut fields = vec![
                m.to_string(),
                a.s.to_string(),
                a.n.to_string(),
                algorithm.to_string(),
                iterations.to_string(),
                count.pairwise_calls.to_string(),
                count.pooled_calls.to_string(),
                count.estimator_calls().to_string(),
                count.kernel_evals.to_string(),
            ];
            if a.timing {
                fields.push(format_float(elapsed));
            }
            w.write_record(&fields).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
