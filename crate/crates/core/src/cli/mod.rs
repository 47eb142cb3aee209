//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation error (bad flags, bad data, delta
//! outside (0, 1)), 3 I/O error, 4 internal inconsistency (a certificate
//! failing its own audit).

mod synthetic_spec;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::canonical::to_canonical_json;
use crate::error::Error;
use crate::estimators::{
    recompute_bound, Certificate, Certifier, DatasetHandle, LossMatrix, Remapped,
    SyntheticPosterior,
};
use crate::kl::{kl_inverse_upper, Probability, SlackBudget};
use crate::rng;
use crate::tail_lab::{
    budget_compare, coverage_simulation, verify_theorem3, HeterogeneousBernoulliSpec,
};

pub use synthetic_spec::SyntheticPosteriorSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistent(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "gibbs-cert", version, about = "Certified upper bounds on Gibbs risk")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// n full passes, one posterior draw per pass (T = n).
    CertifyClassic(PassArgs),
    /// n passes with a fresh posterior draw per example (T = n m).
    CertifyFresh(PassArgs),
    /// Fresh-draw certificate over held-out examples (out-of-sample risk).
    CertifyTestset(TestsetArgs),
    /// T draws, each on a uniformly sub-sampled example.
    CertifySubsampled(SubsampledArgs),
    /// Coverage of the kl-inverse bound on simulated Bernoulli means.
    SimulateCoverage(CoverageArgs),
    /// Exact Poisson-binomial lower tails against the Chernoff-kl bound.
    #[command(name = "verify-theorem3")]
    VerifyTheorem3(TailArgs),
    /// Classic versus fresh slack at equal evaluation budget.
    BudgetCompare(BudgetArgs),
    /// Certified upper inverse of the binary KL divergence.
    Klinv(KlinvArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Loss matrix CSV (`m=<int>` header, one row per posterior draw).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Synthetic posterior `<kind>:<p1,p2,..>`, kind one of bernoulli, point-mass, beta-loss.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Number of examples; a single synthetic mean is replicated m times.
    #[arg(long)]
    pub m: Option<usize>,
    /// Concentration of beta-loss synthetic posteriors.
    #[arg(long, default_value_t = 10.0)]
    pub concentration: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct CommonCertifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub delta: f64,
    /// Master seed of the posterior draws.
    #[arg(long)]
    pub seed: u64,
    /// Timestamp recorded verbatim in the certificate.
    #[arg(long)]
    pub created_at: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PassArgs {
    #[command(flatten)]
    pub common: CommonCertifyArgs,
    /// Number of passes over the data.
    #[arg(long)]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct TestsetArgs {
    #[command(flatten)]
    pub common: CommonCertifyArgs,
    #[arg(long)]
    pub n: u64,
    /// Attest that the examples are held out from posterior construction.
    #[arg(long)]
    pub held_out: bool,
    /// Seed for drawing the synthetic test stream from the population.
    #[arg(long)]
    pub stream_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SubsampledArgs {
    #[command(flatten)]
    pub common: CommonCertifyArgs,
    /// Number of (draw, example) summands T.
    #[arg(long)]
    pub summands: u64,
    #[arg(long)]
    pub subsample_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Comma-separated Bernoulli means.
    #[arg(long)]
    pub means: String,
    /// Repeat the mean list this many times.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    /// Comma-separated Bernoulli means.
    #[arg(long)]
    pub spec: String,
    /// Comma-separated thresholds; defaults to an evenly spaced grid on [0, p].
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 15)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub m: u64,
    /// Passes used by the classic estimator.
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub delta: f64,
    /// Common empirical mean.
    #[arg(long)]
    pub q: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct KlinvArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub c: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Seed label for streams derived from the master seed.
const STREAM_SEED_COUNTER: u64 = u64::MAX;

pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta).into())
    }
}

/// Read and validate a loss matrix file.
pub fn ingest_loss_matrix(path: &Path) -> Result<(LossMatrix, DatasetHandle), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let matrix = LossMatrix::parse(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let data = DatasetHandle::new(matrix.m())?.with_digest(matrix.digest());
    Ok((matrix, data))
}

enum Source {
    Matrix(LossMatrix, DatasetHandle),
    Synthetic(SyntheticPosterior, DatasetHandle),
}

fn load_source(args: &SourceArgs, seed: u64) -> Result<Source, CliError> {
    match (&args.input, &args.synthetic) {
        (Some(path), None) => {
            let (matrix, data) = ingest_loss_matrix(path)?;
            if let Some(m) = args.m {
                if m != matrix.m() {
                    return Err(CliError::Validation(format!(
                        "--m {m} does not match the matrix header m={}",
                        matrix.m()
                    )));
                }
            }
            Ok(Source::Matrix(matrix.with_seed(seed), data))
        }
        (None, Some(text)) => {
            let spec = SyntheticPosteriorSpec::parse(text, args.m, args.concentration)?;
            let data = DatasetHandle::new(spec.len())?.with_digest(spec.digest());
            Ok(Source::Synthetic(spec.posterior(seed)?, data))
        }
        _ => Err(CliError::Validation("exactly one of --input or --synthetic is required".into())),
    }
}

fn audited(cert: Certificate) -> Result<Certificate, CliError> {
    recompute_bound(&cert).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(cert)
}

fn render_certificate(cert: &Certificate, format: Option<Format>) -> String {
    match format.unwrap_or(Format::Json) {
        Format::Json => cert.to_canonical_json(),
        Format::Csv => cert.to_csv(),
    }
}

fn render_rows<T: Serialize>(rows: &[T], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => to_canonical_json(rows).map_err(|e| CliError::Internal(e.to_string())),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::Internal(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

fn render_record<T: Serialize>(record: &T, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => to_canonical_json(record).map_err(|e| CliError::Internal(e.to_string())),
        Format::Csv => render_rows(std::slice::from_ref(record), Format::Csv),
    }
}

fn output_of(command: &Command) -> &OutputArgs {
    match command {
        Command::CertifyClassic(a) | Command::CertifyFresh(a) => &a.common.output,
        Command::CertifyTestset(a) => &a.common.output,
        Command::CertifySubsampled(a) => &a.common.output,
        Command::SimulateCoverage(a) => &a.output,
        Command::VerifyTheorem3(a) => &a.output,
        Command::BudgetCompare(a) => &a.output,
        Command::Klinv(a) => &a.output,
    }
}

fn certifier(common: &CommonCertifyArgs) -> Certifier {
    Certifier::new().created_at(common.created_at.clone())
}

/// Compute the artifact for `config` without touching the filesystem
/// (apart from reading inputs).
pub fn render(config: &RunConfig) -> Result<String, CliError> {
    match &config.command {
        Command::CertifyClassic(args) | Command::CertifyFresh(args) => {
            let common = &args.common;
            check_delta(common.delta)?;
            let classic = matches!(config.command, Command::CertifyClassic(_));
            let certifier = certifier(common);
            let cert = match load_source(&common.source, common.seed)? {
                Source::Matrix(mat, data) if classic => {
                    certifier.classic(&mat, &data, &mat, args.n, common.delta)?
                }
                Source::Matrix(mat, data) => {
                    certifier.fresh(&mat, &data, &mat, args.n, common.delta)?
                }
                Source::Synthetic(post, data) if classic => {
                    certifier.classic(&post, &data, &post, args.n, common.delta)?
                }
                Source::Synthetic(post, data) => {
                    certifier.fresh(&post, &data, &post, args.n, common.delta)?
                }
            };
            Ok(render_certificate(&audited(cert)?, common.output.format))
        }
        Command::CertifyTestset(args) => {
            let common = &args.common;
            check_delta(common.delta)?;
            let certifier = certifier(common);
            let cert = match (&common.source.input, &common.source.synthetic) {
                (None, Some(text)) => {
                    // the listed means form the population; --m is the stream length
                    let spec = SyntheticPosteriorSpec::parse(text, None, common.source.concentration)?;
                    let post = spec.posterior(common.seed)?;
                    let m = common.source.m.unwrap_or(spec.len());
                    let stream_seed = args
                        .stream_seed
                        .unwrap_or_else(|| rng::derive_seed(common.seed, STREAM_SEED_COUNTER));
                    let view = Remapped::uniform_stream(&post, spec.len(), m, stream_seed);
                    let data = DatasetHandle::new(m)?
                        .with_digest(format!("{}+stream:{stream_seed}", spec.digest()));
                    certifier.testset(&post, &data, &view, args.n, common.delta, args.held_out)?
                }
                _ => match load_source(&common.source, common.seed)? {
                    Source::Matrix(mat, data) => {
                        certifier.testset(&mat, &data, &mat, args.n, common.delta, args.held_out)?
                    }
                    Source::Synthetic(..) => unreachable!("handled above"),
                },
            };
            Ok(render_certificate(&audited(cert)?, common.output.format))
        }
        Command::CertifySubsampled(args) => {
            let common = &args.common;
            check_delta(common.delta)?;
            let certifier = certifier(common);
            let sub_seed = args
                .subsample_seed
                .unwrap_or_else(|| rng::derive_seed(common.seed, STREAM_SEED_COUNTER));
            let (t, delta) = (args.summands, common.delta);
            let cert = match load_source(&common.source, common.seed)? {
                Source::Matrix(mat, data) => {
                    certifier.subsampled(&mat, &data, &mat, t, delta, sub_seed)?
                }
                Source::Synthetic(post, data) => {
                    certifier.subsampled(&post, &data, &post, t, delta, sub_seed)?
                }
            };
            Ok(render_certificate(&audited(cert)?, common.output.format))
        }
        Command::SimulateCoverage(args) => {
            check_delta(args.delta)?;
            let base = parse_list(&args.means, "--means")?;
            if args.repeat == 0 {
                return Err(CliError::Validation("--repeat must be at least 1".into()));
            }
            let means: Vec<f64> =
                std::iter::repeat_n(base, args.repeat).flatten().collect();
            let spec = HeterogeneousBernoulliSpec::new(means)?;
            let report = coverage_simulation(&spec, args.delta, args.trials, args.seed)?;
            render_record(&report, args.output.format.unwrap_or(Format::Json))
        }
        Command::VerifyTheorem3(args) => {
            let spec = HeterogeneousBernoulliSpec::new(parse_list(&args.spec, "--spec")?)?;
            let grid: Vec<f64> = match &args.grid {
                Some(g) => parse_list(g, "--grid")?,
                None => {
                    if args.points < 2 {
                        return Err(CliError::Validation("--points must be at least 2".into()));
                    }
                    let p = spec.mean();
                    let last = (args.points - 1) as f64;
                    (0..args.points).map(|k| p * (k as f64 / last)).collect()
                }
            };
            let grid = grid.into_iter().map(Probability::new).collect::<Result<Vec<_>, _>>()?;
            let reports = verify_theorem3(&spec, &grid)?;
            render_rows(&reports, args.output.format.unwrap_or(Format::Csv))
        }
        Command::BudgetCompare(args) => {
            check_delta(args.delta)?;
            if args.n == 0 {
                return Err(CliError::Validation("--n must be at least 1".into()));
            }
            let cmp = budget_compare(args.m, args.n, args.delta, Probability::new(args.q)?)?;
            render_record(&cmp, args.output.format.unwrap_or(Format::Json))
        }
        Command::Klinv(args) => {
            let q = Probability::new(args.q)?;
            let c = SlackBudget::new(args.c)?;
            let u = kl_inverse_upper(q, c).value();
            #[derive(Serialize)]
            struct KlinvRecord {
                q: f64,
                c: f64,
                bound: f64,
            }
            match args.output.format {
                None => Ok(format!("{u}\n")),
                Some(f) => render_record(&KlinvRecord { q: args.q, c: args.c, bound: u }, f),
            }
        }
    }
}

/// Write `content` to `path` through a temporary file in the same
/// directory, so a failed run never leaves a partial artifact.
fn write_atomically(path: &Path, content: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(content.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Run one command: compute, then emit to `--out` or stdout.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let content = render(config)?;
    match &output_of(&config.command).out {
        Some(path) => write_atomically(path, &content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}
