//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage error,
//! 3 data or domain error, 4 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::coverage::{run_table, CoverageCellSpec, DEFAULT_REPLICATES, DEFAULT_SEED, TABLE_NS, TABLE_RHOS};
use crate::error::{Error, Result};
use crate::interval::{interval, IntervalKind};
use crate::matching::{verify_lemma21, verify_prior, write_lemma_csv, Axis, Grid, PriorSpec};
use crate::model::{sample, sufficient_stats, Dataset, OriginalParams};
use crate::posterior::{posterior, ParamId, UnivariateDensity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bvn-prior", version, about = "Matching-prior inference for the bivariate normal")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a bivariate normal sample and write it as `x1,x2` CSV.
    Sample(SampleArgs),
    /// Sufficient statistics of a dataset.
    Stats(StatsArgs),
    /// Summary of one marginal posterior.
    Posterior(PosteriorArgs),
    /// Credible interval for one parameter.
    Interval(IntervalArgs),
    /// Frequentist coverage simulation over a (rho, n) grid.
    Coverage(CoverageArgs),
    /// Monte Carlo check of the third-order expectation identities.
    VerifyLemma(LemmaArgs),
    /// Residuals of the matching conditions for a prior on a grid.
    VerifyPrior(PriorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Hpd,
    EqualTailed,
    UpperOneSided,
    LowerOneSided,
}

impl From<KindArg> for IntervalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Hpd => IntervalKind::Hpd,
            KindArg::EqualTailed => IntervalKind::EqualTailed,
            KindArg::UpperOneSided => IntervalKind::UpperOneSided,
            KindArg::LowerOneSided => IntervalKind::LowerOneSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Beta,
    Theta,
    W,
    Eta,
}

impl From<ParamArg> for ParamId {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Beta => ParamId::Beta,
            ParamArg::Theta => ParamId::Theta,
            ParamArg::W => ParamId::PrecisionW,
            ParamArg::Eta => ParamId::Eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Matching,
    MatchingFd,
    Flat,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Population {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub population: Population,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CSV with header `x1,x2`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub param: ParamArg,
    /// Level of the equal-tailed quantiles in the summary.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub param: ParamArg,
    #[arg(long, value_enum, default_value_t = KindArg::Hpd)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, value_delimiter = ',', default_values_t = TABLE_RHOS.to_vec(), allow_hyphen_values = true)]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = TABLE_NS.to_vec())]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Hpd)]
    pub kind: KindArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub population: Population,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    #[command(flatten)]
    pub population: Population,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value_t = PriorArg::Matching)]
    pub prior: PriorArg,
    /// `lo:hi:count`.
    #[arg(long, default_value = "-2:2:9", allow_hyphen_values = true)]
    pub grid_beta: Axis,
    #[arg(long, default_value = "0.5:3:9")]
    pub grid_theta: Axis,
    #[arg(long, default_value = "0.5:3:9")]
    pub grid_eta: Axis,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[command(flatten)]
    pub out: Output,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

fn open_output<'a>(out: &Output, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match &out.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn read_dataset(path: &PathBuf) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Dataset::read_csv(text.as_bytes())
}

fn population(p: &Population, rho: f64) -> Result<OriginalParams> {
    OriginalParams::new(p.mu1, p.mu2, p.sigma1, p.sigma2, rho)
}

#[derive(Serialize)]
struct PosteriorSummary {
    param: ParamId,
    n: usize,
    mode: f64,
    mean: Option<f64>,
    median: f64,
    level: f64,
    lower_quantile: f64,
    upper_quantile: f64,
    log_norm: f64,
}

/// Run one parsed command; returns the exit code.
pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Sample(a) => {
            let p = population(&a.population, a.rho)?;
            if a.n == 0 {
                return Err(Error::Domain("n must be at least 1".into()));
            }
            let data = sample(&p, a.n, a.seed);
            let mut w = open_output(&a.out, stdout)?;
            data.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Stats(a) => {
            let stats = sufficient_stats(&read_dataset(&a.input)?.pairs)?;
            let mut w = open_output(&a.out, stdout)?;
            match a.format {
                Format::Json => write_json(&mut w, &stats)?,
                Format::Csv | Format::Markdown => {
                    let mut c = csv::Writer::from_writer(&mut w);
                    c.serialize(stats)?;
                    c.flush()?;
                }
            }
            w.flush()?;
        }
        Command::Posterior(a) => {
            if !(a.level > 0.0 && a.level < 1.0) {
                return Err(Error::Domain(format!("level must lie in (0, 1), got {}", a.level)));
            }
            let stats = sufficient_stats(&read_dataset(&a.input)?.pairs)?;
            let d = posterior(a.param.into(), &stats)?;
            let tail = 0.5 * (1.0 - a.level);
            let summary = PosteriorSummary {
                param: d.param(),
                n: stats.n,
                mode: d.mode(),
                mean: d.mean(),
                median: d.median()?,
                level: a.level,
                lower_quantile: d.quantile(tail)?,
                upper_quantile: d.quantile(1.0 - tail)?,
                log_norm: d.log_norm(),
            };
            let mut w = open_output(&a.out, stdout)?;
            write_json(&mut w, &summary)?;
            w.flush()?;
        }
        Command::Interval(a) => {
            let data = read_dataset(&a.input)?;
            if data.len() < 4 {
                return Err(Error::Degenerate(format!("need at least 4 rows, got {}", data.len())));
            }
            let stats = sufficient_stats(&data.pairs)?;
            let d = posterior(a.param.into(), &stats)?;
            let i = interval(&d, a.kind.into(), a.level)?;
            if i.kind == IntervalKind::HpdBoundary {
                writeln!(
                    stderr,
                    "warning: the {} posterior has its mode at the boundary; reporting [{}, q({})]",
                    i.param, i.lo, i.level
                )?;
            }
            let mut w = open_output(&a.out, stdout)?;
            write_json(&mut w, &i)?;
            w.flush()?;
        }
        Command::Coverage(a) => {
            let base = population(&a.population, 0.0)?;
            let defaults = CoverageCellSpec {
                level: a.level,
                replicates: a.replicates,
                kind: a.kind.into(),
                params_base: base,
                seed: a.seed,
                ..CoverageCellSpec::new(0.0, 4)
            };
            let report = run_table(&a.rhos, &a.ns, &defaults)?;
            let mut w = open_output(&a.out, stdout)?;
            match a.format {
                Format::Csv => report.write_csv(&mut w)?,
                Format::Json => write_json(&mut w, &report)?,
                Format::Markdown => w.write_all(report.to_markdown().as_bytes())?,
            }
            w.flush()?;
            for e in &report.errors {
                writeln!(stderr, "error: cell rho = {}, n = {}: {}", e.rho, e.n, e.message)?;
            }
            if report.errors.iter().any(|e| e.numerical) {
                return Ok(EXIT_NUMERICAL);
            }
            if !report.errors.is_empty() {
                return Ok(EXIT_DATA);
            }
        }
        Command::VerifyLemma(a) => {
            let p = population(&a.population, a.rho)?.to_orthogonal();
            let checks = verify_lemma21(&p, a.samples, a.seed)?;
            let mut w = open_output(&a.out, stdout)?;
            match a.format {
                Format::Csv => write_lemma_csv(&checks, &mut w)?,
                Format::Json => write_json(&mut w, &checks)?,
                Format::Markdown => {
                    let [b, t, e] = p.interest();
                    writeln!(w, "beta = {b}, theta = {t}, eta = {e}, samples = {}\n", a.samples)?;
                    writeln!(w, "| moment | claimed | estimate | stderr | pass |")?;
                    writeln!(w, "|---|---|---|---|---|")?;
                    for c in &checks {
                        writeln!(
                            w,
                            "| {} | {:.6} | {:.6} | {:.2e} | {} |",
                            c.moment,
                            c.claimed_value,
                            c.mc_estimate,
                            c.mc_stderr,
                            if c.pass { "yes" } else { "NO" }
                        )?;
                    }
                }
            }
            w.flush()?;
            let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
            if !failed.is_empty() {
                for c in failed {
                    writeln!(stderr, "check failed: {}", c.moment)?;
                }
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::VerifyPrior(a) => {
            let prior = match a.prior {
                PriorArg::Matching => PriorSpec::matching(),
                PriorArg::MatchingFd => PriorSpec::matching_fd(),
                PriorArg::Flat => PriorSpec::flat(),
            };
            let grid = Grid::new(a.grid_beta, a.grid_theta, a.grid_eta)?;
            let v = verify_prior(&prior, &grid)?;
            let mut w = open_output(&a.out, stdout)?;
            match a.format {
                Format::Csv => v.write_csv(&mut w)?,
                Format::Json => write_json(&mut w, &v)?,
                Format::Markdown => w.write_all(v.to_table().as_bytes())?,
            }
            w.flush()?;
            let failed: Vec<_> = v.reports.iter().filter(|r| !r.pass).collect();
            if !failed.is_empty() {
                for r in failed {
                    writeln!(stderr, "condition failed: {} (max residual {:e})", r.condition, r.max_abs_residual)?;
                }
                return Ok(EXIT_CHECK_FAILED);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name) and run. Help and version go to
/// `stdout` with exit 0; parse errors go to `stderr` with exit 2.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, stdout, stderr),
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            if code == 0 {
                EXIT_OK
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["bvn-prior"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn sample_to_stdout() {
        let (code, out, _) = run_capture(&["sample", "--rho", "0.3", "--n", "5", "--seed", "42"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("x1,x2\n"));
        assert_eq!(out.lines().count(), 6);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["sample", "--n", "5"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["nonsense"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["verify-prior", "--grid-beta", "1:2"]).0, EXIT_USAGE);
    }

    #[test]
    fn domain_errors_exit_three() {
        let (code, _, err) = run_capture(&["sample", "--rho", "1.0", "--n", "5"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("error"));
    }

    #[test]
    fn negative_values_parse() {
        assert_eq!(run_capture(&["sample", "--rho", "-0.4", "--mu1", "-3", "--n", "3"]).0, 0);
    }

    #[test]
    fn flat_prior_fails_verification() {
        let (code, out, err) = run_capture(&["verify-prior", "--prior", "flat", "--format", "csv"]);
        assert_eq!(code, EXIT_CHECK_FAILED);
        assert!(out.contains("hpd_theta_pde,flat,2e0"));
        assert!(err.contains("hpd_theta_pde"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("verify-prior"));
    }

    #[test]
    fn numerical_errors_map_to_four() {
        let e = Error::NoConvergence {
            method: "x",
            best: 0.0,
            error: 1.0,
        };
        assert_eq!(exit_code(&e), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_DATA);
    }
}
