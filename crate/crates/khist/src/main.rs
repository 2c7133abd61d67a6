use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use khist::error::{CliError, Result};
use khist::format::{read_hypothesis, read_samples, write_file, write_hypothesis, write_samples};
use khist::generate::{draw, gen_truth};
use khist::pipeline::{dense_dump, run_eval, run_learn, run_oracle, GridChoice, LearnConfig, Metric, Report};
use khist_core::{sample_budget, Domain, DomainKind, EmpiricalDist, FormulaId, OracleGuard};

#[derive(Parser)]
#[command(name = "khist", version, about = "Learn k-piece multidimensional histograms from samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random k-piece ground-truth histogram.
    Gen(GenArgs),
    /// Draw samples from a hypothesis file.
    Sample(SampleArgs),
    /// Learn a hypothesis from a sample file.
    Learn(LearnArgs),
    /// Compare a hypothesis with a truth and/or samples.
    Eval(EvalArgs),
    /// Solve a small instance exactly.
    Oracle(OracleArgs),
    /// Planned sample size for a learner.
    Budget(BudgetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Discrete,
    Unit,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L1,
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L1 => Metric::L1,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Adaptive,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulaArg {
    Fixed,
    Adaptive,
    L2,
}

#[derive(Args)]
struct DomainOpts {
    /// Domain type.
    #[arg(long)]
    domain: Option<DomainArg>,
    /// Side of a discrete domain.
    #[arg(long)]
    m: Option<u64>,
    /// Dimension.
    #[arg(long)]
    dim: Option<usize>,
}

impl DomainOpts {
    fn build(&self) -> Result<Domain> {
        let dim = self.dim.ok_or_else(|| CliError::Config("--dim is required".into()))?;
        match self.domain {
            Some(DomainArg::Unit) => Ok(Domain::unit(dim)?),
            Some(DomainArg::Discrete) => {
                let m = self.m.ok_or_else(|| CliError::Config("--m is required on a discrete domain".into()))?;
                Ok(Domain::discrete(dim, m)?)
            }
            None => Err(CliError::Config("--domain is required".into())),
        }
    }

    /// Rejects any flag that disagrees with `domain`.
    fn check(&self, domain: &Domain) -> Result<()> {
        let mismatch = |what: &str| Err(CliError::Config(format!("--{what} disagrees with the input file")));
        if self.dim.is_some_and(|d| d != domain.dim()) {
            return mismatch("dim");
        }
        match (self.domain, domain.kind()) {
            (Some(DomainArg::Unit), DomainKind::Discrete { .. }) | (Some(DomainArg::Discrete), DomainKind::Unit) => {
                return mismatch("domain")
            }
            _ => {}
        }
        match domain.kind() {
            DomainKind::Discrete { m } if self.m.is_some_and(|x| x != m) => mismatch("m"),
            DomainKind::Unit if self.m.is_some() => mismatch("m"),
            _ => Ok(()),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    domain: DomainOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output hypothesis file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Hypothesis to sample from.
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Sample file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Ground truth for error reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Fit tolerance; derived from eps, k, xi and the grid when absent.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "l1")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "adaptive")]
    grid: GridArg,
    /// Cells per axis of a fixed grid (a power of two).
    #[arg(long)]
    cells: Option<usize>,
    /// Rescale the output to total mass 1.
    #[arg(long)]
    normalize: bool,
    /// Constant of the sample budget.
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[command(flatten)]
    domain: DomainOpts,
    /// Output hypothesis file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// File for per-phase wall times; stderr when absent.
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Dump hypothesis values on a dense grid.
    #[arg(long)]
    dense: Option<PathBuf>,
    /// Cells per axis of the dense dump on the unit cube.
    #[arg(long, default_value_t = 64)]
    dense_cells: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Hypothesis file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Sample file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "l1")]
    metric: MetricArg,
    #[arg(long)]
    cells: Option<usize>,
    #[command(flatten)]
    domain: DomainOpts,
    /// Largest number of dyadic rectangles enumerated.
    #[arg(long, default_value_t = 10_000)]
    max_rects: u64,
    /// Largest number of partitions enumerated.
    #[arg(long, default_value_t = 1_000_000)]
    max_partitions: u64,
    /// Output file for the optimal hypothesis.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, value_enum, default_value = "adaptive")]
    formula: FormulaArg,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[command(flatten)]
    domain: DomainOpts,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
        }
    }
}

fn paths_report(input: &Path, truth: Option<&Path>) -> Report {
    let mut r = Report::default();
    r.push("input", input.display());
    if let Some(t) = truth {
        r.push("truth", t.display());
    }
    r
}

fn learn(a: LearnArgs) -> Result<()> {
    let samples = read_samples(&a.input)?;
    a.domain.check(samples.domain())?;
    let truth = a.truth.as_deref().map(read_hypothesis).transpose()?;
    let cfg = LearnConfig {
        k: a.k,
        xi: a.xi,
        eps: a.eps,
        delta: a.delta,
        gamma: a.gamma,
        seed: a.seed,
        metric: a.metric.into(),
        grid: match a.grid {
            GridArg::Adaptive => GridChoice::Adaptive,
            GridArg::Fixed => GridChoice::Fixed,
        },
        cells: a.cells,
        normalize: a.normalize,
        c: a.c,
        ..Default::default()
    };
    let run = run_learn(&cfg, &samples, truth.as_ref())?;
    if let Some(p) = &a.out {
        write_file(p, &write_hypothesis(&run.hist))?;
    }
    if let Some(p) = &a.dense {
        write_file(p, &dense_dump(&run.hist, a.dense_cells)?)?;
    }
    let mut report = paths_report(&a.input, a.truth.as_deref());
    report.extend(run.report);
    emit(a.report.as_deref(), &report.to_string())?;
    match &a.timings {
        Some(p) => write_file(p, &run.timings.to_string()),
        None => {
            eprint!("{}", run.timings);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let h = gen_truth(a.k, a.domain.build()?, a.seed)?;
            emit(a.out.as_deref(), &write_hypothesis(&h))
        }
        Command::Sample(a) => {
            let h = read_hypothesis(&a.input)?;
            let pts = draw(&h, a.n, a.seed)?;
            emit(a.out.as_deref(), &write_samples(h.domain(), &pts))
        }
        Command::Learn(a) => learn(a),
        Command::Eval(a) => {
            let h = read_hypothesis(&a.input)?;
            let truth = a.truth.as_deref().map(read_hypothesis).transpose()?;
            let samples: Option<EmpiricalDist> = a.samples.as_deref().map(read_samples).transpose()?;
            let mut report = paths_report(&a.input, a.truth.as_deref());
            report.extend(run_eval(&h, truth.as_ref(), samples.as_ref(), a.k)?);
            emit(a.out.as_deref(), &report.to_string())
        }
        Command::Oracle(a) => {
            let samples = read_samples(&a.input)?;
            a.domain.check(samples.domain())?;
            let guard = OracleGuard { max_dyadic_rects: a.max_rects, max_partitions: a.max_partitions };
            let (h, r) = run_oracle(&samples, a.metric.into(), a.k, a.cells, &guard)?;
            if let Some(p) = &a.out {
                write_file(p, &write_hypothesis(&h))?;
            }
            let mut report = paths_report(&a.input, None);
            report.extend(r);
            emit(a.report.as_deref(), &report.to_string())
        }
        Command::Budget(a) => {
            let dim = a.domain.dim.unwrap_or(1);
            let kind = match (a.domain.domain, a.domain.m) {
                (Some(DomainArg::Unit), _) | (None, None) => DomainKind::Unit,
                (_, Some(m)) => DomainKind::Discrete { m },
                (Some(DomainArg::Discrete), None) => {
                    return Err(CliError::Config("--m is required on a discrete domain".into()))
                }
            };
            let formula = match a.formula {
                FormulaArg::Fixed => FormulaId::FixedGridL1,
                FormulaArg::Adaptive => FormulaId::AdaptiveL1,
                FormulaArg::L2 => FormulaId::L2,
            };
            let b = sample_budget(formula, a.k, dim, kind, a.eps, a.delta, a.xi, a.c)?;
            emit(None, &format!("n = {}\n", b.n))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
