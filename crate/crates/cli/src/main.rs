//! Command-line front end for `bf2p`.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bf2p::averaging::{bf_avg01, ModelPriorWeights};
use bf2p::depib::bf01_depib;
use bf2p::harness::{
    ingest_csv, ingest_str, median_log_bf01, run_sweep, sensitivity_curve, write_density_grid_csv, write_results,
    write_sensitivity_csv, OutputFormat, ParamPoint, SweepGrids, SweepMethod, SHIPPED_CORPUS,
};
use bf2p::ib::bf01_ib;
use bf2p::lt::bf01_lt;
use bf2p::model::{evidence_category, EvidenceLabel, EvidenceResult, Hypothesis, PriorConfig, TwoByTwoData};
use bf2p::posterior::{
    posterior_draws_ib, posterior_grid_lt, savage_dickey_log_bf01, summarize_posterior, PosteriorSource,
};
use bf2p::priors::{joint_density_grid, marginal_density, prior_correlation, JointCoords, Quantity};
use bf2p::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bf2p", version, about = "Bayes factors for the equality of two binomial proportions")]
struct Cli {
    /// Seed for every Monte Carlo step.
    #[arg(long, global = true, env = "BF2P_SEED", default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bayes factor of one 2x2 table.
    Bf(BfArgs),
    /// Prior densities, joint grids and correlations.
    Priors(PriorsArgs),
    /// Posterior summaries of one 2x2 table.
    Posterior(PosteriorArgs),
    /// Model-averaged Bayes factor over the IB and LT models.
    Avg(AvgArgs),
    /// Hyperparameter sweep over a study file.
    Reanalyze(ReanalyzeArgs),
    /// Bayes factors for equal counts y out of n in both groups.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Successes in group 1.
    #[arg(long)]
    y1: u64,
    /// Trials in group 1.
    #[arg(long)]
    n1: u64,
    /// Successes in group 2.
    #[arg(long)]
    y2: u64,
    /// Trials in group 2.
    #[arg(long)]
    n2: u64,
}

impl DataArgs {
    fn data(&self) -> bf2p::Result<TwoByTwoData> {
        TwoByTwoData::new(self.y1, self.n1, self.y2, self.n2)
    }
}

#[derive(Args, Clone, Copy)]
struct PriorArgs {
    /// IB Beta(a, a) parameter; recommended a >= 1.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// LT prior sd of the average log odds.
    #[arg(long, default_value_t = 1.0)]
    sigma_beta: f64,
    /// LT prior sd of the log odds ratio; values above 2 trigger a warning.
    #[arg(long, default_value_t = 1.0)]
    sigma_psi: f64,
    /// Dependent IB prior sd of the rate difference.
    #[arg(long, default_value_t = 0.2)]
    sigma_eta: f64,
    /// Dependent IB prior sd of the grand mean.
    #[arg(long, default_value_t = 0.5)]
    sigma_zeta: f64,
}

impl PriorArgs {
    fn config(&self, method: MethodArg) -> bf2p::Result<PriorConfig> {
        let cfg = match method {
            MethodArg::Ib => PriorConfig::ib(self.a)?,
            MethodArg::Lt => PriorConfig::lt(self.sigma_beta, self.sigma_psi)?,
            MethodArg::DepIb => PriorConfig::dep_ib(self.sigma_eta, self.sigma_zeta)?,
        };
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Ib,
    Lt,
    DepIb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Args)]
struct BfArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Ib)]
    method: MethodArg,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    format: TextFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuantityArg {
    Eta,
    Psi,
    Theta1,
    Theta2,
    Correlation,
    Joint,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoordsArg {
    Theta1Theta2,
    Theta1Eta,
    Theta1Psi,
}

#[derive(Args)]
struct PriorsArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Ib)]
    config: MethodArg,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    /// Coordinates of the joint grid.
    #[arg(long, value_enum, default_value_t = CoordsArg::Theta1Theta2)]
    coords: CoordsArg,
    /// Points per axis of density grids.
    #[arg(long, default_value_t = 201)]
    resolution: usize,
    /// Prior draws for the correlation.
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PosteriorArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Posterior of the IB or LT alternative.
    #[arg(long, value_enum, default_value_t = MethodArg::Lt)]
    method: MethodArg,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, value_enum, default_value_t = QuantityArg::Psi)]
    quantity: QuantityArg,
    /// IB posterior draws.
    #[arg(long, default_value_t = 400_000)]
    draws: usize,
    /// Points per axis of the LT posterior grid.
    #[arg(long, default_value_t = 301)]
    resolution: usize,
    /// Writes the LT posterior grid as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AvgArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Prior model weights for IB H0, IB H1, LT H0, LT H1.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.25, 0.25, 0.25, 0.25])]
    weights: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    /// a in 1..5 by 0.5 and sigma_psi in 1..2 by 0.1.
    Default,
    /// The single point given by the prior flags.
    Point,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepMethodArg {
    Ib,
    Lt,
    DepIb,
    Avg,
}

impl From<SweepMethodArg> for SweepMethod {
    fn from(m: SweepMethodArg) -> Self {
        match m {
            SweepMethodArg::Ib => SweepMethod::Ib,
            SweepMethodArg::Lt => SweepMethod::Lt,
            SweepMethodArg::DepIb => SweepMethod::DepIb,
            SweepMethodArg::Avg => SweepMethod::Avg,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FileFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ReanalyzeArgs {
    /// Study CSV with header id,label,y1,n1,y2,n2; the shipped corpus when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "method", value_enum, default_values_t = [SweepMethodArg::Ib, SweepMethodArg::Lt])]
    methods: Vec<SweepMethodArg>,
    #[arg(long, value_enum, default_value_t = GridArg::Default)]
    grid: GridArg,
    /// Overrides the a grid.
    #[arg(long, value_delimiter = ',')]
    a_values: Option<Vec<f64>>,
    /// Overrides the sigma_psi grid.
    #[arg(long, value_delimiter = ',')]
    sigma_psi_values: Option<Vec<f64>>,
    #[command(flatten)]
    prior: PriorArgs,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Exit with status 2 when any cell fails.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
    format: FileFormat,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Trials per group.
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long = "method", value_enum, default_values_t = [MethodArg::Ib, MethodArg::Lt])]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    prior: PriorArgs,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Io(PathBuf, io::Error),
    Strict(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(Error::Numerical { .. } | Error::Precision(..)) | Failure::Strict(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Strict(n) => write!(f, "{n} sweep cell(s) failed"),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match out {
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::Io(p.to_path_buf(), e))?;
            let mut w = io::BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::Io(p.to_path_buf(), e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| Failure::Io("<stdout>".into(), e))
        }
    }
}

fn label_text(r: &EvidenceResult) -> String {
    let c = evidence_category(r.log_bf01);
    let strength = match c.label {
        EvidenceLabel::Weak => "weak",
        EvidenceLabel::Moderate => "moderate",
        EvidenceLabel::Strong => "strong",
    };
    let side = match c.favours {
        Hypothesis::H0 => "H0",
        Hypothesis::H1 => "H1",
    };
    format!("{strength} evidence for {side}")
}

fn print_evidence(r: &EvidenceResult, format: TextFormat) {
    match format {
        TextFormat::Text => {
            println!("BF01            {:.6}", r.bf01());
            println!("BF10            {:.6}", r.bf10());
            println!("log BF01        {:.6}", r.log_bf01);
            println!("log p(D | H0)   {:.6}", r.log_ml_h0);
            println!("log p(D | H1)   {:.6}", r.log_ml_h1);
            println!("error estimate  {:.2e}", r.abs_error_estimate);
            println!("label           {} (interpretive)", label_text(r));
        }
        TextFormat::Json => {
            let v = json!({
                "bf01": r.bf01(),
                "bf10": r.bf10(),
                "log_bf01": r.log_bf01,
                "log_ml_h0": r.log_ml_h0,
                "log_ml_h1": r.log_ml_h1,
                "abs_error_estimate": r.abs_error_estimate,
                "method": r.method,
                "label": label_text(r),
            });
            println!("{v:#}");
        }
    }
}

fn cmd_bf(a: &BfArgs) -> CliResult {
    let d = a.data.data()?;
    let r = match a.prior.config(a.method)? {
        PriorConfig::Ib { a } => bf01_ib(&d, a)?,
        PriorConfig::Lt(p) => bf01_lt(&d, p.sigma_beta, p.sigma_psi)?,
        PriorConfig::DepIb(p) => bf01_depib(&d, &p)?,
    };
    print_evidence(&r, a.format);
    Ok(())
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

fn cmd_priors(a: &PriorsArgs, seed: u64) -> CliResult {
    let cfg = a.prior.config(a.config)?;
    let grid = match a.quantity {
        QuantityArg::Correlation => {
            println!("{:.6}", prior_correlation(&cfg, a.draws, seed)?);
            return Ok(());
        }
        QuantityArg::Joint => {
            let coords = match a.coords {
                CoordsArg::Theta1Theta2 => JointCoords::Theta1Theta2,
                CoordsArg::Theta1Eta => JointCoords::Theta1Eta,
                CoordsArg::Theta1Psi => JointCoords::Theta1Psi,
            };
            joint_density_grid(&cfg, coords, a.resolution)?
        }
        QuantityArg::Eta => marginal_density(&cfg, Quantity::Eta, &axis(-1.0, 1.0, a.resolution))?,
        QuantityArg::Psi => marginal_density(&cfg, Quantity::Psi, &axis(-8.0, 8.0, a.resolution))?,
        QuantityArg::Theta1 => marginal_density(&cfg, Quantity::Theta1, &axis(0.0, 1.0, a.resolution))?,
        QuantityArg::Theta2 => marginal_density(&cfg, Quantity::Theta2, &axis(0.0, 1.0, a.resolution))?,
    };
    with_output(a.out.as_deref(), |w| write_density_grid_csv(&grid, w))
}

fn quantity(q: QuantityArg) -> bf2p::Result<Quantity> {
    match q {
        QuantityArg::Eta => Ok(Quantity::Eta),
        QuantityArg::Psi => Ok(Quantity::Psi),
        QuantityArg::Theta1 => Ok(Quantity::Theta1),
        QuantityArg::Theta2 => Ok(Quantity::Theta2),
        _ => Err(Error::Config("posterior quantity must be eta, psi, theta1 or theta2".into())),
    }
}

fn cmd_posterior(a: &PosteriorArgs, seed: u64) -> CliResult {
    let d = a.data.data()?;
    let q = quantity(a.quantity)?;
    let s = match a.prior.config(a.method)? {
        PriorConfig::Ib { a: alpha } => {
            let draws = posterior_draws_ib(&d, alpha, a.draws, seed)?;
            summarize_posterior(PosteriorSource::Draws(&draws), q)?
        }
        PriorConfig::Lt(p) => {
            let g = posterior_grid_lt(&d, p.sigma_beta, p.sigma_psi, a.resolution)?;
            println!("savage-dickey BF01  {:.6}", savage_dickey_log_bf01(&d, &g).exp());
            if let Some(out) = &a.out {
                with_output(Some(out), |w| write_density_grid_csv(&g.grid, w))?;
            }
            summarize_posterior(PosteriorSource::Grid(&g), q)?
        }
        PriorConfig::DepIb(_) => {
            return Err(Error::Unsupported("posterior summaries for the dependent IB test".into()).into())
        }
    };
    println!("mean                {:.6}", s.mean);
    println!("95% interval        [{:.6}, {:.6}]", s.ci_low, s.ci_high);
    if s.n_draws > 0 {
        println!("draws               {}", s.n_draws);
        println!("mc standard error   {:.2e}", s.mc_se);
    }
    Ok(())
}

fn cmd_avg(a: &AvgArgs) -> CliResult {
    let d = a.data.data()?;
    let w = ModelPriorWeights::new(a.weights[0], a.weights[1], a.weights[2], a.weights[3])?;
    let ib = a.prior.config(MethodArg::Ib)?;
    let lt = a.prior.config(MethodArg::Lt)?;
    let r = bf_avg01(&d, &w, &ib, &lt)?;
    for msg in &r.warnings {
        eprintln!("warning: {msg}");
    }
    print_evidence(&r.evidence, TextFormat::Text);
    println!("log prior odds  {:.6}", r.log_prior_odds);
    println!("BFavg01         {:.6}", r.bf_avg01());
    Ok(())
}

fn cmd_reanalyze(a: &ReanalyzeArgs) -> CliResult {
    let batch = match &a.input {
        Some(p) => ingest_csv(p)?,
        None => ingest_str(SHIPPED_CORPUS)?,
    };
    let p = &a.prior;
    let mut grids = match a.grid {
        GridArg::Default => SweepGrids::default(),
        GridArg::Point => SweepGrids::single(p.a, p.sigma_beta, p.sigma_psi, p.sigma_eta, p.sigma_zeta),
    };
    if let Some(v) = &a.a_values {
        grids.a = v.clone();
    }
    if let Some(v) = &a.sigma_psi_values {
        grids.sigma_psi = v.clone();
    }
    let methods: Vec<SweepMethod> = a.methods.iter().map(|&m| m.into()).collect();
    let results = run_sweep(&batch, &methods, &grids, a.jobs)?;
    let format = match a.format {
        FileFormat::Csv => OutputFormat::Csv,
        FileFormat::Json => OutputFormat::Json,
    };
    with_output(a.out.as_deref(), |w| write_results(&results, format, w))?;
    let base = [
        (SweepMethod::Ib, ParamPoint { a: grids.a.first().copied(), ..Default::default() }),
        (
            SweepMethod::Lt,
            ParamPoint {
                sigma_beta: grids.sigma_beta.first().copied(),
                sigma_psi: grids.sigma_psi.first().copied(),
                ..Default::default()
            },
        ),
    ];
    for (m, pt) in base {
        if let Some(med) = median_log_bf01(&results, m, &pt) {
            eprintln!("median BF01 {m} at first grid point: {:.4}", med.exp());
        }
    }
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} sweep cell(s) failed");
        if a.strict {
            return Err(Failure::Strict(failed));
        }
    }
    Ok(())
}

fn cmd_sensitivity(a: &SensitivityArgs) -> CliResult {
    let cfgs = a.methods.iter().map(|&m| a.prior.config(m)).collect::<bf2p::Result<Vec<_>>>()?;
    let rows = sensitivity_curve(a.n, &cfgs)?;
    with_output(a.out.as_deref(), |w| write_sensitivity_csv(&rows, w))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match &cli.command {
        Command::Bf(a) => cmd_bf(a),
        Command::Priors(a) => cmd_priors(a, cli.seed),
        Command::Posterior(a) => cmd_posterior(a, cli.seed),
        Command::Avg(a) => cmd_avg(a),
        Command::Reanalyze(a) => cmd_reanalyze(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
