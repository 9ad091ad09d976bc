use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rgn_bench::experiment::{emit, normalized_rank1_ensemble, to_csv};
use rgn_bench::{run, ExperimentConfig, Problem};
use rgn_core::measurement::{completion_sample, gaussian_ensemble};
use rgn_core::{DenseTensor, MeasurementEnsemble, Shape, Truncation, TuckerRank};

#[derive(Parser)]
#[command(name = "rgn-bench", version, about = "Synthetic experiments for Riemannian Gauss-Newton tensor estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian-design tensor regression.
    Regression(RunArgs),
    /// Regression with rank-one measurement tensors.
    Rank1(RunArgs),
    /// Tensor completion from uniformly sampled entries.
    Completion(RunArgs),
    /// Tensor SVD (denoising a fully observed tensor).
    Svd(RunArgs),
    /// Tucker-truncate a tensor file.
    Decompose(DecomposeArgs),
    /// Empirical restricted-isometry ratios of a random ensemble.
    ProbeTrip(ProbeArgs),
}

/// Every flag is optional so that values from `--config` survive unless
/// given explicitly.
#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mode sizes: one value for a cube or a comma list.
    #[arg(long)]
    p: Option<String>,
    /// Tucker rank: one value or a comma list.
    #[arg(long)]
    r: Option<String>,
    /// Tensor order when `--p` / `--r` are single values.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Completion sampling fraction (instead of `--n`).
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    lambda_min: Option<String>,
    /// spectral | random
    #[arg(long)]
    init: Option<String>,
    /// rgn | iht
    #[arg(long)]
    solver: Option<String>,
    /// IHT step size.
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// st-hosvd | t-hosvd
    #[arg(long)]
    retraction: Option<String>,
    /// qr | cg
    #[arg(long)]
    ls_solver: Option<String>,
    /// paper7 (unit-variance design) | paper41 (1/n-variance design)
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// CSV path; the JSON report goes next to it.
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn config(&self, problem: Problem) -> rgn_core::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig {
            problem,
            ..ExperimentConfig::default()
        };
        if let Some(path) = &self.config {
            cfg.apply_file_text(&std::fs::read_to_string(path)?)?;
            cfg.problem = problem;
        }
        // order first so that single-value sizes expand to the right length
        let flags = [
            ("order", &self.order),
            ("p", &self.p),
            ("r", &self.r),
            ("n", &self.n),
            ("rho", &self.rho),
            ("sigma", &self.sigma),
            ("lambda-min", &self.lambda_min),
            ("init", &self.init),
            ("solver", &self.solver),
            ("step", &self.step),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("max-iter", &self.max_iter),
            ("tol", &self.tol),
            ("retraction", &self.retraction),
            ("ls-solver", &self.ls_solver),
            ("scaling", &self.scaling),
            ("workers", &self.workers),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DecomposeArgs {
    /// Dense tensor text file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    r: String,
    #[arg(long, default_value = "st-hosvd")]
    method: String,
    /// Output Tucker text file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gaussian,
    Rank1,
    Completion,
    Identity,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    ensemble: EnsembleArg,
    #[arg(long, default_value = "8")]
    p: String,
    #[arg(long, default_value = "1")]
    r: String,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Config(rgn_core::Error),
    Runtime(rgn_core::Error),
}

fn run_experiment(args: &RunArgs, problem: Problem) -> Result<(), Failure> {
    let cfg = args.config(problem).map_err(Failure::Config)?;
    let report = run(&cfg).map_err(Failure::Runtime)?;
    match &cfg.out {
        Some(path) => {
            let json = emit(&report, path).map_err(Failure::Runtime)?;
            eprintln!("wrote {} and {}", path.display(), json.display());
        }
        None => print!("{}", to_csv(&report)),
    }
    let s = &report.summary;
    eprintln!(
        "{} trials, {} failed; median final rel_rmse {}, median iterations {}",
        report.trials.len(),
        s.failures,
        s.median_final_rel_rmse.map_or("-".into(), |e| format!("{e:.3e}")),
        s.median_iterations.map_or("-".into(), |i| format!("{i}")),
    );
    for t in report.trials.iter().filter(|t| t.error.is_some()) {
        eprintln!("trial {}: {}", t.trial, t.error.as_deref().unwrap_or_default());
    }
    Ok(())
}

fn decompose(args: &DecomposeArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Failure::Config(e.into()))?;
    let t = DenseTensor::parse_text(&text).map_err(Failure::Config)?;
    let r = rgn_bench::config::parse_dims_list(&args.r, t.order())
        .and_then(TuckerRank::new)
        .map_err(Failure::Config)?;
    let method: Truncation = args.method.parse().map_err(Failure::Config)?;
    let x = rgn_core::tucker::truncate(&t, &r, method).map_err(Failure::Runtime)?;
    let err = x.dense().sub(&t).map_err(Failure::Runtime)?.hs_norm();
    let norm = t.hs_norm();
    eprintln!(
        "rank {r} {method}: relative residual {:.6e}",
        if norm > 0.0 { err / norm } else { 0.0 }
    );
    let text = x.to_text();
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Runtime(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn probe(args: &ProbeArgs) -> Result<(), Failure> {
    let build = || -> rgn_core::Result<(MeasurementEnsemble, TuckerRank)> {
        let shape = Shape::new(rgn_bench::config::parse_dims_list(&args.p, args.order)?)?;
        let r = TuckerRank::new(rgn_bench::config::parse_dims_list(&args.r, args.order)?)?;
        r.check(&shape)?;
        let e = match args.ensemble {
            EnsembleArg::Gaussian => gaussian_ensemble(args.n, &shape, 1.0 / args.n as f64, args.seed)?,
            EnsembleArg::Rank1 => normalized_rank1_ensemble(args.n, &shape, args.seed)?,
            EnsembleArg::Completion => completion_sample(args.n, &shape, args.seed)?,
            EnsembleArg::Identity => MeasurementEnsemble::identity(&shape),
        };
        Ok((e, r))
    };
    let (e, r) = build().map_err(Failure::Config)?;
    let (mut lo, mut hi) = e
        .trip_probe(&r, args.trials, args.seed.wrapping_add(1))
        .map_err(Failure::Runtime)?;
    if let EnsembleArg::Completion = args.ensemble {
        // report for the rescaled sampling operator sqrt(size / n) P_Omega
        let scale = e.shape().size() as f64 / args.n as f64;
        lo *= scale;
        hi *= scale;
    }
    println!("min_ratio,max_ratio");
    println!("{lo:e},{hi:e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Regression(a) => run_experiment(a, Problem::Regression),
        Command::Rank1(a) => run_experiment(a, Problem::Rank1),
        Command::Completion(a) => run_experiment(a, Problem::Completion),
        Command::Svd(a) => run_experiment(a, Problem::Svd),
        Command::Decompose(a) => decompose(a),
        Command::ProbeTrip(a) => probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
