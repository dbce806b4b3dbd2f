use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tfmbe::harness::benchmark::{adaptive_benchmark, benchmark_config, Strategy};
use tfmbe::harness::coarsen::{coarsen_config, coarsening, CoarsenConfig, CoarsenFits};
use tfmbe::harness::config::{read_toml, OdeConvConfig, PdeConvConfig, SoeVerifyConfig};
use tfmbe::harness::output::{write_metadata, write_series_csv, write_steps_csv, write_table_csv};
use tfmbe::harness::run::{RunConfig, RunSummary};
use tfmbe::harness::{ode_convergence, pde_convergence, ConvergenceRow, RunReport};
use tfmbe::soe::SoeApprox;
use tfmbe::spectral::{write_snapshot, Model};
use tfmbe::timemesh::MeshKind;

#[derive(Parser)]
#[command(name = "tfmbe", version, about = "Time-fractional MBE solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy of the L1+ formula on a scalar problem with a known solution.
    OdeConv(OdeConvArgs),
    /// Accuracy of the CN-SAV schemes on a manufactured solution.
    PdeConv(PdeConvArgs),
    /// Uniform, graded or adaptive run from the two-mode initial height.
    Benchmark(BenchmarkArgs),
    /// Coarsening from a random initial height with scaling fits.
    Coarsen(CoarsenArgs),
    /// Builds an exponential-sum kernel and reports its certified error.
    SoeVerify(SoeVerifyArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV, snapshot and metadata files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Slope,
    NoSlope,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Slope => Model::Slope,
            ModelArg::NoSlope => Model::NoSlope,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Uniform,
    Graded,
    Adaptive,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Uniform => Strategy::Uniform,
            StrategyArg::Graded => Strategy::Graded,
            StrategyArg::Adaptive => Strategy::Adaptive,
        }
    }
}

#[derive(Args)]
struct OdeConvArgs {
    #[command(flatten)]
    common: Common,
    /// Fractional orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Grading exponent; switches the mesh to a graded start with a random tail.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mesh sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
}

#[derive(Args)]
struct PdeConvArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "slope")]
    model: ModelArg,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    seed: u64,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "slope")]
    model: ModelArg,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "adaptive")]
    strategy: StrategyArg,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// 128^2 grid instead of the 64^2 desk default.
    #[arg(long)]
    full: bool,
    /// Direct history summation instead of the exponential sum.
    #[arg(long)]
    direct: bool,
}

#[derive(Args)]
struct CoarsenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "slope")]
    model: ModelArg,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// 128^2 grid and T = 500 instead of 64^2 and T = 200.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct SoeVerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "dt-min")]
    dt_min: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::OdeConv(a) => ode_conv(a),
        Command::PdeConv(a) => pde_conv(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Coarsen(a) => coarsen(a),
        Command::SoeVerify(a) => soe_verify(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn out_dir(common: &Common) -> AnyResult<Option<&Path>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
    }
    Ok(common.out.as_deref())
}

fn csv(path: PathBuf) -> AnyResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_table(label: &str, rows: &[ConvergenceRow]) {
    println!("{label}");
    println!("{:>6} {:>12} {:>12} {:>7}", "N", "tau", "error", "order");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into());
        println!("{:>6} {:>12.3e} {:>12.3e} {:>7}", r.n, r.tau, r.error, order);
    }
}

#[derive(Serialize)]
struct AlphaTable<'a> {
    alpha: f64,
    rows: &'a [ConvergenceRow],
}

#[derive(Serialize)]
struct Tables<'a> {
    tables: Vec<AlphaTable<'a>>,
}

fn ode_conv(a: OdeConvArgs) -> AnyResult<()> {
    let mut cfg: OdeConvConfig = match &a.common.config {
        Some(p) => read_toml(p)?,
        None => OdeConvConfig::default(),
    };
    if let Some(v) = a.alpha {
        cfg.alphas = v;
    }
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(g) = a.gamma {
        cfg.mesh.kind = MeshKind::GradedRandomTail;
        cfg.mesh.gamma = g;
    }
    if let Some(s) = a.seed {
        cfg.mesh.seed = s;
    }
    if let Some(ns) = a.ns {
        cfg.ns = ns;
    }
    let mut all = Vec::new();
    for &alpha in &cfg.alphas {
        let rows = ode_convergence(alpha, cfg.sigma, &cfg.mesh, &cfg.ns)?;
        print_table(&format!("alpha = {alpha}"), &rows);
        all.push((alpha, rows));
    }
    if let Some(dir) = out_dir(&a.common)? {
        for (alpha, rows) in &all {
            let mut w = csv(dir.join(format!("ode_alpha_{alpha}.csv")))?;
            write_table_csv(&mut w, rows)?;
            w.flush()?;
        }
        let tables = Tables {
            tables: all.iter().map(|(alpha, rows)| AlphaTable { alpha: *alpha, rows }).collect(),
        };
        write_metadata(&dir.join("metadata.toml"), "ode-conv", &cfg, &tables)?;
    }
    Ok(())
}

fn pde_conv(a: PdeConvArgs) -> AnyResult<()> {
    let mut cfg: PdeConvConfig = match &a.common.config {
        Some(p) => read_toml(p)?,
        None => PdeConvConfig::new(a.model.into(), a.gamma, a.seed),
    };
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    if let Some(ns) = a.ns {
        cfg.ns = ns;
    }
    let rows = pde_convergence(&cfg.model, cfg.alpha, cfg.sigma, &cfg.mesh, &cfg.ns, cfg.grid)?;
    print_table(
        &format!("{} model, alpha = {}, gamma = {}", cfg.model.model.name(), cfg.alpha, cfg.mesh.gamma),
        &rows,
    );
    if let Some(dir) = out_dir(&a.common)? {
        let mut w = csv(dir.join("table.csv"))?;
        write_table_csv(&mut w, &rows)?;
        w.flush()?;
        write_metadata(&dir.join("metadata.toml"), "pde-conv", &cfg, &Tables {
            tables: vec![AlphaTable { alpha: cfg.alpha, rows: &rows }],
        })?;
    }
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!(
        "steps: {} accepted, {} rejected, {} forced; tau in [{:.3e}, {:.3e}]",
        s.accepted, s.rejected, s.forced, s.min_tau, s.max_tau
    );
    println!(
        "energy: E0 = {:.10e}, max excess {:.3e}, telescoping residual {:.3e}",
        s.initial_energy, s.max_energy_excess, s.telescoping_residual
    );
    if s.soe_terms > 0 {
        println!("history: {} exponentials, eps {:.1e}", s.soe_terms, s.soe_eps);
    }
}

fn write_run(dir: &Path, report: &RunReport) -> AnyResult<()> {
    let mut w = csv(dir.join("steps.csv"))?;
    write_steps_csv(&mut w, &report.records)?;
    w.flush()?;
    write_snapshot(&dir.join("final.fld"), &report.final_phi)?;
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> AnyResult<()> {
    let mut cfg: RunConfig = match &a.common.config {
        Some(p) => read_toml(p)?,
        None => {
            let n = if a.full { 128 } else { 64 };
            benchmark_config(a.model.into(), a.alpha, a.strategy.into(), n, 30.0)
        }
    };
    if let Some(g) = a.grid {
        cfg.grid.n = g;
    }
    if let Some(t) = a.t_end {
        cfg.mesh.n = (cfg.mesh.n as f64 * t / cfg.mesh.t_end).round() as usize;
        cfg.mesh.t_end = t;
    }
    if a.direct {
        cfg.soe.enabled = false;
    }
    let report = adaptive_benchmark(&cfg)?;
    print_summary(&report.summary);
    if let Some(dir) = out_dir(&a.common)? {
        write_run(dir, &report)?;
        write_metadata(&dir.join("metadata.toml"), "benchmark", &cfg, &report.summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoarsenResults<'a> {
    summary: &'a RunSummary,
    fits: &'a CoarsenFits,
}

fn coarsen(a: CoarsenArgs) -> AnyResult<()> {
    let mut cfg: CoarsenConfig = match &a.common.config {
        Some(p) => read_toml(p)?,
        None => {
            let (n, t) = if a.full { (128, 500.0) } else { (64, 200.0) };
            coarsen_config(a.model.into(), a.alpha, n, t, 0)
        }
    };
    if let Some(g) = a.grid {
        cfg.run.grid.n = g;
    }
    if let Some(t) = a.t_end {
        cfg.run.mesh.t_end = t;
        cfg.window.1 = t.min(500.0);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let report = coarsening(&cfg)?;
    print_summary(&report.run.summary);
    let f = &report.fits;
    println!(
        "fits on [{}, {}]: energy rate {:.4}, roughness rate {:.4}",
        cfg.window.0, cfg.window.1, f.energy_rate, f.roughness_rate
    );
    if let Some(dir) = out_dir(&a.common)? {
        write_run(dir, &report.run)?;
        write_metadata(&dir.join("metadata.toml"), "coarsen", &cfg, &CoarsenResults {
            summary: &report.run.summary,
            fits: f,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SoeResults {
    terms: usize,
    achieved: f64,
}

fn soe_verify(a: SoeVerifyArgs) -> AnyResult<()> {
    let mut cfg: SoeVerifyConfig = match &a.common.config {
        Some(p) => read_toml(p)?,
        None => SoeVerifyConfig::default(),
    };
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.eps {
        cfg.eps = v;
    }
    if let Some(v) = a.dt_min {
        cfg.dt_min = v;
    }
    if let Some(v) = a.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    let soe = SoeApprox::build(cfg.alpha, cfg.eps, cfg.dt_min, cfg.t_end)?;
    let achieved = soe.verify(cfg.samples);
    println!(
        "{} exponentials, max error {achieved:.3e} on [{:e}, {}] (requested {:e})",
        soe.len(),
        cfg.dt_min,
        cfg.t_end,
        cfg.eps
    );
    if let Some(dir) = out_dir(&a.common)? {
        let pairs: Vec<(f64, f64)> = soe.nodes.iter().copied().zip(soe.weights.iter().copied()).collect();
        let mut w = csv(dir.join("soe.csv"))?;
        write_series_csv(&mut w, ("theta", "weight"), &pairs)?;
        w.flush()?;
        write_metadata(&dir.join("metadata.toml"), "soe-verify", &cfg, &SoeResults {
            terms: soe.len(),
            achieved,
        })?;
    }
    Ok(())
}
