use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polar_lattice::decoder::SclConfig;
use polar_lattice::density::Grid;
use polar_lattice::design::{
    design_lattice, design_pw, design_with_dimensions, rho_curve, sigma2_from_inv_db, MonteCarloBudget,
    RhoMethod,
};
use polar_lattice::lattice::LatticeDesign;
use polar_lattice::sim::{run_wer, SimPlan, SweepPoint, TransmitMode};
use polar_lattice::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Design and simulate polar code lattices (Construction D over nested polar codes).
#[derive(Debug, Parser)]
#[command(name = "polar-lattice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a lattice with the equal error probability rule and write it as JSON.
    Design(DesignArgs),
    /// Tabulate the largest code dimension meeting a WER target over a noise grid.
    Rho(RhoArgs),
    /// Simulate a design's multistage decoder and write WER per sweep point as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecoderArg {
    Sc,
    Scl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Zero,
    Random,
}

#[derive(Debug, Args)]
struct DecoderOpts {
    #[arg(long, value_enum, default_value = "sc")]
    decoder: DecoderArg,
    /// CRC bits on each nonempty level (list decoding only).
    #[arg(long, default_value_t = 6)]
    crc: usize,
    /// List size (list decoding only).
    #[arg(long, default_value_t = 32)]
    list: usize,
    /// Density evolution grid range.
    #[arg(long, default_value_t = 60.0)]
    grid_max: f64,
    /// Density evolution grid step.
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
}

#[derive(Debug, Args)]
struct McOpts {
    /// Trial cap per Monte Carlo estimate.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Stop an estimate after this many word errors (0: run all trials).
    #[arg(long, default_value_t = 100)]
    target_errors: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0: all available cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    n: usize,
    /// Number of coded levels `a`.
    #[arg(long)]
    levels: usize,
    /// Overall lattice word error target.
    #[arg(long)]
    wer: f64,
    /// Payload bits per coded level, bottom first; skips the rate search.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[command(flatten)]
    decoder: DecoderOpts,
    #[command(flatten)]
    mc: McOpts,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RhoArgs {
    #[arg(long)]
    n: usize,
    /// Per-code word error target.
    #[arg(long)]
    wer: f64,
    /// Noise variances, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "snr_db",
        required_unless_present = "snr_db"
    )]
    sigma2: Option<Vec<f64>>,
    /// Grid as `10 log10(1 / sigma2)` values, comma separated.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    #[command(flatten)]
    decoder: DecoderOpts,
    #[command(flatten)]
    mc: McOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Design JSON produced by `design`.
    #[arg(long)]
    design: PathBuf,
    /// VNR points in dB, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "sigma2",
        required_unless_present = "sigma2"
    )]
    vnr_sweep: Option<Vec<f64>>,
    /// Level-0 noise variances, comma separated.
    #[arg(long, value_delimiter = ',')]
    sigma2: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "zero")]
    mode: ModeArg,
    /// Fill in the wall-time column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    mc: McOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) => Failure::Infeasible(e.to_string()),
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check_n(n: usize) -> Result<(), Failure> {
    if n == 0 || !n.is_power_of_two() {
        return Err(usage(format!("--n {n} is not a power of two")));
    }
    Ok(())
}

fn check_wer(wer: f64) -> Result<(), Failure> {
    if !(wer > 0.0 && wer < 1.0) {
        return Err(usage(format!("--wer {wer} must lie in (0, 1)")));
    }
    Ok(())
}

impl DecoderOpts {
    fn scl(&self) -> Result<SclConfig, Failure> {
        Ok(SclConfig::new(self.list, self.crc)?)
    }

    fn grid(&self) -> Result<Grid, Failure> {
        Ok(Grid::new(self.grid_max, self.grid_step)?)
    }

    fn method(&self, mc: &McOpts) -> Result<RhoMethod, Failure> {
        Ok(match self.decoder {
            DecoderArg::Sc => RhoMethod::DensityEvolution(self.grid()?),
            DecoderArg::Scl => RhoMethod::MonteCarlo(self.scl()?, mc.budget()?),
        })
    }
}

impl McOpts {
    fn budget(&self) -> Result<MonteCarloBudget, Failure> {
        if self.trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        Ok(MonteCarloBudget {
            min_errors: self.target_errors,
            max_trials: self.trials,
            seed: self.seed,
            workers: self.workers,
        })
    }
}

/// Writes the whole output at once, so a failed run leaves no partial file.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn cmd_design(a: &DesignArgs) -> Result<(), Failure> {
    check_n(a.n)?;
    check_wer(a.wer)?;
    let design = match &a.k {
        Some(k) => {
            if k.len() != a.levels {
                return Err(usage(format!(
                    "--k lists {} levels, --levels is {}",
                    k.len(),
                    a.levels
                )));
            }
            match a.decoder.decoder {
                DecoderArg::Sc => design_with_dimensions(a.n, a.wer, k, a.decoder.grid()?)?,
                DecoderArg::Scl => design_pw(a.n, a.wer, k, a.decoder.scl()?)?,
            }
        }
        None => design_lattice(a.n, a.levels, a.wer, a.decoder.method(&a.mc)?)?,
    };
    let mut json = design.to_json()?;
    json.push('\n');
    emit(a.out.as_deref(), json.as_bytes())
}

fn cmd_rho(a: &RhoArgs) -> Result<(), Failure> {
    check_n(a.n)?;
    check_wer(a.wer)?;
    let mut grid: Vec<f64> = match (&a.sigma2, &a.snr_db) {
        (Some(s), _) => s.clone(),
        (None, Some(db)) => db.iter().map(|&d| sigma2_from_inv_db(d)).collect(),
        (None, None) => Vec::new(),
    };
    if grid.is_empty() {
        return Err(usage("noise grid is empty"));
    }
    if grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(usage("noise variances must be positive and finite"));
    }
    grid.sort_by(f64::total_cmp);
    let method = a.decoder.method(&a.mc)?;
    let curve = rho_curve(a.n, a.wer, &grid, method)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn load_design(path: &Path) -> Result<LatticeDesign, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    LatticeDesign::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let design = load_design(&a.design)?;
    let sweep: Vec<SweepPoint> = match (&a.vnr_sweep, &a.sigma2) {
        (Some(v), _) => v.iter().map(|&x| SweepPoint::Vnr(x)).collect(),
        (None, Some(s)) => s.iter().map(|&x| SweepPoint::Sigma2(x)).collect(),
        (None, None) => Vec::new(),
    };
    if sweep.is_empty() {
        return Err(usage("sweep is empty"));
    }
    a.mc.budget()?;
    let mode = match a.mode {
        ModeArg::Zero => TransmitMode::Zero,
        ModeArg::Random => TransmitMode::Random,
    };
    let plan = SimPlan::new(sweep, a.mc.trials, a.mc.target_errors, a.mc.seed)
        .with_mode(mode)
        .with_workers(a.mc.workers);
    let stats = run_wer(&design, &plan)?;
    let mut buf = Vec::new();
    stats.write_csv(&mut buf, a.timing)?;
    emit(a.out.as_deref(), &buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Rho(a) => cmd_rho(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
