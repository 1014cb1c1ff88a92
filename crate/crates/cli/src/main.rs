//! `qetchain` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use qetchain::audit::{run_audit, AuditConfig};
use qetchain::correlations::{reduced_state_13, CorrelationReport};
use qetchain::genmeas::{no_qet_certificate_with, CertificateReport, DEFAULT_TRIALS};
use qetchain::linalg::hermitian_eig;
use qetchain::model::{
    build_hamiltonian, closed_form_spectrum, thermal_functionals, verify_functional_identities, ClosedFormSpectrum,
    FunctionalResiduals, ModelParams, Temperature, ThermalFunctionals,
};
use qetchain::protocol::{numeric_optimize, optimal_from_functionals, QetResult};
use qetchain::sweep::{self, AxisRange, Quantity, SweepError, SweepRecord, SweepSpec};

/// Residual above which `point` reports an inconsistency.
const POINT_TOL: f64 = 1e-9;
/// Allowed excess of the numeric optimum over the analytic one.
const OPTIMUM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Invalid(_) | SweepError::Parse(_) => CliError::Usage(e.to_string()),
            SweepError::Io(_) | SweepError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "qetchain", version, about = "Energy teleportation on a three-spin Ising chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Everything at a single (κ, λ, T)
    Point(PointArgs),
    /// Grid of selected quantities
    Sweep(SweepArgs),
    /// Efficiency grid with per-temperature maxima
    Efficiency(EfficiencyArgs),
    /// No-teleportation certificate at λ = 0
    Certify(CertifyArgs),
    /// Seeded run of every identity and oracle check
    Audit(AuditArgs),
}

#[derive(Args)]
struct PointArgs {
    #[arg(long, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    temp: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    kappa_range: AxisRange,
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    lambda_range: AxisRange,
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    temps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_delimiter = ',', default_value = "e_b_max,e_a,eta,discord,concurrence,negativity,mutual_info")]
    quantities: Vec<Quantity>,
}

#[derive(Args)]
struct EfficiencyArgs {
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct CertifyArgs {
    /// Explicit coupling values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    kappa: Vec<f64>,
    #[arg(long, value_name = "MIN:MAX:STEPS", allow_hyphen_values = true)]
    kappa_range: Option<AxisRange>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    temps: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Overrides every per-check tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn params(kappa: f64, lambda: f64, temp: f64) -> Result<(ModelParams, Temperature), CliError> {
    let p = ModelParams::new(kappa, lambda).map_err(|e| CliError::Usage(e.to_string()))?;
    let t = Temperature::new(temp).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((p, t))
}

#[derive(Serialize)]
struct SpectrumReport {
    closed_form: ClosedFormSpectrum,
    numeric: Vec<f64>,
    max_abs_diff: f64,
}

#[derive(Serialize)]
struct PointResiduals {
    spectrum: f64,
    functional_identities: FunctionalResiduals,
    functional_max_abs: f64,
    /// Numeric optimum minus analytic optimum.
    optimum_excess: f64,
}

#[derive(Serialize)]
struct PointReport {
    kappa: f64,
    lambda: f64,
    temperature: f64,
    spectrum: SpectrumReport,
    functionals: ThermalFunctionals,
    analytic: QetResult,
    numeric: QetResult,
    correlations: CorrelationReport,
    residuals: PointResiduals,
    consistent: bool,
}

fn cmd_point(args: &PointArgs) -> Result<(), CliError> {
    let (p, t) = params(args.kappa, args.lambda, args.temp)?;
    let closed = closed_form_spectrum(p);
    let numeric = hermitian_eig(&build_hamiltonian(p)).expect("Hermitian").eigenvalues;
    let spectrum_diff = numeric.iter().zip(closed.sorted()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let tf = thermal_functionals(p, t);
    let identities = verify_functional_identities(&tf);
    let analytic = optimal_from_functionals(&tf);
    let optimized = numeric_optimize(p, t);
    let reduced = reduced_state_13(p, t).map_err(|e| CliError::Numerical(e.to_string()))?;
    let correlations = CorrelationReport::from_x_state(&reduced.x).map_err(|e| CliError::Numerical(e.to_string()))?;

    let residuals = PointResiduals {
        spectrum: spectrum_diff,
        functional_max_abs: identities.max_abs(),
        functional_identities: identities,
        optimum_excess: optimized.e_b - analytic.e_b,
    };
    let consistent =
        residuals.spectrum <= POINT_TOL && residuals.functional_max_abs <= POINT_TOL && residuals.optimum_excess <= OPTIMUM_TOL;
    let report = PointReport {
        kappa: p.kappa,
        lambda: p.lambda,
        temperature: t.value(),
        spectrum: SpectrumReport { closed_form: closed, numeric, max_abs_diff: spectrum_diff },
        functionals: tf,
        analytic,
        numeric: optimized,
        correlations,
        residuals,
        consistent,
    };
    write_json(args.out.as_ref(), &report)?;
    if !consistent {
        return Err(CliError::Numerical("point residuals exceed tolerance".into()));
    }
    Ok(())
}

fn grid_spec(grid: &GridArgs, quantities: Vec<Quantity>) -> Result<SweepSpec, CliError> {
    let spec = SweepSpec {
        kappa_range: grid.kappa_range,
        lambda_range: grid.lambda_range,
        temperatures: grid.temps.clone(),
        quantities,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    quantities: &'a [Quantity],
    records: &'a [SweepRecord],
}

fn emit_grid(grid: &GridArgs, spec: &SweepSpec, records: &[SweepRecord]) -> Result<(), CliError> {
    match grid.format {
        Format::Csv => {
            let out = open_output(grid.out.as_ref())?;
            sweep::write_csv(out, &spec.quantities, records)?;
            Ok(())
        }
        Format::Json => write_json(grid.out.as_ref(), &JsonSweep { quantities: &spec.quantities, records }),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let spec = grid_spec(&args.grid, args.quantities.clone())?;
    let records = sweep::run_sweep(&spec)?;
    emit_grid(&args.grid, &spec, &records)
}

#[derive(Serialize)]
struct EfficiencyMaximum {
    temperature: f64,
    eta_max: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
}

fn cmd_efficiency(args: &EfficiencyArgs) -> Result<(), CliError> {
    let spec = grid_spec(&args.grid, vec![Quantity::EBMax, Quantity::EA, Quantity::Eta])?;
    let records = sweep::run_sweep(&spec)?;
    emit_grid(&args.grid, &spec, &records)?;
    let mut stderr = io::stderr().lock();
    for &t in &spec.temperatures {
        let at_t: Vec<SweepRecord> = records.iter().filter(|r| r.temperature == t).cloned().collect();
        let best = sweep::max_of(&spec.quantities, &at_t, Quantity::Eta);
        let summary = EfficiencyMaximum {
            temperature: t,
            eta_max: best.map(|b| b.0),
            kappa: best.map(|b| b.1.kappa),
            lambda: best.map(|b| b.1.lambda),
        };
        writeln!(stderr, "{}", serde_json::to_string(&summary)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CertifyReport {
    trials: usize,
    seed: u64,
    points: Vec<CertificateReport>,
    all_certified: bool,
}

fn cmd_certify(args: &CertifyArgs) -> Result<(), CliError> {
    let mut kappas = args.kappa.clone();
    if let Some(range) = args.kappa_range {
        kappas.extend(range.values());
    }
    if kappas.is_empty() || args.temps.is_empty() {
        return Err(CliError::Usage("certify needs at least one kappa and one temperature".into()));
    }
    let mut grid = Vec::with_capacity(kappas.len() * args.temps.len());
    for &t in &args.temps {
        let (_, temp) = params(0.0, 0.0, t)?;
        for &k in &kappas {
            params(k, 0.0, t)?;
            grid.push((k, temp));
        }
    }
    let points = grid
        .into_par_iter()
        .map(|(k, temp)| no_qet_certificate_with(k, temp, args.trials, args.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let all_certified = points.iter().all(|p| p.certified && p.adversarial_ok);
    write_json(args.out.as_ref(), &CertifyReport { trials: args.trials, seed: args.seed, points, all_certified })?;
    if !all_certified {
        return Err(CliError::Numerical("at least one point failed certification".into()));
    }
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<(), CliError> {
    let cfg = AuditConfig { seed: args.seed, trials: args.trials, tolerance: args.tolerance };
    let report = run_audit(&cfg).map_err(|e| match e {
        qetchain::audit::AuditError::NoTrials | qetchain::audit::AuditError::BadTolerance(_) => CliError::Usage(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    })?;
    write_json(args.out.as_ref(), &report)?;
    if !report.passed {
        return Err(CliError::Numerical(format!("{} audit check(s) failed:\n  {}", report.failures.len(), report.failures.join("\n  "))));
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("QETCHAIN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("QETCHAIN_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Point(a) => cmd_point(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Efficiency(a) => cmd_efficiency(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Audit(a) => cmd_audit(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
