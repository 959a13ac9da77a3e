//! Batch command-line interface for the c3chain toolkit.
//!
//! Machine-readable data goes to standard output only; diagnostics go to the
//! error stream. Exit codes: 0 success, 1 validation error, 2 numeric or
//! resonance error, 3 I/O error.

use c3chain::catalog::{default_catalog, Catalog, CatalogError};
use c3chain::datagen::{generate_dataset, render_svg, write_dataset, DatasetError};
use c3chain::design::{search, DesignError, DesignQuery};
use c3chain::lattice::{assemble, ChainCircuit, CircuitError};
use c3chain::signals::{encode_bloch, phase_deg, signature, BlochState, TransferSignature};
use c3chain::solver::{
    frequency_sweep, solve_direct, sweep_csv, GridKind, SolveError, SweepGrid, SweepOutcome,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "c3chain",
    about = "Simulate, verify and inverse-design chains of C3 triangle circuit cells",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve all node voltages of a circuit at one frequency (JSON on stdout)
    Simulate(SimulateArgs),
    /// Sweep a frequency range and print last-cell voltages (CSV or JSON)
    Sweep(SweepArgs),
    /// Print the transfer signature of a circuit (JSON [[re,im] x 3])
    Signature(SignatureArgs),
    /// Exhaustive inverse design from a query file (JSON results)
    Design(DesignArgs),
    /// Generate a seeded dataset directory (manifest.json + svg/)
    Dataset(DatasetArgs),
    /// Emit the stock coupling catalog or validate a catalog file
    Catalog(CatalogArgs),
    /// Render a circuit schematic to an SVG file
    Render(RenderArgs),
}

#[derive(Args)]
struct DriveArgs {
    /// Drive as "i0,is,eta,kappa" (amperes and radians), mapped onto cell-1
    /// nodes via the Bloch encoding; phases in the output are degrees
    #[arg(long, value_name = "I0,IS,ETA,KAPPA", conflicts_with = "currents")]
    bloch: Option<String>,
    /// JSON file with explicit cell-1 node currents [[re,im],[re,im],[re,im]]
    #[arg(long, value_name = "FILE")]
    currents: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Circuit file (JSON)
    #[arg(long, value_name = "FILE")]
    circuit: PathBuf,
    /// Operating frequency in kHz
    #[arg(long, value_name = "KHZ")]
    freq_khz: f64,
    #[command(flatten)]
    drive: DriveArgs,
    /// Catalog file (stock catalog when omitted)
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum GridArg {
    Linear,
    Log,
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    circuit: PathBuf,
    /// Sweep start in kHz
    #[arg(long, value_name = "KHZ")]
    f_lo_khz: f64,
    /// Sweep end in kHz
    #[arg(long, value_name = "KHZ")]
    f_hi_khz: f64,
    /// Number of grid points (>= 2)
    #[arg(long)]
    points: usize,
    /// Grid spacing
    #[arg(long, value_enum, default_value = "linear")]
    grid: GridArg,
    #[command(flatten)]
    drive: DriveArgs,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct SignatureArgs {
    #[arg(long, value_name = "FILE")]
    circuit: PathBuf,
    #[arg(long, value_name = "KHZ")]
    freq_khz: f64,
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    /// Query file (JSON)
    #[arg(long, value_name = "FILE")]
    query: PathBuf,
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Cap the number of returned results (overrides the query file)
    #[arg(long)]
    max_results: Option<usize>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Number of records
    #[arg(long)]
    n: usize,
    /// Generator seed
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Evaluation frequency in kHz
    #[arg(long, value_name = "KHZ", default_value_t = 15.0)]
    freq_khz: f64,
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CatalogArgs {
    /// Print the stock 48-entry catalog as JSON
    #[arg(long)]
    emit_default: bool,
    /// Validate a catalog file and print a summary
    #[arg(long, value_name = "FILE")]
    validate: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, value_name = "FILE")]
    circuit: PathBuf,
    /// Output SVG path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
}

/// Failure with the documented exit-code class.
enum CliError {
    Validation(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(err: CatalogError) -> Self {
        match err {
            CatalogError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(err: CircuitError) -> Self {
        match err {
            CircuitError::Io(e) => CliError::Io(e.to_string()),
            CircuitError::Catalog(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(err: SolveError) -> Self {
        match err {
            SolveError::Circuit(e) => e.into(),
            SolveError::BadGrid(m) => CliError::Validation(m.to_string()),
            SolveError::SizeMismatch { .. } => CliError::Validation(err.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(err: DesignError) -> Self {
        match err {
            DesignError::Io(e) => CliError::Io(e.to_string()),
            DesignError::Circuit(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(err: DatasetError) -> Self {
        match err {
            DatasetError::Io(e) => CliError::Io(e.to_string()),
            DatasetError::Design(e) => e.into(),
            DatasetError::Circuit(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("C3CHAIN_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            // Worker count tunes throughput only; results are deterministic.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not failures.
            use clap::error::ErrorKind;
            let kind = err.kind();
            let _ = err.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Signature(args) => cmd_signature(args),
        Command::Design(args) => cmd_design(args),
        Command::Dataset(args) => cmd_dataset(args),
        Command::Catalog(args) => cmd_catalog(args),
        Command::Render(args) => cmd_render(args),
    }
}

fn load_catalog(path: &Option<PathBuf>) -> Result<Catalog, CliError> {
    match path {
        Some(path) => Ok(Catalog::load(path)?),
        None => Ok(default_catalog()),
    }
}

fn load_circuit(path: &PathBuf) -> Result<ChainCircuit, CliError> {
    Ok(ChainCircuit::load(path)?)
}

/// Cell-1 node currents from either drive flag.
fn cell1_currents(drive: &DriveArgs) -> Result<[Complex64; 3], CliError> {
    match (&drive.bloch, &drive.currents) {
        (Some(spec), None) => {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("bad --bloch value: {e}")))?;
            let [i0, i_s, eta, kappa] = parts.as_slice() else {
                return Err(CliError::Validation(
                    "--bloch needs exactly four comma-separated values".into(),
                ));
            };
            let state = BlochState::new(*i0, *i_s, *eta, *kappa)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Ok(encode_bloch(&state))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(e.to_string()))?;
            let raw: [[f64; 2]; 3] = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("bad currents file: {e}")))?;
            Ok(raw.map(|[re, im]| Complex64::new(re, im)))
        }
        _ => Err(CliError::Validation(
            "exactly one of --bloch or --currents is required".into(),
        )),
    }
}

fn full_drive(circuit: &ChainCircuit, cell1: [Complex64; 3]) -> Vec<Complex64> {
    let mut i_in = vec![Complex64::new(0.0, 0.0); 3 * circuit.cells];
    i_in[..3].copy_from_slice(&cell1);
    i_in
}

#[derive(Serialize)]
struct NodeOut {
    cell: usize,
    node: usize,
    v: [f64; 2],
    mag: f64,
    phase_deg: f64,
    last_cell: bool,
}

#[derive(Serialize)]
struct SimulateOut {
    frequency_hz: f64,
    input_currents: [[f64; 2]; 3],
    input_polar: [[f64; 2]; 3],
    nodes: Vec<NodeOut>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let circuit = load_circuit(&args.circuit)?;
    let cell1 = cell1_currents(&args.drive)?;
    let f_hz = args.freq_khz * 1e3;
    let s = c3chain::s_at_hz(f_hz);
    let y = assemble(&circuit, &catalog, s)?;
    let v = solve_direct(&y, &full_drive(&circuit, cell1))?;

    let nodes = v
        .iter()
        .enumerate()
        .map(|(idx, value)| NodeOut {
            cell: idx / 3 + 1,
            node: idx % 3 + 1,
            v: [value.re, value.im],
            mag: value.norm(),
            phase_deg: phase_deg(*value),
            last_cell: idx / 3 + 1 == circuit.cells,
        })
        .collect();
    let out = SimulateOut {
        frequency_hz: f_hz,
        input_currents: cell1.map(|c| [c.re, c.im]),
        input_polar: cell1.map(|c| [c.norm(), phase_deg(c)]),
        nodes,
    };
    print_json(&out)
}

#[derive(Serialize)]
#[serde(untagged)]
enum SweepRowOut {
    Voltages {
        f_hz: f64,
        voltages: [[f64; 2]; 3],
    },
    Resonant {
        f_hz: f64,
        resonant: bool,
        condition: f64,
    },
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let circuit = load_circuit(&args.circuit)?;
    let cell1 = cell1_currents(&args.drive)?;
    let grid = SweepGrid {
        f_lo_hz: args.f_lo_khz * 1e3,
        f_hi_hz: args.f_hi_khz * 1e3,
        points: args.points,
        kind: match args.grid {
            GridArg::Linear => GridKind::Linear,
            GridArg::Log => GridKind::Log,
        },
    };
    let rows = frequency_sweep(&circuit, &catalog, &grid, &full_drive(&circuit, cell1))?;
    for row in &rows {
        if let SweepOutcome::Resonant { condition } = row.outcome {
            eprintln!(
                "note: {} Hz is resonant (condition {condition:.3e}); row has no data",
                row.f_hz
            );
        }
    }
    match args.format {
        FormatArg::Csv => {
            print!("{}", sweep_csv(&rows));
        }
        FormatArg::Json => {
            let out: Vec<SweepRowOut> = rows
                .iter()
                .map(|row| match &row.outcome {
                    SweepOutcome::Voltages(v) => SweepRowOut::Voltages {
                        f_hz: row.f_hz,
                        voltages: [[v[0].re, v[0].im], [v[1].re, v[1].im], [v[2].re, v[2].im]],
                    },
                    SweepOutcome::Resonant { condition } => SweepRowOut::Resonant {
                        f_hz: row.f_hz,
                        resonant: true,
                        condition: *condition,
                    },
                })
                .collect();
            print_json(&out)?;
        }
    }
    Ok(())
}

fn cmd_signature(args: SignatureArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let circuit = load_circuit(&args.circuit)?;
    let sig = signature(&circuit, &catalog, c3chain::s_at_hz(args.freq_khz * 1e3))?;
    print_json(&sig)
}

#[derive(Serialize)]
struct DesignOut {
    rank: usize,
    distance: f64,
    signature: TransferSignature,
    circuit: ChainCircuit,
}

fn cmd_design(args: DesignArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let mut query = DesignQuery::load(&args.query)?;
    if let Some(max) = args.max_results {
        if max == 0 {
            return Err(CliError::Validation("--max-results must be >= 1".into()));
        }
        query.max_results = max;
    }
    let results = search(&query, &catalog)?;
    eprintln!(
        "searched {} candidates at {} Hz: {} within tolerance",
        c3chain::design::triple_count(&catalog),
        query.frequency_hz,
        results.len()
    );
    let out: Vec<DesignOut> = results
        .into_iter()
        .map(|r| DesignOut {
            rank: r.rank,
            distance: r.distance,
            signature: r.achieved,
            circuit: r.circuit,
        })
        .collect();
    print_json(&out)
}

fn cmd_dataset(args: DatasetArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let records = generate_dataset(args.n, args.seed, &catalog, args.freq_khz * 1e3)?;
    write_dataset(&records, &args.out, &catalog)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct CatalogSummary {
    valid: bool,
    entries: usize,
}

fn cmd_catalog(args: CatalogArgs) -> Result<(), CliError> {
    if args.emit_default {
        print!("{}", default_catalog().to_json_string());
        return Ok(());
    }
    let path = args.validate.expect("clap enforces the argument group");
    let catalog = Catalog::load(&path)?;
    print_json(&CatalogSummary {
        valid: true,
        entries: catalog.len(),
    })
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let circuit = load_circuit(&args.circuit)?;
    let svg = render_svg(&circuit, &catalog)?;
    std::fs::write(&args.out, svg).map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}
