use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use uflab::adversarial::{cantor_pattern, fault_count_bound, uf_corrects, verify_greedy_failure};
use uflab::circuit::build_syndrome_circuit;
use uflab::clustering::{analytical_threshold, ScaleSchedule};
use uflab::decoders::{DecoderKind, TieRule};
use uflab::detector_graph::{build_detector_graph, lambda_circuit, ErrorType, DELTA_CIRCUIT};
use uflab::experiments::{run_memory, runtime_csv, sweep_csv, ExecMode, ExperimentConfig, MemorySetup, ShotPath};
use uflab::lattice::build_surface_code;
use uflab::stopping::run_stopping_experiment;
use uflab::verify::run_invariant_suite;
use uflab::LabError;

/// Surface-code decoder laboratory.
#[derive(Parser)]
#[command(name = "uflab", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rotated surface code layout as JSON.
    BuildCode {
        #[arg(long)]
        d: usize,
    },
    /// Detector graph as JSON.
    BuildGraph {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, value_enum, default_value_t = Detecting::Z)]
        error_type: Detecting,
        /// Physical rate used for the per-edge probabilities.
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        /// Attach a locality certificate up to this ball radius.
        #[arg(long)]
        certify: Option<usize>,
    },
    /// Memory experiment at a single (d, p).
    Memory {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Memory experiments over a grid of distances and rates, as CSV.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Analytical threshold of a clustering schedule.
    Threshold {
        #[arg(long, value_enum, default_value_t = FamilyArg::Uf)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1.2)]
        beta: f64,
        #[arg(long, default_value_t = 2.8)]
        gamma: f64,
        #[arg(long, default_value_t = 107.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        xi: f64,
        /// Ball-growth prefactor; the circuit value when absent.
        #[arg(long)]
        big_lambda: Option<f64>,
        #[arg(long, default_value_t = DELTA_CIRCUIT)]
        delta: f64,
        /// Also report the level cutoff for this distance.
        #[arg(long)]
        d: Option<usize>,
    },
    /// Clustered decomposition and stopping-guarantee checks over sampled shots.
    ClusterAnalyze {
        #[arg(long, default_value_t = 7)]
        d: usize,
        #[arg(long, default_value_t = 1e-3)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, default_value_t = 1.2)]
        beta: f64,
        #[arg(long, default_value_t = 2.8)]
        gamma: f64,
        #[arg(long, default_value_t = 107.0)]
        lambda: f64,
        /// Exit with status 2 on any violation.
        #[arg(long)]
        strict: bool,
    },
    /// Cantor error pattern against the greedy decoder.
    Cantor {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Simulated parallel runtime of union-find decoding, as CSV.
    ParallelRuntime {
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.001")]
        p: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Run the invariant suite.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_enum, default_value_t = DecoderArg::Uf)]
    decoder: DecoderArg,
    #[arg(long, value_enum, default_value_t = PathArg::Simulate)]
    path: PathArg,
    /// Fill the mean_rounds column with the mean simulated parallel time.
    #[arg(long)]
    runtime: bool,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 1e-3)]
    trace_rate: f64,
    /// Write sampled union-find traces here as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Detecting {
    X,
    Z,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uf,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Uf,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Simulate,
    Graph,
}

enum Failure {
    Usage(String),
    Invariant(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidDistance(_) | LabError::Parameter(_) | LabError::Parse { .. } | LabError::Lookup { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn experiment(ds: Vec<usize>, ps: Vec<f64>, run: &RunArgs, seed: u64) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig {
        distances: ds,
        probabilities: ps,
        rounds: run.rounds,
        shots: run.shots,
        seed,
        decoder: match run.decoder {
            DecoderArg::Uf => DecoderKind::UnionFind,
            DecoderArg::Greedy => DecoderKind::Greedy,
        },
        trace_rate: if run.trace_out.is_some() { run.trace_rate } else { 0.0 },
        runtime: run.runtime,
        timing: run.timing,
        mode: ExecMode::from_env()?,
        path: match run.path {
            PathArg::Simulate => ShotPath::Simulate,
            PathArg::Graph => ShotPath::Graph,
        },
    })
}

fn memory(cfg: ExperimentConfig, run: &RunArgs, out: &Option<PathBuf>) -> CliResult {
    let cells = run_memory(&cfg)?;
    if let Some(path) = &run.trace_out {
        let mut text = String::new();
        for t in cells.iter().flat_map(|c| &c.traces) {
            text.push_str(&serde_json::to_string(t).expect("trace serializes"));
            text.push('\n');
        }
        emit(&Some(path.clone()), &text)?;
    }
    let rows: Vec<_> = cells.into_iter().map(|c| c.row).collect();
    emit(out, &sweep_csv(&rows))
}

fn run(cli: Cli) -> CliResult {
    let Cli { seed, out, command } = cli;
    match command {
        Command::BuildCode { d } => emit(&out, &pretty(&build_surface_code(d)?.to_json())),
        Command::BuildGraph { d, rounds, error_type, p, certify } => {
            let code = build_surface_code(d)?;
            let circuit = build_syndrome_circuit(&code, rounds.unwrap_or(d))?;
            let kind = match error_type {
                Detecting::X => ErrorType::XDetecting,
                Detecting::Z => ErrorType::ZDetecting,
            };
            let g = build_detector_graph(&circuit, kind)?;
            let mut v = g.to_json(p);
            if let Some(r) = certify {
                v["locality"] = serde_json::to_value(g.verify_locality(r)).expect("certificate serializes");
            }
            emit(&out, &pretty(&v))
        }
        Command::Memory { d, p, run } => {
            let cfg = experiment(vec![d], vec![p], &run, seed)?;
            memory(cfg, &run, &out)
        }
        Command::Sweep { d, p, run } => {
            let cfg = experiment(d, p, &run, seed)?;
            memory(cfg, &run, &out)
        }
        Command::Threshold { family, beta, gamma, lambda, xi, big_lambda, delta, d } => {
            let s = match family {
                FamilyArg::Uf => ScaleSchedule::uf(beta, gamma, lambda)?,
                FamilyArg::Greedy => ScaleSchedule::greedy(beta, gamma, lambda)?,
            };
            let report = analytical_threshold(xi, big_lambda.unwrap_or_else(lambda_circuit), delta, &s)?;
            let mut v = serde_json::to_value(&report).expect("report serializes");
            if let Some(d) = d {
                v["k0"] = json!(report.k0(d));
            }
            match report.p_th {
                Some(p) => eprintln!("p_th = {p:e}"),
                None => eprintln!("p_th undefined: schedule constraints fail"),
            }
            emit(&out, &pretty(&v))
        }
        Command::ClusterAnalyze { d, p, shots, rounds, beta, gamma, lambda, strict } => {
            let setup = MemorySetup::new(d, rounds.unwrap_or(d))?;
            let s = ScaleSchedule::uf(beta, gamma, lambda)?;
            let summary = run_stopping_experiment(&setup, p, shots, seed, &s)?;
            emit(&out, &pretty(&serde_json::to_value(&summary).expect("summary serializes")))?;
            if strict && !summary.report.ok() {
                return Err(Failure::Invariant(format!("{} stopping-guarantee violations", summary.report.violations())));
            }
            Ok(())
        }
        Command::Cantor { d, rounds } => {
            let code = build_surface_code(d)?;
            let circuit = build_syndrome_circuit(&code, rounds.unwrap_or(d))?;
            let g = build_detector_graph(&circuit, ErrorType::ZDetecting)?;
            let pattern = cantor_pattern(&g, &circuit)?;
            let lowest = verify_greedy_failure(&g, &circuit, &pattern, TieRule::LowestIndex)?;
            let highest = verify_greedy_failure(&g, &circuit, &pattern, TieRule::HighestIndex)?;
            let v = json!({
                "d": d,
                "n": pattern.n,
                "n_bound": fault_count_bound(d),
                "failure": lowest.logical_failure,
                "greedy": [lowest, highest],
                "uf_corrects": uf_corrects(&g, &circuit, &pattern)?,
                "uf_guaranteed": pattern.n <= (d - 1) / 2,
                "pattern": pattern.to_json(),
            });
            emit(&out, &pretty(&v))
        }
        Command::ParallelRuntime { d, p, shots, rounds } => {
            let cfg = ExperimentConfig {
                distances: d,
                probabilities: p,
                rounds,
                shots,
                seed,
                trace_rate: 0.0,
                runtime: true,
                mode: ExecMode::from_env()?,
                path: ShotPath::Graph,
                ..Default::default()
            };
            emit(&out, &runtime_csv(&run_memory(&cfg)?))
        }
        Command::Verify => {
            let checks = run_invariant_suite(seed)?;
            let mut text = String::new();
            for c in &checks {
                let status = if c.ok { "PASS" } else { "FAIL" };
                let detail = if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) };
                text.push_str(&format!("{status} {}: {}{detail}\n", c.module, c.name));
            }
            emit(&out, &text)?;
            let failed = checks.iter().filter(|c| !c.ok).count();
            if failed > 0 {
                return Err(Failure::Invariant(format!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
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
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            ExitCode::from(2)
        }
    }
}
