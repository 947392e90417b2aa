//! Monte Carlo memory experiments, threshold sweeps and the simulated
//! parallel runtime of union-find decoding.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::circuit::{build_syndrome_circuit, Circuit, RandomStream};
use crate::decoders::{uf_correct_with_costs, uf_decode, ClusterCost, DecodeTrace, DecoderKind, Syndrome};
use crate::detector_graph::{build_detector_graph, DetectorGraph, ErrorType};
use crate::error::{param, Result};
use crate::lattice::{build_surface_code, SurfaceCode};

/// Environment variable holding the worker count for shot-parallel runs.
pub const WORKERS_ENV: &str = "UFLAB_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ExecMode {
    Sequential,
    /// Shots spread over the rayon pool; identical to `Sequential` when the
    /// `parallel` feature is off.
    #[default]
    Parallel,
}

impl ExecMode {
    /// `Sequential` when the worker variable is `1`, `Parallel` otherwise.
    /// A larger value sizes the global pool (first call wins).
    pub fn from_env() -> Result<Self> {
        let Ok(raw) = std::env::var(WORKERS_ENV) else {
            return Ok(ExecMode::Parallel);
        };
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| param(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
        if n == 0 {
            return Err(param(format!("{WORKERS_ENV} must be positive")));
        }
        if n == 1 {
            return Ok(ExecMode::Sequential);
        }
        #[cfg(feature = "parallel")]
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(ExecMode::Parallel)
    }
}

/// How a shot's outcome is obtained from its sampled faults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ShotPath {
    /// Propagate the faults through the circuit.
    #[default]
    Simulate,
    /// Look up each fault's detector-graph edge and observable flag.
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub distances: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// Syndrome rounds; `None` means `d`.
    pub rounds: Option<usize>,
    pub shots: u64,
    pub seed: u64,
    pub decoder: DecoderKind,
    /// Fraction of shots whose full union-find trace is kept.
    pub trace_rate: f64,
    /// Also compute the mean simulated parallel time (union-find only).
    pub runtime: bool,
    /// Record wall-clock time per cell. Off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
    pub mode: ExecMode,
    pub path: ShotPath,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            distances: vec![3],
            probabilities: vec![1e-3],
            rounds: None,
            shots: 1000,
            seed: 0,
            decoder: DecoderKind::UnionFind,
            trace_rate: 1e-3,
            runtime: false,
            timing: false,
            mode: ExecMode::Parallel,
            path: ShotPath::Simulate,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(param("shots must be at least 1"));
        }
        if self.distances.is_empty() || self.probabilities.is_empty() {
            return Err(param("need at least one distance and one probability"));
        }
        if let Some(&p) = self.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(param(format!("probability {p} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.trace_rate) {
            return Err(param("trace rate outside [0, 1]"));
        }
        if self.rounds == Some(0) {
            return Err(param("rounds must be at least 1"));
        }
        if self.runtime && self.decoder != DecoderKind::UnionFind {
            return Err(param("parallel runtime is defined for union-find only"));
        }
        Ok(())
    }
}

/// Code, circuit and Z-detecting graph for one distance.
pub struct MemorySetup {
    pub code: SurfaceCode,
    pub circuit: Circuit,
    pub graph: DetectorGraph,
}

impl MemorySetup {
    pub fn new(d: usize, rounds: usize) -> Result<Self> {
        let code = build_surface_code(d)?;
        let circuit = build_syndrome_circuit(&code, rounds)?;
        let graph = build_detector_graph(&circuit, ErrorType::ZDetecting)?;
        Ok(MemorySetup { code, circuit, graph })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub d: usize,
    pub p: f64,
    pub shots: u64,
    pub failures: u64,
    pub p_l: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_rounds: Option<f64>,
    pub wall_ms: Option<f64>,
}

pub const CSV_HEADER: &str = "d,p,shots,failures,p_l,ci_lo,ci_hi,mean_rounds,wall_ms";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.d,
            self.p,
            self.shots,
            self.failures,
            self.p_l,
            self.ci_lo,
            self.ci_hi,
            opt(self.mean_rounds),
            opt(self.wall_ms)
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Two-sided 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    const Z: f64 = 1.959963984540054;
    let n_f = n as f64;
    let ph = k as f64 / n_f;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n_f;
    let center = (ph + z2 / (2.0 * n_f)) / denom;
    let half = Z * (ph * (1.0 - ph) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = (center - half).max(0.0).min(ph);
    let hi = (center + half).min(1.0).max(ph);
    (lo, hi)
}

/// Per-cell seed so that cells draw independent streams.
pub fn cell_seed(seed: u64, d: usize, p: f64) -> u64 {
    let mut x = seed ^ (d as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ p.to_bits().rotate_left(17);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Simulated parallel time of one union-find decode: a processor per active
/// detector, clusters working concurrently.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParallelRuntime {
    pub clusters: Vec<ClusterCost>,
    pub growth_rounds: usize,
    pub peel_work: usize,
    /// Max over clusters of growth rounds plus peeling forest edges.
    pub parallel_time: usize,
}

impl ParallelRuntime {
    fn from_costs(clusters: Vec<ClusterCost>) -> Self {
        let growth_rounds = clusters.iter().map(|c| c.rounds).max().unwrap_or(0);
        let peel_work = clusters.iter().map(|c| c.peel).max().unwrap_or(0);
        let parallel_time = clusters.iter().map(|c| c.rounds + c.peel).max().unwrap_or(0);
        ParallelRuntime { clusters, growth_rounds, peel_work, parallel_time }
    }
}

pub fn parallel_uf_time(g: &DetectorGraph, s: &Syndrome) -> Result<ParallelRuntime> {
    let (_, costs) = uf_correct_with_costs(g, s)?;
    Ok(ParallelRuntime::from_costs(costs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParallelRuntimeRecord {
    pub d: usize,
    pub p: f64,
    pub shot: u64,
    pub runtime: ParallelRuntime,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotTrace {
    pub d: usize,
    pub p: f64,
    pub shot: u64,
    pub faults: String,
    pub trace: DecodeTrace,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    failures: u64,
    time_sum: u64,
    growth_sum: u64,
    peel_sum: u64,
    time_max: u64,
    traces: Vec<ShotTrace>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.failures += other.failures;
        self.time_sum += other.time_sum;
        self.growth_sum += other.growth_sum;
        self.peel_sum += other.peel_sum;
        self.time_max = self.time_max.max(other.time_max);
        self.traces.extend(other.traces);
        self
    }
}

struct Cell<'a> {
    setup: &'a MemorySetup,
    d: usize,
    p: f64,
    seed: u64,
    cfg: &'a ExperimentConfig,
}

impl Cell<'_> {
    fn shot(&self, shot: u64) -> Result<Tally> {
        let MemorySetup { code, circuit, graph: g } = self.setup;
        let mut stream = RandomStream::for_shot(self.seed, shot);
        let faults = circuit.sample_faults(self.p, &mut stream)?;
        let traced = self.cfg.trace_rate > 0.0 && stream.rng().gen::<f64>() < self.cfg.trace_rate;

        let (s, raw_flip) = match self.cfg.path {
            ShotPath::Simulate => {
                let out = circuit.simulate_shot(&faults)?;
                (Syndrome::from_outcome(g, &out), out.logical_z_flipped(code))
            }
            ShotPath::Graph => {
                let (edges, obs) = g.fault_set_edges(&faults);
                (Syndrome::from_edges(g, &edges), obs)
            }
        };
        let mut tally = Tally::default();
        let corr = if self.cfg.runtime {
            let (corr, costs) = uf_correct_with_costs(g, &s)?;
            let rt = ParallelRuntime::from_costs(costs);
            tally.time_sum = rt.parallel_time as u64;
            tally.growth_sum = rt.growth_rounds as u64;
            tally.peel_sum = rt.peel_work as u64;
            tally.time_max = rt.parallel_time as u64;
            corr
        } else {
            self.cfg.decoder.decode(g, &s)?
        };
        crate::decoders::check_annihilates(g, &s, &corr)?;
        if raw_flip ^ g.edges_flip_observable(&corr.edges) {
            tally.failures = 1;
        }
        if traced && self.cfg.decoder == DecoderKind::UnionFind {
            let (_, trace) = uf_decode(g, &s)?;
            tally.traces.push(ShotTrace { d: self.d, p: self.p, shot, faults: faults.to_text(), trace });
        }
        Ok(tally)
    }

    fn run(&self, shots: u64) -> Result<Tally> {
        let one = |shot| self.shot(shot);
        let fold = |a: Result<Tally>, b: Result<Tally>| Ok(a?.merge(b?));
        let total = match self.cfg.mode {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => {
                use rayon::prelude::*;
                (0..shots).into_par_iter().map(one).reduce(|| Ok(Tally::default()), fold)
            }
            _ => (0..shots).map(one).fold(Ok(Tally::default()), fold),
        };
        let mut total = total?;
        total.traces.sort_by_key(|t| t.shot);
        Ok(total)
    }
}

/// Statistics of one (d, p) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub row: SweepRow,
    pub mean_growth: Option<f64>,
    pub mean_peel: Option<f64>,
    pub max_parallel_time: Option<u64>,
    #[serde(skip)]
    pub traces: Vec<ShotTrace>,
}

pub fn run_cell(setup: &MemorySetup, p: f64, cfg: &ExperimentConfig) -> Result<CellResult> {
    let d = setup.code.d;
    let start = Instant::now();
    let cell = Cell { setup, d, p, seed: cell_seed(cfg.seed, d, p), cfg };
    let t = cell.run(cfg.shots)?;
    let n = cfg.shots;
    let (ci_lo, ci_hi) = wilson_interval(t.failures, n);
    let mean = |x: u64| cfg.runtime.then(|| x as f64 / n as f64);
    let row = SweepRow {
        d,
        p,
        shots: n,
        failures: t.failures,
        p_l: t.failures as f64 / n as f64,
        ci_lo,
        ci_hi,
        mean_rounds: mean(t.time_sum),
        wall_ms: cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    Ok(CellResult {
        row,
        mean_growth: mean(t.growth_sum),
        mean_peel: mean(t.peel_sum),
        max_parallel_time: cfg.runtime.then_some(t.time_max),
        traces: t.traces,
    })
}

/// Every (d, p) cell of the configuration, distances outermost.
pub fn run_memory(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.distances.len() * cfg.probabilities.len());
    for &d in &cfg.distances {
        let setup = MemorySetup::new(d, cfg.rounds.unwrap_or(d))?;
        for &p in &cfg.probabilities {
            out.push(run_cell(&setup, p, cfg)?);
        }
    }
    Ok(out)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<String> {
    let rows: Vec<SweepRow> = run_memory(cfg)?.into_iter().map(|c| c.row).collect();
    Ok(sweep_csv(&rows))
}

pub const RUNTIME_CSV_HEADER: &str = "d,p,shots,mean_growth,mean_peel,mean_parallel_time,max_parallel_time";

/// Runtime statistics per cell as CSV.
pub fn runtime_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(RUNTIME_CSV_HEADER);
    out.push('\n');
    for c in cells {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.row.d,
            c.row.p,
            c.row.shots,
            f(c.mean_growth),
            f(c.mean_peel),
            f(c.row.mean_rounds),
            c.max_parallel_time.map(|x| x.to_string()).unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_zero_and_full() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(100, 100);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.963005).abs() < 1e-5);
    }

    #[test]
    fn csv_shape() {
        let row = SweepRow {
            d: 3,
            p: 0.001,
            shots: 10,
            failures: 0,
            p_l: 0.0,
            ci_lo: 0.0,
            ci_hi: 0.5,
            mean_rounds: None,
            wall_ms: None,
        };
        assert_eq!(row.csv_line(), "3,0.001,10,0,0,0,0.5,,");
    }
}
