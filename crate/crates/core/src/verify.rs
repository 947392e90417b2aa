//! Fast invariant suite over every module at small sizes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversarial::{cantor_decompose, cantor_tree, depth_bound, fault_count_bound};
use crate::circuit::{FaultSet, Pauli, RandomStream};
use crate::clustering::{
    check_constraints, clustered_within_isolated, decompose_clustered, decompose_isolated, ScaleSchedule,
};
use crate::decoders::{check_annihilates, greedy_decode, uf_correct, uf_decode, DecodeTrace, Syndrome};
use crate::detector_graph::{build_detector_graph, ErrorType};
use crate::error::Result;
use crate::experiments::{run_memory, sweep, ExecMode, ExperimentConfig, MemorySetup, ShotPath};
use crate::lattice::{build_surface_code, FaceKind, PauliOperator, SurfaceCode};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Default)]
struct Suite(Vec<Check>);

impl Suite {
    fn add(&mut self, module: &'static str, name: &str, ok: bool, detail: impl Into<String>) {
        self.0.push(Check { module, name: name.to_string(), ok, detail: detail.into() });
    }
}

/// Runs every check; an `Err` means a check could not be carried out.
pub fn run_invariant_suite(seed: u64) -> Result<Vec<Check>> {
    let mut suite = Suite::default();
    lattice_checks(&mut suite)?;
    let setups = [MemorySetup::new(3, 3)?, MemorySetup::new(5, 5)?];
    circuit_checks(&mut suite, &setups, seed)?;
    graph_checks(&mut suite, &setups, seed)?;
    decoder_checks(&mut suite, &setups, seed)?;
    clustering_checks(&mut suite, &setups[1], seed)?;
    adversarial_checks(&mut suite);
    experiment_checks(&mut suite, seed)?;
    Ok(suite.0)
}

fn min_logical_weight(code: &SurfaceCode, kind: FaceKind) -> usize {
    let n = code.n();
    let checks: Vec<PauliOperator> = code.faces_of(kind).map(|(_, f)| code.stabilizer_of(f)).collect();
    let logical = if kind == FaceKind::Z { code.logical_z() } else { code.logical_x() };
    (1u32..1 << n)
        .filter_map(|mask| {
            let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let op = match kind {
                FaceKind::Z => PauliOperator { x: bits, z: vec![false; n] },
                FaceKind::X => PauliOperator { x: vec![false; n], z: bits },
            };
            (checks.iter().all(|c| op.commutes_with(c)) && !op.commutes_with(&logical)).then(|| op.weight())
        })
        .min()
        .unwrap_or(usize::MAX)
}

fn lattice_checks(suite: &mut Suite) -> Result<()> {
    for d in [3, 5, 7] {
        let code = build_surface_code(d)?;
        let stabs: Vec<PauliOperator> = code.faces.iter().map(|f| code.stabilizer_of(f)).collect();
        let commute = stabs.iter().all(|a| stabs.iter().all(|b| a.commutes_with(b)));
        suite.add("lattice", &format!("stabilizers commute (d={d})"), commute, "");
        let (lz, lx) = (code.logical_z(), code.logical_x());
        let ok = stabs.iter().all(|s| s.commutes_with(&lz) && s.commutes_with(&lx)) && !lz.commutes_with(&lx);
        suite.add("lattice", &format!("logicals commute with stabilizers and anticommute (d={d})"), ok, "");
        let mut per_qubit = vec![[0usize; 2]; code.n()];
        for f in &code.faces {
            for q in &f.qubits {
                let i = code.data_index(*q).expect("face qubit on lattice");
                per_qubit[i][(f.kind == FaceKind::Z) as usize] += 1;
            }
        }
        let ok = per_qubit.iter().all(|c| c[0] <= 2 && c[1] <= 2);
        suite.add("lattice", &format!("each data qubit in <= 2 faces per type (d={d})"), ok, "");
    }
    let code = build_surface_code(3)?;
    let (wx, wz) = (min_logical_weight(&code, FaceKind::Z), min_logical_weight(&code, FaceKind::X));
    suite.add("lattice", "minimum logical weight is 3 at d=3", wx == 3 && wz == 3, format!("X {wx}, Z {wz}"));
    Ok(())
}

fn circuit_checks(suite: &mut Suite, setups: &[MemorySetup], seed: u64) -> Result<()> {
    for st in setups {
        let d = st.code.d;
        let quiet = st.circuit.simulate_shot(&FaultSet::default())?;
        let ok = quiet.detectors.iter().flatten().all(|b| !b) && !quiet.logical_z_flipped(&st.code);
        suite.add("circuit", &format!("noiseless circuit is silent (d={d})"), ok, "");
        let mut stream = RandomStream::for_shot(seed, 0);
        let faults = st.circuit.sample_faults(0.01, &mut stream)?;
        let again = st.circuit.sample_faults(0.01, &mut RandomStream::for_shot(seed, 0))?;
        let same = faults == again && st.circuit.simulate_shot(&faults)? == st.circuit.simulate_shot(&faults)?;
        suite.add("circuit", &format!("sampling and simulation are deterministic (d={d})"), same, "");
    }
    Ok(())
}

fn graph_checks(suite: &mut Suite, setups: &[MemorySetup], seed: u64) -> Result<()> {
    for st in setups {
        let d = st.code.d;
        // Construction itself rejects faults flipping more than two detectors.
        let gx = build_detector_graph(&st.circuit, ErrorType::XDetecting);
        suite.add("detector_graph", &format!("X-detecting graph builds (d={d})"), gx.is_ok(), "");
        let g = &st.graph;
        let mut bad = 0;
        for shot in 0..200 {
            let faults = st.circuit.sample_faults(0.005, &mut RandomStream::for_shot(seed, shot))?;
            let out = st.circuit.simulate_shot(&faults)?;
            let (edges, obs) = g.fault_set_edges(&faults);
            if Syndrome::from_outcome(g, &out).active != g.syndrome_of_edges(&edges) || obs != out.logical_z_flipped(&st.code) {
                bad += 1;
            }
        }
        suite.add("detector_graph", &format!("syndrome consistency over 200 shots (d={d})"), bad == 0, format!("{bad} mismatches"));

        let forward = (0..st.circuit.fault_locations.len()).all(|loc| {
            Pauli::ALL
                .iter()
                .all(|&p| g.edge_of_fault(loc, p).map_or(true, |e| g.edges[e].fault_sources.contains(&loc)))
        });
        let backward = g.edges.iter().all(|e| {
            e.fault_sources.iter().all(|&loc| Pauli::ALL.iter().any(|&p| g.edge_of_fault(loc, p) == Some(e.id)))
        });
        let complete = forward && backward;
        suite.add("detector_graph", &format!("every fault lands in at most one edge (d={d})"), complete, "");

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = g.edges.len();
        let mut ok = true;
        for _ in 0..200 {
            let (a, b, c) = (rng.gen_range(0..m), rng.gen_range(0..m), rng.gen_range(0..m));
            let (ab, ba, bc, ac) = (g.edge_distance(a, b)?, g.edge_distance(b, a)?, g.edge_distance(b, c)?, g.edge_distance(a, c)?);
            ok &= g.edge_distance(a, a)? == 0 && ab == ba && ac <= ab + bc && (a == b || ab > 0);
        }
        suite.add("detector_graph", &format!("metric axioms on random triples (d={d})"), ok, "");
        let cert = g.verify_locality(3);
        suite.add("detector_graph", &format!("detector degree <= 12 (d={d})"), cert.degree_ok, format!("{}", cert.max_degree));
    }
    Ok(())
}

fn trace_consistent(t: &DecodeTrace) -> bool {
    let mut prev = t.initial.clone();
    for r in &t.rounds {
        for &c in &r.grew {
            if prev.iter().any(|s| s.id == c && s.valid) {
                return false;
            }
        }
        for m in &r.merges {
            if m.parts.iter().fold(false, |a, p| a ^ p.1) != m.result_odd {
                return false;
            }
        }
        prev = r.clusters.clone();
    }
    true
}

fn decoder_checks(suite: &mut Suite, setups: &[MemorySetup], seed: u64) -> Result<()> {
    for st in setups {
        let (d, g) = (st.code.d, &st.graph);
        let (mut annihilate, mut traces, mut feasible) = (true, true, true);
        for shot in 0..200 {
            let faults = st.circuit.sample_faults(0.005, &mut RandomStream::for_shot(seed ^ 1, shot))?;
            let (edges, _) = g.fault_set_edges(&faults);
            let s = Syndrome::from_edges(g, &edges);
            let (corr, trace) = uf_decode(g, &s)?;
            annihilate &= check_annihilates(g, &s, &corr).is_ok();
            traces &= trace_consistent(&trace);
            let greedy = greedy_decode(g, &s);
            annihilate &= check_annihilates(g, &s, &greedy).is_ok();
            let mut seen: Vec<usize> = greedy.pairs.iter().flat_map(|&(a, b)| [a, b]).filter(|&v| !g.is_boundary(v)).collect();
            seen.sort_unstable();
            feasible &= seen == s.active;
        }
        suite.add("decoders", &format!("corrections annihilate syndromes (d={d})"), annihilate, "");
        suite.add("decoders", &format!("valid clusters do not grow; merge parity adds (d={d})"), traces, "");
        suite.add("decoders", &format!("greedy matches every active detector once (d={d})"), feasible, "");
    }
    // Every fault is one edge, so decoding all edge sets of weight <= (d-1)/2
    // covers every fault set of that weight.
    for st in setups {
        let (d, g) = (st.code.d, &st.graph);
        let m = g.edges.len();
        let mut failures = 0;
        let mut decode = |edges: &[usize]| -> Result<()> {
            let s = Syndrome::from_edges(g, edges);
            let corr = uf_correct(g, &s)?;
            if g.edges_flip_observable(edges) ^ g.edges_flip_observable(&corr.edges) {
                failures += 1;
            }
            Ok(())
        };
        for a in 0..m {
            decode(&[a])?;
            if d >= 5 {
                for b in a + 1..m {
                    decode(&[a, b])?;
                }
            }
        }
        suite.add("decoders", &format!("UF corrects every weight <= {} error (d={d})", (d - 1) / 2), failures == 0, format!("{failures} failures"));
    }
    Ok(())
}

fn clustering_checks(suite: &mut Suite, st: &MemorySetup, seed: u64) -> Result<()> {
    let schedule = ScaleSchedule::uf(1.2, 2.8, 107.0)?;
    let bad: Vec<String> = check_constraints(&schedule).into_iter().filter(|c| !c.ok).map(|c| c.name).collect();
    suite.add("clustering", "validated schedule meets its constraints", bad.is_empty(), bad.join("; "));
    let mono = (1..50).all(|k| schedule.ln_d(k + 1) > schedule.ln_d(k) && schedule.ln_b(k + 1) > schedule.ln_b(k));
    suite.add("clustering", "b_k and d_k strictly increase", mono, "");

    let small = ScaleSchedule::explicit(vec![2.0, 6.0, 20.0], vec![1.0, 4.0, 12.0])?;
    let g = &st.graph;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..g.edges.len()).collect();
    let (mut nested, mut disjoint, mut within) = (true, true, true);
    for _ in 0..50 {
        all.shuffle(&mut rng);
        let mut n: Vec<usize> = all[..rng.gen_range(1..12)].to_vec();
        n.sort_unstable();
        let c = decompose_clustered(g, &n, &small)?;
        let i = decompose_isolated(g, &n, &small)?;
        for k in 0..c.levels.len() {
            nested &= c.n_k(k + 1).iter().all(|e| c.n_k(k).contains(e));
        }
        for k in 0..i.levels.len() {
            nested &= i.n_k(k + 1).iter().all(|e| i.n_k(k).contains(e));
        }
        for level in &c.levels {
            let mut seen: Vec<usize> = level.clusters.iter().flat_map(|cl| cl.edges.iter().copied()).collect();
            let len = seen.len();
            seen.sort_unstable();
            seen.dedup();
            disjoint &= seen.len() == len;
        }
        within &= clustered_within_isolated(&c, &i);
    }
    suite.add("clustering", "clustered and isolated hierarchies are nested", nested, "");
    suite.add("clustering", "clusters at one level are disjoint", disjoint, "");
    suite.add("clustering", "clustered sets lie within isolated sets", within, "");
    Ok(())
}

fn adversarial_checks(suite: &mut Suite) {
    let mut ordered = true;
    let mut bounded = true;
    let mut prev = 0;
    let mut monotone = true;
    for d in (5..=101).step_by(2) {
        let (kept, splits) = cantor_tree(d);
        ordered &= splits.iter().all(|s| s.middle < s.left && s.left <= s.right);
        let n: usize = kept.iter().map(|s| s.1).sum();
        monotone &= n >= prev;
        prev = n;
        let depth = splits.iter().map(|s| s.depth + 1).max().unwrap_or(0);
        bounded &= (n as f64) <= fault_count_bound(d)
            && (depth as f64) <= depth_bound(d)
            && kept.len() <= 1 << depth
            && kept.iter().all(|s| s.1 <= 4);
    }
    suite.add("adversarial", "middle < left <= right at every split", ordered, "");
    suite.add("adversarial", "fault count nondecreasing in d", monotone, "");
    suite.add("adversarial", "fault count, depth and segment count within bounds", bounded, "");
    suite.add("adversarial", "length 4 is kept whole", cantor_decompose(4) == vec![(0, 4)], "");
}

fn experiment_checks(suite: &mut Suite, seed: u64) -> Result<()> {
    let base = ExperimentConfig { distances: vec![3], probabilities: vec![0.0], shots: 100, seed, ..Default::default() };
    let quiet = run_memory(&base)?;
    suite.add("experiments", "p = 0 gives no failures", quiet[0].row.failures == 0, "");
    let cfg = ExperimentConfig { probabilities: vec![0.01], shots: 400, ..base };
    let a = sweep(&ExperimentConfig { mode: ExecMode::Sequential, ..cfg.clone() })?;
    let b = sweep(&ExperimentConfig { mode: ExecMode::Parallel, ..cfg.clone() })?;
    let c = sweep(&ExperimentConfig { path: ShotPath::Graph, ..cfg })?;
    suite.add("experiments", "sweeps are reproducible across worker modes", a == b, "");
    suite.add("experiments", "graph lookup matches circuit simulation", a == c, "");
    Ok(())
}
