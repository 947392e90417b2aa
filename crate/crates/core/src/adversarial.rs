//! Cantor-like error chains on which greedy matching fails with far fewer
//! than `(d+1)/2` faults.

use serde::Serialize;

use crate::circuit::{Circuit, FaultSet, Pauli, Slot, STEP_RESET};
use crate::decoders::{greedy_decode_with, logical_flip, uf_correct, Syndrome, TieRule};
use crate::detector_graph::{BoundarySide, DetectorGraph, ErrorType, NodeKind};
use crate::error::{LabError, Result};
use crate::lattice::Coord;

/// One split of the recursive decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Split {
    pub start: usize,
    pub len: usize,
    pub left: usize,
    pub middle: usize,
    pub right: usize,
    pub depth: usize,
}

/// Lengths `(left, middle, right)` of the three parts of a segment of length
/// `len >= 5`.
pub fn split_lengths(len: usize) -> (usize, usize, usize) {
    let m = (len - 2) / 3;
    let rest = len - m;
    (rest / 2, m, rest.div_ceil(2))
}

/// Full recursion: kept segments `(start, len)` in position order and every
/// split performed.
pub fn cantor_tree(len: usize) -> (Vec<(usize, usize)>, Vec<Split>) {
    fn go(start: usize, len: usize, depth: usize, kept: &mut Vec<(usize, usize)>, splits: &mut Vec<Split>) {
        if len < 5 {
            if len > 0 {
                kept.push((start, len));
            }
            return;
        }
        let (left, middle, right) = split_lengths(len);
        splits.push(Split { start, len, left, middle, right, depth });
        go(start, left, depth + 1, kept, splits);
        go(start + left + middle, right, depth + 1, kept, splits);
    }
    let mut kept = Vec::new();
    let mut splits = Vec::new();
    go(0, len, 0, &mut kept, &mut splits);
    (kept, splits)
}

pub fn cantor_decompose(len: usize) -> Vec<(usize, usize)> {
    cantor_tree(len).0
}

/// `l_0 = len`, `l_{k+1}` the right part of `l_k`, until it drops below 5.
pub fn rightmost_lengths(len: usize) -> Vec<usize> {
    let mut out = vec![len];
    let mut l = len;
    while l >= 5 {
        l = split_lengths(l).2;
        out.push(l);
    }
    out
}

/// Upper bound on the number of faults in the pattern for distance `d`.
pub fn fault_count_bound(d: usize) -> f64 {
    let a = (108.0f64 / 13.0).log(3.0);
    let b = 2f64.log(3.0);
    2f64.powf(a) * (d as f64 - 0.75).powf(b)
}

/// Upper bound on the recursion depth for distance `d`.
pub fn depth_bound(d: usize) -> f64 {
    (4.0 / 13.0 * (d as f64 - 0.75)).log(3.0) + 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantorPattern {
    pub d: usize,
    pub round: usize,
    /// Chain edges from the left boundary to the right boundary.
    pub chain: Vec<usize>,
    /// `chain.len() + 1` nodes; the first and last are boundary nodes.
    pub chain_nodes: Vec<usize>,
    /// Fault location producing each chain edge.
    pub chain_locations: Vec<usize>,
    pub segments: Vec<(usize, usize)>,
    pub error_edges: Vec<usize>,
    pub n: usize,
}

impl CantorPattern {
    pub fn faults(&self) -> FaultSet {
        let entries = self
            .segments
            .iter()
            .flat_map(|&(s, l)| s..s + l)
            .map(|i| (self.chain_locations[i], Pauli::X))
            .collect();
        FaultSet::new(entries).expect("chain locations are distinct")
    }

    /// Complement of the kept segments along the chain, as `(start, len)`.
    pub fn gaps(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        for &(s, l) in &self.segments {
            if s > at {
                out.push((at, s - at));
            }
            at = s + l;
        }
        if at < self.chain.len() {
            out.push((at, self.chain.len() - at));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("pattern serializes")
    }
}

/// Horizontal chain of single-qubit X faults through the middle row of data
/// qubits in the middle round, decomposed into kept segments.
pub fn cantor_pattern(g: &DetectorGraph, circuit: &Circuit) -> Result<CantorPattern> {
    if g.error_type != ErrorType::ZDetecting {
        return Err(LabError::Construction("the chain lives on the Z-detecting graph".into()));
    }
    let d = g.d;
    let y = (d - 1) / 2;
    let round = circuit.rounds / 2;
    let side = |want: BoundarySide| {
        g.boundary_nodes()
            .find(|&b| g.nodes[b].kind == NodeKind::Boundary(want))
            .ok_or_else(|| LabError::Construction(format!("no {want:?} boundary node")))
    };
    let (left, right) = (side(BoundarySide::Left)?, side(BoundarySide::Right)?);

    let mut chain = Vec::with_capacity(d);
    let mut chain_locations = Vec::with_capacity(d);
    let mut chain_nodes = vec![left];
    for x in 0..d {
        let q = Coord::data(x as i32, y as i32);
        let loc = circuit
            .fault_locations
            .iter()
            .find(|l| l.slot == Slot::Idle && l.step == STEP_RESET && l.round == round && l.qubit == q)
            .ok_or_else(|| LabError::Construction(format!("no idle location on {q} in round {round}")))?;
        let e = g
            .edge_of_fault(loc.id, Pauli::X)
            .ok_or_else(|| LabError::Construction(format!("X on {q} flips no detector")))?;
        let at = *chain_nodes.last().unwrap();
        let edge = &g.edges[e];
        if edge.u != at && edge.v != at {
            return Err(LabError::Construction(format!("chain breaks at {q}")));
        }
        chain_nodes.push(edge.other(at));
        chain.push(e);
        chain_locations.push(loc.id);
    }
    if *chain_nodes.last().unwrap() != right {
        return Err(LabError::Construction("chain does not end on the right boundary".into()));
    }
    check_geodesic(g, &chain_nodes)?;

    let segments = cantor_decompose(d);
    let mut error_edges: Vec<usize> = segments.iter().flat_map(|&(s, l)| chain[s..s + l].iter().copied()).collect();
    error_edges.sort_unstable();
    let n = segments.iter().map(|s| s.1).sum();
    Ok(CantorPattern { d, round, chain, chain_nodes, chain_locations, segments, error_edges, n })
}

/// Every pair of chain nodes is exactly as far apart in the graph as along
/// the chain.
fn check_geodesic(g: &DetectorGraph, nodes: &[usize]) -> Result<()> {
    let last = nodes.len() - 1;
    for i in 1..last {
        let (dist, _) = g.node_distances(nodes[i], false);
        for (j, &v) in nodes.iter().enumerate() {
            let want = i.abs_diff(j) as u32;
            if dist[v] != want {
                return Err(LabError::Construction(format!(
                    "chain is not geodesic: nodes {i} and {j} at distance {} instead of {want}",
                    dist[v]
                )));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GreedyOutcome {
    pub tie: TieRule,
    pub logical_failure: bool,
    /// The matched pairs are exactly the endpoints of the gaps between kept
    /// segments, so error plus correction covers the whole chain.
    pub complement: bool,
}

/// Injects the pattern, decodes it greedily and reports the outcome.
pub fn verify_greedy_failure(
    g: &DetectorGraph,
    circuit: &Circuit,
    pattern: &CantorPattern,
    tie: TieRule,
) -> Result<GreedyOutcome> {
    let shot = circuit.simulate_shot(&pattern.faults())?;
    let s = Syndrome::from_outcome(g, &shot);
    let corr = greedy_decode_with(g, &s, tie);
    let logical_failure = logical_flip(g, &circuit.code, &shot, &corr)?;

    let mut got: Vec<(usize, usize)> = corr.pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    got.sort_unstable();
    let mut want: Vec<(usize, usize)> = pattern
        .gaps()
        .into_iter()
        .map(|(s, l)| {
            let (a, b) = (pattern.chain_nodes[s], pattern.chain_nodes[s + l]);
            (a.min(b), a.max(b))
        })
        .collect();
    want.sort_unstable();
    let gap_len: usize = pattern.gaps().iter().map(|g| g.1).sum();
    let complement = got == want && corr.edges.len() == gap_len;
    Ok(GreedyOutcome { tie, logical_failure, complement })
}

/// Whether union-find decodes the pattern without a logical error.
pub fn uf_corrects(g: &DetectorGraph, circuit: &Circuit, pattern: &CantorPattern) -> Result<bool> {
    let shot = circuit.simulate_shot(&pattern.faults())?;
    let s = Syndrome::from_outcome(g, &shot);
    let corr = uf_correct(g, &s)?;
    Ok(!logical_flip(g, &circuit.code, &shot, &corr)?)
}
