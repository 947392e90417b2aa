//! Spacetime detector graph and its line-graph metric.
//!
//! Nodes are the detectors of one stabilizer type plus one aggregated boundary
//! node per open side. Edges are the distinct detector pairs (or
//! detector/boundary pairs) flipped by a single Pauli at a single fault
//! location; every mechanism producing the same pair is folded into one edge.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::circuit::{Circuit, FaultSet, Pauli};
use crate::error::{param, LabError, Result};
use crate::lattice::{Coord, FaceKind};

/// Which stabilizer type the detectors come from. `ZDetecting` uses the Z
/// faces, which see X errors and decide the logical Z readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorType {
    XDetecting,
    ZDetecting,
}

impl ErrorType {
    pub fn face_kind(self) -> FaceKind {
        match self {
            ErrorType::XDetecting => FaceKind::X,
            ErrorType::ZDetecting => FaceKind::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpacetimeCoord {
    pub pos: Coord,
    pub round: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Detector {
        face: usize,
        round: usize,
        /// Closed by the final data readout rather than a measured round.
        synthetic: bool,
    },
    Boundary(BoundarySide),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DetectorNode {
    pub id: usize,
    pub kind: NodeKind,
    pub coord: Option<SpacetimeCoord>,
}

impl DetectorNode {
    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, NodeKind::Boundary(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetectorEdge {
    pub id: usize,
    /// `u < v`; boundary nodes have the largest ids so `v` is the boundary
    /// node of a boundary edge.
    pub u: usize,
    pub v: usize,
    pub fault_sources: Vec<usize>,
    /// Whether the mechanisms of this edge flip the logical Z readout.
    pub flips_observable: bool,
}

impl DetectorEdge {
    /// Probability that an odd number of the independent source locations
    /// fire, each at rate `p`; bounded above by `|sources| * p`.
    pub fn p_tilde(&self, p: f64) -> f64 {
        1.0 - (1.0 - p).powi(self.fault_sources.len() as i32)
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Mechanism {
    edge: Option<u32>,
    flips_observable: bool,
}

pub struct DetectorGraph {
    pub error_type: ErrorType,
    pub d: usize,
    pub rounds: usize,
    pub nodes: Vec<DetectorNode>,
    pub edges: Vec<DetectorEdge>,
    num_detectors: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
    /// `node_of[face][row]`, `usize::MAX` for faces of the other type.
    node_of: Vec<Vec<usize>>,
    /// Per fault location, per Pauli (X, Y, Z).
    mechanisms: Vec<[Mechanism; 3]>,
    metric_cache: RwLock<HashMap<usize, Arc<Vec<u16>>>>,
}

pub const UNREACHABLE: u16 = u16::MAX;

/// Enumerates every single-location single-Pauli fault, simulates it and
/// folds the resulting detector flips into a graph.
pub fn build_detector_graph(circuit: &Circuit, error_type: ErrorType) -> Result<DetectorGraph> {
    let code = &circuit.code;
    let kind = error_type.face_kind();
    let rounds = circuit.rounds;
    let rows = |k: FaceKind| if k == FaceKind::Z { rounds + 1 } else { rounds };

    let typed_faces: Vec<usize> = code.faces_of(kind).map(|(i, _)| i).collect();
    let mut nodes = Vec::new();
    let mut node_of = vec![vec![usize::MAX; rows(kind)]; code.faces.len()];
    let mut det_records: Vec<Vec<usize>> = Vec::new();
    for row in 0..rows(kind) {
        for &f in &typed_faces {
            let id = nodes.len();
            node_of[f][row] = id;
            nodes.push(DetectorNode {
                id,
                kind: NodeKind::Detector { face: f, round: row, synthetic: row == rounds },
                coord: Some(SpacetimeCoord { pos: code.faces[f].meas, round: row }),
            });
            det_records.push(circuit.detector_records(f, row));
        }
    }
    let num_detectors = nodes.len();
    let sides = match error_type {
        ErrorType::ZDetecting => [BoundarySide::Left, BoundarySide::Right],
        ErrorType::XDetecting => [BoundarySide::Bottom, BoundarySide::Top],
    };
    for side in sides {
        let id = nodes.len();
        nodes.push(DetectorNode { id, kind: NodeKind::Boundary(side), coord: None });
    }
    // Boundary side of a detector: which half of the lattice its face sits in.
    let center2 = code.d as i32 - 1;
    let boundary_of = |det: usize| -> usize {
        let pos = nodes[det].coord.unwrap().pos;
        let low = match error_type {
            ErrorType::ZDetecting => pos.x2 < center2,
            ErrorType::XDetecting => pos.y2 < center2,
        };
        num_detectors + usize::from(!low)
    };
    let obs_records = if error_type == ErrorType::ZDetecting { circuit.observable_records() } else { Vec::new() };

    // Flip sets for X and Z at every location, 32 locations per 64-lane batch.
    let nloc = circuit.fault_locations.len();
    let mut flips: Vec<[(Vec<usize>, bool); 2]> = Vec::with_capacity(nloc);
    for chunk_start in (0..nloc).step_by(32) {
        let chunk: Vec<usize> = (chunk_start..(chunk_start + 32).min(nloc)).collect();
        let faults: Vec<(usize, usize, Pauli)> = chunk
            .iter()
            .enumerate()
            .flat_map(|(i, &l)| [(2 * i, l, Pauli::X), (2 * i + 1, l, Pauli::Z)])
            .collect();
        let rec = circuit.simulate_lanes(&faults);
        let det_words: Vec<u64> =
            det_records.iter().map(|rs| rs.iter().fold(0u64, |acc, &r| acc ^ rec[r])).collect();
        let obs_word = obs_records.iter().fold(0u64, |acc, &r| acc ^ rec[r]);
        let mut per_lane: Vec<Vec<usize>> = vec![Vec::new(); 64];
        for (det, &w) in det_words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let lane = w.trailing_zeros() as usize;
                per_lane[lane].push(det);
                w &= w - 1;
            }
        }
        for i in 0..chunk.len() {
            let x = (std::mem::take(&mut per_lane[2 * i]), obs_word >> (2 * i) & 1 == 1);
            let z = (std::mem::take(&mut per_lane[2 * i + 1]), obs_word >> (2 * i + 1) & 1 == 1);
            flips.push([x, z]);
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut raw_edges: Vec<DetectorEdge> = Vec::new();
    let mut raw_mech: Vec<[Option<(usize, bool)>; 3]> = Vec::with_capacity(nloc);
    for (loc, [(fx, ox), (fz, oz)]) in flips.iter().enumerate() {
        let mut m = [None; 3];
        for p in Pauli::ALL {
            let (set, obs) = match p {
                Pauli::X => (fx.clone(), *ox),
                Pauli::Z => (fz.clone(), *oz),
                Pauli::Y => (symmetric_difference(fx, fz), ox ^ oz),
            };
            let key = match set.len() {
                0 => {
                    if obs {
                        return Err(LabError::GraphConstruction(format!(
                            "{p:?} at location {loc} flips the logical readout without flipping any detector"
                        )));
                    }
                    continue;
                }
                1 => (set[0], boundary_of(set[0])),
                2 => (set[0], set[1]),
                k => {
                    return Err(LabError::GraphConstruction(format!(
                        "{p:?} at location {loc} flips {k} detectors of one type"
                    )))
                }
            };
            let e = *edge_index.entry(key).or_insert_with(|| {
                raw_edges.push(DetectorEdge {
                    id: raw_edges.len(),
                    u: key.0,
                    v: key.1,
                    fault_sources: Vec::new(),
                    flips_observable: obs,
                });
                raw_edges.len() - 1
            });
            if raw_edges[e].flips_observable != obs {
                return Err(LabError::GraphConstruction(format!(
                    "mechanisms of detector pair {key:?} disagree on the logical readout"
                )));
            }
            if raw_edges[e].fault_sources.last() != Some(&loc) {
                raw_edges[e].fault_sources.push(loc);
            }
            m[p.index()] = Some((e, obs));
        }
        raw_mech.push(m);
    }

    // Canonical edge order: by endpoint pair.
    let mut order: Vec<usize> = (0..raw_edges.len()).collect();
    order.sort_by_key(|&e| (raw_edges[e].u, raw_edges[e].v));
    let mut remap = vec![0usize; raw_edges.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let edges: Vec<DetectorEdge> = order
        .iter()
        .enumerate()
        .map(|(new, &old)| DetectorEdge { id: new, ..raw_edges[old].clone() })
        .collect();
    let mechanisms = raw_mech
        .into_iter()
        .map(|m| {
            m.map(|x| match x {
                Some((e, obs)) => Mechanism { edge: Some(remap[e] as u32), flips_observable: obs },
                None => Mechanism::default(),
            })
        })
        .collect();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for e in &edges {
        adjacency[e.u].push((e.v, e.id));
        adjacency[e.v].push((e.u, e.id));
    }
    Ok(DetectorGraph {
        error_type,
        d: code.d,
        rounds,
        nodes,
        edges,
        num_detectors,
        adjacency,
        node_of,
        mechanisms,
        metric_cache: RwLock::new(HashMap::new()),
    })
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalityCertificate {
    /// Longest spacetime length over detector-detector edges.
    pub c_observed: f64,
    /// Maximum degree over detector nodes (boundary-incident edges included).
    pub max_degree: usize,
    /// Maximum degree of the aggregated boundary nodes, reported only.
    pub boundary_degree: usize,
    pub xi_observed: usize,
    /// Largest `|B_e(r)| / r^3` seen over all edges and radii `1..=max_radius`.
    pub ball_ratio_max: f64,
    pub max_radius: usize,
    pub c_ok: bool,
    pub degree_ok: bool,
    pub xi_ok: bool,
    pub lambda_check: bool,
}

impl LocalityCertificate {
    pub fn all_ok(&self) -> bool {
        self.c_ok && self.degree_ok && self.xi_ok && self.lambda_check
    }
}

/// Ball-growth constant of the circuit's detector graph.
pub fn lambda_circuit() -> f64 {
    48.0 * 3f64.sqrt() * std::f64::consts::PI
}

pub const DELTA_CIRCUIT: f64 = 3.0;

impl DetectorGraph {
    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    pub fn boundary_nodes(&self) -> std::ops::Range<usize> {
        self.num_detectors..self.nodes.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node >= self.num_detectors
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn node_of(&self, face: usize, row: usize) -> Option<usize> {
        self.node_of.get(face).and_then(|r| r.get(row)).copied().filter(|&n| n != usize::MAX)
    }

    pub fn xi(&self) -> usize {
        self.edges.iter().map(|e| e.fault_sources.len()).max().unwrap_or(0)
    }

    /// Edge hit by a single Pauli at a location, if it flips any detector.
    pub fn edge_of_fault(&self, loc: usize, p: Pauli) -> Option<usize> {
        self.mechanisms[loc][p.index()].edge.map(|e| e as usize)
    }

    pub fn fault_flips_observable(&self, loc: usize, p: Pauli) -> bool {
        self.mechanisms[loc][p.index()].flips_observable
    }

    /// Error edges (mod 2) and logical-readout flip caused by a fault set.
    pub fn fault_set_edges(&self, faults: &FaultSet) -> (Vec<usize>, bool) {
        let mut edges = Vec::with_capacity(faults.len());
        let mut obs = false;
        for &(loc, p) in &faults.entries {
            let m = self.mechanisms[loc][p.index()];
            obs ^= m.flips_observable;
            if let Some(e) = m.edge {
                edges.push(e as usize);
            }
        }
        (xor_reduce(edges), obs)
    }

    /// Active detectors produced by a set of error edges.
    pub fn syndrome_of_edges(&self, edges: &[usize]) -> Vec<usize> {
        let mut flips = Vec::with_capacity(2 * edges.len());
        for &e in edges {
            let edge = &self.edges[e];
            for n in [edge.u, edge.v] {
                if !self.is_boundary(n) {
                    flips.push(n);
                }
            }
        }
        xor_reduce(flips)
    }

    pub fn edges_flip_observable(&self, edges: &[usize]) -> bool {
        edges.iter().fold(false, |acc, &e| acc ^ self.edges[e].flips_observable)
    }

    fn check_edge(&self, e: usize) -> Result<()> {
        if e < self.edges.len() {
            Ok(())
        } else {
            Err(LabError::Lookup { kind: "edge", id: e })
        }
    }

    /// Line-graph BFS distances from edge `e` to every edge; memoized.
    /// Boundary nodes are not expanded: two boundary edges are adjacent only
    /// through a shared detector.
    pub fn line_distances(&self, e: usize) -> Arc<Vec<u16>> {
        if let Some(v) = self.metric_cache.read().unwrap().get(&e) {
            return Arc::clone(v);
        }
        let v = Arc::new(self.line_bfs(e));
        self.metric_cache.write().unwrap().insert(e, Arc::clone(&v));
        v
    }

    pub fn clear_metric_cache(&self) {
        self.metric_cache.write().unwrap().clear();
    }

    fn line_bfs(&self, e: usize) -> Vec<u16> {
        let mut dist = vec![UNREACHABLE; self.edges.len()];
        let mut expanded = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[e] = 0;
        queue.push_back(e);
        while let Some(cur) = queue.pop_front() {
            let dc = dist[cur];
            let edge = &self.edges[cur];
            for n in [edge.u, edge.v] {
                if expanded[n] || self.is_boundary(n) {
                    continue;
                }
                expanded[n] = true;
                for &(_, nb) in &self.adjacency[n] {
                    if dist[nb] == UNREACHABLE {
                        dist[nb] = dc + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
        dist
    }

    pub fn edge_distance(&self, e: usize, f: usize) -> Result<usize> {
        self.check_edge(e)?;
        self.check_edge(f)?;
        Ok(self.line_distances(e)[f] as usize)
    }

    /// Edges within line-graph distance `r` of `e`, sorted.
    pub fn ball(&self, e: usize, r: usize) -> Result<Vec<usize>> {
        self.check_edge(e)?;
        let dist = self.line_distances(e);
        Ok((0..self.edges.len()).filter(|&f| (dist[f] as usize) <= r).collect())
    }

    pub fn set_diameter(&self, set: &[usize]) -> Result<usize> {
        if set.is_empty() {
            return Err(param("diameter of an empty edge set"));
        }
        let mut best = 0;
        for &a in set {
            self.check_edge(a)?;
            let dist = self.line_distances(a);
            for &b in set {
                self.check_edge(b)?;
                best = best.max(dist[b] as usize);
            }
        }
        Ok(best)
    }

    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> Result<usize> {
        if a.is_empty() || b.is_empty() {
            return Err(param("distance involving an empty edge set"));
        }
        let mut best = usize::MAX;
        for &x in a {
            self.check_edge(x)?;
            let dist = self.line_distances(x);
            for &y in b {
                self.check_edge(y)?;
                best = best.min(dist[y] as usize);
            }
        }
        Ok(best)
    }

    /// Unit-weight BFS over nodes from `src`. Boundary nodes are reached but
    /// never expanded unless `through_boundary` is set.
    pub fn node_distances(&self, src: usize, through_boundary: bool) -> (Vec<u32>, Vec<usize>) {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        let mut parent_edge = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(n) = queue.pop_front() {
            if n != src && self.is_boundary(n) && !through_boundary {
                continue;
            }
            for &(m, e) in &self.adjacency[n] {
                if dist[m] == u32::MAX {
                    dist[m] = dist[n] + 1;
                    parent_edge[m] = e;
                    queue.push_back(m);
                }
            }
        }
        (dist, parent_edge)
    }

    /// Euclidean spacetime length of an edge between two detectors.
    pub fn spacetime_length(&self, e: usize) -> Option<f64> {
        let edge = &self.edges[e];
        let (a, b) = (self.nodes[edge.u].coord?, self.nodes[edge.v].coord?);
        let dx = (a.pos.x2 - b.pos.x2) as f64 / 2.0;
        let dy = (a.pos.y2 - b.pos.y2) as f64 / 2.0;
        let dt = a.round as f64 - b.round as f64;
        Some((dx * dx + dy * dy + dt * dt).sqrt())
    }

    /// Checks the spacetime-locality constants; ball growth is tested for
    /// every edge and every radius `1..=max_radius`.
    pub fn verify_locality(&self, max_radius: usize) -> LocalityCertificate {
        let c_observed = (0..self.edges.len()).filter_map(|e| self.spacetime_length(e)).fold(0.0, f64::max);
        let max_degree = (0..self.num_detectors).map(|n| self.degree(n)).max().unwrap_or(0);
        let boundary_degree = self.boundary_nodes().map(|n| self.degree(n)).max().unwrap_or(0);
        let xi_observed = self.xi();
        let mut ratio: f64 = 0.0;
        for e in 0..self.edges.len() {
            let dist = self.line_bfs(e);
            let mut hist = vec![0usize; max_radius + 1];
            for &x in &dist {
                if (x as usize) <= max_radius {
                    hist[x as usize] += 1;
                }
            }
            let mut cum = hist[0];
            for (r, h) in hist.iter().enumerate().skip(1) {
                cum += h;
                ratio = ratio.max(cum as f64 / (r as f64).powi(3));
            }
        }
        LocalityCertificate {
            c_observed,
            max_degree,
            boundary_degree,
            xi_observed,
            ball_ratio_max: ratio,
            max_radius,
            c_ok: c_observed <= 3f64.sqrt() + 1e-12,
            degree_ok: max_degree <= 12,
            xi_ok: xi_observed <= 10,
            lambda_check: ratio <= lambda_circuit(),
        }
    }

    /// Largest finite line-graph distance from any edge.
    pub fn line_diameter(&self) -> usize {
        (0..self.edges.len())
            .map(|e| self.line_bfs(e).into_iter().filter(|&x| x != UNREACHABLE).max().unwrap_or(0) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self, p: f64) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                let kind = match n.kind {
                    NodeKind::Detector { synthetic: true, .. } => "synthetic".to_string(),
                    NodeKind::Detector { .. } => "detector".to_string(),
                    NodeKind::Boundary(side) => format!("boundary_{side:?}").to_lowercase(),
                };
                let coord = n.coord.map(|c| serde_json::json!([c.pos.x2, c.pos.y2, c.round]));
                serde_json::json!({ "id": n.id, "kind": kind, "coord": coord })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.id, "u": e.u, "v": e.v,
                    "sources": e.fault_sources,
                    "p_tilde": e.p_tilde(p),
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }
}

/// Keeps the elements that occur an odd number of times, sorted.
pub(crate) fn xor_reduce(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    let mut out = Vec::with_capacity(v.len());
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(v[i]);
        }
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_syndrome_circuit;
    use crate::lattice::build_surface_code;

    fn graph(d: usize, rounds: usize, t: ErrorType) -> DetectorGraph {
        let code = build_surface_code(d).unwrap();
        build_detector_graph(&build_syndrome_circuit(&code, rounds).unwrap(), t).unwrap()
    }

    #[test]
    fn d3_node_count() {
        let g = graph(3, 3, ErrorType::ZDetecting);
        assert_eq!(g.num_detectors(), 4 * 4);
        assert_eq!(g.nodes.len(), 18);
        let gx = graph(3, 3, ErrorType::XDetecting);
        assert_eq!(gx.num_detectors(), 4 * 3);
    }

    #[test]
    fn simple_graph() {
        let g = graph(3, 2, ErrorType::ZDetecting);
        let mut seen = std::collections::HashSet::new();
        for e in &g.edges {
            assert!(e.u < e.v);
            assert!(!g.is_boundary(e.u));
            assert!(seen.insert((e.u, e.v)));
            assert!(!e.fault_sources.is_empty());
        }
    }

    #[test]
    fn metric_basics() {
        let g = graph(3, 3, ErrorType::ZDetecting);
        assert_eq!(g.edge_distance(4, 4).unwrap(), 0);
        assert_eq!(g.ball(4, 0).unwrap(), vec![4]);
        assert!(g.edge_distance(0, g.edges.len()).is_err());
        assert!(g.set_diameter(&[]).is_err());
        assert!(g.set_distance(&[1], &[]).is_err());
        assert_eq!(g.set_diameter(&[7]).unwrap(), 0);
        assert_eq!(g.set_distance(&[2], &[9]).unwrap(), g.edge_distance(2, 9).unwrap());
    }

    #[test]
    fn xor_reduce_keeps_odd() {
        assert_eq!(xor_reduce(vec![3, 1, 3, 2, 3]), vec![1, 2, 3]);
        assert!(xor_reduce(vec![5, 5]).is_empty());
    }
}
