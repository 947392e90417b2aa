//! Union-find and greedy decoders on a [`DetectorGraph`].

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::circuit::ShotOutcome;
use crate::detector_graph::{xor_reduce, DetectorGraph};
use crate::error::{LabError, Result};
use crate::lattice::SurfaceCode;

/// Active detector node ids, sorted and distinct.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Syndrome {
    pub active: Vec<usize>,
}

impl Syndrome {
    pub fn new(g: &DetectorGraph, mut active: Vec<usize>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&bad) = active.iter().find(|&&n| n >= g.num_detectors()) {
            return Err(LabError::Lookup { kind: "detector", id: bad });
        }
        Ok(Syndrome { active })
    }

    pub fn from_edges(g: &DetectorGraph, edges: &[usize]) -> Self {
        Syndrome { active: g.syndrome_of_edges(edges) }
    }

    pub fn from_outcome(g: &DetectorGraph, shot: &ShotOutcome) -> Self {
        let mut active = Vec::new();
        for (face, rows) in shot.detectors.iter().enumerate() {
            for (row, &bit) in rows.iter().enumerate() {
                if bit {
                    if let Some(n) = g.node_of(face, row) {
                        active.push(n);
                    }
                }
            }
        }
        active.sort_unstable();
        Syndrome { active }
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Correction {
    pub edges: Vec<usize>,
    /// Matched detector pairs; the second entry is a boundary node id for
    /// detector-to-boundary matches.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UfCluster {
    pub id: usize,
    pub nodes: Vec<usize>,
    /// Edges with nonzero support touching the cluster, as (edge, half-units).
    pub coverage: Vec<(usize, u8)>,
    pub odd: bool,
    pub touches_boundary: bool,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterSnapshot {
    pub id: usize,
    pub nodes: Vec<usize>,
    pub odd: bool,
    pub touches_boundary: bool,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergeEvent {
    pub round: usize,
    /// Cluster ids that fused, each with its parity before the merge.
    pub parts: Vec<(usize, bool)>,
    pub result: usize,
    pub result_odd: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Clusters that grew this round.
    pub grew: Vec<usize>,
    /// Half-edge growth steps this round, as (edge, node grown from).
    pub grown: Vec<(usize, usize)>,
    pub merges: Vec<MergeEvent>,
    pub clusters: Vec<ClusterSnapshot>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DecodeTrace {
    pub initial: Vec<ClusterSnapshot>,
    pub rounds: Vec<RoundRecord>,
    /// Final cluster id and the last round in which any part of it grew.
    pub stop_round: Vec<(usize, usize)>,
    /// Final cluster id and the edges its peeling selected.
    pub peel: Vec<(usize, Vec<usize>)>,
    /// Edges of each final cluster's spanning forest.
    pub forest_sizes: Vec<(usize, usize)>,
}

impl DecodeTrace {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }
}

struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns (new root, absorbed root).
    fn union(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if self.size[a] < self.size[b] || (self.size[a] == self.size[b] && b < a) {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        (a, b)
    }
}

struct UfState<'g> {
    g: &'g DetectorGraph,
    dsu: Dsu,
    support: Vec<u8>,
    odd: Vec<bool>,
    boundary: Vec<bool>,
    members: Vec<Vec<usize>>,
    last_grow: Vec<usize>,
    /// Roots of clusters containing at least one active detector.
    roots: Vec<usize>,
}

impl<'g> UfState<'g> {
    fn valid(&self, r: usize) -> bool {
        !self.odd[r] || self.boundary[r]
    }

    fn snapshot(&self) -> Vec<ClusterSnapshot> {
        self.roots
            .iter()
            .map(|&r| {
                let mut nodes = self.members[r].clone();
                nodes.sort_unstable();
                ClusterSnapshot {
                    id: r,
                    nodes,
                    odd: self.odd[r],
                    touches_boundary: self.boundary[r],
                    valid: self.valid(r),
                }
            })
            .collect()
    }

    fn cluster(&self, r: usize) -> UfCluster {
        let mut nodes = self.members[r].clone();
        nodes.sort_unstable();
        let mut coverage: Vec<(usize, u8)> = nodes
            .iter()
            .flat_map(|&n| self.g.neighbors(n).iter().map(|&(_, e)| e))
            .filter(|&e| self.support[e] > 0)
            .map(|e| (e, self.support[e]))
            .collect();
        coverage.sort_unstable();
        coverage.dedup();
        UfCluster {
            id: r,
            nodes,
            coverage,
            odd: self.odd[r],
            touches_boundary: self.boundary[r],
            valid: self.valid(r),
        }
    }
}

/// Union-find decoding: synchronous half-edge growth of every invalid
/// cluster, merge on fully covered edges, then peeling per cluster.
pub fn uf_decode(g: &DetectorGraph, s: &Syndrome) -> Result<(Correction, DecodeTrace)> {
    uf_run(g, s, true)
}

/// [`uf_decode`] without trace recording.
pub fn uf_correct(g: &DetectorGraph, s: &Syndrome) -> Result<Correction> {
    uf_run(g, s, false).map(|(c, _)| c)
}

/// Work done on one final union-find cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterCost {
    pub id: usize,
    /// Growth rounds the cluster took part in (every round up to its last).
    pub rounds: usize,
    /// Edges in its peeling forest.
    pub peel: usize,
}

/// [`uf_correct`] plus the per-cluster cost of the run.
pub fn uf_correct_with_costs(g: &DetectorGraph, s: &Syndrome) -> Result<(Correction, Vec<ClusterCost>)> {
    let (corr, trace) = uf_run(g, s, false)?;
    let costs = trace
        .stop_round
        .iter()
        .zip(&trace.forest_sizes)
        .map(|(&(id, rounds), &(_, peel))| ClusterCost { id, rounds, peel })
        .collect();
    Ok((corr, costs))
}

fn uf_run(g: &DetectorGraph, s: &Syndrome, record: bool) -> Result<(Correction, DecodeTrace)> {
    let n = g.nodes.len();
    let mut st = UfState {
        g,
        dsu: Dsu::new(n),
        support: vec![0; g.edges.len()],
        odd: vec![false; n],
        boundary: vec![false; n],
        members: vec![Vec::new(); n],
        last_grow: vec![0; n],
        roots: s.active.clone(),
    };
    for &a in &s.active {
        st.odd[a] = true;
        st.members[a].push(a);
    }
    let mut trace = DecodeTrace::default();
    if record {
        trace.initial = st.snapshot();
    }
    let mut round = 0;
    loop {
        let growing: Vec<usize> = st.roots.iter().copied().filter(|&r| !st.valid(r)).collect();
        if growing.is_empty() {
            break;
        }
        round += 1;
        let mut touched: BTreeMap<usize, u8> = BTreeMap::new();
        let mut steps = Vec::new();
        for &r in &growing {
            st.last_grow[r] = round;
            for &v in &st.members[r] {
                for &(_, e) in g.neighbors(v) {
                    if st.support[e] < 2 {
                        st.support[e] += 1;
                        touched.insert(e, st.support[e]);
                        if record {
                            steps.push((e, v));
                        }
                    }
                }
            }
        }
        // Fuse along every edge that became fully covered this round.
        let mut groups: BTreeMap<usize, Vec<(usize, bool)>> = BTreeMap::new();
        let before: Vec<(usize, bool)> = st.roots.iter().map(|&r| (r, st.odd[r])).collect();
        let mut merged_any = false;
        for (&e, &sup) in &touched {
            if sup < 2 {
                continue;
            }
            let edge = &g.edges[e];
            if g.is_boundary(edge.v) {
                let r = st.dsu.find(edge.u);
                st.boundary[r] = true;
                continue;
            }
            let (a, b) = (st.dsu.find(edge.u), st.dsu.find(edge.v));
            if a == b {
                continue;
            }
            merged_any = true;
            for r in [a, b] {
                if st.members[r].is_empty() {
                    st.members[r].push(r);
                }
            }
            let (keep, gone) = st.dsu.union(a, b);
            st.odd[keep] ^= st.odd[gone];
            st.boundary[keep] |= st.boundary[gone];
            st.last_grow[keep] = st.last_grow[keep].max(st.last_grow[gone]);
            let moved = std::mem::take(&mut st.members[gone]);
            st.members[keep].extend(moved);
        }
        if merged_any {
            for &(r, odd) in &before {
                let root = st.dsu.find(r);
                groups.entry(root).or_default().push((r, odd));
            }
            let mut roots: Vec<usize> = groups.keys().copied().collect();
            roots.sort_unstable();
            st.roots = roots;
        }
        if !record {
            continue;
        }
        let merges = groups
            .into_iter()
            .filter(|(_, parts)| parts.len() > 1)
            .map(|(result, parts)| MergeEvent { round, result_odd: st.odd[result], parts, result })
            .collect();
        trace.rounds.push(RoundRecord {
            round,
            grew: growing,
            grown: steps,
            merges,
            clusters: st.snapshot(),
        });
    }

    let mut corr = Correction::default();
    for &r in &st.roots.clone() {
        let cluster = st.cluster(r);
        let part = peel_cluster_with(g, &cluster, s, &st.support)?;
        trace.stop_round.push((r, st.last_grow[r]));
        trace.forest_sizes.push((r, part.forest_edges));
        trace.peel.push((r, part.correction.edges.clone()));
        corr.edges.extend(part.correction.edges);
        corr.pairs.extend(part.correction.pairs);
    }
    corr.edges = xor_reduce(corr.edges);
    Ok((corr, trace))
}

struct Peeled {
    correction: Correction,
    forest_edges: usize,
}

/// Erasure decoding of one valid cluster over its fully covered edges.
pub fn peel_cluster(g: &DetectorGraph, cluster: &UfCluster, s: &Syndrome) -> Result<Vec<usize>> {
    let mut support = vec![0u8; g.edges.len()];
    for &(e, sup) in &cluster.coverage {
        support[e] = sup;
    }
    Ok(peel_cluster_with(g, cluster, s, &support)?.correction.edges)
}

fn peel_cluster_with(g: &DetectorGraph, cluster: &UfCluster, s: &Syndrome, support: &[u8]) -> Result<Peeled> {
    if !cluster.valid {
        return Err(LabError::Contract(format!("peeling invalid cluster {}", cluster.id)));
    }
    let mut in_cluster = BTreeMap::new();
    for (i, &v) in cluster.nodes.iter().enumerate() {
        in_cluster.insert(v, i);
    }
    let k = cluster.nodes.len();
    // Local index k stands for the virtual boundary root.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; k];
    let mut seen = vec![false; k];
    let mut order = Vec::with_capacity(k);
    let mut queue = VecDeque::new();
    let mut forest_edges = 0;
    let boundary_root = cluster.touches_boundary;
    if boundary_root {
        for (i, &v) in cluster.nodes.iter().enumerate() {
            for &(w, e) in g.neighbors(v) {
                if g.is_boundary(w) && support[e] >= 2 && !seen[i] {
                    seen[i] = true;
                    parent[i] = Some((k, e));
                    forest_edges += 1;
                    queue.push_back(i);
                }
            }
        }
    }
    let mut start = 0;
    loop {
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(w, e) in g.neighbors(cluster.nodes[i]) {
                if support[e] < 2 {
                    continue;
                }
                if let Some(&j) = in_cluster.get(&w) {
                    if !seen[j] {
                        seen[j] = true;
                        parent[j] = Some((i, e));
                        forest_edges += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        while start < k && seen[start] {
            start += 1;
        }
        if start == k {
            break;
        }
        seen[start] = true;
        queue.push_back(start);
    }

    let mut pending: Vec<Option<usize>> = vec![None; k + 1];
    for &a in &s.active {
        if let Some(&i) = in_cluster.get(&a) {
            pending[i] = Some(a);
        }
    }
    let mut corr = Correction::default();
    for &i in order.iter().rev() {
        let Some(origin) = pending[i] else { continue };
        let Some((p, e)) = parent[i] else { continue };
        corr.edges.push(e);
        pending[i] = None;
        if p == k {
            corr.pairs.push((origin, g.edges[e].v));
        } else if let Some(other) = pending[p].take() {
            corr.pairs.push((other.min(origin), other.max(origin)));
        } else {
            pending[p] = Some(origin);
        }
    }
    if let Some(i) = (0..k).find(|&i| pending[i].is_some()) {
        return Err(LabError::Contract(format!(
            "peeling left node {} of cluster {} unmatched",
            cluster.nodes[i], cluster.id
        )));
    }
    corr.edges.sort_unstable();
    corr.pairs.sort_unstable();
    Ok(Peeled { correction: corr, forest_edges })
}

/// Order in which equal-distance candidate pairs are matched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum TieRule {
    #[default]
    LowestIndex,
    HighestIndex,
}

/// Greedy closest-pair matching by unit-weight shortest paths. Paths never
/// pass through a boundary node.
pub fn greedy_decode(g: &DetectorGraph, s: &Syndrome) -> Correction {
    greedy_decode_with(g, s, TieRule::LowestIndex)
}

pub fn greedy_decode_with(g: &DetectorGraph, s: &Syndrome, tie: TieRule) -> Correction {
    let actives = &s.active;
    let mut trees = Vec::with_capacity(actives.len());
    let mut candidates: Vec<(u32, usize, usize)> = Vec::new();
    for (i, &a) in actives.iter().enumerate() {
        let (dist, parent) = g.node_distances(a, false);
        for &b in &actives[i + 1..] {
            if dist[b] != u32::MAX {
                candidates.push((dist[b], a, b));
            }
        }
        if let Some(bn) = g.boundary_nodes().filter(|&bn| dist[bn] != u32::MAX).min_by_key(|&bn| (dist[bn], bn)) {
            candidates.push((dist[bn], a, bn));
        }
        trees.push(parent);
    }
    match tie {
        TieRule::LowestIndex => candidates.sort_unstable(),
        TieRule::HighestIndex => {
            candidates.sort_unstable_by(|x, y| x.0.cmp(&y.0).then((y.1, y.2).cmp(&(x.1, x.2))))
        }
    }
    let index_of = |v: usize| actives.binary_search(&v).ok();
    let mut matched = vec![false; actives.len()];
    let mut corr = Correction::default();
    for (_, a, b) in candidates {
        let ia = index_of(a).unwrap();
        let ib = index_of(b);
        if matched[ia] || ib.is_some_and(|ib| matched[ib]) {
            continue;
        }
        matched[ia] = true;
        if let Some(ib) = ib {
            matched[ib] = true;
        }
        let parent = &trees[ia];
        let mut v = b;
        while v != a {
            let e = parent[v];
            corr.edges.push(e);
            v = g.edges[e].other(v);
        }
        corr.pairs.push((a, b));
    }
    corr.edges = xor_reduce(corr.edges);
    corr
}

/// Whether the corrected logical Z readout is flipped. The correction must
/// annihilate the shot's syndrome on the Z-detecting graph.
pub fn logical_flip(g: &DetectorGraph, code: &SurfaceCode, shot: &ShotOutcome, corr: &Correction) -> Result<bool> {
    let s = Syndrome::from_outcome(g, shot);
    check_annihilates(g, &s, corr)?;
    Ok(shot.logical_z_flipped(code) ^ g.edges_flip_observable(&corr.edges))
}

pub fn check_annihilates(g: &DetectorGraph, s: &Syndrome, corr: &Correction) -> Result<()> {
    if g.syndrome_of_edges(&corr.edges) != s.active {
        return Err(LabError::Contract("correction does not annihilate the syndrome".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DecoderKind {
    UnionFind,
    Greedy,
}

impl DecoderKind {
    pub fn decode(self, g: &DetectorGraph, s: &Syndrome) -> Result<Correction> {
        match self {
            DecoderKind::UnionFind => uf_correct(g, s),
            DecoderKind::Greedy => Ok(greedy_decode(g, s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_syndrome_circuit;
    use crate::detector_graph::{build_detector_graph, ErrorType};
    use crate::lattice::build_surface_code;

    fn graph(d: usize) -> DetectorGraph {
        let code = build_surface_code(d).unwrap();
        build_detector_graph(&build_syndrome_circuit(&code, d).unwrap(), ErrorType::ZDetecting).unwrap()
    }

    #[test]
    fn empty_syndrome() {
        let g = graph(3);
        let (c, t) = uf_decode(&g, &Syndrome::default()).unwrap();
        assert!(c.edges.is_empty());
        assert_eq!(t.num_rounds(), 0);
        assert!(greedy_decode(&g, &Syndrome::default()).edges.is_empty());
    }

    #[test]
    fn single_interior_edge() {
        let g = graph(3);
        let e = g.edges.iter().find(|e| !g.is_boundary(e.v)).unwrap();
        let s = Syndrome::from_edges(&g, &[e.id]);
        let (c, t) = uf_decode(&g, &s).unwrap();
        assert_eq!(c.edges, vec![e.id]);
        assert_eq!(c.pairs, vec![(e.u, e.v)]);
        assert_eq!(t.num_rounds(), 1);
        assert_eq!(greedy_decode(&g, &s).edges, vec![e.id]);
    }

    #[test]
    fn every_single_edge_is_annihilated() {
        let g = graph(3);
        for e in 0..g.edges.len() {
            let s = Syndrome::from_edges(&g, &[e]);
            let (c, _) = uf_decode(&g, &s).unwrap();
            check_annihilates(&g, &s, &c).unwrap();
            assert_eq!(g.edges_flip_observable(&c.edges), g.edges[e].flips_observable, "edge {e}");
            let c = greedy_decode(&g, &s);
            check_annihilates(&g, &s, &c).unwrap();
        }
    }

    #[test]
    fn peel_rejects_invalid_cluster() {
        let g = graph(3);
        let cluster = UfCluster {
            id: 0,
            nodes: vec![0],
            coverage: vec![],
            odd: true,
            touches_boundary: false,
            valid: false,
        };
        let s = Syndrome::new(&g, vec![0]).unwrap();
        assert!(matches!(peel_cluster(&g, &cluster, &s), Err(LabError::Contract(_))));
    }
}
