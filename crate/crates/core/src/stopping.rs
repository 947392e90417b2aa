//! Replays a union-find trace against a clustered decomposition and checks
//! the stopping behaviour of extended clusters: merge order, margin and
//! growth duration per level.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::circuit::RandomStream;
use crate::clustering::{decompose_clustered, ClusterDecomposition, ScaleSchedule};
use crate::decoders::{uf_decode, DecodeTrace, Syndrome};
use crate::experiments::{cell_seed, MemorySetup};
use crate::detector_graph::DetectorGraph;
use crate::error::{param, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LevelStats {
    pub k: usize,
    /// Largest distance from a frontier point of an extended cluster to the
    /// nearest active detector of its top-level error clusters.
    pub max_margin_boundary: f64,
    /// Largest distance from such an active detector to the nearest
    /// frontier point of its extended cluster.
    pub max_margin_detector: f64,
    pub margin_bound: f64,
    /// Latest round in which an extended cluster of this level grew.
    pub max_growth_round: usize,
    pub growth_bound: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StoppingReport {
    pub merge_order_violations: usize,
    pub margin_violations: usize,
    pub growth_violations: usize,
    pub levels: Vec<LevelStats>,
    /// Descriptions of the first few violations.
    pub notes: Vec<String>,
}

const MAX_NOTES: usize = 8;

impl StoppingReport {
    pub fn ok(&self) -> bool {
        self.merge_order_violations == 0 && self.margin_violations == 0 && self.growth_violations == 0
    }

    pub fn violations(&self) -> usize {
        self.merge_order_violations + self.margin_violations + self.growth_violations
    }

    fn note(&mut self, msg: String) {
        if self.notes.len() < MAX_NOTES {
            self.notes.push(msg);
        }
    }

    fn level(&mut self, k: usize, s: &ScaleSchedule) -> &mut LevelStats {
        while self.levels.len() < k {
            let j = self.levels.len() + 1;
            let d = s.d(j);
            let f = s.f_k(j).unwrap_or(f64::NAN);
            self.levels.push(LevelStats {
                k: j,
                margin_bound: (d + 1.0) / (2.0 * f),
                growth_bound: d + 1.0,
                ..Default::default()
            });
        }
        &mut self.levels[k - 1]
    }

    /// Folds another shot's report into this one.
    pub fn absorb(&mut self, other: &StoppingReport) {
        self.merge_order_violations += other.merge_order_violations;
        self.margin_violations += other.margin_violations;
        self.growth_violations += other.growth_violations;
        for note in &other.notes {
            self.note(note.clone());
        }
        for l in &other.levels {
            if self.levels.len() < l.k {
                self.levels.resize(l.k, LevelStats::default());
            }
            let mine = &mut self.levels[l.k - 1];
            mine.k = l.k;
            mine.margin_bound = l.margin_bound;
            mine.growth_bound = l.growth_bound;
            mine.max_margin_boundary = mine.max_margin_boundary.max(l.max_margin_boundary);
            mine.max_margin_detector = mine.max_margin_detector.max(l.max_margin_detector);
            mine.max_growth_round = mine.max_growth_round.max(l.max_growth_round);
            mine.samples += l.samples;
        }
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Extended-cluster partition at one instant: class id per present item.
struct Partition {
    class_of: Vec<Option<usize>>,
    classes: Vec<Vec<usize>>,
}

struct Replay<'a> {
    g: &'a DetectorGraph,
    n_nodes: usize,
    /// Error cluster items and level.
    error_items: Vec<(usize, Vec<usize>)>,
    /// Level-carrying error cluster ids per item.
    item_clusters: Vec<Vec<usize>>,
    active: Vec<bool>,
}

impl<'a> Replay<'a> {
    fn half(&self, e: usize, side: usize) -> usize {
        self.n_nodes + 2 * e + side
    }

    fn items(&self) -> usize {
        self.n_nodes + 2 * self.g.edges.len()
    }

    fn partition(&self, uf: &[Vec<usize>], covered: &[Option<usize>]) -> Partition {
        let n = self.items();
        let mut dsu = Dsu((0..n).collect());
        let mut present = vec![false; n];
        for nodes in uf {
            for &v in nodes {
                present[v] = true;
                dsu.union(nodes[0], v);
            }
        }
        for (item, from) in covered.iter().enumerate() {
            if let Some(v) = *from {
                present[item] = true;
                dsu.union(item, v);
            }
        }
        for (_, items) in &self.error_items {
            for &it in items {
                present[it] = true;
                dsu.union(items[0], it);
            }
        }
        let mut class_of = vec![None; n];
        let mut ids = BTreeMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for it in 0..n {
            if !present[it] {
                continue;
            }
            let root = dsu.find(it);
            let id = *ids.entry(root).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            class_of[it] = Some(id);
            classes[id].push(it);
        }
        Partition { class_of, classes }
    }

    fn level_of(&self, class: &[usize]) -> usize {
        class
            .iter()
            .flat_map(|&it| self.item_clusters[it].iter())
            .map(|&c| self.error_items[c].0)
            .max()
            .unwrap_or(0)
    }

    /// Active detectors belonging to the class's level-`k` error clusters.
    fn top_actives(&self, class: &[usize], k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = class
            .iter()
            .filter(|&&it| it < self.n_nodes && self.active[it])
            .filter(|&&it| self.item_clusters[it].iter().any(|&c| self.error_items[c].0 == k))
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn bfs(&self, sources: &[usize]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n_nodes];
        let mut q = VecDeque::new();
        for &s in sources {
            dist[s] = 0.0;
            q.push_back(s);
        }
        while let Some(v) = q.pop_front() {
            if self.g.is_boundary(v) {
                continue;
            }
            for &(w, _) in self.g.neighbors(v) {
                if dist[w].is_infinite() {
                    dist[w] = dist[v] + 1.0;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// Point distances of a class: nodes at their distance, half-edges at
    /// their midpoint.
    fn point_distances(&self, class: &[usize], dist: &[f64]) -> Vec<f64> {
        class
            .iter()
            .map(|&it| {
                if it < self.n_nodes {
                    dist[it]
                } else {
                    let e = &self.g.edges[(it - self.n_nodes) / 2];
                    dist[e.u].min(dist[e.v]) + 0.5
                }
            })
            .collect()
    }

    /// Frontier of a class: midpoints of half-covered edges and nodes with an
    /// untouched incident edge.
    fn frontier(&self, class: &[usize], in_class: &[bool]) -> Vec<usize> {
        let mut out = Vec::new();
        for &it in class {
            if it < self.n_nodes {
                let open = self.g.neighbors(it).iter().any(|&(_, e)| {
                    !in_class[self.half(e, 0)] && !in_class[self.half(e, 1)]
                });
                if open {
                    out.push(it);
                }
            } else {
                let rel = it - self.n_nodes;
                let sibling = self.n_nodes + (rel ^ 1);
                if !in_class[sibling] {
                    out.push(it);
                }
            }
        }
        out
    }
}

/// Checks one decoded shot. `trace` must come from decoding `s`, and `decomp`
/// from the error edges that produced `s`.
pub fn verify_stopping_guarantee(
    g: &DetectorGraph,
    s: &Syndrome,
    trace: &DecodeTrace,
    decomp: &ClusterDecomposition,
    schedule: &ScaleSchedule,
) -> Result<StoppingReport> {
    if g.syndrome_of_edges(decomp.n_k(0)) != s.active {
        return Err(param("decomposition does not match the syndrome"));
    }
    let mut initial_active: Vec<usize> = trace.initial.iter().flat_map(|c| c.nodes.iter().copied()).collect();
    initial_active.sort_unstable();
    if initial_active != s.active {
        return Err(param("trace does not match the syndrome"));
    }
    let n_nodes = g.nodes.len();
    let mut replay = Replay {
        g,
        n_nodes,
        error_items: Vec::new(),
        item_clusters: vec![Vec::new(); n_nodes + 2 * g.edges.len()],
        active: vec![false; n_nodes],
    };
    for &a in &s.active {
        replay.active[a] = true;
    }
    for cluster in decomp.clusters() {
        let mut items = Vec::new();
        for &e in &cluster.edges {
            let edge = &g.edges[e];
            items.push(replay.half(e, 0));
            items.push(replay.half(e, 1));
            for v in [edge.u, edge.v] {
                if !g.is_boundary(v) {
                    items.push(v);
                }
            }
        }
        items.sort_unstable();
        items.dedup();
        let id = replay.error_items.len();
        for &it in &items {
            replay.item_clusters[it].push(id);
        }
        replay.error_items.push((cluster.level, items));
    }

    let mut report = StoppingReport::default();
    let mut covered: Vec<Option<usize>> = vec![None; replay.items()];
    let mut uf: Vec<Vec<usize>> = trace.initial.iter().map(|c| c.nodes.clone()).collect();
    let mut prev = replay.partition(&uf, &covered);
    measure_margins(&replay, &prev, 0, schedule, &mut report);

    for rec in &trace.rounds {
        let t = rec.round;
        // Classes of the previous instant that grow this round.
        let mut growing_class = vec![false; prev.classes.len()];
        for snap in &uf {
            if rec.grew.iter().any(|id| snap.contains(id)) {
                if let Some(c) = prev.class_of[snap[0]] {
                    growing_class[c] = true;
                }
            }
        }
        let levels: Vec<usize> = prev.classes.iter().map(|c| replay.level_of(c)).collect();
        for (c, &grows) in growing_class.iter().enumerate() {
            let k = levels[c];
            if !grows || k == 0 {
                continue;
            }
            let stats = report.level(k, schedule);
            stats.max_growth_round = stats.max_growth_round.max(t);
            if t as f64 > stats.growth_bound + 1e-9 {
                let bound = stats.growth_bound;
                report.growth_violations += 1;
                report.note(format!("level-{k} extended cluster still growing at round {t} > {bound:.3}"));
            }
        }

        for &(e, from) in &rec.grown {
            let edge = &g.edges[e];
            let near = usize::from(from != edge.u);
            let first = replay.half(e, near);
            let second = replay.half(e, 1 - near);
            if covered[first].is_none() {
                covered[first] = Some(from);
            } else if covered[second].is_none() {
                covered[second] = Some(from);
            }
        }
        uf = rec.clusters.iter().map(|c| c.nodes.clone()).collect();
        let next = replay.partition(&uf, &covered);

        let mut parts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, members) in prev.classes.iter().enumerate() {
            if let Some(nc) = next.class_of[members[0]] {
                parts.entry(nc).or_default().push(c);
            }
        }
        for group in parts.values().filter(|g| g.len() > 1) {
            for &a in group {
                let ka = levels[a];
                if ka == 0 || !growing_class[a] {
                    continue;
                }
                if let Some(&b) = group.iter().find(|&&b| b != a && levels[b] >= ka) {
                    report.merge_order_violations += 1;
                    let kb = levels[b];
                    report.note(format!("round {t}: growing level-{ka} extended cluster merged with level-{kb}"));
                }
            }
        }
        measure_margins(&replay, &next, t, schedule, &mut report);
        prev = next;
    }
    Ok(report)
}

fn measure_margins(replay: &Replay, part: &Partition, t: usize, schedule: &ScaleSchedule, report: &mut StoppingReport) {
    let mut in_class = vec![false; replay.items()];
    for class in &part.classes {
        let k = replay.level_of(class);
        if k == 0 {
            continue;
        }
        let actives = replay.top_actives(class, k);
        if actives.is_empty() {
            continue;
        }
        for &it in class {
            in_class[it] = true;
        }
        let frontier = replay.frontier(class, &in_class);
        let dist = replay.bfs(&actives);
        let boundary_reading = replay.point_distances(&frontier, &dist).into_iter().fold(0.0, f64::max);
        let mut detector_reading: f64 = 0.0;
        if !frontier.is_empty() {
            for &a in &actives {
                let da = replay.bfs(&[a]);
                let nearest = replay.point_distances(&frontier, &da).into_iter().fold(f64::INFINITY, f64::min);
                detector_reading = detector_reading.max(nearest);
            }
        }
        for &it in class {
            in_class[it] = false;
        }
        let stats = report.level(k, schedule);
        stats.samples += 1;
        stats.max_margin_boundary = stats.max_margin_boundary.max(boundary_reading);
        stats.max_margin_detector = stats.max_margin_detector.max(detector_reading);
        let bound = stats.margin_bound;
        let margin = boundary_reading.max(detector_reading);
        if margin > bound + 1e-9 {
            report.margin_violations += 1;
            report.note(format!("round {t}: level-{k} margin {margin} exceeds {bound:.3}"));
        }
    }
}

/// Stopping-guarantee checks aggregated over sampled shots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingSummary {
    pub d: usize,
    pub p: f64,
    pub shots: u64,
    pub seed: u64,
    /// Shots by highest nonempty cluster level.
    pub level_histogram: Vec<usize>,
    pub report: StoppingReport,
}

pub fn run_stopping_experiment(
    setup: &MemorySetup,
    p: f64,
    shots: u64,
    seed: u64,
    schedule: &ScaleSchedule,
) -> Result<StoppingSummary> {
    let g = &setup.graph;
    let stream_seed = cell_seed(seed, g.d, p);
    let mut report = StoppingReport::default();
    let mut level_histogram = Vec::new();
    for shot in 0..shots {
        let mut stream = RandomStream::for_shot(stream_seed, shot);
        let faults = setup.circuit.sample_faults(p, &mut stream)?;
        let (edges, _) = g.fault_set_edges(&faults);
        let s = Syndrome::from_edges(g, &edges);
        let (_, trace) = uf_decode(g, &s)?;
        let decomp = decompose_clustered(g, &edges, schedule)?;
        let top = decomp.max_level();
        if level_histogram.len() <= top {
            level_histogram.resize(top + 1, 0);
        }
        level_histogram[top] += 1;
        report.absorb(&verify_stopping_guarantee(g, &s, &trace, &decomp, schedule)?);
    }
    Ok(StoppingSummary { d: g.d, p, shots, seed, level_histogram, report })
}
