//! Scale schedules, level-k clustered and isolated decompositions, the
//! clustering probability bound and the closed-form threshold.
//!
//! Level `k` uses `(d_k, b_k)` on the set that survived level `k - 1`, with
//! `N_0 = N`; an edge in `N_k` has survived `k` rounds of removal.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::detector_graph::{DetectorGraph, UNREACHABLE};
use crate::error::{param, LabError, Result};

pub const MAX_LEVEL: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    /// `f(k) = k ln k`
    UnionFind,
    /// `f(k) = k`
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ScaleSchedule {
    Family { family: Family, beta: f64, gamma: f64, lambda: f64 },
    /// Literal `(b_k, d_k)` tables for `k = 1..=len`; later levels are
    /// unbounded.
    Explicit { b: Vec<f64>, d: Vec<f64> },
}

fn ln_1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(a + b)` from `ln a`, `ln b`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl ScaleSchedule {
    pub fn uf(beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        Self::family(Family::UnionFind, beta, gamma, lambda)
    }

    pub fn greedy(beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        Self::family(Family::Greedy, beta, gamma, lambda)
    }

    fn family(family: Family, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(beta > 0.0 && gamma > 0.0 && lambda > 1.0) || ![beta, gamma, lambda].iter().all(|x| x.is_finite()) {
            return Err(param(format!("need beta, gamma > 0 and lambda > 1, got ({beta}, {gamma}, {lambda})")));
        }
        Ok(ScaleSchedule::Family { family, beta, gamma, lambda })
    }

    pub fn explicit(b: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if b.len() != d.len() || b.is_empty() {
            return Err(param("explicit schedule needs equal, nonempty b and d tables"));
        }
        for (k, (&bk, &dk)) in b.iter().zip(&d).enumerate() {
            if !(bk >= dk && dk > 0.0) {
                return Err(param(format!("level {}: need b_k >= d_k > 0", k + 1)));
            }
        }
        Ok(ScaleSchedule::Explicit { b, d })
    }

    pub fn family_kind(&self) -> Option<Family> {
        match self {
            ScaleSchedule::Family { family, .. } => Some(*family),
            ScaleSchedule::Explicit { .. } => None,
        }
    }

    /// The exponent function `f(k)`.
    pub fn exponent(&self, k: usize) -> f64 {
        let k = k as f64;
        match self.family_kind() {
            Some(Family::UnionFind) if k > 0.0 => k * k.ln(),
            Some(Family::UnionFind) => 0.0,
            _ => k,
        }
    }

    /// `ln(d_k + 1)`
    pub fn ln_d_plus1(&self, k: usize) -> f64 {
        match self {
            ScaleSchedule::Family { gamma, lambda, .. } => gamma.ln() + self.exponent(k) * lambda.ln(),
            ScaleSchedule::Explicit { d, .. } => d.get(k - 1).map_or(f64::INFINITY, |x| (x + 1.0).ln()),
        }
    }

    /// `ln(b_k - 1)`
    pub fn ln_b_minus1(&self, k: usize) -> f64 {
        match self {
            ScaleSchedule::Family { beta, lambda, .. } => beta.ln() + self.exponent(k + 1) * lambda.ln(),
            ScaleSchedule::Explicit { b, .. } => b.get(k - 1).map_or(f64::INFINITY, |x| (x - 1.0).ln()),
        }
    }

    /// `ln d_k`; `NaN` when `d_k <= 0`.
    pub fn ln_d(&self, k: usize) -> f64 {
        let x = self.ln_d_plus1(k);
        if x.is_infinite() {
            return x;
        }
        if x <= 0.0 {
            return f64::NAN;
        }
        x + (-(-x).exp()).ln_1p()
    }

    pub fn ln_b(&self, k: usize) -> f64 {
        let x = self.ln_b_minus1(k);
        if x.is_infinite() {
            return x;
        }
        ln_1p_exp(x)
    }

    /// `d_k`, infinite when beyond double range or past an explicit table.
    pub fn d(&self, k: usize) -> f64 {
        match self {
            ScaleSchedule::Explicit { d, .. } => d.get(k - 1).copied().unwrap_or(f64::INFINITY),
            _ => self.ln_d_plus1(k).exp() - 1.0,
        }
    }

    pub fn b(&self, k: usize) -> f64 {
        match self {
            ScaleSchedule::Explicit { b, .. } => b.get(k - 1).copied().unwrap_or(f64::INFINITY),
            _ => self.ln_b_minus1(k).exp() + 1.0,
        }
    }

    /// Number of tabulated levels, `None` for the closed-form families.
    pub fn table_len(&self) -> Option<usize> {
        match self {
            ScaleSchedule::Explicit { b, .. } => Some(b.len()),
            _ => None,
        }
    }

    /// `(f+1)(d+1) / [(f+1)(d+1/2) + f(b-1)]` for level `k`.
    fn stopping_term(&self, k: usize, f: f64) -> f64 {
        let ln_d1 = self.ln_d_plus1(k);
        let ratio = (self.ln_b_minus1(k) - ln_d1).exp();
        let half = 0.5 * (-ln_d1).exp();
        (f + 1.0) / ((f + 1.0) * (1.0 - half) + f * ratio)
    }

    /// `f_1, ..., f_kmax` (index 0 holds `f_1`).
    pub fn f_sequence(&self, kmax: usize) -> Vec<f64> {
        let mut fs: Vec<f64> = Vec::with_capacity(kmax);
        let mut acc = 0.0;
        for k in 1..=kmax {
            let f = 1.0 - acc;
            fs.push(f);
            acc += self.stopping_term(k, f);
        }
        fs
    }

    pub fn f_k(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(param("f_k is defined for k >= 1"));
        }
        Ok(self.f_sequence(k)[k - 1])
    }

    /// Series constant `c` with `sum_j f(k-j+1) 2^j = c 2^k + o(2^k)`.
    pub fn series_constant(&self) -> Option<f64> {
        match self.family_kind()? {
            Family::UnionFind => Some(series_constant_uf()),
            Family::Greedy => Some(3.0),
        }
    }
}

/// `c = sum_{n >= 2} n ln n / 2^(n-1)`.
pub fn series_constant_uf() -> f64 {
    let mut sum = 0.0;
    for n in 2..200 {
        let nf = n as f64;
        let term = nf * nf.ln() / 2f64.powi(n - 1);
        sum += term;
        if term < 1e-18 {
            break;
        }
    }
    sum
}

/// Riemann zeta for `s > 1`: partial sum plus Euler-Maclaurin tail.
pub fn zeta(s: f64) -> Result<f64> {
    if s.is_nan() || s <= 1.0 {
        return Err(param(format!("zeta needs s > 1, got {s}")));
    }
    let n = 1000usize;
    let mut sum = 0.0;
    for k in (1..n).rev() {
        sum += (k as f64).powf(-s);
    }
    let nf = n as f64;
    let tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s / 12.0 * nf.powf(-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * nf.powf(-s - 3.0);
    Ok(sum + tail)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub ok: bool,
}

fn check(out: &mut Vec<ConstraintCheck>, name: &str, ok: bool) {
    out.push(ConstraintCheck { name: name.to_string(), ok });
}

/// Levels over which per-level constraints are checked.
pub const CONSTRAINT_LEVELS: usize = 50;

pub fn check_constraints(s: &ScaleSchedule) -> Vec<ConstraintCheck> {
    let mut out = Vec::new();
    let levels = s.table_len().unwrap_or(CONSTRAINT_LEVELS);
    let ks = 1..=levels;
    check(&mut out, "b_k >= d_k > 0", ks.clone().all(|k| s.ln_b(k) >= s.ln_d(k) && s.ln_d_plus1(k) > 0.0));
    check(
        &mut out,
        "d_{k+1} >= 2(d_k + b_k)",
        (1..levels).all(|k| s.ln_d(k + 1) >= 2f64.ln() + log_add(s.ln_d(k), s.ln_b(k)) - 1e-12),
    );
    check(&mut out, "d_k >= 1", ks.clone().all(|k| s.ln_d_plus1(k) >= 2f64.ln()));
    match s {
        ScaleSchedule::Family { family: Family::UnionFind, beta, gamma, lambda } => {
            let fs = s.f_sequence(levels);
            check(
                &mut out,
                "f_k > (d_k+1)/(b_k-1) > 0",
                ks.clone().all(|k| fs[k - 1] > (s.ln_d_plus1(k) - s.ln_b_minus1(k)).exp()),
            );
            check(&mut out, "lambda > e", *lambda > std::f64::consts::E);
            let z = zeta(lambda.ln()).map(|z| 8.0 * gamma / beta * (z - 1.0) <= 1.0).unwrap_or(false);
            check(&mut out, "(8 gamma / beta)[zeta(ln lambda) - 1] <= 1", z);
            check(&mut out, "beta lambda > 2 gamma", beta * lambda > 2.0 * gamma);
            check(
                &mut out,
                "gamma >= 2 gamma / lambda + 2 beta + lambda^(-2 ln 2)",
                *gamma >= 2.0 * gamma / lambda + 2.0 * beta + lambda.powf(-2.0 * 2f64.ln()),
            );
            check(&mut out, "gamma lambda >= 2", gamma * lambda >= 2.0);
        }
        ScaleSchedule::Family { family: Family::Greedy, beta, gamma, lambda } => {
            check(&mut out, "b_k - 1 > d_k + 1", ks.clone().all(|k| s.ln_b_minus1(k) > s.ln_d_plus1(k)));
            check(&mut out, "gamma lambda >= 2", gamma * lambda >= 2.0);
            check(&mut out, "beta lambda > gamma", beta * lambda > *gamma);
            check(
                &mut out,
                "gamma lambda - 1/lambda >= 2(gamma + 2 beta lambda)",
                gamma * lambda - 1.0 / lambda >= 2.0 * (gamma + 2.0 * beta * lambda),
            );
        }
        ScaleSchedule::Explicit { .. } => {
            let fs = s.f_sequence(levels);
            check(
                &mut out,
                "f_k > (d_k+1)/(b_k-1) > 0",
                ks.clone().all(|k| fs[k - 1] > (s.ln_d_plus1(k) - s.ln_b_minus1(k)).exp()),
            );
        }
    }
    out
}

/// Natural log of the clustering bound
/// `p~^(2^k) prod_j [Lambda (b_{k-j} + d_{k-j}/2)^Delta]^(2^j)` with
/// `p~ = xi p`.
pub fn ln_p_k_bound(k: usize, p: f64, xi: f64, big_lambda: f64, delta: f64, s: &ScaleSchedule) -> Result<f64> {
    if k == 0 {
        return Err(param("p_k bound needs k >= 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(param(format!("rate must lie in (0, 1], got {p}")));
    }
    let mut total = 2f64.powi(k as i32) * (xi * p).ln();
    for j in 0..k {
        let lvl = k - j;
        let ln_size = log_add(s.ln_b(lvl), s.ln_d(lvl) - 2f64.ln());
        total += 2f64.powi(j as i32) * (big_lambda.ln() + delta * ln_size);
    }
    Ok(total)
}

/// `log10` of the clustering bound.
pub fn p_k_bound(k: usize, p: f64, xi: f64, big_lambda: f64, delta: f64, s: &ScaleSchedule) -> Result<f64> {
    Ok(ln_p_k_bound(k, p, xi, big_lambda, delta, s)? / std::f64::consts::LN_10)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub family: Family,
    pub p_th: Option<f64>,
    pub log10_p_th: Option<f64>,
    pub c: f64,
    pub constraints: Vec<ConstraintCheck>,
    pub constraints_ok: bool,
    pub xi: f64,
    pub big_lambda: f64,
    pub delta: f64,
    /// Supremum `log_lambda 2` of the admissible exponents `eta`.
    pub eta_sup: f64,
    #[serde(skip)]
    schedule: ScaleSchedule,
}

pub fn analytical_threshold(xi: f64, big_lambda: f64, delta: f64, s: &ScaleSchedule) -> Result<ThresholdReport> {
    let ScaleSchedule::Family { family, beta, gamma, lambda } = *s else {
        return Err(param("analytical threshold needs a parametric schedule"));
    };
    if !(xi > 0.0 && big_lambda > 0.0 && delta > 0.0) {
        return Err(param("xi, Lambda and Delta must be positive"));
    }
    let c = s.series_constant().unwrap();
    let constraints = check_constraints(s);
    let constraints_ok = constraints.iter().all(|c| c.ok);
    let ln_p = -(xi.ln()
        + big_lambda.ln()
        + c * delta * lambda.ln()
        + delta * (beta + (gamma + lambda.powf(-s.exponent(1))) / 2.0).ln());
    let (p_th, log10_p_th) = if constraints_ok {
        (Some(ln_p.exp()), Some(ln_p / std::f64::consts::LN_10))
    } else {
        (None, None)
    };
    Ok(ThresholdReport {
        family,
        p_th,
        log10_p_th,
        c,
        constraints,
        constraints_ok,
        xi,
        big_lambda,
        delta,
        eta_sup: 2f64.ln() / lambda.ln(),
        schedule: s.clone(),
    })
}

impl ThresholdReport {
    /// Largest level whose extended clusters provably stay below distance `d`.
    pub fn k0(&self, d: usize) -> usize {
        k0(&self.schedule, d)
    }

    pub fn k_bar(&self, d: usize, p: f64) -> Option<usize> {
        k_bar(d, p, self.p_th?)
    }
}

pub fn k0(s: &ScaleSchedule, d: usize) -> usize {
    let d = d as f64;
    let fs = s.f_sequence(CONSTRAINT_LEVELS);
    let mut best = 0;
    for k in 1..=CONSTRAINT_LEVELS {
        let dk = s.d(k);
        let reach = match s.family_kind() {
            Some(Family::Greedy) => dk + 1.0,
            _ => dk + (dk + 1.0) / fs[k - 1] + 1.0,
        };
        if reach < d {
            best = k;
        } else {
            break;
        }
    }
    best
}

/// `max { k : d^3 (p / p_th)^(2^k) >= 1 }`; `None` when `p >= p_th`.
pub fn k_bar(d: usize, p: f64, p_th: f64) -> Option<usize> {
    if p >= p_th {
        return None;
    }
    let budget = 3.0 * (d as f64).ln();
    let per = (p_th / p).ln();
    let mut k = 0usize;
    while 2f64.powi(k as i32 + 1) * per <= budget {
        k += 1;
    }
    Some(k)
}

/// Edge distances for the decomposition machinery.
pub trait EdgeMetric {
    fn num_edges(&self) -> usize;
    /// Line-graph distance, `usize::MAX` when disconnected.
    fn dist(&self, a: usize, b: usize) -> usize;
}

impl EdgeMetric for DetectorGraph {
    fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn dist(&self, a: usize, b: usize) -> usize {
        match self.line_distances(a)[b] {
            UNREACHABLE => usize::MAX,
            x => x as usize,
        }
    }
}

/// Small explicit graph with all-pairs line-graph distances.
#[derive(Clone, Debug)]
pub struct ToyGraph {
    pub edges: Vec<(usize, usize)>,
    dist: Vec<Vec<usize>>,
}

impl ToyGraph {
    pub fn new(edges: Vec<(usize, usize)>) -> Self {
        let m = edges.len();
        let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            incident.entry(u).or_default().push(i);
            incident.entry(v).or_default().push(i);
        }
        let dist = (0..m)
            .map(|s| {
                let mut d = vec![usize::MAX; m];
                d[s] = 0;
                let mut q = VecDeque::from([s]);
                while let Some(e) = q.pop_front() {
                    for n in [edges[e].0, edges[e].1] {
                        for &f in &incident[&n] {
                            if d[f] == usize::MAX {
                                d[f] = d[e] + 1;
                                q.push_back(f);
                            }
                        }
                    }
                }
                d
            })
            .collect();
        ToyGraph { edges, dist }
    }

    pub fn path(len: usize) -> Self {
        Self::new((0..len).map(|i| (i, i + 1)).collect())
    }
}

impl EdgeMetric for ToyGraph {
    fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn dist(&self, a: usize, b: usize) -> usize {
        self.dist[a][b]
    }
}

fn as_f(d: usize) -> f64 {
    if d == usize::MAX {
        f64::INFINITY
    } else {
        d as f64
    }
}

pub fn diameter(g: &impl EdgeMetric, set: &[usize]) -> usize {
    set.iter().flat_map(|&a| set.iter().map(move |&b| (a, b))).map(|(a, b)| g.dist(a, b)).max().unwrap_or(0)
}

pub fn distance(g: &impl EdgeMetric, a: &[usize], b: &[usize]) -> usize {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).map(|(x, y)| g.dist(x, y)).min().unwrap_or(usize::MAX)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorCluster {
    pub level: usize,
    pub edges: Vec<usize>,
    pub diameter: usize,
    /// Distance to the rest of the level's input set; `None` if it is alone.
    pub separation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterLevel {
    pub k: usize,
    pub d_k: f64,
    pub b_k: f64,
    /// `N_{k-1}`
    pub input: Vec<usize>,
    pub clusters: Vec<ErrorCluster>,
    /// `N_k`
    pub remaining: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterDecomposition {
    pub levels: Vec<ClusterLevel>,
    /// Edges never clustered within the level cap or the schedule table.
    pub residual: Vec<usize>,
    pub hit_level_cap: bool,
}

impl ClusterDecomposition {
    /// `N_k`; `N_0` is the input.
    pub fn n_k(&self, k: usize) -> &[usize] {
        if k == 0 {
            return self.levels.first().map_or(&self.residual, |l| &l.input);
        }
        self.levels.get(k - 1).map_or(&self.residual, |l| &l.remaining)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ErrorCluster> {
        self.levels.iter().flat_map(|l| l.clusters.iter())
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().filter(|l| !l.clusters.is_empty()).map(|l| l.k).max().unwrap_or(0)
    }
}

fn validate_set(g: &impl EdgeMetric, n: &[usize]) -> Result<Vec<usize>> {
    let mut v = n.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&e| e >= g.num_edges()) {
        return Err(LabError::Lookup { kind: "edge", id: bad });
    }
    Ok(v)
}

fn components(g: &impl EdgeMetric, set: &[usize], b: f64) -> Vec<Vec<usize>> {
    let m = set.len();
    let mut comp = vec![usize::MAX; m];
    let mut out = Vec::new();
    for s in 0..m {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        comp[s] = id;
        let mut members = vec![set[s]];
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..m {
                if comp[j] == usize::MAX && as_f(g.dist(set[i], set[j])) <= b {
                    comp[j] = id;
                    members.push(set[j]);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn level_count(s: &ScaleSchedule) -> usize {
    s.table_len().map_or(MAX_LEVEL, |n| n.min(MAX_LEVEL))
}

/// Peels off `(d_k, b_k)`-clusters level by level: connected components
/// under `dist <= b_k`, kept as clusters when their diameter is at most `d_k`.
pub fn decompose_clustered(g: &impl EdgeMetric, n: &[usize], s: &ScaleSchedule) -> Result<ClusterDecomposition> {
    let mut current = validate_set(g, n)?;
    let mut levels = Vec::new();
    let cap = level_count(s);
    for k in 1..=cap {
        if current.is_empty() {
            break;
        }
        let (dk, bk) = (s.d(k), s.b(k));
        if bk < dk {
            return Err(param(format!("level {k}: b_k < d_k")));
        }
        let mut clusters = Vec::new();
        let mut remaining = Vec::new();
        for comp in components(g, &current, bk) {
            let diam = diameter(g, &comp);
            if as_f(diam) <= dk {
                let rest: Vec<usize> = current.iter().copied().filter(|e| comp.binary_search(e).is_err()).collect();
                let separation = (!rest.is_empty()).then(|| distance(g, &comp, &rest));
                clusters.push(ErrorCluster { level: k, edges: comp, diameter: diam, separation });
            } else {
                remaining.extend(comp);
            }
        }
        remaining.sort_unstable();
        levels.push(ClusterLevel { k, d_k: dk, b_k: bk, input: current, clusters, remaining: remaining.clone() });
        current = remaining;
    }
    let hit_level_cap = !current.is_empty() && s.table_len().is_none();
    Ok(ClusterDecomposition { levels, residual: current, hit_level_cap })
}

/// Whether `e` is `(r, R)`-isolated in `set`.
pub fn is_isolated(g: &impl EdgeMetric, e: usize, set: &[usize], r: f64, big_r: f64) -> bool {
    set.iter().all(|&f| {
        let x = as_f(g.dist(e, f));
        !(x > r && x <= big_r)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolatedLevel {
    pub k: usize,
    pub r: f64,
    pub big_r: f64,
    pub input: Vec<usize>,
    pub isolated: Vec<usize>,
    pub remaining: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsolatedDecomposition {
    pub levels: Vec<IsolatedLevel>,
    pub residual: Vec<usize>,
    /// Isolated edges whose ball failed the `(2r, R - r)`-cluster test.
    pub isolation_clustering_violations: usize,
}

impl IsolatedDecomposition {
    pub fn n_k(&self, k: usize) -> &[usize] {
        if k == 0 {
            return self.levels.first().map_or(&self.residual, |l| &l.input);
        }
        self.levels.get(k - 1).map_or(&self.residual, |l| &l.remaining)
    }
}

pub fn decompose_isolated(g: &impl EdgeMetric, n: &[usize], s: &ScaleSchedule) -> Result<IsolatedDecomposition> {
    let mut current = validate_set(g, n)?;
    let mut levels = Vec::new();
    let mut violations = 0;
    for k in 1..=level_count(s) {
        if current.is_empty() {
            break;
        }
        let r = s.d(k) / 2.0;
        let big_r = s.b(k) + r;
        let mut isolated = Vec::new();
        let mut remaining = Vec::new();
        for &e in &current {
            if is_isolated(g, e, &current, r, big_r) {
                isolated.push(e);
                let ball: Vec<usize> = current.iter().copied().filter(|&f| as_f(g.dist(e, f)) <= r).collect();
                let rest: Vec<usize> = current.iter().copied().filter(|f| ball.binary_search(f).is_err()).collect();
                let diam_ok = as_f(diameter(g, &ball)) <= 2.0 * r;
                let sep_ok = rest.is_empty() || as_f(distance(g, &ball, &rest)) > big_r - r;
                if !(diam_ok && sep_ok) {
                    violations += 1;
                }
            } else {
                remaining.push(e);
            }
        }
        levels.push(IsolatedLevel { k, r, big_r, input: current, isolated, remaining: remaining.clone() });
        current = remaining;
    }
    Ok(IsolatedDecomposition { levels, residual: current, isolation_clustering_violations: violations })
}

/// `N_k ⊆ 𝒩_k` at every level present in both decompositions.
pub fn clustered_within_isolated(c: &ClusterDecomposition, i: &IsolatedDecomposition) -> bool {
    let depth = c.levels.len().max(i.levels.len());
    (0..=depth).all(|k| {
        let iso = i.n_k(k);
        c.n_k(k).iter().all(|e| iso.binary_search(e).is_ok())
    })
}

/// Brute-force oracle: `e` is `(D, B)`-clustered in `set` iff some subset
/// containing it has diameter at most `D` and separation above `B`.
pub fn clustered_by_definition(g: &impl EdgeMetric, set: &[usize], e: usize, dd: f64, bb: f64) -> Result<bool> {
    let m = set.len();
    if m > 20 {
        return Err(LabError::Budget(format!("{m} edges exceed the subset enumeration limit")));
    }
    let Some(pos) = set.iter().position(|&x| x == e) else {
        return Ok(false);
    };
    for mask in 0u32..(1 << m) {
        if mask & (1 << pos) == 0 {
            continue;
        }
        let inside: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| set[i]).collect();
        let outside: Vec<usize> = (0..m).filter(|i| mask & (1 << i) == 0).map(|i| set[i]).collect();
        if as_f(diameter(g, &inside)) <= dd && (outside.is_empty() || as_f(distance(g, &inside, &outside)) > bb) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub edge: usize,
    pub k: usize,
    /// Sizes of all inclusion-minimal witnesses.
    pub sizes: Vec<usize>,
    pub count: usize,
    /// Largest distance from `e` over all witness edges.
    pub max_radius: usize,
    /// Accumulated linking radius `sum_{j<=k} (b_j + d_j/2)`.
    pub rho_k: f64,
    /// `d_{k+1} / 2`
    pub containment_radius: f64,
    pub count_bound: f64,
    pub sizes_ok: bool,
    pub containment_ok: bool,
    pub count_ok: bool,
}

impl WitnessReport {
    pub fn ok(&self) -> bool {
        self.sizes_ok && self.containment_ok && self.count_ok
    }
}

/// Enumerates every subset of a toy graph's edges and collects the
/// inclusion-minimal ones that keep `e` in the level-`k` isolated set.
pub fn minimal_witness_check(
    g: &ToyGraph,
    s: &ScaleSchedule,
    e: usize,
    k: usize,
    big_lambda: f64,
    delta: f64,
) -> Result<WitnessReport> {
    let m = g.num_edges();
    if m > 20 {
        return Err(LabError::Budget(format!("{m} edges exceed the 20-edge enumeration limit")));
    }
    if e >= m {
        return Err(LabError::Lookup { kind: "edge", id: e });
    }
    let all: Vec<usize> = (0..m).collect();
    let survives = |mask: u32| -> Result<bool> {
        let set: Vec<usize> = all.iter().copied().filter(|i| mask & (1 << i) != 0).collect();
        if k == 0 {
            return Ok(set.contains(&e));
        }
        let iso = decompose_isolated(g, &set, s)?;
        Ok(iso.n_k(k).contains(&e))
    };
    let full = 1u32 << m;
    let mut good = vec![false; full as usize];
    for mask in 0..full {
        if mask & (1 << e) != 0 {
            good[mask as usize] = survives(mask)?;
        }
    }
    // below[m]: some proper subset is good.
    let mut below = vec![false; full as usize];
    let mut masks: Vec<u32> = (0..full).collect();
    masks.sort_by_key(|x| x.count_ones());
    let mut minimal = Vec::new();
    for &mask in &masks {
        let mut b = false;
        let mut bits = mask;
        while bits != 0 {
            let low = bits & bits.wrapping_neg();
            let sub = (mask ^ low) as usize;
            b |= good[sub] || below[sub];
            bits ^= low;
        }
        below[mask as usize] = b;
        if good[mask as usize] && !b {
            minimal.push(mask);
        }
    }
    let sizes: Vec<usize> = minimal.iter().map(|x| x.count_ones() as usize).collect();
    let max_radius = minimal
        .iter()
        .flat_map(|&mask| (0..m).filter(move |i| mask & (1 << i) != 0))
        .map(|f| g.dist(e, f))
        .max()
        .unwrap_or(0);
    let rho_k: f64 = (1..=k).map(|j| s.b(j) + s.d(j) / 2.0).sum();
    let containment_radius = s.d(k + 1) / 2.0;
    let ln_bound: f64 = (0..k)
        .map(|j| 2f64.powi(j as i32) * (big_lambda.ln() + delta * (s.b(k - j) + s.d(k - j) / 2.0).ln()))
        .sum();
    let count_bound = ln_bound.exp();
    Ok(WitnessReport {
        edge: e,
        k,
        sizes_ok: !sizes.is_empty() && sizes.iter().all(|&x| x == 1 << k),
        containment_ok: max_radius as f64 <= rho_k + 1e-9 && max_radius as f64 <= containment_radius,
        count_ok: minimal.len() as f64 <= count_bound,
        count: minimal.len(),
        sizes,
        max_radius,
        rho_k,
        containment_radius,
        count_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validated() -> ScaleSchedule {
        ScaleSchedule::uf(1.2, 2.8, 107.0).unwrap()
    }

    #[test]
    fn schedule_values() {
        let s = validated();
        assert!((s.d(1) - 1.8).abs() < 1e-12);
        let b1 = 1.2 * 107f64.powf(2.0 * 2f64.ln()) + 1.0;
        assert!((s.b(1) - b1).abs() / b1 < 1e-12);
        assert!((s.ln_b(1) - b1.ln()).abs() < 1e-12);
        assert!((s.ln_d(1) - 1.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn f_sequence_start() {
        let s = validated();
        assert_eq!(s.f_k(1).unwrap(), 1.0);
        let (d1, b1) = (s.d(1), s.b(1));
        let f2 = 1.0 - 2.0 * (d1 + 1.0) / (2.0 * (d1 + 0.5) + (b1 - 1.0));
        assert!((s.f_k(2).unwrap() - f2).abs() < 1e-12);
        assert!((f2 - 0.9929).abs() < 1e-4);
        assert!(s.f_k(0).is_err());
    }

    #[test]
    fn zeta_known_values() {
        assert!((zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
        assert!((zeta(4.0).unwrap() - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-12);
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn log_add_matches_direct() {
        for (a, b) in [(1.0f64, 2.0f64), (1e-3, 5.0), (7.0, 7.0)] {
            assert!((log_add(a.ln(), b.ln()) - (a + b).ln()).abs() < 1e-12);
        }
        assert_eq!(log_add(f64::NEG_INFINITY, 0.5), 0.5);
    }

    #[test]
    fn lambda_at_e_fails() {
        let s = ScaleSchedule::uf(1.2, 2.8, std::f64::consts::E).unwrap();
        let c = check_constraints(&s);
        assert!(!c.iter().find(|c| c.name == "lambda > e").unwrap().ok);
    }

    #[test]
    fn k_bar_edges() {
        assert_eq!(k_bar(7, 1.0, 0.5), None);
        assert_eq!(k_bar(7, 0.1, 1.0), Some(1));
        assert_eq!(k_bar(7, 0.9, 1.0), Some(5));
    }
}
