//! Sparsity graphs, chordal extension and clique covers.

use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Undirected graph on `0..n` with sorted edges `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl PatternGraph {
    /// Builds a graph; duplicate edges (in either direction) are an error.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange { row: a, col: b, n });
            }
            if a == b {
                continue;
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::DuplicateEntry { row: e.0, col: e.1 });
            }
        }
        Ok(Self { n, edges: set.into_iter().collect() })
    }

    /// Builds a graph, silently merging repeated edges.
    pub fn from_edge_union(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let set: BTreeSet<(usize, usize)> =
            edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
        debug_assert!(set.iter().all(|e| e.1 < n));
        Self { n, edges: set.into_iter().collect() }
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edge_union(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let e = (a.min(b), a.max(b));
        self.edges.binary_search(&e).is_ok()
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    pub fn union(&self, other: &PatternGraph) -> PatternGraph {
        Self::from_edge_union(self.n, self.edges.iter().chain(other.edges.iter()).copied())
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Off-diagonal positions where `C` or any `A_i` is nonzero.
pub fn aggregate_pattern(c: &SymMatrix, a: &[SymMatrix]) -> Result<PatternGraph> {
    let n = c.n();
    for (i, m) in a.iter().enumerate() {
        if m.n() != n {
            return Err(Error::DimensionMismatch(format!("A_{} is {}x{}, C is {n}x{n}", i + 1, m.n(), m.n())));
        }
    }
    Ok(PatternGraph::from_edge_union(
        n,
        std::iter::once(c).chain(a.iter()).flat_map(|m| m.off_diagonal_pattern()),
    ))
}

/// Cliques covering every edge of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueCover {
    /// The graph the cliques were computed on (the input plus any fill).
    pub graph: PatternGraph,
    /// Sorted vertex lists, sorted lexicographically.
    pub cliques: Vec<Vec<usize>>,
    /// Whether `cliques` are the maximal cliques of the chordal graph `graph`.
    pub chordal: bool,
    /// Elimination order used to produce the cover (empty when not computed).
    pub order: Vec<usize>,
}

impl CliqueCover {
    /// One clique holding every vertex.
    pub fn single(n: usize) -> Self {
        Self {
            graph: PatternGraph::complete(n),
            cliques: vec![(0..n).collect()],
            chordal: true,
            order: (0..n).collect(),
        }
    }

    /// A cover from explicit cliques; the graph becomes the union of clique
    /// edges. Vertices outside every clique are added as singletons.
    pub fn from_cliques(n: usize, cliques: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut cl: Vec<Vec<usize>> = Vec::new();
        for c in cliques {
            let mut c = c;
            c.sort_unstable();
            c.dedup();
            for &v in &c {
                if v >= n {
                    return Err(Error::IndexOutOfRange { row: v, col: v, n });
                }
                seen[v] = true;
            }
            if !c.is_empty() {
                cl.push(c);
            }
        }
        for (v, s) in seen.iter().enumerate() {
            if !s {
                cl.push(vec![v]);
            }
        }
        cl.sort();
        let graph = clique_graph(n, &cl);
        let chordal = is_chordal(&graph) && same_cliques(&graph, &cl);
        Ok(Self { graph, cliques: cl, chordal, order: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    /// Whether every edge of `g` lies inside some clique.
    pub fn covers(&self, g: &PatternGraph) -> bool {
        g.edges().iter().all(|&(a, b)| self.covering_clique(a, b).is_some())
    }

    /// Lowest-index clique containing both `a` and `b`.
    pub fn covering_clique(&self, a: usize, b: usize) -> Option<usize> {
        self.cliques
            .iter()
            .position(|c| c.binary_search(&a).is_ok() && c.binary_search(&b).is_ok())
    }

    /// Number of cliques containing each vertex.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.n()];
        for c in &self.cliques {
            for &v in c {
                m[v] += 1;
            }
        }
        m
    }

    /// All positions `(i, j)`, `i <= j`, inside some clique, sorted.
    pub fn entries(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for c in &self.cliques {
            for (p, &i) in c.iter().enumerate() {
                for &j in &c[p..] {
                    set.insert((i, j));
                }
            }
        }
        set.into_iter().collect()
    }

    /// `(size, count)` pairs sorted by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for c in &self.cliques {
            *h.entry(c.len()).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    /// JSON with 1-based vertices: `{"n", "edges", "cliques"}`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Out {
            n: usize,
            edges: Vec<[usize; 2]>,
            cliques: Vec<Vec<usize>>,
            chordal: bool,
        }
        let out = Out {
            n: self.n(),
            edges: self.graph.edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            cliques: self.cliques.iter().map(|c| c.iter().map(|v| v + 1).collect()).collect(),
            chordal: self.chordal,
        };
        serde_json::to_value(out).expect("cover serializes")
    }
}

fn clique_graph(n: usize, cliques: &[Vec<usize>]) -> PatternGraph {
    PatternGraph::from_edge_union(
        n,
        cliques.iter().flat_map(|c| {
            c.iter().enumerate().flat_map(move |(p, &i)| c[p + 1..].iter().map(move |&j| (i, j)))
        }),
    )
}

fn same_cliques(g: &PatternGraph, cliques: &[Vec<usize>]) -> bool {
    match maximal_cliques(g) {
        Ok(mc) => mc == cliques,
        Err(_) => false,
    }
}

/// Minimum-degree elimination with lowest-index tie-breaking. Returns the
/// chordal supergraph with its maximal cliques and the elimination order.
pub fn chordal_extend(g: &PatternGraph) -> CliqueCover {
    let n = g.n();
    let mut adj = g.adjacency();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut candidates = Vec::with_capacity(n);
    let mut fill = Vec::new();
    while let Some(Reverse((d, v))) = heap.pop() {
        if eliminated[v] || adj[v].len() != d {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (p, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[p + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                    fill.push((a, b));
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
        let mut c = nbrs;
        c.push(v);
        c.sort_unstable();
        candidates.push(c);
    }
    let graph = PatternGraph::from_edge_union(n, g.edges().iter().copied().chain(fill));
    CliqueCover { graph, cliques: keep_maximal(candidates), chordal: true, order }
}

fn keep_maximal(mut candidates: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for c in candidates {
        let contained = kept.iter().any(|k| is_subset(&c, k));
        if !contained {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Maximum cardinality search. Returns an order whose first vertex is
/// eliminated first; it is a perfect elimination order iff `g` is chordal.
fn mcs_order(g: &PatternGraph) -> Vec<usize> {
    let n = g.n();
    let adj = g.adjacency();
    let mut weight = vec![0usize; n];
    let mut numbered = vec![false; n];
    let mut order = vec![0; n];
    for pos in (0..n).rev() {
        let mut best = usize::MAX;
        for v in 0..n {
            if !numbered[v] && (best == usize::MAX || weight[v] > weight[best]) {
                best = v;
            }
        }
        numbered[best] = true;
        order[pos] = best;
        for &u in &adj[best] {
            if !numbered[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// Checks that `order` is a perfect elimination order of `g`.
pub fn is_perfect_elimination_order(g: &PatternGraph, order: &[usize]) -> bool {
    let n = g.n();
    if order.len() != n {
        return false;
    }
    let mut pos = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let adj = g.adjacency();
    for &v in order {
        let later: Vec<usize> = adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        if let Some(&first) = later.iter().min_by_key(|&&u| pos[u]) {
            for &w in &later {
                if w != first && !adj[first].contains(&w) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn is_chordal(g: &PatternGraph) -> bool {
    is_perfect_elimination_order(g, &mcs_order(g))
}

/// Maximal cliques of a chordal graph, sorted lexicographically.
pub fn maximal_cliques(g: &PatternGraph) -> Result<Vec<Vec<usize>>> {
    let order = mcs_order(g);
    if !is_perfect_elimination_order(g, &order) {
        return Err(Error::NonChordal);
    }
    let n = g.n();
    let mut pos = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let adj = g.adjacency();
    let candidates = order
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> = adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    Ok(keep_maximal(candidates))
}

/// Clique merging rule. A pair merges when its union has at most `max_size`
/// vertices or its overlap ratio `|A ∩ B| / min(|A|, |B|)` is at least
/// `min_overlap`. The default merges nothing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MergePolicy {
    pub max_size: Option<usize>,
    pub min_overlap: Option<f64>,
}

impl MergePolicy {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn cap(max_size: usize) -> Self {
        Self { max_size: Some(max_size), min_overlap: None }
    }

    fn accepts(&self, a: &[usize], b: &[usize]) -> bool {
        let inter = a.iter().filter(|x| b.binary_search(x).is_ok()).count();
        let union = a.len() + b.len() - inter;
        let by_size = self.max_size.is_some_and(|cap| union <= cap);
        let by_overlap = self
            .min_overlap
            .is_some_and(|t| inter as f64 / a.len().min(b.len()).max(1) as f64 >= t);
        by_size || by_overlap
    }
}

/// Greedily merges the lowest-index admissible pair until none remains. The
/// result covers the same edges; if the merged cliques no longer form the
/// maximal cliques of a chordal graph the union graph is extended again.
pub fn merge_cliques(cover: &CliqueCover, policy: &MergePolicy) -> CliqueCover {
    if policy.max_size.is_none() && policy.min_overlap.is_none() {
        return cover.clone();
    }
    let mut cl = cover.cliques.clone();
    'outer: loop {
        for i in 0..cl.len() {
            for j in i + 1..cl.len() {
                if policy.accepts(&cl[i], &cl[j]) {
                    let mut u: Vec<usize> = cl[i].iter().chain(cl[j].iter()).copied().collect();
                    u.sort_unstable();
                    u.dedup();
                    cl.remove(j);
                    cl[i] = u;
                    cl = keep_maximal_ordered(cl);
                    continue 'outer;
                }
            }
        }
        break;
    }
    let n = cover.n();
    let graph = clique_graph(n, &cl).union(&cover.graph);
    cl.sort();
    if is_chordal(&graph) && same_cliques(&graph, &cl) {
        CliqueCover { graph, cliques: cl, chordal: true, order: Vec::new() }
    } else {
        chordal_extend(&graph)
    }
}

fn keep_maximal_ordered(cl: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(cl.len());
    for (i, c) in cl.iter().enumerate() {
        let dominated = cl
            .iter()
            .enumerate()
            .any(|(j, d)| j != i && is_subset(c, d) && (c.len() < d.len() || j < i));
        if !dominated {
            out.push(c.clone());
        }
    }
    out
}

/// Chordal cover of the aggregate pattern of `C` and `A`.
pub fn cover_for(c: &SymMatrix, a: &[SymMatrix]) -> Result<CliqueCover> {
    Ok(chordal_extend(&aggregate_pattern(c, a)?))
}
