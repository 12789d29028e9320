//! Fixed interference graphs and the random-graph families used in the
//! simulation study.
//!
//! The graph is symmetric and unweighted: an edge between `i` and `j` means
//! the treatment of either unit may affect the other's outcome. Graphs are
//! immutable once built, so they can be shared freely across replicates.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Symmetric, unweighted interference graph on `n` units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceGraph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl InterferenceGraph {
    /// Builds a graph from an edge list. Duplicate and mirrored edges
    /// collapse to one undirected edge.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if a >= n {
                return Err(Error::EndpointOutOfRange {
                    edge_index: idx,
                    unit: a,
                    n,
                });
            }
            if b >= n {
                return Err(Error::EndpointOutOfRange {
                    edge_index: idx,
                    unit: b,
                    n,
                });
            }
            if a == b {
                return Err(Error::SelfLoop {
                    edge_index: idx,
                    unit: a,
                });
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &set {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let degrees = adj.iter().map(Vec::len).collect();
        Ok(Self {
            n,
            adj,
            edges: set.into_iter().collect(),
            degrees,
        })
    }

    /// Graph with no edges (the no-interference case).
    pub fn empty(n: usize) -> Self {
        Self::from_edge_list(n, &[]).expect("empty edge list is always valid")
    }

    /// Path 0–1–…–(n−1).
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edge_list(n, &edges).expect("path edges are valid")
    }

    /// Cycle on `n ≥ 3` units.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least 3 units");
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        Self::from_edge_list(n, &edges).expect("cycle edges are valid")
    }

    /// Star with unit 0 as hub.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edge_list(n, &edges).expect("star edges are valid")
    }

    /// Complete graph on `n` units.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Self::from_edge_list(n, &edges).expect("complete edges are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Neighbors of `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    /// Units reachable from `i` by a path of length at most `hops`,
    /// excluding `i` itself. `hops = 1` is the one-hop interference
    /// neighborhood N_i.
    pub fn neighborhood(&self, i: usize, hops: usize) -> BTreeSet<usize> {
        assert!(i < self.n, "unit {i} out of range");
        assert!(hops >= 1, "hops must be at least 1");
        let mut seen = vec![false; self.n];
        seen[i] = true;
        let mut frontier = vec![i];
        let mut out = BTreeSet::new();
        for _ in 0..hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        out.insert(v);
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        out
    }

    /// Serializes to the edge-list text format: first line `n m`, then one
    /// `i j` pair per line, 0-indexed.
    pub fn to_edge_list_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n, self.edges.len());
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    /// Parses the edge-list text format produced by
    /// [`to_edge_list_text`](Self::to_edge_list_text).
    pub fn from_edge_list_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("missing unit count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad unit count: {e}")))?;
        let m: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("missing edge count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad edge count: {e}")))?;
        let mut edges = Vec::with_capacity(m);
        for k in 0..m {
            let a: usize = tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("edge {k}: missing endpoint")))?
                .parse()
                .map_err(|e| Error::Parse(format!("edge {k}: {e}")))?;
            let b: usize = tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("edge {k}: missing endpoint")))?
                .parse()
                .map_err(|e| Error::Parse(format!("edge {k}: {e}")))?;
            edges.push((a, b));
        }
        Self::from_edge_list(n, &edges)
    }
}

/// A random-graph family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphModel {
    /// Each pair is an edge independently with probability `p`.
    ErdosRenyi { p: f64 },
    /// Linear preferential attachment. Starts from a clique of
    /// `min_degree` nodes; every later node attaches `min_degree` edges to
    /// existing nodes with probability proportional to degree plus
    /// `attractiveness`.
    BarabasiAlbert {
        min_degree: usize,
        attractiveness: f64,
    },
    /// Watts–Strogatz ring: each node linked to its `neighborhood_size`
    /// nearest neighbors on each side, then each edge's far endpoint is
    /// rewired with probability `rewire_p`.
    SmallWorld {
        neighborhood_size: usize,
        rewire_p: f64,
    },
}

/// Default rewiring probability for the small-world family when a config
/// leaves it unspecified.
pub const DEFAULT_REWIRE_P: f64 = 0.05;

/// Draws a graph from the named family. The same `(model, n, seed)` triple
/// always yields the identical graph.
pub fn generate_graph(model: GraphModel, n: usize, seed: u64) -> Result<InterferenceGraph> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match model {
        GraphModel::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam(format!("erdos_renyi p = {p}")));
            }
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(p) {
                        edges.push((i, j));
                    }
                }
            }
            InterferenceGraph::from_edge_list(n, &edges)
        }
        GraphModel::BarabasiAlbert {
            min_degree,
            attractiveness,
        } => {
            if min_degree == 0 || min_degree >= n {
                return Err(Error::InvalidParam(format!(
                    "barabasi_albert min_degree = {min_degree} with n = {n}"
                )));
            }
            if attractiveness <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "barabasi_albert attractiveness = {attractiveness}"
                )));
            }
            let mut edges = Vec::new();
            let mut degree = vec![0usize; n];
            for i in 0..min_degree {
                for j in (i + 1)..min_degree {
                    edges.push((i, j));
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
            for v in min_degree..n {
                let mut chosen: BTreeSet<usize> = BTreeSet::new();
                while chosen.len() < min_degree {
                    let total: f64 = (0..v)
                        .filter(|u| !chosen.contains(u))
                        .map(|u| degree[u] as f64 + attractiveness)
                        .sum();
                    let mut t = rng.gen_range(0.0..total);
                    let mut pick = None;
                    for u in 0..v {
                        if chosen.contains(&u) {
                            continue;
                        }
                        let w = degree[u] as f64 + attractiveness;
                        if t < w {
                            pick = Some(u);
                            break;
                        }
                        t -= w;
                    }
                    // Floating-point underflow at the end of the scan falls
                    // back to the last candidate.
                    let u = pick.unwrap_or_else(|| {
                        (0..v)
                            .rev()
                            .find(|u| !chosen.contains(u))
                            .expect("v > |chosen|")
                    });
                    chosen.insert(u);
                }
                for u in chosen {
                    edges.push((u, v));
                    degree[u] += 1;
                    degree[v] += 1;
                }
            }
            InterferenceGraph::from_edge_list(n, &edges)
        }
        GraphModel::SmallWorld {
            neighborhood_size,
            rewire_p,
        } => {
            if neighborhood_size == 0 || 2 * neighborhood_size >= n {
                return Err(Error::InvalidParam(format!(
                    "small_world neighborhood_size = {neighborhood_size} with n = {n}"
                )));
            }
            if !(0.0..=1.0).contains(&rewire_p) {
                return Err(Error::InvalidParam(format!(
                    "small_world rewire_p = {rewire_p}"
                )));
            }
            let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
            for i in 0..n {
                for j in 1..=neighborhood_size {
                    let k = (i + j) % n;
                    set.insert((i.min(k), i.max(k)));
                }
            }
            let ring: Vec<(usize, usize)> = set.iter().copied().collect();
            for (a, b) in ring {
                if !rng.gen_bool(rewire_p) {
                    continue;
                }
                // Rewire b to a fresh endpoint; skip if a is saturated.
                if set.iter().filter(|(x, y)| *x == a || *y == a).count() >= n - 1 {
                    continue;
                }
                let mut tries = 0;
                loop {
                    let c = rng.gen_range(0..n);
                    let cand = (a.min(c), a.max(c));
                    if c != a && !set.contains(&cand) {
                        set.remove(&(a.min(b), a.max(b)));
                        set.insert(cand);
                        break;
                    }
                    tries += 1;
                    if tries > 16 * n {
                        break;
                    }
                }
            }
            let edges: Vec<_> = set.into_iter().collect();
            InterferenceGraph::from_edge_list(n, &edges)
        }
    }
}
