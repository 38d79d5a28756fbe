//! Simple undirected graphs: structural queries, edge-list I/O, generators.
//!
//! Vertices are `0..n`. Edges are unordered pairs without self-loops or
//! duplicates. Values are immutable after construction and safe to share
//! across worker threads.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Parallelism};
use crate::{Error, Result};

/// Simple undirected graph with sorted per-vertex adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

/// A two-sided vertex partition with every edge crossing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartitePartition {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, rejecting self-loops, duplicates,
    /// and out-of-range endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph> {
        let mut normalized: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            let d = normalized.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                d.0, d.1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: normalized,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Maximum degree; 0 for edgeless graphs.
    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Length of the shortest cycle, or `None` for forests.
    ///
    /// BFS from every vertex; a non-tree edge seen from `u` to `w` closes a
    /// walk of length `dist(u) + dist(w) + 1` which contains a cycle no
    /// longer than itself, and for a root on a shortest cycle the minimum is
    /// attained. O(nm), fine at desk scale.
    pub fn girth(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for root in 0..self.n {
            let mut dist = vec![usize::MAX; self.n];
            let mut parent = vec![usize::MAX; self.n];
            let mut queue = VecDeque::new();
            dist[root] = 0;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if parent[u] != w {
                        let candidate = dist[u] + dist[w] + 1;
                        if best.map_or(true, |b| candidate < b) {
                            best = Some(candidate);
                        }
                    }
                }
            }
        }
        best
    }

    /// Line graph: one vertex per edge, adjacent iff the edges share an
    /// endpoint. Also returns the map from new vertex id to original edge.
    pub fn line_graph(&self) -> (Graph, Vec<(usize, usize)>) {
        let m = self.edges.len();
        let mut new_edges = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = self.edges[i];
                let (c, d) = self.edges[j];
                if a == c || a == d || b == c || b == d {
                    new_edges.push((i, j));
                }
            }
        }
        let graph = Graph::new(m, new_edges).expect("line graph construction is always valid");
        (graph, self.edges.clone())
    }

    /// The connected component of `G[s]` containing `v`.
    pub fn component_of(&self, s: &[usize], v: usize) -> Result<Vec<usize>> {
        if !s.contains(&v) {
            return Err(Error::InvalidParam(format!(
                "vertex {v} is not in the induced set"
            )));
        }
        let mut in_s = vec![false; self.n];
        for &u in s {
            in_s[u] = true;
        }
        Ok(self.component_from(&in_s, v))
    }

    /// All connected components of `G[s]`, each sorted, ordered by minimum
    /// vertex.
    pub fn components_within(&self, s: &[usize]) -> Vec<Vec<usize>> {
        let mut in_s = vec![false; self.n];
        for &u in s {
            in_s[u] = true;
        }
        let mut seen = vec![false; self.n];
        let mut components = Vec::new();
        let mut order: Vec<usize> = s.to_vec();
        order.sort_unstable();
        for &v in &order {
            if !seen[v] {
                let comp = self.component_from(&in_s, v);
                for &u in &comp {
                    seen[u] = true;
                }
                components.push(comp);
            }
        }
        components
    }

    fn component_from(&self, in_s: &[bool], v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        seen[v] = true;
        queue.push_back(v);
        let mut comp = vec![v];
        while let Some(u) = queue.pop_front() {
            for &w in &self.adjacency[u] {
                if in_s[w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comp
    }

    /// Two-colors each component by BFS. The BFS root's side (the smallest
    /// unvisited vertex, so isolated vertices too) goes left. Returns `None`
    /// when an odd cycle exists.
    pub fn bipartite_partition(&self) -> Option<BipartitePartition> {
        let mut side = vec![u8::MAX; self.n];
        for root in 0..self.n {
            if side[root] != u8::MAX {
                continue;
            }
            side[root] = 0;
            let mut queue = VecDeque::new();
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if side[w] == u8::MAX {
                        side[w] = 1 - side[u];
                        queue.push_back(w);
                    } else if side[w] == side[u] {
                        return None;
                    }
                }
            }
        }
        let left = (0..self.n).filter(|&v| side[v] == 0).collect();
        let right = (0..self.n).filter(|&v| side[v] == 1).collect();
        Some(BipartitePartition { left, right })
    }

    /// Induced subgraph on `vertices` (deduplicated, sorted); returns the new
    /// graph plus the map from new id to original id.
    pub fn induced(&self, vertices: &[usize]) -> (Graph, Vec<usize>) {
        let mut keep: Vec<usize> = vertices.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut position = vec![usize::MAX; self.n];
        for (i, &v) in keep.iter().enumerate() {
            position[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| position[u] != usize::MAX && position[v] != usize::MAX)
            .map(|&(u, v)| (position[u], position[v]));
        let graph = Graph::new(keep.len(), edges).expect("induced subgraph is always valid");
        (graph, keep)
    }

    /// Parses the edge-list format: optional `#` comment lines, a `n m`
    /// header, then `m` lines `u v`.
    pub fn parse(text: &str) -> Result<Graph> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        let mut edge_lines = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected two fields, found {}", fields.len()),
                });
            }
            let a: usize = fields[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not an integer: {:?}", fields[0]),
            })?;
            let b: usize = fields[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not an integer: {:?}", fields[1]),
            })?;
            match header {
                None => header = Some((a, b)),
                Some((n, _)) => {
                    if a >= n || b >= n {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("edge ({a}, {b}) out of range for n = {n}"),
                        });
                    }
                    if a == b {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("self-loop at vertex {a}"),
                        });
                    }
                    edge_lines += 1;
                    edges.push((a, b));
                }
            }
        }
        let (n, m) = header.ok_or(Error::Parse {
            line: 0,
            message: "missing `n m` header line".into(),
        })?;
        if edge_lines != m {
            return Err(Error::Parse {
                line: 0,
                message: format!("header promised {m} edges, found {edge_lines}"),
            });
        }
        Graph::new(n, edges)
    }

    /// Serializes to the edge-list format with edges sorted lexicographically.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn from_file(path: &std::path::Path) -> Result<Graph> {
        Graph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_edge_list())?)
    }
}

/// Graph families used by the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Cycle { n: usize },
    Path { n: usize },
    Complete { n: usize },
    CompleteBipartite { a: usize, b: usize },
    Grid { rows: usize, cols: usize },
    /// Pairing model with rejection of loops and multi-edges.
    RandomRegular { n: usize, degree: usize },
    /// Each pair kept independently with probability `d / n`.
    Gnp { n: usize, d: f64 },
}

/// Retry cap for the pairing-model generator.
pub const REGULAR_RETRY_CAP: usize = 1000;

/// Generates a graph; deterministic for fixed `(family, seed)`.
pub fn generate(family: &GraphFamily, seed: u64) -> Result<Graph> {
    match *family {
        GraphFamily::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParam("cycle needs n >= 3".into()));
            }
            Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        GraphFamily::Path { n } => {
            if n == 0 {
                return Err(Error::InvalidParam("path needs n >= 1".into()));
            }
            Graph::new(n, (1..n).map(|i| (i - 1, i)))
        }
        GraphFamily::Complete { n } => {
            let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
            Graph::new(n, edges)
        }
        GraphFamily::CompleteBipartite { a, b } => {
            let edges = (0..a).flat_map(|i| (0..b).map(move |j| (i, a + j)));
            Graph::new(a + b, edges)
        }
        GraphFamily::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidParam("grid needs rows, cols >= 1".into()));
            }
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let v = r * cols + c;
                    if c + 1 < cols {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < rows {
                        edges.push((v, v + cols));
                    }
                }
            }
            Graph::new(rows * cols, edges)
        }
        GraphFamily::RandomRegular { n, degree } => random_regular(n, degree, seed),
        GraphFamily::Gnp { n, d } => gnp(n, d, seed),
    }
}

fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Graph> {
    if degree >= n {
        return Err(Error::InvalidParam(format!(
            "random_regular needs degree < n, got degree {degree}, n {n}"
        )));
    }
    if (n * degree) % 2 != 0 {
        return Err(Error::InvalidParam(format!(
            "random_regular needs n * degree even, got {n} * {degree}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
    let half = stubs.len() / 2;
    for _attempt in 0..REGULAR_RETRY_CAP {
        stubs.shuffle(&mut rng);
        let mut ok = true;
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..half {
            let (u, v) = (stubs[i], stubs[i + half]);
            if u == v || !seen.insert((u.min(v), u.max(v))) {
                ok = false;
                break;
            }
        }
        if ok {
            return Graph::new(n, seen);
        }
    }
    Err(Error::RetryBudget {
        attempts: REGULAR_RETRY_CAP,
        context: format!("pairing model for n = {n}, degree = {degree}"),
    })
}

fn gnp(n: usize, d: f64, seed: u64) -> Result<Graph> {
    if !(d >= 0.0) || (n > 0 && d > n as f64) {
        return Err(Error::InvalidParam(format!(
            "gnp needs 0 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    let p = if n == 0 { 0.0 } else { d / n as f64 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

/// Empirical distribution of the component size `|S_v|` over uniformly random
/// `ell`-subsets `S` of the vertex set, with `|S_v| = 0` when `v` is not in
/// `S`. Returns frequencies indexed by size `0..=ell`. Sampling is chunked so
/// the result is identical in sequential and parallel modes.
pub fn component_size_frequencies(
    g: &Graph,
    v: usize,
    ell: usize,
    samples: u64,
    seed: u64,
    mode: Parallelism,
) -> Vec<f64> {
    assert!(v < g.n() && ell <= g.n());
    const BLOCK: u64 = 4096;
    let blocks = samples.div_ceil(BLOCK);
    let counts = map_indexed(mode, blocks as usize, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64 + 1);
        let in_block = BLOCK.min(samples - b as u64 * BLOCK);
        let mut counts = vec![0u64; ell + 1];
        let mut pool: Vec<usize> = (0..g.n()).collect();
        for _ in 0..in_block {
            // Partial Fisher-Yates: the first `ell` entries are a uniform subset.
            for i in 0..ell {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            let subset = &pool[..ell];
            let size = if subset.contains(&v) {
                g.component_of(subset, v).expect("v is in the subset").len()
            } else {
                0
            };
            counts[size] += 1;
        }
        counts
    });
    let mut total = vec![0u64; ell + 1];
    for block in counts {
        for (t, c) in total.iter_mut().zip(block) {
            *t += c;
        }
    }
    total.iter().map(|&c| c as f64 / samples as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Graph {
        generate(&GraphFamily::Cycle { n }, 0).unwrap()
    }

    fn path(n: usize) -> Graph {
        generate(&GraphFamily::Path { n }, 0).unwrap()
    }

    #[test]
    fn parse_path_on_three_vertices() {
        let g = Graph::parse("3 2\n0 1\n1 2\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(
            (0..3).map(|v| g.degree(v)).collect::<Vec<_>>(),
            vec![1, 2, 1]
        );
    }

    #[test]
    fn parse_single_isolated_vertex() {
        let g = Graph::parse("1 0\n").unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.m(), 0);
    }

    #[test]
    fn parse_rejects_self_loop() {
        let err = Graph::parse("2 1\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_out_of_range_and_duplicates() {
        assert!(Graph::parse("2 1\n0 5\n").is_err());
        assert!(Graph::parse("3 2\n0 1\n1 0\n").is_err());
        assert!(Graph::parse("# comment\n3 1\n").is_err());
    }

    #[test]
    fn parse_accepts_comments_and_serializes_sorted() {
        let g = Graph::parse("# a path\n3 2\n1 2\n0 1\n").unwrap();
        assert_eq!(g.to_edge_list(), "3 2\n0 1\n1 2\n");
        let back = Graph::parse(&g.to_edge_list()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn max_degree_examples() {
        assert_eq!(cycle(5).max_degree(), 2);
        let star = generate(&GraphFamily::CompleteBipartite { a: 1, b: 4 }, 0).unwrap();
        assert_eq!(star.max_degree(), 4);
        assert_eq!(Graph::new(3, Vec::new()).unwrap().max_degree(), 0);
    }

    #[test]
    fn girth_examples() {
        assert_eq!(cycle(6).girth(), Some(6));
        assert_eq!(path(4).girth(), None);
        let k4 = generate(&GraphFamily::Complete { n: 4 }, 0).unwrap();
        assert_eq!(k4.girth(), Some(3));
        assert_eq!(cycle(5).girth(), Some(5));
        let grid = generate(&GraphFamily::Grid { rows: 2, cols: 3 }, 0).unwrap();
        assert_eq!(grid.girth(), Some(4));
    }

    #[test]
    fn line_graph_examples() {
        let k3 = generate(&GraphFamily::Complete { n: 3 }, 0).unwrap();
        let (l, map) = k3.line_graph();
        assert_eq!(l.n(), 3);
        assert_eq!(l.m(), 3);
        assert_eq!(map.len(), 3);

        let (l, _) = path(3).line_graph();
        assert_eq!((l.n(), l.m()), (2, 1));

        let empty = Graph::new(4, Vec::new()).unwrap();
        let (l, _) = empty.line_graph();
        assert_eq!((l.n(), l.m()), (0, 0));
    }

    #[test]
    fn line_graph_edge_count_formula() {
        for g in [cycle(7), path(6), generate(&GraphFamily::Complete { n: 5 }, 0).unwrap()] {
            let (l, _) = g.line_graph();
            let expected: usize = (0..g.n()).map(|v| g.degree(v) * (g.degree(v) - 1) / 2).sum();
            assert_eq!(l.m(), expected);
        }
    }

    #[test]
    fn component_of_examples() {
        let p3 = path(3);
        assert_eq!(p3.component_of(&[0, 2], 0).unwrap(), vec![0]);
        assert_eq!(p3.component_of(&[0, 1, 2], 0).unwrap(), vec![0, 1, 2]);
        let c4 = cycle(4);
        assert_eq!(c4.component_of(&[0, 1], 1).unwrap(), vec![0, 1]);
        assert!(p3.component_of(&[0, 2], 1).is_err());
    }

    #[test]
    fn bipartite_examples() {
        let part = cycle(4).bipartite_partition().unwrap();
        assert_eq!((part.left.len(), part.right.len()), (2, 2));
        assert!(cycle(5).bipartite_partition().is_none());
        let edgeless = Graph::new(3, Vec::new()).unwrap();
        let part = edgeless.bipartite_partition().unwrap();
        assert_eq!(part.left, vec![0, 1, 2]);
        assert!(part.right.is_empty());
    }

    #[test]
    fn generator_examples() {
        let c5 = cycle(5);
        assert_eq!((c5.n(), c5.m()), (5, 5));
        let a = generate(&GraphFamily::RandomRegular { n: 6, degree: 3 }, 42).unwrap();
        let b = generate(&GraphFamily::RandomRegular { n: 6, degree: 3 }, 42).unwrap();
        assert_eq!(a, b);
        assert!((0..6).all(|v| a.degree(v) == 3));
        assert!(generate(&GraphFamily::RandomRegular { n: 5, degree: 3 }, 0).is_err());
    }

    #[test]
    fn induced_subgraph_remaps_ids() {
        let c5 = cycle(5);
        let (sub, map) = c5.induced(&[1, 2, 4]);
        assert_eq!(map, vec![1, 2, 4]);
        assert_eq!(sub.n(), 3);
        assert_eq!(sub.edges(), &[(0, 1)]);
    }

    #[test]
    fn component_size_frequencies_sum_to_one() {
        let g = cycle(8);
        let freq = component_size_frequencies(&g, 0, 3, 2000, 7, Parallelism::Sequential);
        let total: f64 = freq.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let freq_par = component_size_frequencies(&g, 0, 3, 2000, 7, Parallelism::Rayon);
        assert_eq!(freq, freq_par);
    }
}
