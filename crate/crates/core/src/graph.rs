//! Graph model, edge-list text format, seeded generators, and the exact
//! BFS oracles (neighbourhood counts, classic and truncated harmonic
//! centrality) used to validate every approximate path in the crate.
//!
//! Vertices are dense 0-based integers. Graphs are immutable once built:
//! adjacency lists are sorted, deduplicated, and free of self-loops.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("no vertices derivable: empty edge list and no node count given")]
    NoVertices,
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// An immutable graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    adjacency: Vec<Vec<usize>>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an edge iterator. Self-loops are dropped and
    /// duplicate edges collapsed; for undirected graphs each edge is stored
    /// in both endpoint lists.
    pub fn from_edges<I>(n: usize, directed: bool, edges: I) -> Result<Graph, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange { vertex: u, n });
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            if !directed {
                adjacency[v].push(u);
            }
        }
        let mut num_edges = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            num_edges += list.len();
        }
        if !directed {
            num_edges /= 2;
        }
        Ok(Graph {
            n,
            directed,
            adjacency,
            num_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edge count; for undirected graphs each edge counts once.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// BFS distances from `v`; `None` for unreachable vertices.
    pub fn bfs_distances(&self, v: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[v] = Some(0);
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Serializes to the edge-list text format with a `# nodes=.. directed=..`
    /// header, so isolated trailing vertices survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes={} directed={}\n", self.n, self.directed);
        for u in 0..self.n {
            for &v in &self.adjacency[u] {
                if self.directed || u < v {
                    out.push_str(&format!("{} {}\n", u, v));
                }
            }
        }
        out
    }
}

/// The subset `C` of vertices that counts toward neighbourhood sizes,
/// as a per-vertex membership vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSet {
    membership: Vec<bool>,
}

impl SourceSet {
    pub fn all(n: usize) -> SourceSet {
        SourceSet {
            membership: vec![true; n],
        }
    }

    pub fn none(n: usize) -> SourceSet {
        SourceSet {
            membership: vec![false; n],
        }
    }

    pub fn from_ids(n: usize, ids: &[usize]) -> Result<SourceSet, GraphError> {
        let mut set = SourceSet::none(n);
        for &id in ids {
            if id >= n {
                return Err(GraphError::VertexOutOfRange { vertex: id, n });
            }
            set.membership[id] = true;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.membership[v]
    }

    pub fn count(&self) -> usize {
        self.membership.iter().filter(|&&m| m).count()
    }
}

/// What `parse_edge_list` produced beside the graph itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub graph: Graph,
    /// Self-loop lines dropped (degenerate for every algorithm here).
    pub self_loops_dropped: usize,
    /// Edge lines that repeated an already-seen edge.
    pub duplicates_collapsed: usize,
}

/// Parses edge-list text: one `u v` pair per line, `#` comments, blank lines
/// ignored. A comment of the form `# nodes=N directed=B` is honoured as a
/// node-count and direction default; explicit arguments override it.
///
/// The vertex count is `nodes_override`, else the header value, else
/// `1 + max id`. With no edges and no count the input is unparseable.
pub fn parse_edge_list(
    text: &str,
    directed: Option<bool>,
    nodes_override: Option<usize>,
) -> Result<ParseOutcome, GraphError> {
    let mut edges: Vec<(usize, usize, usize)> = Vec::new(); // (line, u, v)
    let mut header_nodes = None;
    let mut header_directed = None;
    let mut max_id = None;
    let mut self_loops = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((nodes, dir)) = parse_header(comment) {
                header_nodes = Some(nodes);
                header_directed = Some(dir);
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let u = parse_vertex(parts.next(), line_no)?;
        let v = parse_vertex(parts.next(), line_no)?;
        if parts.next().is_some() {
            return Err(GraphError::Parse {
                line: line_no,
                reason: String::from("expected exactly two vertex ids"),
            });
        }
        max_id = Some(max_id.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        if u == v {
            self_loops += 1;
        } else {
            edges.push((line_no, u, v));
        }
    }

    let directed = directed.or(header_directed).unwrap_or(false);
    let n = match nodes_override.or(header_nodes) {
        Some(n) => n,
        None => match max_id {
            Some(m) => m + 1,
            None => return Err(GraphError::NoVertices),
        },
    };
    if n == 0 {
        return Err(GraphError::NoVertices);
    }
    for &(line, u, v) in &edges {
        let over = u.max(v);
        if over >= n {
            return Err(GraphError::Parse {
                line,
                reason: format!("vertex {} out of range for {} nodes", over, n),
            });
        }
    }

    let graph = Graph::from_edges(n, directed, edges.iter().map(|&(_, u, v)| (u, v)))?;
    let duplicates_collapsed = edges.len() - graph.num_edges.min(edges.len());
    Ok(ParseOutcome {
        graph,
        self_loops_dropped: self_loops,
        duplicates_collapsed,
    })
}

fn parse_vertex(token: Option<&str>, line: usize) -> Result<usize, GraphError> {
    let token = token.ok_or_else(|| GraphError::Parse {
        line,
        reason: String::from("expected 'u v'"),
    })?;
    token.parse::<usize>().map_err(|_| GraphError::Parse {
        line,
        reason: format!("'{}' is not a non-negative integer", token),
    })
}

/// Recognizes `nodes=N directed=B` inside a comment.
fn parse_header(comment: &str) -> Option<(usize, bool)> {
    let mut nodes = None;
    let mut directed = None;
    for token in comment.split_whitespace() {
        if let Some(v) = token.strip_prefix("nodes=") {
            nodes = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("directed=") {
            directed = v.parse::<bool>().ok();
        }
    }
    Some((nodes?, directed?))
}

/// Exact neighbourhood counts: element `h` is the number of vertices of
/// `sources` within distance `h` of `v`, for `h = 0..=h_max`.
pub fn bfs_neighbourhood(
    g: &Graph,
    v: usize,
    h_max: usize,
    sources: &SourceSet,
) -> Result<Vec<u64>, GraphError> {
    if v >= g.n() {
        return Err(GraphError::VertexOutOfRange { vertex: v, n: g.n() });
    }
    if sources.len() != g.n() {
        return Err(GraphError::InvalidParameter(
            "source set length must equal the vertex count",
        ));
    }
    let dist = g.bfs_distances(v);
    let mut counts = vec![0u64; h_max + 1];
    for (u, d) in dist.iter().enumerate() {
        if let Some(d) = *d {
            let d = d as usize;
            if d <= h_max && sources.contains(u) {
                counts[d] += 1;
            }
        }
    }
    // Prefix-sum the shells into balls.
    for h in 1..=h_max {
        counts[h] += counts[h - 1];
    }
    Ok(counts)
}

/// Classic harmonic centrality: sum over reachable `u != v` of
/// `1 / dist(v, u)`; unreachable vertices contribute nothing.
pub fn exact_harmonic_classic(g: &Graph, v: usize) -> f64 {
    let dist = g.bfs_distances(v);
    let mut sum = 0.0;
    for (u, d) in dist.iter().enumerate() {
        if u != v {
            if let Some(d) = *d {
                sum += 1.0 / d as f64;
            }
        }
    }
    sum
}

/// Truncated harmonic centrality from exact counts:
/// `sum_{h=1}^{h_max} N(v, h, V) / h`. Note the ball counts include `v`
/// itself, so even an isolated vertex scores the partial harmonic series.
pub fn truncated_harmonic_oracle(g: &Graph, v: usize, h_max: usize) -> Result<f64, GraphError> {
    if h_max < 1 {
        return Err(GraphError::InvalidParameter("h_max must be at least 1"));
    }
    let counts = bfs_neighbourhood(g, v, h_max, &SourceSet::all(g.n()))?;
    let mut sum = 0.0;
    for (h, &count) in counts.iter().enumerate().skip(1) {
        sum += count as f64 / h as f64;
    }
    Ok(sum)
}

/// A generator request; all variants are deterministic for fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenSpec {
    Path(usize),
    Ring(usize),
    Grid(usize, usize),
    Gnp { n: usize, p: f64, seed: u64 },
}

/// Builds one of the fixture topologies. All are undirected.
pub fn gen_graph(spec: GenSpec) -> Result<Graph, GraphError> {
    match spec {
        GenSpec::Path(n) => {
            require(n >= 1, "path size must be at least 1")?;
            Graph::from_edges(n, false, (1..n).map(|v| (v - 1, v)))
        }
        GenSpec::Ring(n) => {
            require(n >= 1, "ring size must be at least 1")?;
            let wrap = if n > 1 { Some((n - 1, 0)) } else { None };
            Graph::from_edges(n, false, (1..n).map(|v| (v - 1, v)).chain(wrap))
        }
        GenSpec::Grid(w, h) => {
            require(w >= 1 && h >= 1, "grid sides must be at least 1")?;
            let mut edges = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let id = y * w + x;
                    if x + 1 < w {
                        edges.push((id, id + 1));
                    }
                    if y + 1 < h {
                        edges.push((id, id + w));
                    }
                }
            }
            Graph::from_edges(w * h, false, edges)
        }
        GenSpec::Gnp { n, p, seed } => {
            require(n >= 1, "gnp size must be at least 1")?;
            require((0.0..=1.0).contains(&p), "gnp probability must be in [0, 1]")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edges(n, false, edges)
        }
    }
}

fn require(cond: bool, reason: &'static str) -> Result<(), GraphError> {
    if cond {
        Ok(())
    } else {
        Err(GraphError::InvalidParameter(reason))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p3() -> Graph {
        gen_graph(GenSpec::Path(3)).unwrap()
    }

    #[test]
    fn parse_path_graph() {
        let out = parse_edge_list("0 1\n1 2", None, None).unwrap();
        assert_eq!(out.graph, p3());
        assert_eq!(out.graph.n(), 3);
        assert_eq!(out.graph.num_edges(), 2);
        assert_eq!(out.self_loops_dropped, 0);
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let out = parse_edge_list("# comment\n\n0 1\n", None, None).unwrap();
        assert_eq!(out.graph.n(), 2);
        assert_eq!(out.graph.num_edges(), 1);
    }

    #[test]
    fn parse_reports_malformed_line() {
        let err = parse_edge_list("0 x", None, None).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
        let err = parse_edge_list("0 1\n2", None, None).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
        let err = parse_edge_list("0 1 2", None, None).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_empty_input_fails_without_node_count() {
        assert_eq!(parse_edge_list("", None, None).unwrap_err(), GraphError::NoVertices);
        assert_eq!(
            parse_edge_list("# nothing here\n", None, None).unwrap_err(),
            GraphError::NoVertices
        );
        let out = parse_edge_list("", None, Some(4)).unwrap();
        assert_eq!(out.graph.n(), 4);
        assert_eq!(out.graph.num_edges(), 0);
    }

    #[test]
    fn parse_counts_self_loops_and_duplicates() {
        let out = parse_edge_list("0 0\n0 1\n1 0\n0 1", None, None).unwrap();
        assert_eq!(out.self_loops_dropped, 1);
        assert_eq!(out.duplicates_collapsed, 2);
        assert_eq!(out.graph.num_edges(), 1);
    }

    #[test]
    fn parse_honours_header_and_override() {
        let out = parse_edge_list("# nodes=5 directed=false\n0 1\n", None, None).unwrap();
        assert_eq!(out.graph.n(), 5);
        let out = parse_edge_list("# nodes=5 directed=false\n0 1\n", None, Some(7)).unwrap();
        assert_eq!(out.graph.n(), 7);
        let err = parse_edge_list("0 4", None, Some(3)).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
    }

    #[test]
    fn directed_parse_keeps_arc_direction() {
        let out = parse_edge_list("0 1", Some(true), None).unwrap();
        assert_eq!(out.graph.neighbors(0), &[1]);
        assert!(out.graph.neighbors(1).is_empty());
    }

    #[test]
    fn bfs_neighbourhood_on_p3() {
        let g = p3();
        let all = SourceSet::all(3);
        assert_eq!(bfs_neighbourhood(&g, 1, 1, &all).unwrap(), vec![1, 3]);
        assert_eq!(bfs_neighbourhood(&g, 0, 0, &all).unwrap(), vec![1]);
        let only_two = SourceSet::from_ids(3, &[2]).unwrap();
        assert_eq!(bfs_neighbourhood(&g, 0, 2, &only_two).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn bfs_neighbourhood_rejects_bad_vertex() {
        let g = p3();
        assert!(matches!(
            bfs_neighbourhood(&g, 3, 1, &SourceSet::all(3)),
            Err(GraphError::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn harmonic_classic_on_p3() {
        let g = p3();
        assert_eq!(exact_harmonic_classic(&g, 1), 2.0);
        assert_eq!(exact_harmonic_classic(&g, 0), 1.5);
        let isolated = Graph::from_edges(1, false, core::iter::empty()).unwrap();
        assert_eq!(exact_harmonic_classic(&isolated, 0), 0.0);
    }

    #[test]
    fn harmonic_truncated_on_p3() {
        let g = p3();
        assert_eq!(truncated_harmonic_oracle(&g, 1, 2).unwrap(), 4.5);
        assert_eq!(truncated_harmonic_oracle(&g, 0, 2).unwrap(), 3.5);
        let isolated = Graph::from_edges(1, false, core::iter::empty()).unwrap();
        let partial: f64 = (1..=5).map(|h| 1.0 / h as f64).sum();
        assert!((truncated_harmonic_oracle(&isolated, 0, 5).unwrap() - partial).abs() < 1e-12);
    }

    #[test]
    fn generators_build_expected_shapes() {
        assert_eq!(p3().neighbors(1), &[0, 2]);
        let ring = gen_graph(GenSpec::Ring(4)).unwrap();
        assert!((0..4).all(|v| ring.degree(v) == 2));
        let grid = gen_graph(GenSpec::Grid(2, 2)).unwrap();
        assert_eq!(grid.num_edges(), 4);
        let single = gen_graph(GenSpec::Ring(1)).unwrap();
        assert_eq!(single.num_edges(), 0);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(gen_graph(GenSpec::Path(0)).is_err());
        assert!(gen_graph(GenSpec::Gnp { n: 10, p: 1.5, seed: 0 }).is_err());
    }

    #[test]
    fn gnp_is_deterministic_per_seed() {
        let a = gen_graph(GenSpec::Gnp { n: 50, p: 0.1, seed: 1 }).unwrap();
        let b = gen_graph(GenSpec::Gnp { n: 50, p: 0.1, seed: 1 }).unwrap();
        assert_eq!(a, b);
        let c = gen_graph(GenSpec::Gnp { n: 50, p: 0.1, seed: 2 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bfs_distance_symmetry_spot_check() {
        let g = gen_graph(GenSpec::Gnp { n: 40, p: 0.1, seed: 9 }).unwrap();
        let from3 = g.bfs_distances(3);
        for v in [0usize, 7, 21, 39] {
            let back = g.bfs_distances(v);
            assert_eq!(from3[v], back[3]);
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..60, 0u64..1000, 0u32..30).prop_map(|(n, seed, pct)| {
            gen_graph(GenSpec::Gnp {
                n,
                p: pct as f64 / 100.0,
                seed,
            })
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn neighbourhood_counts_monotone_and_bounded(g in arb_graph(), v_raw in any::<usize>(), h in 0usize..10) {
            let v = v_raw % g.n();
            let all = SourceSet::all(g.n());
            let counts = bfs_neighbourhood(&g, v, h, &all).unwrap();
            prop_assert_eq!(counts.len(), h + 1);
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(counts.iter().all(|&c| c <= g.n() as u64));
        }

        #[test]
        fn ball_saturates_at_component_size(g in arb_graph(), v_raw in any::<usize>()) {
            let v = v_raw % g.n();
            let reachable = g.bfs_distances(v).iter().filter(|d| d.is_some()).count() as u64;
            let counts = bfs_neighbourhood(&g, v, g.n(), &SourceSet::all(g.n())).unwrap();
            prop_assert_eq!(counts[g.n()], reachable);
        }

        #[test]
        fn edge_list_round_trips(g in arb_graph()) {
            let text = g.to_edge_list();
            let back = parse_edge_list(&text, None, None).unwrap();
            prop_assert_eq!(back.graph, g);
        }
    }
}
