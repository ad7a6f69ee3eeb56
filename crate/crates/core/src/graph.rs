//! Undirected graphs, assumption-A1 diagnosis, synthetic generators, edge-list
//! I/O and the normalized-adjacency eigenvalue λ.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{second_eigenvalue_symmetric, symmetric_eigenvalues, Matrix};

/// An undirected, unweighted graph. Immutable once built.
///
/// `edges` holds each unordered pair once as `(min, max)` and never contains a
/// self-pair; self-loops are a graph-wide flag that puts ones on the diagonal
/// of the adjacency matrix and counts toward every degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
    self_loops: bool,
    adjacency: Matrix,
    degree: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

/// Connectivity and bipartiteness of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDiagnosis {
    pub connected: bool,
    /// Computed on the loop-free part of the graph.
    pub bipartite: bool,
    pub n_components: usize,
    pub satisfies_a1: bool,
}

impl Graph {
    /// Builds a graph on `n` nodes, merging duplicates and both orientations.
    ///
    /// Self-pairs in `edges` are accepted only when `self_loops` is set, in
    /// which case they are redundant with the flag.
    pub fn new(n: usize, edges: &[(usize, usize)], self_loops: bool) -> Result<Graph> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::NodeOutOfRange(a, b, n));
            }
            if a == b {
                if !self_loops {
                    return Err(Error::UnexpectedSelfPair(a));
                }
                continue;
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self::from_edge_set(n, set, self_loops))
    }

    fn from_edge_set(n: usize, edges: BTreeSet<(usize, usize)>, self_loops: bool) -> Graph {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        if self_loops {
            for (i, nb) in neighbors.iter_mut().enumerate() {
                nb.push(i);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let mut adjacency = Matrix::zeros(n, n);
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                adjacency[(i, j)] = 1.0;
            }
        }
        let degree = neighbors.iter().map(Vec::len).collect();
        Graph { n_nodes: n, edges, self_loops, adjacency, degree, neighbors }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Unordered edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Row sums of the adjacency matrix (a self-loop counts once).
    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn max_degree(&self) -> usize {
        self.degree.iter().copied().max().unwrap_or(0)
    }

    /// Sorted neighbourhood `𝒩_i`, containing `i` itself when self-loops are on.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Whether `(i, j)` is in the support of the adjacency matrix.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    /// All ordered pairs `(i, j)` with `A_ij = 1`, row by row.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)))
    }

    /// Connected components in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n_nodes];
        let mut out = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn is_bipartite(&self) -> bool {
        let mut color: Vec<Option<bool>> = vec![None; self.n_nodes];
        for start in 0..self.n_nodes {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let cu = color[u].unwrap();
                for &v in &self.neighbors[u] {
                    if v == u {
                        continue;
                    }
                    match color[v] {
                        None => {
                            color[v] = Some(!cu);
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    pub fn diagnose(&self) -> GraphDiagnosis {
        let n_components = self.components().len();
        let connected = n_components == 1;
        let bipartite = self.is_bipartite();
        GraphDiagnosis {
            connected,
            bipartite,
            n_components,
            satisfies_a1: connected && (!bipartite || self.self_loops),
        }
    }

    /// Errors unless the graph is connected and non-bipartite (or connected
    /// with self-loops).
    pub fn require_a1(&self) -> Result<()> {
        let d = self.diagnose();
        if d.satisfies_a1 {
            return Ok(());
        }
        let why = if !d.connected {
            format!("{} connected components", d.n_components)
        } else {
            "bipartite without self-loops".to_string()
        };
        Err(Error::A1Violated(why))
    }

    /// Random-walk operator `D_deg⁻¹ A`.
    pub fn random_walk_operator(&self) -> Result<Matrix> {
        if let Some(i) = self.degree.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedNode(i));
        }
        Ok(Matrix::from_fn(self.n_nodes, self.n_nodes, |i, j| {
            self.adjacency[(i, j)] / self.degree[i] as f64
        }))
    }

    /// Symmetrically normalized adjacency `D_deg^{-1/2} A D_deg^{-1/2}`.
    pub fn normalized_adjacency(&self) -> Result<Matrix> {
        if let Some(i) = self.degree.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedNode(i));
        }
        let inv_sqrt: Vec<f64> = self.degree.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        Ok(Matrix::from_fn(self.n_nodes, self.n_nodes, |i, j| {
            inv_sqrt[i] * self.adjacency[(i, j)] * inv_sqrt[j]
        }))
    }

    /// Induced subgraph on `nodes` (sorted, distinct), reindexed contiguously.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            index[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| index[a] != usize::MAX && index[b] != usize::MAX)
            .map(|&(a, b)| {
                let (x, y) = (index[a], index[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        Self::from_edge_set(nodes.len(), edges, self.self_loops)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, m={}, self_loops={})", self.n_nodes, self.edges.len(), self.self_loops)
    }
}

/// Builds and diagnoses a graph.
pub fn build_graph(n: usize, edges: &[(usize, usize)], self_loops: bool) -> Result<(Graph, GraphDiagnosis)> {
    let g = Graph::new(n, edges, self_loops)?;
    let d = g.diagnose();
    Ok((g, d))
}

/// Synthetic graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    ErdosRenyi { n: usize, p: f64 },
    Cycle { n: usize },
    Complete { n: usize },
    Star { n: usize },
    Path { n: usize },
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::ErdosRenyi { n, p } => write!(f, "erdos_renyi({n}, {p})"),
            GraphSpec::Cycle { n } => write!(f, "cycle({n})"),
            GraphSpec::Complete { n } => write!(f, "complete({n})"),
            GraphSpec::Star { n } => write!(f, "star({n})"),
            GraphSpec::Path { n } => write!(f, "path({n})"),
        }
    }
}

impl GraphSpec {
    pub fn n(&self) -> usize {
        match *self {
            GraphSpec::ErdosRenyi { n, .. }
            | GraphSpec::Cycle { n }
            | GraphSpec::Complete { n }
            | GraphSpec::Star { n }
            | GraphSpec::Path { n } => n,
        }
    }
}

/// Maximum number of Erdős–Rényi draws before giving up on connectivity.
pub const ER_RESAMPLE_BUDGET: usize = 100;

/// Generates a graph from `spec`. Deterministic in `seed`; Erdős–Rényi graphs
/// are redrawn until connected.
pub fn generate_graph(spec: GraphSpec, seed: u64, add_self_loops: bool) -> Result<Graph> {
    let n = spec.n();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("{spec}: need at least 2 nodes")));
    }
    let edges: Vec<(usize, usize)> = match spec {
        GraphSpec::ErdosRenyi { p, .. } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!("{spec}: p must lie in (0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..ER_RESAMPLE_BUDGET {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let g = Graph::new(n, &edges, add_self_loops)?;
                if g.diagnose().connected {
                    return Ok(g);
                }
            }
            return Err(Error::ResampleBudget {
                spec: spec.to_string(),
                seed,
                attempts: ER_RESAMPLE_BUDGET,
            });
        }
        GraphSpec::Cycle { .. } => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        GraphSpec::Complete { .. } => {
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
        }
        GraphSpec::Star { .. } => (1..n).map(|i| (0, i)).collect(),
        GraphSpec::Path { .. } => (0..n - 1).map(|i| (i, i + 1)).collect(),
    };
    Graph::new(n, &edges, add_self_loops)
}

/// Largest connected component, reindexed, with the map from new to original
/// indices. Ties go to the component holding the smallest original index.
pub fn largest_connected_component(g: &Graph) -> (Graph, Vec<usize>) {
    let comps = g.components();
    let mut best = &comps[0];
    for c in &comps[1..] {
        if c.len() > best.len() {
            best = c;
        }
    }
    (g.induced_subgraph(best), best.clone())
}

/// Second largest eigenvalue (algebraic order) of `D_deg^{-1/2} A D_deg^{-1/2}`.
pub fn graph_lambda(g: &Graph) -> Result<f64> {
    second_eigenvalue_symmetric(&g.normalized_adjacency()?)
}

/// Largest eigenvalue modulus of `D_deg^{-1/2} A D_deg^{-1/2}` once the top
/// eigenvalue 1 is removed. For a connected graph this equals the spectral
/// radius of the random-walk operator restricted to the complement of `1`.
pub fn graph_lambda_modulus(g: &Graph) -> Result<f64> {
    let ev = symmetric_eigenvalues(&g.normalized_adjacency()?)?;
    Ok(ev.iter().skip(1).fold(0.0, |m: f64, v| m.max(v.abs())))
}

/// Parsed contents of an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    /// Node count from a `# nodes: N` header when present, else max index + 1.
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Reads the plain-text edge-list format: one whitespace-separated, 0-indexed
/// pair per line; `#` starts a comment. A `# nodes: N` comment fixes the node
/// count so trailing isolated nodes survive a round trip.
pub fn read_edge_list(reader: impl BufRead) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut declared: Option<usize> = None;
    let mut max_index: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let (content, comment) = match line.find('#') {
            Some(k) => (&line[..k], Some(&line[k + 1..])),
            None => (line.as_str(), None),
        };
        if let Some(c) = comment {
            if let Some(rest) = c.trim().strip_prefix("nodes:") {
                let n = rest.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad node count: {e}"),
                })?;
                declared = Some(n);
            }
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => {
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad node index {s:?}: {e}"),
                    })
                };
                let (a, b) = (parse(a)?, parse(b)?);
                max_index = Some(max_index.unwrap_or(0).max(a).max(b));
                edges.push((a, b));
            }
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected two node indices, found {} fields", fields.len()),
                })
            }
        }
    }
    let inferred = max_index.map_or(0, |m| m + 1);
    let n_nodes = declared.unwrap_or(inferred);
    if n_nodes < inferred {
        return Err(Error::Parse {
            line: 0,
            msg: format!("declared {n_nodes} nodes but index {} appears", inferred - 1),
        });
    }
    Ok(EdgeList { n_nodes, edges })
}

/// Loads a graph from an edge-list file.
pub fn load_edge_list(path: &Path, self_loops: bool) -> Result<Graph> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let list = read_edge_list(std::io::BufReader::new(file))?;
    Graph::new(list.n_nodes, &list.edges, self_loops)
}

/// Writes `g` in canonical edge-list form: a node-count header, then each
/// unordered edge once as `i j` with `i < j`, sorted.
pub fn write_edge_list(g: &Graph, mut w: impl Write) -> Result<()> {
    writeln!(w, "# nodes: {}", g.n_nodes())?;
    for (a, b) in g.edges() {
        writeln!(w, "{a} {b}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k3(loops: bool) -> Graph {
        Graph::new(3, &[(0, 1), (1, 2), (0, 2)], loops).unwrap()
    }

    #[test]
    fn triangle_satisfies_a1() {
        let (_, d) = build_graph(3, &[(0, 1), (1, 2), (0, 2)], false).unwrap();
        assert!(d.connected && !d.bipartite && d.satisfies_a1);
    }

    #[test]
    fn four_cycle_is_bipartite() {
        let (_, d) = build_graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], false).unwrap();
        assert!(d.bipartite);
        assert!(!d.satisfies_a1);
    }

    #[test]
    fn self_loops_substitute_for_odd_cycles() {
        let (g, d) = build_graph(2, &[(0, 1)], true).unwrap();
        assert!(d.bipartite && d.satisfies_a1);
        assert_eq!(g.degrees(), &[2, 2]);
        assert_eq!(g.neighbors(0), &[0, 1]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(Graph::new(0, &[], false), Err(Error::EmptyGraph));
        assert_eq!(Graph::new(3, &[(0, 3)], false), Err(Error::NodeOutOfRange(0, 3, 3)));
        assert_eq!(Graph::new(3, &[(1, 1)], false), Err(Error::UnexpectedSelfPair(1)));
        assert!(Graph::new(3, &[(1, 1)], true).is_ok());
    }

    #[test]
    fn duplicates_and_orientations_merge() {
        let g = Graph::new(3, &[(0, 1), (1, 0), (0, 1), (2, 1)], false).unwrap();
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.adjacency(), &g.adjacency().transpose());
    }

    #[test]
    fn generators() {
        assert_eq!(generate_graph(GraphSpec::Complete { n: 4 }, 0, false).unwrap().n_edges(), 6);
        let c5 = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        let d = c5.diagnose();
        assert!(!d.bipartite && d.satisfies_a1);
        let star = generate_graph(GraphSpec::Star { n: 5 }, 0, false).unwrap();
        assert_eq!(star.degrees()[0], 4);
        assert!(star.diagnose().bipartite);
        let path = generate_graph(GraphSpec::Path { n: 4 }, 0, false).unwrap();
        assert_eq!(path.n_edges(), 3);
        assert!(generate_graph(GraphSpec::Path { n: 1 }, 0, false).is_err());
        assert!(generate_graph(GraphSpec::ErdosRenyi { n: 5, p: 0.0 }, 0, false).is_err());
    }

    #[test]
    fn erdos_renyi_is_deterministic_and_connected() {
        let spec = GraphSpec::ErdosRenyi { n: 20, p: 0.3 };
        let a = generate_graph(spec, 7, false).unwrap();
        let b = generate_graph(spec, 7, false).unwrap();
        assert!(a.diagnose().connected);
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
    }

    #[test]
    fn erdos_renyi_budget_error_names_spec_and_seed() {
        let err = generate_graph(GraphSpec::ErdosRenyi { n: 40, p: 0.01 }, 3, false).unwrap_err();
        match err {
            Error::ResampleBudget { spec, seed, attempts } => {
                assert!(spec.contains("erdos_renyi(40"));
                assert_eq!(seed, 3);
                assert_eq!(attempts, ER_RESAMPLE_BUDGET);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lcc_cases() {
        let g = k3(false);
        let (lcc, map) = largest_connected_component(&g);
        assert_eq!(lcc, g);
        assert_eq!(map, vec![0, 1, 2]);

        // Triangles {0,1,2} and {3,4,5} tie; isolated vertex 6.
        let two = Graph::new(7, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], false).unwrap();
        let (lcc, map) = largest_connected_component(&two);
        assert_eq!(map, vec![0, 1, 2]);
        assert_eq!(lcc.n_edges(), 3);

        // Larger component wins even when it does not hold node 0.
        let g = Graph::new(5, &[(1, 2), (2, 3)], false).unwrap();
        assert_eq!(largest_connected_component(&g).1, vec![1, 2, 3]);

        let edgeless = Graph::new(3, &[], false).unwrap();
        let (lcc, map) = largest_connected_component(&edgeless);
        assert_eq!(lcc.n_nodes(), 1);
        assert_eq!(map, vec![0]);
    }

    #[test]
    fn lambda_values() {
        assert_abs_diff_eq!(graph_lambda(&k3(true)).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(graph_lambda(&k3(false)).unwrap(), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(graph_lambda_modulus(&k3(false)).unwrap(), 0.5, epsilon = 1e-12);
        let c5 = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        let expected = (2.0 * std::f64::consts::PI / 5.0).cos();
        assert_abs_diff_eq!(graph_lambda(&c5).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            graph_lambda_modulus(&c5).unwrap(),
            (4.0 * std::f64::consts::PI / 5.0).cos().abs(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lambda_rejects_isolated_node() {
        let g = Graph::new(3, &[(0, 1)], false).unwrap();
        assert_eq!(graph_lambda(&g), Err(Error::IsolatedNode(2)));
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# a comment\n0 1\n1 0\n2 1  # trailing\n\n1 2\n";
        let list = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(list.n_nodes, 3);
        let g = Graph::new(list.n_nodes, &list.edges, false).unwrap();
        let mut out = Vec::new();
        write_edge_list(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "# nodes: 3\n0 1\n1 2\n");
        let again = read_edge_list(out.as_slice()).unwrap();
        assert_eq!(Graph::new(again.n_nodes, &again.edges, false).unwrap(), g);
    }

    #[test]
    fn edge_list_keeps_isolated_trailing_nodes() {
        let g = Graph::new(5, &[(0, 1)], false).unwrap();
        let mut out = Vec::new();
        write_edge_list(&g, &mut out).unwrap();
        assert_eq!(read_edge_list(out.as_slice()).unwrap().n_nodes, 5);
    }

    #[test]
    fn edge_list_parse_errors_carry_line() {
        let err = read_edge_list("0 1\n1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_edge_list("0 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
