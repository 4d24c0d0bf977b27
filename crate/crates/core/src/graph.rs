//! Epsilon nearest-neighbor graph over active bins.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridding::{BinIndex, SpatialGrid};
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Epsilon,
    Merge,
}

impl fmt::Display for EdgeOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeOrigin::Epsilon => "epsilon",
            EdgeOrigin::Merge => "merge",
        })
    }
}

impl FromStr for EdgeOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(EdgeOrigin::Epsilon),
            "merge" => Ok(EdgeOrigin::Merge),
            other => Err(Error::Parse(format!("unknown edge tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub bin: BinIndex,
    pub row: usize,
    pub col: usize,
    pub lat: f64,
    pub lon: f64,
}

impl GraphNode {
    pub fn distance(&self, other: &GraphNode) -> f64 {
        (self.lat - other.lat).hypot(self.lon - other.lon)
    }
}

/// Undirected edge between node positions `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub origin: EdgeOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinGraph {
    pub nodes: Vec<GraphNode>,
    /// Sorted by `(a, b)`; no self-loops or duplicates.
    pub edges: Vec<Edge>,
}

/// Graph nodes for `bins`, placed at their cell centers.
pub fn nodes_for_bins(grid: &SpatialGrid, bins: &[BinIndex]) -> Vec<GraphNode> {
    bins.iter()
        .map(|&bin| {
            let (row, col) = grid.row_col(bin);
            let (lat, lon) = grid.center(bin);
            GraphNode {
                bin,
                row,
                col,
                lat,
                lon,
            }
        })
        .collect()
}

impl BinGraph {
    fn from_edges(nodes: Vec<GraphNode>, mut edges: Vec<Edge>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
            if e.a == e.b {
                return Err(Error::InvalidArgument(format!("self-loop on node {}", e.a)));
            }
            if e.b >= nodes.len() {
                return Err(Error::InvalidArgument(format!("edge endpoint {} out of range", e.b)));
            }
        }
        edges.sort();
        if edges.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return Err(Error::InvalidArgument("duplicate edge".into()));
        }
        Ok(BinGraph { nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbor lists (excluding the node itself), each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        self.edges.binary_search_by(|e| (e.a, e.b).cmp(&(a, b))).is_ok()
    }

    /// Copy with only epsilon-tagged edges.
    pub fn epsilon_edges_only(&self) -> BinGraph {
        BinGraph {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| e.origin == EdgeOrigin::Epsilon)
                .copied()
                .collect(),
        }
    }

    /// Relabel nodes so that new node `k` is old node `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<BinGraph> {
        let n = self.nodes.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidArgument("order is not a permutation".into()));
            }
            inverse[old] = new;
        }
        if order.len() != n {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        let nodes = order.iter().map(|&old| self.nodes[old]).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                a: inverse[e.a],
                b: inverse[e.b],
                origin: e.origin,
            })
            .collect();
        BinGraph::from_edges(nodes, edges)
    }

    /// Edge list: one `i j tag` line per edge.
    pub fn edge_list(&self) -> String {
        self.edges
            .iter()
            .map(|e| format!("{} {} {}\n", e.a, e.b, e.origin))
            .collect()
    }

    /// Node table: one `bin_index row col lat_center lon_center` line per node.
    pub fn node_table(&self) -> String {
        self.nodes
            .iter()
            .map(|n| {
                format!(
                    "{} {} {} {} {}\n",
                    n.bin,
                    n.row,
                    n.col,
                    textio::fmt_f64(n.lat),
                    textio::fmt_f64(n.lon)
                )
            })
            .collect()
    }

    pub fn parse(node_table: &str, edge_list: &str) -> Result<BinGraph> {
        let nodes = parse_node_table(node_table)?;
        let edges = parse_edge_list(edge_list)?;
        BinGraph::from_edges(nodes, edges).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        textio::write(&dir.join("nodes.txt"), self.node_table())?;
        textio::write(&dir.join("edges.txt"), self.edge_list())
    }

    pub fn load(dir: &Path) -> Result<BinGraph> {
        BinGraph::parse(
            &textio::read_to_string(&dir.join("nodes.txt"))?,
            &textio::read_to_string(&dir.join("edges.txt"))?,
        )
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
}

fn field<T: FromStr>(fields: &[&str], i: usize, line: usize) -> Result<T> {
    fields
        .get(i)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad field {}", i + 1)))
}

pub fn parse_node_table(text: &str) -> Result<Vec<GraphNode>> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 5 {
                return Err(Error::Parse(format!("line {line}: expected 5 fields")));
            }
            let node = GraphNode {
                bin: BinIndex(field(&f, 0, line)?),
                row: field(&f, 1, line)?,
                col: field(&f, 2, line)?,
                lat: field(&f, 3, line)?,
                lon: field(&f, 4, line)?,
            };
            if !(node.lat.is_finite() && node.lon.is_finite()) {
                return Err(Error::Parse(format!("line {line}: non-finite coordinate")));
            }
            Ok(node)
        })
        .collect()
}

pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {line}: expected 3 fields")));
            }
            Ok(Edge {
                a: field(&f, 0, line)?,
                b: field(&f, 1, line)?,
                origin: f[2].parse()?,
            })
        })
        .collect()
}

/// Connect every pair of nodes whose centers are within `epsilon` degrees.
pub fn epsilon_nng(nodes: Vec<GraphNode>, epsilon: f64) -> Result<BinGraph> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let d = nodes[i].distance(&nodes[j]);
            if d == 0.0 {
                return Err(Error::InvalidArgument(format!("nodes {i} and {j} share a center")));
            }
            if d <= epsilon {
                edges.push(Edge {
                    a: i,
                    b: j,
                    origin: EdgeOrigin::Epsilon,
                });
            }
        }
    }
    BinGraph::from_edges(nodes, edges)
}

/// Join components by repeatedly adding the globally closest inter-component
/// pair as a merge edge. Distance ties go to the smaller `(min bin, max bin)`.
pub fn connect_components(graph: BinGraph) -> BinGraph {
    let n = graph.nodes.len();
    let mut uf = UnionFind::<usize>::new(n);
    let mut components = n;
    for e in &graph.edges {
        if uf.union(e.a, e.b) {
            components -= 1;
        }
    }
    if components <= 1 {
        return graph;
    }

    let nodes = &graph.nodes;
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !uf.equiv(i, j) {
                let key = (nodes[i].bin.min(nodes[j].bin), nodes[i].bin.max(nodes[j].bin));
                candidates.push((nodes[i].distance(&nodes[j]), key, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut edges = graph.edges.clone();
    for (_, _, i, j) in candidates {
        if uf.union(i, j) {
            edges.push(Edge {
                a: i,
                b: j,
                origin: EdgeOrigin::Merge,
            });
            components -= 1;
            if components == 1 {
                break;
            }
        }
    }
    edges.sort();
    BinGraph {
        nodes: graph.nodes,
        edges,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub components: usize,
}

pub fn degree_stats(graph: &BinGraph) -> DegreeStats {
    let adj = graph.adjacency();
    let degrees = adj.iter().map(Vec::len).collect();
    let mut seen = vec![false; adj.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    DegreeStats { degrees, components }
}
