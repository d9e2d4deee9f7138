//! Random-graph structural priors.
//!
//! An [`UndirectedGraph`] (usually from [`generate_ws`]) is oriented into a
//! [`Dag`] by keeping the lower-triangular part of its adjacency matrix, i.e.
//! every edge points from the smaller to the larger vertex index. The DAG is
//! then layered with [`layer_dag`]: in-degree-zero vertices get layer 0, every
//! other vertex gets one more than the largest layer among its predecessors.

mod metrics;
mod record;
mod ws;

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub use metrics::{compute_metrics, GraphMetrics, Histogram};
pub use record::{GeneratorParams, GraphRecord, GRAPH_SCHEMA_VERSION};
pub use ws::generate_ws;

/// Simple undirected graph: no self-loops, no parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adjacency: Vec<BTreeSet<usize>>,
    edge_count: usize,
}

impl UndirectedGraph {
    pub fn empty(vertex_count: usize) -> Self {
        Self {
            adjacency: vec![BTreeSet::new(); vertex_count],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(vertex_count);
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {vertex_count} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on vertex {u}")));
            }
            if !g.add_edge(u, v) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(g)
    }

    /// Inserts `{u, v}`; returns false if it was already present.
    pub(crate) fn add_edge(&mut self, u: usize, v: usize) -> bool {
        debug_assert!(u != v);
        if self.adjacency[u].insert(v) {
            self.adjacency[v].insert(u);
            self.edge_count += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if self.adjacency[u].remove(&v) {
            self.adjacency[v].remove(&u);
            self.edge_count -= 1;
            true
        } else {
            false
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(u).is_some_and(|n| n.contains(&v))
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, n)| n.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    /// Dense symmetric 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.vertex_count();
        let mut a = vec![vec![0u8; n]; n];
        for (u, v) in self.edges() {
            a[u][v] = 1;
            a[v][u] = 1;
        }
        a
    }
}

/// Directed acyclic graph whose edges all satisfy `u < v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    vertex_count: usize,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Dag {
    /// Builds a DAG from directed edges. Every edge must point from a lower
    /// to a higher index, which guarantees acyclicity.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut successors = vec![BTreeSet::new(); vertex_count];
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {vertex_count} vertices"
                )));
            }
            if u >= v {
                return Err(Error::Structural(format!(
                    "edge ({u}, {v}) does not respect index order"
                )));
            }
            if !successors[u].insert(v) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self::from_successor_sets(successors))
    }

    fn from_successor_sets(successors: Vec<BTreeSet<usize>>) -> Self {
        let vertex_count = successors.len();
        let mut predecessors = vec![Vec::new(); vertex_count];
        let mut edge_count = 0;
        for (u, succ) in successors.iter().enumerate() {
            for &v in succ {
                predecessors[v].push(u);
                edge_count += 1;
            }
        }
        Self {
            vertex_count,
            successors: successors.into_iter().map(|s| s.into_iter().collect()).collect(),
            predecessors,
            edge_count,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.successors[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.predecessors[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.predecessors[v].len()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.successors[v].len()
    }

    /// Directed edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(u, s)| s.iter().map(move |&v| (u, v)))
            .collect()
    }

    /// Forgets edge directions.
    pub fn to_undirected(&self) -> UndirectedGraph {
        let mut g = UndirectedGraph::empty(self.vertex_count);
        for (u, v) in self.edges() {
            g.add_edge(u, v);
        }
        g
    }

    /// Directed density `|E| / (|V| (|V| - 1))`.
    pub fn density(&self) -> f64 {
        let n = self.vertex_count as f64;
        if self.vertex_count < 2 {
            0.0
        } else {
            self.edge_count as f64 / (n * (n - 1.0))
        }
    }

    /// Kahn topological order, or `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.vertex_count).map(|v| self.in_degree(v)).collect();
        let mut stack: Vec<usize> = (0..self.vertex_count).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.vertex_count);
        while let Some(u) = stack.pop() {
            order.push(u);
            for &v in &self.successors[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        (order.len() == self.vertex_count).then_some(order)
    }
}

/// Orients every undirected edge `{i, j}`, `i < j`, as `i -> j`.
pub fn to_dag(g: &UndirectedGraph) -> Dag {
    let successors = g
        .adjacency
        .iter()
        .enumerate()
        .map(|(u, n)| n.range(u + 1..).copied().collect::<BTreeSet<_>>())
        .collect();
    Dag::from_successor_sets(successors)
}

/// A DAG together with its layering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredDag {
    dag: Dag,
    layer_index: Vec<usize>,
    layers: Vec<Vec<usize>>,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

impl LayeredDag {
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn layer_index(&self, v: usize) -> usize {
        self.layer_index[v]
    }

    pub fn layer_indices(&self) -> &[usize] {
        &self.layer_index
    }

    /// Vertices per layer, each sorted by vertex index.
    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn vertex_count(&self) -> usize {
        self.layer_index.len()
    }

    /// Parameter count of the network induced by this layering, computed in
    /// closed form: dense input to every source, one weight per DAG edge,
    /// dense sinks to output, one bias per unit.
    pub fn network_param_count(&self, input_dim: usize, output_dim: usize) -> usize {
        input_dim * self.sources.len()
            + self.dag().edge_count()
            + self.sinks.len() * output_dim
            + self.vertex_count()
            + output_dim
    }
}

/// Assigns each vertex its layer: 0 for in-degree-zero vertices, otherwise
/// one more than the maximum layer of its predecessors. A vertex is only
/// processed once all of its predecessors have a layer.
pub fn layer_dag(d: &Dag) -> Result<LayeredDag> {
    let n = d.vertex_count();
    let mut layer: Vec<Option<usize>> = vec![None; n];
    let mut pending: Vec<usize> = (0..n).map(|v| d.in_degree(v)).collect();
    let mut ready: Vec<usize> = (0..n).rev().filter(|&v| pending[v] == 0).collect();
    for &v in &ready {
        layer[v] = Some(0);
    }
    let mut assigned = 0;
    while let Some(u) = ready.pop() {
        assigned += 1;
        if layer[u].is_none() {
            let idx = d
                .predecessors(u)
                .iter()
                .map(|&p| layer[p].expect("predecessors assigned first"))
                .max()
                .map_or(0, |m| m + 1);
            layer[u] = Some(idx);
        }
        for &v in d.successors(u) {
            pending[v] -= 1;
            if pending[v] == 0 {
                ready.push(v);
            }
        }
    }
    if assigned != n {
        return Err(Error::Structural(format!(
            "cycle detected: only {assigned} of {n} vertices could be layered"
        )));
    }
    let layer_index: Vec<usize> = layer.into_iter().map(|l| l.unwrap_or(0)).collect();
    let depth = layer_index.iter().max().map_or(0, |m| m + 1);
    let mut layers = vec![Vec::new(); depth];
    for (v, &l) in layer_index.iter().enumerate() {
        layers[l].push(v);
    }
    let sources = (0..n).filter(|&v| d.in_degree(v) == 0).collect();
    let sinks = (0..n).filter(|&v| d.out_degree(v) == 0).collect();
    Ok(LayeredDag {
        dag: d.clone(),
        layer_index,
        layers,
        sources,
        sinks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_orients_by_index() {
        let g = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let d = to_dag(&g);
        assert_eq!(d.edges(), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(d.topological_order().is_some());
    }

    #[test]
    fn empty_graph_gives_empty_dag() {
        let d = to_dag(&UndirectedGraph::empty(5));
        assert_eq!(d.vertex_count(), 5);
        assert_eq!(d.edge_count(), 0);
    }

    #[test]
    fn chain_layers() {
        let d = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let ld = layer_dag(&d).unwrap();
        assert_eq!(ld.layer_indices(), &[0, 1, 2]);
    }

    #[test]
    fn max_predecessor_rule_creates_skip() {
        let d = Dag::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let ld = layer_dag(&d).unwrap();
        assert_eq!(ld.layer_indices(), &[0, 1, 2]);
        assert_eq!(ld.layers(), &[vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn isolated_vertex_is_layer_zero_source_and_sink() {
        let d = Dag::from_edges(4, &[(0, 1), (1, 3)]).unwrap();
        let ld = layer_dag(&d).unwrap();
        assert_eq!(ld.layer_index(2), 0);
        assert!(ld.sources().contains(&2));
        assert!(ld.sinks().contains(&2));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(UndirectedGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(UndirectedGraph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(UndirectedGraph::from_edges(3, &[(0, 3)]).is_err());
        assert!(Dag::from_edges(3, &[(2, 1)]).is_err());
    }

    #[test]
    fn directed_density_is_half_undirected() {
        let g = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let m = compute_metrics(&g);
        assert!((to_dag(&g).density() - m.density_undirected / 2.0).abs() < 1e-15);
    }
}
