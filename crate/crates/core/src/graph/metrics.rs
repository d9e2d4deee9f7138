use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::UndirectedGraph;

/// Value -> count histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram(pub BTreeMap<usize, usize>);

impl Histogram {
    fn add(&mut self, value: usize, count: usize) {
        *self.0.entry(value).or_insert(0) += count;
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

/// Graph-theoretic properties of an undirected graph.
///
/// Path-based quantities (diameter, path lengths, eccentricity, betweenness,
/// closeness) are computed on the largest connected component; when the graph
/// is not connected `disconnected` is set and `component_size` tells how many
/// vertices were used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub density_undirected: f64,
    pub density_directed: f64,
    pub diameter: usize,
    pub avg_path_length: f64,
    pub avg_eccentricity: f64,
    pub avg_betweenness: f64,
    pub avg_closeness: f64,
    pub degree_distribution: Histogram,
    pub path_length_distribution: Histogram,
    pub disconnected: bool,
    pub component_size: usize,
}

pub fn compute_metrics(g: &UndirectedGraph) -> GraphMetrics {
    let n = g.vertex_count();
    let e = g.edge_count();
    let nf = n as f64;
    let (density_undirected, density_directed) = if n < 2 {
        (0.0, 0.0)
    } else {
        (e as f64 / (nf * (nf - 1.0) / 2.0), e as f64 / (nf * (nf - 1.0)))
    };

    let mut degree_distribution = Histogram::default();
    for v in 0..n {
        degree_distribution.add(g.degree(v), 1);
    }

    let components = connected_components(g);
    let largest = components
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
        .cloned()
        .unwrap_or_default();
    let disconnected = components.len() > 1;
    let comp = if disconnected { induced_subgraph(g, &largest) } else { g.clone() };
    let nc = comp.vertex_count();

    let mut path_length_distribution = Histogram::default();
    let mut eccentricity_sum = 0usize;
    let mut diameter = 0usize;
    let mut closeness_sum = 0.0;
    let mut distance_sum = 0usize;
    for s in 0..nc {
        let dist = bfs_distances(&comp, s);
        let mut ecc = 0;
        let mut total = 0;
        for (t, d) in dist.iter().enumerate() {
            let d = d.expect("component is connected");
            ecc = ecc.max(d);
            total += d;
            if t > s {
                path_length_distribution.add(d, 1);
            }
        }
        eccentricity_sum += ecc;
        diameter = diameter.max(ecc);
        distance_sum += total;
        if total > 0 {
            closeness_sum += (nc - 1) as f64 / total as f64;
        }
    }
    let pairs = nc * nc.saturating_sub(1) / 2;
    let avg_path_length = if pairs == 0 { 0.0 } else { distance_sum as f64 / 2.0 / pairs as f64 };
    let (avg_eccentricity, avg_closeness) = if nc == 0 {
        (0.0, 0.0)
    } else {
        (eccentricity_sum as f64 / nc as f64, closeness_sum / nc as f64)
    };
    let betweenness = betweenness_centrality(&comp);
    let avg_betweenness = if nc == 0 { 0.0 } else { betweenness.iter().sum::<f64>() / nc as f64 };

    GraphMetrics {
        vertex_count: n,
        edge_count: e,
        density_undirected,
        density_directed,
        diameter,
        avg_path_length,
        avg_eccentricity,
        avg_betweenness,
        avg_closeness,
        degree_distribution,
        path_length_distribution,
        disconnected,
        component_size: nc,
    }
}

/// Unweighted single-source distances; `None` for unreachable vertices.
pub fn bfs_distances(g: &UndirectedGraph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.vertex_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for w in g.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Betweenness centrality (Brandes), normalized by `(n-1)(n-2)/2` so values
/// lie in `[0, 1]` for connected graphs.
pub fn betweenness_centrality(g: &UndirectedGraph) -> Vec<f64> {
    let n = g.vertex_count();
    let mut centrality = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[u] + 1 {
                    sigma[w] += sigma[u];
                    preds[w].push(u);
                }
            }
        }
        for &w in order.iter().rev() {
            for &u in &preds[w] {
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // every unordered pair was counted from both ends
    let scale = if n > 2 { 1.0 / ((n - 1) * (n - 2)) as f64 } else { 0.0 };
    centrality.iter_mut().for_each(|c| *c *= scale);
    centrality
}

/// Connected components, each sorted, ordered by smallest vertex.
pub fn connected_components(g: &UndirectedGraph) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            i += 1;
            for w in g.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn induced_subgraph(g: &UndirectedGraph, vertices: &[usize]) -> UndirectedGraph {
    let mut relabel = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in vertices.iter().enumerate() {
        relabel[v] = i;
    }
    let mut sub = UndirectedGraph::empty(vertices.len());
    for &(u, v) in &g.edges() {
        if relabel[u] != usize::MAX && relabel[v] != usize::MAX {
            sub.add_edge(relabel[u], relabel[v]);
        }
    }
    sub
}
