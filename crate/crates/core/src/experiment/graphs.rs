use serde::{Deserialize, Serialize};

use super::manifest::ExperimentManifest;
use crate::data::{IMAGE_PIXELS, NUM_CLASSES};
use crate::error::Result;
use crate::graph::{layer_dag, to_dag, GeneratorParams, GraphMetrics, GraphRecord};
use crate::measure::GraphProperty;
use crate::seed::{derive_seed, rng_from_seed};

/// An accepted graph with the size of the network it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub record: GraphRecord,
    pub param_count: usize,
    pub depth: usize,
}

impl GraphEntry {
    pub fn id(&self) -> &str {
        &self.record.graph_id
    }

    /// Properties come from the undirected graph; the parameter count from
    /// the induced network.
    pub fn property(&self, p: GraphProperty) -> f64 {
        property_value(&self.record.metrics, self.param_count, p)
    }
}

pub fn property_value(m: &GraphMetrics, param_count: usize, p: GraphProperty) -> f64 {
    match p {
        GraphProperty::Parameters => param_count as f64,
        GraphProperty::Density => m.density_undirected,
        GraphProperty::AvgPathLength => m.avg_path_length,
        GraphProperty::AvgEccentricity => m.avg_eccentricity,
        GraphProperty::AvgBetweenness => m.avg_betweenness,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphDatasetSummary {
    pub manifest_hash: String,
    pub accepted: Vec<String>,
    pub candidates: usize,
    pub rejected_below: usize,
    pub rejected_above: usize,
    pub rejected_invalid: usize,
    pub passes: usize,
    /// The pass budget ran out before the target count was reached.
    pub exhausted: bool,
}

/// Searches the grid pass by pass, in a fresh seeded order with fresh
/// generator seeds each pass, keeping graphs whose network parameter count
/// lies in the manifest range until the target count is reached.
pub fn build_graph_dataset(m: &ExperimentManifest) -> Result<(Vec<GraphEntry>, GraphDatasetSummary)> {
    m.validate()?;
    let mut summary = GraphDatasetSummary {
        manifest_hash: m.hash(),
        ..GraphDatasetSummary::default()
    };
    let mut accepted = Vec::new();
    let [low, high] = m.param_range;
    'passes: for pass in 0..m.max_grid_passes {
        summary.passes = pass + 1;
        let mut points = m.grid.points();
        let order_seed = derive_seed(m.master_seed, &["grid-order", &pass.to_string()]);
        rand::seq::SliceRandom::shuffle(points.as_mut_slice(), &mut rng_from_seed(order_seed));
        for (size, nei, p) in points {
            if accepted.len() >= m.target_graph_count {
                break 'passes;
            }
            summary.candidates += 1;
            let params = GeneratorParams {
                size,
                nei,
                p,
                seed: derive_seed(m.master_seed, &["graph", &pass.to_string(), &size.to_string(), &nei.to_string(), &p.to_string()]),
            };
            let Ok(g) = params.generate() else {
                summary.rejected_invalid += 1;
                continue;
            };
            let ld = layer_dag(&to_dag(&g))?;
            let count = ld.network_param_count(IMAGE_PIXELS, NUM_CLASSES);
            if count < low {
                summary.rejected_below += 1;
                continue;
            }
            if count > high {
                summary.rejected_above += 1;
                continue;
            }
            let id = format!("g{:03}", accepted.len());
            summary.accepted.push(id.clone());
            accepted.push(GraphEntry {
                record: GraphRecord::new(id, params, &g),
                param_count: count,
                depth: ld.layers().len(),
            });
        }
    }
    if accepted.len() < m.target_graph_count {
        summary.exhausted = true;
        log::warn!(
            "graph search exhausted after {} passes: {} of {} graphs accepted",
            summary.passes,
            accepted.len(),
            m.target_graph_count
        );
    }
    Ok((accepted, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Grid;

    fn small_manifest(range: [usize; 2], target: usize) -> ExperimentManifest {
        ExperimentManifest {
            grid: Grid {
                sizes: vec![250],
                neis: vec![2, 4],
                ps: vec![0.5, 0.9],
            },
            target_graph_count: target,
            param_range: range,
            max_grid_passes: 3,
            ..ExperimentManifest::default()
        }
    }

    #[test]
    fn vacuous_filter_accepts_first_candidate() {
        let (g, s) = build_graph_dataset(&small_manifest([0, usize::MAX], 1)).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(s.candidates, 1);
        assert!(!s.exhausted);
    }

    #[test]
    fn infeasible_filter_exhausts() {
        let (g, s) = build_graph_dataset(&small_manifest([1, 2], 5)).unwrap();
        assert!(g.is_empty());
        assert!(s.exhausted);
        assert_eq!(s.candidates, 12);
        assert_eq!(s.rejected_above, 12);
    }

    #[test]
    fn accepted_graphs_in_range_and_deterministic() {
        let m = small_manifest([0, usize::MAX], 6);
        let (a, _) = build_graph_dataset(&m).unwrap();
        let (b, _) = build_graph_dataset(&m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        let seeds: std::collections::BTreeSet<u64> = a.iter().map(|e| e.record.generator.seed).collect();
        assert_eq!(seeds.len(), 6);
    }
}
