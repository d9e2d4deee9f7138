use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compute_metrics, generate_ws, GraphMetrics, UndirectedGraph};
use crate::error::{Error, Result};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Watts-Strogatz generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub size: usize,
    pub nei: usize,
    pub p: f64,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn generate(&self) -> Result<UndirectedGraph> {
        generate_ws(self.size, self.nei, self.p, self.seed)
    }
}

/// On-disk form of one generated graph, one JSON document per graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub schema_version: u32,
    pub graph_id: String,
    pub generator: GeneratorParams,
    pub vertex_count: usize,
    pub edges: Vec<[usize; 2]>,
    pub metrics: GraphMetrics,
    pub disconnected_flag: bool,
}

impl GraphRecord {
    pub fn new(graph_id: impl Into<String>, generator: GeneratorParams, g: &UndirectedGraph) -> Self {
        let metrics = compute_metrics(g);
        Self {
            schema_version: GRAPH_SCHEMA_VERSION,
            graph_id: graph_id.into(),
            generator,
            vertex_count: g.vertex_count(),
            edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            disconnected_flag: metrics.disconnected,
            metrics,
        }
    }

    pub fn graph(&self) -> Result<UndirectedGraph> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        UndirectedGraph::from_edges(self.vertex_count, &edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rec: Self = serde_json::from_str(&text)?;
        if rec.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported graph schema version {}",
                rec.schema_version
            )));
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_through_json() {
        let params = GeneratorParams { size: 30, nei: 2, p: 0.5, seed: 9 };
        let g = params.generate().unwrap();
        let rec = GraphRecord::new("g000", params, &g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g000.json");
        rec.save(&path).unwrap();
        let back = GraphRecord::load(&path).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.graph().unwrap(), g);
    }
}
