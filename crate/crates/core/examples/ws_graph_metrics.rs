//! Watts-Strogatz graph, its acyclic orientation, layering and metrics.

use snnlab::graph::{compute_metrics, generate_ws, layer_dag, to_dag};

fn main() -> snnlab::Result<()> {
    let g = generate_ws(300, 2, 0.6, 42)?;
    let m = compute_metrics(&g);
    println!("WS(300, 2, 0.6): {} vertices, {} edges", m.vertex_count, m.edge_count);
    println!("  density            {:.5}", m.density_undirected);
    println!("  diameter           {}", m.diameter);
    println!("  avg path length    {:.4}", m.avg_path_length);
    println!("  avg eccentricity   {:.4}", m.avg_eccentricity);
    println!("  avg betweenness    {:.6}", m.avg_betweenness);
    println!("  avg closeness      {:.4}", m.avg_closeness);
    println!("  degree histogram   {:?}", m.degree_distribution.0);
    if m.disconnected {
        println!("  disconnected; path metrics use the largest component ({} vertices)", m.component_size);
    }

    let ld = layer_dag(&to_dag(&g))?;
    let widths: Vec<usize> = ld.layers().iter().map(Vec::len).collect();
    println!("layered DAG: {} layers, {} sources, {} sinks", widths.len(), ld.sources().len(), ld.sinks().len());
    println!("  layer widths {widths:?}");
    println!("  network parameters for 784 -> 10: {}", ld.network_param_count(784, 10));
    Ok(())
}
