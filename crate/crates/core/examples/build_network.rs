//! Masked network induced by a layered DAG: weight groups, skip
//! connections, parameter count and checkpoint round trip.

use snnlab::graph::{generate_ws, layer_dag, to_dag};
use snnlab::network::{build_network, init_weights, network_to_graph, CheckpointMeta, InitMethod, MaskedNetwork};

fn main() -> snnlab::Result<()> {
    let g = generate_ws(250, 2, 0.9, 7)?;
    let dag = to_dag(&g);
    let ld = layer_dag(&dag)?;
    let mut net = build_network(&ld, 784, 10)?;
    init_weights(&mut net, InitMethod::GlorotUniform, 1);

    let skips = net.groups().iter().filter(|g| g.is_skip()).count();
    println!("{} hidden layers, {} hidden units", net.depth(), net.hidden_units());
    println!("{} weight groups ({} skip groups)", net.groups().len(), skips);
    println!("{} trainable parameters", net.param_count());
    for grp in net.groups().iter().take(6) {
        println!(
            "  {:?} -> {:?}: {}x{} matrix, {} active",
            grp.source(),
            grp.target(),
            grp.weights().nrows(),
            grp.weights().ncols(),
            grp.active_count()
        );
    }

    let recovered = network_to_graph(&net)?;
    println!("hidden structure recovers the DAG: {}", recovered.edges() == dag.edges());

    let path = std::env::temp_dir().join("snnlab_example.ckpt");
    net.save_checkpoint(&path, &CheckpointMeta::default())?;
    let (back, _) = MaskedNetwork::load_checkpoint(&path)?;
    println!("checkpoint round trip keeps the masks: {}", back.mask_pattern() == net.mask_pattern());
    Ok(())
}
