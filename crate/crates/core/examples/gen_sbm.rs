//! Generates a noisy two-block SBM and writes it as a graph directory.
//!
//! `cargo run --example gen_sbm -- OUT_DIR`

use gassip::graphio::{gen_noisy_sbm, load_graph, load_synthetic_meta, save_graph, save_synthetic_meta, SbmParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sbm_graph".into());
    let (graph, meta) = gen_noisy_sbm(&SbmParams::default(), 20)?;
    save_graph(&graph, &out)?;
    save_synthetic_meta(&meta, &out)?;

    let back = load_graph(&out)?;
    assert_eq!(back, graph);
    let noise = load_synthetic_meta(&out)?.unwrap_or_default().noise_edge_ids;
    let inter = graph.edges.iter().filter(|&&(u, v)| graph.labels[u] != graph.labels[v]).count();
    println!("{out}: {} nodes, {} edges, {inter} inter-block", graph.num_nodes, graph.num_edges());
    println!(
        "splits {}/{}/{}, injected edge ids {:?}",
        graph.splits.train.len(),
        graph.splits.val.len(),
        graph.splits.test.len(),
        &noise[..noise.len().min(5)]
    );
    Ok(())
}
