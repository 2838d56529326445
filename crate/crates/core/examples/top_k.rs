//! Ranks the most probable discrete architectures of a supernet.

use gassip::operators::OpKind;
use gassip::supernet::{arch_probs, induce_architecture, top_k_architectures, Supernet, SupernetConfig};
use ndarray::array;

fn main() -> gassip::Result<()> {
    let mut net = Supernet::new(&SupernetConfig {
        in_dim: 8,
        hidden: 16,
        out_dim: 3,
        layers: 2,
        candidates: OpKind::ALL.to_vec(),
        dropout: 0.5,
        score_init: 3.0,
        seed: 0,
    })?;
    net.layers[0].alpha.value = array![[0.8, 0.1, 0.5, -0.2, 0.0]];
    net.layers[1].alpha.value = array![[0.3, 0.3, 0.9, 0.0, -1.0]];
    for (l, p) in arch_probs(&net).iter().enumerate() {
        println!("layer {l}: {p:.3?}");
    }
    for (arch, p) in top_k_architectures(&net, 4)? {
        println!("{:?} p={p:.4}", arch.kinds(&net));
    }
    println!("induced: {:?}", induce_architecture(&net).kinds(&net));
    Ok(())
}
