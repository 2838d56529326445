//! Retrains fixed architectures from scratch on an SBM graph, with and
//! without a pruned weight set.

use gassip::engine::{layer_dims, retrain_and_eval, retrain_seeds, SearchConfig};
use gassip::graphio::{gen_sbm, SbmParams};
use gassip::numerics::Matrix;
use gassip::operators::OpKind;

fn main() -> gassip::Result<()> {
    let (graph, _) = gen_sbm(&SbmParams::default())?;
    let config = SearchConfig {
        retrain_epochs: 200,
        retrain_runs: 5,
        ..Default::default()
    };
    let seeds = retrain_seeds(config.seed, config.retrain_runs);
    for arch in [vec![OpKind::Gcn, OpKind::Gcn], vec![OpKind::Sage, OpKind::Gcn], vec![OpKind::Linear, OpKind::Linear]] {
        let m = retrain_and_eval(&arch, None, &graph, &config, &seeds, 1)?;
        println!("{arch:?}: {:.4} +- {:.4}, {} params", m.accuracy_mean, m.accuracy_std, m.params_total);
    }

    // keep every other input row of the first layer
    let kinds = [OpKind::Gcn, OpKind::Gcn];
    let dims = layer_dims(graph.num_features(), config.hidden, graph.num_classes, 2);
    let masks: Vec<Vec<Matrix>> = kinds
        .iter()
        .zip(&dims)
        .enumerate()
        .map(|(l, (k, &(din, dout)))| {
            k.tensor_shapes(din, dout)
                .into_iter()
                .map(|s| Matrix::from_shape_fn(s, |(i, _)| if l == 0 && i % 2 == 1 { 0.0 } else { 1.0 }))
                .collect()
        })
        .collect();
    let m = retrain_and_eval(&kinds, Some(&masks), &graph, &config, &seeds, 1)?;
    println!("pruned gcn: {:.4} +- {:.4}, {}/{} params", m.accuracy_mean, m.accuracy_std, m.params_kept, m.params_total);
    Ok(())
}
