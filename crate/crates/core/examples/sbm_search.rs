//! Full search on a noisy two-block SBM: how many injected edges the
//! sparsifier removes, and how the pruned architecture compares with a
//! dense two-layer GCN.
//!
//! `cargo run --release --example sbm_search [-- SEED]`

use std::collections::HashSet;

use gassip::engine::{random_removal, retrain_and_eval, retrain_seeds, run_search, SearchConfig};
use gassip::graphio::{gen_noisy_sbm, SbmParams};
use gassip::operators::OpKind;

fn main() -> gassip::Result<()> {
    env_logger::init();
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let (graph, noise) = gen_noisy_sbm(&SbmParams { seed, ..Default::default() }, 20)?;
    let config = SearchConfig { seed, ..Default::default() };

    let result = run_search(&graph, &config, 1)?;
    let out = &result.outcome;
    let noise: HashSet<usize> = noise.noise_edge_ids.into_iter().collect();
    let removed: Vec<usize> = (0..out.edges_total).filter(|&e| !out.edge_retention[e]).collect();
    let hits = removed.iter().filter(|e| noise.contains(e)).count();
    let prevalence = noise.len() as f64 / out.edges_total as f64;
    let inter = removed
        .iter()
        .filter(|&&e| {
            let (u, v) = graph.edges[e];
            graph.labels[u] != graph.labels[v]
        })
        .count();
    println!("induced architecture: {:?}", out.kinds);
    println!("edges kept {}/{}, removed {} ({} inter-class)", out.edges_kept, out.edges_total, removed.len(), inter);
    if !removed.is_empty() {
        let frac = hits as f64 / removed.len() as f64;
        println!("noise among removals {frac:.4} vs prevalence {prevalence:.4} ({:.2}x)", frac / prevalence);
        let p = removed.len() as f64 / out.edges_total as f64;
        let random: f64 = (0..10)
            .map(|s| {
                let r = random_removal(out.edges_total, p, s);
                r.iter().filter(|e| noise.contains(e)).count() as f64 / r.len() as f64 / prevalence
            })
            .sum::<f64>()
            / 10.0;
        println!("random removal of the same size: {random:.2}x");
    }
    println!("params kept {}/{}", out.params_kept, out.params_total);
    println!(
        "searched: {:.4} +- {:.4} ({:.1}s)",
        result.metrics.accuracy_mean, result.metrics.accuracy_std, result.wall_clock_seconds
    );

    let seeds = retrain_seeds(config.seed, config.retrain_runs);
    let dense = retrain_and_eval(&[OpKind::Gcn, OpKind::Gcn], None, &graph, &config, &seeds, 1)?;
    println!("dense gcn: {:.4} +- {:.4}", dense.accuracy_mean, dense.accuracy_std);
    Ok(())
}
