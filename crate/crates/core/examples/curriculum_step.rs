//! A handful of curriculum sparsification steps on a warmed-up supernet,
//! printing the hardest edges and the mask threshold.

use gassip::engine::{SearchConfig, SearchState};
use gassip::graphio::{gen_noisy_sbm, SbmParams};

fn main() -> gassip::Result<()> {
    let params = SbmParams {
        block_sizes: vec![40, 40],
        p_in: 0.15,
        ..Default::default()
    };
    let (graph, meta) = gen_noisy_sbm(&params, 8)?;
    let config = SearchConfig {
        epochs: 40,
        warmup: 10,
        hidden: 16,
        ..Default::default()
    };
    let mut state = SearchState::new(&graph, &config)?;
    for _ in 0..config.warmup {
        state.run_epoch()?;
    }
    for step in 0..5 {
        let report = state.structure_step()?;
        state.refresh_cache()?;
        let kept = state.mask.binarize().iter().filter(|&&k| k).count();
        println!(
            "step {step}: archs {:?}, gamma {:.4}, kept {kept}/{}",
            report.architectures.iter().map(|(a, _)| a.0.clone()).collect::<Vec<_>>(),
            state.mask.gamma(),
            graph.num_edges()
        );
    }
    let mut hardest: Vec<usize> = (0..graph.num_edges()).collect();
    hardest.sort_by(|&a, &b| state.curriculum.d_combined[b].total_cmp(&state.curriculum.d_combined[a]));
    for &e in &hardest[..5] {
        let (u, v) = graph.edges[e];
        println!(
            "edge {e} ({u}, {v}): difficulty {:.3}, injected {}, same block {}",
            state.curriculum.d_combined[e],
            meta.noise_edge_ids.contains(&e),
            graph.labels[u] == graph.labels[v]
        );
    }
    Ok(())
}
