//! Overlap between removal sets: random against random, and two
//! score-ranked removals that mostly agree.

use gassip::engine::{lowest_scored, overlap, random_removal};

fn main() -> gassip::Result<()> {
    let (edges, p) = (5278, 0.1);
    for seed in 0..5 {
        let a = random_removal(edges, p, 2 * seed);
        let b = random_removal(edges, p, 2 * seed + 1);
        println!("random pair {seed}: {:.4}", overlap(&a, &b, p, edges)?);
    }
    let scores: Vec<f64> = (0..edges).map(|e| ((e * 7919) % edges) as f64).collect();
    let nudged: Vec<f64> = scores.iter().enumerate().map(|(e, s)| s + (e % 13) as f64 * 20.0).collect();
    let a = lowest_scored(&scores, p);
    let b = lowest_scored(&nudged, p);
    println!("ranked pair: {:.4}", overlap(&a, &b, p, edges)?);
    println!("identical: {:.4}", overlap(&a, &a, p, edges)?);
    Ok(())
}
