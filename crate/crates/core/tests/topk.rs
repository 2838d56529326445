mod common;

use common::*;
use gassip::numerics::softmax_vec;
use gassip::supernet::{top_k_from_probs, Architecture};

#[test]
fn matches_exhaustive_enumeration() {
    let (cases, bad) = top_k_oracle(5);
    assert!(cases > 1000);
    assert_eq!(bad, 0, "{bad} of {cases} rankings differ");
}

#[test]
fn uniform_space_ranks_lexicographically() {
    let probs = vec![softmax_vec(&[0.0; 3]), softmax_vec(&[0.0; 3])];
    let top = top_k_from_probs(&probs, 4).unwrap();
    let archs: Vec<Architecture> = top.into_iter().map(|a| a.0).collect();
    assert_eq!(
        archs,
        vec![
            Architecture(vec![0, 0]),
            Architecture(vec![0, 1]),
            Architecture(vec![0, 2]),
            Architecture(vec![1, 0])
        ]
    );
}
