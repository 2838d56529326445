//! Graph storage, the portable on-disk format, GCN normalisation, and
//! synthetic graph generation.

mod format;
mod graph;
mod norm;
mod synth;

pub use format::{load_graph, load_graph_with_report, load_synthetic_meta, save_graph, save_synthetic_meta};
pub use graph::{canonicalize_edges, Sanitized, SparseGraph, Splits};
pub use norm::{gcn_norm, NormCoefficients};
pub use synth::{gen_noisy_sbm, gen_sbm, inject_noise_edges, stratified_split, SbmParams, SyntheticMeta, SyntheticParams};
