use super::SparseGraph;

/// Symmetric GCN normalisation `D^{-1/2} (A + I) D^{-1/2}`.
///
/// Stored as the self-loop-augmented degree of every node, so that a
/// coefficient can be looked up for any node pair, including pairs of a
/// graph with edges removed.
#[derive(Clone, Debug, PartialEq)]
pub struct NormCoefficients {
    augmented_degree: Vec<f64>,
}

impl NormCoefficients {
    pub fn coef(&self, i: usize, j: usize) -> f64 {
        1.0 / (self.augmented_degree[i] * self.augmented_degree[j]).sqrt()
    }

    pub fn num_nodes(&self) -> usize {
        self.augmented_degree.len()
    }
}

pub fn gcn_norm(graph: &SparseGraph) -> NormCoefficients {
    NormCoefficients {
        augmented_degree: graph.degrees().into_iter().map(|d| d as f64 + 1.0).collect(),
    }
}
