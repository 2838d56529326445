use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::numerics::Matrix;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Every node outside the training split.
    pub fn unlabeled(&self, num_nodes: usize) -> Vec<usize> {
        let mut is_train = vec![false; num_nodes];
        for &i in &self.train {
            is_train[i] = true;
        }
        (0..num_nodes).filter(|&i| !is_train[i]).collect()
    }
}

/// Undirected attributed graph with each edge stored once as `(u, v)`, `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub splits: Splits,
}

/// Counts of input edges rewritten while canonicalising an edge list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sanitized {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub reversed: usize,
}

/// Orders endpoints, sorts, and removes duplicates and self-loops.
pub fn canonicalize_edges(raw: impl IntoIterator<Item = (usize, usize)>) -> (Vec<(usize, usize)>, Sanitized) {
    let mut report = Sanitized::default();
    let mut edges: Vec<(usize, usize)> = raw
        .into_iter()
        .filter_map(|(a, b)| {
            if a == b {
                report.self_loops_dropped += 1;
                None
            } else if a > b {
                report.reversed += 1;
                Some((b, a))
            } else {
                Some((a, b))
            }
        })
        .collect();
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    report.duplicates_dropped = before - edges.len();
    (edges, report)
}

impl SparseGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Neighbour lists, each sorted ascending.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Edge ids incident to each node.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.num_nodes];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push(e);
            inc[v].push(e);
        }
        inc
    }

    /// Copy keeping only the edges whose flag is set.
    pub fn with_edges_retained(&self, keep: &[bool]) -> SparseGraph {
        assert_eq!(keep.len(), self.edges.len());
        let edges = self
            .edges
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(&e, _)| e)
            .collect();
        SparseGraph {
            edges,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.num_nodes;
        if self.features.nrows() != n {
            return Err(GraphError::ShapeMismatch(format!(
                "{} feature rows for {n} nodes",
                self.features.nrows()
            )));
        }
        if self.labels.len() != n {
            return Err(GraphError::ShapeMismatch(format!("{} labels for {n} nodes", self.labels.len())));
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= self.num_classes) {
            return Err(GraphError::LabelOutOfRange {
                node: i,
                label: l,
                num_classes: self.num_classes,
            });
        }
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(GraphError::InvalidIndex(format!("edge ({u}, {v}) with {n} nodes")));
            }
            if u >= v {
                return Err(GraphError::InvalidIndex(format!("edge ({u}, {v}) is not canonical")));
            }
            if k > 0 && self.edges[k - 1] >= (u, v) {
                return Err(GraphError::InvalidIndex(format!("edge list unsorted or duplicated at ({u}, {v})")));
            }
        }
        let mut seen = vec![false; n];
        for (name, ids) in [
            ("train", &self.splits.train),
            ("val", &self.splits.val),
            ("test", &self.splits.test),
        ] {
            for &i in ids {
                if i >= n {
                    return Err(GraphError::InvalidIndex(format!("{name} split holds node {i} of {n}")));
                }
                if seen[i] {
                    return Err(GraphError::InvalidIndex(format!("node {i} appears in more than one split")));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalize_counts() {
        let (edges, r) = canonicalize_edges([(1, 0), (0, 1), (2, 2), (1, 2), (2, 1), (0, 1)]);
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert_eq!(r.self_loops_dropped, 1);
        assert_eq!(r.reversed, 2);
        assert_eq!(r.duplicates_dropped, 3);
    }

    #[test]
    fn validate_rejects_overlapping_splits() {
        let g = SparseGraph {
            name: "t".into(),
            num_nodes: 3,
            num_classes: 2,
            edges: vec![(0, 1)],
            features: Matrix::zeros((3, 1)),
            labels: vec![0, 1, 0],
            splits: Splits {
                train: vec![0],
                val: vec![0],
                test: vec![2],
            },
        };
        assert!(matches!(g.validate(), Err(GraphError::InvalidIndex(_))));
    }
}
