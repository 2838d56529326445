use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graphio::{NormCoefficients, SparseGraph};
use crate::numerics::{Matrix, Tape, Var};

/// Directed message-passing view of a [`SparseGraph`].
///
/// Undirected edge `e = (u, v)` expands to directed slots `2e` (`u -> v`)
/// and `2e + 1` (`v -> u`); the `N` self-loops follow at slots `2E..2E+N`.
/// Per-slot values are `(src, dst)` pairs.
pub struct GraphContext {
    pub num_nodes: usize,
    pub num_undirected: usize,
    pub edges: Rc<Vec<(usize, usize)>>,
    pub src_index: Rc<Vec<Option<usize>>>,
    pub dst_index: Rc<Vec<Option<usize>>>,
    pub dst: Rc<Vec<usize>>,
    undirected_of: Rc<Vec<Option<usize>>>,
    coef: Matrix,
    non_self: Matrix,
}

impl GraphContext {
    pub fn new(graph: &SparseGraph, norm: &NormCoefficients) -> Result<Self> {
        if norm.num_nodes() != graph.num_nodes {
            return Err(Error::Dimension(format!(
                "normalisation for {} nodes used with a {}-node graph",
                norm.num_nodes(),
                graph.num_nodes
            )));
        }
        let n = graph.num_nodes;
        let e = graph.num_edges();
        let mut edges = Vec::with_capacity(2 * e + n);
        let mut undirected_of = Vec::with_capacity(2 * e + n);
        for (id, &(u, v)) in graph.edges.iter().enumerate() {
            edges.push((u, v));
            edges.push((v, u));
            undirected_of.push(Some(id));
            undirected_of.push(Some(id));
        }
        for i in 0..n {
            edges.push((i, i));
            undirected_of.push(None);
        }
        let coef = Matrix::from_shape_fn((edges.len(), 1), |(k, _)| norm.coef(edges[k].0, edges[k].1));
        let non_self = Matrix::from_shape_fn((edges.len(), 1), |(k, _)| if k < 2 * e { 1.0 } else { 0.0 });
        Ok(Self {
            num_nodes: n,
            num_undirected: e,
            src_index: Rc::new(edges.iter().map(|&(s, _)| Some(s)).collect()),
            dst_index: Rc::new(edges.iter().map(|&(_, d)| Some(d)).collect()),
            dst: Rc::new(edges.iter().map(|&(_, d)| d).collect()),
            edges: Rc::new(edges),
            undirected_of: Rc::new(undirected_of),
            coef,
            non_self,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.edges.len()
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.coef
    }

    pub(crate) fn non_self(&self) -> &Matrix {
        &self.non_self
    }

    /// Expands a per-undirected-edge mask column into the per-slot mask,
    /// sharing one value between both directions and fixing self-loops at 1.
    pub fn expand_mask(&self, tape: &mut Tape, undirected: Var) -> Var {
        tape.gather(undirected, self.undirected_of.clone(), 1.0)
    }

    /// Per-slot mask from per-directed-edge values (`2E` entries).
    pub fn slot_mask_from_directed(&self, directed: &[f64]) -> Result<Matrix> {
        if directed.len() != 2 * self.num_undirected {
            return Err(Error::Dimension(format!(
                "{} directed mask values for {} directed edges",
                directed.len(),
                2 * self.num_undirected
            )));
        }
        Ok(Matrix::from_shape_fn((self.num_slots(), 1), |(k, _)| {
            directed.get(k).copied().unwrap_or(1.0)
        }))
    }

    /// Per-slot mask from per-undirected-edge values.
    pub fn slot_mask_from_undirected(&self, undirected: &[f64]) -> Result<Matrix> {
        if undirected.len() != self.num_undirected {
            return Err(Error::Dimension(format!(
                "{} mask values for {} edges",
                undirected.len(),
                self.num_undirected
            )));
        }
        Ok(Matrix::from_shape_fn((self.num_slots(), 1), |(k, _)| match self.undirected_of[k] {
            Some(e) => undirected[e],
            None => 1.0,
        }))
    }

    pub fn full_mask(&self) -> Matrix {
        Matrix::ones((self.num_slots(), 1))
    }
}
