//! Graph container, adjacency normalization, dataset files, Left-Out-Classes
//! splits and synthetic generators.

mod io;
mod split;
mod synthetic;

pub use io::{
    load_graph, parse_edges, parse_features, parse_labels, parse_meta, save_graph, LoadReport, Meta,
};
pub use split::{make_loc_split, ClassMap, SplitConfig, SplitSpec};
pub use synthetic::{
    generate_csbm, generate_csbm_graph, sample_gaussian_world, CsbmConfig, GaussianSpec,
};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};

/// Undirected attributed graph with optional node labels.
///
/// The adjacency is stored symmetric, binary and without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    features: Matrix,
    adjacency: CsrMatrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Edges are symmetrized and
    /// deduplicated; self-loops are dropped and counted in the second return
    /// value.
    pub fn from_edges(
        features: Matrix,
        edges: &[(usize, usize)],
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<(Self, usize)> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if let Some((i, c)) =
            labels.iter().enumerate().find_map(|(i, l)| l.filter(|&c| c >= num_classes).map(|c| (i, c)))
        {
            return Err(Error::InvalidGraph(format!(
                "node {i} has label {c} but num_classes is {num_classes}"
            )));
        }
        let mut self_loops = 0;
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) references a node >= {n}")));
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            pairs.push((u, v));
            pairs.push((v, u));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let triplets: Vec<_> = pairs.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets)?;
        Ok((Self { features, adjacency, labels, num_classes }, self_loops))
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency.row_nnz(node)
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        self.adjacency.row(node).0
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    /// Node indices carrying label `class`.
    pub fn nodes_of_class(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == Some(class)).then_some(i))
            .collect()
    }

    pub fn normalize(&self, kind: NormKind) -> NormalizedAdjacency {
        normalize(self, kind)
    }
}

/// Which propagation matrix to build from the adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the degree matrix of `A + I`.
    SymSelfloop,
    /// `D^{-1} A`; rows of isolated nodes are zero.
    RwNoselfloop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub kind: NormKind,
    pub matrix: CsrMatrix,
}

pub fn normalize(graph: &Graph, kind: NormKind) -> NormalizedAdjacency {
    let n = graph.num_nodes();
    let adj = graph.adjacency();
    let matrix = match kind {
        NormKind::SymSelfloop => {
            let deg: Vec<f64> = (0..n).map(|i| (adj.row_nnz(i) + 1) as f64).collect();
            let mut triplets = Vec::with_capacity(adj.nnz() + n);
            for i in 0..n {
                triplets.push((i, i, 1.0 / deg[i]));
                for &j in adj.row(i).0 {
                    triplets.push((i, j, 1.0 / (deg[i] * deg[j]).sqrt()));
                }
            }
            CsrMatrix::from_triplets(n, n, &triplets).expect("indices come from a valid adjacency")
        }
        NormKind::RwNoselfloop => adj.map_entries(|i, _, v| v / adj.row_nnz(i) as f64),
    };
    NormalizedAdjacency { kind, matrix }
}
