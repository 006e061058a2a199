//! Relationship–object co-occurrence knowledge graph.
//!
//! Nodes `0..M` are relationships, `M..M+N` are objects. Edges only connect
//! the two node classes and carry weights in `[0, 1]`.

mod build;
mod io;

pub use build::{count_cooccurrence, normalize_and_prune, CooccurrenceCounts, Normalization};
pub use io::{graph_to_dot, load_graph, parse_graph, save_graph, write_graph};

use crate::data::quantize6;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    relationship_names: Vec<String>,
    object_names: Vec<String>,
    /// `(M+N) x (M+N)`, symmetric, bipartite, zero diagonal.
    adjacency: Matrix<f64>,
}

fn check_name(name: &str) -> Result<()> {
    if name.trim().is_empty() || name.contains(['\n', '\r', '"']) || name.trim() != name {
        return Err(Error::Invalid(format!("invalid node name {name:?}")));
    }
    Ok(())
}

impl KnowledgeGraph {
    /// Builds the symmetric adjacency from the `M x N` relationship→object
    /// weight block. Weights are quantized to 1e-6; quantized zeros are
    /// non-edges.
    pub fn from_bipartite(
        relationship_names: Vec<String>,
        object_names: Vec<String>,
        weights: &Matrix<f64>,
    ) -> Result<Self> {
        let (m, n) = (relationship_names.len(), object_names.len());
        weights.ensure_shape("KnowledgeGraph::from_bipartite", m, n)?;
        if m == 0 || n == 0 {
            return Err(Error::Invalid("graph needs at least one node of each kind".into()));
        }
        for name in relationship_names.iter().chain(&object_names) {
            check_name(name)?;
        }
        let mut adjacency = Matrix::zeros(m + n, m + n);
        for r in 0..m {
            for o in 0..n {
                let w = weights[(r, o)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Invalid(format!(
                        "edge weight {w} between {r} and {o} outside [0, 1]"
                    )));
                }
                let q = quantize6(w);
                adjacency[(r, m + o)] = q;
                adjacency[(m + o, r)] = q;
            }
        }
        Ok(Self {
            relationship_names,
            object_names,
            adjacency,
        })
    }

    /// Graph with no edges.
    pub fn empty(relationship_names: Vec<String>, object_names: Vec<String>) -> Result<Self> {
        let w = Matrix::zeros(relationship_names.len(), object_names.len());
        Self::from_bipartite(relationship_names, object_names, &w)
    }

    /// Random-adjacency control: every relationship–object weight drawn
    /// uniform in `[0, 1)`, then pruned at `prune_threshold`.
    pub fn random(
        relationship_names: Vec<String>,
        object_names: Vec<String>,
        prune_threshold: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Matrix::from_fn(relationship_names.len(), object_names.len(), |_, _| {
            let v: f64 = rng.gen();
            if v < prune_threshold {
                0.0
            } else {
                v
            }
        });
        Self::from_bipartite(relationship_names, object_names, &w)
    }

    pub fn num_relationships(&self) -> usize {
        self.relationship_names.len()
    }

    pub fn num_objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn relationship_names(&self) -> &[String] {
        &self.relationship_names
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn node_name(&self, node: usize) -> &str {
        let m = self.num_relationships();
        if node < m {
            &self.relationship_names[node]
        } else {
            &self.object_names[node - m]
        }
    }

    pub fn adjacency(&self) -> &Matrix<f64> {
        &self.adjacency
    }

    /// Adjacency converted to the model's scalar type.
    pub fn adjacency_as<T: Scalar>(&self) -> Matrix<T> {
        self.adjacency.clone().into_scalar()
    }

    /// Weight between relationship `r` and object `o` (object-local index).
    pub fn weight(&self, r: usize, o: usize) -> f64 {
        self.adjacency[(r, self.num_relationships() + o)]
    }

    /// Number of relationship–object edges.
    pub fn edge_count(&self) -> usize {
        let m = self.num_relationships();
        (0..m)
            .map(|r| {
                self.adjacency.row(r)[m..]
                    .iter()
                    .filter(|&&w| w != 0.0)
                    .count()
            })
            .sum()
    }

    /// Nodes sharing a nonzero edge with `node`, ascending.
    pub fn neighbors(&self, node: usize) -> Result<Vec<usize>> {
        if node >= self.num_nodes() {
            return Err(Error::Index {
                what: "graph node",
                index: node,
                len: self.num_nodes(),
            });
        }
        Ok(self
            .adjacency
            .row(node)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, _)| j)
            .collect())
    }

    /// Object-local indices adjacent to relationship `r`.
    pub fn object_neighbors(&self, r: usize) -> Vec<usize> {
        let m = self.num_relationships();
        self.adjacency.row(r)[m..]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(o, _)| o)
            .collect()
    }

    /// Checks symmetry, bipartiteness, zero diagonal and weight range.
    pub fn check_invariants(&self) -> Result<()> {
        let m = self.num_relationships();
        let v = self.num_nodes();
        for i in 0..v {
            for j in 0..v {
                let w = self.adjacency[(i, j)];
                let same_kind = (i < m) == (j < m);
                if (same_kind && w != 0.0)
                    || w != self.adjacency[(j, i)]
                    || !(0.0..=1.0).contains(&w)
                {
                    return Err(Error::Invalid(format!("adjacency invariant broken at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

trait IntoScalar {
    fn into_scalar<T: Scalar>(self) -> Matrix<T>;
}

impl IntoScalar for Matrix<f64> {
    fn into_scalar<T: Scalar>(self) -> Matrix<T> {
        let (r, c) = self.shape();
        Matrix::from_vec(r, c, self.into_vec().into_iter().map(T::lit).collect())
            .expect("same shape")
    }
}

/// Default node names: `rel<i>` / `obj<j>`.
pub fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}
