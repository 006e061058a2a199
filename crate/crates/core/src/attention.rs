//! Structure-masked attention over object nodes and relationship scoring.

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::math::matrix::{axpy, dot};
use crate::math::Matrix;
use crate::scalar::{sigmoid, Scalar};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How attention coefficients are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    /// Learned coefficients from fused hidden states.
    Learned,
    /// Attention removed: every neighbor slot weighted 1.
    Uniform,
    /// Neighbor slots filled with seeded uniform draws, keyed by sample id.
    Random { seed: u64 },
}

/// `M x N` coefficients; exactly zero off the graph's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap<T> {
    pub alpha: Matrix<T>,
}

impl<T: Scalar> AttentionMap<T> {
    pub fn get(&self, r: usize, o: usize) -> T {
        self.alpha[(r, o)]
    }

    /// Neighbor objects of relationship `r`, highest coefficient first
    /// (ties by object index).
    pub fn ranked(&self, r: usize) -> Vec<(usize, T)> {
        let mut v: Vec<(usize, T)> = self
            .alpha
            .row(r)
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, a)| *a != T::zero())
            .collect();
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        v
    }
}

/// Parameters of the learned attention: bilinear projections and the
/// single-output affine layer.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a, T> {
    pub u_a: &'a Matrix<T>,
    pub v_a: &'a Matrix<T>,
    pub w_a: &'a [T],
    pub b_a: T,
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache<T> {
    /// `tanh(U_a h_r)` per relationship row.
    left: Matrix<T>,
    /// `tanh(V_a h_o)` per object row.
    right: Matrix<T>,
}

fn check_state<T: Scalar>(h: &Matrix<T>, graph: &KnowledgeGraph) -> Result<()> {
    if h.rows() != graph.num_nodes() {
        return Err(Error::shape(
            "attention",
            format!("states {}", h.shape_str()),
            format!("graph with {} nodes", graph.num_nodes()),
        ));
    }
    Ok(())
}

/// For every edge `(r_i, o_j)`: `α_ij = σ(w_a · (tanh(U_a h_ri) ⊙ tanh(V_a h_oj)) + b_a)`.
/// Non-neighbors get exactly zero.
pub fn attention_coefficients<T: Scalar>(
    h: &Matrix<T>,
    graph: &KnowledgeGraph,
    weights: &AttentionWeights<'_, T>,
) -> Result<AttentionMap<T>> {
    Ok(attention_cached(h, graph, weights)?.0)
}

pub(crate) fn attention_cached<T: Scalar>(
    h: &Matrix<T>,
    graph: &KnowledgeGraph,
    w: &AttentionWeights<'_, T>,
) -> Result<(AttentionMap<T>, AttentionCache<T>)> {
    check_state(h, graph)?;
    let (m, n) = (graph.num_relationships(), graph.num_objects());
    let dim = h.cols();
    w.u_a.ensure_shape("attention U_a", w.w_a.len(), dim)?;
    w.v_a.ensure_shape("attention V_a", w.w_a.len(), dim)?;

    let rel = Matrix::from_vec(m, dim, h.as_slice()[..m * dim].to_vec())?;
    let obj = Matrix::from_vec(n, dim, h.as_slice()[m * dim..].to_vec())?;
    let left = w.u_a.apply_rows(&rel).map(|v| v.tanh());
    let right = w.v_a.apply_rows(&obj).map(|v| v.tanh());

    let mut alpha = Matrix::zeros(m, n);
    let mut fused = vec![T::zero(); w.w_a.len()];
    for i in 0..m {
        for j in graph.object_neighbors(i) {
            for ((f, &l), &r) in fused.iter_mut().zip(left.row(i)).zip(right.row(j)) {
                *f = l * r;
            }
            alpha[(i, j)] = sigmoid(dot(w.w_a, &fused) + w.b_a);
        }
    }
    Ok((AttentionMap { alpha }, AttentionCache { left, right }))
}

/// Gradients of the learned attention parameters.
#[derive(Debug, Clone)]
pub(crate) struct AttentionGrads<T> {
    pub u_a: Matrix<T>,
    pub v_a: Matrix<T>,
    pub w_a: Vec<T>,
    pub b_a: T,
}

/// Backpropagates `dalpha` through the learned attention; accumulates the
/// state gradient into `dh`.
pub(crate) fn attention_backward<T: Scalar>(
    h: &Matrix<T>,
    graph: &KnowledgeGraph,
    w: &AttentionWeights<'_, T>,
    map: &AttentionMap<T>,
    cache: &AttentionCache<T>,
    dalpha: &Matrix<T>,
    dh: &mut Matrix<T>,
) -> AttentionGrads<T> {
    let (m, n) = (graph.num_relationships(), graph.num_objects());
    let dim = h.cols();
    let rank = w.w_a.len();
    let one = T::one();
    let mut grads = AttentionGrads {
        u_a: Matrix::zeros(rank, dim),
        v_a: Matrix::zeros(rank, dim),
        w_a: vec![T::zero(); rank],
        b_a: T::zero(),
    };
    let mut dleft = Matrix::zeros(m, rank);
    let mut dright = Matrix::zeros(n, rank);
    for i in 0..m {
        for j in graph.object_neighbors(i) {
            let a = map.alpha[(i, j)];
            let de = dalpha[(i, j)] * a * (one - a);
            if de == T::zero() {
                continue;
            }
            grads.b_a += de;
            let (l, r) = (cache.left.row(i), cache.right.row(j));
            for k in 0..rank {
                grads.w_a[k] += de * l[k] * r[k];
                let dfused = de * w.w_a[k];
                dleft[(i, k)] += dfused * r[k];
                dright[(j, k)] += dfused * l[k];
            }
        }
    }
    for (g, &y) in dleft.as_mut_slice().iter_mut().zip(cache.left.as_slice()) {
        *g *= one - y * y;
    }
    for (g, &y) in dright.as_mut_slice().iter_mut().zip(cache.right.as_slice()) {
        *g *= one - y * y;
    }
    let rel = Matrix::from_vec(m, dim, h.as_slice()[..m * dim].to_vec()).expect("rows");
    let obj = Matrix::from_vec(n, dim, h.as_slice()[m * dim..].to_vec()).expect("rows");
    grads.u_a.accumulate_rows_grad(&dleft, &rel);
    grads.v_a.accumulate_rows_grad(&dright, &obj);
    let mut dh_rel = Matrix::zeros(m, dim);
    w.u_a.backprop_rows_into(&dleft, &mut dh_rel);
    let mut dh_obj = Matrix::zeros(n, dim);
    w.v_a.backprop_rows_into(&dright, &mut dh_obj);
    let split = m * dim;
    axpy(one, dh_rel.as_slice(), &mut dh.as_mut_slice()[..split]);
    axpy(one, dh_obj.as_slice(), &mut dh.as_mut_slice()[split..]);
    grads
}

/// Attention removed: 1 on every edge, 0 elsewhere.
pub fn uniform_attention<T: Scalar>(graph: &KnowledgeGraph) -> AttentionMap<T> {
    let (m, n) = (graph.num_relationships(), graph.num_objects());
    let mut alpha = Matrix::zeros(m, n);
    for i in 0..m {
        for j in graph.object_neighbors(i) {
            alpha[(i, j)] = T::one();
        }
    }
    AttentionMap { alpha }
}

/// Random-score control: open-interval uniforms on every edge, drawn from a
/// stream keyed by `(seed, sample_id)` so repeated passes agree.
pub fn random_attention<T: Scalar>(graph: &KnowledgeGraph, seed: u64, sample_id: u64) -> AttentionMap<T> {
    let key = seed ^ sample_id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let (m, n) = (graph.num_relationships(), graph.num_objects());
    let mut alpha = Matrix::zeros(m, n);
    for i in 0..m {
        for j in graph.object_neighbors(i) {
            let u: f64 = rng.sample(Open01);
            alpha[(i, j)] = T::lit(u);
        }
    }
    AttentionMap { alpha }
}

/// `f_i = [o_ri, α_i1 o_o1, ..., α_iN o_oN]`, objects in index order.
/// `o` holds one output row per node, relationships first.
pub fn assemble_features<T: Scalar>(o: &Matrix<T>, alpha: &AttentionMap<T>, i: usize) -> Result<Vec<T>> {
    let (m, n) = alpha.alpha.shape();
    if i >= m {
        return Err(Error::Index {
            what: "relationship",
            index: i,
            len: m,
        });
    }
    if o.rows() != m + n {
        return Err(Error::shape("assemble_features", o.shape_str(), format!("{} nodes", m + n)));
    }
    let width = o.cols();
    let mut f = Vec::with_capacity(width * (n + 1));
    f.extend_from_slice(o.row(i));
    for j in 0..n {
        let a = alpha.alpha[(i, j)];
        f.extend(o.row(m + j).iter().map(|&v| a * v));
    }
    Ok(f)
}

/// Final linear scorer. With one row the weights are shared by every
/// relationship; with `M` rows each relationship has its own.
#[derive(Debug, Clone, Copy)]
pub struct ScorerWeights<'a, T> {
    pub w: &'a Matrix<T>,
    pub b: &'a [T],
}

impl<T: Scalar> ScorerWeights<'_, T> {
    fn row_for(&self, i: usize) -> usize {
        if self.w.rows() == 1 {
            0
        } else {
            i
        }
    }

    fn check(&self, m: usize, width: usize) -> Result<()> {
        let rows = self.w.rows();
        if (rows != 1 && rows != m) || self.b.len() != rows || self.w.cols() != width {
            return Err(Error::shape(
                "score_all",
                format!("scorer {} / bias {}", self.w.shape_str(), self.b.len()),
                format!("1 or {m} rows of width {width}"),
            ));
        }
        Ok(())
    }
}

/// `s_i = W f_i + b` for every relationship.
pub fn score_all<T: Scalar>(o: &Matrix<T>, alpha: &AttentionMap<T>, scorer: &ScorerWeights<'_, T>) -> Result<Vec<T>> {
    let (m, n) = alpha.alpha.shape();
    let width = o.cols();
    scorer.check(m, width * (n + 1))?;
    if o.rows() != m + n {
        return Err(Error::shape("score_all", o.shape_str(), format!("{} nodes", m + n)));
    }
    Ok((0..m)
        .map(|i| {
            let row = scorer.row_for(i);
            let w = scorer.w.row(row);
            let mut s = scorer.b[row] + dot(&w[..width], o.row(i));
            for j in 0..n {
                let a = alpha.alpha[(i, j)];
                if a != T::zero() {
                    s += a * dot(&w[width * (j + 1)..width * (j + 2)], o.row(m + j));
                }
            }
            s
        })
        .collect())
}

/// Backward of [`score_all`]: accumulates into the scorer gradients, the
/// output-feature gradient `d_o` and the coefficient gradient `dalpha`.
pub(crate) fn score_backward<T: Scalar>(
    o: &Matrix<T>,
    alpha: &AttentionMap<T>,
    scorer: &ScorerWeights<'_, T>,
    ds: &[T],
    dw: &mut Matrix<T>,
    db: &mut [T],
    d_o: &mut Matrix<T>,
    dalpha: &mut Matrix<T>,
) {
    let (m, n) = alpha.alpha.shape();
    let width = o.cols();
    for (i, &g) in ds.iter().enumerate() {
        let row = scorer.row_for(i);
        let w = scorer.w.row(row);
        db[row] += g;
        axpy(g, o.row(i), &mut dw.row_mut(row)[..width]);
        axpy(g, &w[..width], d_o.row_mut(i));
        for j in 0..n {
            let block = width * (j + 1)..width * (j + 2);
            dalpha[(i, j)] += g * dot(&w[block.clone()], o.row(m + j));
            let a = alpha.alpha[(i, j)];
            if a != T::zero() {
                axpy(g * a, o.row(m + j), &mut dw.row_mut(row)[block.clone()]);
                axpy(g * a, &w[block], d_o.row_mut(m + j));
            }
        }
    }
}
