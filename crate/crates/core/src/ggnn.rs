//! Pair encoding, node-state initialization, gated propagation and the
//! per-node output network.
//!
//! Hidden states are stored one node per row: rows `0..M` are relationship
//! nodes, rows `M..M+N` object nodes. Each row is `[type tag (2); features (d)]`.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::math::matrix::axpy;
use crate::math::{Activation, Matrix};
use crate::scalar::{sigmoid, Scalar};

/// Width of the node-type prefix.
pub const TYPE_TAG: usize = 2;

/// Node hidden states plus the initial states they started from.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState<T> {
    /// Current states, `(M+N) x (d+2)`.
    pub h: Matrix<T>,
    /// States at `t = 0`, kept as the second input of the output network.
    pub x: Matrix<T>,
    pub t: usize,
    pub relationships: usize,
}

impl<T: Scalar> GraphState<T> {
    pub fn hidden_dim(&self) -> usize {
        self.h.cols()
    }

    pub fn num_nodes(&self) -> usize {
        self.h.rows()
    }
}

/// `tanh(W_enc [f_union; f_p1; f_p2; geometry] + b_enc)`.
pub fn encode_pair<T: Scalar>(sample: &Sample<T>, w: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let input = sample.pair_input();
    let pre = crate::math::linear(&input, w, b)?;
    Ok(crate::math::activation(&pre, Activation::Tanh))
}

/// Initial node states: relationship rows `[1, 0, f_h]`; object rows
/// `[0, 1, f_o]` when the object was detected above `eps1` (highest-scoring
/// detection wins), otherwise `[0, 1, 0]`.
pub fn init_hidden<T: Scalar>(
    graph: &KnowledgeGraph,
    f_h: &[T],
    sample: &Sample<T>,
    eps1: f64,
) -> Result<GraphState<T>> {
    if !(eps1 > 0.0 && eps1 < 1.0) {
        return Err(Error::Invalid(format!("eps1 = {eps1} must lie in (0, 1)")));
    }
    let (m, n) = (graph.num_relationships(), graph.num_objects());
    let d = f_h.len();
    let mut h = Matrix::zeros(m + n, d + TYPE_TAG);
    for r in 0..m {
        let row = h.row_mut(r);
        row[0] = T::one();
        row[TYPE_TAG..].copy_from_slice(f_h);
    }
    let mut best: Vec<Option<(T, &[T])>> = vec![None; n];
    for det in sample.detections_above(T::lit(eps1)) {
        if det.object >= n {
            return Err(Error::Index {
                what: "detected object",
                index: det.object,
                len: n,
            });
        }
        if det.feature.len() != d {
            return Err(Error::shape(
                "init_hidden",
                format!("object feature len {}", det.feature.len()),
                format!("hidden feature len {d}"),
            ));
        }
        match best[det.object] {
            Some((c, _)) if c >= det.confidence => {}
            _ => best[det.object] = Some((det.confidence, &det.feature)),
        }
    }
    for (o, slot) in best.iter().enumerate() {
        let row = h.row_mut(m + o);
        row[1] = T::one();
        if let Some((_, f)) = slot {
            row[TYPE_TAG..].copy_from_slice(f);
        }
    }
    Ok(GraphState {
        x: h.clone(),
        h,
        t: 0,
        relationships: m,
    })
}

/// Row `v` = `Σ_u adjacency[u][v] h_u + b`.
pub fn aggregate<T: Scalar>(adjacency: &Matrix<T>, h: &Matrix<T>, bias: &[T]) -> Result<Matrix<T>> {
    if adjacency.rows() != h.rows() || adjacency.cols() != h.rows() || bias.len() != h.cols() {
        return Err(Error::shape(
            "aggregate",
            format!("adjacency {} / bias {}", adjacency.shape_str(), bias.len()),
            format!("states {}", h.shape_str()),
        ));
    }
    let mut a = Matrix::zeros(h.rows(), h.cols());
    for v in 0..h.rows() {
        a.row_mut(v).copy_from_slice(bias);
    }
    for u in 0..h.rows() {
        for (v, &w) in adjacency.row(u).iter().enumerate() {
            if w != T::zero() {
                axpy(w, h.row(u), a.row_mut(v));
            }
        }
    }
    Ok(a)
}

/// Accumulates the input gradient of [`aggregate`] into `dh`; returns the
/// bias gradient.
fn aggregate_backward<T: Scalar>(adjacency: &Matrix<T>, da: &Matrix<T>, dh: &mut Matrix<T>) -> Vec<T> {
    for u in 0..da.rows() {
        for (v, &w) in adjacency.row(u).iter().enumerate() {
            if w != T::zero() {
                axpy(w, da.row(v), dh.row_mut(u));
            }
        }
    }
    da.column_sums()
}

/// Gate weights of the propagation update, shared by all nodes and steps.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights<'a, T> {
    pub w_z: &'a Matrix<T>,
    pub u_z: &'a Matrix<T>,
    pub w_r: &'a Matrix<T>,
    pub u_r: &'a Matrix<T>,
    pub w_h: &'a Matrix<T>,
    pub u_h: &'a Matrix<T>,
    /// Optional gate biases `(b_z, b_r, b_h)`.
    pub biases: Option<(&'a [T], &'a [T], &'a [T])>,
}

impl<T: Scalar> GruWeights<'_, T> {
    fn check(&self, dim: usize) -> Result<()> {
        for m in [self.w_z, self.u_z, self.w_r, self.u_r, self.w_h, self.u_h] {
            m.ensure_shape("gru weights", dim, dim)?;
        }
        if let Some((a, b, c)) = self.biases {
            if a.len() != dim || b.len() != dim || c.len() != dim {
                return Err(Error::shape("gru biases", "bias", format!("len {dim}")));
            }
        }
        Ok(())
    }
}

/// Single-node gated update:
/// `z = σ(W^z a + U^z h)`, `r = σ(W^r a + U^r h)`,
/// `h̃ = tanh(W a + U (r ⊙ h))`, `h' = (1 - z) ⊙ h + z ⊙ h̃`.
pub fn gru_update<T: Scalar>(a: &[T], h_prev: &[T], w: &GruWeights<'_, T>) -> Result<Vec<T>> {
    if a.len() != h_prev.len() {
        return Err(Error::shape("gru_update", format!("a {}", a.len()), format!("h {}", h_prev.len())));
    }
    w.check(a.len())?;
    let am = Matrix::from_vec(1, a.len(), a.to_vec())?;
    let hm = Matrix::from_vec(1, h_prev.len(), h_prev.to_vec())?;
    Ok(gru_rows(&am, &hm, w).0.into_vec())
}

/// Intermediates of one synchronous propagation step.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    h_prev: Matrix<T>,
    a: Matrix<T>,
    z: Matrix<T>,
    r: Matrix<T>,
    rh: Matrix<T>,
    c: Matrix<T>,
}

fn add_bias_rows<T: Scalar>(m: &mut Matrix<T>, b: &[T]) {
    for v in 0..m.rows() {
        axpy(T::one(), b, m.row_mut(v));
    }
}

fn gru_rows<T: Scalar>(a: &Matrix<T>, h: &Matrix<T>, w: &GruWeights<'_, T>) -> (Matrix<T>, StepCache<T>) {
    let mut z = w.w_z.apply_rows(a);
    w.u_z.apply_rows_into(h, &mut z);
    let mut r = w.w_r.apply_rows(a);
    w.u_r.apply_rows_into(h, &mut r);
    if let Some((bz, br, _)) = w.biases {
        add_bias_rows(&mut z, bz);
        add_bias_rows(&mut r, br);
    }
    z.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
    r.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut rh = r.clone();
    for (x, &hv) in rh.as_mut_slice().iter_mut().zip(h.as_slice()) {
        *x *= hv;
    }
    let mut c = w.w_h.apply_rows(a);
    w.u_h.apply_rows_into(&rh, &mut c);
    if let Some((_, _, bh)) = w.biases {
        add_bias_rows(&mut c, bh);
    }
    c.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());

    let mut out = h.clone();
    for ((o, &zv), &cv) in out.as_mut_slice().iter_mut().zip(z.as_slice()).zip(c.as_slice()) {
        *o = (T::one() - zv) * *o + zv * cv;
    }
    let cache = StepCache {
        h_prev: h.clone(),
        a: a.clone(),
        z,
        r,
        rh,
        c,
    };
    (out, cache)
}

/// Gradients of the propagation parameters, in [`GruWeights`] order.
#[derive(Debug, Clone)]
pub struct PropagationGrads<T> {
    pub b_agg: Vec<T>,
    pub w_z: Matrix<T>,
    pub u_z: Matrix<T>,
    pub w_r: Matrix<T>,
    pub u_r: Matrix<T>,
    pub w_h: Matrix<T>,
    pub u_h: Matrix<T>,
    pub b_z: Vec<T>,
    pub b_r: Vec<T>,
    pub b_h: Vec<T>,
}

impl<T: Scalar> PropagationGrads<T> {
    fn zeros(dim: usize) -> Self {
        let m = || Matrix::zeros(dim, dim);
        Self {
            b_agg: vec![T::zero(); dim],
            w_z: m(),
            u_z: m(),
            w_r: m(),
            u_r: m(),
            w_h: m(),
            u_h: m(),
            b_z: vec![T::zero(); dim],
            b_r: vec![T::zero(); dim],
            b_h: vec![T::zero(); dim],
        }
    }
}

/// Runs `steps` synchronous rounds of aggregation + gated update. Every
/// node reads only the states from the previous round.
pub fn propagate<T: Scalar>(
    adjacency: &Matrix<T>,
    state: &GraphState<T>,
    steps: usize,
    b_agg: &[T],
    w: &GruWeights<'_, T>,
) -> Result<GraphState<T>> {
    Ok(propagate_cached(adjacency, state, steps, b_agg, w)?.0)
}

pub(crate) fn propagate_cached<T: Scalar>(
    adjacency: &Matrix<T>,
    state: &GraphState<T>,
    steps: usize,
    b_agg: &[T],
    w: &GruWeights<'_, T>,
) -> Result<(GraphState<T>, Vec<StepCache<T>>)> {
    w.check(state.hidden_dim())?;
    let mut h = state.h.clone();
    let mut caches = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = aggregate(adjacency, &h, b_agg)?;
        let (next, cache) = gru_rows(&a, &h, w);
        caches.push(cache);
        h = next;
    }
    Ok((
        GraphState {
            h,
            x: state.x.clone(),
            t: state.t + steps,
            relationships: state.relationships,
        },
        caches,
    ))
}

/// Backpropagates `dh` (gradient w.r.t. the final states) through all
/// cached steps. Returns the gradient w.r.t. the initial states.
pub(crate) fn propagate_backward<T: Scalar>(
    adjacency: &Matrix<T>,
    caches: &[StepCache<T>],
    w: &GruWeights<'_, T>,
    mut dh: Matrix<T>,
    grads: &mut PropagationGrads<T>,
) -> Matrix<T> {
    let one = T::one();
    for c in caches.iter().rev() {
        let (rows, cols) = dh.shape();
        let mut dh_prev = Matrix::zeros(rows, cols);
        let mut dzp = Matrix::zeros(rows, cols);
        let mut dcp = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let g = dh.as_slice()[k];
            let z = c.z.as_slice()[k];
            let cv = c.c.as_slice()[k];
            let hp = c.h_prev.as_slice()[k];
            dh_prev.as_mut_slice()[k] = g * (one - z);
            dzp.as_mut_slice()[k] = g * (cv - hp) * z * (one - z);
            dcp.as_mut_slice()[k] = g * z * (one - cv * cv);
        }

        let mut da = Matrix::zeros(rows, cols);
        grads.w_h.accumulate_rows_grad(&dcp, &c.a);
        grads.u_h.accumulate_rows_grad(&dcp, &c.rh);
        w.w_h.backprop_rows_into(&dcp, &mut da);
        let mut drh = Matrix::zeros(rows, cols);
        w.u_h.backprop_rows_into(&dcp, &mut drh);

        let mut drp = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let g = drh.as_slice()[k];
            let r = c.r.as_slice()[k];
            let hp = c.h_prev.as_slice()[k];
            dh_prev.as_mut_slice()[k] += g * r;
            drp.as_mut_slice()[k] = g * hp * r * (one - r);
        }

        grads.w_r.accumulate_rows_grad(&drp, &c.a);
        grads.u_r.accumulate_rows_grad(&drp, &c.h_prev);
        w.w_r.backprop_rows_into(&drp, &mut da);
        w.u_r.backprop_rows_into(&drp, &mut dh_prev);

        grads.w_z.accumulate_rows_grad(&dzp, &c.a);
        grads.u_z.accumulate_rows_grad(&dzp, &c.h_prev);
        w.w_z.backprop_rows_into(&dzp, &mut da);
        w.u_z.backprop_rows_into(&dzp, &mut dh_prev);

        if w.biases.is_some() {
            crate::math::ops::add_into(&mut grads.b_z, &dzp.column_sums());
            crate::math::ops::add_into(&mut grads.b_r, &drp.column_sums());
            crate::math::ops::add_into(&mut grads.b_h, &dcp.column_sums());
        }

        let db = aggregate_backward(adjacency, &da, &mut dh_prev);
        crate::math::ops::add_into(&mut grads.b_agg, &db);
        dh = dh_prev;
    }
    dh
}

pub(crate) fn new_propagation_grads<T: Scalar>(dim: usize) -> PropagationGrads<T> {
    PropagationGrads::zeros(dim)
}

/// Per-node readout `o_v = tanh(W_out [h_v^T; x_v] + b_out)`, shared weights.
pub fn output_features<T: Scalar>(state: &GraphState<T>, w: &Matrix<T>, b: &[T]) -> Result<Matrix<T>> {
    Ok(output_features_cached(state, w, b)?.1)
}

/// Returns `(concatenated inputs, outputs)`.
pub(crate) fn output_features_cached<T: Scalar>(
    state: &GraphState<T>,
    w: &Matrix<T>,
    b: &[T],
) -> Result<(Matrix<T>, Matrix<T>)> {
    let dim = state.hidden_dim();
    if state.x.shape() != state.h.shape() {
        return Err(Error::shape("output_features", state.h.shape_str(), state.x.shape_str()));
    }
    w.ensure_shape("output_features", b.len(), 2 * dim)?;
    let rows = state.num_nodes();
    let mut input = Matrix::zeros(rows, 2 * dim);
    for v in 0..rows {
        let row = input.row_mut(v);
        row[..dim].copy_from_slice(state.h.row(v));
        row[dim..].copy_from_slice(state.x.row(v));
    }
    let mut out = w.apply_rows(&input);
    add_bias_rows(&mut out, b);
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
    Ok((input, out))
}
