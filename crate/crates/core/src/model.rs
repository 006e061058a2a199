//! The full relationship recognizer: pair encoder, gated propagation,
//! output network, masked attention and scorer, with its analytic gradient.

use crate::attention::{
    attention_backward, attention_cached, random_attention, score_all, score_backward,
    uniform_attention, AttentionMap, AttentionMode, AttentionWeights, ScorerWeights,
};
use crate::data::{Sample, SampleDims};
use crate::error::{Error, Result};
use crate::ggnn::{
    self, encode_pair, init_hidden, new_propagation_grads, output_features_cached,
    propagate_backward, propagate_cached, GruWeights, TYPE_TAG,
};
use crate::graph::KnowledgeGraph;
use crate::math::matrix::axpy;
use crate::math::{init_weight, softmax_xent, Matrix, OptimizerKind, ParamGroup, ParamSet};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Group and entry positions inside a model's [`ParamSet`].
pub mod slot {
    pub const ENCODER: usize = 0;
    pub const GGNN: usize = 1;
    pub const OUTPUT: usize = 2;
    pub const ATTENTION: usize = 3;
    pub const SCORER: usize = 4;

    /// Weight / bias of the single-layer groups (encoder, output, scorer).
    pub const W: usize = 0;
    pub const B: usize = 1;

    pub const B_AGG: usize = 0;
    pub const W_Z: usize = 1;
    pub const U_Z: usize = 2;
    pub const W_R: usize = 3;
    pub const U_R: usize = 4;
    pub const W_H: usize = 5;
    pub const U_H: usize = 6;
    pub const B_Z: usize = 7;
    pub const B_R: usize = 8;
    pub const B_H: usize = 9;

    pub const U_A: usize = 0;
    pub const V_A: usize = 1;
    pub const W_A: usize = 2;
    pub const B_A: usize = 3;
}

pub const GROUP_NAMES: [&str; 5] = ["encoder", "ggnn", "output", "attention", "scorer"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dims: SampleDims,
    pub output_dim: usize,
    pub rank: usize,
    /// Propagation rounds `T`.
    pub steps: usize,
    /// Detection threshold for instantiating object nodes.
    pub eps1: f64,
    /// Adds biases inside the update gates.
    pub gate_bias: bool,
    /// One scorer row per relationship instead of a shared row.
    pub per_class_scorer: bool,
    pub attention: AttentionMode,
}

impl ModelConfig {
    /// Desk-scale defaults for a given vocabulary and feature layout.
    pub fn desk(dims: SampleDims) -> Self {
        Self {
            dims,
            output_dim: 64,
            rank: 256,
            steps: 3,
            eps1: 0.3,
            gate_bias: false,
            per_class_scorer: false,
            attention: AttentionMode::Learned,
        }
    }

    /// Feature size `d` of a node (without the type tag).
    pub fn hidden(&self) -> usize {
        self.dims.object_feature
    }

    /// Full hidden-state width `d + 2`.
    pub fn state_dim(&self) -> usize {
        self.hidden() + TYPE_TAG
    }

    pub fn scorer_width(&self) -> usize {
        self.output_dim * (self.dims.objects + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if d.relationships == 0 || d.objects == 0 {
            return Err(Error::Invalid("need at least one relationship and one object".into()));
        }
        if self.hidden() == 0 || self.output_dim == 0 || self.rank == 0 || d.pair_input() == 0 {
            return Err(Error::Invalid("model dimensions must be positive".into()));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 1.0) {
            return Err(Error::Invalid(format!("eps1 = {} must lie in (0, 1)", self.eps1)));
        }
        Ok(())
    }

    /// Zero-valued parameters with this configuration's layout.
    pub fn zero_params<T: Scalar>(&self) -> ParamSet<T> {
        let d = self.hidden();
        let s = self.state_dim();
        let m = self.dims.relationships;
        let z = Matrix::zeros;
        let mut enc = ParamGroup::new(GROUP_NAMES[0], OptimizerKind::Sgd);
        enc.push("w", z(d, self.dims.pair_input())).unwrap();
        enc.push("b", z(d, 1)).unwrap();

        let mut ggnn = ParamGroup::new(GROUP_NAMES[1], OptimizerKind::Adam);
        ggnn.push("b_agg", z(s, 1)).unwrap();
        for name in ["w_z", "u_z", "w_r", "u_r", "w_h", "u_h"] {
            ggnn.push(name, z(s, s)).unwrap();
        }
        if self.gate_bias {
            for name in ["b_z", "b_r", "b_h"] {
                ggnn.push(name, z(s, 1)).unwrap();
            }
        }

        let mut out = ParamGroup::new(GROUP_NAMES[2], OptimizerKind::Sgd);
        out.push("w", z(self.output_dim, 2 * s)).unwrap();
        out.push("b", z(self.output_dim, 1)).unwrap();

        let mut att = ParamGroup::new(GROUP_NAMES[3], OptimizerKind::Sgd);
        att.push("u", z(self.rank, s)).unwrap();
        att.push("v", z(self.rank, s)).unwrap();
        att.push("w", z(self.rank, 1)).unwrap();
        att.push("b", z(1, 1)).unwrap();

        let rows = if self.per_class_scorer { m } else { 1 };
        let mut sc = ParamGroup::new(GROUP_NAMES[4], OptimizerKind::Sgd);
        sc.push("w", z(rows, self.scorer_width())).unwrap();
        sc.push("b", z(rows, 1)).unwrap();

        ParamSet::new(vec![enc, ggnn, out, att, sc]).expect("unique group names")
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> ParamSet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = self.zero_params::<T>();
        for group in p.groups.iter_mut() {
            for entry in group.entries.iter_mut() {
                let is_bias = entry.name.starts_with('b');
                if !is_bias {
                    let (r, c) = entry.value.shape();
                    entry.value = if entry.name == "w" && group.name == GROUP_NAMES[3] {
                        // attention output layer is stored as a column; fan-in = rank
                        let row: Matrix<T> = init_weight(&mut rng, c, r);
                        Matrix::column(row.into_vec())
                    } else {
                        init_weight(&mut rng, r, c)
                    };
                }
            }
        }
        p
    }
}

/// Scores and attention for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub scores: Vec<T>,
    pub attention: AttentionMap<T>,
}

impl<T: Scalar> Prediction<T> {
    /// Highest-scoring class; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }
}

pub fn argmax<T: Scalar>(s: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrmModel<T> {
    pub config: ModelConfig,
    pub params: ParamSet<T>,
}

struct Tape<T> {
    input: Vec<T>,
    f_h: Vec<T>,
    adjacency: Matrix<T>,
    steps: Vec<ggnn::StepCache<T>>,
    final_h: Matrix<T>,
    out_input: Matrix<T>,
    out: Matrix<T>,
    attention: AttentionMap<T>,
    attention_cache: Option<crate::attention::AttentionCache<T>>,
    scores: Vec<T>,
}

impl<T: Scalar> GrmModel<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = config.init_params(seed);
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking they fit the configuration.
    pub fn from_params(config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        config
            .zero_params::<T>()
            .ensure_same_layout(&params, "GrmModel::from_params")?;
        Ok(Self { config, params })
    }

    fn check_graph(&self, graph: &KnowledgeGraph) -> Result<()> {
        let d = &self.config.dims;
        if graph.num_relationships() != d.relationships || graph.num_objects() != d.objects {
            return Err(Error::shape(
                "graph",
                format!("{}+{} nodes", graph.num_relationships(), graph.num_objects()),
                format!("{}+{} configured", d.relationships, d.objects),
            ));
        }
        Ok(())
    }

    fn gru(&self) -> GruWeights<'_, T> {
        let g = &self.params[slot::GGNN];
        GruWeights {
            w_z: &g[slot::W_Z],
            u_z: &g[slot::U_Z],
            w_r: &g[slot::W_R],
            u_r: &g[slot::U_R],
            w_h: &g[slot::W_H],
            u_h: &g[slot::U_H],
            biases: self.config.gate_bias.then(|| {
                (
                    g[slot::B_Z].as_slice(),
                    g[slot::B_R].as_slice(),
                    g[slot::B_H].as_slice(),
                )
            }),
        }
    }

    fn attention_weights(&self) -> AttentionWeights<'_, T> {
        let a = &self.params[slot::ATTENTION];
        AttentionWeights {
            u_a: &a[slot::U_A],
            v_a: &a[slot::V_A],
            w_a: a[slot::W_A].as_slice(),
            b_a: a[slot::B_A].as_slice()[0],
        }
    }

    fn scorer(&self) -> ScorerWeights<'_, T> {
        let s = &self.params[slot::SCORER];
        ScorerWeights {
            w: &s[slot::W],
            b: s[slot::B].as_slice(),
        }
    }

    fn run(&self, sample: &Sample<T>, graph: &KnowledgeGraph) -> Result<Tape<T>> {
        self.check_graph(graph)?;
        sample
            .validate(&self.config.dims)
            .map_err(|e| e.at_stage("input"))?;
        let enc = &self.params[slot::ENCODER];
        let input = sample.pair_input();
        let f_h = encode_pair(sample, &enc[slot::W], enc[slot::B].as_slice())
            .map_err(|e| e.at_stage("encode_pair"))?;
        let state = init_hidden(graph, &f_h, sample, self.config.eps1)
            .map_err(|e| e.at_stage("init_hidden"))?;
        let adjacency = graph.adjacency_as::<T>();
        let (final_state, steps) = propagate_cached(
            &adjacency,
            &state,
            self.config.steps,
            self.params[slot::GGNN][slot::B_AGG].as_slice(),
            &self.gru(),
        )
        .map_err(|e| e.at_stage("propagate"))?;
        let out_group = &self.params[slot::OUTPUT];
        let (out_input, out) =
            output_features_cached(&final_state, &out_group[slot::W], out_group[slot::B].as_slice())
                .map_err(|e| e.at_stage("output_features"))?;
        let (attention, attention_cache) = match self.config.attention {
            AttentionMode::Learned => {
                let (map, cache) = attention_cached(&final_state.h, graph, &self.attention_weights())
                    .map_err(|e| e.at_stage("attention"))?;
                (map, Some(cache))
            }
            AttentionMode::Uniform => (uniform_attention(graph), None),
            AttentionMode::Random { seed } => (random_attention(graph, seed, sample.id), None),
        };
        let scores = score_all(&out, &attention, &self.scorer()).map_err(|e| e.at_stage("score"))?;
        Ok(Tape {
            input,
            f_h,
            adjacency,
            steps,
            final_h: final_state.h,
            out_input,
            out,
            attention,
            attention_cache,
            scores,
        })
    }

    /// Runs the whole pipeline for one sample.
    pub fn forward(&self, sample: &Sample<T>, graph: &KnowledgeGraph) -> Result<Prediction<T>> {
        let tape = self.run(sample, graph)?;
        Ok(Prediction {
            scores: tape.scores,
            attention: tape.attention,
        })
    }

    /// Cross-entropy loss for one sample and its gradient with respect to
    /// every parameter.
    pub fn loss_and_grad(
        &self,
        sample: &Sample<T>,
        graph: &KnowledgeGraph,
    ) -> Result<(T, ParamSet<T>, Vec<T>)> {
        let tape = self.run(sample, graph)?;
        let (loss, ds) = softmax_xent(&tape.scores, sample.label).map_err(|e| e.at_stage("loss"))?;
        let grads = self.backward(&tape, graph, &ds);
        Ok((loss, grads, tape.scores))
    }

    /// Loss only.
    pub fn loss(&self, sample: &Sample<T>, graph: &KnowledgeGraph) -> Result<T> {
        let scores = self.forward(sample, graph)?.scores;
        Ok(softmax_xent(&scores, sample.label)?.0)
    }

    fn backward(&self, tape: &Tape<T>, graph: &KnowledgeGraph, ds: &[T]) -> ParamSet<T> {
        let cfg = &self.config;
        let m = cfg.dims.relationships;
        let dim = cfg.state_dim();
        let mut grads = self.params.zeros_like();

        // scorer
        let nodes = tape.out.rows();
        let mut d_out = Matrix::zeros(nodes, cfg.output_dim);
        let mut dalpha = Matrix::zeros(m, cfg.dims.objects);
        {
            let sg = &mut grads[slot::SCORER];
            let mut dw = std::mem::replace(&mut sg[slot::W], Matrix::zeros(0, 0));
            score_backward(
                &tape.out,
                &tape.attention,
                &self.scorer(),
                ds,
                &mut dw,
                sg[slot::B].as_mut_slice(),
                &mut d_out,
                &mut dalpha,
            );
            sg[slot::W] = dw;
        }

        // attention
        let mut dh = Matrix::zeros(nodes, dim);
        if let Some(cache) = &tape.attention_cache {
            let ag = attention_backward(
                &tape.final_h,
                graph,
                &self.attention_weights(),
                &tape.attention,
                cache,
                &dalpha,
                &mut dh,
            );
            let g = &mut grads[slot::ATTENTION];
            g[slot::U_A] = ag.u_a;
            g[slot::V_A] = ag.v_a;
            g[slot::W_A] = Matrix::column(ag.w_a);
            g[slot::B_A].as_mut_slice()[0] = ag.b_a;
        }

        // output network
        let mut dpre = d_out;
        for (g, &y) in dpre.as_mut_slice().iter_mut().zip(tape.out.as_slice()) {
            *g *= T::one() - y * y;
        }
        let og = &self.params[slot::OUTPUT];
        grads[slot::OUTPUT][slot::W].accumulate_rows_grad(&dpre, &tape.out_input);
        grads[slot::OUTPUT][slot::B] = Matrix::column(dpre.column_sums());
        let mut d_in = Matrix::zeros(nodes, 2 * dim);
        og[slot::W].backprop_rows_into(&dpre, &mut d_in);
        let mut dx = Matrix::zeros(nodes, dim);
        for v in 0..nodes {
            let row = d_in.row(v);
            axpy(T::one(), &row[..dim], dh.row_mut(v));
            dx.row_mut(v).copy_from_slice(&row[dim..]);
        }

        // propagation
        let mut pg = new_propagation_grads(dim);
        let mut dh0 = propagate_backward(&tape.adjacency, &tape.steps, &self.gru(), dh, &mut pg);
        dh0.add_assign(&dx);
        {
            let g = &mut grads[slot::GGNN];
            g[slot::B_AGG] = Matrix::column(pg.b_agg);
            g[slot::W_Z] = pg.w_z;
            g[slot::U_Z] = pg.u_z;
            g[slot::W_R] = pg.w_r;
            g[slot::U_R] = pg.u_r;
            g[slot::W_H] = pg.w_h;
            g[slot::U_H] = pg.u_h;
            if cfg.gate_bias {
                g[slot::B_Z] = Matrix::column(pg.b_z);
                g[slot::B_R] = Matrix::column(pg.b_r);
                g[slot::B_H] = Matrix::column(pg.b_h);
            }
        }

        // encoder: f_h feeds every relationship row after the type tag
        let mut df_h = vec![T::zero(); cfg.hidden()];
        for r in 0..m {
            axpy(T::one(), &dh0.row(r)[TYPE_TAG..], &mut df_h);
        }
        let dpre_enc: Vec<T> = df_h
            .iter()
            .zip(&tape.f_h)
            .map(|(&g, &y)| g * (T::one() - y * y))
            .collect();
        let eg = &mut grads[slot::ENCODER];
        eg[slot::W].add_outer(&dpre_enc, &tape.input);
        eg[slot::B] = Matrix::column(dpre_enc);
        grads
    }
}
