//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; every other line must set a
//! known key. [`RunConfig::to_text`] writes every key, so a saved config
//! reproduces the run exactly.

use crate::attention::AttentionMode;
use crate::data::SampleDims;
use crate::error::{Error, Result};
use crate::graph::Normalization;
use crate::metrics::{ApMethod, ScoreBasis};
use crate::model::ModelConfig;
use crate::optim::{AdamConfig, SgdConfig};
use crate::synth::{ConfidenceModel, WorldConfig};
use crate::train::TrainConfig;
use std::path::Path;

/// Which ablation of the full model to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    RandomAdjacency,
    NoAttention,
    RandomAttention,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::RandomAdjacency,
        Variant::NoAttention,
        Variant::RandomAttention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RandomAdjacency => "random_adjacency",
            Variant::NoAttention => "no_attention",
            Variant::RandomAttention => "random_attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub world_seed: u64,
    pub relationships: usize,
    pub objects: usize,
    pub feature: usize,
    pub geometry: usize,
    /// Node feature width `d`.
    pub hidden: usize,
    pub pair_signal: f64,
    pub noise_scale: f64,
    pub clutter_rate: f64,
    pub background_rate: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub output_dim: usize,
    pub rank: usize,
    pub steps: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub prune_threshold: f64,
    pub normalization: Normalization,
    pub gate_bias: bool,
    pub per_class_scorer: bool,
    pub lr_sgd: f64,
    pub momentum: f64,
    pub lr_adam: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub ap_method: ApMethod,
    pub score_basis: ScoreBasis,
    pub random_adjacency: bool,
    pub random_attention: bool,
    pub no_attention: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            world_seed: world.seed,
            relationships: world.dims.relationships,
            objects: world.dims.objects,
            feature: world.dims.feature,
            geometry: world.dims.geometry,
            hidden: world.dims.object_feature,
            pair_signal: world.pair_signal,
            noise_scale: world.noise_scale,
            clutter_rate: world.confidence.clutter_rate,
            background_rate: world.background_rate,
            n_train: 2000,
            n_val: 500,
            n_test: 500,
            output_dim: 64,
            rank: 256,
            steps: 3,
            eps1: 0.3,
            eps2: 0.7,
            prune_threshold: 0.01,
            normalization: Normalization::GlobalMax,
            gate_bias: false,
            per_class_scorer: false,
            lr_sgd: train.sgd.lr,
            momentum: train.sgd.momentum,
            lr_adam: train.adam.lr,
            beta1: train.adam.beta1,
            beta2: train.adam.beta2,
            adam_eps: train.adam.eps,
            batch_size: train.batch_size,
            epochs: train.epochs,
            patience: train.patience,
            ap_method: train.ap_method,
            score_basis: train.score_basis,
            random_adjacency: false,
            random_attention: false,
            no_attention: false,
        }
    }
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::GlobalMax => "global_max",
        Normalization::PerRow => "per_row",
    }
}

macro_rules! config_keys {
    ($mac:ident) => {
        $mac! {
            seed: u64, world_seed: u64, relationships: usize, objects: usize, feature: usize,
            geometry: usize, hidden: usize, pair_signal: f64, noise_scale: f64, clutter_rate: f64,
            background_rate: f64, n_train: usize, n_val: usize, n_test: usize, output_dim: usize, rank: usize,
            steps: usize, eps1: f64, eps2: f64, prune_threshold: f64, normalization: norm,
            gate_bias: bool, per_class_scorer: bool, lr_sgd: f64, momentum: f64, lr_adam: f64,
            beta1: f64, beta2: f64, adam_eps: f64, batch_size: usize, epochs: usize,
            patience: usize, ap_method: ap, score_basis: basis, random_adjacency: bool, random_attention: bool,
            no_attention: bool
        }
    };
}

trait Field: Sized {
    fn parse_field(s: &str) -> Option<Self>;
    fn show(&self) -> String;
}

macro_rules! plain_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn parse_field(s: &str) -> Option<Self> {
                s.parse().ok()
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_field!(u64, usize, f64, bool);

impl Field for Normalization {
    fn parse_field(s: &str) -> Option<Self> {
        match s {
            "global_max" => Some(Normalization::GlobalMax),
            "per_row" => Some(Normalization::PerRow),
            _ => None,
        }
    }
    fn show(&self) -> String {
        normalization_name(*self).to_string()
    }
}

impl Field for ScoreBasis {
    fn parse_field(s: &str) -> Option<Self> {
        ScoreBasis::parse(s).ok()
    }
    fn show(&self) -> String {
        self.as_str().to_string()
    }
}

impl Field for ApMethod {
    fn parse_field(s: &str) -> Option<Self> {
        ApMethod::parse(s).ok()
    }
    fn show(&self) -> String {
        self.as_str().to_string()
    }
}

macro_rules! define_io {
    ($($key:ident: $kind:ident),*) => {
        impl RunConfig {
            /// Every key, in a fixed order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// `(key, value)` pairs in [`RunConfig::KEYS`] order.
            pub fn pairs(&self) -> Vec<(String, String)> {
                vec![$((stringify!($key).to_string(), self.$key.show())),*]
            }

            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => {
                        self.$key = Field::parse_field(value).ok_or_else(|| {
                            Error::Invalid(format!("bad value '{value}' for {key}"))
                        })?;
                    })*
                    _ => return Err(Error::Invalid(format!("unknown config key '{key}'"))),
                }
                Ok(())
            }
        }
    };
}
config_keys!(define_io);

impl RunConfig {
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses and validates; errors carry `source:line`.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: Error| Error::Invalid(format!("{source}:{}: {}", i + 1, e.to_string().trim_start_matches("invalid input: ")));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(Error::Invalid("expected 'key = value'".into())))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(at(Error::Invalid(format!("duplicate key '{k}'"))));
            }
            cfg.set(k, v.trim()).map_err(at)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return bad(format!("prune_threshold = {} must lie in [0, 1)", self.prune_threshold));
        }
        if self.random_attention && self.no_attention {
            return bad("random_attention and no_attention are mutually exclusive".into());
        }
        for (name, v) in [
            ("relationships", self.relationships),
            ("objects", self.objects),
            ("feature", self.feature),
            ("hidden", self.hidden),
            ("n_train", self.n_train),
            ("n_val", self.n_val),
            ("n_test", self.n_test),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        self.model_config().validate()?;
        self.train_config().validate()?;
        crate::synth::WorldModel::desk(&self.world_config()).map(|_| ())
    }

    pub fn dims(&self) -> SampleDims {
        SampleDims {
            relationships: self.relationships,
            objects: self.objects,
            feature: self.feature,
            geometry: self.geometry,
            object_feature: self.hidden,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.random_adjacency {
            Variant::RandomAdjacency
        } else if self.no_attention {
            Variant::NoAttention
        } else if self.random_attention {
            Variant::RandomAttention
        } else {
            Variant::Full
        }
    }

    /// Copy with the ablation flags set for `v`.
    pub fn with_variant(&self, v: Variant) -> Self {
        Self {
            random_adjacency: v == Variant::RandomAdjacency,
            no_attention: v == Variant::NoAttention,
            random_attention: v == Variant::RandomAttention,
            ..self.clone()
        }
    }

    pub fn attention_mode(&self) -> AttentionMode {
        if self.no_attention {
            AttentionMode::Uniform
        } else if self.random_attention {
            AttentionMode::Random { seed: self.seed }
        } else {
            AttentionMode::Learned
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dims: self.dims(),
            output_dim: self.output_dim,
            rank: self.rank,
            steps: self.steps,
            eps1: self.eps1,
            gate_bias: self.gate_bias,
            per_class_scorer: self.per_class_scorer,
            attention: self.attention_mode(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            sgd: SgdConfig {
                lr: self.lr_sgd,
                momentum: self.momentum,
            },
            adam: AdamConfig {
                lr: self.lr_adam,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
            },
            patience: self.patience,
            ap_method: self.ap_method,
            score_basis: self.score_basis,
        }
    }

    pub fn world_config(&self) -> WorldConfig {
        let base = WorldConfig::default();
        WorldConfig {
            dims: self.dims(),
            seed: self.world_seed,
            pair_signal: self.pair_signal,
            noise_scale: self.noise_scale,
            background_rate: self.background_rate,
            confidence: ConfidenceModel {
                clutter_rate: self.clutter_rate,
                ..base.confidence
            },
            close_pairs: base
                .close_pairs
                .into_iter()
                .filter(|&(a, b)| a < self.relationships && b < self.relationships)
                .collect(),
        }
    }
}
