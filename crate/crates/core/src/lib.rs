//! Graph reasoning for pairwise relationship recognition.
//!
//! A prior knowledge graph links relationship categories to the object
//! categories they co-occur with. For each entity pair the model seeds the
//! relationship nodes with pair features and the object nodes with detected
//! object features, runs gated message passing over the graph, attends to
//! the informative object nodes, and scores every relationship.
//!
//! The numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what training and gradient checks use.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod ggnn;
pub mod graph;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod synth;
pub mod train;

pub use attention::{AttentionMap, AttentionMode};
pub use data::{Dataset, Detection, Sample, SampleDims};
pub use error::{Error, Result};
pub use graph::KnowledgeGraph;
pub use math::{Matrix, OptimizerKind, ParamGroup, ParamSet};
pub use model::{GrmModel, ModelConfig, Prediction};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type ParamSet64 = ParamSet<f64>;
pub type Sample64 = Sample<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Model64 = GrmModel<f64>;
pub type Model32 = GrmModel<f32>;
