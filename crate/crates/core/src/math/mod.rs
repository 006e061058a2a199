//! Dense differentiable primitives and parameter containers.

pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod params;

pub use gradcheck::{grad_check, numeric_gradient, relative_error, GradCheck};
pub use matrix::Matrix;
pub use ops::{
    activation, activation_backward, hadamard, hadamard_backward, linear, linear_backward,
    lowrank_bilinear, lowrank_bilinear_backward, softmax, softmax_xent, Activation,
    BilinearForward, BilinearGrads, LinearGrads,
};
pub use params::{init_weight, OptimizerKind, Param, ParamGroup, ParamSet};
