//! Per-group optimizers: momentum SGD and bias-corrected Adam.

use crate::error::{Error, Result};
use crate::math::{Matrix, OptimizerKind, ParamGroup, ParamSet};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid(format!("bad SGD settings {self:?}")));
        }
        Ok(())
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite())
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(Error::Invalid(format!("bad Adam settings {self:?}")));
        }
        Ok(())
    }
}

fn check_group<T: Scalar>(params: &ParamGroup<T>, grads: &ParamGroup<T>, buffers: &[Matrix<T>]) -> Result<()> {
    let ok = params.entries.len() == grads.entries.len()
        && params.entries.len() == buffers.len()
        && params
            .entries
            .iter()
            .zip(&grads.entries)
            .zip(buffers)
            .all(|((p, g), b)| p.value.shape() == g.value.shape() && p.value.shape() == b.shape());
    if ok {
        Ok(())
    } else {
        Err(Error::shape(
            "optimizer step",
            format!("params {}", params.name),
            format!("grads {}", grads.name),
        ))
    }
}

fn zero_buffers<T: Scalar>(group: &ParamGroup<T>) -> Vec<Matrix<T>> {
    group
        .entries
        .iter()
        .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
        .collect()
}

/// `v ← momentum·v + g; p ← p − lr·v`.
pub fn sgd_step<T: Scalar>(
    params: &mut ParamGroup<T>,
    grads: &ParamGroup<T>,
    velocity: &mut [Matrix<T>],
    cfg: &SgdConfig,
) -> Result<()> {
    check_group(params, grads, velocity)?;
    let lr = T::lit(cfg.lr);
    let mu = T::lit(cfg.momentum);
    for ((p, g), v) in params.entries.iter_mut().zip(&grads.entries).zip(velocity) {
        for ((pv, &gv), vv) in p
            .value
            .as_mut_slice()
            .iter_mut()
            .zip(g.value.as_slice())
            .zip(v.as_mut_slice())
        {
            *vv = mu * *vv + gv;
            *pv -= lr * *vv;
        }
    }
    Ok(())
}

/// First/second moment estimates of one Adam-stepped group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Matrix<T>>,
    pub v: Vec<Matrix<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(group: &ParamGroup<T>) -> Self {
        Self {
            m: zero_buffers(group),
            v: zero_buffers(group),
            step: 0,
        }
    }
}

/// Bias-corrected Adam; increments the step counter once per call.
pub fn adam_step<T: Scalar>(
    params: &mut ParamGroup<T>,
    grads: &ParamGroup<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    check_group(params, grads, &state.m)?;
    check_group(params, grads, &state.v)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let one = T::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.eps);
    for (k, (p, g)) in params.entries.iter_mut().zip(&grads.entries).enumerate() {
        let m = state.m[k].as_mut_slice();
        let v = state.v[k].as_mut_slice();
        for (i, (pv, &gv)) in p.value.as_mut_slice().iter_mut().zip(g.value.as_slice()).enumerate() {
            m[i] = b1 * m[i] + (one - b1) * gv;
            v[i] = b2 * v[i] + (one - b2) * gv * gv;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum GroupState<T> {
    Sgd(Vec<Matrix<T>>),
    Adam(AdamState<T>),
}

/// Optimizer state for a whole [`ParamSet`]; each group is stepped by the
/// optimizer its tag names.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    groups: Vec<GroupState<T>>,
    pub sgd: SgdConfig,
    pub adam: AdamConfig,
    pub steps: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ParamSet<T>, sgd: SgdConfig, adam: AdamConfig) -> Result<Self> {
        sgd.validate()?;
        adam.validate()?;
        let groups = params
            .groups
            .iter()
            .map(|g| match g.optimizer {
                OptimizerKind::Sgd => GroupState::Sgd(zero_buffers(g)),
                OptimizerKind::Adam => GroupState::Adam(AdamState::new(g)),
            })
            .collect();
        Ok(Self {
            groups,
            sgd,
            adam,
            steps: 0,
        })
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        params.ensure_same_layout(grads, "OptimizerState::step")?;
        if params.groups.len() != self.groups.len() {
            return Err(Error::shape(
                "OptimizerState::step",
                format!("{} groups", params.groups.len()),
                format!("{} states", self.groups.len()),
            ));
        }
        for ((p, g), s) in params.groups.iter_mut().zip(&grads.groups).zip(&mut self.groups) {
            match s {
                GroupState::Sgd(v) => sgd_step(p, g, v, &self.sgd)?,
                GroupState::Adam(a) => adam_step(p, g, a, &self.adam)?,
            }
        }
        self.steps += 1;
        Ok(())
    }
}
