use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Which optimizer a parameter group is stepped with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Matrix<T>,
}

/// A named bundle of learnable tensors that share one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup<T> {
    pub name: String,
    pub optimizer: OptimizerKind,
    pub entries: Vec<Param<T>>,
}

impl<T: Scalar> ParamGroup<T> {
    pub fn new(name: impl Into<String>, optimizer: OptimizerKind) -> Self {
        Self {
            name: name.into(),
            optimizer,
            entries: Vec::new(),
        }
    }

    /// Appends an entry; names must be unique within the group.
    pub fn push(&mut self, name: impl Into<String>, value: Matrix<T>) -> Result<usize> {
        let name = name.into();
        if self.entries.iter().any(|p| p.name == name) {
            return Err(Error::Invalid(format!(
                "duplicate parameter {name} in group {}",
                self.name
            )));
        }
        self.entries.push(Param { name, value });
        Ok(self.entries.len() - 1)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.entries.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T> Index<usize> for ParamGroup<T> {
    type Output = Matrix<T>;

    fn index(&self, i: usize) -> &Matrix<T> {
        &self.entries[i].value
    }
}

impl<T> IndexMut<usize> for ParamGroup<T> {
    fn index_mut(&mut self, i: usize) -> &mut Matrix<T> {
        &mut self.entries[i].value
    }
}

/// Every learnable tensor of a model, grouped for per-group optimizers.
/// Gradients use the same type with identical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub groups: Vec<ParamGroup<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new(groups: Vec<ParamGroup<T>>) -> Result<Self> {
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::Invalid(format!("duplicate parameter group {}", g.name)));
            }
        }
        Ok(Self { groups })
    }

    pub fn zeros_like(&self) -> Self {
        let groups = self
            .groups
            .iter()
            .map(|g| ParamGroup {
                name: g.name.clone(),
                optimizer: g.optimizer,
                entries: g
                    .entries
                    .iter()
                    .map(|p| Param {
                        name: p.name.clone(),
                        value: Matrix::zeros(p.value.rows(), p.value.cols()),
                    })
                    .collect(),
            })
            .collect();
        Self { groups }
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup<T>> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// True when both sets have the same groups, entries and shapes.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.groups.len() == other.groups.len()
            && self.groups.iter().zip(&other.groups).all(|(a, b)| {
                a.name == b.name
                    && a.entries.len() == b.entries.len()
                    && a.entries
                        .iter()
                        .zip(&b.entries)
                        .all(|(p, q)| p.name == q.name && p.value.shape() == q.value.shape())
            })
    }

    pub fn ensure_same_layout(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::shape(op, self.layout_summary(), other.layout_summary()))
        }
    }

    pub fn layout_summary(&self) -> String {
        self.groups
            .iter()
            .map(|g| {
                let inner: Vec<String> = g
                    .entries
                    .iter()
                    .map(|p| format!("{}:{}", p.name, p.value.shape_str()))
                    .collect();
                format!("{}[{}]", g.name, inner.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (g, h) in self.groups.iter_mut().zip(&other.groups) {
            for (p, q) in g.entries.iter_mut().zip(&h.entries) {
                p.value.add_assign(&q.value);
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for p in self.groups.iter_mut().flat_map(|g| g.entries.iter_mut()) {
            p.value.scale(k);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.groups
            .iter()
            .flat_map(|g| &g.entries)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.groups
            .iter()
            .flat_map(|g| &g.entries)
            .all(|p| p.value.is_finite())
    }

    /// Iterates `(group, entry, matrix)` in layout order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &Matrix<T>)> {
        self.groups.iter().flat_map(|g| {
            g.entries
                .iter()
                .map(move |p| (g.name.as_str(), p.name.as_str(), &p.value))
        })
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Matrix<T>> {
        self.groups
            .iter_mut()
            .flat_map(|g| g.entries.iter_mut().map(|p| &mut p.value))
    }

    /// Fills every entry uniformly in `±scale` regardless of fan-in.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R, scale: f64) {
        for m in self.iter_mut() {
            for v in m.as_mut_slice() {
                *v = T::lit(rng.gen_range(-scale..=scale));
            }
        }
    }
}

impl<T> Index<usize> for ParamSet<T> {
    type Output = ParamGroup<T>;

    fn index(&self, i: usize) -> &ParamGroup<T> {
        &self.groups[i]
    }
}

impl<T> IndexMut<usize> for ParamSet<T> {
    fn index_mut(&mut self, i: usize) -> &mut ParamGroup<T> {
        &mut self.groups[i]
    }
}

/// Weight matrix drawn uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_weight<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<T> {
    let bound = 1.0 / (cols.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::lit(rng.gen_range(-bound..=bound)))
}
