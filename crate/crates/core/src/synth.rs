//! Synthetic relationship world with a known relationship–object
//! co-occurrence structure.

use crate::data::{quantize6, Dataset, Detection, Sample, SampleDims};
use crate::error::{Error, Result};
use crate::graph::default_names;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-mode detector model: true objects score high, clutter scores low.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub present_mean: f64,
    pub clutter_mean: f64,
    /// Beta concentration `a + b` shared by both modes.
    pub concentration: f64,
    /// Probability that an absent object still yields a detection.
    pub clutter_rate: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        Self {
            present_mean: 0.85,
            clutter_mean: 0.2,
            concentration: 10.0,
            clutter_rate: 0.25,
        }
    }
}

impl ConfidenceModel {
    /// Beta `(a, b)` parameters for present objects and for clutter.
    pub fn beta_params(&self) -> ((f64, f64), (f64, f64)) {
        let k = self.concentration;
        (
            (self.present_mean * k, (1.0 - self.present_mean) * k),
            (self.clutter_mean * k, (1.0 - self.clutter_mean) * k),
        )
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.present_mean)
            || !unit(self.clutter_mean)
            || !(self.concentration > 0.0 && self.concentration.is_finite())
            || !(0.0..=1.0).contains(&self.clutter_rate)
        {
            return Err(Error::Invalid(format!("bad confidence model {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub dims: SampleDims,
    pub relationship_names: Vec<String>,
    pub object_names: Vec<String>,
    /// `M x N` presence probabilities `P[label][object]`.
    pub cooccurrence: Vec<Vec<f64>>,
    /// One `3 * feature` vector per relationship: union, person 1, person 2.
    pub relationship_prototypes: Vec<Vec<f64>>,
    pub object_prototypes: Vec<Vec<f64>>,
    pub noise_scale: f64,
    pub confidence: ConfidenceModel,
}

/// Knobs for [`WorldModel::desk`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dims: SampleDims,
    pub seed: u64,
    /// Scale of relationship prototypes relative to unit feature noise.
    pub pair_signal: f64,
    /// Relationship pairs whose prototypes are made nearly identical.
    pub close_pairs: Vec<(usize, usize)>,
    pub noise_scale: f64,
    /// Presence probability of objects unrelated to the label.
    pub background_rate: f64,
    pub confidence: ConfidenceModel,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dims: SampleDims {
                relationships: 6,
                objects: 12,
                feature: 32,
                geometry: 8,
                object_feature: 64,
            },
            seed: 7,
            pair_signal: 0.1,
            close_pairs: vec![(0, 1), (3, 4)],
            noise_scale: 1.0,
            background_rate: 0.002,
            confidence: ConfidenceModel::default(),
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            quantize6(scale * z)
        })
        .collect()
}

impl WorldModel {
    /// Desk-scale world. Relationship `r` owns the signature object
    /// `r mod N` and shares object `(M + r) mod N` with its successor, which
    /// sees it less often. Everything else shows up at the background rate,
    /// low enough that pruning keeps the graph sparse.
    pub fn desk(cfg: &WorldConfig) -> Result<Self> {
        let SampleDims {
            relationships: m,
            objects: n,
            feature,
            object_feature,
            ..
        } = cfg.dims;
        if m == 0 || n == 0 {
            return Err(Error::Invalid("world needs at least one relationship and one object".into()));
        }
        if !(0.0..=1.0).contains(&cfg.background_rate) {
            return Err(Error::Invalid(format!("background_rate {} must lie in [0, 1]", cfg.background_rate)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = vec![vec![cfg.background_rate; n]; m];
        for (r, row) in p.iter_mut().enumerate() {
            row[r % n] = quantize6(rng.gen_range(0.55..0.75));
        }
        for r in 0..m {
            let shared = (m + r) % n;
            let rates = [rng.gen_range(0.5..0.7), rng.gen_range(0.2..0.3)];
            for (q, rate) in [r, (r + 1) % m].into_iter().zip(rates) {
                if p[q][shared] < rate {
                    p[q][shared] = quantize6(rate);
                }
            }
        }
        let mut rel: Vec<Vec<f64>> = (0..m)
            .map(|_| gaussian_vec(&mut rng, 3 * feature, cfg.pair_signal))
            .collect();
        for &(a, b) in &cfg.close_pairs {
            if a >= m || b >= m || a == b {
                return Err(Error::Invalid(format!("close pair ({a}, {b}) out of range")));
            }
            let jitter = gaussian_vec(&mut rng, 3 * feature, 0.05 * cfg.pair_signal);
            rel[b] = rel[a].iter().zip(&jitter).map(|(x, j)| quantize6(x + j)).collect();
        }
        let obj = (0..n).map(|_| gaussian_vec(&mut rng, object_feature, 1.0)).collect();

        let world = Self {
            dims: cfg.dims,
            relationship_names: default_names("rel", m),
            object_names: default_names("obj", n),
            cooccurrence: p,
            relationship_prototypes: rel,
            object_prototypes: obj,
            noise_scale: cfg.noise_scale,
            confidence: cfg.confidence,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        let (m, n) = (d.relationships, d.objects);
        let bad = |msg: String| Err(Error::Invalid(msg));
        if m == 0 || n == 0 || self.relationship_prototypes.is_empty() || self.object_prototypes.is_empty() {
            return bad("world has empty prototypes".into());
        }
        if self.relationship_names.len() != m || self.object_names.len() != n {
            return bad("name lists do not match dims".into());
        }
        if self.cooccurrence.len() != m || self.cooccurrence.iter().any(|r| r.len() != n) {
            return bad(format!("co-occurrence table must be {m}x{n}"));
        }
        if self.cooccurrence.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("co-occurrence probabilities must lie in [0, 1]".into());
        }
        if self.relationship_prototypes.len() != m
            || self.relationship_prototypes.iter().any(|v| v.len() != 3 * d.feature)
        {
            return bad(format!("need {m} relationship prototypes of length {}", 3 * d.feature));
        }
        if self.object_prototypes.len() != n || self.object_prototypes.iter().any(|v| v.len() != d.object_feature) {
            return bad(format!("need {n} object prototypes of length {}", d.object_feature));
        }
        for protos in [&self.relationship_prototypes, &self.object_prototypes] {
            for i in 0..protos.len() {
                for j in i + 1..protos.len() {
                    if protos[i] == protos[j] {
                        return bad(format!("prototypes {i} and {j} coincide"));
                    }
                }
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale {} must be >= 0", self.noise_scale));
        }
        self.confidence.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(text).map_err(|e| Error::parse("world", e.line(), e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    /// Probability that a sample labelled `r` carries a detection of `o`
    /// with confidence above `eps`, given Beta CDF values at `eps`.
    pub fn detection_rate(&self, r: usize, o: usize, present_cdf: f64, clutter_cdf: f64) -> f64 {
        let p = self.cooccurrence[r][o];
        p * (1.0 - present_cdf) + (1.0 - p) * self.confidence.clutter_rate * (1.0 - clutter_cdf)
    }

    fn sample(&self, id: u64, seed: u64, present: &Beta<f64>, clutter: &Beta<f64>) -> Sample<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        let d = &self.dims;
        let label = rng.gen_range(0..d.relationships);
        let noisy = |rng: &mut ChaCha8Rng, proto: &[f64]| -> Vec<f64> {
            proto
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(rng);
                    quantize6(x + self.noise_scale * z)
                })
                .collect()
        };
        let proto = &self.relationship_prototypes[label];
        let f = d.feature;
        let f_union = noisy(&mut rng, &proto[..f]);
        let f_p1 = noisy(&mut rng, &proto[f..2 * f]);
        let f_p2 = noisy(&mut rng, &proto[2 * f..]);
        let geometry = (0..d.geometry).map(|_| quantize6(rng.gen::<f64>())).collect();
        let mut detections = Vec::new();
        for o in 0..d.objects {
            let is_present = rng.gen::<f64>() < self.cooccurrence[label][o];
            let confidence = if is_present {
                Some(present.sample(&mut rng))
            } else if rng.gen::<f64>() < self.confidence.clutter_rate {
                Some(clutter.sample(&mut rng))
            } else {
                None
            };
            if let Some(c) = confidence {
                let feature = noisy(&mut rng, &self.object_prototypes[o]);
                detections.push(Detection {
                    object: o,
                    confidence: quantize6(c).clamp(0.0, 1.0),
                    feature,
                });
            }
        }
        Sample {
            id,
            f_union,
            f_p1,
            f_p2,
            geometry,
            detections,
            label,
        }
    }
}

/// Draws `n` samples with ids `0..n`. Every sample depends only on
/// `(seed, id)`, so generation runs in parallel with fixed output order.
pub fn generate(world: &WorldModel, n: usize, seed: u64) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    world.validate()?;
    let ((pa, pb), (ca, cb)) = world.confidence.beta_params();
    let beta = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::Invalid(format!("beta({a}, {b}): {e}")));
    let present = beta(pa, pb)?;
    let clutter = beta(ca, cb)?;
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|id| world.sample(id, seed, &present, &clutter))
        .collect();
    Dataset::new(world.dims, samples)
}

/// Detections with confidence strictly above `eps`.
pub fn simulate_detections(sample: &Sample<f64>, eps: f64) -> Vec<Detection<f64>> {
    sample.detections_above(eps).cloned().collect()
}

/// Splits off consecutive blocks of the given sizes.
pub fn split(data: Dataset<f64>, sizes: &[usize]) -> Result<Vec<Dataset<f64>>> {
    let total: usize = sizes.iter().sum();
    if total != data.len() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Invalid(format!(
            "split sizes {sizes:?} do not partition {} samples",
            data.len()
        )));
    }
    let dims = data.dims;
    let mut rest = data.samples.into_iter();
    sizes
        .iter()
        .map(|&s| Dataset::new(dims, rest.by_ref().take(s).collect()))
        .collect()
}
