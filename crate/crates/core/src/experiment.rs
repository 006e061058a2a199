//! End-to-end runs: generate data, build the graph, train, evaluate.
//!
//! Every report is plain text with fixed decimals, so repeating a run with
//! the same configuration reproduces it byte for byte.

use crate::config::{RunConfig, Variant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{count_cooccurrence, normalize_and_prune, KnowledgeGraph};
use crate::metrics::Metrics;
use crate::model::GrmModel;
use crate::synth::{generate, split, WorldModel};
use crate::train::{evaluate, train, History};
use std::fmt::Write as _;

/// Train / validation / test splits drawn from one world.
pub struct Splits {
    pub world: WorldModel,
    pub train: Dataset<f64>,
    pub val: Dataset<f64>,
    pub test: Dataset<f64>,
}

/// Draws `n_train + n_val + n_test` samples with the run seed and splits
/// them in that order.
pub fn prepare(cfg: &RunConfig) -> Result<Splits> {
    cfg.validate()?;
    let world = WorldModel::desk(&cfg.world_config())?;
    let data = generate(&world, cfg.n_train + cfg.n_val + cfg.n_test, cfg.seed)?;
    let mut parts = split(data, &[cfg.n_train, cfg.n_val, cfg.n_test])?.into_iter();
    let mut next = || parts.next().expect("three splits");
    Ok(Splits {
        train: next(),
        val: next(),
        test: next(),
        world,
    })
}

/// The co-occurrence graph of `train` at `eps2`, or a random one when the
/// configuration asks for it.
pub fn build_graph(cfg: &RunConfig, world: &WorldModel, train: &Dataset<f64>) -> Result<KnowledgeGraph> {
    let (rel, obj) = (world.relationship_names.clone(), world.object_names.clone());
    if cfg.random_adjacency {
        return KnowledgeGraph::random(rel, obj, cfg.prune_threshold, cfg.seed);
    }
    let counts = count_cooccurrence(&train.samples, cfg.relationships, cfg.objects, cfg.eps2)?;
    normalize_and_prune(&counts, cfg.prune_threshold, cfg.normalization, rel, obj)
}

pub struct RunResult {
    pub config: RunConfig,
    pub graph: KnowledgeGraph,
    pub model: GrmModel<f64>,
    pub history: History,
    pub test: Metrics,
}

/// One full pipeline run.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    let splits = prepare(cfg)?;
    let graph = build_graph(cfg, &splits.world, &splits.train)?;
    let model = GrmModel::new(cfg.model_config(), cfg.seed)?;
    let out = train(model, &graph, &splits.train, Some(&splits.val), &cfg.train_config())?;
    let test = evaluate(&out.model, &graph, &splits.test, cfg.ap_method, cfg.score_basis)?;
    log::info!(
        "{} seed={} eps1={} map={:.4} acc={:.4}",
        cfg.variant().name(),
        cfg.seed,
        cfg.eps1,
        test.map,
        test.accuracy
    );
    Ok(RunResult {
        config: cfg.clone(),
        graph,
        model: out.model,
        history: out.history,
        test,
    })
}

/// Provenance block: the full configuration as `# key = value` lines.
pub fn config_header(cfg: &RunConfig) -> String {
    cfg.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    pub map: f64,
    pub accuracy: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub base: RunConfig,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn map(&self, variant: Variant, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.seed == seed)
            .map(|r| r.map)
    }

    /// Per-seed test mAP of `variant`, in seed order.
    pub fn maps(&self, variant: Variant) -> Vec<f64> {
        self.seeds.iter().filter_map(|&s| self.map(variant, s)).collect()
    }

    pub fn mean_map(&self, variant: Variant) -> Option<f64> {
        let v = self.maps(variant);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-seed differences `a - b` in mAP.
    pub fn margins(&self, a: Variant, b: Variant) -> Vec<f64> {
        self.seeds
            .iter()
            .filter_map(|&s| Some(self.map(a, s)? - self.map(b, s)?))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = config_header(&self.base);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# seeds = {}", seeds.join(","));
        let _ = writeln!(out, "variant,seed,test_map,test_accuracy,best_epoch");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{}",
                r.variant.name(),
                r.seed,
                r.map,
                r.accuracy,
                r.best_epoch
            );
        }
        for &v in &self.variants {
            if let Some(m) = self.mean_map(v) {
                let _ = writeln!(out, "mean,{},{:.6}", v.name(), m);
            }
        }
        out
    }
}

/// Runs every variant on every seed. The base configuration's own
/// ablation flags and seed are overridden.
pub fn ablation(base: &RunConfig, seeds: &[u64], variants: &[Variant]) -> Result<AblationReport> {
    if seeds.is_empty() || variants.is_empty() {
        return Err(Error::Invalid("ablation needs at least one seed and one variant".into()));
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        for &variant in variants {
            let cfg = RunConfig {
                seed,
                ..base.with_variant(variant)
            };
            let r = run(&cfg)?;
            rows.push(AblationRow {
                variant,
                seed,
                map: r.test.map,
                accuracy: r.test.accuracy,
                best_epoch: r.history.best_epoch,
            });
        }
    }
    Ok(AblationReport {
        base: base.clone(),
        seeds: seeds.to_vec(),
        variants: variants.to_vec(),
        rows,
    })
}

pub const SWEEP_EPS1: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps1: f64,
    pub map: f64,
    pub accuracy: f64,
    /// Mean number of detections per test sample that pass `eps1`.
    pub mean_objects: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub base: RunConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_text(&self) -> String {
        let mut out = config_header(&self.base);
        let _ = writeln!(out, "eps1,test_map,test_accuracy,mean_objects");
        for r in &self.rows {
            let _ = writeln!(out, "{:.2},{:.6},{:.6},{:.4}", r.eps1, r.map, r.accuracy, r.mean_objects);
        }
        out
    }
}

/// Retrains the base configuration at each object threshold.
pub fn sweep(base: &RunConfig, eps1_values: &[f64]) -> Result<SweepReport> {
    if eps1_values.is_empty() {
        return Err(Error::Invalid("sweep needs at least one eps1 value".into()));
    }
    let mut rows = Vec::new();
    for &eps1 in eps1_values {
        let cfg = RunConfig { eps1, ..base.clone() };
        let splits = prepare(&cfg)?;
        let kept: usize = splits.test.samples.iter().map(|s| s.detections_above(eps1).count()).sum();
        let r = run(&cfg)?;
        rows.push(SweepRow {
            eps1,
            map: r.test.map,
            accuracy: r.test.accuracy,
            mean_objects: kept as f64 / splits.test.len() as f64,
        });
    }
    Ok(SweepReport {
        base: base.clone(),
        rows,
    })
}
