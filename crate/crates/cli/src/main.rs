//! `grm`: data generation, graph building, training, evaluation,
//! attention export and threshold sweeps.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid config or input file,
//! 3 runtime failure (divergence, unreadable file contents).

use clap::{Args, Parser, Subcommand};
use grm_core::checkpoint::{load_checkpoint, save_checkpoint};
use grm_core::config::RunConfig;
use grm_core::data::{load_dataset, save_dataset};
use grm_core::experiment::{build_graph, config_header, prepare, sweep, SWEEP_EPS1};
use grm_core::explain::{attention_dot, explain};
use grm_core::graph::{graph_to_dot, load_graph, save_graph};
use grm_core::train::{evaluate, train};
use grm_core::{Dataset, Error, GrmModel, KnowledgeGraph};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OUT_ENV: &str = "GRM_OUT_DIR";

#[derive(Parser)]
#[command(name = "grm", version, about = "Graph reasoning over relationship and object nodes")]
struct Cli {
    /// Output directory [default: $GRM_OUT_DIR, else ./out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test datasets and the world model.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build the knowledge graph from a training dataset.
    BuildGraph {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a model; writes the best checkpoint and the loss history.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Score a dataset with a checkpoint.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Export per-sample attention records and DOT overlays.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Sample ids to explain [default: the first `--limit` samples]
        #[arg(long, value_delimiter = ',')]
        ids: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        limit: usize,
    },
    /// Retrain at each object threshold and tabulate test metrics.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Thresholds to try.
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_EPS1)]
        eps1: Vec<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::Parse { .. } | Error::NonFinite(_) => 3,
        Error::Stage { source, .. } => exit_code(source),
        Error::Io(_) => 2,
        _ if e.is_validation() => 2,
        _ => 3,
    }
}

fn apply_overrides(cfg: &mut RunConfig, set: &[String]) -> grm_core::Result<()> {
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn load_config(args: &ConfigArgs) -> grm_core::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &args.set)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Rebuilds the configuration stored in a checkpoint header.
fn config_from_header(header: &[(String, String)]) -> grm_core::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in header {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, text: &str) -> grm_core::Result<()> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn check_dims(cfg: &RunConfig, data: &Dataset<f64>, graph: Option<&KnowledgeGraph>) -> grm_core::Result<()> {
    if data.dims != cfg.dims() {
        return Err(Error::Invalid(format!(
            "dataset dims {:?} do not match the configuration {:?}",
            data.dims,
            cfg.dims()
        )));
    }
    if let Some(g) = graph {
        if g.num_relationships() != cfg.relationships || g.num_objects() != cfg.objects {
            return Err(Error::Invalid(format!(
                "graph has {}x{} nodes, configuration expects {}x{}",
                g.num_relationships(),
                g.num_objects(),
                cfg.relationships,
                cfg.objects
            )));
        }
    }
    Ok(())
}

fn with_source(cfg: &RunConfig, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut h = cfg.pairs();
    h.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    h
}

fn dispatch(cmd: Command, out: &Path) -> grm_core::Result<()> {
    std::fs::create_dir_all(out)?;
    log::info!("writing artifacts to {}", out.display());
    match cmd {
        Command::GenData { cfg } => {
            let cfg = load_config(&cfg)?;
            let splits = prepare(&cfg)?;
            let world = serde_json::json!({
                "config": cfg.pairs().into_iter().collect::<std::collections::BTreeMap<_, _>>(),
                "world": serde_json::from_str::<serde_json::Value>(&splits.world.to_json()).expect("valid json"),
            });
            write(&out.join("world.json"), &format!("{:#}\n", world))?;
            for (name, data) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
                let path = out.join(format!("{name}.txt"));
                save_dataset(&path, data, &with_source(&cfg, &[("split", name.to_string())]))?;
                println!("wrote {} ({} samples)", path.display(), data.len());
            }
        }
        Command::BuildGraph { cfg, data } => {
            let cfg = load_config(&cfg)?;
            let train_set = load_dataset::<f64>(&data)?;
            check_dims(&cfg, &train_set, None)?;
            let world = grm_core::synth::WorldModel::desk(&cfg.world_config())?;
            let graph = build_graph(&cfg, &world, &train_set)?;
            let header = with_source(&cfg, &[("data", data.display().to_string())]);
            save_graph(&out.join("graph.txt"), &graph, &header)?;
            println!("wrote {} ({} edges)", out.join("graph.txt").display(), graph.edge_count());
            write(&out.join("graph.dot"), &format!("{}{}", dot_header(&cfg), graph_to_dot(&graph)))?;
        }
        Command::Train { cfg, train: train_path, val, graph } => {
            let cfg = load_config(&cfg)?;
            let train_set = load_dataset::<f64>(&train_path)?;
            let val_set = val.as_deref().map(load_dataset::<f64>).transpose()?;
            let graph = load_graph(&graph)?;
            check_dims(&cfg, &train_set, Some(&graph))?;
            if let Some(v) = &val_set {
                check_dims(&cfg, v, None)?;
            }
            let model = GrmModel::new(cfg.model_config(), cfg.seed)?;
            let outcome = train(model, &graph, &train_set, val_set.as_ref(), &cfg.train_config())?;
            let path = out.join("model.ckpt");
            save_checkpoint(&path, &outcome.model, &cfg.pairs())?;
            println!("wrote {}", path.display());
            write(
                &out.join("history.txt"),
                &format!("{}{}", config_header(&cfg), outcome.history.to_text()),
            )?;
        }
        Command::Eval { cfg: args, checkpoint, data, graph } => {
            let ckpt = load_checkpoint::<f64>(&checkpoint)?;
            let mut cfg = config_from_header(&ckpt.header)?;
            if let Some(path) = &args.config {
                cfg = RunConfig::load(path)?;
            }
            apply_overrides(&mut cfg, &args.set)?;
            let data = load_dataset::<f64>(&data)?;
            let graph = load_graph(&graph)?;
            check_dims(&cfg, &data, Some(&graph))?;
            let m = evaluate(&ckpt.model, &graph, &data, cfg.ap_method, cfg.score_basis)?;
            let table = m.to_table(graph.relationship_names());
            print!("{table}");
            write(&out.join("metrics.txt"), &format!("{}{table}", config_header(&cfg)))?;
            let json = serde_json::json!({
                "config": cfg.pairs().into_iter().collect::<std::collections::BTreeMap<_, _>>(),
                "metrics": m,
            });
            write(&out.join("metrics.json"), &format!("{json}\n"))?;
        }
        Command::Explain { checkpoint, data, graph, ids, limit } => {
            let ckpt = load_checkpoint::<f64>(&checkpoint)?;
            let cfg = config_from_header(&ckpt.header)?;
            let data = load_dataset::<f64>(&data)?;
            let graph = load_graph(&graph)?;
            check_dims(&cfg, &data, Some(&graph))?;
            let chosen: Vec<_> = if ids.is_empty() {
                data.samples.iter().take(limit).collect()
            } else {
                ids.iter()
                    .map(|id| {
                        data.samples
                            .iter()
                            .find(|s| s.id == *id)
                            .ok_or_else(|| Error::Invalid(format!("no sample with id {id}")))
                    })
                    .collect::<grm_core::Result<_>>()?
            };
            let mut lines = serde_json::json!({
                "config": cfg.pairs().into_iter().collect::<std::collections::BTreeMap<_, _>>()
            })
            .to_string();
            lines.push('\n');
            for s in chosen {
                let e = explain(&ckpt.model, &graph, s)?;
                lines.push_str(&e.to_json_line());
                lines.push('\n');
                write(
                    &out.join(format!("sample_{}.dot", s.id)),
                    &format!("{}{}", dot_header(&cfg), attention_dot(&graph, &e)),
                )?;
            }
            write(&out.join("explain.jsonl"), &lines)?;
        }
        Command::Sweep { cfg, eps1 } => {
            let cfg = load_config(&cfg)?;
            let report = sweep(&cfg, &eps1)?;
            let text = report.to_text();
            print!("{}", text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
            write(&out.join("sweep.txt"), &text)?;
        }
    }
    Ok(())
}

fn dot_header(cfg: &RunConfig) -> String {
    cfg.to_text().lines().map(|l| format!("// {l}\n")).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = out_dir(cli.out_dir);
    match dispatch(cli.command, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
