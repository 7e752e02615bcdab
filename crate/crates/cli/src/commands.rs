//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cadren_core::baselines::PageRankConfig;
use cadren_core::datagen::{generate, stats, Family, GenConfig, StatsTable};
use cadren_core::eval::{
    evaluate, render_table, CadrenScorer, EvalKs, EvalReport, OracleScorer, PageRankScorer, PprScorer, Scorer,
};
use cadren_core::graph::{load_dataset, load_split, merge_to_single, save_dataset, save_split, Dataset, SplitKind};
use cadren_core::model::{train, Cadren};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::serve::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "cadren", version, about = "Anchor-relative node importance estimation")]
pub struct Cli {
    /// JSON run config (a manifest from an earlier run also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and split file.
    GenData(GenDataArgs),
    /// Train a model and write its checkpoint and training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the ground-truth oracle) on a split.
    Eval(EvalArgs),
    /// Rank the nodes of one graph for an anchor set.
    Infer(InferArgs),
    /// Evaluate PageRank or Personalized PageRank on a split.
    Baseline(BaselineArgs),
    /// Serve the scoring API over HTTP.
    Serve(ServeArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for SplitKind {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitKind::Train,
            SplitArg::Val => SplitKind::Val,
            SplitArg::Test => SplitKind::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineMethod {
    Pr,
    Ppr,
}

#[derive(Debug, Default, Args)]
pub struct DataArgs {
    /// Dataset in JSON-lines form.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Split file; without one every graph belongs to the requested split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Dataset name shown in reports.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub graphs: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, conflicts_with = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Score with the ground truth itself.
    #[arg(long)]
    pub oracle: bool,
    /// Add PR and PPR rows to the report.
    #[arg(long)]
    pub baselines: bool,
    #[arg(long = "on", value_enum, default_value = "test")]
    pub on: SplitArg,
    /// Directory for report.json, report.txt and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub graph: String,
    /// Anchor node ids, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ca: Vec<String>,
    #[arg(long, default_value_t = serve::DEFAULT_TOP_K)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long = "on", value_enum, default_value = "test")]
    pub on: SplitArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also report the dataset merged into a single graph.
    #[arg(long)]
    pub merge: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(&mut cfg, a),
        Command::Train(a) => train_cmd(&mut cfg, a),
        Command::Eval(a) => eval_cmd(&mut cfg, a),
        Command::Infer(a) => infer_cmd(&mut cfg, a),
        Command::Baseline(a) => baseline_cmd(&mut cfg, a),
        Command::Serve(a) => serve_cmd(&mut cfg, a),
        Command::Stats(a) => stats_cmd(&mut cfg, a),
    }
}

fn apply_data(cfg: &mut RunConfig, a: &DataArgs) {
    if let Some(p) = &a.data {
        cfg.data.dataset = Some(p.clone());
    }
    if let Some(p) = &a.split {
        cfg.data.split = Some(p.clone());
    }
    if let Some(n) = &a.name {
        cfg.data.name = Some(n.clone());
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *slot = Some(p.clone());
    }
}

/// Loads the dataset. Without a split file every graph is put in `all_into`.
fn load(cfg: &RunConfig, all_into: SplitKind, manifest: &mut Manifest) -> Result<Dataset> {
    let path = cfg.dataset_path()?;
    let ds = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    manifest.input(path)?;
    match &cfg.data.split {
        Some(sp) => {
            manifest.input(sp)?;
            let split = load_split(sp).with_context(|| format!("loading split {}", sp.display()))?;
            Ok(ds.with_split(split)?)
        }
        None => {
            let ids: Vec<String> = ds.graphs().iter().map(|g| g.id().to_string()).collect();
            let mut split = cadren_core::graph::Split::default();
            match all_into {
                SplitKind::Train => split.train = ids,
                SplitKind::Val => split.val = ids,
                SplitKind::Test => split.test = ids,
            }
            Ok(ds.with_split(split)?)
        }
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.data.out.as_deref().context("no output directory given (use --out or data.out)")?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_model(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Cadren> {
    let path = cfg
        .data
        .checkpoint
        .as_deref()
        .context("no checkpoint given (use --checkpoint or data.checkpoint)")?;
    let model = Cadren::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    manifest.input(path)?;
    manifest.input(&cadren_core::model::bundle::sidecar_path(path))?;
    Ok(model)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn gen_data(cfg: &mut RunConfig, a: GenDataArgs) -> Result<()> {
    let mut g = cfg.data.gen.clone().unwrap_or_default();
    match a.family {
        Some(FamilyArg::A) if g.family != Family::A => g = GenConfig::family_a(g.n_graphs, g.seed),
        Some(FamilyArg::B) if g.family != Family::B => g = GenConfig::family_b(g.n_graphs, g.seed),
        _ => {}
    }
    if let Some(v) = a.graphs {
        g.n_graphs = v;
    }
    if let Some(v) = a.val {
        g.n_val = v;
    }
    if let Some(v) = a.test {
        g.n_test = v;
    }
    if let Some(v) = a.seed {
        g.seed = v;
    }
    cfg.data.gen = Some(g.clone());
    set_path(&mut cfg.data.out, &a.out);
    let dir = out_dir(cfg)?.to_path_buf();
    let ds = generate(&g)?;
    let data_path = dir.join("dataset.jsonl");
    let split_path = dir.join("split.json");
    save_dataset(&ds, &data_path)?;
    save_split(ds.split(), &split_path)?;

    let mut manifest = Manifest::new("gen-data", cfg);
    manifest.output(&data_path)?;
    manifest.output(&split_path)?;
    manifest.write(&dir)?;
    let family = match g.family {
        Family::A => "family A",
        Family::B => "family B",
    };
    print!("{}", StatsTable(&[(family.to_string(), stats(&ds))]));
    println!("wrote {} and {}", data_path.display(), split_path.display());
    Ok(())
}

fn train_cmd(cfg: &mut RunConfig, a: TrainArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    set_path(&mut cfg.data.out, &a.out);
    if let Some(e) = a.epochs {
        cfg.train.epochs = Some(e);
    }
    if let Some(s) = a.seed {
        cfg.train.seed = Some(s);
    }
    let model_cfg = cfg.model_config()?;
    let provider = cfg.provider_spec()?;
    let mut manifest = Manifest::new("train", cfg);
    let ds = load(cfg, SplitKind::Train, &mut manifest)?;
    let dir = out_dir(cfg)?.to_path_buf();
    let out = train(&ds, &model_cfg, provider)?;
    let ckpt = dir.join("model.ckpt");
    out.model.save(&ckpt)?;
    let log_path = dir.join("train_log.csv");
    fs::write(&log_path, out.log_csv())?;
    manifest.output(&ckpt)?;
    manifest.output(&cadren_core::model::bundle::sidecar_path(&ckpt))?;
    manifest.output(&log_path)?;
    manifest.write(&dir)?;
    println!(
        "trained {} epochs, kept epoch {}; wrote {}",
        out.log.len(),
        out.best_epoch,
        ckpt.display()
    );
    Ok(())
}

fn report_outputs(cfg: &RunConfig, reports: &[EvalReport], mut manifest: Manifest) -> Result<()> {
    let table = render_table(reports);
    print!("{table}");
    if cfg.data.out.is_some() {
        let dir = out_dir(cfg)?.to_path_buf();
        let json = dir.join("report.json");
        let txt = dir.join("report.txt");
        write_json(&json, &reports)?;
        fs::write(&txt, &table)?;
        manifest.output(&json)?;
        manifest.output(&txt)?;
        manifest.write(&dir)?;
    }
    Ok(())
}

fn eval_cmd(cfg: &mut RunConfig, a: EvalArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    set_path(&mut cfg.data.checkpoint, &a.checkpoint);
    set_path(&mut cfg.data.out, &a.out);
    let mut manifest = Manifest::new("eval", cfg);
    let kind: SplitKind = a.on.into();
    let ds = load(cfg, kind, &mut manifest)?;
    let ks = EvalKs::for_dataset(&ds);
    let name = cfg.dataset_name();
    let model = if a.oracle {
        None
    } else {
        Some(load_model(cfg, &mut manifest)?)
    };
    let cadren = model.as_ref().map(CadrenScorer::new);
    let mut scorers: Vec<&dyn Scorer> = Vec::new();
    match &cadren {
        Some(s) => scorers.push(s),
        None => scorers.push(&OracleScorer),
    }
    let (pr, ppr) = (PageRankScorer::default(), PprScorer::default());
    if a.baselines {
        scorers.push(&pr);
        scorers.push(&ppr);
    }
    let reports = scorers
        .into_iter()
        .map(|s| evaluate(s, &ds, &name, kind, ks).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    report_outputs(cfg, &reports, manifest)
}

fn baseline_cmd(cfg: &mut RunConfig, a: BaselineArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    set_path(&mut cfg.data.out, &a.out);
    let mut manifest = Manifest::new("baseline", cfg);
    let kind: SplitKind = a.on.into();
    let ds = load(cfg, kind, &mut manifest)?;
    let ks = EvalKs::for_dataset(&ds);
    let report = match a.method {
        BaselineMethod::Pr => evaluate(&PageRankScorer::default(), &ds, &cfg.dataset_name(), kind, ks)?,
        BaselineMethod::Ppr => evaluate(&PprScorer::default(), &ds, &cfg.dataset_name(), kind, ks)?,
    };
    report_outputs(cfg, &[report], manifest)
}

fn infer_cmd(cfg: &mut RunConfig, a: InferArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    set_path(&mut cfg.data.checkpoint, &a.checkpoint);
    if a.top_k == 0 {
        bail!("--top-k must be >= 1");
    }
    let mut manifest = Manifest::new("infer", cfg);
    let ds = load(cfg, SplitKind::Test, &mut manifest)?;
    let state = AppState {
        model: load_model(cfg, &mut manifest)?,
        dataset: ds,
        pagerank: PageRankConfig::default(),
    };
    let req = serve::ScoreRequest {
        graph_id: a.graph,
        ca: a.ca,
        top_k: Some(a.top_k),
    };
    let resp = serve::score_request(&state, &req).map_err(|e| anyhow::anyhow!("{}", e.message()))?;
    let out = serde_json::json!({
        "graph_id": resp.graph_id,
        "ca": resp.ca,
        "ranking": resp.ranking,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn serve_cmd(cfg: &mut RunConfig, a: ServeArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    set_path(&mut cfg.data.checkpoint, &a.checkpoint);
    if let Some(h) = a.host {
        cfg.serve.host = h;
    }
    if let Some(p) = a.port {
        cfg.serve.port = p;
    }
    let mut manifest = Manifest::new("serve", cfg);
    let ds = load(cfg, SplitKind::Test, &mut manifest)?;
    let state = Arc::new(AppState {
        model: load_model(cfg, &mut manifest)?,
        dataset: ds,
        pagerank: PageRankConfig::default(),
    });
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve::serve(state, &cfg.serve.host, cfg.serve.port))
}

fn stats_cmd(cfg: &mut RunConfig, a: StatsArgs) -> Result<()> {
    apply_data(cfg, &a.data);
    let path = cfg.dataset_path()?;
    let ds = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    let name = cfg.dataset_name();
    let mut rows = vec![(format!("{name}-M"), stats(&ds))];
    if a.merge {
        let merged = Dataset::new(vec![merge_to_single(&ds)?])?;
        rows.push((format!("{name}-S"), stats(&merged)));
    }
    print!("{}", StatsTable(&rows));
    Ok(())
}
