//! `boxprop` — synthetic-scene box proposal pipeline driver.
//!
//! Subcommands cover the full loop: generate scene datasets, train the
//! learned backend, run the proposal search, evaluate average recall, and
//! re-order externally produced proposal files.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use boxprop_core::backend::{train, SceneDataset, TrainConfig};
use boxprop_core::engine::{attention_map, propose_traced, EngineConfig, Proposal};
use boxprop_core::eval::build_report;
use boxprop_core::formats::{
    read_annotations, read_proposals, write_annotations, write_heatmap, write_proposals,
    AnnotationFile, AnnotationRecord, HeatmapFormat, ImageRecord,
};
use boxprop_core::geometry::BBox;
use boxprop_core::nms::{multithreshold_reorder, NmsSchedule};
use boxprop_core::{LearnedRefiner, ModelParams, NoisyRefiner, OracleRefiner, Refiner};

/// Grid cell size (pixels) for attention heatmaps.
const ATTENTION_CELL: u32 = 8;

#[derive(Parser)]
#[command(name = "boxprop", version, about = "Box proposal engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene dataset plus its annotation file.
    GenSynthetic(GenSyntheticArgs),
    /// Train the learned refinement backend on a scene dataset.
    Train(TrainArgs),
    /// Run the proposal search over a scene dataset.
    Propose(ProposeArgs),
    /// Evaluate a proposal file against annotations.
    Eval(EvalArgs),
    /// Re-order a raw proposal file with multi-threshold NMS.
    ReorderNms(ReorderArgs),
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Base seed for the scene family.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenes.
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out_annotations: PathBuf,
    #[arg(long)]
    out_scenes: PathBuf,
    /// Optional scene-distribution spec (JSON); defaults otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Scene dataset manifest produced by gen-synthetic.
    #[arg(long)]
    scenes: PathBuf,
    /// Engine configuration (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_model: PathBuf,
    /// Loss trace CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Iteration at which the learning rate drops by 10x.
    #[arg(long, default_value_t = 4000)]
    lr_drop_at: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProposeArgs {
    /// Scene dataset manifest produced by gen-synthetic.
    #[arg(long)]
    scenes: PathBuf,
    /// Backend: oracle, noisy or learned.
    #[arg(long, default_value = "oracle")]
    backend: String,
    /// Trained model (required for the learned backend).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Engine configuration (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_proposals: PathBuf,
    /// Directory for per-iteration attention heatmaps (PGM).
    #[arg(long)]
    emit_attention: Option<PathBuf>,
    /// Seed for the noisy backend.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corruption fraction for the noisy backend.
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    proposals: PathBuf,
    /// Comma-separated proposal budgets.
    #[arg(long, default_value = "10,100,1000")]
    ks: String,
    #[arg(long)]
    out_report: PathBuf,
    /// Optional recall-vs-IoU curve CSV (columns: K, iou, recall).
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct ReorderArgs {
    #[arg(long)]
    proposals: PathBuf,
    /// NMS schedule (JSON); defaults otherwise.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Scene dataset manifest: the distribution spec plus a count; scenes are
/// regenerated deterministically from it.
#[derive(serde::Serialize, serde::Deserialize)]
struct ScenesFile {
    version: u32,
    dataset: SceneDataset,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::Train(args) => run_train(args),
        Command::Propose(args) => run_propose(args),
        Command::Eval(args) => run_eval(args),
        Command::ReorderNms(args) => run_reorder(args),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {what} from {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} from {}", path.display()))
}

fn load_engine_config(path: &Option<PathBuf>) -> Result<EngineConfig, CliError> {
    let cfg: EngineConfig = match path {
        Some(p) => read_json(p, "engine config")?,
        None => EngineConfig::default(),
    };
    cfg.validate()
        .map_err(|e| CliError::Data(anyhow!("invalid engine config: {e}")))?;
    Ok(cfg)
}

fn load_scenes(path: &Path) -> Result<SceneDataset, CliError> {
    let file: ScenesFile = read_json(path, "scene dataset")?;
    if file.version != 1 {
        return Err(CliError::Data(anyhow!(
            "unsupported scenes file version {}",
            file.version
        )));
    }
    file.dataset
        .spec
        .validate()
        .map_err(|e| CliError::Data(anyhow!("invalid scene spec: {e}")))?;
    Ok(file.dataset)
}

fn gen_synthetic(args: GenSyntheticArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let mut spec: boxprop_core::datagen::SceneSpec = match &args.spec {
        Some(p) => read_json(p, "scene spec")?,
        None => Default::default(),
    };
    spec.seed = args.seed;
    spec.validate()
        .map_err(|e| CliError::Data(anyhow!("invalid scene spec: {e}")))?;

    let dataset = SceneDataset::new(spec, args.count);
    let mut images = Vec::with_capacity(args.count);
    let mut annotations = Vec::new();
    for i in 0..args.count {
        let scene = dataset.scene(i);
        images.push(ImageRecord {
            id: i as u64,
            width: scene.extent.width as i64,
            height: scene.extent.height as i64,
        });
        for (b, category) in &scene.gts {
            annotations.push(AnnotationRecord {
                image_id: i as u64,
                bbox: [b.x1, b.y1, b.width(), b.height()],
                category_id: *category,
            });
        }
    }
    write_annotations(
        &args.out_annotations,
        &AnnotationFile {
            images,
            annotations,
        },
    )
    .map_err(|e| CliError::Data(e.into()))?;

    let manifest = ScenesFile {
        version: 1,
        dataset,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    fs::write(&args.out_scenes, json)
        .with_context(|| format!("writing {}", args.out_scenes.display()))
        .map_err(CliError::Data)?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let dataset = load_scenes(&args.scenes)?;
    let engine = load_engine_config(&args.config)?;
    let cfg = TrainConfig {
        iterations: args.iterations,
        learning_rate: args.lr,
        lr_drop_at: args.lr_drop_at,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let outcome = train(&dataset, &engine.seed_cfg, engine.gamma, engine.m, &cfg)
        .map_err(|e| CliError::Data(anyhow!(e)))?;

    let json = serde_json::to_string_pretty(&outcome.params).expect("model serialization");
    fs::write(&args.out_model, json)
        .with_context(|| format!("writing {}", args.out_model.display()))
        .map_err(CliError::Data)?;

    if let Some(log) = &args.log {
        let mut out = String::from("iteration,loss\n");
        for (i, loss) in outcome.loss_trace.iter().enumerate() {
            out.push_str(&format!("{i},{loss}\n"));
        }
        fs::write(log, out)
            .with_context(|| format!("writing {}", log.display()))
            .map_err(CliError::Data)?;
    }
    Ok(())
}

/// Flag-coherence checks that need no file access; run before any I/O so
/// usage mistakes surface as usage errors.
fn validate_backend_flags(args: &ProposeArgs) -> Result<(), CliError> {
    match args.backend.as_str() {
        "oracle" => Ok(()),
        "noisy" => {
            if !(0.0..=1.0).contains(&args.noise) {
                return Err(CliError::Usage("--noise must lie in [0, 1]".into()));
            }
            Ok(())
        }
        "learned" => {
            if args.model.is_none() {
                return Err(CliError::Usage(
                    "--model is required with --backend learned".into(),
                ));
            }
            Ok(())
        }
        other => Err(CliError::Usage(format!(
            "unknown backend '{other}' (expected oracle, noisy or learned)"
        ))),
    }
}

fn make_backend(args: &ProposeArgs) -> Result<Box<dyn Refiner>, CliError> {
    match args.backend.as_str() {
        "oracle" => Ok(Box::new(OracleRefiner)),
        "noisy" => Ok(Box::new(NoisyRefiner {
            noise: args.noise,
            seed: args.seed,
        })),
        "learned" => {
            let path = args.model.as_ref().expect("validated");
            let params: ModelParams = read_json(path, "model")?;
            params
                .validate()
                .map_err(|e| CliError::Data(anyhow!("invalid model: {e}")))?;
            Ok(Box::new(LearnedRefiner { params }))
        }
        other => Err(CliError::Usage(format!(
            "unknown backend '{other}' (expected oracle, noisy or learned)"
        ))),
    }
}

fn run_propose(args: ProposeArgs) -> Result<(), CliError> {
    validate_backend_flags(&args)?;
    let dataset = load_scenes(&args.scenes)?;
    let engine = load_engine_config(&args.config)?;
    let backend = make_backend(&args)?;
    if let Some(dir) = &args.emit_attention {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::Data)?;
    }

    let mut groups: BTreeMap<u64, Vec<Proposal>> = BTreeMap::new();
    for i in 0..dataset.count {
        let scene = dataset.scene(i);
        let trace = propose_traced(&scene, backend.as_ref(), &engine);
        if let Some(dir) = &args.emit_attention {
            let maps = attention_map(&trace.per_iteration, scene.extent, ATTENTION_CELL);
            for (t, map) in maps.iter().enumerate() {
                let path = dir.join(format!("attention_{i:05}_iter{t}.pgm"));
                write_heatmap(map, &path, HeatmapFormat::Pgm)
                    .map_err(|e| CliError::Data(e.into()))?;
            }
        }
        groups.insert(i as u64, trace.proposals);
    }
    write_proposals(&args.out_proposals, &groups).map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let ks: Vec<usize> = args
        .ks
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("unparseable --ks '{}'", args.ks)))?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Usage("--ks must be positive integers".into()));
    }
    let index = read_annotations(&args.annotations).map_err(|e| CliError::Data(e.into()))?;
    let proposals = read_proposals(&args.proposals).map_err(|e| CliError::Data(e.into()))?;

    let empty: Vec<Proposal> = Vec::new();
    let per_image: Vec<(&[Proposal], Vec<BBox>)> = index
        .iter()
        .map(|(id, gt)| {
            let props = proposals.get(id).unwrap_or(&empty);
            (
                props.as_slice(),
                gt.gts.iter().map(|(b, _)| *b).collect::<Vec<BBox>>(),
            )
        })
        .collect();
    let views: Vec<(&[Proposal], &[BBox])> = per_image
        .iter()
        .map(|(p, g)| (*p, g.as_slice()))
        .collect();
    let report = build_report(&views, &ks);

    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    fs::write(&args.out_report, json)
        .with_context(|| format!("writing {}", args.out_report.display()))
        .map_err(CliError::Data)?;

    if let Some(curves) = &args.curves {
        let mut out = String::from("K,iou,recall\n");
        for (k, curve) in &report.recall_curves {
            for (iou, recall) in curve {
                out.push_str(&format!("{k},{iou},{recall}\n"));
            }
        }
        fs::write(curves, out)
            .with_context(|| format!("writing {}", curves.display()))
            .map_err(CliError::Data)?;
    }
    Ok(())
}

fn run_reorder(args: ReorderArgs) -> Result<(), CliError> {
    let schedule: NmsSchedule = match &args.schedule {
        Some(p) => read_json(p, "NMS schedule")?,
        None => NmsSchedule::default(),
    };
    schedule
        .validate()
        .map_err(|e| CliError::Data(anyhow!("invalid NMS schedule: {e}")))?;
    let groups = read_proposals(&args.proposals).map_err(|e| CliError::Data(e.into()))?;
    let mut out = BTreeMap::new();
    for (id, props) in groups {
        if let Some(bad) = props.iter().find(|p| !(0.0..=1.0).contains(&p.score)) {
            return Err(CliError::Data(anyhow!(
                "image {id}: score {} outside [0, 1]; re-ordering expects raw objectness scores",
                bad.score
            )));
        }
        out.insert(id, multithreshold_reorder(&props, &schedule));
    }
    write_proposals(&args.out, &out).map_err(|e| CliError::Data(e.into()))?;
    Ok(())
}
