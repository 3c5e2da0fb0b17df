//! `infolens` binary: stage subcommands plus a one-shot pipeline.
//!
//! Every invocation reads its inputs, then creates a fresh directory under
//! the run root ($INFOLENS_RUN_ROOT, default ./runs), writes its artifacts
//! and a manifest there, and prints the directory path. Inputs are never
//! modified; missing or damaged inputs abort before any output directory is
//! created. Failures print a one-line JSON report to stderr and exit with a
//! code that identifies the failure class.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use infolens::pipeline::{
    self, attach_capture, build_task, fit_pool_pca, generate_stage_trials, save_map, save_rdm,
    stage_map_config, stage_robustness_config, tags, train_classifier, EvalSummary, TrialStage,
    TARGET_IDENTITY,
};
use infolens::store::{
    self, fresh_run_dir, load_params, load_trialset, run_root, save_params, save_trialset,
    write_json_artifact, write_text_artifact,
};
use infolens::{classify as classify_error, error_json};
use infolens_core::analysis::{
    decision_redundancy_maps, diagnostic_map, layer_pc_maps, noise_robustness_test, rdm_pipeline,
    FeatureMap, RdmAnalysis,
};
use infolens_core::genmodel::{NoiseChannel, TrialSet};
use infolens_core::io::{Colormap, FileRole, Manifest, RunConfig, TRAIN_SEED_TAG};
use infolens_core::network::{classify, evaluate, Params};
use infolens_core::seeding;
use infolens_core::{Error, Result};

/// Directory holding the captured trial set inside a capture run.
const CAPTURED_TRIALS: &str = "trials/captured";

#[derive(Parser)]
#[command(
    name = "infolens",
    version,
    about = "Information maps over a trained classifier on a planted stimulus task"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Source of the run configuration: a named preset plus seed, or a JSON file.
#[derive(Args)]
struct ConfigSource {
    /// Built-in preset: "desk" or "smoke".
    #[arg(long, default_value = "desk", conflicts_with = "config")]
    preset: String,
    /// Run seed; with --config it overrides the file's seed and re-derives
    /// the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Full run-config JSON file (schema-checked before any work).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigSource {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        Error::MissingInput(path.display().to_string())
                    } else {
                        Error::from(e)
                    }
                })?;
                let mut config = RunConfig::from_json(&text)?;
                if let Some(seed) = self.seed {
                    config.seed = seed;
                    config.train.seed = seeding::split(seed, TRAIN_SEED_TAG);
                }
                Ok(config)
            }
            None => RunConfig::preset_by_name(&self.preset, self.seed.unwrap_or(0)),
        }
    }
}

/// Path to a run-config JSON file, for stage commands that replay one.
#[derive(Args)]
struct ConfigFile {
    /// Run-config JSON written by gen or pipeline (config.json).
    #[arg(long)]
    config: PathBuf,
}

impl ConfigFile {
    fn load(&self) -> Result<RunConfig> {
        let text = fs::read_to_string(&self.config).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(self.config.display().to_string())
            } else {
                Error::from(e)
            }
        })?;
        RunConfig::from_json(&text)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the planted task and all three trial sets.
    Gen(GenArgs),
    /// Train the classifier on a generated training trial set.
    Train(TrainArgs),
    /// Attach layer activations and the target logit to a trial set.
    Capture(CaptureArgs),
    /// Classification rates of trained parameters on a trial set.
    Eval(CaptureArgs),
    /// Diagnostic map: stimulus-response information per feature.
    MiMap(MapArgs),
    /// Layer-PC maps: stimulus information per feature about each pooled PC.
    PcMap(MapArgs),
    /// Redundancy maps: per-feature information shared between each PC and
    /// the decision variable.
    RedMap(MapArgs),
    /// Per-identity representational dissimilarity across viewpoints.
    Rdm(MapArgs),
    /// Accuracy under increasing identity-channel noise.
    Robustness(RobustnessArgs),
    /// Re-render a stored map or RDM as SVG.
    Plot(PlotArgs),
    /// Run every stage in one fresh directory.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    source: ConfigSource,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    source: ConfigSource,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigFile,
    /// Trial-set directory holding meta.json and s.imat.
    #[arg(long)]
    trials: PathBuf,
}

#[derive(Args)]
struct CaptureArgs {
    #[command(flatten)]
    config: ConfigFile,
    /// Parameter directory written by train (train/params).
    #[arg(long)]
    params: PathBuf,
    /// Trial-set directory holding meta.json and s.imat.
    #[arg(long)]
    trials: PathBuf,
    /// Identity whose output unit becomes the response variable.
    #[arg(long, default_value_t = TARGET_IDENTITY)]
    target: usize,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    config: ConfigFile,
    /// Captured trial-set directory (s.imat plus l.imat/r.imat as needed).
    #[arg(long)]
    trials: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    config: ConfigFile,
    /// Parameter directory written by train (train/params).
    #[arg(long)]
    params: PathBuf,
    /// Identity under test.
    #[arg(long, default_value_t = TARGET_IDENTITY)]
    target: usize,
    /// Override the configured noise proportions.
    #[arg(long, value_delimiter = ',')]
    proportions: Option<Vec<f64>>,
}

#[derive(Args)]
struct PlotArgs {
    /// Stored feature map JSON to re-render.
    #[arg(long, conflicts_with = "rdm")]
    map: Option<PathBuf>,
    /// Stored RDM analysis JSON to re-render.
    #[arg(long)]
    rdm: Option<PathBuf>,
    /// Colormap override for feature maps.
    #[arg(long, value_parser = parse_colormap)]
    colormap: Option<Colormap>,
}

fn parse_colormap(s: &str) -> std::result::Result<Colormap, String> {
    match s {
        "sequential" => Ok(Colormap::Sequential),
        "diverging" => Ok(Colormap::Diverging),
        other => Err(format!(
            "unknown colormap '{other}' (expected sequential or diverging)"
        )),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(dir) => println!("{}", dir.display()),
        Err(err) => {
            eprintln!("{}", error_json(&err));
            std::process::exit(classify_error(&err).0);
        }
    }
}

/// Fresh manifest for a stage run.
fn stage_manifest(cmd: &str, config: &RunConfig) -> Result<Manifest> {
    Ok(Manifest::new(
        format!("{cmd}-seed{}", config.seed),
        config.seed,
        serde_json::to_value(config)?,
    ))
}

fn new_run_dir(cmd: &str, seed: u64) -> Result<PathBuf> {
    fresh_run_dir(&run_root(), &format!("{cmd}-seed{seed}"))
}

fn run(cmd: Cmd) -> Result<PathBuf> {
    match cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Capture(args) => cmd_capture(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::MiMap(args) => cmd_mi_map(args),
        Cmd::PcMap(args) => cmd_pc_map(args),
        Cmd::RedMap(args) => cmd_red_map(args),
        Cmd::Rdm(args) => cmd_rdm(args),
        Cmd::Robustness(args) => cmd_robustness(args),
        Cmd::Plot(args) => cmd_plot(args),
        Cmd::Pipeline(args) => cmd_pipeline(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<PathBuf> {
    let config = args.source.load()?;
    config.validate()?;
    let task = build_task(&config)?;
    let train_trials = generate_stage_trials(&config, &task, TrialStage::Train)?;
    let map_trials = generate_stage_trials(&config, &task, TrialStage::Map)?;
    let rdm_trials = generate_stage_trials(&config, &task, TrialStage::Rdm)?;

    let run_dir = new_run_dir("gen", config.seed)?;
    let mut manifest = stage_manifest("gen", &config)?;
    for stage in [TrialStage::Train, TrialStage::Map, TrialStage::Rdm] {
        manifest.stage_seed(stage.tag(), seeding::split(config.seed, stage.tag()));
    }
    write_json_artifact(&run_dir, "config.json", &config, None, &mut manifest)?;
    write_json_artifact(&run_dir, "task/pair.json", &task.pair, None, &mut manifest)?;
    write_json_artifact(
        &run_dir,
        "task/identities.json",
        &task.identities,
        None,
        &mut manifest,
    )?;
    save_trialset(&run_dir, TrialStage::Train.dir(), &train_trials, &mut manifest)?;
    save_trialset(&run_dir, TrialStage::Map.dir(), &map_trials, &mut manifest)?;
    save_trialset(&run_dir, TrialStage::Rdm.dir(), &rdm_trials, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_train(args: TrainArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let trials = load_trialset(&args.trials)?;
    let (params, history) = train_classifier(&config, &trials)?;

    let run_dir = new_run_dir("train", config.seed)?;
    let mut manifest = stage_manifest("train", &config)?;
    manifest.stage_seed(TRAIN_SEED_TAG, config.train.seed);
    write_json_artifact(&run_dir, "train/history.json", &history, None, &mut manifest)?;
    save_params(&run_dir, "train/params", &params, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

/// Load params and trials for capture-like stages, inputs first.
fn load_capture_inputs(args: &CaptureArgs) -> Result<(RunConfig, Params, TrialSet)> {
    let config = args.config.load()?;
    let params = load_params(&args.params, &config.net)?;
    let trials = load_trialset(&args.trials)?;
    Ok((config, params, trials))
}

fn cmd_capture(args: CaptureArgs) -> Result<PathBuf> {
    let (config, params, mut trials) = load_capture_inputs(&args)?;
    let target_rate = attach_capture(&config, &params, &mut trials, args.target)?;

    let run_dir = new_run_dir("capture", config.seed)?;
    let mut manifest = stage_manifest("capture", &config)?;
    save_trialset(&run_dir, CAPTURED_TRIALS, &trials, &mut manifest)?;
    let summary = EvalSummary {
        target_identity: args.target,
        target_rate,
        label_accuracy: None,
        held_out_accuracy: None,
    };
    write_json_artifact(&run_dir, "eval/capture.json", &summary, None, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_eval(args: CaptureArgs) -> Result<PathBuf> {
    let (config, params, trials) = load_capture_inputs(&args)?;
    if trials.pixels.len() != trials.n_trials() {
        return Err(Error::InvalidData(
            "trial set carries no rendered stimuli to evaluate".into(),
        ));
    }
    let (target_rate, _) = evaluate(&config.net, &params, &trials.pixels, args.target)?;
    let predicted = classify(&config.net, &params, &trials.pixels)?;
    let hits = predicted
        .iter()
        .zip(&trials.identity_labels)
        .filter(|(p, l)| p == l)
        .count();
    let summary = EvalSummary {
        target_identity: args.target,
        target_rate,
        label_accuracy: Some(hits as f64 / trials.n_trials() as f64),
        held_out_accuracy: None,
    };

    let run_dir = new_run_dir("eval", config.seed)?;
    let mut manifest = stage_manifest("eval", &config)?;
    write_json_artifact(&run_dir, "eval/eval.json", &summary, None, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_mi_map(args: MapArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let trials = load_trialset(&args.trials)?;
    trials.responses()?;
    let map = diagnostic_map(&trials, &stage_map_config(&config, tags::NULL_DIAGNOSTIC))?;

    let run_dir = new_run_dir("mi-map", config.seed)?;
    let mut manifest = stage_manifest("mi-map", &config)?;
    if config.analysis.n_permutations.is_some() {
        manifest.stage_seed(
            tags::NULL_DIAGNOSTIC,
            seeding::split(config.seed, tags::NULL_DIAGNOSTIC),
        );
    }
    save_map(&run_dir, "maps", &map, 0, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_pc_map(args: MapArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let trials = load_trialset(&args.trials)?;
    trials.activations()?;
    let pca = fit_pool_pca(&config, &trials)?;
    let maps = layer_pc_maps(
        &trials,
        &pca,
        config.analysis.n_pcs,
        config.analysis.per_viewpoint_pc_maps,
        &stage_map_config(&config, tags::NULL_LAYER_PC),
    )?;

    let run_dir = new_run_dir("pc-map", config.seed)?;
    let mut manifest = stage_manifest("pc-map", &config)?;
    manifest.stage_seed(tags::POOL_PCA, seeding::split(config.seed, tags::POOL_PCA));
    if config.analysis.n_permutations.is_some() {
        manifest.stage_seed(
            tags::NULL_LAYER_PC,
            seeding::split(config.seed, tags::NULL_LAYER_PC),
        );
    }
    write_json_artifact(&run_dir, "pca/pool.json", &pca, None, &mut manifest)?;
    for (i, map) in maps.iter().enumerate() {
        save_map(&run_dir, "maps", map, i, &mut manifest)?;
    }
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_red_map(args: MapArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let trials = load_trialset(&args.trials)?;
    trials.activations()?;
    trials.responses()?;
    let pca = fit_pool_pca(&config, &trials)?;
    let maps = decision_redundancy_maps(
        &trials,
        &pca,
        config.analysis.n_pcs,
        &stage_map_config(&config, tags::NULL_LAYER_PC),
    )?;

    let run_dir = new_run_dir("red-map", config.seed)?;
    let mut manifest = stage_manifest("red-map", &config)?;
    manifest.stage_seed(tags::POOL_PCA, seeding::split(config.seed, tags::POOL_PCA));
    write_json_artifact(&run_dir, "pca/pool.json", &pca, None, &mut manifest)?;
    for (i, map) in maps.iter().enumerate() {
        save_map(&run_dir, "maps", map, i, &mut manifest)?;
    }
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_rdm(args: MapArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let trials = load_trialset(&args.trials)?;
    trials.activations()?;
    let analyses = rdm_pipeline(
        &trials,
        config.analysis.n_pcs,
        seeding::split(config.seed, tags::RDM),
    )?;

    let run_dir = new_run_dir("rdm", config.seed)?;
    let mut manifest = stage_manifest("rdm", &config)?;
    manifest.stage_seed(tags::RDM, seeding::split(config.seed, tags::RDM));
    for analysis in &analyses {
        save_rdm(&run_dir, "rdm", analysis, &mut manifest)?;
    }
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_robustness(args: RobustnessArgs) -> Result<PathBuf> {
    let config = args.config.load()?;
    let params = load_params(&args.params, &config.net)?;
    let task = build_task(&config)?;
    let identity = task.identities.get(args.target).ok_or_else(|| {
        Error::InvalidLabel {
            label: args.target,
            n_classes: task.identities.len(),
        }
    })?;
    let mut rb_config = stage_robustness_config(&config);
    if let Some(proportions) = args.proportions {
        rb_config.proportions = proportions;
    }
    let report = noise_robustness_test(
        &config.net,
        &params,
        &task.pair,
        identity,
        &task.std,
        NoiseChannel::Texture,
        &rb_config,
    )?;

    let run_dir = new_run_dir("robustness", config.seed)?;
    let mut manifest = stage_manifest("robustness", &config)?;
    manifest.stage_seed(tags::ROBUSTNESS, rb_config.seed);
    write_json_artifact(&run_dir, "robustness/report.json", &report, None, &mut manifest)?;
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

fn cmd_plot(args: PlotArgs) -> Result<PathBuf> {
    match (&args.map, &args.rdm) {
        (Some(path), None) => {
            let map: FeatureMap = store::read_json(path)?;
            let colormap = args.colormap.unwrap_or_else(|| pipeline::map_colormap(map.kind));
            let svg = infolens_core::io::svg_heatmap_string(&map, colormap)?;
            let stem = plot_stem(path);
            let run_dir = new_run_dir("plot", 0)?;
            let mut manifest = Manifest::new("plot", 0, serde_json::Value::Null);
            write_text_artifact(
                &run_dir,
                &format!("plot/{stem}.svg"),
                &svg,
                Some(FileRole::Map),
                &mut manifest,
            )?;
            manifest.write(&run_dir)?;
            Ok(run_dir)
        }
        (None, Some(path)) => {
            let analysis: RdmAnalysis = store::read_json(path)?;
            let run_dir = new_run_dir("plot", 0)?;
            let mut manifest = Manifest::new("plot", 0, serde_json::Value::Null);
            save_rdm(&run_dir, "plot", &analysis, &mut manifest)?;
            manifest.write(&run_dir)?;
            Ok(run_dir)
        }
        _ => Err(Error::InvalidInput(
            "plot needs exactly one of --map or --rdm".into(),
        )),
    }
}

fn plot_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "map".into())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<PathBuf> {
    let config = args.source.load()?;
    config.validate()?;
    let run_dir = new_run_dir("pipeline", config.seed)?;
    pipeline::run_pipeline(&config, &run_dir)?;
    Ok(run_dir)
}
