//! Pipeline stages over a validated run configuration.
//!
//! Every stage is callable on its own (the subcommands wire them to files)
//! and `run_pipeline` chains them in-process: generate the planted task,
//! train the classifier, render a map trial set at the fixed viewpoint,
//! capture activations and the target logit, estimate diagnostic, layer-PC,
//! and redundancy maps, build per-identity RDMs across viewpoints, and sweep
//! noise robustness. All stage seeds derive from the single run seed through
//! fixed split tags, so a seed fully determines every artifact byte.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use infolens_core::analysis::{
    decision_redundancy_maps, diagnostic_map, layer_pc_maps, noise_robustness_test, rdm_pipeline,
    FeatureMap, MapConfig, MapKind, RdmAnalysis, RobustnessConfig, RobustnessReport,
    ThresholdSpec,
};
use infolens_core::genmodel::{
    generate_trialset, population_std, FeatureSpace, Identity, ModelPair, NoiseChannel,
    NoiseSpec, PopulationStd, TrialSet,
};
use infolens_core::io::{
    svg_heatmap_string, write_svg_rdm, Colormap, FileRole, Manifest, RunConfig, TRAIN_SEED_TAG,
};
use infolens_core::linalg::{randomized_pca, PcaModel};
use infolens_core::network::{capture_activations, evaluate, train, Params, TrainHistory};
use infolens_core::seeding;
use infolens_core::{Error, Result};

use crate::store::{
    save_params, save_trialset, write_json_artifact, write_text_artifact,
};

/// Identity analyzed by map, eval, and robustness stages.
pub const TARGET_IDENTITY: usize = 0;

/// Seed split tags, one per derived stage seed.
pub mod tags {
    pub const GEN_TRAIN: &str = "stage.gen.train";
    pub const GEN_MAP: &str = "stage.gen.map";
    pub const GEN_RDM: &str = "stage.gen.rdm";
    pub const POOL_PCA: &str = "stage.pca";
    pub const NULL_DIAGNOSTIC: &str = "stage.null.diagnostic";
    pub const NULL_LAYER_PC: &str = "stage.null.layerpc";
    pub const RDM: &str = "stage.rdm";
    pub const ROBUSTNESS: &str = "stage.robustness";
}

/// The generative side of a run: the planted model pair, the identity roster,
/// and the population stds that scale noise injection.
#[derive(Debug, Clone)]
pub struct Task {
    pub pair: ModelPair,
    pub identities: Vec<Identity>,
    pub std: PopulationStd,
}

/// Instantiate the planted task a config describes.
pub fn build_task(config: &RunConfig) -> Result<Task> {
    let gen = &config.generator;
    let pair = gen.layout.model_pair()?;
    let identities = gen.layout.identities(gen.n_identities)?;
    let std = population_std(&pair, gen.residual_sigma);
    Ok(Task {
        pair,
        identities,
        std,
    })
}

/// Which of the three rendered trial sets a stage needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStage {
    /// All identities at every viewpoint, feeding the optimizer.
    Train,
    /// The target identity alone at the map viewpoint, many replicates.
    Map,
    /// All identities at every viewpoint, feeding per-identity RDMs.
    Rdm,
}

impl TrialStage {
    pub fn dir(self) -> &'static str {
        match self {
            TrialStage::Train => "trials/train",
            TrialStage::Map => "trials/map",
            TrialStage::Rdm => "trials/rdm",
        }
    }

    /// Seed split tag for this trial set's noise stream.
    pub fn tag(self) -> &'static str {
        match self {
            TrialStage::Train => tags::GEN_TRAIN,
            TrialStage::Map => tags::GEN_MAP,
            TrialStage::Rdm => tags::GEN_RDM,
        }
    }
}

/// Render one stage's trial set. Noise always perturbs the texture channel,
/// the one that carries identity in the planted task.
pub fn generate_stage_trials(
    config: &RunConfig,
    task: &Task,
    stage: TrialStage,
) -> Result<TrialSet> {
    let gen = &config.generator;
    let seed = seeding::split(config.seed, stage.tag());
    let (ids, viewpoints, reps, proportion): (&[Identity], Vec<f64>, usize, f64) = match stage {
        TrialStage::Train => (
            &task.identities,
            gen.viewpoints.clone(),
            gen.train_reps_per_cell,
            gen.train_noise_proportion,
        ),
        TrialStage::Map => (
            std::slice::from_ref(&task.identities[TARGET_IDENTITY]),
            vec![gen.map_viewpoint_deg],
            gen.map_trials,
            gen.map_noise_proportion,
        ),
        TrialStage::Rdm => (
            &task.identities,
            gen.viewpoints.clone(),
            gen.rdm_reps_per_cell,
            gen.rdm_noise_proportion,
        ),
    };
    let noise = NoiseSpec {
        channel: NoiseChannel::Texture,
        proportion,
        seed,
    };
    generate_trialset(
        ids,
        &viewpoints,
        reps,
        &noise,
        &task.pair,
        &task.std,
        FeatureSpace::Pixels,
    )
}

/// Train the classifier on a rendered trial set.
pub fn train_classifier(config: &RunConfig, trials: &TrialSet) -> Result<(Params, TrainHistory)> {
    require_pixels(trials)?;
    train(
        &config.net,
        &trials.pixels,
        &trials.identity_labels,
        &config.train,
    )
}

/// Run every stimulus through the trained network, attaching the final
/// capture point as L and the target unit's pre-argmax score as the n x 1
/// response R. Returns the fraction of stimuli classified as the target.
pub fn attach_capture(
    config: &RunConfig,
    params: &Params,
    trials: &mut TrialSet,
    target: usize,
) -> Result<f64> {
    require_pixels(trials)?;
    let captures = capture_activations(&config.net, params, &trials.pixels)?;
    let pool = captures.into_iter().last().ok_or_else(|| {
        Error::InvalidSpec("network spec declares no capture points".into())
    })?;
    let (rate, logits) = evaluate(&config.net, params, &trials.pixels, target)?;
    let n = logits.len();
    trials.l = Some(pool.matrix);
    trials.r = Some(Array2::from_shape_vec((n, 1), logits).expect("n x 1 response"));
    Ok(rate)
}

fn require_pixels(trials: &TrialSet) -> Result<()> {
    if trials.pixels.len() != trials.n_trials() {
        return Err(Error::InvalidData(format!(
            "{} rendered stimuli for {} trials; this trial set cannot feed the network",
            trials.pixels.len(),
            trials.n_trials()
        )));
    }
    Ok(())
}

/// Fit the pooled-activation PCA used by layer-PC maps, redundancy maps, and
/// the subcommands that replay them. Seeded from the run seed, so repeated
/// fits agree bit for bit.
pub fn fit_pool_pca(config: &RunConfig, trials: &TrialSet) -> Result<PcaModel> {
    let l = trials.activations()?;
    let k = config.analysis.n_pcs;
    let (n, d) = l.dim();
    let oversampling = n.min(d).saturating_sub(k).min(10);
    randomized_pca(l, k, oversampling, 2, seeding::split(config.seed, tags::POOL_PCA))
}

/// Map settings for one thresholded map family. `tag` picks the null's seed
/// stream; families must not share one.
pub fn stage_map_config(config: &RunConfig, tag: &str) -> MapConfig {
    MapConfig {
        bias_correct: config.analysis.bias_correct,
        threshold: config.analysis.n_permutations.map(|n| ThresholdSpec {
            n_permutations: n,
            seed: seeding::split(config.seed, tag),
        }),
    }
}

/// Robustness settings derived from a run config.
pub fn stage_robustness_config(config: &RunConfig) -> RobustnessConfig {
    RobustnessConfig {
        proportions: config.analysis.robustness_proportions.clone(),
        viewpoints: config.generator.viewpoints.clone(),
        n_per_viewpoint: config.analysis.robustness_per_viewpoint,
        seed: seeding::split(config.seed, tags::ROBUSTNESS),
    }
}

/// Target-rate summary written by the eval stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub target_identity: usize,
    /// Fraction of the map trial set classified as the target.
    pub target_rate: f64,
    /// Accuracy against the trial-set identity labels, when computed.
    pub label_accuracy: Option<f64>,
    /// Final held-out accuracy from training, when a history is available.
    pub held_out_accuracy: Option<f64>,
}

/// File stem for one feature map, unique within a run.
pub fn map_stem(map: &FeatureMap, index_in_kind: usize) -> String {
    match map.kind {
        MapKind::Diagnostic => "diagnostic".into(),
        MapKind::LayerPc => match map.viewpoint_deg {
            Some(v) => format!("pc-{}-vp{}", map.pc_index.unwrap_or(index_in_kind), fmt_deg(v)),
            None => format!("pc-{}", map.pc_index.unwrap_or(index_in_kind)),
        },
        MapKind::Redundancy => format!("red-{}", map.pc_index.unwrap_or(index_in_kind)),
    }
}

fn fmt_deg(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

/// Colormap convention: redundancy maps diverge around zero (synergy is
/// negative), everything else is a one-sided intensity ramp.
pub fn map_colormap(kind: MapKind) -> Colormap {
    match kind {
        MapKind::Redundancy => Colormap::Diverging,
        _ => Colormap::Sequential,
    }
}

/// Write one feature map as JSON plus an SVG rendering.
pub fn save_map(
    run_dir: &Path,
    rel_dir: &str,
    map: &FeatureMap,
    index_in_kind: usize,
    manifest: &mut Manifest,
) -> Result<()> {
    let stem = map_stem(map, index_in_kind);
    write_json_artifact(
        run_dir,
        &format!("{rel_dir}/{stem}.json"),
        map,
        Some(FileRole::Map),
        manifest,
    )?;
    let svg = svg_heatmap_string(map, map_colormap(map.kind))?;
    write_text_artifact(
        run_dir,
        &format!("{rel_dir}/{stem}.svg"),
        &svg,
        Some(FileRole::Map),
        manifest,
    )
}

/// Write one identity's RDM analysis as JSON plus an SVG rendering.
pub fn save_rdm(
    run_dir: &Path,
    rel_dir: &str,
    analysis: &RdmAnalysis,
    manifest: &mut Manifest,
) -> Result<()> {
    let stem = format!("identity-{:02}", analysis.identity);
    write_json_artifact(
        run_dir,
        &format!("{rel_dir}/{stem}.json"),
        analysis,
        Some(FileRole::Rdm),
        manifest,
    )?;
    let rel = format!("{rel_dir}/{stem}.svg");
    let path = run_dir.join(&rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_svg_rdm(&analysis.rdm, analysis.identity, &path)?;
    manifest.record_file(run_dir, &rel, Some(FileRole::Rdm), None)
}

/// Everything a full pipeline run produces, in memory. The same values are
/// persisted under the run directory and inventoried in its manifest.
#[derive(Debug)]
pub struct PipelineResult {
    pub config: RunConfig,
    pub run_dir: PathBuf,
    pub task: Task,
    pub params: Params,
    pub history: TrainHistory,
    /// Fraction of map trials classified as the target identity.
    pub target_rate: f64,
    pub map_trials: TrialSet,
    pub pca: PcaModel,
    pub diagnostic: FeatureMap,
    pub pc_maps: Vec<FeatureMap>,
    pub redundancy_maps: Vec<FeatureMap>,
    pub rdms: Vec<RdmAnalysis>,
    pub robustness: RobustnessReport,
}

impl PipelineResult {
    /// Final held-out accuracy from training.
    pub fn held_out_accuracy(&self) -> f64 {
        self.history.test_accuracy.last().copied().unwrap_or(0.0)
    }
}

/// Run every stage in order, writing all artifacts plus the manifest into
/// `run_dir` (which must already exist and be writable).
pub fn run_pipeline(config: &RunConfig, run_dir: &Path) -> Result<PipelineResult> {
    config.validate()?;
    let mut manifest = Manifest::new(
        format!("pipeline-seed{}", config.seed),
        config.seed,
        serde_json::to_value(config)?,
    );
    for (tag, seed) in stage_seed_table(config) {
        manifest.stage_seed(&tag, seed);
    }

    write_json_artifact(run_dir, "config.json", config, None, &mut manifest)?;

    let task = build_task(config)?;
    write_json_artifact(run_dir, "task/pair.json", &task.pair, None, &mut manifest)?;
    write_json_artifact(
        run_dir,
        "task/identities.json",
        &task.identities,
        None,
        &mut manifest,
    )?;

    let train_trials = generate_stage_trials(config, &task, TrialStage::Train)?;
    save_trialset(run_dir, TrialStage::Train.dir(), &train_trials, &mut manifest)?;

    let (params, history) = train_classifier(config, &train_trials)?;
    write_json_artifact(run_dir, "train/history.json", &history, None, &mut manifest)?;
    save_params(run_dir, "train/params", &params, &mut manifest)?;

    let mut map_trials = generate_stage_trials(config, &task, TrialStage::Map)?;
    let target_rate = attach_capture(config, &params, &mut map_trials, TARGET_IDENTITY)?;
    save_trialset(run_dir, TrialStage::Map.dir(), &map_trials, &mut manifest)?;
    let summary = EvalSummary {
        target_identity: TARGET_IDENTITY,
        target_rate,
        label_accuracy: None,
        held_out_accuracy: history.test_accuracy.last().copied(),
    };
    write_json_artifact(run_dir, "eval/map.json", &summary, None, &mut manifest)?;

    let pca = fit_pool_pca(config, &map_trials)?;
    write_json_artifact(run_dir, "pca/pool.json", &pca, None, &mut manifest)?;

    let diagnostic = diagnostic_map(&map_trials, &stage_map_config(config, tags::NULL_DIAGNOSTIC))?;
    save_map(run_dir, "maps", &diagnostic, 0, &mut manifest)?;

    let pc_maps = layer_pc_maps(
        &map_trials,
        &pca,
        config.analysis.n_pcs,
        config.analysis.per_viewpoint_pc_maps,
        &stage_map_config(config, tags::NULL_LAYER_PC),
    )?;
    for (i, map) in pc_maps.iter().enumerate() {
        save_map(run_dir, "maps", map, i, &mut manifest)?;
    }

    let redundancy_maps = decision_redundancy_maps(
        &map_trials,
        &pca,
        config.analysis.n_pcs,
        &stage_map_config(config, tags::NULL_LAYER_PC),
    )?;
    for (i, map) in redundancy_maps.iter().enumerate() {
        save_map(run_dir, "maps", map, i, &mut manifest)?;
    }

    let mut rdm_trials = generate_stage_trials(config, &task, TrialStage::Rdm)?;
    attach_capture(config, &params, &mut rdm_trials, TARGET_IDENTITY)?;
    save_trialset(run_dir, TrialStage::Rdm.dir(), &rdm_trials, &mut manifest)?;

    let rdms = rdm_pipeline(
        &rdm_trials,
        config.analysis.n_pcs,
        seeding::split(config.seed, tags::RDM),
    )?;
    for analysis in &rdms {
        save_rdm(run_dir, "rdm", analysis, &mut manifest)?;
    }

    let robustness = noise_robustness_test(
        &config.net,
        &params,
        &task.pair,
        &task.identities[TARGET_IDENTITY],
        &task.std,
        NoiseChannel::Texture,
        &stage_robustness_config(config),
    )?;
    write_json_artifact(
        run_dir,
        "robustness/report.json",
        &robustness,
        None,
        &mut manifest,
    )?;

    manifest.write(run_dir)?;

    Ok(PipelineResult {
        config: config.clone(),
        run_dir: run_dir.to_path_buf(),
        task,
        params,
        history,
        target_rate,
        map_trials,
        pca,
        diagnostic,
        pc_maps,
        redundancy_maps,
        rdms,
        robustness,
    })
}

/// Every stage seed a run derives, for the manifest.
fn stage_seed_table(config: &RunConfig) -> Vec<(String, u64)> {
    let mut table = vec![
        (tags::GEN_TRAIN.to_string(), seeding::split(config.seed, tags::GEN_TRAIN)),
        (tags::GEN_MAP.to_string(), seeding::split(config.seed, tags::GEN_MAP)),
        (tags::GEN_RDM.to_string(), seeding::split(config.seed, tags::GEN_RDM)),
        (TRAIN_SEED_TAG.to_string(), config.train.seed),
        (tags::POOL_PCA.to_string(), seeding::split(config.seed, tags::POOL_PCA)),
        (tags::RDM.to_string(), seeding::split(config.seed, tags::RDM)),
        (tags::ROBUSTNESS.to_string(), seeding::split(config.seed, tags::ROBUSTNESS)),
    ];
    if config.analysis.n_permutations.is_some() {
        table.push((
            tags::NULL_DIAGNOSTIC.to_string(),
            seeding::split(config.seed, tags::NULL_DIAGNOSTIC),
        ));
        table.push((
            tags::NULL_LAYER_PC.to_string(),
            seeding::split(config.seed, tags::NULL_LAYER_PC),
        ));
    }
    table
}
