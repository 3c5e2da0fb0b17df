//! Feature maps: per-feature information estimates laid out on the stimulus
//! grid, with optional max-statistic significance thresholds.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::genmodel::{FeatureGeometry, TrialSet};
use crate::infotheory::{
    co_information, copula_transform, gaussian_mi, permutation_null, CopulaMatrix,
};
use crate::linalg::PcaModel;
use crate::seeding;

/// Which relation a map measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// MI(feature; decision variable): what the stimulus offers the readout.
    Diagnostic,
    /// MI(feature; layer PC score): what an internal direction encodes.
    LayerPc,
    /// Co-information Red(feature; PC; decision): encoded information that
    /// the readout actually uses.
    Redundancy,
}

/// Permutation-null settings for thresholding a map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub n_permutations: usize,
    pub seed: u64,
}

/// Shared settings for map estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapConfig {
    pub bias_correct: bool,
    /// When set, maps carry a familywise 5% max-statistic threshold.
    pub threshold: Option<ThresholdSpec>,
}

impl Default for MapConfig {
    fn default() -> MapConfig {
        MapConfig {
            bias_correct: true,
            threshold: None,
        }
    }
}

/// One per-feature map. `values` holds the raw estimates in bits; negative
/// redundancy (synergy) is kept as-is and only clamped when rendered.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMap {
    pub kind: MapKind,
    pub values: Vec<f64>,
    /// Max-statistic null 95th percentile, when one was requested.
    pub threshold: Option<f64>,
    pub geometry: FeatureGeometry,
    /// Which PC score the response was, for layer-PC and redundancy maps.
    pub pc_index: Option<usize>,
    /// Which viewpoint's trials fed the map, for per-viewpoint maps.
    pub viewpoint_deg: Option<f64>,
    /// Features whose columns were constant; their value is zero by fiat.
    pub degenerate_features: Vec<usize>,
}

impl FeatureMap {
    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    /// Values with sub-threshold entries zeroed. Without a threshold this is
    /// the raw map.
    pub fn thresholded_values(&self) -> Vec<f64> {
        match self.threshold {
            Some(t) => self
                .values
                .iter()
                .map(|&v| if v > t { v } else { 0.0 })
                .collect(),
            None => self.values.clone(),
        }
    }

    pub fn any_supra_threshold(&self) -> bool {
        match self.threshold {
            Some(t) => self.values.iter().any(|&v| v > t),
            None => false,
        }
    }
}

fn check_alignment(trials: &TrialSet) -> Result<usize> {
    let df = trials.dims_per_feature;
    if df == 0 || trials.s.ncols() % df != 0 {
        return Err(Error::InvalidData(format!(
            "{} stimulus columns do not split into groups of {df}",
            trials.s.ncols()
        )));
    }
    let n_features = trials.s.ncols() / df;
    if n_features != trials.geometry.n_features() {
        return Err(Error::InvalidGeometry(format!(
            "{} features but geometry places {}",
            n_features,
            trials.geometry.n_features()
        )));
    }
    Ok(n_features)
}

/// Per-feature MI against a fixed response, from already copula-transformed
/// data. Degenerate features come back as zero plus an index.
fn mi_per_feature(
    cs: &CopulaMatrix,
    cr: &CopulaMatrix,
    dims_per_feature: usize,
    n_features: usize,
    bias_correct: bool,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let per: Vec<Result<Option<f64>>> = exec::map_indexed(n_features, |f| {
        let cols: Vec<usize> =
            (f * dims_per_feature..(f + 1) * dims_per_feature).collect();
        match gaussian_mi(&cs.select_columns(&cols), cr, bias_correct) {
            Ok(est) => Ok(Some(est.bits)),
            Err(Error::DegenerateVariables(_)) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut values = Vec::with_capacity(n_features);
    let mut degenerate = Vec::new();
    for (f, r) in per.into_iter().enumerate() {
        match r? {
            Some(v) => values.push(v),
            None => {
                values.push(0.0);
                degenerate.push(f);
            }
        }
    }
    Ok((values, degenerate))
}

/// MI(stimulus feature; decision variable) per feature, over all trials.
pub fn diagnostic_map(trials: &TrialSet, config: &MapConfig) -> Result<FeatureMap> {
    let n_features = check_alignment(trials)?;
    let r = trials.responses()?;
    if r.nrows() != trials.n_trials() {
        return Err(Error::InvalidData(format!(
            "{} response rows vs {} trials",
            r.nrows(),
            trials.n_trials()
        )));
    }
    let cs = copula_transform(&trials.s)?;
    let cr = copula_transform(r)?;
    let (values, degenerate) = mi_per_feature(
        &cs,
        &cr,
        trials.dims_per_feature,
        n_features,
        config.bias_correct,
    )?;
    let threshold = match &config.threshold {
        Some(spec) => Some(
            permutation_null(
                &trials.s,
                r,
                trials.dims_per_feature,
                config.bias_correct,
                spec.n_permutations,
                seeding::split(spec.seed, "diagnostic.null"),
            )?
            .percentile_95,
        ),
        None => None,
    };
    Ok(FeatureMap {
        kind: MapKind::Diagnostic,
        values,
        threshold,
        geometry: trials.geometry.clone(),
        pc_index: None,
        viewpoint_deg: None,
        degenerate_features: degenerate,
    })
}

fn distinct_viewpoints(trials: &TrialSet) -> Vec<f64> {
    let mut vps: Vec<f64> = Vec::new();
    for &v in &trials.viewpoint_labels {
        if !vps.iter().any(|&u| (u - v).abs() < 1e-9) {
            vps.push(v);
        }
    }
    vps.sort_by(|a, b| a.total_cmp(b));
    vps
}

fn check_scores(trials: &TrialSet, pca: &PcaModel, n_pcs: usize) -> Result<()> {
    if pca.scores.nrows() != trials.n_trials() {
        return Err(Error::InvalidData(format!(
            "{} PC score rows vs {} trials",
            pca.scores.nrows(),
            trials.n_trials()
        )));
    }
    if n_pcs == 0 || n_pcs > pca.scores.ncols() {
        return Err(Error::InvalidRank(format!(
            "requested {n_pcs} PCs but scores hold {}",
            pca.scores.ncols()
        )));
    }
    Ok(())
}

/// One map per retained PC: MI(stimulus feature; PC score). With
/// `per_viewpoint` the trials are split by viewpoint first and each PC gets
/// one map per viewpoint, ordered PC-major then viewpoint ascending.
pub fn layer_pc_maps(
    trials: &TrialSet,
    pca: &PcaModel,
    n_pcs: usize,
    per_viewpoint: bool,
    config: &MapConfig,
) -> Result<Vec<FeatureMap>> {
    let n_features = check_alignment(trials)?;
    check_scores(trials, pca, n_pcs)?;

    struct Slice {
        rows: Option<Vec<usize>>,
        viewpoint_deg: Option<f64>,
    }
    let slices: Vec<Slice> = if per_viewpoint {
        distinct_viewpoints(trials)
            .into_iter()
            .map(|vp| Slice {
                rows: Some(trials.viewpoint_rows(vp)),
                viewpoint_deg: Some(vp),
            })
            .collect()
    } else {
        vec![Slice {
            rows: None,
            viewpoint_deg: None,
        }]
    };

    let mut maps = Vec::with_capacity(n_pcs * slices.len());
    for pc in 0..n_pcs {
        for slice in &slices {
            let (s_block, score_block) = match &slice.rows {
                Some(rows) => (
                    trials.s.select(Axis(0), rows),
                    pca.scores.select(Axis(0), rows),
                ),
                None => (trials.s.clone(), pca.scores.clone()),
            };
            let score_col = score_block
                .column(pc)
                .to_owned()
                .insert_axis(Axis(1))
                .as_standard_layout()
                .to_owned();
            let cs = copula_transform(&s_block)?;
            let cr = copula_transform(&score_col)?;
            let (values, degenerate) = mi_per_feature(
                &cs,
                &cr,
                trials.dims_per_feature,
                n_features,
                config.bias_correct,
            )?;
            let threshold = match &config.threshold {
                Some(spec) => Some(
                    permutation_null(
                        &s_block,
                        &score_col,
                        trials.dims_per_feature,
                        config.bias_correct,
                        spec.n_permutations,
                        seeding::split_indexed(spec.seed, "layerpc.null", maps.len() as u64),
                    )?
                    .percentile_95,
                ),
                None => None,
            };
            maps.push(FeatureMap {
                kind: MapKind::LayerPc,
                values,
                threshold,
                geometry: trials.geometry.clone(),
                pc_index: Some(pc),
                viewpoint_deg: slice.viewpoint_deg,
                degenerate_features: degenerate,
            });
        }
    }
    Ok(maps)
}

/// One map per retained PC: Red(stimulus feature; PC score; decision
/// variable). Positive where the PC and the readout share information about
/// the feature; negative (synergy) values are preserved. No threshold is
/// attached: the null of a three-way difference is not the max-statistic MI
/// null, so these maps are read against the matching layer-PC maps.
pub fn decision_redundancy_maps(
    trials: &TrialSet,
    pca: &PcaModel,
    n_pcs: usize,
    config: &MapConfig,
) -> Result<Vec<FeatureMap>> {
    let n_features = check_alignment(trials)?;
    check_scores(trials, pca, n_pcs)?;
    let r = trials.responses()?;
    if r.nrows() != trials.n_trials() {
        return Err(Error::InvalidData(format!(
            "{} response rows vs {} trials",
            r.nrows(),
            trials.n_trials()
        )));
    }

    let cs = copula_transform(&trials.s)?;
    let cr = copula_transform(r)?;
    let c_scores = copula_transform(&pca.scores.as_standard_layout().to_owned())?;
    let df = trials.dims_per_feature;

    let mut maps = Vec::with_capacity(n_pcs);
    for pc in 0..n_pcs {
        let c_pc = c_scores.select_columns(&[pc]);
        let per: Vec<Result<Option<f64>>> = exec::map_indexed(n_features, |f| {
            let cols: Vec<usize> = (f * df..(f + 1) * df).collect();
            match co_information(&cs.select_columns(&cols), &c_pc, &cr, config.bias_correct) {
                Ok(est) => Ok(Some(est.bits)),
                Err(Error::DegenerateVariables(_)) => Ok(None),
                Err(e) => Err(e),
            }
        });
        let mut values = Vec::with_capacity(n_features);
        let mut degenerate = Vec::new();
        for (f, res) in per.into_iter().enumerate() {
            match res? {
                Some(v) => values.push(v),
                None => {
                    values.push(0.0);
                    degenerate.push(f);
                }
            }
        }
        maps.push(FeatureMap {
            kind: MapKind::Redundancy,
            values,
            threshold: None,
            geometry: trials.geometry.clone(),
            pc_index: Some(pc),
            viewpoint_deg: None,
            degenerate_features: degenerate,
        });
    }
    Ok(maps)
}

/// Pairwise Pearson correlations between maps, and the worst pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub correlations: Array2<f64>,
    pub min_pairwise: f64,
}

/// How stable a set of maps is across viewpoints (or any other grouping):
/// Pearson correlation for every pair, reduced to the minimum.
pub fn viewpoint_consistency(maps: &[FeatureMap]) -> Result<ConsistencyReport> {
    if maps.len() < 2 {
        return Err(Error::InvalidData(format!(
            "consistency needs at least 2 maps, got {}",
            maps.len()
        )));
    }
    let len = maps[0].values.len();
    if maps.iter().any(|m| m.values.len() != len) {
        return Err(Error::InvalidData(
            "maps have mismatched feature counts".into(),
        ));
    }

    let mut centered = Vec::with_capacity(maps.len());
    for (i, m) in maps.iter().enumerate() {
        let mean = m.values.iter().sum::<f64>() / len as f64;
        let c: Vec<f64> = m.values.iter().map(|v| v - mean).collect();
        let ss = c.iter().map(|v| v * v).sum::<f64>();
        if ss <= 0.0 {
            return Err(Error::DegenerateMap(format!(
                "map {i} is constant; correlation undefined"
            )));
        }
        centered.push((c, ss.sqrt()));
    }

    let k = maps.len();
    let mut corr = Array2::<f64>::zeros((k, k));
    let mut min_pairwise = f64::INFINITY;
    for i in 0..k {
        corr[[i, i]] = 1.0;
        for j in i + 1..k {
            let (ci, ni) = &centered[i];
            let (cj, nj) = &centered[j];
            let dot: f64 = ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
            let rho = dot / (ni * nj);
            corr[[i, j]] = rho;
            corr[[j, i]] = rho;
            min_pairwise = min_pairwise.min(rho);
        }
    }
    Ok(ConsistencyReport {
        correlations: corr,
        min_pairwise,
    })
}
