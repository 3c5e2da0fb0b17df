//! Per-identity representational dissimilarity: PCA over one identity's
//! activations, then a viewpoint-blocked RDM over the PC scores.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::TrialSet;
use crate::linalg::{randomized_pca, rdm, PcaModel, Rdm};
use crate::seeding;

/// PC scores retained per identity unless configured otherwise.
pub const DEFAULT_RDM_PCS: usize = 6;

/// One identity's representational geometry across viewpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdmAnalysis {
    pub identity: usize,
    /// Trial-set row behind each RDM row, sorted by viewpoint then replicate.
    pub rows: Vec<usize>,
    pub pca: PcaModel,
    pub rdm: Rdm,
}

impl RdmAnalysis {
    /// Mean within-viewpoint over mean between-viewpoint dissimilarity.
    /// Well under 1 means the representation is viewpoint-coded; near 1
    /// means viewpoint leaves no trace in these PCs.
    pub fn block_ratio(&self) -> f64 {
        self.rdm.within_block_mean / self.rdm.between_block_mean
    }
}

/// For each identity: gather its trials across viewpoints, reduce the
/// captured activations to `n_pcs` scores with randomized PCA, and build the
/// viewpoint-blocked RDM over those scores. Identities come back in order of
/// first appearance; rows within one analysis are sorted by viewpoint then
/// replicate so RDM blocks are contiguous.
pub fn rdm_pipeline(trials: &TrialSet, n_pcs: usize, seed: u64) -> Result<Vec<RdmAnalysis>> {
    let l = trials.activations()?;
    if l.nrows() != trials.n_trials() {
        return Err(Error::InvalidData(format!(
            "{} activation rows vs {} trials",
            l.nrows(),
            trials.n_trials()
        )));
    }

    let mut identities: Vec<usize> = Vec::new();
    for &id in &trials.identity_labels {
        if !identities.contains(&id) {
            identities.push(id);
        }
    }

    let mut analyses = Vec::with_capacity(identities.len());
    for (idx, &id) in identities.iter().enumerate() {
        let mut rows: Vec<usize> = (0..trials.n_trials())
            .filter(|&t| trials.identity_labels[t] == id)
            .collect();
        rows.sort_by(|&a, &b| {
            trials.viewpoint_labels[a]
                .total_cmp(&trials.viewpoint_labels[b])
                .then(trials.replicate_labels[a].cmp(&trials.replicate_labels[b]))
        });

        let sub = l.select(Axis(0), &rows);
        let (n, d) = sub.dim();
        let oversampling = n.min(d).saturating_sub(n_pcs).min(10);
        let pca = randomized_pca(
            &sub,
            n_pcs,
            oversampling,
            2,
            seeding::split_indexed(seed, "rdm.pca", idx as u64),
        )?;
        let labels: Vec<String> = rows
            .iter()
            .map(|&t| format!("{}", trials.viewpoint_labels[t]))
            .collect();
        let rdm = rdm(&pca.scores, &labels)?;
        analyses.push(RdmAnalysis {
            identity: id,
            rows,
            pca,
            rdm,
        });
    }
    Ok(analyses)
}
