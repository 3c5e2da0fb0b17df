//! Run-directory layout and artifact persistence.
//!
//! Every invocation writes into a fresh directory under the run root and
//! never touches its inputs. The root comes from the INFOLENS_RUN_ROOT
//! environment variable, defaulting to ./runs. Matrices go to .imat files,
//! structured values to pretty-printed JSON; each write is recorded in the
//! run's manifest with its role and shape so the inventory can be verified
//! byte for byte later.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use infolens_core::genmodel::{FeatureGeometry, FeatureSpace, TrialSet};
use infolens_core::io::{atomic_write, read_matrix, write_matrix, FileRole, Manifest};
use infolens_core::network::{NetSpec, Params};
use infolens_core::{Error, Result};

pub const RUN_ROOT_ENV: &str = "INFOLENS_RUN_ROOT";

/// Run root: $INFOLENS_RUN_ROOT, or ./runs when unset.
pub fn run_root() -> PathBuf {
    match std::env::var_os(RUN_ROOT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("runs"),
    }
}

/// Create `root/name`, or `root/name-2`, `-3`, ... if taken. Returns the
/// created directory.
pub fn fresh_run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    for attempt in 0..10_000u32 {
        let candidate = if attempt == 0 {
            root.join(name)
        } else {
            root.join(format!("{name}-{}", attempt + 1))
        };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::InvalidInput(format!(
        "could not find a free run directory for '{name}' under {}",
        root.display()
    )))
}

/// Serialize to pretty JSON, write atomically, and record in the manifest.
pub fn write_json_artifact<T: Serialize>(
    run_dir: &Path,
    rel: &str,
    value: &T,
    role: Option<FileRole>,
    manifest: &mut Manifest,
) -> Result<()> {
    let path = run_dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(&path, text.as_bytes())?;
    manifest.record_file(run_dir, rel, role, None)
}

/// Write a matrix artifact and record it with its shape.
pub fn write_matrix_artifact(
    run_dir: &Path,
    rel: &str,
    matrix: &Array2<f64>,
    role: Option<FileRole>,
    manifest: &mut Manifest,
) -> Result<()> {
    let path = run_dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_matrix(&path, matrix)?;
    manifest.record_file(run_dir, rel, role, Some(matrix.dim()))
}

/// Write pre-rendered text (SVG) and record it.
pub fn write_text_artifact(
    run_dir: &Path,
    rel: &str,
    text: &str,
    role: Option<FileRole>,
    manifest: &mut Manifest,
) -> Result<()> {
    let path = run_dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    atomic_write(&path, text.as_bytes())?;
    manifest.record_file(run_dir, rel, role, None)
}

/// Read a JSON artifact, reporting a missing file as a missing input.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            Error::from(e)
        }
    })?;
    serde_json::from_slice(&bytes).map_err(|e| Error::CorruptFile {
        path: path.display().to_string(),
        detail: format!("json: {e}"),
    })
}

/// Everything about a trial set except its matrices. The stimulus matrix
/// lives next to this file as s.imat; captured activations and responses,
/// when present, as l.imat and r.imat.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSetMeta {
    pub dims_per_feature: usize,
    pub feature_space: FeatureSpace,
    pub geometry: FeatureGeometry,
    pub identity_labels: Vec<usize>,
    pub viewpoint_labels: Vec<f64>,
    pub replicate_labels: Vec<usize>,
}

pub const TRIALS_META: &str = "meta.json";
pub const TRIALS_S: &str = "s.imat";
pub const TRIALS_L: &str = "l.imat";
pub const TRIALS_R: &str = "r.imat";

/// Persist a trial set under `run_dir/rel_dir`. Pixels are not stored: for
/// pixel-space trials row t of S is the rendered grid itself, row-major, so
/// the loader reconstructs them exactly.
pub fn save_trialset(
    run_dir: &Path,
    rel_dir: &str,
    trials: &TrialSet,
    manifest: &mut Manifest,
) -> Result<()> {
    let meta = TrialSetMeta {
        dims_per_feature: trials.dims_per_feature,
        feature_space: trials.feature_space,
        geometry: trials.geometry.clone(),
        identity_labels: trials.identity_labels.clone(),
        viewpoint_labels: trials.viewpoint_labels.clone(),
        replicate_labels: trials.replicate_labels.clone(),
    };
    write_json_artifact(run_dir, &format!("{rel_dir}/{TRIALS_META}"), &meta, None, manifest)?;
    write_matrix_artifact(
        run_dir,
        &format!("{rel_dir}/{TRIALS_S}"),
        &trials.s,
        Some(FileRole::S),
        manifest,
    )?;
    if let Some(l) = &trials.l {
        write_matrix_artifact(
            run_dir,
            &format!("{rel_dir}/{TRIALS_L}"),
            l,
            Some(FileRole::L),
            manifest,
        )?;
    }
    if let Some(r) = &trials.r {
        write_matrix_artifact(
            run_dir,
            &format!("{rel_dir}/{TRIALS_R}"),
            r,
            Some(FileRole::R),
            manifest,
        )?;
    }
    Ok(())
}

/// Load a trial set saved by [`save_trialset`]. `l.imat`/`r.imat` are
/// optional; pixel grids are rebuilt from S rows when the feature space is
/// pixels, and left empty otherwise.
pub fn load_trialset(dir: &Path) -> Result<TrialSet> {
    let meta: TrialSetMeta = read_json(&dir.join(TRIALS_META))?;
    let s = read_matrix(&dir.join(TRIALS_S))?;
    let n = s.nrows();
    for (name, len) in [
        ("identity", meta.identity_labels.len()),
        ("viewpoint", meta.viewpoint_labels.len()),
        ("replicate", meta.replicate_labels.len()),
    ] {
        if len != n {
            return Err(Error::CorruptFile {
                path: dir.join(TRIALS_META).display().to_string(),
                detail: format!("{len} {name} labels for {n} stimulus rows"),
            });
        }
    }
    let l = read_optional_matrix(&dir.join(TRIALS_L))?;
    let r = read_optional_matrix(&dir.join(TRIALS_R))?;
    let pixels = match meta.feature_space {
        FeatureSpace::Pixels => {
            let (h, w) = (meta.geometry.grid_h, meta.geometry.grid_w);
            if s.ncols() != h * w || meta.dims_per_feature != 1 {
                return Err(Error::CorruptFile {
                    path: dir.join(TRIALS_S).display().to_string(),
                    detail: format!(
                        "pixel-space S has {} columns, geometry says {h}x{w}",
                        s.ncols()
                    ),
                });
            }
            (0..n)
                .map(|t| {
                    Array2::from_shape_vec((h, w), s.row(t).to_vec())
                        .expect("row length checked above")
                })
                .collect()
        }
        FeatureSpace::Coefficients => Vec::new(),
    };
    Ok(TrialSet {
        s,
        dims_per_feature: meta.dims_per_feature,
        feature_space: meta.feature_space,
        geometry: meta.geometry,
        pixels,
        identity_labels: meta.identity_labels,
        viewpoint_labels: meta.viewpoint_labels,
        replicate_labels: meta.replicate_labels,
        l,
        r,
    })
}

fn read_optional_matrix(path: &Path) -> Result<Option<Array2<f64>>> {
    if path.exists() {
        read_matrix(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Sidecar for persisted network parameters: the init seed plus tensor
/// names in serialization order, each stored as `{index:02}-{name}.imat`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsMeta {
    pub seed: u64,
    pub tensors: Vec<String>,
}

pub const PARAMS_META: &str = "meta.json";

fn tensor_file(index: usize, name: &str) -> String {
    format!("{index:02}-{name}.imat")
}

/// Persist trained parameters under `run_dir/rel_dir`, one matrix per
/// tensor.
pub fn save_params(
    run_dir: &Path,
    rel_dir: &str,
    params: &Params,
    manifest: &mut Manifest,
) -> Result<()> {
    let mats = params.to_matrices();
    let meta = ParamsMeta {
        seed: params.seed,
        tensors: mats.iter().map(|(name, _)| name.clone()).collect(),
    };
    write_json_artifact(run_dir, &format!("{rel_dir}/{PARAMS_META}"), &meta, None, manifest)?;
    for (i, (name, mat)) in mats.iter().enumerate() {
        write_matrix_artifact(
            run_dir,
            &format!("{rel_dir}/{}", tensor_file(i, name)),
            mat,
            None,
            manifest,
        )?;
    }
    Ok(())
}

/// Load parameters saved by [`save_params`] and validate them against the
/// network spec.
pub fn load_params(dir: &Path, spec: &NetSpec) -> Result<Params> {
    let meta: ParamsMeta = read_json(&dir.join(PARAMS_META))?;
    let mut mats = Vec::with_capacity(meta.tensors.len());
    for (i, name) in meta.tensors.iter().enumerate() {
        let mat = read_matrix(&dir.join(tensor_file(i, name)))?;
        mats.push((name.clone(), mat));
    }
    Params::from_matrices(spec, meta.seed, &mats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use infolens_core::genmodel::{
        generate_trialset, population_std, NoiseChannel, NoiseSpec, PlantedLayout,
    };
    use infolens_core::io::MANIFEST_NAME;

    fn sample_trials() -> TrialSet {
        let layout = PlantedLayout::desk();
        let pair = layout.model_pair().unwrap();
        let ids = layout.identities(3).unwrap();
        let std = population_std(&pair, 1.0);
        let noise = NoiseSpec {
            channel: NoiseChannel::Texture,
            proportion: 0.5,
            seed: 9,
        };
        generate_trialset(&ids, &[0.0], 2, &noise, &pair, &std, FeatureSpace::Pixels).unwrap()
    }

    #[test]
    fn fresh_run_dir_suffixes_on_collision() {
        let tmp = tempfile::tempdir().unwrap();
        let a = fresh_run_dir(tmp.path(), "gen-seed7").unwrap();
        let b = fresh_run_dir(tmp.path(), "gen-seed7").unwrap();
        let c = fresh_run_dir(tmp.path(), "gen-seed7").unwrap();
        assert_eq!(a.file_name().unwrap(), "gen-seed7");
        assert_eq!(b.file_name().unwrap(), "gen-seed7-2");
        assert_eq!(c.file_name().unwrap(), "gen-seed7-3");
        assert!(a.is_dir() && b.is_dir() && c.is_dir());
    }

    #[test]
    fn trialset_round_trip_is_bit_exact_and_rebuilds_pixels() {
        let tmp = tempfile::tempdir().unwrap();
        let mut trials = sample_trials();
        trials.l = Some(Array2::from_shape_fn((trials.n_trials(), 4), |(i, j)| {
            (i * 7 + j) as f64 / 3.0
        }));
        trials.r = Some(Array2::from_shape_fn((trials.n_trials(), 1), |(i, _)| {
            i as f64 - 2.5
        }));
        let mut manifest = Manifest::new("test", 0, serde_json::Value::Null);
        save_trialset(tmp.path(), "trials/map", &trials, &mut manifest).unwrap();
        let loaded = load_trialset(&tmp.path().join("trials/map")).unwrap();
        assert_eq!(loaded.s, trials.s);
        assert_eq!(loaded.l, trials.l);
        assert_eq!(loaded.r, trials.r);
        assert_eq!(loaded.identity_labels, trials.identity_labels);
        assert_eq!(loaded.viewpoint_labels, trials.viewpoint_labels);
        assert_eq!(loaded.pixels.len(), trials.pixels.len());
        for (a, b) in loaded.pixels.iter().zip(&trials.pixels) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn load_without_capture_leaves_l_and_r_empty() {
        let tmp = tempfile::tempdir().unwrap();
        let trials = sample_trials();
        let mut manifest = Manifest::new("test", 0, serde_json::Value::Null);
        save_trialset(tmp.path(), "trials/map", &trials, &mut manifest).unwrap();
        let loaded = load_trialset(&tmp.path().join("trials/map")).unwrap();
        assert!(loaded.l.is_none());
        assert!(loaded.r.is_none());
        assert!(matches!(
            loaded.activations(),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn missing_trialset_reports_missing_input() {
        let tmp = tempfile::tempdir().unwrap();
        match load_trialset(&tmp.path().join("nope")) {
            Err(Error::MissingInput(_)) => {}
            other => panic!("expected MissingInput, got {other:?}"),
        }
    }

    #[test]
    fn params_round_trip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = NetSpec::desk(4);
        let params = Params::init(&spec, 21).unwrap();
        let mut manifest = Manifest::new("test", 0, serde_json::Value::Null);
        save_params(tmp.path(), "train/params", &params, &mut manifest).unwrap();
        let loaded = load_params(&tmp.path().join("train/params"), &spec).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn manifest_verifies_recorded_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let trials = sample_trials();
        let mut manifest = Manifest::new("test", 0, serde_json::Value::Null);
        save_trialset(tmp.path(), "trials/map", &trials, &mut manifest).unwrap();
        manifest.write(tmp.path()).unwrap();
        let read = Manifest::read(&tmp.path().join(MANIFEST_NAME)).unwrap();
        read.verify(tmp.path()).unwrap();
        assert_eq!(read, manifest);
    }
}
