use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use glyphscreen_core::diagnosis::{Calibration, DiscriminativeRanking};
use glyphscreen_core::glyph::GlyphClass;
use glyphscreen_core::harness::{ModelBundle, BUNDLE_FORMAT};
use glyphscreen_core::recognizer::{RecognizerKind, TrainedRecognizer};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// A bundle with its network decoded. Immutable once loaded.
pub struct LoadedModel {
    pub bundle: ModelBundle,
    pub recognizer: TrainedRecognizer,
}

impl LoadedModel {
    pub fn from_bundle(bundle: ModelBundle) -> Result<Self, String> {
        if bundle.format != BUNDLE_FORMAT {
            return Err(format!("not a model bundle (format '{}')", bundle.format));
        }
        let recognizer = TrainedRecognizer::from_document(&bundle.model).map_err(|e| e.to_string())?;
        Ok(LoadedModel { bundle, recognizer })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub kind: RecognizerKind,
    pub calibration: Option<Calibration>,
    pub subset: Vec<GlyphClass>,
    pub subset_calibration: Option<Calibration>,
}

#[derive(Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<LoadedModel>>,
}

impl ModelRegistry {
    /// Loads every `*.json` bundle in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ModelError> {
        let mut reg = ModelRegistry::default();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let invalid = |message: String| ModelError::Invalid { path: path.display().to_string(), message };
            let bundle: ModelBundle = serde_json::from_slice(&std::fs::read(&path)?).map_err(|e| invalid(e.to_string()))?;
            reg.insert(LoadedModel::from_bundle(bundle).map_err(invalid)?);
        }
        Ok(reg)
    }

    pub fn insert(&mut self, model: LoadedModel) {
        self.models.insert(model.bundle.model_id.clone(), Arc::new(model));
    }

    pub fn get(&self, id: &str) -> Option<Arc<LoadedModel>> {
        self.models.get(id).cloned()
    }

    pub fn summaries(&self) -> Vec<ModelSummary> {
        self.models
            .values()
            .map(|m| ModelSummary {
                model_id: m.bundle.model_id.clone(),
                kind: m.recognizer.kind,
                calibration: m.bundle.calibration.clone(),
                subset: m.bundle.subset.clone(),
                subset_calibration: m.bundle.subset_calibration.clone(),
            })
            .collect()
    }

    pub fn ranking(&self, id: &str) -> Option<DiscriminativeRanking> {
        self.models.get(id).map(|m| m.bundle.ranking.clone())
    }
}
