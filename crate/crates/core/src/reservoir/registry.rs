use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{Category, PropertyTag, ReservoirModel};
use super::ReservoirError;

/// Built-in term-based models, as shipped model files.
const DESK_MODELS: [&str; 5] = [
    include_str!("../../assets/models/lorenz.toml"),
    include_str!("../../assets/models/toggle_switch.toml"),
    include_str!("../../assets/models/repressilator.toml"),
    include_str!("../../assets/models/goodwin_circadian.toml"),
    include_str!("../../assets/models/phospho_cascade.toml"),
];

pub const DEFAULT_CONTROL_DIM: usize = 64;
const MLP_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub dim: usize,
    pub category: Category,
    pub properties: Vec<PropertyTag>,
}

/// Reservoirs by id. Iteration order is lexicographic.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    models: BTreeMap<String, Arc<ReservoirModel>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    pub fn controls_only(control_dim: usize) -> Self {
        let mut r = Registry::empty();
        r.insert(ReservoirModel::identity(control_dim));
        r.insert(ReservoirModel::mlp(control_dim, MLP_SEED));
        r
    }

    /// Controls, Lorenz and the four gene-circuit models.
    pub fn desk() -> Self {
        Registry::desk_with_control_dim(DEFAULT_CONTROL_DIM)
    }

    pub fn desk_with_control_dim(control_dim: usize) -> Self {
        let mut r = Registry::controls_only(control_dim);
        for text in DESK_MODELS {
            r.insert(ReservoirModel::from_toml(text).expect("shipped model files are valid"));
        }
        r
    }

    /// Adds every `*.toml` model file found in `dir`.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, ReservoirError> {
        let entries = std::fs::read_dir(dir).map_err(|e| ReservoirError::Io(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> =
            entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "toml")).collect();
        paths.sort();
        for p in &paths {
            self.insert(ReservoirModel::load(p)?);
        }
        Ok(paths.len())
    }

    pub fn insert(&mut self, model: ReservoirModel) {
        self.models.insert(model.id().to_string(), Arc::new(model));
    }

    pub fn get(&self, id: &str) -> Result<Arc<ReservoirModel>, ReservoirError> {
        self.models.get(id).cloned().ok_or_else(|| ReservoirError::UnknownModel(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.models.contains_key(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn models(&self) -> impl Iterator<Item = &Arc<ReservoirModel>> {
        self.models.values()
    }

    pub fn list_models(&self) -> Vec<ModelSummary> {
        self.models
            .values()
            .map(|m| ModelSummary {
                id: m.id().to_string(),
                dim: m.dim(),
                category: m.category(),
                properties: m.properties().iter().copied().collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::terms::ModelFile;

    #[test]
    fn controls_only_lists_identity_and_mlp() {
        let ids: Vec<_> = Registry::controls_only(8).list_models().into_iter().map(|m| m.id).collect();
        assert_eq!(ids, vec!["identity", "mlp"]);
    }

    #[test]
    fn desk_registry_contents() {
        let list = Registry::desk().list_models();
        let ids: Vec<_> = list.iter().map(|m| m.id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        let lorenz = list.iter().find(|m| m.id == "lorenz").unwrap();
        assert_eq!((lorenz.dim, lorenz.category), (3, Category::Baseline));
        for m in &list {
            if m.category != Category::Baseline {
                assert!(!m.properties.is_empty(), "{} has no property tags", m.id);
            }
        }
        assert!(ids.contains(&"identity".to_string()) && ids.contains(&"mlp".to_string()));
    }

    #[test]
    fn model_files_round_trip_bit_exact() {
        for text in DESK_MODELS {
            let a = ReservoirModel::from_toml(text).unwrap();
            let file = a.to_model_file().unwrap();
            let again = ReservoirModel::from_toml(&file.to_toml().unwrap()).unwrap();
            assert_eq!(a.param_bytes(), again.param_bytes());
            assert_eq!(a, again);
            assert_eq!(ModelFile::from_toml(&file.to_toml().unwrap()).unwrap(), file);
        }
    }

    #[test]
    fn load_dir_picks_up_external_models() {
        let dir = tempfile::tempdir().unwrap();
        let text = DESK_MODELS[1].replace("toggle_switch", "external_toggle");
        std::fs::write(dir.path().join("ext.toml"), text).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let mut r = Registry::controls_only(4);
        assert_eq!(r.load_dir(dir.path()).unwrap(), 1);
        assert!(r.contains("external_toggle"));
    }

    #[test]
    fn unknown_id_is_an_error() {
        assert!(matches!(Registry::desk().get("nope"), Err(ReservoirError::UnknownModel(_))));
    }
}
