use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::imu::{read_imu, ImuWindow};
use super::semantics::{read_semantics, ClassSemanticSet};
use super::skeleton::{
    check_keypoint_indices, read_skeleton_dir, SkeletonEntry, SkeletonSequence, DEFAULT_DIMS,
    DEFAULT_JOINTS, DEFAULT_KEYPOINTS,
};
use super::split::{read_superclass_map, SuperClassMap};
use crate::error::{Error, Result};

fn default_joints() -> usize {
    DEFAULT_JOINTS
}

fn default_dims() -> usize {
    DEFAULT_DIMS
}

fn default_keypoints() -> Vec<usize> {
    DEFAULT_KEYPOINTS.to_vec()
}

/// Dataset description. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub imu_path: PathBuf,
    pub semantics_path: PathBuf,
    pub skeleton_dir: PathBuf,
    pub superclass_path: PathBuf,
    pub n: usize,
    pub d: usize,
    pub folds: usize,
    #[serde(default = "default_joints")]
    pub joints: usize,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default = "default_keypoints")]
    pub keypoint_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        imu_path: impl Into<PathBuf>,
        semantics_path: impl Into<PathBuf>,
        skeleton_dir: impl Into<PathBuf>,
        superclass_path: impl Into<PathBuf>,
        n: usize,
        d: usize,
        folds: usize,
    ) -> Self {
        Self {
            name: name.into(),
            imu_path: imu_path.into(),
            semantics_path: semantics_path.into(),
            skeleton_dir: skeleton_dir.into(),
            superclass_path: superclass_path.into(),
            n,
            d,
            folds,
            joints: DEFAULT_JOINTS,
            dims: DEFAULT_DIMS,
            keypoint_indices: default_keypoints(),
            seed: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable") + "\n"
    }

    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::file(path, format!("invalid manifest: {e}")))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if m.n == 0 || m.d == 0 || m.folds == 0 || m.joints == 0 || m.dims == 0 {
            return Err(Error::file(path, "n, d, folds, joints and dims must be positive"));
        }
        if m.joints == DEFAULT_JOINTS {
            check_keypoint_indices(&m.keypoint_indices).map_err(|e| Error::file(path, e.to_string()))?;
        }
        Ok(m)
    }
}

/// A fully loaded and cross-checked dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// All class names, sorted.
    pub classes: Vec<String>,
    pub windows: Vec<ImuWindow>,
    pub semantics: ClassSemanticSet,
    pub skeletons: Vec<SkeletonEntry>,
    pub superclasses: SuperClassMap,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;

        let superclass_path = manifest.resolve(&manifest.superclass_path);
        let superclasses = read_superclass_map(&superclass_path)?;
        if superclasses.is_empty() {
            return Err(Error::file(&superclass_path, "no classes"));
        }
        let classes: Vec<String> = superclasses.classes().map(String::from).collect();
        let class_set: BTreeSet<&str> = superclasses.classes().collect();

        let semantics_path = manifest.resolve(&manifest.semantics_path);
        let semantics = read_semantics(&semantics_path)?;
        let sem_set: BTreeSet<&str> = semantics.classes().collect();
        if let Some(c) = sem_set.symmetric_difference(&class_set).next() {
            return Err(Error::file(
                &semantics_path,
                format!("class `{c}` disagrees with super-class map {}", superclass_path.display()),
            ));
        }

        let imu_path = manifest.resolve(&manifest.imu_path);
        let windows = read_imu(&imu_path)?;
        let mut ids = BTreeSet::new();
        for w in &windows {
            if w.values.shape() != (manifest.n, manifest.d) {
                return Err(Error::file(
                    &imu_path,
                    format!(
                        "dimension mismatch in window `{}`: manifest declares {}x{}, found {}",
                        w.id,
                        manifest.n,
                        manifest.d,
                        w.values.shape_str()
                    ),
                ));
            }
            if let Some(l) = &w.label {
                if !class_set.contains(l.as_str()) {
                    return Err(Error::file(
                        &imu_path,
                        format!("window `{}` has label `{l}` absent from the super-class map", w.id),
                    ));
                }
            }
            if !ids.insert(w.id.as_str()) {
                return Err(Error::file(&imu_path, format!("duplicate window id `{}`", w.id)));
            }
        }

        let skeleton_dir = manifest.resolve(&manifest.skeleton_dir);
        if !skeleton_dir.is_dir() {
            return Err(Error::file(&skeleton_dir, "skeleton directory not found"));
        }
        let skeletons = read_skeleton_dir(&skeleton_dir, manifest.joints, manifest.dims)?;
        let skel_set: BTreeSet<&str> = skeletons.iter().map(|e| e.sequence.class.as_str()).collect();
        if let Some(c) = skel_set.symmetric_difference(&class_set).next() {
            return Err(Error::file(
                &skeleton_dir,
                format!("skeleton class `{c}` disagrees with super-class map {}", superclass_path.display()),
            ));
        }

        Ok(Self {
            manifest,
            classes,
            windows,
            semantics,
            skeletons,
            superclasses,
        })
    }

    pub fn window(&self, id: &str) -> Option<&ImuWindow> {
        self.windows.iter().find(|w| w.id == id)
    }

    /// Labelled windows whose class is in `classes`.
    pub fn windows_in<'a>(&'a self, classes: &'a BTreeSet<String>) -> impl Iterator<Item = &'a ImuWindow> + 'a {
        self.windows
            .iter()
            .filter(move |w| w.label.as_ref().is_some_and(|l| classes.contains(l)))
    }

    pub fn skeletons_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a SkeletonSequence> + 'a {
        self.skeletons
            .iter()
            .filter(move |e| e.sequence.class == class)
            .map(|e| &e.sequence)
    }
}

/// Loads and validates a manifest together with every file it references.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    Dataset::open(path).map(|d| d.manifest)
}
