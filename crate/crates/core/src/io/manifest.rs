use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{CameraIntrinsics, Normalization, RadarConfig, RadarCube};
use crate::video::{Masks, Video};

use super::tensor::TensorFile;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "rustic-scene/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneFiles {
    pub camera: String,
    pub radar: String,
    pub ground_truth: String,
}

impl Default for SceneFiles {
    fn default() -> Self {
        Self { camera: "camera.tnsr".into(), radar: "radar.tnsr".into(), ground_truth: "gt.tnsr".into() }
    }
}

/// Description of a scene directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub radar: RadarConfig,
    pub intrinsics: CameraIntrinsics,
    pub files: SceneFiles,
    /// Weight normalization applied to this scene's radar, when known.
    pub normalization: Option<Normalization>,
    pub seed: u64,
}

impl Manifest {
    pub fn new(frames: usize, radar: RadarConfig, intrinsics: CameraIntrinsics, seed: u64) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            frames,
            height: intrinsics.height,
            width: intrinsics.width,
            radar,
            intrinsics,
            files: SceneFiles::default(),
            normalization: None,
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        m.validate_fields()?;
        Ok(m)
    }

    fn validate_fields(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("unsupported manifest format '{}'", self.format)));
        }
        if self.frames == 0 {
            return Err(Error::Format("manifest lists zero frames".into()));
        }
        if self.intrinsics.height != self.height || self.intrinsics.width != self.width {
            return Err(Error::Format("manifest intrinsics disagree with image dims".into()));
        }
        let fmt = |e: Error| Error::Format(format!("manifest: {e}"));
        self.radar.validate().map_err(fmt)?;
        self.intrinsics.validate().map_err(fmt)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn path_of(&self, dir: &Path, name: &str) -> PathBuf {
        dir.join(name)
    }
}

/// Everything in a scene directory, loaded and cross-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneData {
    pub manifest: Manifest,
    pub camera: Video,
    pub radar: RadarCube,
    pub ground_truth: Masks,
}

impl SceneData {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = &self.manifest.files;
        TensorFile::from_video(&self.camera).write(&dir.join(&files.camera))?;
        TensorFile::from_radar(&self.radar).write(&dir.join(&files.radar))?;
        TensorFile::from_masks(&self.ground_truth).write(&dir.join(&files.ground_truth))?;
        self.manifest.write(dir)
    }
}

pub fn load_scene(dir: &Path) -> Result<SceneData> {
    let manifest = Manifest::read(dir)?;
    let files = &manifest.files;
    let camera = TensorFile::read(&dir.join(&files.camera))?.to_video()?;
    let radar = TensorFile::read(&dir.join(&files.radar))?.to_radar()?;
    let ground_truth = TensorFile::read(&dir.join(&files.ground_truth))?.to_masks()?;

    let dims = (manifest.frames, manifest.height, manifest.width);
    if camera.dims() != dims {
        return Err(Error::Format(format!("camera dims {:?} disagree with manifest {dims:?}", camera.dims())));
    }
    if ground_truth.dims() != dims {
        return Err(Error::Format(format!(
            "ground-truth dims {:?} disagree with manifest {dims:?}",
            ground_truth.dims()
        )));
    }
    let cfg = &manifest.radar;
    let want = (cfg.samples_per_chirp, cfg.antennas, cfg.chirps_per_frame);
    if radar.len() != manifest.frames || radar.frame_dims() != want {
        return Err(Error::Format(format!(
            "radar cube {}x{:?} disagrees with manifest {}x{want:?}",
            radar.len(),
            radar.frame_dims(),
            manifest.frames
        )));
    }
    Ok(SceneData { manifest, camera, radar, ground_truth })
}
