use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_sample, SimConfig};
use crate::container::write_raster;
use crate::error::{Error, Result};

/// File stems written for every sample.
pub const SAMPLE_FILES: [&str; 5] = ["noisy_a1", "noisy_a2", "noisy_phase", "truth_phase", "truth_coh"];

/// Paths of one sample's rasters, relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePaths {
    pub noisy_a1: PathBuf,
    pub noisy_a2: PathBuf,
    pub noisy_phase: PathBuf,
    pub truth_phase: PathBuf,
    pub truth_coh: PathBuf,
}

impl SamplePaths {
    fn for_sample(label: &str, index: usize) -> Self {
        let dir = Path::new(label).join(index.to_string());
        let f = |stem: &str| dir.join(format!("{stem}.rst"));
        Self {
            noisy_a1: f(SAMPLE_FILES[0]),
            noisy_a2: f(SAMPLE_FILES[1]),
            noisy_phase: f(SAMPLE_FILES[2]),
            truth_phase: f(SAMPLE_FILES[3]),
            truth_coh: f(SAMPLE_FILES[4]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub index: usize,
    pub seed: u64,
    pub paths: SamplePaths,
}

/// Dataset index; serialized as a bare JSON array of entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory the relative sample paths resolve against.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_slice(&bytes).map_err(|e| Error::Header(format!("{}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(&self.entries).expect("manifest serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.root.join(relative)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Simulate `count` samples per config under `out_dir` and write
/// `out_dir/manifest.json`. Output bytes depend only on the configs.
pub fn generate_dataset(configs: &[SimConfig], count: usize, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    for cfg in configs {
        cfg.validate()?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs: Vec<(SimConfig, usize)> = configs.iter().flat_map(|c| (0..count).map(move |i| (*c, i))).collect();
    let entries = jobs
        .par_iter()
        .map(|(cfg, index)| {
            let label = cfg.label();
            let paths = SamplePaths::for_sample(&label, *index);
            let dir = out_dir.join(&label).join(index.to_string());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let sample = simulate_sample(cfg, *index)?;
            let ifg = sample.noisy_interferogram();
            write_raster(sample.noisy_s1.amplitude(), out_dir.join(&paths.noisy_a1))?;
            write_raster(sample.noisy_s2.amplitude(), out_dir.join(&paths.noisy_a2))?;
            write_raster(ifg.phase(), out_dir.join(&paths.noisy_phase))?;
            write_raster(&sample.truth_phase, out_dir.join(&paths.truth_phase))?;
            write_raster(&sample.truth_coherence, out_dir.join(&paths.truth_coh))?;
            Ok(ManifestEntry {
                label,
                index: *index,
                seed: cfg.seed,
                paths,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}
