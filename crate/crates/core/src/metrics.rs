//! Evaluation metrics and the dataset-level report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{read_raster, write_raster};
use crate::error::{Error, Result};
use crate::phase::wrap_phase;
use crate::raster::Raster;
use crate::scalar::Scalar;
use crate::simulator::Manifest;

fn check_pair<T: Scalar>(pred: &Raster<T>, truth: &Raster<T>) -> Result<()> {
    pred.ensure_same_shape(truth)?;
    if pred.data().is_empty() {
        return Err(Error::EmptyInput("metric of empty raster"));
    }
    Ok(())
}

/// RMSE of the wrapped difference `wrap(pred - truth)`, in radians.
pub fn phase_rmse<T: Scalar>(pred: &Raster<T>, truth: &Raster<T>) -> Result<f64> {
    check_pair(pred, truth)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(p, t)| wrap_phase(p.f64() - t.f64()).powi(2))
        .sum();
    Ok((sum / pred.data().len() as f64).sqrt())
}

/// Plain RMSE, used for coherence maps.
pub fn coherence_rmse<T: Scalar>(pred: &Raster<T>, truth: &Raster<T>) -> Result<f64> {
    check_pair(pred, truth)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(p, t)| (p.f64() - t.f64()).powi(2))
        .sum();
    Ok((sum / pred.data().len() as f64).sqrt())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Dynamic range of wrapped phase.
pub const SSIM_RANGE: f64 = 2.0 * std::f64::consts::PI;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter evaluated only at fully interior centers.
fn blur_valid(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let n = SSIM_WINDOW;
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..n).map(|i| k[i] * data[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| k[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) and dynamic range
/// `2 pi`, averaged over window centers that fit entirely in the image.
pub fn ssim_mean<T: Scalar>(pred: &Raster<T>, truth: &Raster<T>) -> Result<f64> {
    check_pair(pred, truth)?;
    pred.ensure_channels(1)?;
    let (w, h) = (pred.width(), pred.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_kernel();
    let x: Vec<f64> = pred.data().iter().map(|v| v.f64()).collect();
    let y: Vec<f64> = truth.data().iter().map(|v| v.f64()).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let mx = blur_valid(&x, w, h, &k);
    let my = blur_valid(&y, w, h, &k);
    let sxx = blur_valid(&xx, w, h, &k);
    let syy = blur_valid(&yy, w, h, &k);
    let sxy = blur_valid(&xy, w, h, &k);
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Files of one method's prediction for one sample.
pub fn prediction_paths(pred_dir: &Path, method: &str, label: &str, index: usize) -> (PathBuf, PathBuf) {
    let dir = pred_dir.join(method).join(label).join(index.to_string());
    (dir.join("phase.rst"), dir.join("coh.rst"))
}

/// Store one prediction under `<pred_dir>/<method>/<label>/<index>/`.
pub fn write_prediction(
    pred_dir: &Path,
    method: &str,
    label: &str,
    index: usize,
    phase: &Raster,
    coherence: &Raster,
) -> Result<()> {
    let (p, c) = prediction_paths(pred_dir, method, label, index);
    let dir = p.parent().expect("has parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_raster(phase, &p)?;
    write_raster(coherence, &c)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleScores {
    pub phase_rmse: f64,
    pub ssim: f64,
    pub coh_rmse: f64,
}

pub fn score_sample(
    phase: &Raster,
    coherence: &Raster,
    truth_phase: &Raster,
    truth_coh: &Raster,
) -> Result<SampleScores> {
    Ok(SampleScores {
        phase_rmse: phase_rmse(phase, truth_phase)?,
        ssim: ssim_mean(phase, truth_phase)?,
        coh_rmse: coherence_rmse(coherence, truth_coh)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub name: String,
    pub phase_rmse: f64,
    pub ssim: f64,
    pub coh_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub label: String,
    pub methods: Vec<MethodScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrandReport {
    pub methods: Vec<MethodScores>,
}

/// Per-config and grand mean scores for every prediction method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub configs: Vec<ConfigReport>,
    pub grand: GrandReport,
}

impl Report {
    pub fn method<'a>(&'a self, label: &str, name: &str) -> Option<&'a MethodScores> {
        self.configs
            .iter()
            .find(|c| c.label == label)?
            .methods
            .iter()
            .find(|m| m.name == name)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(self).expect("report serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[derive(Default)]
struct Accum {
    n: usize,
    sum: SampleScores,
}

impl Accum {
    fn add(&mut self, s: SampleScores) {
        self.n += 1;
        self.sum.phase_rmse += s.phase_rmse;
        self.sum.ssim += s.ssim;
        self.sum.coh_rmse += s.coh_rmse;
    }

    fn finish(&self, name: &str) -> MethodScores {
        let n = self.n as f64;
        MethodScores {
            name: name.to_string(),
            phase_rmse: self.sum.phase_rmse / n,
            ssim: self.sum.ssim / n,
            coh_rmse: self.sum.coh_rmse / n,
        }
    }
}

/// Method names: the sorted subdirectories of `pred_dir`.
pub fn discover_methods(pred_dir: &Path) -> Result<Vec<String>> {
    let mut methods = Vec::new();
    for e in fs::read_dir(pred_dir).map_err(|e| Error::io(pred_dir, e))? {
        let e = e.map_err(|e| Error::io(pred_dir, e))?;
        if e.path().is_dir() {
            methods.push(e.file_name().to_string_lossy().into_owned());
        }
    }
    methods.sort();
    if methods.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no method directories under {}",
            pred_dir.display()
        )));
    }
    Ok(methods)
}

/// Score every method found under `pred_dir` against the manifest's truth.
pub fn evaluate_dataset(pred_dir: impl AsRef<Path>, manifest: &Manifest) -> Result<Report> {
    let pred_dir = pred_dir.as_ref();
    let methods = discover_methods(pred_dir)?;
    let mut per_config: BTreeMap<String, BTreeMap<String, Accum>> = BTreeMap::new();
    let mut grand: BTreeMap<String, Accum> = BTreeMap::new();
    for entry in &manifest.entries {
        let truth_phase = read_raster(manifest.resolve(&entry.paths.truth_phase))?;
        let truth_coh = read_raster(manifest.resolve(&entry.paths.truth_coh))?;
        for method in &methods {
            let (p, c) = prediction_paths(pred_dir, method, &entry.label, entry.index);
            for path in [&p, &c] {
                if !path.is_file() {
                    return Err(Error::MissingPrediction {
                        label: entry.label.clone(),
                        index: entry.index,
                        path: path.clone(),
                    });
                }
            }
            let scores = score_sample(&read_raster(&p)?, &read_raster(&c)?, &truth_phase, &truth_coh)?;
            per_config
                .entry(entry.label.clone())
                .or_default()
                .entry(method.clone())
                .or_default()
                .add(scores);
            grand.entry(method.clone()).or_default().add(scores);
        }
    }
    Ok(Report {
        configs: per_config
            .into_iter()
            .map(|(label, m)| ConfigReport {
                label,
                methods: m.iter().map(|(name, a)| a.finish(name)).collect(),
            })
            .collect(),
        grand: GrandReport {
            methods: grand.iter().map(|(name, a)| a.finish(name)).collect(),
        },
    })
}
