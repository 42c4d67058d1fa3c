//! Patch-sampling training loop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::loss::{loss_and_grad, LossParts, TrainTarget};
use super::model::{backward, forward, update_running_stats, ForwardOptions, Mode};
use super::params::ModelParams;
use super::spec::ModelSpec;
use super::tensor::Tensor4;
use crate::container::read_raster;
use crate::error::{Error, Result};
use crate::preprocess::{observe, ObservationStack};
use crate::raster::{Interferogram, Raster};
use crate::simulator::Manifest;

/// One fully preprocessed training image.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub label: String,
    pub index: usize,
    pub obs: ObservationStack<f32>,
    pub residual_real: Raster<f32>,
    pub residual_imag: Raster<f32>,
    pub coherence: Raster<f32>,
}

impl TrainSample {
    /// Build from the noisy amplitudes, noisy interferogram phase and truth.
    pub fn new(
        label: impl Into<String>,
        index: usize,
        a1: &Raster<f32>,
        a2: &Raster<f32>,
        noisy_phase: Raster<f32>,
        truth_phase: &Raster<f32>,
        truth_coherence: Raster<f32>,
    ) -> Result<Self> {
        let amp = a1.zip_map(a2, |a, b| a * b)?;
        let ifg = Interferogram::new(amp, noisy_phase)?;
        let obs = observe(&ifg, a1, a2)?;
        let t = TrainTarget::from_phases(ifg.phase(), truth_phase, &truth_coherence)?;
        Ok(Self {
            label: label.into(),
            index,
            obs,
            residual_real: t.residual_real.to_raster(0)?,
            residual_imag: t.residual_imag.to_raster(0)?,
            coherence: truth_coherence,
        })
    }

    pub fn width(&self) -> usize {
        self.obs.width()
    }

    pub fn height(&self) -> usize {
        self.obs.height()
    }
}

/// Read and preprocess every manifest entry; any unreadable raster fails
/// the whole load.
pub fn load_training_set(manifest: &Manifest) -> Result<Vec<TrainSample>> {
    if manifest.is_empty() {
        return Err(Error::EmptyInput("training manifest"));
    }
    manifest
        .entries
        .iter()
        .map(|e| {
            let read = |p: &std::path::Path| read_raster(manifest.resolve(p));
            TrainSample::new(
                e.label.clone(),
                e.index,
                &read(&e.paths.noisy_a1)?,
                &read(&e.paths.noisy_a2)?,
                read(&e.paths.noisy_phase)?,
                &read(&e.paths.truth_phase)?,
                read(&e.paths.truth_coh)?,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub spec: ModelSpec,
    pub iters: usize,
    pub batch: usize,
    pub patch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Run every numeric kernel on a single thread.
    pub deterministic: bool,
    pub log_every: usize,
}

impl TrainConfig {
    /// Lite model, batch 16, 64 px patches, learning rate 1e-3.
    pub fn lite(iters: usize, seed: u64) -> Self {
        Self {
            spec: ModelSpec::lite(),
            iters,
            batch: 16,
            patch: 64,
            lr: 1e-3,
            seed,
            deterministic: false,
            log_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.batch == 0 || self.patch == 0 || self.log_every == 0 {
            return Err(Error::InvalidArgument(
                "batch, patch and log interval must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        Ok(())
    }
}

/// One line of the training log (means over the logging window).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iter: usize,
    pub total_loss: f64,
    pub phase_loss: f64,
    pub coh_loss: f64,
    pub wall_ms: u64,
}

/// Random `count x patch x patch` crops with their targets.
pub fn sample_batch<R: Rng + ?Sized>(
    set: &[TrainSample],
    count: usize,
    patch: usize,
    rng: &mut R,
) -> Result<(Tensor4<f32>, TrainTarget<f32>)> {
    let mut obs = Vec::with_capacity(count);
    let mut rr = Vec::with_capacity(count);
    let mut ri = Vec::with_capacity(count);
    let mut z = Vec::with_capacity(count);
    for _ in 0..count {
        let s = &set[rng.random_range(0..set.len())];
        let row = rng.random_range(0..=s.height() - patch);
        let col = rng.random_range(0..=s.width() - patch);
        obs.push(s.obs.raster().crop(row, col, patch, patch)?);
        rr.push(s.residual_real.crop(row, col, patch, patch)?);
        ri.push(s.residual_imag.crop(row, col, patch, patch)?);
        z.push(s.coherence.crop(row, col, patch, patch)?);
    }
    let refs = |v: &[Raster<f32>]| -> Result<Tensor4<f32>> { Tensor4::from_rasters(&v.iter().collect::<Vec<_>>()) };
    Ok((refs(&obs)?, TrainTarget::new(refs(&rr)?, refs(&ri)?, refs(&z)?)?))
}

/// Loss of `params` on a fixed batch, without touching any state.
pub fn batch_loss(
    params: &ModelParams<f32>,
    obs: &Tensor4<f32>,
    target: &TrainTarget<f32>,
    mode: Mode,
) -> Result<LossParts> {
    let (out, _) = forward(params, obs, mode, ForwardOptions::default())?;
    Ok(loss_and_grad(&out, target)?.0)
}

fn check_set(set: &[TrainSample], patch: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if let Some(s) = set.iter().find(|s| s.width() < patch || s.height() < patch) {
        return Err(Error::InvalidArgument(format!(
            "sample {}/{} is {}x{}, smaller than the {patch} px patch",
            s.label,
            s.index,
            s.width(),
            s.height()
        )));
    }
    Ok(())
}

/// Train from a seeded initialization; `log` receives one entry every
/// `log_every` iterations. `iters == 0` returns the initialization.
pub fn train(set: &[TrainSample], cfg: &TrainConfig, log: impl FnMut(&TrainLog) + Send) -> Result<ModelParams<f32>> {
    cfg.validate()?;
    check_set(set, cfg.patch)?;
    if cfg.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| train_loop(set, cfg, log))
    } else {
        train_loop(set, cfg, log)
    }
}

fn train_loop(set: &[TrainSample], cfg: &TrainConfig, mut log: impl FnMut(&TrainLog)) -> Result<ModelParams<f32>> {
    let mut params = ModelParams::<f32>::init(cfg.spec, cfg.seed);
    let mut adam = AdamState::new(&params, cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let start = Instant::now();
    let mut window = (0.0, 0.0, 0.0);
    for iter in 1..=cfg.iters {
        let (obs, target) = sample_batch(set, cfg.batch, cfg.patch, &mut rng)?;
        let (out, cache) = forward(&params, &obs, Mode::Train, ForwardOptions::default())?;
        let (parts, dout) = loss_and_grad(&out, &target)?;
        let grads = backward(&params, &cache, &dout)?;
        update_running_stats(&mut params, &cache)?;
        drop(cache);
        adam.update(&mut params, &grads)?;
        window.0 += parts.total;
        window.1 += parts.phase;
        window.2 += parts.coherence;
        if iter % cfg.log_every == 0 {
            let n = cfg.log_every as f64;
            log(&TrainLog {
                iter,
                total_loss: window.0 / n,
                phase_loss: window.1 / n,
                coh_loss: window.2 / n,
                wall_ms: start.elapsed().as_millis() as u64,
            });
            window = (0.0, 0.0, 0.0);
        }
    }
    Ok(params)
}
