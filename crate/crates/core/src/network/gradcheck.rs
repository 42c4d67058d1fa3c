//! Central finite-difference check of [`backward`](super::model::backward).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_and_grad, TrainTarget};
use super::model::{backward, forward, ForwardOptions, Mode};
use super::params::{ModelParams, ParamKind};
use super::spec::ModelSpec;
use super::tensor::Tensor4;
use crate::error::{Error, Result};

pub const STEP: f64 = 1e-4;
pub const SAMPLES: usize = 256;
pub const SIDE: usize = 8;
pub const BATCH: usize = 2;
pub const MAX_PARAMS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
    /// Parameters skipped because a ReLU changed sign inside `[-h, h]`.
    pub redrawn: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare analytic and central-difference gradients on randomly chosen
/// parameters of a freshly initialized `f64` model, on a random
/// `2 x 8 x 8` batch.
pub fn grad_check(spec: ModelSpec, seed: u64) -> Result<GradCheckReport> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::<f64>::init(spec, seed);
    if params.trainable_len() > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "gradient check wants at most {MAX_PARAMS} parameters, model has {}",
            params.trainable_len()
        )));
    }
    // Move batchnorm and bias parameters off their trivial initial values.
    let kinds: Vec<ParamKind> = params.layout().iter().map(|p| p.kind).collect();
    for (v, kind) in params.values_mut().iter_mut().zip(&kinds) {
        match kind {
            ParamKind::Scale => v.iter_mut().for_each(|x| *x = rng.random_range(0.5..1.5)),
            ParamKind::Shift | ParamKind::Bias => v.iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3)),
            _ => {}
        }
    }

    let px = BATCH * SIDE * SIDE;
    let mut obs = Vec::with_capacity(px * spec.in_channels);
    for _ in 0..px {
        let t: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        obs.extend([t.cos(), t.sin()]);
        for _ in 2..spec.in_channels {
            obs.push(rng.random_range(0.0..1.0));
        }
    }
    let obs = Tensor4::new(BATCH, SIDE, SIDE, spec.in_channels, obs)?;
    let mut plane = |lo: f64, hi: f64| {
        Tensor4::new(
            BATCH,
            SIDE,
            SIDE,
            1,
            (0..px).map(|_| rng.random_range(lo..hi)).collect(),
        )
    };
    let target = TrainTarget::new(plane(-1.0, 1.0)?, plane(-1.0, 1.0)?, plane(0.0, 1.0)?)?;

    let eval = |p: &ModelParams<f64>| -> Result<(f64, Vec<bool>)> {
        let (out, cache) = forward(p, &obs, Mode::Train, ForwardOptions::default())?;
        Ok((loss_and_grad(&out, &target)?.0.total, cache.relu_mask()))
    };

    let (out, cache) = forward(&params, &obs, Mode::Train, ForwardOptions::default())?;
    let (_, dout) = loss_and_grad(&out, &target)?;
    let grads = backward(&params, &cache, &dout)?;
    let base_mask = cache.relu_mask();

    let mut candidates: Vec<(usize, usize)> = kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| k.trainable())
        .flat_map(|(i, _)| (0..params.values()[i].len()).map(move |j| (i, j)))
        .collect();
    candidates.shuffle(&mut rng);

    let mut entries = Vec::new();
    let mut redrawn = 0;
    for (i, j) in candidates {
        if entries.len() == SAMPLES {
            break;
        }
        let orig = params.values()[i][j];
        params.values_mut()[i][j] = orig + STEP;
        let (plus, mask_plus) = eval(&params)?;
        params.values_mut()[i][j] = orig - STEP;
        let (minus, mask_minus) = eval(&params)?;
        params.values_mut()[i][j] = orig;
        if mask_plus != base_mask || mask_minus != base_mask {
            redrawn += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * STEP);
        let analytic = grads.values()[i][j];
        entries.push(GradCheckEntry {
            name: params.layout()[i].name.clone(),
            index: j,
            analytic,
            numeric,
            rel_err: relative_error(analytic, numeric),
        });
    }
    let max_rel_err = entries.iter().map(|e| e.rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        entries,
        max_rel_err,
        redrawn,
    })
}
