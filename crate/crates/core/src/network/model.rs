//! Forward and backward passes of the dense residual network.

use super::layers::{
    batch_stats, conv_backward, conv_forward, gather_channels, norm_relu_backward, norm_relu_forward, running_stats,
    scatter_add_channels, Grid, NormStats, BN_MOMENTUM,
};
use super::params::{bn_name, dense_prefix, head_prefix, Grads, ModelParams};
use super::spec::{Head, ModelSpec};
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; the cache supports [`backward`].
    Train,
    /// Running statistics; intermediates are dropped as soon as possible.
    Infer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Zero the output of this dense block before later layers read it.
    pub ablate_dense: Option<usize>,
}

/// The three single-channel network outputs (or their gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs<T> {
    pub real: Tensor4<T>,
    pub imag: Tensor4<T>,
    pub coh: Tensor4<T>,
}

impl<T: Scalar> Outputs<T> {
    pub fn zeros_like(&self) -> Self {
        let [b, h, w, c] = self.real.dims();
        Self {
            real: Tensor4::zeros(b, h, w, c),
            imag: Tensor4::zeros(b, h, w, c),
            coh: Tensor4::zeros(b, h, w, c),
        }
    }

    pub fn head(&self, head: Head) -> &Tensor4<T> {
        match head {
            Head::Real => &self.real,
            Head::Imag => &self.imag,
            Head::Coherence => &self.coh,
        }
    }
}

#[derive(Debug, Clone)]
struct PreAct<T> {
    prefix: String,
    /// `None` for the identity pre-activation of linear models.
    stats: Option<NormStats<T>>,
    act: Vec<T>,
}

#[derive(Debug, Clone)]
struct HeadCache<T> {
    pre: Vec<PreAct<T>>,
    hidden: Vec<Vec<T>>,
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    mode: Mode,
    generation: u64,
    spec: ModelSpec,
    grid: Grid,
    input: Vec<T>,
    features: Vec<T>,
    dense: Vec<PreAct<T>>,
    heads: Vec<HeadCache<T>>,
    ablated: Option<usize>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// The concatenated feature map, `pixels x feature_channels`.
    pub fn features(&self) -> &[T] {
        &self.features
    }

    /// What dense block `i` reads: the first `dense_in(i)` feature channels.
    pub fn dense_input(&self, i: usize) -> Vec<T> {
        let c = self.spec.dense_in(i);
        let f = self.spec.feature_channels();
        self.features.chunks(f).flat_map(|px| px[..c].iter().copied()).collect()
    }

    /// Normalized (pre-scale) activations of dense block `i`, channel-last.
    pub fn dense_normalized(&self, i: usize) -> Option<Vec<T>> {
        let stats = self.dense.get(i)?.stats.as_ref()?;
        let c = self.spec.dense_in(i);
        let f = self.spec.feature_channels();
        Some(
            self.features
                .chunks(f)
                .flat_map(|px| (0..c).map(move |ch| (px[ch] - stats.mean[ch]) * stats.inv_std[ch]))
                .collect(),
        )
    }
}

fn pre_activation<T: Scalar>(
    params: &ModelParams<T>,
    prefix: &str,
    input: &[T],
    c: usize,
    stride: usize,
    mode: Mode,
) -> Result<PreAct<T>> {
    let pixels = input.len() / stride;
    let mut act = vec![T::zero(); pixels * c];
    let stats = if params.spec().norm_act {
        let stats = match mode {
            Mode::Train => batch_stats(input, c, stride),
            Mode::Infer => running_stats(
                params.get(&bn_name(prefix, "running_mean"))?,
                params.get(&bn_name(prefix, "running_var"))?,
            ),
        };
        norm_relu_forward(
            input,
            c,
            stride,
            &stats,
            params.get(&bn_name(prefix, "scale"))?,
            params.get(&bn_name(prefix, "shift"))?,
            &mut act,
        );
        Some(stats)
    } else {
        gather_channels(input, c, stride, &mut act);
        None
    };
    Ok(PreAct {
        prefix: prefix.to_string(),
        stats,
        act,
    })
}

fn pre_activation_backward<T: Scalar>(
    params: &ModelParams<T>,
    pre: &PreAct<T>,
    input: &[T],
    c: usize,
    stride: usize,
    dact: &[T],
    grads: &mut Grads<T>,
    dinput: &mut [T],
) -> Result<()> {
    match &pre.stats {
        Some(stats) => {
            let mut dscale = vec![T::zero(); c];
            let mut dshift = vec![T::zero(); c];
            norm_relu_backward(
                input,
                c,
                stride,
                stats,
                params.get(&bn_name(&pre.prefix, "scale"))?,
                &pre.act,
                dact,
                &mut dscale,
                &mut dshift,
                dinput,
            );
            add_into(grads.slot(&bn_name(&pre.prefix, "scale")), &dscale);
            add_into(grads.slot(&bn_name(&pre.prefix, "shift")), &dshift);
        }
        None => scatter_add_channels(dact, c, stride, dinput),
    }
    Ok(())
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += *b;
    }
}

/// Run the network on a `batch x h x w x 4` observation tensor.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    obs: &Tensor4<T>,
    mode: Mode,
    opts: ForwardOptions,
) -> Result<(Outputs<T>, ForwardCache<T>)> {
    let spec = *params.spec();
    if obs.channels != spec.in_channels {
        return Err(Error::InvalidArgument(format!(
            "observation has {} channels, model expects {}",
            obs.channels, spec.in_channels
        )));
    }
    if obs.pixels() == 0 {
        return Err(Error::EmptyInput("observation tensor"));
    }
    let grid = Grid {
        batch: obs.batch,
        height: obs.height,
        width: obs.width,
    };
    let pixels = grid.pixels();
    let f = spec.feature_channels();
    let keep = mode == Mode::Train;

    let mut features = vec![T::zero(); pixels * f];
    conv_forward(
        grid,
        &obs.data,
        spec.in_channels,
        params.get("stem.conv.w")?,
        None,
        spec.stem_channels,
        &mut features,
        f,
        0,
    );

    let mut dense = Vec::with_capacity(spec.dense_layers);
    for i in 0..spec.dense_layers {
        let prefix = dense_prefix(i);
        let c = spec.dense_in(i);
        let mut pre = pre_activation(params, &prefix, &features, c, f, mode)?;
        conv_forward(
            grid,
            &pre.act,
            c,
            params.get(&format!("{prefix}.conv.w"))?,
            None,
            spec.growth,
            &mut features,
            f,
            c,
        );
        if opts.ablate_dense == Some(i) {
            for px in features.chunks_mut(f) {
                px[c..c + spec.growth].fill(T::zero());
            }
        }
        if !keep {
            pre.act = Vec::new();
        }
        dense.push(pre);
    }

    let mut heads = Vec::with_capacity(3);
    let mut outs = Vec::with_capacity(3);
    for head in Head::ALL {
        let mut cache = HeadCache {
            pre: Vec::new(),
            hidden: Vec::new(),
        };
        for l in 0..=spec.head_layers {
            let prefix = head_prefix(head, l);
            let cin = spec.head_in(l);
            let last = l == spec.head_layers;
            let cout = if last { 1 } else { spec.head_width };
            let mut pre = match cache.hidden.last() {
                None => pre_activation(params, &prefix, &features, cin, f, mode)?,
                Some(h) => pre_activation(params, &prefix, h, cin, cin, mode)?,
            };
            let bias = if last {
                Some(params.get(&format!("{prefix}.conv.b"))?)
            } else {
                None
            };
            let mut out = vec![T::zero(); pixels * cout];
            conv_forward(
                grid,
                &pre.act,
                cin,
                params.get(&format!("{prefix}.conv.w"))?,
                bias,
                cout,
                &mut out,
                cout,
                0,
            );
            if !keep {
                pre.act = Vec::new();
                if let Some(h) = cache.hidden.last_mut() {
                    *h = Vec::new();
                }
            }
            cache.pre.push(pre);
            if last {
                outs.push(Tensor4::new(grid.batch, grid.height, grid.width, 1, out)?);
            } else {
                cache.hidden.push(out);
            }
        }
        heads.push(cache);
    }
    let coh = outs.pop().expect("three heads");
    let imag = outs.pop().expect("three heads");
    let real = outs.pop().expect("three heads");
    let cache = ForwardCache {
        mode,
        generation: params.generation(),
        spec,
        grid,
        input: if keep { obs.data.clone() } else { Vec::new() },
        features,
        dense,
        heads,
        ablated: opts.ablate_dense,
    };
    Ok((Outputs { real, imag, coh }, cache))
}

/// Parameter gradients given gradients of the loss w.r.t. the outputs.
pub fn backward<T: Scalar>(params: &ModelParams<T>, cache: &ForwardCache<T>, dout: &Outputs<T>) -> Result<Grads<T>> {
    if cache.mode != Mode::Train {
        return Err(Error::StaleCache("cache was produced in infer mode".into()));
    }
    if cache.generation != params.generation() || cache.spec != *params.spec() {
        return Err(Error::StaleCache("parameters changed since the forward pass".into()));
    }
    let spec = cache.spec;
    let grid = cache.grid;
    for t in [&dout.real, &dout.imag, &dout.coh] {
        if t.dims() != [grid.batch, grid.height, grid.width, 1] {
            return Err(Error::mismatch(
                format!("{:?}", [grid.batch, grid.height, grid.width, 1]),
                format!("{:?}", t.dims()),
            ));
        }
    }
    let pixels = grid.pixels();
    let f = spec.feature_channels();
    let mut grads = Grads::zeros_like(params);
    let mut dfeat = vec![T::zero(); pixels * f];

    for (hi, head) in Head::ALL.into_iter().enumerate() {
        let hc = &cache.heads[hi];
        let mut dcur = dout.head(head).data.clone();
        for l in (0..=spec.head_layers).rev() {
            let prefix = head_prefix(head, l);
            let cin = spec.head_in(l);
            let last = l == spec.head_layers;
            let cout = if last { 1 } else { spec.head_width };
            let pre = &hc.pre[l];
            let mut dk = vec![T::zero(); 9 * cin * cout];
            let mut db = vec![T::zero(); cout];
            let mut dact = vec![T::zero(); pixels * cin];
            conv_backward(
                grid,
                &pre.act,
                cin,
                params.get(&format!("{prefix}.conv.w"))?,
                cout,
                &dcur,
                cout,
                0,
                &mut dk,
                if last { Some(&mut db) } else { None },
                Some(&mut dact),
            );
            add_into(grads.slot(&format!("{prefix}.conv.w")), &dk);
            if last {
                add_into(grads.slot(&format!("{prefix}.conv.b")), &db);
            }
            if l == 0 {
                pre_activation_backward(params, pre, &cache.features, cin, f, &dact, &mut grads, &mut dfeat)?;
            } else {
                let mut dprev = vec![T::zero(); pixels * cin];
                pre_activation_backward(params, pre, &hc.hidden[l - 1], cin, cin, &dact, &mut grads, &mut dprev)?;
                dcur = dprev;
            }
        }
    }

    for i in (0..spec.dense_layers).rev() {
        let prefix = dense_prefix(i);
        let c = spec.dense_in(i);
        let pre = &cache.dense[i];
        let mut dk = vec![T::zero(); 9 * c * spec.growth];
        let mut dact = vec![T::zero(); pixels * c];
        // An ablated block's output is constant zero and passes no gradient.
        if cache.ablated != Some(i) {
            conv_backward(
                grid,
                &pre.act,
                c,
                params.get(&format!("{prefix}.conv.w"))?,
                spec.growth,
                &dfeat,
                f,
                c,
                &mut dk,
                None,
                Some(&mut dact),
            );
        }
        add_into(grads.slot(&format!("{prefix}.conv.w")), &dk);
        pre_activation_backward(params, pre, &cache.features, c, f, &dact, &mut grads, &mut dfeat)?;
    }

    let mut dk = vec![T::zero(); 9 * spec.in_channels * spec.stem_channels];
    conv_backward(
        grid,
        &cache.input,
        spec.in_channels,
        params.get("stem.conv.w")?,
        spec.stem_channels,
        &dfeat,
        f,
        0,
        &mut dk,
        None,
        None,
    );
    add_into(grads.slot("stem.conv.w"), &dk);
    Ok(grads)
}

/// Fold the batch statistics of a train-mode pass into the running
/// averages: `running = 0.9 * running + 0.1 * batch`, using the unbiased
/// batch variance.
pub fn update_running_stats<T: Scalar>(params: &mut ModelParams<T>, cache: &ForwardCache<T>) -> Result<()> {
    if cache.mode != Mode::Train || cache.spec != *params.spec() {
        return Err(Error::StaleCache("running statistics need a train-mode cache".into()));
    }
    let n = cache.grid.pixels() as f64;
    let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    let keep = T::of(BN_MOMENTUM);
    let take = T::of(1.0 - BN_MOMENTUM);
    let all = cache.dense.iter().chain(cache.heads.iter().flat_map(|h| h.pre.iter()));
    for pre in all {
        let Some(stats) = &pre.stats else { continue };
        let rm = params.get_mut(&bn_name(&pre.prefix, "running_mean"))?;
        for (r, m) in rm.iter_mut().zip(&stats.mean) {
            *r = keep * *r + take * *m;
        }
        let rv = params.get_mut(&bn_name(&pre.prefix, "running_var"))?;
        for (r, v) in rv.iter_mut().zip(&stats.var) {
            *r = keep * *r + take * T::of(v.f64() * unbias);
        }
    }
    Ok(())
}

impl<T: Scalar> ForwardCache<T> {
    /// Sign pattern of every ReLU in the pass.
    pub(crate) fn relu_mask(&self) -> Vec<bool> {
        self.dense
            .iter()
            .chain(self.heads.iter().flat_map(|h| h.pre.iter()))
            .filter(|p| p.stats.is_some())
            .flat_map(|p| p.act.iter().map(|a| *a > T::zero()))
            .collect()
    }
}
