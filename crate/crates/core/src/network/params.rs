use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::spec::{Head, ModelSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// `[3, 3, in, out]` convolution kernel.
    Kernel,
    Bias,
    Scale,
    Shift,
    RunningMean,
    RunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::RunningMean | ParamKind::RunningVar)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

impl ParamInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn bn_name(prefix: &str, field: &str) -> String {
    format!("{prefix}.bn.{field}")
}

pub(crate) fn dense_prefix(i: usize) -> String {
    format!("dense.{i}")
}

pub(crate) fn head_prefix(head: Head, l: usize) -> String {
    format!("{}.{l}", head.prefix())
}

impl ModelSpec {
    /// Every parameter in canonical order.
    pub fn param_layout(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, kind| out.push(ParamInfo { name, shape, kind });
        let norm = |push: &mut dyn FnMut(String, Vec<usize>, ParamKind), prefix: &str, c: usize| {
            if self.norm_act {
                push(bn_name(prefix, "scale"), vec![c], ParamKind::Scale);
                push(bn_name(prefix, "shift"), vec![c], ParamKind::Shift);
                push(bn_name(prefix, "running_mean"), vec![c], ParamKind::RunningMean);
                push(bn_name(prefix, "running_var"), vec![c], ParamKind::RunningVar);
            }
        };
        push(
            "stem.conv.w".into(),
            vec![3, 3, self.in_channels, self.stem_channels],
            ParamKind::Kernel,
        );
        for i in 0..self.dense_layers {
            let p = dense_prefix(i);
            let c = self.dense_in(i);
            norm(&mut push, &p, c);
            push(format!("{p}.conv.w"), vec![3, 3, c, self.growth], ParamKind::Kernel);
        }
        for head in Head::ALL {
            for l in 0..=self.head_layers {
                let p = head_prefix(head, l);
                let cin = self.head_in(l);
                let cout = if l == self.head_layers { 1 } else { self.head_width };
                norm(&mut push, &p, cin);
                push(format!("{p}.conv.w"), vec![3, 3, cin, cout], ParamKind::Kernel);
                if l == self.head_layers {
                    push(format!("{p}.conv.b"), vec![1], ParamKind::Bias);
                }
            }
        }
        out
    }
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Named parameter blobs in [`ModelSpec::param_layout`] order.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    spec: ModelSpec,
    layout: Vec<ParamInfo>,
    values: Vec<Vec<T>>,
    index: HashMap<String, usize>,
    /// Fresh process-wide tag taken on creation and on every mutable
    /// access; forward caches remember it.
    generation: u64,
}

impl<T: PartialEq> PartialEq for ModelParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.values == other.values
    }
}

impl<T: Scalar> ModelParams<T> {
    fn from_values(spec: ModelSpec, values: Vec<Vec<T>>) -> Self {
        let layout = spec.param_layout();
        let index = layout.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        Self {
            spec,
            layout,
            values,
            index,
            generation: next_generation(),
        }
    }

    /// He-normal kernels (`std = sqrt(2 / fan_in)`), zero biases, unit
    /// batchnorm scale, zero shift, running statistics `(0, 1)`.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = spec
            .param_layout()
            .iter()
            .map(|p| match p.kind {
                ParamKind::Kernel => {
                    let fan_in = (p.shape[0] * p.shape[1] * p.shape[2]) as f64;
                    let std = (2.0 / fan_in).sqrt();
                    (0..p.len())
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            T::of(std * z)
                        })
                        .collect()
                }
                ParamKind::Scale | ParamKind::RunningVar => vec![T::one(); p.len()],
                _ => vec![T::zero(); p.len()],
            })
            .collect();
        Self::from_values(spec, values)
    }

    /// All-zero model; running variances stay at 1 so normalization is
    /// well defined.
    pub fn zeros(spec: ModelSpec) -> Self {
        let values = spec
            .param_layout()
            .iter()
            .map(|p| {
                let v = if p.kind == ParamKind::RunningVar {
                    T::one()
                } else {
                    T::zero()
                };
                vec![v; p.len()]
            })
            .collect();
        Self::from_values(spec, values)
    }

    /// Build from named blobs; every layout entry must be present with the
    /// right shape.
    pub fn from_named(spec: ModelSpec, mut named: HashMap<String, (Vec<usize>, Vec<T>)>) -> Result<Self> {
        let mut values = Vec::new();
        for p in spec.param_layout() {
            let (shape, data) = named
                .remove(&p.name)
                .ok_or_else(|| Error::MissingParameter(p.name.clone()))?;
            if shape != p.shape || data.len() != p.len() {
                return Err(Error::ParameterShape {
                    name: p.name,
                    expected: p.shape,
                    found: shape,
                });
            }
            values.push(data);
        }
        if let Some(extra) = named.keys().next() {
            return Err(Error::InvalidArgument(format!("unexpected parameter {extra:?}")));
        }
        Ok(Self::from_values(spec, values))
    }

    pub(crate) fn generation(&self) -> u64 {
        self.generation
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &[ParamInfo] {
        &self.layout
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec<T>] {
        self.generation = next_generation();
        &mut self.values
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&[T]> {
        Ok(&self.values[self.position(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut [T]> {
        let i = self.position(name)?;
        self.generation = next_generation();
        Ok(&mut self.values[i])
    }

    /// Total number of scalar parameters (trainable or not).
    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trainable_len(&self) -> usize {
        self.layout
            .iter()
            .filter(|p| p.kind.trainable())
            .map(ParamInfo::len)
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams::from_values(
            self.spec,
            self.values
                .iter()
                .map(|v| v.iter().map(|x| U::of(x.f64())).collect())
                .collect(),
        )
    }

    /// Every value finite and every running variance positive.
    pub fn validate(&self) -> Result<()> {
        for (p, v) in self.layout.iter().zip(&self.values) {
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite value {x} in {}", p.name)));
            }
            if p.kind == ParamKind::RunningVar && v.iter().any(|x| *x <= T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "non-positive running variance in {}",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

/// Gradients aligned with a [`ModelParams`] layout; entries for running
/// statistics stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub(crate) values: Vec<Vec<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Self {
            values: params.values.iter().map(|v| vec![T::zero(); v.len()]).collect(),
            index: params.index.clone(),
        }
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Result<&[T]> {
        let i = self
            .index
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_string()))?;
        Ok(&self.values[*i])
    }

    pub(crate) fn slot(&mut self, name: &str) -> &mut [T] {
        let i = self.index[name];
        &mut self.values[i]
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}
