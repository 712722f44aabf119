//! The trainable networks: an encoder-decoder generator without skip
//! connections, and a multi-scale discriminator scoring context-vector
//! fields (never raw pixels).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::types::MIN_TRAIN_SIDE;

pub const LEAKY_SLOPE: f32 = 0.2;
pub const DEPTH: usize = 5;

fn conv_weight<R: Rng>(rng: &mut R, cout: usize, cin: usize, k: usize, gain: f64) -> Tensor {
    let fan_in = (cin * k * k) as f64;
    let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("valid std");
    let data = (0..cout * cin * k * k).map(|_| normal.sample(rng) as f32).collect();
    Tensor::new(vec![cout, cin, k, k], data)
}

fn leaky_gain() -> f64 {
    (2.0 / (1.0 + (LEAKY_SLOPE as f64).powi(2))).sqrt()
}

/// Side lengths visited by the encoder for an input side `n`:
/// `[n, ceil(n/2), ..., ceil(n/32)]`.
fn pyramid(n: usize) -> [usize; DEPTH + 1] {
    let mut out = [n; DEPTH + 1];
    for i in 1..=DEPTH {
        out[i] = out[i - 1].div_ceil(2);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub in_channels: usize,
    /// Encoder output widths; the decoder mirrors them.
    pub widths: [usize; DEPTH],
}

impl GeneratorSpec {
    fn decoder_widths(&self) -> [usize; DEPTH] {
        let w = self.widths;
        [w[3], w[2], w[1], w[0], w[0]]
    }
}

/// Depth-5 encoder-decoder. Every stage is convolution, context
/// normalization and a leaky rectifier; the encoder downsamples with stride 2,
/// the decoder upsamples with nearest-neighbour resizing before each
/// convolution. The final 1x1 projection is squashed into `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    spec: GeneratorSpec,
    params: ParamSet,
}

/// Output node and the tape nodes of every generator parameter.
pub struct Forward {
    pub output: NodeId,
    pub params: Vec<NodeId>,
}

impl Generator {
    pub fn new<R: Rng>(spec: GeneratorSpec, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        let mut cin = spec.in_channels;
        for (i, &w) in spec.widths.iter().enumerate() {
            params.push(format!("enc{i}.conv"), conv_weight(rng, w, cin, 3, leaky_gain()));
            params.push(format!("enc{i}.gamma"), Tensor::full(&[w], 1.0));
            params.push(format!("enc{i}.beta"), Tensor::zeros(&[w]));
            cin = w;
        }
        for (i, &w) in spec.decoder_widths().iter().enumerate() {
            params.push(format!("dec{i}.conv"), conv_weight(rng, w, cin, 3, leaky_gain()));
            params.push(format!("dec{i}.gamma"), Tensor::full(&[w], 1.0));
            params.push(format!("dec{i}.beta"), Tensor::zeros(&[w]));
            cin = w;
        }
        params.push("out.conv", conv_weight(rng, 3, cin, 1, 1.0));
        params.push("out.bias", Tensor::zeros(&[3]));
        Self { spec, params }
    }

    pub fn from_params(spec: GeneratorSpec, params: ParamSet) -> Result<Self> {
        let reference = Self::new(spec, &mut ChaCha8Rng::seed_from_u64(0));
        check_layout(&reference.params, &params, "generator")?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> GeneratorSpec {
        self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Checks that `target` can be produced; every side of at least
    /// [`MIN_TRAIN_SIDE`] can.
    pub fn check_target(target: (usize, usize)) -> Result<()> {
        if target.0 < MIN_TRAIN_SIDE || target.1 < MIN_TRAIN_SIDE {
            return Err(Error::Network(format!(
                "target {}x{} not producible by the upsampling schedule; nearest valid dims are {}x{}",
                target.0,
                target.1,
                target.0.max(MIN_TRAIN_SIDE),
                target.1.max(MIN_TRAIN_SIDE)
            )));
        }
        Ok(())
    }

    /// Records a forward pass of `input` (a `[in_channels, H, W]` node) that
    /// produces a `[3, target.0, target.1]` image.
    pub fn forward<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        input: NodeId,
        target: (usize, usize),
        trainable: bool,
    ) -> Result<Forward> {
        Self::check_target(target)?;
        let (c, h, w) = tape.value(input).chw();
        if c != self.spec.in_channels {
            return Err(Error::Network(format!(
                "generator expects {} input channels, got {c}",
                self.spec.in_channels
            )));
        }
        if h < MIN_TRAIN_SIDE || w < MIN_TRAIN_SIDE {
            return Err(Error::Network(format!("input {h}x{w} below {MIN_TRAIN_SIDE}x{MIN_TRAIN_SIDE}")));
        }
        let p = self.params.bind(tape, trainable);
        let mut cur = input;
        let mut k = 0;
        for _ in 0..DEPTH {
            cur = tape.conv2d(cur, p[k], None, 2, 1);
            cur = tape.instance_norm(cur, p[k + 1], p[k + 2]);
            cur = tape.leaky_relu(cur, LEAKY_SLOPE);
            k += 3;
        }
        let (ph, pw) = (pyramid(target.0), pyramid(target.1));
        for stage in 0..DEPTH {
            let level = DEPTH - 1 - stage;
            cur = tape.resize(cur, ph[level], pw[level]);
            cur = tape.conv2d(cur, p[k], None, 1, 1);
            cur = tape.instance_norm(cur, p[k + 1], p[k + 2]);
            cur = tape.leaky_relu(cur, LEAKY_SLOPE);
            k += 3;
        }
        cur = tape.conv2d(cur, p[k], Some(p[k + 1]), 1, 0);
        let output = tape.sigmoid(cur);
        Ok(Forward { output, params: p })
    }

    /// Convenience inference pass.
    pub fn generate(&self, input: &Tensor, target: (usize, usize)) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.input(input.clone(), false);
        let f = self.forward(&mut tape, x, target, false)?;
        Ok(tape.value(f.output).clone())
    }
}

/// Per-scale score maps and their averaging weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorMap {
    pub maps: Vec<ScoreMap>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub scores: Vec<f64>,
}

impl ScoreMap {
    pub fn constant(height: usize, width: usize, v: f64) -> Self {
        Self {
            height,
            width,
            scores: vec![v; height * width],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let (_, h, w) = t.chw();
        Self {
            height: h,
            width: w,
            scores: t.data().iter().map(|v| *v as f64).collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![1, self.height, self.width],
            self.scores.iter().map(|v| *v as f32).collect(),
        )
    }
}

impl DiscriminatorMap {
    /// Uniform scale weights.
    pub fn uniform(maps: Vec<ScoreMap>) -> Self {
        let n = maps.len();
        Self {
            maps,
            weights: vec![1.0 / n as f64; n],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorSpec {
    /// Channel count of the context field (the backbone layer's width).
    pub in_channels: usize,
    pub width: usize,
    pub scales: usize,
}

/// `scales` independent three-layer convolutional scorers. Scorer `s` sees
/// the field average-pooled `s` times; outputs are raw least-squares scores.
/// The same instance scores real and generated fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    spec: DiscriminatorSpec,
    params: ParamSet,
}

const LAYERS_PER_SCALE: usize = 3;

impl Discriminator {
    pub fn new<R: Rng>(spec: DiscriminatorSpec, rng: &mut R) -> Self {
        let mut params = ParamSet::new();
        for s in 0..spec.scales {
            let plan = [
                (spec.width, spec.in_channels, leaky_gain()),
                (spec.width, spec.width, leaky_gain()),
                (1, spec.width, 1.0),
            ];
            for (l, (cout, cin, gain)) in plan.into_iter().enumerate() {
                params.push(format!("scale{s}.conv{l}.weight"), conv_weight(rng, cout, cin, 3, gain));
                params.push(format!("scale{s}.conv{l}.bias"), Tensor::zeros(&[cout]));
            }
        }
        Self { spec, params }
    }

    pub fn from_params(spec: DiscriminatorSpec, params: ParamSet) -> Result<Self> {
        let reference = Self::new(spec, &mut ChaCha8Rng::seed_from_u64(0));
        check_layout(&reference.params, &params, "discriminator")?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> DiscriminatorSpec {
        self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn scale_weights(&self) -> Vec<f64> {
        vec![1.0 / self.spec.scales as f64; self.spec.scales]
    }

    /// Fails when the coarsest scale would see fewer than 2x2 positions.
    pub fn check_field(&self, height: usize, width: usize) -> Result<()> {
        let f = 1usize << (self.spec.scales - 1);
        if height / f < 2 || width / f < 2 {
            return Err(Error::Network(format!(
                "{height}x{width} context field is too small for {} scales; reduce discriminator_scales",
                self.spec.scales
            )));
        }
        Ok(())
    }

    /// Records scoring of `field` and returns one score-map node per scale.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, field: NodeId, trainable: bool) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
        let (c, h, w) = tape.value(field).chw();
        if c != self.spec.in_channels {
            return Err(Error::Network(format!(
                "discriminator expects {}-channel context fields, got {c}",
                self.spec.in_channels
            )));
        }
        self.check_field(h, w)?;
        let p = self.params.bind(tape, trainable);
        let mut maps = Vec::with_capacity(self.spec.scales);
        let mut pooled = field;
        for s in 0..self.spec.scales {
            if s > 0 {
                pooled = tape.avg_pool2(pooled);
            }
            let k = s * LAYERS_PER_SCALE * 2;
            let mut cur = tape.conv2d(pooled, p[k], Some(p[k + 1]), 1, 1);
            cur = tape.leaky_relu(cur, LEAKY_SLOPE);
            cur = tape.conv2d(cur, p[k + 2], Some(p[k + 3]), 2, 1);
            cur = tape.leaky_relu(cur, LEAKY_SLOPE);
            cur = tape.conv2d(cur, p[k + 4], Some(p[k + 5]), 1, 1);
            maps.push(cur);
        }
        Ok((maps, p))
    }

    /// Scores a field without recording gradients.
    pub fn score(&self, field: &Tensor) -> Result<DiscriminatorMap> {
        let mut tape = Tape::new();
        let f = tape.input(field.clone(), false);
        let (maps, _) = self.forward(&mut tape, f, false)?;
        Ok(DiscriminatorMap {
            maps: maps.iter().map(|m| ScoreMap::from_tensor(tape.value(*m))).collect(),
            weights: self.scale_weights(),
        })
    }
}

fn check_layout(reference: &ParamSet, got: &ParamSet, what: &str) -> Result<()> {
    if reference.len() != got.len() {
        return Err(Error::Network(format!(
            "{what}: expected {} tensors, got {}",
            reference.len(),
            got.len()
        )));
    }
    for ((rn, rt), (gn, gt)) in reference.iter().zip(got.iter()) {
        if rn != gn || rt.shape() != gt.shape() {
            return Err(Error::Network(format!(
                "{what}: tensor {gn} {:?} does not match {rn} {:?}",
                gt.shape(),
                rt.shape()
            )));
        }
    }
    Ok(())
}
