//! Per-image alternating optimization. Every iteration first updates the
//! discriminator on the source field (real) against the detached field of the
//! current generator output (fake), then updates the generator on the total
//! loss scored by the freshly updated, frozen discriminator.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{image_to_tensor, Backbone};
use crate::error::{Error, Result};
use crate::losses::{self, CxParams, FeatureSet, GeneratorObjective, PixelRole};
use crate::masking;
use crate::networks::{Discriminator, DiscriminatorMap, DiscriminatorSpec, Generator, GeneratorSpec, ScoreMap};
use crate::params::{AdamConfig, AdamState, ParamSet};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::types::{validate_training, ImageTensor, LossBreakdown, Mask, RunConfig, RunReport, Task};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DCFLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Generator parameters at the lowest total loss seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct BestSnapshot {
    pub params: ParamSet,
    pub tl: f64,
    pub iteration: usize,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub config: RunConfig,
    /// Number of completed iterations.
    pub iteration: usize,
    pub generator: Generator,
    pub generator_adam: AdamState,
    pub discriminator: Option<Discriminator>,
    pub discriminator_adam: Option<AdamState>,
    pub rng: ChaCha8Rng,
    pub best: Option<BestSnapshot>,
    pub trace: Vec<LossBreakdown>,
}

/// What is being optimized.
#[derive(Clone, Debug)]
pub enum Problem {
    /// Fill the missing pixels of a corrupted image.
    Restore { source: ImageTensor, mask: Mask },
    /// Re-synthesize `source` at `target` dims.
    Resize { source: ImageTensor, target: (usize, usize) },
}

impl Problem {
    pub fn source(&self) -> &ImageTensor {
        match self {
            Problem::Restore { source, .. } | Problem::Resize { source, .. } => source,
        }
    }

    pub fn output_dims(&self) -> (usize, usize) {
        match self {
            Problem::Restore { source, .. } => source.dims(),
            Problem::Resize { target, .. } => *target,
        }
    }
}

/// Output dims of a resize: each side scaled and rounded.
pub fn resize_target(dims: (usize, usize), factors: [f64; 2]) -> (usize, usize) {
    (
        (dims.0 as f64 * factors[0]).round() as usize,
        (dims.1 as f64 * factors[1]).round() as usize,
    )
}

struct FeatureContext {
    /// First-layer field of the source; the discriminator's real sample.
    real_field: Tensor,
    /// Per-layer CX pools drawn from the source.
    source_sets: Vec<FeatureSet>,
}

/// A training run in progress.
pub struct Session<'b> {
    backbone: &'b Backbone,
    problem: Problem,
    layers: Vec<String>,
    gen_input: Tensor,
    features: Option<FeatureContext>,
    state: TrainState,
}

fn generator_input(problem: &Problem, with_mask: bool) -> Tensor {
    let src = image_to_tensor(problem.source());
    match problem {
        Problem::Restore { mask, .. } if with_mask => {
            let (h, w) = mask.dims();
            let mut data = src.into_data();
            data.extend(mask.bits().iter().map(|b| *b as f32));
            Tensor::new(vec![4, h, w], data)
        }
        _ => src,
    }
}

/// Keep flags for feature cells whose pixels are at least half known.
fn known_cells(mask: &Mask, fh: usize, fw: usize) -> Vec<bool> {
    let (h, w) = mask.dims();
    let mut keep = vec![false; fh * fw];
    for fy in 0..fh {
        for fx in 0..fw {
            let (y0, y1) = (fy * h / fh, ((fy + 1) * h / fh).max(fy * h / fh + 1));
            let (x0, x1) = (fx * w / fw, ((fx + 1) * w / fw).max(fx * w / fw + 1));
            let mut known = 0;
            for y in y0..y1 {
                for x in x0..x1 {
                    known += usize::from(mask.is_known(y, x));
                }
            }
            keep[fy * fw + fx] = 2 * known >= (y1 - y0) * (x1 - x0);
        }
    }
    keep
}

fn new_state(config: &RunConfig, problem: &Problem, layers: &[String], adversarial: bool) -> Result<TrainState> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let in_channels = if config.mask_input_channel { 4 } else { 3 };
    let generator = Generator::new(
        GeneratorSpec {
            in_channels,
            widths: config.generator_widths,
        },
        &mut rng,
    );
    let generator_adam = AdamState::new(generator.params());
    let (discriminator, discriminator_adam) = if adversarial {
        let (h, w) = problem.source().dims();
        let (c, _, _) = Backbone::layer_dims(&layers[0], h, w)?;
        let d = Discriminator::new(
            DiscriminatorSpec {
                in_channels: c,
                width: config.discriminator_width,
                scales: config.scales(),
            },
            &mut rng,
        );
        let adam = AdamState::new(d.params());
        (Some(d), Some(adam))
    } else {
        (None, None)
    };
    Ok(TrainState {
        config: config.clone(),
        iteration: 0,
        generator,
        generator_adam,
        discriminator,
        discriminator_adam,
        rng,
        best: None,
        trace: Vec::new(),
    })
}

impl<'b> Session<'b> {
    /// Starts a fresh run.
    pub fn new(problem: Problem, config: &RunConfig, backbone: &'b Backbone) -> Result<Self> {
        let config = validate_training(config.clone())?;
        let layers = config.cx_layers();
        let adversarial = config.loss_weights.adversarial_weight() > 0.0;
        let state = new_state(&config, &problem, &layers, adversarial)?;
        Self::with_state(problem, backbone, state)
    }

    /// Continues from a saved state; the configuration comes from the state.
    pub fn resume(problem: Problem, backbone: &'b Backbone, state: TrainState) -> Result<Self> {
        validate_training(state.config.clone())?;
        Self::with_state(problem, backbone, state)
    }

    fn with_state(problem: Problem, backbone: &'b Backbone, state: TrainState) -> Result<Self> {
        let config = &state.config;
        let source = problem.source();
        source.ensure_trainable()?;
        match &problem {
            Problem::Restore { source, mask } => {
                if source.dims() != mask.dims() {
                    return Err(Error::dims(
                        format!("{}x{}", source.height(), source.width()),
                        format!("{}x{} mask", mask.height(), mask.width()),
                    ));
                }
                if config.task == Task::Resize {
                    return Err(Error::Config("resize configuration used for a restoration problem".into()));
                }
            }
            Problem::Resize { .. } => {
                if config.task != Task::Resize {
                    return Err(Error::Config(format!("{} configuration used for a resize problem", config.task)));
                }
            }
        }
        Generator::check_target(problem.output_dims())?;
        let layers = config.cx_layers();
        Backbone::check_layers(&layers)?;
        let w = &config.loss_weights;
        let feature_terms = w.adversarial_weight() > 0.0 || w.contextual_weight() > 0.0;
        if state.discriminator.is_some() != (w.adversarial_weight() > 0.0) {
            return Err(Error::Checkpoint("discriminator presence does not match the loss weights".into()));
        }
        let gen_input = generator_input(&problem, config.mask_input_channel);
        if gen_input.shape()[0] != state.generator.spec().in_channels {
            return Err(Error::Checkpoint("generator input channels do not match the problem".into()));
        }

        let features = if feature_terms {
            let field = backbone.extract_context(source, &layers)?;
            let keep_mask = match (&problem, config.cvl_exclude_masked) {
                (Problem::Restore { mask, .. }, true) => Some(mask),
                _ => None,
            };
            let mut source_sets = Vec::with_capacity(layers.len());
            for id in &layers {
                let map = field.layer(id)?;
                let (_, fh, fw) = map.chw();
                let set = match keep_mask {
                    Some(m) => {
                        let keep = known_cells(m, fh, fw);
                        FeatureSet::from_map_where(map, Some(&keep)).map_err(|_| {
                            Error::Loss(format!("no mostly-known cells left in layer {id} for the CX pool"))
                        })?
                    }
                    None => FeatureSet::from_map(map),
                };
                source_sets.push(set);
            }
            let real_field = field.layer(&layers[0])?.clone();
            if let Some(d) = &state.discriminator {
                let (_, fh, fw) = real_field.chw();
                d.check_field(fh, fw)?;
                let (oh, ow) = problem.output_dims();
                let (_, gh, gw) = Backbone::layer_dims(&layers[0], oh, ow)?;
                d.check_field(gh, gw)?;
            }
            Some(FeatureContext {
                real_field,
                source_sets,
            })
        } else {
            None
        };
        Ok(Self {
            backbone,
            problem,
            layers,
            gen_input,
            features,
            state,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn config(&self) -> &RunConfig {
        &self.state.config
    }

    /// Whether the backbone and discriminator take part in the objective.
    pub fn feature_terms_evaluated(&self) -> bool {
        self.features.is_some()
    }

    /// Runs one discriminator update and one generator update.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let iteration = self.state.iteration;
        let st = &mut self.state;
        let cfg = &st.config;
        let w = cfg.loss_weights;
        let cx = CxParams {
            bandwidth: cfg.cx_bandwidth,
            epsilon: cfg.cx_epsilon,
        };
        let adam_g = AdamConfig::new(cfg.lr_g, cfg.betas_g);
        let adam_d = AdamConfig::new(cfg.lr_d, cfg.betas_d);
        let non_finite = |detail: String| Error::NonFinite { iteration, detail };

        let mut tape = Tape::new();
        let x = tape.input(self.gen_input.clone(), false);
        let out_dims = self.problem.output_dims();
        let fwd = st.generator.forward(&mut tape, x, out_dims, true)?;
        let y = fwd.output;
        let mut param_nodes = vec![fwd.params];

        let source = self.problem.source();
        let (pred, mask, role) = match &self.problem {
            Problem::Restore { mask, .. } => (y, Some(mask), PixelRole::Reconstruction),
            // With identical dims the cycle pass is the identity and the
            // cycle term compares the output itself with the source.
            Problem::Resize { .. } if out_dims == source.dims() => (y, None, PixelRole::Cycle),
            Problem::Resize { .. } => {
                let back = st.generator.forward(&mut tape, y, source.dims(), true)?;
                param_nodes.push(back.params);
                (back.output, None, PixelRole::Cycle)
            }
        };

        let mut feature_nodes: Vec<NodeId> = Vec::new();
        let mut target_sets = Vec::new();
        let mut score_nodes: Vec<NodeId> = Vec::new();
        let mut fake_scores = None;
        let mut cal_d = 0.0;
        if let Some(fc) = &self.features {
            feature_nodes = self.backbone.forward(&mut tape, y, &self.layers)?;
            target_sets = feature_nodes.iter().map(|n| FeatureSet::from_map(tape.value(*n))).collect();
            if let (Some(d), Some(d_adam)) = (st.discriminator.as_mut(), st.discriminator_adam.as_mut()) {
                let fake_field = tape.value(feature_nodes[0]);
                cal_d = discriminator_step(d, d_adam, &adam_d, &fc.real_field, fake_field)
                    .map_err(|e| match e {
                        Error::Loss(m) => non_finite(m),
                        other => other,
                    })?;
                let d: &Discriminator = d;
                let (maps, _) = d.forward(&mut tape, feature_nodes[0], false)?;
                fake_scores = Some(DiscriminatorMap {
                    maps: maps.iter().map(|m| ScoreMap::from_tensor(tape.value(*m))).collect(),
                    weights: d.scale_weights(),
                });
                score_nodes = maps;
            }
        }

        let empty: Vec<FeatureSet> = Vec::new();
        let objective = GeneratorObjective {
            weights: &w,
            cx,
            source_features: self.features.as_ref().map_or(&empty, |f| &f.source_sets),
            target_features: &target_sets,
            fake_scores: fake_scores.as_ref(),
            prediction: tape.value(pred).data(),
            reference: source.as_planar(),
            mask,
            pixel_role: role,
        };
        let (breakdown, grads) = objective.evaluate(cal_d).map_err(|e| match e {
            Error::Loss(m) => non_finite(m),
            other => other,
        })?;
        if !breakdown.tl.is_finite() {
            return Err(non_finite(format!("{breakdown:?}")));
        }

        let to_f32 = |g: &[f64]| -> Vec<f32> { g.iter().map(|v| *v as f32).collect() };
        let mut seeds = vec![(pred, Tensor::new(tape.value(pred).shape().to_vec(), to_f32(&grads.prediction)))];
        if w.contextual_weight() > 0.0 {
            for (node, g) in feature_nodes.iter().zip(&grads.target_features) {
                seeds.push((*node, losses::grad_to_map(g, tape.value(*node).shape())));
            }
        }
        for (node, g) in score_nodes.iter().zip(&grads.fake_scores) {
            seeds.push((*node, Tensor::new(tape.value(*node).shape().to_vec(), to_f32(g))));
        }
        let mut all = tape.backward(seeds);
        let mut g_grads: Vec<Option<Tensor>> = Vec::new();
        for nodes in &param_nodes {
            for (i, n) in nodes.iter().enumerate() {
                let g = all.take(*n);
                if i >= g_grads.len() {
                    g_grads.push(g);
                } else if let Some(g) = g {
                    match &mut g_grads[i] {
                        Some(acc) => acc.add_assign(&g),
                        slot => *slot = Some(g),
                    }
                }
            }
        }
        drop(tape);
        if g_grads.iter().flatten().any(|g| !g.all_finite()) {
            return Err(non_finite(format!("generator gradient; losses {breakdown:?}")));
        }
        st.generator_adam.update(&adam_g, st.generator.params_mut(), &g_grads);

        if st.best.as_ref().is_none_or(|b| breakdown.tl < b.tl) {
            st.best = Some(BestSnapshot {
                params: st.generator.params().clone(),
                tl: breakdown.tl,
                iteration,
            });
        }
        st.trace.push(breakdown);
        st.iteration += 1;
        Ok(breakdown)
    }

    /// Steps until `iterations` have completed in total.
    pub fn run_to(&mut self, iterations: usize) -> Result<()> {
        while self.state.iteration < iterations {
            self.step()?;
        }
        Ok(())
    }

    fn render(&self, generator: &Generator) -> Result<ImageTensor> {
        let out = generator.generate(&self.gen_input, self.problem.output_dims())?;
        let (_, h, w) = out.chw();
        ImageTensor::from_planar(h, w, out.into_data())
    }

    /// The raw output of the current generator.
    pub fn raw_output(&self) -> Result<ImageTensor> {
        self.render(&self.state.generator)
    }

    /// Raw output of the best snapshot, if any step has run.
    pub fn best_output(&self) -> Result<Option<ImageTensor>> {
        match &self.state.best {
            Some(b) => {
                let g = Generator::from_params(self.state.generator.spec(), b.params.clone())?;
                Ok(Some(self.render(&g)?))
            }
            None => Ok(None),
        }
    }

    /// Raw output, composited with the known pixels for restoration.
    pub fn composite(&self, raw: &ImageTensor) -> Result<Option<ImageTensor>> {
        match &self.problem {
            Problem::Restore { source, mask } => Ok(Some(masking::composite(raw, source, mask)?)),
            Problem::Resize { .. } => Ok(None),
        }
    }

    /// Final raw output (last or best, per `emit_best`) and the report.
    pub fn finish(&self, wall_seconds: f64) -> Result<(ImageTensor, RunReport)> {
        let raw = if self.state.config.emit_best {
            self.best_output()?.map_or_else(|| self.raw_output(), Ok)?
        } else {
            self.raw_output()?
        };
        let mask_zero_fraction = match &self.problem {
            Problem::Restore { mask, .. } => mask.zero_fraction(),
            Problem::Resize { .. } => 0.0,
        };
        let (best_tl, best_iteration) = self.state.best.as_ref().map_or((f64::NAN, 0), |b| (b.tl, b.iteration));
        let report = RunReport {
            config: self.state.config.clone(),
            iterations: self.state.iteration,
            trace: self.state.trace.clone(),
            metrics: None,
            composite_metrics: None,
            mask_zero_fraction,
            best_tl,
            best_iteration,
            feature_terms_evaluated: self.feature_terms_evaluated(),
            wall_seconds,
            outputs: Default::default(),
        };
        Ok((raw, report))
    }
}

/// One discriminator update on a real and a fake field. Returns the loss
/// before the update. Generator parameters are not involved.
pub fn discriminator_step(
    d: &mut Discriminator,
    adam: &mut AdamState,
    cfg: &AdamConfig,
    real: &Tensor,
    fake: &Tensor,
) -> Result<f64> {
    let grads = {
        let mut tape = Tape::new();
        let r = tape.input(real.clone(), false);
        let f = tape.input(fake.clone(), false);
        let (real_maps, real_params) = d.forward(&mut tape, r, true)?;
        let (fake_maps, fake_params) = d.forward(&mut tape, f, true)?;
        let collect = |maps: &[NodeId]| DiscriminatorMap {
            maps: maps.iter().map(|m| ScoreMap::from_tensor(tape.value(*m))).collect(),
            weights: d.scale_weights(),
        };
        let (loss, g_real, g_fake) = losses::cal_discriminator_grads(&collect(&real_maps), &collect(&fake_maps))?;
        if !loss.is_finite() {
            return Err(Error::Loss(format!("cal_d is not finite ({loss})")));
        }
        let mut seeds = Vec::new();
        for (maps, gs) in [(&real_maps, g_real), (&fake_maps, g_fake)] {
            for (m, g) in maps.iter().zip(gs) {
                seeds.push((*m, Tensor::new(tape.value(*m).shape().to_vec(), g.iter().map(|v| *v as f32).collect())));
            }
        }
        let mut all = tape.backward(seeds);
        let mut out: Vec<Option<Tensor>> = Vec::with_capacity(real_params.len());
        for (a, b) in real_params.iter().zip(&fake_params) {
            let g = match (all.take(*a), all.take(*b)) {
                (Some(mut x), Some(y)) => {
                    x.add_assign(&y);
                    Some(x)
                }
                (x, y) => x.or(y),
            };
            out.push(g);
        }
        (loss, out)
    };
    let (loss, grads) = grads;
    if grads.iter().flatten().any(|g| !g.all_finite()) {
        return Err(Error::Loss("discriminator gradient is not finite".into()));
    }
    adam.update(cfg, d.params_mut(), &grads);
    Ok(loss)
}

/// Restores `source` (already corrupted by `mask`). The returned image is
/// composited with the known pixels iff `config.composite_output`.
pub fn train_restore(source: &ImageTensor, mask: &Mask, config: &RunConfig, backbone: &Backbone) -> Result<(ImageTensor, RunReport)> {
    let start = Instant::now();
    let problem = Problem::Restore {
        source: source.clone(),
        mask: mask.clone(),
    };
    let mut session = Session::new(problem, config, backbone)?;
    session.run_to(session.config().iterations)?;
    let (raw, report) = session.finish(start.elapsed().as_secs_f64())?;
    let out = if session.config().composite_output {
        session.composite(&raw)?.expect("restoration")
    } else {
        raw
    };
    Ok((out, report))
}

/// Resizes `source` by `factors` (height, width).
pub fn train_resize(source: &ImageTensor, factors: [f64; 2], config: &RunConfig, backbone: &Backbone) -> Result<(ImageTensor, RunReport)> {
    let start = Instant::now();
    let mut config = config.clone();
    config.resize_factor = Some(factors);
    let problem = Problem::Resize {
        source: source.clone(),
        target: resize_target(source.dims(), factors),
    };
    let mut session = Session::new(problem, &config, backbone)?;
    session.run_to(session.config().iterations)?;
    session.finish(start.elapsed().as_secs_f64())
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: String,
    stream: u64,
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: RunConfig,
    iteration: usize,
    generator_spec: [usize; 6],
    discriminator_spec: Option<[usize; 3]>,
    generator_adam_step: u64,
    discriminator_adam_step: Option<u64>,
    rng: RngState,
    best_tl: Option<f64>,
    best_iteration: Option<usize>,
    trace: Vec<LossBreakdown>,
    tensors: Vec<TensorEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<[u8; 32]> {
    let bad = || Error::Checkpoint("malformed rng seed".into());
    if s.len() != 64 {
        return Err(bad());
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}

fn state_sets(state: &TrainState) -> Vec<(&'static str, &ParamSet)> {
    let mut sets = vec![
        ("generator", state.generator.params()),
        ("generator_m", &state.generator_adam.m),
        ("generator_v", &state.generator_adam.v),
    ];
    if let (Some(d), Some(a)) = (&state.discriminator, &state.discriminator_adam) {
        sets.push(("discriminator", d.params()));
        sets.push(("discriminator_m", &a.m));
        sets.push(("discriminator_v", &a.v));
    }
    if let Some(b) = &state.best {
        sets.push(("best", &b.params));
    }
    sets
}

/// Serializes a state: magic, little-endian `u32` version, `u64` header
/// length, a JSON header, then raw little-endian `f32` tensor data.
pub fn encode_state(state: &TrainState) -> Result<Vec<u8>> {
    let sets = state_sets(state);
    let mut tensors = Vec::new();
    for (prefix, set) in &sets {
        for (name, t) in set.iter() {
            tensors.push(TensorEntry {
                name: format!("{prefix}/{name}"),
                shape: t.shape().to_vec(),
            });
        }
    }
    let gs = state.generator.spec();
    let header = Header {
        config: state.config.clone(),
        iteration: state.iteration,
        generator_spec: [gs.in_channels, gs.widths[0], gs.widths[1], gs.widths[2], gs.widths[3], gs.widths[4]],
        discriminator_spec: state.discriminator.as_ref().map(|d| {
            let s = d.spec();
            [s.in_channels, s.width, s.scales]
        }),
        generator_adam_step: state.generator_adam.step,
        discriminator_adam_step: state.discriminator_adam.as_ref().map(|a| a.step),
        rng: RngState {
            seed: hex(&state.rng.get_seed()),
            stream: state.rng.get_stream(),
            word_pos: state.rng.get_word_pos().to_string(),
        },
        best_tl: state.best.as_ref().map(|b| b.tl),
        best_iteration: state.best.as_ref().map(|b| b.iteration),
        trace: state.trace.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, set) in &sets {
        for t in set.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_state(bytes: &[u8]) -> Result<TrainState> {
    let corrupt = |m: &str| Error::Checkpoint(format!("corrupt checkpoint: {m}"));
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < hlen {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| corrupt(&e.to_string()))?;
    let mut data = &body[hlen..];
    let mut sets: BTreeMap<String, ParamSet> = BTreeMap::new();
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        if data.len() < 4 * n {
            return Err(corrupt("truncated tensor data"));
        }
        let mut values = vec![0f32; n];
        let mut buf = [0u8; 4];
        for v in values.iter_mut() {
            data.read_exact(&mut buf).expect("length checked");
            *v = f32::from_le_bytes(buf);
        }
        let (prefix, name) = entry.name.split_once('/').ok_or_else(|| corrupt("tensor name"))?;
        sets.entry(prefix.to_string())
            .or_default()
            .push(name, Tensor::new(entry.shape.clone(), values));
    }
    if !data.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    let mut take = |k: &str| sets.remove(k).ok_or_else(|| corrupt(&format!("missing {k}")));
    let g = header.generator_spec;
    let gspec = GeneratorSpec {
        in_channels: g[0],
        widths: [g[1], g[2], g[3], g[4], g[5]],
    };
    let generator = Generator::from_params(gspec, take("generator")?)?;
    let generator_adam = AdamState {
        step: header.generator_adam_step,
        m: take("generator_m")?,
        v: take("generator_v")?,
    };
    let (discriminator, discriminator_adam) = match header.discriminator_spec {
        Some([in_channels, width, scales]) => {
            let spec = DiscriminatorSpec {
                in_channels,
                width,
                scales,
            };
            let d = Discriminator::from_params(spec, take("discriminator")?)?;
            let a = AdamState {
                step: header.discriminator_adam_step.ok_or_else(|| corrupt("missing adam step"))?,
                m: take("discriminator_m")?,
                v: take("discriminator_v")?,
            };
            (Some(d), Some(a))
        }
        None => (None, None),
    };
    let best = match (header.best_tl, header.best_iteration) {
        (Some(tl), Some(iteration)) => Some(BestSnapshot {
            params: take("best")?,
            tl,
            iteration,
        }),
        _ => None,
    };
    let mut rng = ChaCha8Rng::from_seed(unhex(&header.rng.seed)?);
    rng.set_stream(header.rng.stream);
    rng.set_word_pos(header.rng.word_pos.parse().map_err(|_| corrupt("rng position"))?);
    Ok(TrainState {
        config: header.config,
        iteration: header.iteration,
        generator,
        generator_adam,
        discriminator,
        discriminator_adam,
        rng,
        best,
        trace: header.trace,
    })
}

pub fn save_state(state: &TrainState, path: &Path) -> Result<()> {
    let bytes = encode_state(state)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_state(path: &Path) -> Result<TrainState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_state(&bytes)
}
