//! Frozen 19-layer VGG feature extractor.
//!
//! Weights come either from a safetensors file using torchvision's
//! `features.{index}.{weight,bias}` naming, or from a fixed-seed He
//! initialization when no pretrained file is available. The network is
//! never updated; gradients only flow through it to the image.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::types::{ImageTensor, RANDOM_BACKBONE};

/// Environment variable naming the weights cache directory.
pub const WEIGHTS_DIR_ENV: &str = "DEEPCFL_WEIGHTS_DIR";
/// File looked up inside the cache directory.
pub const WEIGHTS_FILE: &str = "vgg19.safetensors";
/// Seed of the stand-in backbone used when `backbone_weights = "random"`.
pub const STANDIN_SEED: u64 = 0x57_4747_3139;

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// `(name, in_channels, out_channels, torchvision feature index)`; a `None`
/// entry is a 2x2 max-pool.
const LAYOUT: [Option<(&str, usize, usize, usize)>; 20] = [
    Some(("conv1_1", 3, 64, 0)),
    Some(("conv1_2", 64, 64, 2)),
    None,
    Some(("conv2_1", 64, 128, 5)),
    Some(("conv2_2", 128, 128, 7)),
    None,
    Some(("conv3_1", 128, 256, 10)),
    Some(("conv3_2", 256, 256, 12)),
    Some(("conv3_3", 256, 256, 14)),
    Some(("conv3_4", 256, 256, 16)),
    None,
    Some(("conv4_1", 256, 512, 19)),
    Some(("conv4_2", 512, 512, 21)),
    Some(("conv4_3", 512, 512, 23)),
    Some(("conv4_4", 512, 512, 25)),
    None,
    Some(("conv5_1", 512, 512, 28)),
    Some(("conv5_2", 512, 512, 30)),
    Some(("conv5_3", 512, 512, 32)),
    Some(("conv5_4", 512, 512, 34)),
];

/// A parsed layer id: a convolution's raw output or its rectified output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerRef {
    /// Position in [`LAYOUT`].
    slot: usize,
    rectified: bool,
}

fn parse_layer(id: &str) -> Result<LayerRef> {
    let (rectified, base) = if let Some(rest) = id.strip_prefix("relu") {
        (true, format!("conv{rest}"))
    } else {
        (false, id.to_string())
    };
    LAYOUT
        .iter()
        .position(|l| l.is_some_and(|(name, ..)| name == base))
        .map(|slot| LayerRef { slot, rectified })
        .ok_or_else(|| Error::Backbone(format!("unknown layer id {id:?}")))
}

/// Feature maps of one image at the requested layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextVectorField {
    pub source_dims: (usize, usize),
    pub layers: BTreeMap<String, Tensor>,
}

impl ContextVectorField {
    pub fn layer(&self, id: &str) -> Result<&Tensor> {
        self.layers
            .get(id)
            .ok_or_else(|| Error::Backbone(format!("field has no layer {id:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WeightSource {
    File(PathBuf),
    Seeded(u64),
}

pub struct Backbone {
    params: ParamSet,
    source: WeightSource,
}

impl std::fmt::Debug for Backbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backbone").field("source", &self.source).finish()
    }
}

impl Backbone {
    /// He-initialized stand-in with the exact VGG19 topology.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, cin, cout, _) in LAYOUT.iter().flatten() {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("valid std");
            let w: Vec<f32> = (0..cout * cin * 9).map(|_| normal.sample(&mut rng) as f32).collect();
            params.push(format!("{name}.weight"), Tensor::new(vec![*cout, *cin, 3, 3], w));
            params.push(format!("{name}.bias"), Tensor::zeros(&[*cout]));
        }
        Self {
            params,
            source: WeightSource::Seeded(seed),
        }
    }

    /// Loads pretrained weights from a safetensors file. Accepts torchvision
    /// names (`features.21.weight`) or layer names (`conv4_2.weight`).
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let st = safetensors::SafeTensors::deserialize(&bytes).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let fetch = |keys: [String; 2], shape: &[usize]| -> Result<Tensor> {
            let view = keys
                .iter()
                .find_map(|k| st.tensor(k).ok())
                .ok_or_else(|| Error::Backbone(format!("{}: missing tensor {}", path.display(), keys[1])))?;
            if view.dtype() != safetensors::Dtype::F32 {
                return Err(Error::Backbone(format!("{}: {} must be f32", path.display(), keys[1])));
            }
            if view.shape() != shape {
                return Err(Error::Backbone(format!(
                    "{}: {} has shape {:?}, expected {shape:?}",
                    path.display(),
                    keys[1],
                    view.shape()
                )));
            }
            let data = view
                .data()
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Ok(Tensor::new(shape.to_vec(), data))
        };
        let mut params = ParamSet::new();
        for (name, cin, cout, idx) in LAYOUT.iter().flatten() {
            let w = fetch(
                [format!("features.{idx}.weight"), format!("{name}.weight")],
                &[*cout, *cin, 3, 3],
            )?;
            let b = fetch([format!("features.{idx}.bias"), format!("{name}.bias")], &[*cout])?;
            params.push(format!("{name}.weight"), w);
            params.push(format!("{name}.bias"), b);
        }
        Ok(Self {
            params,
            source: WeightSource::File(path.to_path_buf()),
        })
    }

    /// Resolves the `backbone_weights` setting: `"random"` selects the
    /// seeded stand-in, a path loads that file, and an empty value looks for
    /// [`WEIGHTS_FILE`] under `$DEEPCFL_WEIGHTS_DIR`. Never downloads.
    pub fn from_setting(setting: &str) -> Result<Self> {
        let setting = setting.trim();
        if setting == RANDOM_BACKBONE {
            return Ok(Self::seeded(STANDIN_SEED));
        }
        if !setting.is_empty() {
            return Self::load(Path::new(setting));
        }
        match std::env::var_os(WEIGHTS_DIR_ENV) {
            Some(dir) => {
                let path = Path::new(&dir).join(WEIGHTS_FILE);
                if path.is_file() {
                    Self::load(&path)
                } else {
                    Err(Error::Backbone(format!(
                        "backbone weights unavailable: {} does not exist",
                        path.display()
                    )))
                }
            }
            None => Err(Error::Backbone(format!(
                "backbone weights unavailable: set {WEIGHTS_DIR_ENV} to a directory holding \
                 {WEIGHTS_FILE}, pass a weight file path, or use \"{RANDOM_BACKBONE}\""
            ))),
        }
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn checksum(&self) -> u64 {
        self.params.checksum()
    }

    /// Fails on empty lists or unknown ids.
    pub fn check_layers(layer_ids: &[String]) -> Result<()> {
        if layer_ids.is_empty() {
            return Err(Error::Backbone("no layers requested".into()));
        }
        for id in layer_ids {
            parse_layer(id)?;
        }
        Ok(())
    }

    /// `(C, H, W)` of a layer's output for an `height x width` input.
    pub fn layer_dims(layer_id: &str, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let r = parse_layer(layer_id)?;
        let (mut h, mut w, mut c) = (height, width, 3);
        for entry in &LAYOUT[..=r.slot] {
            match entry {
                None => {
                    h /= 2;
                    w /= 2;
                }
                Some((_, _, cout, _)) => c = *cout,
            }
        }
        Ok((c, h, w))
    }

    /// Runs the network on `image_node` (a `[3,H,W]` image in `[0,1]`) and
    /// returns the node of every requested layer, in request order.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, image_node: NodeId, layer_ids: &[String]) -> Result<Vec<NodeId>> {
        Self::check_layers(layer_ids)?;
        let refs: Vec<LayerRef> = layer_ids.iter().map(|id| parse_layer(id)).collect::<Result<_>>()?;
        let deepest = refs.iter().map(|r| r.slot).max().expect("non-empty");
        let (_, h, w) = tape.value(image_node).chw();
        let (_, dh, dw) = Self::layer_dims(&layer_ids[refs.iter().position(|r| r.slot == deepest).unwrap()], h, w)?;
        if dh == 0 || dw == 0 {
            return Err(Error::Backbone(format!("{h}x{w} input is too small for the requested layers")));
        }
        let scale: Vec<f32> = IMAGENET_STD.iter().map(|s| 1.0 / s).collect();
        let shift: Vec<f32> = IMAGENET_MEAN.iter().zip(&IMAGENET_STD).map(|(m, s)| -m / s).collect();
        let mut cur = tape.channel_affine(image_node, &scale, &shift);
        let mut out: Vec<Option<NodeId>> = vec![None; refs.len()];
        let mut conv_index = 0;
        for (slot, entry) in LAYOUT.iter().enumerate().take(deepest + 1) {
            match entry {
                None => cur = tape.max_pool2(cur),
                Some(_) => {
                    let w = tape.param(self.params.get(2 * conv_index), false);
                    let b = tape.param(self.params.get(2 * conv_index + 1), false);
                    conv_index += 1;
                    let pre = tape.conv2d(cur, w, Some(b), 1, 1);
                    let post = if slot < deepest || refs.iter().any(|r| r.slot == slot && r.rectified) {
                        Some(tape.relu(pre))
                    } else {
                        None
                    };
                    for (i, r) in refs.iter().enumerate() {
                        if r.slot == slot {
                            out[i] = Some(if r.rectified { post.expect("rectified") } else { pre });
                        }
                    }
                    if let Some(p) = post {
                        cur = p;
                    }
                }
            }
        }
        Ok(out.into_iter().map(|o| o.expect("every layer visited")).collect())
    }

    /// Feature maps of `image` at `layer_ids` without recording gradients.
    pub fn extract_context(&self, image: &ImageTensor, layer_ids: &[String]) -> Result<ContextVectorField> {
        let mut tape = Tape::new();
        let input = tape.input(image_to_tensor(image), false);
        let nodes = self.forward(&mut tape, input, layer_ids)?;
        let layers = layer_ids
            .iter()
            .zip(nodes)
            .map(|(id, n)| (id.clone(), tape.value(n).clone()))
            .collect();
        Ok(ContextVectorField {
            source_dims: image.dims(),
            layers,
        })
    }
}

pub(crate) fn image_to_tensor(image: &ImageTensor) -> Tensor {
    Tensor::new(
        vec![3, image.height(), image.width()],
        image.as_planar().to_vec(),
    )
}
