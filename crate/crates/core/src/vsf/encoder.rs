use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{he_normal, im2col, ConvGeom, LrGroup, ParamId, ParamStore, Tape, Var};
use crate::par::Exec;
use crate::render::ImageBuffer;
use crate::rng::{derive_seed, rng};

pub const DEFAULT_ENCODER_ID: &str = "convstack-2048";
pub const DEFAULT_VSF_DIM: usize = 2048;

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];
const WEIGHTS_MAGIC: &[u8; 4] = b"VENC";
const WEIGHTS_VERSION: u32 = 1;

/// One convolution + rectifier stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Encoder topology: input size, conv stages, then global average pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderArch {
    pub id: String,
    pub input_hw: (usize, usize),
    pub layers: Vec<ConvSpec>,
}

impl EncoderArch {
    /// Four stride-2 3×3 stages (16, 32, 64, 128 channels) and a 1×1
    /// projection to `out_dim`.
    pub fn convstack(input_hw: (usize, usize), out_dim: usize) -> Self {
        let c3 = |out_channels| ConvSpec {
            out_channels,
            kernel: 3,
            stride: 2,
            pad: 1,
        };
        EncoderArch {
            id: format!("convstack-{out_dim}"),
            input_hw,
            layers: vec![
                c3(16),
                c3(32),
                c3(64),
                c3(128),
                ConvSpec {
                    out_channels: out_dim,
                    kernel: 1,
                    stride: 1,
                    pad: 0,
                },
            ],
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(3, |l| l.out_channels)
    }

    fn geometries(&self) -> Vec<ConvGeom> {
        let (mut h, mut w, mut c) = (self.input_hw.0, self.input_hw.1, 3);
        self.layers
            .iter()
            .map(|l| {
                let g = ConvGeom {
                    h,
                    w,
                    c,
                    kernel: l.kernel,
                    stride: l.stride,
                    pad: l.pad,
                };
                (h, w) = g.out_hw();
                c = l.out_channels;
                g
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("encoder needs at least one conv layer".into()));
        }
        let (mut h, mut w) = self.input_hw;
        for l in &self.layers {
            if l.kernel == 0 || l.stride == 0 || l.out_channels == 0 {
                return Err(Error::Config(format!("degenerate conv layer {l:?}")));
            }
            if h + 2 * l.pad < l.kernel || w + 2 * l.pad < l.kernel {
                return Err(Error::Config(format!(
                    "encoder input {:?} too small for its layers",
                    self.input_hw
                )));
            }
            (h, w) = ((h + 2 * l.pad - l.kernel) / l.stride + 1, (w + 2 * l.pad - l.kernel) / l.stride + 1);
        }
        Ok(())
    }
}

/// A length-S visual structural feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VsfVector(pub Vec<f32>);

impl VsfVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_row(&self) -> Array2<f64> {
        Array2::from_shape_fn((1, self.0.len()), |(_, j)| self.0[j] as f64)
    }

    pub fn cosine(&self, other: &VsfVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(&a, &b)| a as f64 * b as f64).sum();
        let na: f64 = self.0.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = other.0.iter().map(|&b| (b as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }
}

/// Vision encoder: architecture, weights and where they came from.
#[derive(Debug, Clone)]
pub struct EncoderHandle {
    arch: EncoderArch,
    weights: Vec<(Array2<f64>, Array2<f64>)>,
    source: Option<PathBuf>,
    trainable: bool,
}

impl EncoderHandle {
    /// He-initialized weights drawn from `seed`.
    pub fn init(arch: EncoderArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let geoms = arch.geometries();
        let weights = arch
            .layers
            .iter()
            .zip(&geoms)
            .enumerate()
            .map(|(i, (l, g))| {
                let mut r = rng(derive_seed(seed, &format!("encoder/{i}")));
                let fan_in = g.patch_len();
                (
                    he_normal(fan_in, l.out_channels, fan_in, &mut r),
                    Array2::zeros((1, l.out_channels)),
                )
            })
            .collect();
        Ok(EncoderHandle {
            arch,
            weights,
            source: None,
            trainable: false,
        })
    }

    pub fn arch(&self) -> &EncoderArch {
        &self.arch
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    /// SHA-256 over the architecture and every weight.
    pub fn weights_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.arch).expect("arch serializes"));
        for (w, b) in &self.weights {
            for v in w.iter().chain(b.iter()) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Backbone id qualified by a weights fingerprint; used for staleness checks.
    pub fn id(&self) -> String {
        format!("{}@{}", self.arch.id, &self.weights_digest()[..16])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let arch = serde_json::to_vec(&self.arch).expect("arch serializes");
        let mut body = Vec::new();
        body.extend_from_slice(WEIGHTS_MAGIC);
        body.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        body.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        body.extend_from_slice(&arch);
        for (w, b) in &self.weights {
            for v in w.iter().chain(b.iter()) {
                body.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&body);
        body.extend_from_slice(&digest);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let fail = |msg: &str| Error::EncoderLoad {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        let bytes = fs::read(path).map_err(|e| fail(&e.to_string()))?;
        if bytes.len() < 12 + 32 || &bytes[..4] != WEIGHTS_MAGIC {
            return Err(fail("not an encoder weights file"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(fail("checksum mismatch"));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != WEIGHTS_VERSION {
            return Err(fail(&format!("unsupported version {version}")));
        }
        let alen = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
        let arch_bytes = body.get(12..12 + alen).ok_or_else(|| fail("truncated header"))?;
        let arch: EncoderArch =
            serde_json::from_slice(arch_bytes).map_err(|e| fail(&format!("bad header: {e}")))?;
        arch.validate().map_err(|e| fail(&e.to_string()))?;
        let mut floats = body[12 + alen..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut weights = Vec::new();
        for (l, g) in arch.layers.iter().zip(arch.geometries()) {
            let mut take = |r, c| -> Result<Array2<f64>> {
                let v: Vec<f64> = floats.by_ref().take(r * c).collect();
                if v.len() != r * c {
                    return Err(fail("truncated weights"));
                }
                Ok(Array2::from_shape_vec((r, c), v).unwrap())
            };
            let w = take(g.patch_len(), l.out_channels)?;
            let b = take(1, l.out_channels)?;
            weights.push((w, b));
        }
        if floats.next().is_some() || (body.len() - 12 - alen) % 8 != 0 {
            return Err(fail("trailing bytes"));
        }
        Ok(EncoderHandle {
            arch,
            weights,
            source: Some(path.to_path_buf()),
            trainable: false,
        })
    }

    /// Normalized `(h·w) × 3` input, nearest-neighbour resampled to the
    /// encoder's input size when needed.
    pub fn preprocess(&self, img: &ImageBuffer) -> Array2<f64> {
        let (h, w) = self.arch.input_hw;
        let (ih, iw) = (img.height() as usize, img.width() as usize);
        Array2::from_shape_fn((h * w, 3), |(p, c)| {
            let (y, x) = (p / w, p % w);
            let sy = (y * ih / h) as u32;
            let sx = (x * iw / w) as u32;
            let px = img.pixel(sx, sy);
            let v = [px.0, px.1, px.2][c] as f64 / 255.0;
            (v - IMAGENET_MEAN[c]) / IMAGENET_STD[c]
        })
    }

    /// Pooled last-layer features of one image, computed in f64 and
    /// rounded to f32.
    pub fn encode_image(&self, img: &ImageBuffer) -> VsfVector {
        let mut x = self.preprocess(img);
        for ((w, b), g) in self.weights.iter().zip(self.arch.geometries()) {
            let mut y = im2col(&x, &g).dot(w);
            y += b;
            y.mapv_inplace(|v| v.max(0.0));
            x = y;
        }
        let pooled = x.mean_axis(Axis(0)).expect("non-empty feature map");
        VsfVector(pooled.iter().map(|&v| v as f32).collect())
    }

    pub fn encode_batch(&self, imgs: &[ImageBuffer], exec: Exec) -> Vec<VsfVector> {
        exec.map(imgs, |img| self.encode_image(img))
    }

    /// Copies the weights into `store` under `prefix` for finetuning.
    pub fn register(&self, store: &mut ParamStore, prefix: &str) -> Result<TapeEncoder> {
        let ids = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, (w, b))| {
                Ok((
                    store.add(&format!("{prefix}.{i}.w"), w.clone(), LrGroup::Vision)?,
                    store.add(&format!("{prefix}.{i}.b"), b.clone(), LrGroup::Vision)?,
                ))
            })
            .collect::<Result<_>>()?;
        if !self.trainable {
            store.set_frozen_prefix(&format!("{prefix}."), true);
        }
        Ok(TapeEncoder {
            arch: self.arch.clone(),
            ids,
        })
    }
}

/// Encoder whose weights live in a [`ParamStore`], differentiable on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeEncoder {
    arch: EncoderArch,
    ids: Vec<(ParamId, ParamId)>,
}

impl TapeEncoder {
    pub fn arch(&self) -> &EncoderArch {
        &self.arch
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids.iter().flat_map(|&(w, b)| [w, b])
    }

    /// `1 × S` features for a preprocessed image.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Arc<Array2<f64>>) -> Var {
        let mut h = tape.constant((*x).clone());
        for (&(w, b), g) in self.ids.iter().zip(self.arch.geometries()) {
            let cols = tape.im2col(h, g);
            let w = tape.param(store, w);
            let b = tape.param(store, b);
            let y = tape.matmul(cols, w);
            let y = tape.add_row(y, b);
            h = tape.relu(y);
        }
        tape.mean_rows(h)
    }

    /// Snapshot of the current weights as a plain handle.
    pub fn snapshot(&self, store: &ParamStore) -> EncoderHandle {
        EncoderHandle {
            arch: self.arch.clone(),
            weights: self
                .ids
                .iter()
                .map(|&(w, b)| (store.get(w).clone(), store.get(b).clone()))
                .collect(),
            source: None,
            trainable: true,
        }
    }
}
