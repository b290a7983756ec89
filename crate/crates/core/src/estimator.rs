//! Clip-limit estimator.
//!
//! ```text
//! Y (256x256, [0,1])
//!   -> conv 3x3, K channels, stride 2, pad 1, no bias -> hard-swish
//!   -> conv 1x1, 1 channel, no bias                    = feat (128x128)
//! local  = sigmoid(feat), bilinearly resized to the tile grid
//! global = softplus(fc2(swish(fc1(mean(feat)))))
//! C      = global * local
//! ```
//!
//! The local map is computed once at 128x128; only the final resize depends
//! on the requested grid.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ClipGrad;
use crate::clahe::{ClipLimitMap, TileGrid};
use crate::error::{Error, Result};
use crate::imagio::{resize_bilinear, Plane, RealPlane, ResizeWeights};

pub const INPUT_SIZE: usize = 256;
pub const FEATURE_SIZE: usize = INPUT_SIZE / 2;
pub const DEFAULT_CHANNELS: usize = 16;
pub const DEFAULT_HIDDEN: usize = 16;

const CHECKPOINT_MAGIC: &[u8; 4] = b"IACL";
const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_HEADER_LEN: usize = 16;

/// Weights of the estimator. Gradients use the same layout, see [`ParamGrads`].
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorParams {
    channels: usize,
    hidden: usize,
    /// `[channel][ky][kx]`
    pub conv3x3: Vec<f64>,
    pub conv1x1: Vec<f64>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: f64,
}

pub type ParamGrads = EstimatorParams;

pub fn param_count(channels: usize, hidden: usize) -> usize {
    9 * channels + channels + 2 * hidden + hidden + 1
}

impl EstimatorParams {
    pub fn zeros(channels: usize, hidden: usize) -> Self {
        EstimatorParams {
            channels,
            hidden,
            conv3x3: vec![0.0; 9 * channels],
            conv1x1: vec![0.0; channels],
            fc1_w: vec![0.0; hidden],
            fc1_b: vec![0.0; hidden],
            fc2_w: vec![0.0; hidden],
            fc2_b: 0.0,
        }
    }

    /// Uniform `±sqrt(6 / fan_in)` weights from a seeded generator, zero biases.
    pub fn init(channels: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = (6.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let conv3x3 = uniform(9 * channels, 9);
        let conv1x1 = uniform(channels, channels);
        let fc1_w = uniform(hidden, 1);
        let fc2_w = uniform(hidden, hidden);
        EstimatorParams {
            channels,
            hidden,
            conv3x3,
            conv1x1,
            fc1_w,
            fc1_b: vec![0.0; hidden],
            fc2_w,
            fc2_b: 0.0,
        }
    }

    pub fn default_init(seed: u64) -> Self {
        EstimatorParams::init(DEFAULT_CHANNELS, DEFAULT_HIDDEN, seed)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        param_count(self.channels, self.hidden)
    }

    /// All scalars in checkpoint order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend(&self.conv3x3);
        flat.extend(&self.conv1x1);
        flat.extend(&self.fc1_w);
        flat.extend(&self.fc1_b);
        flat.extend(&self.fc2_w);
        flat.push(self.fc2_b);
        flat
    }

    pub fn from_flat(channels: usize, hidden: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != param_count(channels, hidden) {
            return Err(Error::InvalidParameter(format!(
                "{} scalars for an estimator with {channels} channels and {hidden} hidden units",
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        Ok(EstimatorParams {
            channels,
            hidden,
            conv3x3: take(9 * channels),
            conv1x1: take(channels),
            fc1_w: take(hidden),
            fc1_b: take(hidden),
            fc2_w: take(hidden),
            fc2_b: take(1)[0],
        })
    }

    /// Mutable views of every tensor, in checkpoint order.
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.conv3x3,
            &mut self.conv1x1,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            std::slice::from_mut(&mut self.fc2_b),
        ]
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.conv3x3,
            &self.conv1x1,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            std::slice::from_ref(&self.fc2_b),
        ]
    }

    pub fn same_shape(&self, other: &EstimatorParams) -> bool {
        self.channels == other.channels && self.hidden == other.hidden
    }
}

/// Forward activations kept for [`estimator_backward`].
#[derive(Clone, Debug)]
pub struct ActCache {
    pub input: Vec<f64>,
    /// 3x3 conv outputs before hard-swish, `[channel][y][x]`.
    pub conv_pre: Vec<f64>,
    pub conv_act: Vec<f64>,
    pub feat: Vec<f64>,
    pub local: Vec<f64>,
    /// `local` resized to the tile grid.
    pub local_grid: Vec<f64>,
    pub pooled: f64,
    pub fc1_pre: Vec<f64>,
    pub fc1_act: Vec<f64>,
    pub fc2_pre: f64,
    pub global: f64,
    pub grid: TileGrid,
    pub to_grid: ResizeWeights,
}

/// Resizes a plane to 256x256 and scales it to `[0, 1]`.
pub fn preprocess(y: &Plane) -> RealPlane {
    let resized = resize_bilinear(&y.to_real(), INPUT_SIZE, INPUT_SIZE);
    let data = resized.into_data().into_iter().map(|v| v / 255.0).collect();
    RealPlane::new(INPUT_SIZE, INPUT_SIZE, data).expect("finite")
}

pub fn hard_swish(x: f64) -> f64 {
    x * (x + 3.0).clamp(0.0, 6.0) / 6.0
}

pub fn hard_swish_grad(x: f64) -> f64 {
    if x <= -3.0 {
        0.0
    } else if x < 3.0 {
        (2.0 * x + 3.0) / 6.0
    } else {
        1.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

fn swish_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

pub fn estimator_forward(
    x: &RealPlane,
    g: TileGrid,
    params: &EstimatorParams,
) -> Result<(ClipLimitMap, ActCache)> {
    if x.dims() != (INPUT_SIZE, INPUT_SIZE) {
        return Err(Error::DimensionMismatch {
            expected: (INPUT_SIZE, INPUT_SIZE),
            actual: x.dims(),
        });
    }
    let k_count = params.channels;
    let n = FEATURE_SIZE;
    let input = x.data();

    let mut conv_pre = vec![0.0; k_count * n * n];
    for (k, out) in conv_pre.chunks_exact_mut(n * n).enumerate() {
        let w = &params.conv3x3[k * 9..][..9];
        for oy in 0..n {
            for ox in 0..n {
                let mut acc = 0.0;
                for ky in 0..3 {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= INPUT_SIZE as isize {
                        continue;
                    }
                    let row = &input[iy as usize * INPUT_SIZE..][..INPUT_SIZE];
                    for kx in 0..3 {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix >= 0 && ix < INPUT_SIZE as isize {
                            acc += w[ky * 3 + kx] * row[ix as usize];
                        }
                    }
                }
                out[oy * n + ox] = acc;
            }
        }
    }
    let conv_act: Vec<f64> = conv_pre.iter().map(|&z| hard_swish(z)).collect();

    let mut feat = vec![0.0; n * n];
    for (k, act) in conv_act.chunks_exact(n * n).enumerate() {
        let w = params.conv1x1[k];
        for (f, &a) in feat.iter_mut().zip(act) {
            *f += w * a;
        }
    }
    let local: Vec<f64> = feat.iter().map(|&f| sigmoid(f)).collect();
    let to_grid = ResizeWeights::new(n, n, g.cols(), g.rows());
    let local_grid = to_grid.apply(&local);

    let pooled = feat.iter().sum::<f64>() / (n * n) as f64;
    let fc1_pre: Vec<f64> = params
        .fc1_w
        .iter()
        .zip(&params.fc1_b)
        .map(|(w, b)| w * pooled + b)
        .collect();
    let fc1_act: Vec<f64> = fc1_pre.iter().map(|&z| swish(z)).collect();
    let fc2_pre = params
        .fc2_w
        .iter()
        .zip(&fc1_act)
        .map(|(w, a)| w * a)
        .sum::<f64>()
        + params.fc2_b;
    let global = softplus(fc2_pre);

    let values = local_grid
        .iter()
        .map(|&l| (global * l).max(f64::MIN_POSITIVE))
        .collect();
    let clip = ClipLimitMap::new(g, values)?;
    let cache = ActCache {
        input: input.to_vec(),
        conv_pre,
        conv_act,
        feat,
        local,
        local_grid,
        pooled,
        fc1_pre,
        fc1_act,
        fc2_pre,
        global,
        grid: g,
        to_grid,
    };
    Ok((clip, cache))
}

/// Reverse-mode gradients of `sum(dC * C)` with respect to every parameter.
pub fn estimator_backward(
    cache: &ActCache,
    params: &EstimatorParams,
    dc: &ClipGrad,
) -> Result<ParamGrads> {
    if dc.grid != cache.grid {
        return Err(Error::GridMismatch {
            expected: cache.grid.to_string(),
            actual: dc.grid.to_string(),
        });
    }
    let n = FEATURE_SIZE;
    let k_count = params.channels;
    if cache.conv_pre.len() != k_count * n * n || cache.fc1_pre.len() != params.hidden {
        return Err(Error::InvalidParameter(
            "activation cache does not match parameter shapes".into(),
        ));
    }
    let mut grads = EstimatorParams::zeros(k_count, params.hidden);

    // C = global * local_grid
    let d_global: f64 = dc
        .values
        .iter()
        .zip(&cache.local_grid)
        .map(|(d, l)| d * l)
        .sum();
    let d_local_grid: Vec<f64> = dc.values.iter().map(|d| d * cache.global).collect();
    let d_local = cache.to_grid.transpose(&d_local_grid);

    // Global branch.
    let d_fc2 = d_global * sigmoid(cache.fc2_pre);
    grads.fc2_b = d_fc2;
    let mut d_pooled = 0.0;
    for h in 0..params.hidden {
        grads.fc2_w[h] = d_fc2 * cache.fc1_act[h];
        let d_fc1 = d_fc2 * params.fc2_w[h] * swish_grad(cache.fc1_pre[h]);
        grads.fc1_w[h] = d_fc1 * cache.pooled;
        grads.fc1_b[h] = d_fc1;
        d_pooled += d_fc1 * params.fc1_w[h];
    }

    let pool_share = d_pooled / (n * n) as f64;
    let d_feat: Vec<f64> = d_local
        .iter()
        .zip(&cache.local)
        .map(|(d, s)| d * s * (1.0 - s) + pool_share)
        .collect();

    for k in 0..k_count {
        let act = &cache.conv_act[k * n * n..][..n * n];
        let pre = &cache.conv_pre[k * n * n..][..n * n];
        grads.conv1x1[k] = d_feat.iter().zip(act).map(|(d, a)| d * a).sum();
        let w1 = params.conv1x1[k];
        let mut dw = [0.0; 9];
        for oy in 0..n {
            for ox in 0..n {
                let d_pre = d_feat[oy * n + ox] * w1 * hard_swish_grad(pre[oy * n + ox]);
                if d_pre == 0.0 {
                    continue;
                }
                for ky in 0..3 {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= INPUT_SIZE as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix >= 0 && ix < INPUT_SIZE as isize {
                            dw[ky * 3 + kx] +=
                                d_pre * cache.input[iy as usize * INPUT_SIZE + ix as usize];
                        }
                    }
                }
            }
        }
        grads.conv3x3[k * 9..][..9].copy_from_slice(&dw);
    }
    Ok(grads)
}

pub fn save_checkpoint(params: &EstimatorParams, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<EstimatorParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// `"IACL"`, then little-endian `u32` version, channels and hidden width,
/// then every parameter as a little-endian `f64` in [`EstimatorParams::to_flat`] order.
pub fn encode_checkpoint(params: &EstimatorParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(CHECKPOINT_HEADER_LEN + 8 * params.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.channels as u32).to_le_bytes());
    out.extend_from_slice(&(params.hidden as u32).to_le_bytes());
    for v in params.to_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<EstimatorParams> {
    if bytes.len() < CHECKPOINT_HEADER_LEN {
        return Err(Error::CorruptCheckpoint(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let version = word(4);
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::CorruptCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let (channels, hidden) = (word(8), word(12));
    if channels == 0 || hidden == 0 || channels > 4096 || hidden > 4096 {
        return Err(Error::CorruptCheckpoint(format!(
            "implausible dimensions {channels}x{hidden}"
        )));
    }
    let body = &bytes[CHECKPOINT_HEADER_LEN..];
    let expected = 8 * param_count(channels, hidden);
    if body.len() != expected {
        return Err(Error::CorruptCheckpoint(format!(
            "payload of {} bytes, expected {expected}",
            body.len()
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::CorruptCheckpoint("non-finite parameter".into()));
    }
    EstimatorParams::from_flat(channels, hidden, &flat)
}
