//! End-to-end training of the clip-limit estimator through differentiable
//! CLAHE.
//!
//! Each iteration takes one clean image, degrades it with a random
//! histogram compression and intensity shift, predicts clip limits for a
//! randomly drawn tile grid, enhances the degraded image, and steps Adam on
//! the L1 distance to the clean image.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{clahe_backward, clahe_forward_tape, l1_loss};
use crate::clahe::TileGrid;
use crate::error::{Error, Result};
use crate::estimator::{
    estimator_backward, estimator_forward, preprocess, save_checkpoint, EstimatorParams, ParamGrads,
};
use crate::estimator::{DEFAULT_CHANNELS, DEFAULT_HIDDEN};
use crate::imagio::{quantize, read_image, resize_bilinear, rgb_to_ycbcr, ImageFormat, Plane};

pub const ALPHA_LIMITS: (f64, f64) = (-0.5, 0.9);
pub const BETA_LIMITS: (f64, f64) = (-60.0, 60.0);

/// Histogram compression then intensity shift around mid-gray:
/// `clamp(round(128 + (1 - alpha) * (y - 128) + beta), 0, 255)`.
pub fn augment(y: &Plane, alpha: f64, beta: f64) -> Result<Plane> {
    if !(ALPHA_LIMITS.0..=ALPHA_LIMITS.1).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside [-0.5, 0.9]"
        )));
    }
    if !(BETA_LIMITS.0..=BETA_LIMITS.1).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} outside [-60, 60]"
        )));
    }
    let scale = 1.0 - alpha;
    let mut out = y.clone();
    for v in out.data_mut() {
        *v = quantize(128.0 + scale * (f64::from(*v) - 128.0) + beta);
    }
    Ok(out)
}

pub fn default_grid_choices() -> Vec<TileGrid> {
    [1, 2, 4, 8, 16]
        .into_iter()
        .map(|n| TileGrid::square(n).expect("valid"))
        .collect()
}

pub fn sample_tile_grid(rng: &mut impl Rng, choices: &[TileGrid]) -> TileGrid {
    choices[rng.random_range(0..choices.len())]
}

/// Adam moments for a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient leaves both the
/// parameters and the state untouched.
pub fn adam_step(
    params: &mut EstimatorParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !params.same_shape(grads) || state.m.len() != params.param_count() {
        return Err(Error::InvalidParameter(
            "adam: parameter, gradient and state shapes differ".into(),
        ));
    }
    if grads
        .tensors()
        .iter()
        .any(|t| t.iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correct1 = 1.0 - b1.powi(t);
    let correct2 = 1.0 - b2.powi(t);
    let grad_iter = grads.tensors().into_iter().flat_map(|t| t.iter().copied());
    let param_iter = params.tensors_mut().into_iter().flat_map(|t| t.iter_mut());
    for (((theta, g), m), v) in param_iter
        .zip(grad_iter)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *theta -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub data_dir: PathBuf,
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
    pub grid_choices: Vec<TileGrid>,
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Clean images are resized to `image_size x image_size`.
    pub image_size: usize,
    pub checkpoint_out: Option<PathBuf>,
    pub log_every: usize,
    pub channels: usize,
    pub hidden: usize,
}

impl TrainConfig {
    pub const BATCH: usize = 1;

    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        TrainConfig {
            data_dir: data_dir.into(),
            iterations: 17_680,
            lr: 1e-4,
            seed: 0,
            grid_choices: default_grid_choices(),
            alpha_range: ALPHA_LIMITS,
            beta_range: BETA_LIMITS,
            image_size: 640,
            checkpoint_out: None,
            log_every: 1,
            channels: DEFAULT_CHANNELS,
            hidden: DEFAULT_HIDDEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {}", self.lr));
        }
        if self.grid_choices.is_empty() {
            return bad("no tile grids to sample from".into());
        }
        let (a0, a1) = self.alpha_range;
        if !(a0 <= a1 && a0 >= ALPHA_LIMITS.0 && a1 <= ALPHA_LIMITS.1) {
            return bad(format!("alpha range [{a0}, {a1}] not inside [-0.5, 0.9]"));
        }
        let (b0, b1) = self.beta_range;
        if !(b0 <= b1 && b0 >= BETA_LIMITS.0 && b1 <= BETA_LIMITS.1) {
            return bad(format!("beta range [{b0}, {b1}] not inside [-60, 60]"));
        }
        if self.image_size == 0 || self.log_every == 0 || self.channels == 0 || self.hidden == 0 {
            return bad("image size, log interval and network widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRecord {
    /// 1-based.
    pub iteration: usize,
    pub loss: f64,
    pub grid: TileGrid,
    pub millis: f64,
}

impl TrainLogRecord {
    pub const CSV_HEADER: &'static str = "iter,loss,grid_h,grid_w,ms";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.6},{},{},{:.3}",
            self.iteration,
            self.loss,
            self.grid.rows(),
            self.grid.cols(),
            self.millis
        )
    }
}

/// Clean Y planes of every decodable PNG/PPM/PGM directly inside `dir`,
/// in file-name order, each resized to `size x size`. Undecodable files are
/// skipped with a warning.
pub fn load_dataset(dir: &Path, size: usize) -> Result<Vec<Plane>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p).is_some())
        .collect();
    paths.sort();
    let mut planes = Vec::with_capacity(paths.len());
    for path in paths {
        match read_image(&path) {
            Ok(img) => planes.push(resize_plane(&rgb_to_ycbcr(&img).0, size, size)),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if planes.is_empty() {
        return Err(Error::EmptyDataset(dir.to_path_buf()));
    }
    Ok(planes)
}

pub fn resize_plane(p: &Plane, w: usize, h: usize) -> Plane {
    if p.dims() == (w, h) {
        return p.clone();
    }
    resize_bilinear(&p.to_real(), w, h).to_plane()
}

/// Degradation and grid drawn for one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub image: usize,
    pub alpha: f64,
    pub beta: f64,
    pub grid: TileGrid,
}

/// Training state over an in-memory set of clean planes.
pub struct Trainer {
    cfg: TrainConfig,
    images: Vec<Plane>,
    params: EstimatorParams,
    adam: AdamState,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    iteration: usize,
}

/// Separates the data stream from the weight initialization stream.
const DATA_STREAM: u64 = 0x5EED_DA7A;

impl Trainer {
    pub fn new(cfg: TrainConfig, images: Vec<Plane>) -> Result<Self> {
        cfg.validate()?;
        if images.is_empty() {
            return Err(Error::EmptyDataset(cfg.data_dir.clone()));
        }
        let params = EstimatorParams::init(cfg.channels, cfg.hidden, cfg.seed);
        let adam = AdamState::new(params.param_count());
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DATA_STREAM);
        let order = (0..images.len()).collect();
        Ok(Trainer {
            cfg,
            images,
            params,
            adam,
            rng,
            order,
            cursor: 0,
            iteration: 0,
        })
    }

    pub fn params(&self) -> &EstimatorParams {
        &self.params
    }

    pub fn into_params(self) -> EstimatorParams {
        self.params
    }

    fn next_sample(&mut self) -> Sample {
        if self.cursor == 0 {
            self.order.shuffle(&mut self.rng);
        }
        let image = self.order[self.cursor];
        self.cursor = (self.cursor + 1) % self.order.len();
        let (a0, a1) = self.cfg.alpha_range;
        let (b0, b1) = self.cfg.beta_range;
        let alpha = self.rng.random_range(a0..=a1);
        let beta = self.rng.random_range(b0..=b1);
        let grid = sample_tile_grid(&mut self.rng, &self.cfg.grid_choices);
        Sample {
            image,
            alpha,
            beta,
            grid,
        }
    }

    /// Loss and parameter gradients for one sample, without updating.
    pub fn loss_and_grads(&self, sample: &Sample) -> Result<(f64, ParamGrads)> {
        let clean = &self.images[sample.image];
        let degraded = augment(clean, sample.alpha, sample.beta)?;
        let (clip, cache) = estimator_forward(&preprocess(&degraded), sample.grid, &self.params)?;
        let (enhanced, tape) = clahe_forward_tape(&degraded, sample.grid, &clip)?;
        let (loss, d_out) = l1_loss(&enhanced, clean)?;
        let d_clip = clahe_backward(&tape, &d_out)?;
        let grads = estimator_backward(&cache, &self.params, &d_clip)?;
        Ok((loss, grads))
    }

    /// Runs one iteration. A non-finite gradient skips the update.
    pub fn step(&mut self) -> Result<TrainLogRecord> {
        let start = Instant::now();
        let sample = self.next_sample();
        self.iteration += 1;
        let (loss, grads) = self.loss_and_grads(&sample)?;
        match adam_step(&mut self.params, &grads, &mut self.adam, self.cfg.lr) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient) => {
                log::warn!(
                    "iteration {}: non-finite gradient, update skipped",
                    self.iteration
                );
            }
            Err(e) => return Err(e),
        }
        Ok(TrainLogRecord {
            iteration: self.iteration,
            loss,
            grid: sample.grid,
            millis: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Trains from `cfg.data_dir`, reporting every `log_every`-th record (and
/// the last one) to `on_log`, then writes the checkpoint if configured.
pub fn train(cfg: &TrainConfig, on_log: impl FnMut(&TrainLogRecord)) -> Result<EstimatorParams> {
    cfg.validate()?;
    let images = load_dataset(&cfg.data_dir, cfg.image_size)?;
    train_on(cfg, images, on_log)
}

pub fn train_on(
    cfg: &TrainConfig,
    images: Vec<Plane>,
    mut on_log: impl FnMut(&TrainLogRecord),
) -> Result<EstimatorParams> {
    let mut trainer = Trainer::new(cfg.clone(), images)?;
    for i in 1..=cfg.iterations {
        let record = trainer.step()?;
        if i % cfg.log_every == 0 || i == cfg.iterations {
            on_log(&record);
        }
    }
    let params = trainer.into_params();
    if let Some(path) = &cfg.checkpoint_out {
        save_checkpoint(&params, path)?;
    }
    Ok(params)
}
