//! Fixtures shared by the benchmarks: seeded frames and a ready-made
//! training sample, so every bench measures the same inputs.

use iaclahe::estimator::{estimator_forward, preprocess, ActCache, EstimatorParams};
use iaclahe::synth::synthetic_scene;
use iaclahe::training::augment;
use iaclahe::{ClipLimitMap, Plane, TileGrid};

pub const FULL_HD: (usize, usize) = (1920, 1080);
pub const TRAIN_SIZE: usize = 640;

pub fn frame(width: usize, height: usize) -> Plane {
    synthetic_scene(0, width, height).expect("non-empty frame")
}

/// One training example: the clean target, its degraded input, and the
/// estimator state for it on `grid`.
pub struct TrainingSample {
    pub clean: Plane,
    pub degraded: Plane,
    pub grid: TileGrid,
    pub params: EstimatorParams,
    pub clip: ClipLimitMap,
    pub cache: ActCache,
}

impl TrainingSample {
    pub fn new(grid: TileGrid) -> Self {
        let clean = frame(TRAIN_SIZE, TRAIN_SIZE);
        let degraded = augment(&clean, 0.7, -40.0).expect("in range");
        let params = EstimatorParams::default_init(0);
        let (clip, cache) =
            estimator_forward(&preprocess(&degraded), grid, &params).expect("valid input");
        TrainingSample {
            clean,
            degraded,
            grid,
            params,
            clip,
            cache,
        }
    }
}
