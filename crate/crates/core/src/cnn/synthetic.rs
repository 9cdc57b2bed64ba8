//! Procedural stand-in for CIFAR-10, written in the same binary layout.
//!
//! Each class is an oriented grating with a class-specific frequency and
//! colour cast, placed under a random Gaussian window on a random
//! background and buried in pixel noise. Image `i` of a split depends only
//! on `(seed, i)`.

use std::f32::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::cifar::{encode_cifar10, Sample, CLASSES, IMAGE_SIDE, PIXELS, TEST_FILE, TRAIN_FILES};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    /// Pixel noise standard deviation on the 0..1 scale.
    pub noise: f32,
    /// Range of the grating contrast.
    pub contrast: (f32, f32),
    /// Random rotation added to each class orientation, radians.
    pub orientation_jitter: f32,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams { noise: 0.18, contrast: (0.15, 0.45), orientation_jitter: 0.45 }
    }
}

const TINTS: [[f32; 3]; 5] = [
    [1.0, 0.55, 0.25],
    [0.3, 0.9, 0.45],
    [0.35, 0.5, 1.0],
    [0.9, 0.85, 0.3],
    [0.8, 0.35, 0.85],
];

fn class_orientation(label: usize) -> f32 {
    (label % 5) as f32 * PI / 5.0
}

fn class_frequency(label: usize) -> f32 {
    if label < 5 {
        0.11
    } else {
        0.19
    }
}

fn class_tint(label: usize) -> [f32; 3] {
    // neighbouring classes share a cast so colour alone is not enough
    TINTS[(label / 2) % 5]
}

/// Image `index` of the split identified by `seed`.
pub fn synthetic_sample(seed: u64, index: u64, params: &SyntheticParams) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let label = (index % CLASSES as u64) as usize;
    let noise = Normal::new(0.0f32, params.noise).expect("finite noise level");

    let theta = class_orientation(label) + rng.gen_range(-params.orientation_jitter..=params.orientation_jitter);
    let freq = class_frequency(label) * rng.gen_range(0.85..1.15f32);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let contrast = rng.gen_range(params.contrast.0..=params.contrast.1);
    let cx = rng.gen_range(9.0..23.0f32);
    let cy = rng.gen_range(9.0..23.0f32);
    let radius = rng.gen_range(5.0..10.0f32);
    let tint = class_tint(label).map(|t| t * rng.gen_range(0.7..1.3f32));
    let background: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.25..0.75f32));
    let (sin_t, cos_t) = theta.sin_cos();

    let mut pixels = Box::new([0u8; PIXELS]);
    let side = IMAGE_SIDE;
    for y in 0..side {
        for x in 0..side {
            let (fx, fy) = (x as f32, y as f32);
            let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
            let window = (-d2 / (2.0 * radius * radius)).exp();
            let wave = (2.0 * PI * freq * (fx * cos_t + fy * sin_t) + phase).sin();
            let g = contrast * window * wave;
            for ch in 0..3 {
                let v = background[ch] + g * tint[ch] + noise.sample(&mut rng);
                pixels[(ch * side + y) * side + x] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    Sample { label: label as u8, pixels }
}

pub fn synthetic_split(seed: u64, start: u64, n: usize, params: &SyntheticParams) -> Vec<Sample> {
    (start..start + n as u64).map(|i| synthetic_sample(seed, i, params)).collect()
}

/// Seeds of the two splits; the test split never overlaps training images.
pub const TRAIN_SEED: u64 = 0x7261_696e;
pub const TEST_SEED: u64 = 0x7465_7374;

/// Writes five training batches of `per_batch` images and one test batch of
/// `test` images in CIFAR-10 binary layout.
pub fn write_synthetic_dataset(dir: &Path, per_batch: usize, test: usize, params: &SyntheticParams) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, samples: &[Sample]| {
        std::fs::write(dir.join(name), encode_cifar10(samples))
    };
    for (b, name) in TRAIN_FILES.iter().enumerate() {
        write(name, &synthetic_split(TRAIN_SEED, (b * per_batch) as u64, per_batch, params))?;
    }
    write(TEST_FILE, &synthetic_split(TEST_SEED, 0, test, params))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let p = SyntheticParams::default();
        let a = synthetic_split(1, 0, 20, &p);
        let b = synthetic_split(1, 0, 20, &p);
        assert_eq!(a, b);
        assert_ne!(synthetic_sample(1, 0, &p), synthetic_sample(2, 0, &p));
        for c in 0..10u8 {
            assert_eq!(a.iter().filter(|s| s.label == c).count(), 2);
        }
        // random access matches sequential generation
        assert_eq!(synthetic_sample(1, 13, &p), a[13]);
    }
}
