//! CIFAR-10 binary batches: records of one label byte followed by 3072
//! channel-planar pixel bytes (1024 red, 1024 green, 1024 blue).

use std::path::{Path, PathBuf};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const PIXELS: usize = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;
pub const RECORD_BYTES: usize = PIXELS + 1;
pub const CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] =
    ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub label: u8,
    pub pixels: Box<[u8; PIXELS]>,
}

impl Sample {
    /// Pixels scaled by 1/255 into a 3x32x32 tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new((IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE), self.pixels.iter().map(|&p| pixel_value(p)).collect())
            .expect("fixed image shape")
    }
}

#[inline]
pub fn pixel_value(p: u8) -> f32 {
    p as f32 / 255.0
}

pub fn parse_cifar10(bytes: &[u8]) -> Result<Vec<Sample>> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::Dataset(format!(
            "{} bytes is not a whole number of {RECORD_BYTES}-byte records",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0];
            if label as usize >= CLASSES {
                return Err(Error::Dataset(format!("record {i} has label {label}")));
            }
            let pixels: Box<[u8; PIXELS]> = rec[1..].to_vec().into_boxed_slice().try_into().expect("record length");
            Ok(Sample { label, pixels })
        })
        .collect()
}

pub fn load_cifar10(path: &Path) -> Result<Vec<Sample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    parse_cifar10(&bytes)
}

pub fn encode_cifar10(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * RECORD_BYTES);
    for s in samples {
        out.push(s.label);
        out.extend_from_slice(&s.pixels[..]);
    }
    out
}

/// The standard file set inside a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetDir {
    root: PathBuf,
}

impl DatasetDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn test_path(&self) -> PathBuf {
        self.root.join(TEST_FILE)
    }

    pub fn exists(&self) -> bool {
        self.test_path().is_file()
    }

    pub fn load_test(&self) -> Result<Vec<Sample>> {
        load_cifar10(&self.test_path())
    }

    /// All training batches present, in file order.
    pub fn load_train(&self) -> Result<Vec<Sample>> {
        let mut all = Vec::new();
        for name in TRAIN_FILES {
            let p = self.root.join(name);
            if p.is_file() {
                all.extend(load_cifar10(&p)?);
            }
        }
        if all.is_empty() {
            return Err(Error::Dataset(format!("no training batches in {}", self.root.display())));
        }
        Ok(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend(std::iter::repeat_n(fill, PIXELS));
        r
    }

    #[test]
    fn parses_records() {
        let mut bytes = record(7, 255);
        bytes.extend(record(0, 0));
        let s = parse_cifar10(&bytes).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, 7);
        let t = s[0].to_tensor();
        assert_eq!(t.shape(), (3, 32, 32));
        assert_eq!(t.at(2, 31, 31), 1.0);
        assert_eq!(encode_cifar10(&s), bytes);
    }

    #[test]
    fn full_batch_size() {
        assert_eq!(10_000 * RECORD_BYTES, 30_730_000);
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = record(1, 3);
        bytes.pop();
        assert!(matches!(parse_cifar10(&bytes), Err(Error::Dataset(_))));
        assert!(matches!(parse_cifar10(&record(10, 0)), Err(Error::Dataset(_))));
    }

    #[test]
    fn channel_planar_layout() {
        let mut r = record(3, 0);
        r[1] = 10; // red (0,0)
        r[1 + 1024] = 20; // green (0,0)
        r[1 + 2048 + 33] = 30; // blue (1,1)
        let t = parse_cifar10(&r).unwrap()[0].to_tensor();
        assert_eq!(t.at(0, 0, 0), 10.0 / 255.0);
        assert_eq!(t.at(1, 0, 0), 20.0 / 255.0);
        assert_eq!(t.at(2, 1, 1), 30.0 / 255.0);
    }
}
