use std::io::Write;
use std::path::Path;

use num_traits::{Float, NumCast};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::sequence::{CONV1_KERNELS, CONV2_KERNELS, SLOT_COUNT, TAPS};

pub const INPUT_CHANNELS: usize = 3;
pub const CLASSES: usize = 10;
/// 12 channels of 6x6 after the second pooling stage.
pub const FLAT_FEATURES: usize = CONV2_KERNELS * 6 * 6;

/// 3x3 convolution weights laid out `[kernel][channel][tap]`, tap = 3*dy + dx.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    kernels: usize,
    channels: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Copy> ConvLayer<T> {
    pub fn new(kernels: usize, channels: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != kernels * channels * TAPS || bias.len() != kernels {
            return Err(Error::Shape(format!(
                "conv layer {kernels}x{channels}x3x3 given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(ConvLayer { kernels, channels, weights, bias })
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn weight(&self, k: usize, c: usize, t: usize) -> T {
        self.weights[(k * self.channels + c) * TAPS + t]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }
}

/// Fully connected layer, weights `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f32> {
    outputs: usize,
    inputs: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Copy> DenseLayer<T> {
    pub fn new(outputs: usize, inputs: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != outputs * inputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense layer {outputs}x{inputs} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer { outputs, inputs, weights, bias })
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize) -> T {
        self.weights[o * self.inputs + i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }
}

/// conv1 (10 kernels over RGB) -> conv2 (12 kernels over 10 maps) -> FC(10).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDef<T = f32> {
    pub conv1: ConvLayer<T>,
    pub conv2: ConvLayer<T>,
    pub fc: DenseLayer<T>,
}

impl<T: Float> NetworkDef<T> {
    pub fn new(conv1: ConvLayer<T>, conv2: ConvLayer<T>, fc: DenseLayer<T>) -> Result<Self> {
        let want = [
            ("conv1", conv1.kernels, CONV1_KERNELS, conv1.channels, INPUT_CHANNELS),
            ("conv2", conv2.kernels, CONV2_KERNELS, conv2.channels, CONV1_KERNELS),
            ("fc", fc.outputs, CLASSES, fc.inputs, FLAT_FEATURES),
        ];
        for (name, got_out, out, got_in, inp) in want {
            if got_out != out || got_in != inp {
                return Err(Error::Shape(format!("{name} is {got_out}x{got_in}, expected {out}x{inp}")));
            }
        }
        Ok(NetworkDef { conv1, conv2, fc })
    }

    pub fn zeros() -> Self {
        let z = |n| vec![T::zero(); n];
        NetworkDef {
            conv1: ConvLayer::new(CONV1_KERNELS, INPUT_CHANNELS, z(CONV1_KERNELS * INPUT_CHANNELS * TAPS), z(CONV1_KERNELS))
                .expect("fixed shape"),
            conv2: ConvLayer::new(CONV2_KERNELS, CONV1_KERNELS, z(CONV2_KERNELS * CONV1_KERNELS * TAPS), z(CONV2_KERNELS))
                .expect("fixed shape"),
            fc: DenseLayer::new(CLASSES, FLAT_FEATURES, z(CLASSES * FLAT_FEATURES), z(CLASSES)).expect("fixed shape"),
        }
    }

    /// He-normal weights and zero biases from a seeded stream.
    pub fn he_init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros();
        let fans = [INPUT_CHANNELS * TAPS, CONV1_KERNELS * TAPS, FLAT_FEATURES];
        for (w, fan) in [net.conv1.weights_mut(), net.conv2.weights_mut(), net.fc.weights_mut()].into_iter().zip(fans) {
            let normal = Normal::new(0.0, (2.0 / fan as f64).sqrt()).expect("positive std");
            for v in w.iter_mut() {
                *v = T::from(normal.sample(&mut rng)).expect("representable");
            }
        }
        net
    }

    /// Conv kernels contributing multiplier slots (22 kernels x 9 taps).
    pub fn slot_count(&self) -> usize {
        (self.conv1.kernels + self.conv2.kernels) * TAPS
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Named parameter tensors with their shapes, in file order.
    pub fn tensors(&self) -> [(&'static str, Vec<usize>, &[T]); 6] {
        [
            ("conv1.weight", vec![self.conv1.kernels, self.conv1.channels, 3, 3], &self.conv1.weights[..]),
            ("conv1.bias", vec![self.conv1.kernels], &self.conv1.bias[..]),
            ("conv2.weight", vec![self.conv2.kernels, self.conv2.channels, 3, 3], &self.conv2.weights[..]),
            ("conv2.bias", vec![self.conv2.kernels], &self.conv2.bias[..]),
            ("fc.weight", vec![self.fc.outputs, self.fc.inputs], &self.fc.weights[..]),
            ("fc.bias", vec![self.fc.outputs], &self.fc.bias[..]),
        ]
    }

    /// Mutable parameter tensors in the order of [`NetworkDef::tensors`].
    pub fn parameters_mut(&mut self) -> [&mut [T]; 6] {
        [
            &mut self.conv1.weights[..],
            &mut self.conv1.bias[..],
            &mut self.conv2.weights[..],
            &mut self.conv2.bias[..],
            &mut self.fc.weights[..],
            &mut self.fc.bias[..],
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, v)| v.iter().all(|x| x.is_finite()))
    }

    /// Elementwise conversion to another float type.
    pub fn cast<U: Float>(&self) -> NetworkDef<U> {
        let c = |v: &[T]| v.iter().map(|&x| <U as NumCast>::from(x).expect("float cast")).collect::<Vec<U>>();
        NetworkDef {
            conv1: ConvLayer::new(self.conv1.kernels, self.conv1.channels, c(&self.conv1.weights), c(&self.conv1.bias))
                .expect("same shape"),
            conv2: ConvLayer::new(self.conv2.kernels, self.conv2.channels, c(&self.conv2.weights), c(&self.conv2.bias))
                .expect("same shape"),
            fc: DenseLayer::new(self.fc.outputs, self.fc.inputs, c(&self.fc.weights), c(&self.fc.bias))
                .expect("same shape"),
        }
    }
}

// Weight file:
//   magic "AFPW" | version u32 | tensor count u32
//   per tensor: name length u16 | name | rank u8 | dims u32 x rank | payload offset u64
//   payload: little-endian f32, offsets relative to the payload start
pub const WEIGHTS_MAGIC: [u8; 4] = *b"AFPW";
pub const WEIGHTS_VERSION: u32 = 1;

impl NetworkDef<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.tensors();
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for (name, dims, values) in &tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dims.len() as u8);
            for &d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += 4 * values.len() as u64;
        }
        for (_, _, values) in &tensors {
            for v in values.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(Error::Weights("bad magic".into()));
        }
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Weights(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut table = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Weights("tensor name is not utf-8".into()))?
                .to_owned();
            let rank = r.take(1)?[0] as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let offset = r.u64()?;
            table.push((name, dims, offset));
        }
        let payload = &bytes[r.pos..];
        let expected = Self::zeros();
        let mut values: Vec<Vec<f32>> = Vec::new();
        for (name, dims, _) in expected.tensors() {
            let (_, got_dims, offset) = table
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))?;
            if *got_dims != dims {
                return Err(Error::Shape(format!("{name} has shape {got_dims:?}, expected {dims:?}")));
            }
            let n: usize = dims.iter().product();
            let start = usize::try_from(*offset).map_err(|_| Error::Weights(format!("{name}: offset overflow")))?;
            let data = start
                .checked_add(4 * n)
                .and_then(|end| payload.get(start..end))
                .ok_or_else(|| Error::Weights(format!("{name}: payload truncated")))?;
            let v: Vec<f32> =
                data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{i}] = {}", v[i])));
            }
            values.push(v);
        }
        let mut it = values.into_iter();
        let mut next = || it.next().expect("six tensors");
        let conv1 = ConvLayer::new(CONV1_KERNELS, INPUT_CHANNELS, next(), next())?;
        let conv2 = ConvLayer::new(CONV2_KERNELS, CONV1_KERNELS, next(), next())?;
        let fc = DenseLayer::new(CLASSES, FLAT_FEATURES, next(), next())?;
        let net = NetworkDef::new(conv1, conv2, fc)?;
        debug_assert_eq!(net.slot_count(), SLOT_COUNT);
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Weights(format!("truncated header at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn load_weights(path: &Path) -> Result<NetworkDef<f32>> {
    NetworkDef::load(path)
}
