use rayon::prelude::*;

use super::cifar::{pixel_value, Sample, IMAGE_CHANNELS, IMAGE_SIDE};
use super::network::{ConvLayer, DenseLayer, NetworkDef};
use super::reference::argmax;
use super::tensor::Tensor;
use crate::booth::{MultiplierBank, MultiplierConfig};
use crate::error::{Error, Result};
use crate::fp32::Fp32Word;
use crate::sequence::{AssignmentSequence, TAPS};

/// Valid 3x3 convolution where tap `t` of kernel `k` multiplies through the
/// multiplier `slots[9k + t]`, for every input channel.
///
/// `o(k,y,x) = bias(k) + sum_c sum_t w(k,c,t) * in(c, y+dy_t, x+dx_t)`, the
/// products taken from the slot's multiplier and the sum formed with FP32
/// additions in channel-major, then tap, order.
pub fn conv2d_interleaved(
    input: &Tensor,
    layer: &ConvLayer<f32>,
    slots: &[MultiplierConfig],
    bank: &MultiplierBank,
) -> Result<Tensor> {
    let (c, h, w) = input.shape();
    if c != layer.channels() {
        return Err(Error::Shape(format!("input has {c} channels, layer expects {}", layer.channels())));
    }
    if slots.len() != layer.kernels() * TAPS {
        return Err(Error::Shape(format!("{} slots for {} kernels", slots.len(), layer.kernels())));
    }
    if h < 3 || w < 3 {
        return Err(Error::Shape(format!("{h}x{w} input is smaller than the kernel")));
    }
    debug_assert!(input.all_finite());
    let (oh, ow) = (h - 2, w - 2);
    let npos = oh * ow;
    let data = input.data();
    // products[(c * 9 + t) * npos + pos] for the current kernel
    let mut products = vec![Fp32Word(0); c * TAPS * npos];
    // one batch per slot, covering every channel
    let mut lhs = vec![Fp32Word(0); c * npos];
    let mut rhs = vec![Fp32Word(0); c * npos];
    let mut slot_products = vec![Fp32Word(0); c * npos];
    let mut out = Tensor::zeros((layer.kernels(), oh, ow));
    for k in 0..layer.kernels() {
        for t in 0..TAPS {
            let (dy, dx) = (t / 3, t % 3);
            for ch in 0..c {
                lhs[ch * npos..(ch + 1) * npos].fill(Fp32Word::from_f32(layer.weight(k, ch, t)));
                for y in 0..oh {
                    let row = (ch * h + y + dy) * w + dx;
                    for x in 0..ow {
                        rhs[ch * npos + y * ow + x] = Fp32Word::from_f32(data[row + x]);
                    }
                }
            }
            bank.get(slots[k * TAPS + t]).fp32_multiply_batch(&lhs, &rhs, &mut slot_products);
            for ch in 0..c {
                let base = (ch * TAPS + t) * npos;
                products[base..base + npos].copy_from_slice(&slot_products[ch * npos..(ch + 1) * npos]);
            }
        }
        accumulate(&products, c, npos, layer.bias()[k], &mut out.data_mut()[k * npos..(k + 1) * npos]);
    }
    Ok(out)
}

fn accumulate(products: &[Fp32Word], channels: usize, npos: usize, bias: f32, out: &mut [f32]) {
    for (pos, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        for i in 0..channels * TAPS {
            acc += products[i * npos + pos].to_f32();
        }
        *o = acc + bias;
    }
}

fn dense(input: &[f32], layer: &DenseLayer<f32>) -> Vec<f32> {
    (0..layer.outputs())
        .map(|o| {
            let mut acc = 0.0f32;
            for (i, &x) in input.iter().enumerate() {
                acc += layer.weight(o, i) * x;
            }
            acc + layer.bias()[o]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub logits: Vec<f32>,
    pub label: usize,
}

/// conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> FC, with the conv
/// products routed through the sequence's multipliers.
pub fn infer(
    image: &Tensor,
    net: &NetworkDef<f32>,
    seq: &AssignmentSequence,
    bank: &MultiplierBank,
) -> Result<Inference> {
    if image.shape() != (IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE) {
        return Err(Error::Shape(format!("image shape {:?}", image.shape())));
    }
    let a1 = conv2d_interleaved(image, &net.conv1, seq.conv1(), bank)?.relu().maxpool2();
    head(a1, net, seq, bank)
}

fn head(pool1: Tensor, net: &NetworkDef<f32>, seq: &AssignmentSequence, bank: &MultiplierBank) -> Result<Inference> {
    let a2 = conv2d_interleaved(&pool1, &net.conv2, seq.conv2(), bank)?.relu().maxpool2();
    let logits = dense(a2.data(), &net.fc);
    let label = argmax(&logits);
    Ok(Inference { logits, label })
}

/// Inference for one (network, sequence) pair over many 8-bit images.
///
/// conv1 inputs only take the 256 values `p / 255`, so every conv1 product
/// is tabulated once per slot and channel; the result is identical to
/// [`infer`] on the image tensor.
pub struct Engine<'a> {
    net: &'a NetworkDef<f32>,
    seq: AssignmentSequence,
    bank: &'a MultiplierBank,
    // [(slot * 3 + channel) * 256 + pixel]
    conv1_products: Vec<f32>,
}

impl<'a> Engine<'a> {
    pub fn new(net: &'a NetworkDef<f32>, seq: &AssignmentSequence, bank: &'a MultiplierBank) -> Self {
        let pixels: Vec<Fp32Word> = (0..=255u8).map(|p| Fp32Word::from_f32(pixel_value(p))).collect();
        let mut conv1_products = vec![0.0f32; seq.conv1().len() * IMAGE_CHANNELS * 256];
        let mut weight = vec![Fp32Word(0); 256];
        let mut prod = vec![Fp32Word(0); 256];
        for (slot, &cfg) in seq.conv1().iter().enumerate() {
            let (k, t) = (slot / TAPS, slot % TAPS);
            for ch in 0..IMAGE_CHANNELS {
                weight.fill(Fp32Word::from_f32(net.conv1.weight(k, ch, t)));
                bank.get(cfg).fp32_multiply_batch(&weight, &pixels, &mut prod);
                let base = (slot * IMAGE_CHANNELS + ch) * 256;
                for (d, p) in conv1_products[base..base + 256].iter_mut().zip(&prod) {
                    *d = p.to_f32();
                }
            }
        }
        Engine { net, seq: seq.clone(), bank, conv1_products }
    }

    pub fn sequence(&self) -> &AssignmentSequence {
        &self.seq
    }

    fn conv1(&self, sample: &Sample) -> Tensor {
        let side = IMAGE_SIDE;
        let o = side - 2;
        let layer = &self.net.conv1;
        let mut out = Tensor::zeros((layer.kernels(), o, o));
        let px = &sample.pixels;
        for k in 0..layer.kernels() {
            let bias = layer.bias()[k];
            for y in 0..o {
                for x in 0..o {
                    let mut acc = 0.0f32;
                    for ch in 0..IMAGE_CHANNELS {
                        for t in 0..TAPS {
                            let p = px[(ch * side + y + t / 3) * side + x + t % 3] as usize;
                            acc += self.conv1_products[((k * TAPS + t) * IMAGE_CHANNELS + ch) * 256 + p];
                        }
                    }
                    out.set(k, y, x, acc + bias);
                }
            }
        }
        out
    }

    pub fn infer(&self, sample: &Sample) -> Result<Inference> {
        let pool1 = self.conv1(sample).relu().maxpool2();
        head(pool1, self.net, &self.seq, self.bank)
    }

    pub fn predict(&self, sample: &Sample) -> usize {
        self.infer(sample).expect("fixed network shapes").label
    }

    /// Correct predictions over `samples`, images evaluated in parallel.
    pub fn correct(&self, samples: &[Sample]) -> usize {
        samples.par_iter().filter(|s| self.predict(s) == s.label as usize).count()
    }

    pub fn predictions(&self, samples: &[Sample]) -> Vec<usize> {
        samples.par_iter().map(|s| self.predict(s)).collect()
    }
}

/// Percentage of `samples` whose argmax matches the label.
pub fn evaluate_accuracy(
    samples: &[Sample],
    net: &NetworkDef<f32>,
    seq: &AssignmentSequence,
    bank: &MultiplierBank,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("accuracy over an empty image set".into()));
    }
    let correct = Engine::new(net, seq, bank).correct(samples);
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::booth::default_bank;
    use crate::cnn::synthetic::{synthetic_split, SyntheticParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Tensor {
        Tensor::new(shape, (0..shape.0 * shape.1 * shape.2).map(|_| rng.gen_range(-1.0..1.0f32)).collect()).unwrap()
    }

    fn random_layer(rng: &mut ChaCha8Rng, kernels: usize, channels: usize) -> ConvLayer<f32> {
        ConvLayer::new(
            kernels,
            channels,
            (0..kernels * channels * 9).map(|_| rng.gen_range(-0.5..0.5f32)).collect(),
            (0..kernels).map(|_| rng.gen_range(-0.1..0.1f32)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_kernels_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_tensor(&mut rng, (2, 6, 7));
        let layer = ConvLayer::new(3, 2, vec![0.0; 54], vec![0.0; 3]).unwrap();
        for cfg in MultiplierConfig::ALL {
            let out = conv2d_interleaved(&input, &layer, &[cfg; 27], default_bank()).unwrap();
            assert_eq!(out.shape(), (3, 4, 5));
            assert!(out.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn centre_tap_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_tensor(&mut rng, (1, 5, 5));
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let layer = ConvLayer::new(1, 1, w, vec![0.0]).unwrap();
        let out = conv2d_interleaved(&input, &layer, &[MultiplierConfig::Exact; 9], default_bank()).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(out.at(0, y, x).to_bits(), input.at(0, y + 1, x + 1).to_bits());
            }
        }
    }

    #[test]
    fn shape_errors() {
        let input = Tensor::zeros((2, 5, 5));
        let layer = ConvLayer::new(1, 3, vec![0.0; 27], vec![0.0]).unwrap();
        assert!(conv2d_interleaved(&input, &layer, &[MultiplierConfig::Exact; 9], default_bank()).is_err());
        let layer = ConvLayer::new(1, 2, vec![0.0; 18], vec![0.0]).unwrap();
        assert!(conv2d_interleaved(&input, &layer, &[MultiplierConfig::Exact; 8], default_bank()).is_err());
    }

    #[test]
    fn slot_only_touches_its_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = random_tensor(&mut rng, (3, 8, 8));
        let layer = random_layer(&mut rng, 4, 3);
        let base = vec![MultiplierConfig::Exact; 36];
        let reference = conv2d_interleaved(&input, &layer, &base, default_bank()).unwrap();
        for slot in [0, 13, 22, 35] {
            let mut seq = base.clone();
            seq[slot] = MultiplierConfig::NMNI;
            let out = conv2d_interleaved(&input, &layer, &seq, default_bank()).unwrap();
            for k in 0..4 {
                let same = out.channel(k) == reference.channel(k);
                if k != slot / 9 {
                    assert!(same, "slot {slot} changed kernel {k}");
                } else {
                    assert!(!same, "slot {slot} had no effect");
                }
            }
        }
    }

    #[test]
    fn zero_network_ties_to_lowest_bias() {
        let mut net = NetworkDef::<f32>::zeros();
        let sample = &synthetic_split(1, 0, 1, &SyntheticParams::default())[0];
        let seq = AssignmentSequence::uniform(MultiplierConfig::PMCSI);
        let r = infer(&sample.to_tensor(), &net, &seq, default_bank()).unwrap();
        assert_eq!(r.logits, vec![0.0; 10]);
        assert_eq!(r.label, 0);
        net.fc.bias_mut().copy_from_slice(&[0.0, 0.5, 0.25, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let r = infer(&sample.to_tensor(), &net, &seq, default_bank()).unwrap();
        assert_eq!(r.logits, net.fc.bias());
        assert_eq!(r.label, 1);
    }

    #[test]
    fn degenerate_net_accuracy_is_label_share() {
        let mut net = NetworkDef::<f32>::zeros();
        net.fc.bias_mut()[3] = 1.0;
        let samples = synthetic_split(4, 0, 37, &SyntheticParams::default());
        let threes = samples.iter().filter(|s| s.label == 3).count();
        let seq = AssignmentSequence::uniform(MultiplierConfig::Exact);
        let acc = evaluate_accuracy(&samples, &net, &seq, default_bank()).unwrap();
        assert_eq!(acc, 100.0 * threes as f64 / 37.0);
        assert!(evaluate_accuracy(&[], &net, &seq, default_bank()).is_err());
    }

    #[test]
    fn engine_matches_tensor_path() {
        let net = NetworkDef::<f32>::he_init(9);
        let samples = synthetic_split(5, 0, 3, &SyntheticParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let configs = MultiplierConfig::ALL;
        let seq = AssignmentSequence::new((0..198).map(|_| configs[rng.gen_range(0..9)]).collect()).unwrap();
        let engine = Engine::new(&net, &seq, default_bank());
        for s in &samples {
            let direct = infer(&s.to_tensor(), &net, &seq, default_bank()).unwrap();
            let fast = engine.infer(s).unwrap();
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&direct.logits), bits(&fast.logits));
        }
    }
}
