//! The same pipeline in plain nested loops over any float type, with native
//! multiplication. Training runs on it, and with `T = f32` it is the oracle
//! for all-Exact inference.

use num_traits::Float;

use super::network::{ConvLayer, DenseLayer, NetworkDef};
use crate::sequence::TAPS;

/// Valid 3x3 convolution of a `(c, h, w)` buffer; accumulation runs over
/// channels, then taps, then adds the bias.
pub fn conv2d<T: Float>(input: &[T], shape: (usize, usize, usize), layer: &ConvLayer<T>) -> Vec<T> {
    let (c, h, w) = shape;
    assert_eq!(input.len(), c * h * w);
    assert_eq!(c, layer.channels());
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![T::zero(); layer.kernels() * oh * ow];
    for k in 0..layer.kernels() {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = T::zero();
                for ch in 0..c {
                    for t in 0..TAPS {
                        let (dy, dx) = (t / 3, t % 3);
                        acc = acc + layer.weight(k, ch, t) * input[(ch * h + y + dy) * w + x + dx];
                    }
                }
                out[(k * oh + y) * ow + x] = acc + layer.bias()[k];
            }
        }
    }
    out
}

pub fn relu<T: Float>(v: &mut [T]) {
    for x in v {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

/// 2x2/2 max pooling; also returns the flat input index each output came from.
pub fn maxpool2<T: Float>(input: &[T], shape: (usize, usize, usize)) -> (Vec<T>, Vec<usize>) {
    let (c, h, w) = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let idx = |dy: usize, dx: usize| (ch * h + 2 * y + dy) * w + 2 * x + dx;
                let mut best = idx(0, 0);
                let mut m = input[best];
                for i in [idx(0, 1), idx(1, 0), idx(1, 1)] {
                    if input[i] > m {
                        best = i;
                    }
                    m = m.max(input[i]);
                }
                out.push(m);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub fn dense<T: Float>(input: &[T], layer: &DenseLayer<T>) -> Vec<T> {
    assert_eq!(input.len(), layer.inputs());
    (0..layer.outputs())
        .map(|o| {
            let mut acc = T::zero();
            for (i, &x) in input.iter().enumerate() {
                acc = acc + layer.weight(o, i) * x;
            }
            acc + layer.bias()[o]
        })
        .collect()
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// conv1 output after ReLU, 10x30x30
    pub act1: Vec<T>,
    pub pool1: Vec<T>,
    pub arg1: Vec<usize>,
    /// conv2 output after ReLU, 12x13x13
    pub act2: Vec<T>,
    pub pool2: Vec<T>,
    pub arg2: Vec<usize>,
    pub logits: Vec<T>,
}

pub fn forward_trace<T: Float>(net: &NetworkDef<T>, image: &[T]) -> Trace<T> {
    let mut act1 = conv2d(image, (3, 32, 32), &net.conv1);
    relu(&mut act1);
    let (pool1, arg1) = maxpool2(&act1, (10, 30, 30));
    let mut act2 = conv2d(&pool1, (10, 15, 15), &net.conv2);
    relu(&mut act2);
    let (pool2, arg2) = maxpool2(&act2, (12, 13, 13));
    let logits = dense(&pool2, &net.fc);
    Trace { act1, pool1, arg1, act2, pool2, arg2, logits }
}

pub fn forward<T: Float>(net: &NetworkDef<T>, image: &[T]) -> Vec<T> {
    forward_trace(net, image).logits
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax<T: Float>(logits: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
