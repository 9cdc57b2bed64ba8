//! Minibatch SGD with momentum on softmax cross-entropy, in native float
//! arithmetic. Only used to produce weight fixtures.

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cifar::{pixel_value, Sample};
use super::network::NetworkDef;
use super::reference::{forward, forward_trace};
use crate::error::{Error, Result};
use crate::sequence::TAPS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { epochs: 6, batch_size: 32, learning_rate: 0.01, momentum: 0.9, lr_decay: 0.8, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub net: NetworkDef<T>,
    /// Mean loss over the training set before the first update.
    pub initial_loss: f64,
    /// Mean minibatch loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn image_values<T: Float>(sample: &Sample) -> Vec<T> {
    sample.pixels.iter().map(|&p| T::from(pixel_value(p)).expect("pixel")).collect()
}

fn cross_entropy<T: Float>(logits: &[T], label: usize) -> (T, Vec<T>) {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    let loss = sum.ln() - (logits[label] - m);
    let mut grad: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    grad[label] = grad[label] - T::one();
    (loss, grad)
}

/// Mean cross-entropy of `net` over `samples`.
pub fn mean_loss<T: Float>(net: &NetworkDef<T>, samples: &[Sample]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| cross_entropy(&forward(net, &image_values::<T>(s)), s.label as usize).0.to_f64().unwrap_or(f64::NAN))
        .sum();
    total / samples.len() as f64
}

/// Adds the gradient of one sample's loss to `grad`; returns the loss.
pub fn accumulate_gradient<T: Float>(net: &NetworkDef<T>, sample: &Sample, grad: &mut NetworkDef<T>) -> T {
    let image = image_values::<T>(sample);
    let tr = forward_trace(net, &image);
    let (loss, dlogits) = cross_entropy(&tr.logits, sample.label as usize);

    // fc
    let fc = &net.fc;
    let mut dpool2 = vec![T::zero(); fc.inputs()];
    for (o, &g) in dlogits.iter().enumerate() {
        grad.fc.bias_mut()[o] = grad.fc.bias()[o] + g;
        let row = o * fc.inputs();
        for i in 0..fc.inputs() {
            grad.fc.weights_mut()[row + i] = grad.fc.weights()[row + i] + g * tr.pool2[i];
            dpool2[i] = dpool2[i] + g * fc.weight(o, i);
        }
    }

    // pool2 / relu2
    let mut dz2 = vec![T::zero(); tr.act2.len()];
    for (&src, &g) in tr.arg2.iter().zip(&dpool2) {
        if tr.act2[src] > T::zero() {
            dz2[src] = dz2[src] + g;
        }
    }
    let dpool1 = conv_backward(&tr.pool1, (10, 15, 15), &dz2, &net.conv2, &mut grad.conv2, true);

    let mut dz1 = vec![T::zero(); tr.act1.len()];
    for (&src, &g) in tr.arg1.iter().zip(&dpool1) {
        if tr.act1[src] > T::zero() {
            dz1[src] = dz1[src] + g;
        }
    }
    conv_backward(&image, (3, 32, 32), &dz1, &net.conv1, &mut grad.conv1, false);
    loss
}

fn conv_backward<T: Float>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    dout: &[T],
    layer: &super::network::ConvLayer<T>,
    grad: &mut super::network::ConvLayer<T>,
    want_input_grad: bool,
) -> Vec<T> {
    let (oh, ow) = (h - 2, w - 2);
    let mut din = if want_input_grad { vec![T::zero(); input.len()] } else { Vec::new() };
    for k in 0..layer.kernels() {
        let plane = &dout[k * oh * ow..(k + 1) * oh * ow];
        let db = plane.iter().copied().fold(T::zero(), |a, b| a + b);
        grad.bias_mut()[k] = grad.bias()[k] + db;
        for ch in 0..c {
            for t in 0..TAPS {
                let (dy, dx) = (t / 3, t % 3);
                let wkt = layer.weight(k, ch, t);
                let mut dw = T::zero();
                for y in 0..oh {
                    for x in 0..ow {
                        let g = plane[y * ow + x];
                        if g == T::zero() {
                            continue;
                        }
                        let i = (ch * h + y + dy) * w + x + dx;
                        dw = dw + g * input[i];
                        if want_input_grad {
                            din[i] = din[i] + g * wkt;
                        }
                    }
                }
                let wi = (k * c + ch) * TAPS + t;
                grad.weights_mut()[wi] = grad.weights()[wi] + dw;
            }
        }
    }
    din
}

/// Trains from a He-initialised network.
pub fn train_reference<T: Float + Send + Sync>(samples: &[Sample], params: &TrainParams) -> Result<TrainReport<T>> {
    train_from(NetworkDef::he_init(params.seed), samples, params)
}

pub fn train_from<T: Float>(mut net: NetworkDef<T>, samples: &[Sample], params: &TrainParams) -> Result<TrainReport<T>> {
    if samples.is_empty() || params.batch_size == 0 {
        return Err(Error::InvalidArgument("training needs samples and a positive batch size".into()));
    }
    let lr0 = params.learning_rate;
    let initial_loss = mean_loss(&net, samples);
    let mut velocity = NetworkDef::<T>::zeros();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mu = T::from(params.momentum).expect("momentum");
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let lr = lr0 * params.lr_decay.powi(epoch as i32);
        let mut total = 0.0;
        for batch in order.chunks(params.batch_size) {
            let mut grad = NetworkDef::<T>::zeros();
            for &i in batch {
                total += accumulate_gradient(&net, &samples[i], &mut grad).to_f64().unwrap_or(f64::NAN);
            }
            let step = T::from(lr / batch.len() as f64).expect("learning rate");
            for ((w, v), g) in net.parameters_mut().into_iter().zip(velocity.parameters_mut()).zip(grad.parameters_mut())
            {
                for ((w, v), g) in w.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                    *v = mu * *v - step * *g;
                    *w = *w + *v;
                }
            }
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() || !net.all_finite() {
            return Err(Error::NonFinite(format!("training diverged in epoch {epoch} (mean loss {mean})")));
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport { net, initial_loss, epoch_losses })
}
