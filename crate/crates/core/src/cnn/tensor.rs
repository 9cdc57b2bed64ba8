use crate::error::{Error, Result};

/// Channel-major `(channels, height, width)` FP32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: (usize, usize, usize),
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: (usize, usize, usize), data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.0 * shape.1 * shape.2 {
            return Err(Error::Shape(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Tensor { shape, data: vec![0.0; shape.0 * shape.1 * shape.2] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.0
    }

    pub fn height(&self) -> usize {
        self.shape.1
    }

    pub fn width(&self) -> usize {
        self.shape.2
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.shape.1 + y) * self.shape.2 + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.shape.1 + y) * self.shape.2 + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.shape.1 * self.shape.2;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn relu(mut self) -> Self {
        for v in &mut self.data {
            // keeps -0.0 and NaN out of the positive path
            if !(*v > 0.0) {
                *v = 0.0;
            }
        }
        self
    }

    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn maxpool2(&self) -> Self {
        let (c, h, w) = self.shape;
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros((c, oh, ow));
        for ch in 0..c {
            for y in 0..oh {
                for x in 0..ow {
                    let m = self
                        .at(ch, 2 * y, 2 * x)
                        .max(self.at(ch, 2 * y, 2 * x + 1))
                        .max(self.at(ch, 2 * y + 1, 2 * x))
                        .max(self.at(ch, 2 * y + 1, 2 * x + 1));
                    out.set(ch, y, x, m);
                }
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Tensor::new((2, 2, 2), vec![0.0; 7]).is_err());
        let t = Tensor::new((1, 2, 2), vec![1.0, -2.0, 3.0, -0.0]).unwrap();
        assert_eq!(t.clone().relu().data(), &[1.0, 0.0, 3.0, 0.0]);
        assert_eq!(t.maxpool2().data(), &[3.0]);
    }
}
