use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Layer widths of the embedding head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub in_channels: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub embed_dim: usize,
}

impl HeadConfig {
    pub fn new(in_channels: usize) -> Self {
        Self {
            in_channels,
            conv1_channels: 64,
            conv2_channels: 64,
            embed_dim: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.conv1_channels == 0 || self.conv2_channels == 0 || self.embed_dim == 0 {
            return Err(ModelError::Config(format!("all layer widths must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// All learnable weights of the head.
///
/// Kernel layout is `(ky, kx, in, out)` for both 3x3 convolutions and
/// `(in, out)` for the dense layer, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockParams {
    pub config: HeadConfig,
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

pub(crate) const TENSOR_NAMES: [&str; 6] = ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias", "dense.weight", "dense.bias"];

impl ConvBlockParams {
    pub fn zeros(config: HeadConfig) -> Self {
        let HeadConfig {
            in_channels: c,
            conv1_channels: k1,
            conv2_channels: k2,
            embed_dim: e,
        } = config;
        Self {
            config,
            conv1_w: vec![0.0; 9 * c * k1],
            conv1_b: vec![0.0; k1],
            conv2_w: vec![0.0; 9 * k1 * k2],
            conv2_b: vec![0.0; k2],
            dense_w: vec![0.0; k2 * e],
            dense_b: vec![0.0; e],
        }
    }

    /// Glorot-uniform weights, zero biases. Each weight is rounded to `f32`
    /// so a freshly initialised model survives a model-file round trip
    /// unchanged.
    pub fn init(config: HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let HeadConfig {
            in_channels: c,
            conv1_channels: k1,
            conv2_channels: k2,
            embed_dim: e,
        } = config;
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = rng.gen_range(-limit..limit) as f32 as f64;
            }
        };
        fill(&mut p.conv1_w, 9 * c, 9 * k1);
        fill(&mut p.conv2_w, 9 * k1, 9 * k2);
        fill(&mut p.dense_w, k2, e);
        Ok(p)
    }

    /// Tensor shapes in the order of [`Self::tensors`].
    pub fn shapes(&self) -> [Vec<usize>; 6] {
        let HeadConfig {
            in_channels: c,
            conv1_channels: k1,
            conv2_channels: k2,
            embed_dim: e,
        } = self.config;
        [vec![3, 3, c, k1], vec![k1], vec![3, 3, k1, k2], vec![k2], vec![k2, e], vec![e]]
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [&self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b, &self.dense_w, &self.dense_b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ConvBlockParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Flat read access across all tensors, in declaration order.
    pub fn get_flat(&self, mut i: usize) -> f64 {
        for t in self.tensors() {
            if i < t.len() {
                return t[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, v: f64) {
        for t in self.tensors_mut() {
            if i < t.len() {
                t[i] = v;
                return;
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_counts() {
        let p = ConvBlockParams::zeros(HeadConfig::new(16));
        assert_eq!(p.num_params(), 9 * 16 * 64 + 64 + 9 * 64 * 64 + 64 + 64 * 64 + 64);
        for (t, s) in p.tensors().iter().zip(p.shapes()) {
            assert_eq!(t.len(), s.iter().product::<usize>());
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = HeadConfig::new(8);
        let a = ConvBlockParams::init(cfg, 3).unwrap();
        assert_eq!(a, ConvBlockParams::init(cfg, 3).unwrap());
        assert_ne!(a, ConvBlockParams::init(cfg, 4).unwrap());
        let limit = (6.0f64 / (72.0 + 576.0)).sqrt();
        assert!(a.conv1_w.iter().all(|v| v.abs() <= limit));
        assert!(a.conv1_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_indexing_spans_tensors() {
        let mut p = ConvBlockParams::zeros(HeadConfig {
            in_channels: 1,
            conv1_channels: 1,
            conv2_channels: 1,
            embed_dim: 1,
        });
        for i in 0..p.num_params() {
            p.set_flat(i, i as f64);
        }
        assert_eq!(p.conv1_b, vec![9.0]);
        assert_eq!(p.dense_b, vec![21.0]);
        assert_eq!(p.get_flat(20), 20.0);
    }
}
