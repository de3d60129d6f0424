//! Embedding head:
//!
//! ```text
//! conv3x3(pad 1) -> ReLU -> maxpool 2x2/2 -> conv3x3(pad 1) -> ReLU
//!   -> global max pool -> dense -> L2 normalise
//! ```
//!
//! Max pooling keeps the first maximum in row-major window order so the
//! backward pass is deterministic. The 2x2 pool uses floor division, except
//! that a spatial extent of 1 pools to 1 instead of 0.

use std::sync::atomic::{AtomicU64, Ordering};

use super::{ConvBlockParams, ModelError, Result};
use crate::encoding::FeatureMap;

/// Unit-norm embedding (or the zero vector when the pre-normalisation
/// output vanishes).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Parameters plus a generation tag that changes on every mutable access,
/// so a backward pass can refuse a cache produced under other weights.
#[derive(Debug)]
pub struct ConvBlock {
    params: ConvBlockParams,
    generation: u64,
}

impl Clone for ConvBlock {
    fn clone(&self) -> Self {
        Self::new(self.params.clone())
    }
}

/// Activations saved by [`ConvBlock::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    h: usize,
    w: usize,
    input: Vec<f64>,
    z1: Vec<f64>,
    pool1_h: usize,
    pool1_w: usize,
    pool1: Vec<f64>,
    pool1_arg: Vec<usize>,
    z2: Vec<f64>,
    global: Vec<f64>,
    global_arg: Vec<usize>,
    norm: f64,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Norm of the dense output before normalisation.
    pub fn pre_norm(&self) -> f64 {
        self.norm
    }
}

/// Gradient with respect to the input map, `(h, w, c)` row-major.
pub type InputGradient = Vec<f64>;

fn pooled_len(n: usize) -> usize {
    (n / 2).max(1)
}

/// 3x3 convolution, stride 1, zero padding 1, `(h, w, c)` layout.
fn conv3x3(x: &[f64], h: usize, w: usize, cin: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let cout = bias.len();
    let mut out = vec![0.0; h * w * cout];
    for y in 0..h {
        for xx in 0..w {
            let o = &mut out[(y * w + xx) * cout..(y * w + xx + 1) * cout];
            o.copy_from_slice(bias);
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = &x[(sy as usize * w + sx as usize) * cin..][..cin];
                    let kbase = (ky * 3 + kx) * cin * cout;
                    for (c, &v) in src.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let k = &weight[kbase + c * cout..][..cout];
                        for (oi, &kw) in o.iter_mut().zip(k) {
                            *oi += v * kw;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient of
/// [`conv3x3`].
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    x: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    weight: &[f64],
    dout: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let cout = dbias.len();
    let mut dx = vec![0.0; h * w * cin];
    for y in 0..h {
        for xx in 0..w {
            let g = &dout[(y * w + xx) * cout..][..cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (db, &gv) in dbias.iter_mut().zip(g) {
                *db += gv;
            }
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = xx as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let base = (sy as usize * w + sx as usize) * cin;
                    let kbase = (ky * 3 + kx) * cin * cout;
                    for c in 0..cin {
                        let xv = x[base + c];
                        let k = &weight[kbase + c * cout..][..cout];
                        let dk = &mut dweight[kbase + c * cout..][..cout];
                        let mut acc = 0.0;
                        for o in 0..cout {
                            dk[o] += xv * g[o];
                            acc += k[o] * g[o];
                        }
                        dx[base + c] += acc;
                    }
                }
            }
        }
    }
    dx
}

impl ConvBlock {
    pub fn new(params: ConvBlockParams) -> Self {
        Self {
            params,
            generation: fresh_generation(),
        }
    }

    pub fn params(&self) -> &ConvBlockParams {
        &self.params
    }

    /// Mutable access invalidates every outstanding forward cache.
    pub fn params_mut(&mut self) -> &mut ConvBlockParams {
        self.generation = fresh_generation();
        &mut self.params
    }

    pub fn into_params(self) -> ConvBlockParams {
        self.params
    }

    pub fn embed(&self, input: &FeatureMap) -> Result<Embedding> {
        self.forward(input).map(|(e, _)| e)
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<(Embedding, ForwardCache)> {
        let p = &self.params;
        let cfg = p.config;
        if input.channels() != cfg.in_channels {
            return Err(ModelError::ChannelMismatch {
                expected: cfg.in_channels,
                got: input.channels(),
            });
        }
        let (h, w) = (input.height(), input.width());
        if h == 0 || w == 0 {
            return Err(ModelError::EmptyInput { h, w });
        }
        let x: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
        let k1 = cfg.conv1_channels;
        let k2 = cfg.conv2_channels;

        let z1 = conv3x3(&x, h, w, cfg.in_channels, &p.conv1_w, &p.conv1_b);

        let (ph, pw) = (pooled_len(h), pooled_len(w));
        let mut pool1 = vec![0.0; ph * pw * k1];
        let mut pool1_arg = vec![0usize; ph * pw * k1];
        for py in 0..ph {
            for px in 0..pw {
                for c in 0..k1 {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for y in 2 * py..(2 * py + 2).min(h) {
                        for xx in 2 * px..(2 * px + 2).min(w) {
                            let idx = (y * w + xx) * k1 + c;
                            let v = z1[idx].max(0.0);
                            if v > best {
                                best = v;
                                arg = idx;
                            }
                        }
                    }
                    pool1[(py * pw + px) * k1 + c] = best;
                    pool1_arg[(py * pw + px) * k1 + c] = arg;
                }
            }
        }

        let z2 = conv3x3(&pool1, ph, pw, k1, &p.conv2_w, &p.conv2_b);

        let mut global = vec![f64::NEG_INFINITY; k2];
        let mut global_arg = vec![0usize; k2];
        for (i, &v) in z2.iter().enumerate() {
            let c = i % k2;
            let a = v.max(0.0);
            if a > global[c] {
                global[c] = a;
                global_arg[c] = i;
            }
        }

        let e = cfg.embed_dim;
        let mut z = p.dense_b.clone();
        for (o, &g) in global.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (zi, &wv) in z.iter_mut().zip(&p.dense_w[o * e..(o + 1) * e]) {
                *zi += g * wv;
            }
        }

        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let output = if norm > 0.0 {
            z.iter().map(|v| v / norm).collect()
        } else {
            log::debug!("embedding head produced a zero vector; left unnormalised");
            vec![0.0; e]
        };

        let cache = ForwardCache {
            generation: self.generation,
            h,
            w,
            input: x,
            z1,
            pool1_h: ph,
            pool1_w: pw,
            pool1,
            pool1_arg,
            z2,
            global,
            global_arg,
            norm,
            output: output.clone(),
        };
        Ok((Embedding(output), cache))
    }

    /// Exact gradients of `grad_out . output` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<(ConvBlockParams, InputGradient)> {
        if cache.generation != self.generation {
            return Err(ModelError::StaleCache);
        }
        let p = &self.params;
        let cfg = p.config;
        let e = cfg.embed_dim;
        if grad_out.len() != e {
            return Err(ModelError::GradientLength {
                expected: e,
                got: grad_out.len(),
            });
        }
        let (k1, k2) = (cfg.conv1_channels, cfg.conv2_channels);
        let mut grads = ConvBlockParams::zeros(cfg);

        // d(z / |z|) = (g - y (y . g)) / |z|; the zero vector passes nothing.
        let dz: Vec<f64> = if cache.norm > 0.0 {
            let y = &cache.output;
            let dot: f64 = y.iter().zip(grad_out).map(|(a, b)| a * b).sum();
            y.iter()
                .zip(grad_out)
                .map(|(yi, gi)| (gi - yi * dot) / cache.norm)
                .collect()
        } else {
            vec![0.0; e]
        };

        grads.dense_b.copy_from_slice(&dz);
        let mut dglobal = vec![0.0; k2];
        for o in 0..k2 {
            let row = &p.dense_w[o * e..(o + 1) * e];
            let g = cache.global[o];
            let drow = &mut grads.dense_w[o * e..(o + 1) * e];
            let mut acc = 0.0;
            for j in 0..e {
                drow[j] = g * dz[j];
                acc += row[j] * dz[j];
            }
            dglobal[o] = acc;
        }

        // global max pool then ReLU mask
        let mut dz2 = vec![0.0; cache.z2.len()];
        for c in 0..k2 {
            let idx = cache.global_arg[c];
            if cache.z2[idx] > 0.0 {
                dz2[idx] += dglobal[c];
            }
        }

        let (ph, pw) = (cache.pool1_h, cache.pool1_w);
        let dpool1 = conv3x3_backward(
            &cache.pool1,
            ph,
            pw,
            k1,
            &p.conv2_w,
            &dz2,
            &mut grads.conv2_w,
            &mut grads.conv2_b,
        );

        let mut dz1 = vec![0.0; cache.z1.len()];
        for (i, &g) in dpool1.iter().enumerate() {
            let idx = cache.pool1_arg[i];
            if cache.z1[idx] > 0.0 {
                dz1[idx] += g;
            }
        }

        let dx = conv3x3_backward(
            &cache.input,
            cache.h,
            cache.w,
            cfg.in_channels,
            &p.conv1_w,
            &dz1,
            &mut grads.conv1_w,
            &mut grads.conv1_b,
        );
        Ok((grads, dx))
    }
}
