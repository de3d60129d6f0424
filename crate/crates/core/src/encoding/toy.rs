use serde::{Deserialize, Serialize};

use super::{EncodingError, FeatureMap, Result};
use crate::raster::Raster;

/// Width of the toy descriptor: mean RGB, std RGB, mean luminance gradient
/// magnitude, fraction of non-zero pixels.
pub const TOY_CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    /// Hand-crafted per-cell statistics, computed here.
    Toy,
    /// Feature files produced by an external backbone.
    Imported,
}

impl std::str::FromStr for ExtractorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "toy" => Ok(ExtractorKind::Toy),
            "imported" => Ok(ExtractorKind::Imported),
            other => Err(format!("expected toy or imported, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    pub grid: usize,
    pub channels_per_stream: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            kind: ExtractorKind::Toy,
            grid: 7,
            channels_per_stream: TOY_CHANNELS,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 1 || self.channels_per_stream < 1 {
            return Err(EncodingError::Config(format!(
                "grid ({}) and channels_per_stream ({}) must be at least 1",
                self.grid, self.channels_per_stream
            )));
        }
        Ok(())
    }
}

/// `[start, end)` pixel range of cell `i`; the last cell absorbs the
/// remainder.
fn cell_range(i: usize, grid: usize, side: usize) -> (usize, usize) {
    let step = side / grid;
    let end = if i + 1 == grid { side } else { (i + 1) * step };
    (i * step, end)
}

/// Computes the toy descriptor over a `grid x grid` partition of a square
/// image. Gradients use central differences on luminance `(R+G+B)/3`, with
/// neighbours clamped to the cell so each cell depends only on its own
/// pixels.
pub fn toy_extract(image: &Raster, cfg: &ExtractorConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    if cfg.kind != ExtractorKind::Toy || cfg.channels_per_stream != TOY_CHANNELS {
        return Err(EncodingError::Config(format!(
            "toy extractor needs kind=toy and {TOY_CHANNELS} channels, got {:?}/{}",
            cfg.kind, cfg.channels_per_stream
        )));
    }
    let (w, h) = (image.width(), image.height());
    if w != h {
        return Err(EncodingError::NotSquare { width: w, height: h });
    }
    let grid = cfg.grid;
    if w < grid {
        return Err(EncodingError::ImageSmallerThanGrid { side: w, grid });
    }

    let lum = |x: usize, y: usize| -> f64 {
        let p = image.pixel(x, y);
        (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
    };

    let mut data = Vec::with_capacity(grid * grid * TOY_CHANNELS);
    for gy in 0..grid {
        let (y0, y1) = cell_range(gy, grid, h);
        for gx in 0..grid {
            let (x0, x1) = cell_range(gx, grid, w);
            let n = ((y1 - y0) * (x1 - x0)) as f64;

            let mut sum = [0f64; 3];
            let mut nonzero = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for c in 0..3 {
                        sum[c] += p[c] as f64;
                    }
                    if p.iter().any(|&v| v != 0.0) {
                        nonzero += 1;
                    }
                }
            }
            let mean = sum.map(|s| s / n);

            let mut var = [0f64; 3];
            let mut grad = 0f64;
            for y in y0..y1 {
                let (ya, yb) = (y.saturating_sub(1).max(y0), (y + 1).min(y1 - 1));
                for x in x0..x1 {
                    let p = image.pixel(x, y);
                    for c in 0..3 {
                        let d = p[c] as f64 - mean[c];
                        var[c] += d * d;
                    }
                    let (xa, xb) = (x.saturating_sub(1).max(x0), (x + 1).min(x1 - 1));
                    let gxv = (lum(xb, y) - lum(xa, y)) / 2.0;
                    let gyv = (lum(x, yb) - lum(x, ya)) / 2.0;
                    grad += (gxv * gxv + gyv * gyv).sqrt();
                }
            }

            data.extend(mean.iter().map(|&m| m as f32));
            data.extend(var.iter().map(|&v| (v / n).sqrt() as f32));
            data.push((grad / n) as f32);
            data.push((nonzero as f64 / n) as f32);
        }
    }
    FeatureMap::new(grid, grid, TOY_CHANNELS, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_raster(side: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..side * side * 3)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f32>() })
            .collect();
        Raster::from_vec(side, side, data).unwrap()
    }

    /// Per-pixel reference written independently of the cell loop above:
    /// assigns each pixel to its cell by index arithmetic and accumulates.
    fn reference(image: &Raster, grid: usize) -> Vec<f64> {
        let side = image.width();
        let step = side / grid;
        let cell_of = |i: usize| (i / step).min(grid - 1);
        let bounds = |c: usize| (c * step, if c == grid - 1 { side } else { (c + 1) * step });
        let mut out = vec![0f64; grid * grid * 8];
        for cy in 0..grid {
            for cx in 0..grid {
                let pixels: Vec<(usize, usize)> = (0..side)
                    .flat_map(|y| (0..side).map(move |x| (x, y)))
                    .filter(|&(x, y)| cell_of(x) == cx && cell_of(y) == cy)
                    .collect();
                let n = pixels.len() as f64;
                let o = (cy * grid + cx) * 8;
                for c in 0..3 {
                    let vals: Vec<f64> = pixels.iter().map(|&(x, y)| image.pixel(x, y)[c] as f64).collect();
                    let m = vals.iter().sum::<f64>() / n;
                    let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
                    out[o + c] = m;
                    out[o + 3 + c] = v.sqrt();
                }
                let (x0, x1) = bounds(cx);
                let (y0, y1) = bounds(cy);
                let l = |x: usize, y: usize| image.pixel(x, y).iter().map(|&v| v as f64).sum::<f64>() / 3.0;
                let mut g = 0.0;
                for &(x, y) in &pixels {
                    let xr = if x + 1 < x1 { x + 1 } else { x };
                    let xl = if x > x0 { x - 1 } else { x };
                    let yd = if y + 1 < y1 { y + 1 } else { y };
                    let yu = if y > y0 { y - 1 } else { y };
                    let gx = (l(xr, y) - l(xl, y)) / 2.0;
                    let gy = (l(x, yd) - l(x, yu)) / 2.0;
                    g += gx.hypot(gy);
                }
                out[o + 6] = g / n;
                out[o + 7] = pixels.iter().filter(|&&(x, y)| image.pixel(x, y) != [0.0; 3]).count() as f64 / n;
            }
        }
        out
    }

    #[test]
    fn constant_color() {
        let img = Raster::filled(224, 224, [0.25, 0.5, 0.75]);
        let m = toy_extract(&img, &ExtractorConfig::default()).unwrap();
        assert_eq!(m.shape(), (7, 7, 8));
        for y in 0..7 {
            for x in 0..7 {
                assert_eq!(m.cell(y, x), &[0.25, 0.5, 0.75, 0.0, 0.0, 0.0, 0.0, 1.0]);
            }
        }
    }

    #[test]
    fn all_zero_image() {
        let m = toy_extract(&Raster::new(30, 30), &ExtractorConfig::default()).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_per_pixel_reference() {
        for (side, grid, seed) in [(23, 7, 1), (16, 4, 2), (9, 3, 3), (7, 7, 4)] {
            let img = random_raster(side, seed);
            let cfg = ExtractorConfig { grid, ..Default::default() };
            let got = toy_extract(&img, &cfg).unwrap();
            let want = reference(&img, grid);
            for (i, (&g, &w)) in got.data().iter().zip(&want).enumerate() {
                assert!((g as f64 - w).abs() <= 1e-6, "side {side} idx {i}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let img = random_raster(28, 9);
        let cfg = ExtractorConfig::default();
        assert_eq!(toy_extract(&img, &cfg).unwrap(), toy_extract(&img, &cfg).unwrap());
    }

    #[test]
    fn locality() {
        let img = random_raster(29, 5);
        let cfg = ExtractorConfig::default();
        let base = toy_extract(&img, &cfg).unwrap();
        // cell (2, 3) spans rows 8..12 and cols 12..16 for side 29, grid 7
        let mut changed = img.clone();
        for y in 8..12 {
            for x in 12..16 {
                changed.set_pixel(x, y, [1.0, 0.0, 0.5]);
            }
        }
        let after = toy_extract(&changed, &cfg).unwrap();
        for cy in 0..7 {
            for cx in 0..7 {
                if (cy, cx) == (2, 3) {
                    assert_ne!(after.cell(cy, cx), base.cell(cy, cx));
                } else {
                    assert_eq!(after.cell(cy, cx), base.cell(cy, cx), "cell {cy},{cx}");
                }
            }
        }
    }

    #[test]
    fn errors() {
        let cfg = ExtractorConfig::default();
        assert!(matches!(
            toy_extract(&Raster::new(6, 6), &cfg),
            Err(EncodingError::ImageSmallerThanGrid { side: 6, grid: 7 })
        ));
        assert!(matches!(toy_extract(&Raster::new(10, 12), &cfg), Err(EncodingError::NotSquare { .. })));
        let bad = ExtractorConfig { grid: 0, ..cfg };
        assert!(matches!(toy_extract(&Raster::new(10, 10), &bad), Err(EncodingError::Config(_))));
    }
}
