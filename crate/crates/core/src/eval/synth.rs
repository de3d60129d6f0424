//! Synthetic rigid-scene benchmark.
//!
//! Every view shows one elliptical object in front of a static, striped
//! background texture. Between views the object moves by a small integer
//! offset while the background stays put, so the detection crop (which
//! follows the object) sees the same object but a shifted piece of
//! background. Additive Gaussian noise is applied last.
//!
//! `Appearance::Identical` gives every instance the same look for that
//! layer; `Appearance::Distinct` gives each instance its own.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::dataset::{write_manifest, BBox, DetectionRecord, MaskBitmap};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Appearance {
    Identical,
    Distinct,
}

impl std::str::FromStr for Appearance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identical" => Ok(Appearance::Identical),
            "distinct" => Ok(Appearance::Distinct),
            other => Err(format!("expected identical or distinct, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub instances: usize,
    pub views: usize,
    pub fg: Appearance,
    pub bg: Appearance,
    /// Standard deviation of the additive per-channel noise.
    pub noise: f64,
    pub seed: u64,
    /// Side of the square scene image in pixels.
    pub image_size: usize,
    /// Ellipse semi-axes `(rx, ry)` in pixels.
    pub object_radii: (usize, usize),
    /// Maximum per-axis object offset between views.
    pub max_shift: i64,
    /// Width of the dark rim drawn just outside the object mask. Resampling
    /// near the mask edge then reads the rim instead of the moving background.
    pub outline: usize,
    /// Stripe period of the background texture in pixels.
    pub stripe_period: f64,
    /// Stripe amplitude of the background texture.
    pub stripe_amplitude: f64,
    /// Spread of the per-instance background base colours around mid-gray.
    pub bg_color_spread: f64,
    pub classes: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            instances: 10,
            views: 6,
            fg: Appearance::Identical,
            bg: Appearance::Distinct,
            noise: 0.02,
            seed: 7,
            image_size: 128,
            object_radii: (24, 28),
            max_shift: 8,
            outline: 2,
            stripe_period: 16.0,
            stripe_amplitude: 0.3,
            bg_color_spread: 0.25,
            classes: vec!["chair".into(), "table".into()],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EvalError::SynthConfig(m.into()));
        if self.instances < 2 || self.views < 2 {
            return bad("need at least 2 instances and 2 views");
        }
        if !(self.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if self.classes.is_empty() {
            return bad("need at least one class label");
        }
        let (rx, ry) = self.object_radii;
        let reach = (rx.max(ry) + self.outline) as i64 + self.max_shift + 1;
        if rx == 0 || ry == 0 || self.max_shift < 0 || 2 * reach > self.image_size as i64 {
            return bad("object plus shift must fit inside the image");
        }
        if !(self.stripe_period > 0.0) {
            return bad("stripe period must be positive");
        }
        Ok(())
    }
}

/// Generated views: manifest records plus their rasters, in the same order.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub records: Vec<DetectionRecord>,
    pub images: Vec<Raster>,
}

impl SynthDataset {
    /// Writes `manifest.jsonl` and `images/*.png` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("images"))?;
        for (rec, img) in self.records.iter().zip(&self.images) {
            img.save_png(dir.join(&rec.image_path))?;
        }
        write_manifest(dir.join("manifest.jsonl"), &self.records)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct FgStyle {
    a: [f64; 3],
    b: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
struct BgStyle {
    base: [f64; 3],
    angle: f64,
    phase: f64,
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn fg_style(k: usize, n: usize, mode: Appearance) -> FgStyle {
    match mode {
        Appearance::Identical => FgStyle {
            a: [0.85, 0.55, 0.2],
            b: [0.35, 0.2, 0.1],
        },
        Appearance::Distinct => {
            let h = k as f64 / n as f64;
            FgStyle {
                a: hsv(h, 0.8, 0.9),
                b: hsv(h, 0.8, 0.4),
            }
        }
    }
}

fn bg_style(k: usize, n: usize, cfg: &SynthConfig) -> BgStyle {
    let k = match cfg.bg {
        Appearance::Identical => 0,
        Appearance::Distinct => k,
    };
    let t = k as f64 / n as f64;
    // base colours walk a small hue circle around mid-gray
    let base = [
        0.5 + cfg.bg_color_spread * (TAU * t).cos() * 0.5,
        0.5 + cfg.bg_color_spread * (TAU * t + TAU / 3.0).cos() * 0.5,
        0.5 + cfg.bg_color_spread * (TAU * t + 2.0 * TAU / 3.0).cos() * 0.5,
    ];
    BgStyle {
        base,
        angle: t * std::f64::consts::PI,
        phase: t * TAU,
    }
}

const RIM: [f64; 3] = [0.1, 0.1, 0.1];

/// Renders `instances x views` scenes with their detection records.
pub fn synth_benchmark(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| EvalError::SynthConfig(e.to_string()))?;
    let size = cfg.image_size;
    let (rx, ry) = (cfg.object_radii.0 as i64, cfg.object_radii.1 as i64);
    let centre = size as i64 / 2;

    // ellipse mask relative to its own bounding box, identical for every view
    let (mw, mh) = (2 * rx + 1, 2 * ry + 1);
    let inside = |dx: i64, dy: i64| -> bool {
        let (fx, fy) = (dx as f64 / rx as f64, dy as f64 / ry as f64);
        fx * fx + fy * fy <= 1.0
    };
    let (ox_r, oy_r) = (rx as f64 + cfg.outline as f64, ry as f64 + cfg.outline as f64);
    let in_rim = |dx: i64, dy: i64| -> bool {
        let (fx, fy) = (dx as f64 / ox_r, dy as f64 / oy_r);
        cfg.outline > 0 && fx * fx + fy * fy <= 1.0
    };
    let mask_pixels: Vec<bool> = (0..mh)
        .flat_map(|y| (0..mw).map(move |x| (x - rx, y - ry)))
        .map(|(dx, dy)| inside(dx, dy))
        .collect();
    let mask = MaskBitmap::encode(mw as u32, mh as u32, &mask_pixels);

    let mut records = Vec::with_capacity(cfg.instances * cfg.views);
    let mut images = Vec::with_capacity(cfg.instances * cfg.views);
    for k in 0..cfg.instances {
        let fg = fg_style(k, cfg.instances, cfg.fg);
        let bg = bg_style(k, cfg.instances, cfg);
        let class = cfg.classes[k % cfg.classes.len()].clone();
        let (ca, sa) = (bg.angle.cos(), bg.angle.sin());
        for v in 0..cfg.views {
            let ox = rng.gen_range(-cfg.max_shift..=cfg.max_shift);
            let oy = rng.gen_range(-cfg.max_shift..=cfg.max_shift);
            let (cx, cy) = (centre + ox, centre + oy);
            let mut img = Raster::new(size, size);
            for y in 0..size {
                for x in 0..size {
                    let (dx, dy) = (x as i64 - cx, y as i64 - cy);
                    let rgb = if dx.abs() <= rx && dy.abs() <= ry && inside(dx, dy) {
                        // vertical bands in object coordinates
                        if (dx + rx) / 6 % 2 == 0 {
                            fg.a
                        } else {
                            fg.b
                        }
                    } else if in_rim(dx, dy) {
                        RIM
                    } else {
                        let s = ((x as f64 * ca + y as f64 * sa) * TAU / cfg.stripe_period + bg.phase).sin();
                        bg.base.map(|c| c + cfg.stripe_amplitude * s)
                    };
                    let px = rgb.map(|c| {
                        let n = if cfg.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                        (c + n).clamp(0.0, 1.0) as f32
                    });
                    img.set_pixel(x, y, px);
                }
            }
            let det = BBox::new(cx - rx, cy - ry, mw, mh)?;
            let frame = format!("i{k:03}_v{v:03}");
            records.push(DetectionRecord {
                record_id: format!("synth__{frame}__0"),
                scene_id: "synth".into(),
                frame_id: frame.clone(),
                image_path: format!("images/{frame}.png"),
                class_label: class.clone(),
                instance_id: format!("inst{k:03}"),
                det_bbox: det,
                gt_bbox: Some(det),
                gt_label: Some(class.clone()),
                mask: mask.clone(),
                score: 1.0,
            });
            images.push(img);
        }
    }
    Ok(SynthDataset { records, images })
}
