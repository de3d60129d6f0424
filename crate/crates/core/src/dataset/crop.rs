use super::{expand_bbox, BBox, DatasetError, DetectionRecord, Result};
use crate::raster::Raster;

/// A resized detection crop split into its masked foreground and the
/// complementary background. Every pixel is non-zero in at most one of the
/// two, and `fg + bg == full`.
#[derive(Debug, Clone, PartialEq)]
pub struct CropPair {
    pub fg: Raster,
    pub bg: Raster,
    /// The resized crop before splitting.
    pub full: Raster,
    pub record_id: String,
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(src: &Raster, out_w: usize, out_h: usize) -> Raster {
    let mut out = Raster::new(out_w, out_h);
    let (sw, sh) = (src.width(), src.height());
    let sx_scale = sw as f64 / out_w as f64;
    let sy_scale = sh as f64 / out_h as f64;
    let sample = |pos: f64, len: usize| -> (usize, usize, f32) {
        let p = pos.clamp(0.0, (len - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, (p - i0 as f64) as f32)
    };
    for y in 0..out_h {
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sy_scale - 0.5, sh);
        for x in 0..out_w {
            let (x0, x1, fx) = sample((x as f64 + 0.5) * sx_scale - 0.5, sw);
            let (a, b) = (src.pixel(x0, y0), src.pixel(x1, y0));
            let (c, d) = (src.pixel(x0, y1), src.pixel(x1, y1));
            let mut px = [0f32; 3];
            for ch in 0..3 {
                let top = a[ch] + (b[ch] - a[ch]) * fx;
                let bot = c[ch] + (d[ch] - c[ch]) * fx;
                px[ch] = top + (bot - top) * fy;
            }
            out.set_pixel(x, y, px);
        }
    }
    out
}

fn nearest_index(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (((dst as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as usize).min(src_len - 1)
}

fn crop(image: &Raster, b: &BBox) -> Raster {
    let mut out = Raster::new(b.w as usize, b.h as usize);
    for y in 0..b.h as usize {
        for x in 0..b.w as usize {
            out.set_pixel(x, y, image.pixel(b.x as usize + x, b.y as usize + y));
        }
    }
    out
}

/// Crops the detection at its border-expanded box, resizes to
/// `out_size x out_size` and splits the result by the detection mask.
///
/// The mask is placed at its offset inside the expanded box (pixels outside
/// the detection box count as background) and resized nearest-neighbour so
/// it stays binary.
pub fn crop_resize_split(
    image: &Raster,
    rec: &DetectionRecord,
    border: u32,
    out_size: usize,
) -> Result<CropPair> {
    let (img_w, img_h) = (image.width() as u32, image.height() as u32);
    let expanded = expand_bbox(&rec.det_bbox, border, img_w, img_h)?;
    if out_size == 0 {
        return Err(DatasetError::DegenerateCrop { img_w, img_h });
    }

    let (ew, eh) = (expanded.w as usize, expanded.h as usize);
    let mut placed = vec![false; ew * eh];
    let dx = (rec.det_bbox.x - expanded.x) as usize;
    let dy = (rec.det_bbox.y - expanded.y) as usize;
    let mask = rec.mask.decode();
    let mw = rec.mask.width() as usize;
    for (i, &m) in mask.iter().enumerate() {
        if m {
            placed[(dy + i / mw) * ew + dx + i % mw] = true;
        }
    }

    let full = resize_bilinear(&crop(image, &expanded), out_size, out_size);
    let mut fg = Raster::new(out_size, out_size);
    let mut bg = Raster::new(out_size, out_size);
    for y in 0..out_size {
        let my = nearest_index(y, eh, out_size);
        for x in 0..out_size {
            let mx = nearest_index(x, ew, out_size);
            let px = full.pixel(x, y);
            if placed[my * ew + mx] {
                fg.set_pixel(x, y, px);
            } else {
                bg.set_pixel(x, y, px);
            }
        }
    }
    Ok(CropPair {
        fg,
        bg,
        full,
        record_id: rec.record_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MaskBitmap;

    fn rec(det: BBox, mask: MaskBitmap) -> DetectionRecord {
        DetectionRecord {
            record_id: "r0".into(),
            scene_id: "s".into(),
            frame_id: "f".into(),
            image_path: "x.png".into(),
            class_label: "chair".into(),
            instance_id: "i".into(),
            det_bbox: det,
            gt_bbox: Some(det),
            gt_label: Some("chair".into()),
            mask,
            score: 1.0,
        }
    }

    #[test]
    fn full_mask_leaves_background_empty() {
        let img = Raster::filled(40, 40, [0.5, 0.5, 0.5]);
        let det = BBox::new(5, 5, 30, 30).unwrap();
        // border 0 so the whole crop is covered by the mask
        let pair = crop_resize_split(&img, &rec(det, MaskBitmap::filled(30, 30, true)), 0, 16).unwrap();
        assert!(pair.bg.data().iter().all(|&v| v == 0.0));
        assert!(pair.fg.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn empty_mask_leaves_foreground_empty() {
        let img = Raster::filled(40, 40, [0.2, 0.4, 0.6]);
        let det = BBox::new(5, 5, 30, 30).unwrap();
        let pair = crop_resize_split(&img, &rec(det, MaskBitmap::filled(30, 30, false)), 10, 16).unwrap();
        assert!(pair.fg.data().iter().all(|&v| v == 0.0));
        assert_eq!(pair.bg, pair.full);
    }

    #[test]
    fn border_ring_is_background() {
        let img = Raster::filled(40, 40, [1.0, 1.0, 1.0]);
        let det = BBox::new(10, 10, 20, 20).unwrap();
        // expanded box is 40x40; with out_size 40 the resize is the identity
        let pair = crop_resize_split(&img, &rec(det, MaskBitmap::filled(20, 20, true)), 10, 40).unwrap();
        assert_eq!(pair.fg.pixel(9, 9), [0.0; 3]);
        assert_eq!(pair.fg.pixel(10, 10), [1.0; 3]);
        assert_eq!(pair.fg.pixel(29, 29), [1.0; 3]);
        assert_eq!(pair.fg.pixel(30, 30), [0.0; 3]);
    }

    #[test]
    fn identity_resize_is_exact() {
        let mut img = Raster::new(5, 4);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = i as f32 / 60.0;
        }
        assert_eq!(resize_bilinear(&img, 5, 4), img);
    }

    #[test]
    fn upsampling_interpolates() {
        let mut img = Raster::new(2, 1);
        img.set_pixel(1, 0, [1.0, 1.0, 1.0]);
        let up = resize_bilinear(&img, 4, 1);
        let row: Vec<f32> = (0..4).map(|x| up.pixel(x, 0)[0]).collect();
        assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
    }
}
