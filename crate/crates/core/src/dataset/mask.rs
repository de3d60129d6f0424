use serde::{Deserialize, Serialize};

use super::{DatasetError, Result};

/// Binary instance mask stored as row-major run lengths.
///
/// Runs alternate background/foreground starting with background, so a mask
/// whose first pixel is foreground begins with a zero-length run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMask", into = "RawMask")]
pub struct MaskBitmap {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawMask {
    w: u32,
    h: u32,
    rle: Vec<u32>,
}

impl TryFrom<RawMask> for MaskBitmap {
    type Error = DatasetError;

    fn try_from(raw: RawMask) -> Result<Self> {
        MaskBitmap::from_runs(raw.w, raw.h, raw.rle)
    }
}

impl From<MaskBitmap> for RawMask {
    fn from(m: MaskBitmap) -> Self {
        RawMask {
            w: m.width,
            h: m.height,
            rle: m.runs,
        }
    }
}

impl MaskBitmap {
    pub fn from_runs(width: u32, height: u32, runs: Vec<u32>) -> Result<Self> {
        let expected = width as u64 * height as u64;
        let got: u64 = runs.iter().map(|&r| r as u64).sum();
        if got != expected {
            return Err(DatasetError::MaskLength {
                width,
                height,
                expected,
                got,
            });
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    /// Encodes a row-major boolean raster.
    pub fn encode(width: u32, height: u32, pixels: &[bool]) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize);
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &p in pixels {
            if p != current {
                runs.push(len);
                len = 0;
                current = p;
            }
            len += 1;
        }
        runs.push(len);
        Self {
            width,
            height,
            runs,
        }
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self::encode(width, height, &vec![value; width as usize * height as usize])
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width as usize * self.height as usize);
        let mut value = false;
        for &r in &self.runs {
            out.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leading_foreground_gets_zero_run() {
        let m = MaskBitmap::encode(3, 1, &[true, true, false]);
        assert_eq!(m.runs(), &[0, 2, 1]);
        assert_eq!(m.area(), 2);
    }

    #[test]
    fn rejects_bad_run_total() {
        let err = MaskBitmap::from_runs(2, 2, vec![1, 2]).unwrap_err();
        assert!(matches!(err, DatasetError::MaskLength { expected: 4, got: 3, .. }));
    }

    #[test]
    fn json_shape() {
        let m: MaskBitmap = serde_json::from_str(r#"{"w":2,"h":1,"rle":[1,1]}"#).unwrap();
        assert_eq!(m.decode(), vec![false, true]);
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"w":2,"h":1,"rle":[1,1]}"#);
    }

    proptest! {
        #[test]
        fn encode_decode_identity(w in 1u32..12, h in 1u32..12, seed in any::<u64>()) {
            let n = (w * h) as usize;
            let pixels: Vec<bool> = (0..n).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) & 1 == 1).collect();
            let m = MaskBitmap::encode(w, h, &pixels);
            prop_assert_eq!(m.runs().iter().map(|&r| r as u64).sum::<u64>(), (w * h) as u64);
            prop_assert_eq!(m.decode(), pixels);
        }
    }
}
