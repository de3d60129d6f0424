//! `RTEN` little-endian tensor files:
//!
//! ```text
//! "RTEN" | version u8 = 1 | dtype u8 = 0 (f32) | ndim u8 = 3 | H u32 | W u32 | C u32 | H*W*C f32
//! ```

use std::fs;
use std::path::Path;

use super::{EncodingError, FeatureMap, Result};

pub const RTEN_MAGIC: [u8; 4] = *b"RTEN";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;
const NDIM: u8 = 3;
const HEADER_LEN: usize = 4 + 3 + 4 * NDIM as usize;

pub fn encode_tensor(m: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * 4);
    out.extend_from_slice(&RTEN_MAGIC);
    out.extend_from_slice(&[VERSION, DTYPE_F32, NDIM]);
    for d in [m.height(), m.width(), m.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<FeatureMap> {
    let truncated = |expected: usize| EncodingError::Truncated {
        expected,
        got: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != RTEN_MAGIC {
        return Err(EncodingError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    let (version, dtype, ndim) = (bytes[4], bytes[5], bytes[6]);
    if version != VERSION {
        return Err(EncodingError::Version(version));
    }
    if dtype != DTYPE_F32 {
        return Err(EncodingError::Dtype(dtype));
    }
    if ndim != NDIM {
        return Err(EncodingError::Ndim(ndim));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[7 + 4 * i..11 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let expected = HEADER_LEN + h * w * c * 4;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    let data = bytes[HEADER_LEN..expected]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(h, w, c, data)
}

pub fn write_tensor(path: impl AsRef<Path>, m: &FeatureMap) -> Result<()> {
    fs::write(path, encode_tensor(m))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_tensor(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureMap {
        FeatureMap::new(2, 3, 2, (0..12).map(|i| i as f32 * -0.37).collect()).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_tensor(&sample());
        assert_eq!(&bytes[..7], b"RTEN\x01\x00\x03");
        assert_eq!(&bytes[7..19], &[2, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 19 + 48);
    }

    #[test]
    fn distinct_errors() {
        let good = encode_tensor(&sample());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad), Err(EncodingError::BadMagic(_))));

        assert!(matches!(
            decode_tensor(&good[..good.len() - 1]),
            Err(EncodingError::Truncated { .. })
        ));
        assert!(matches!(decode_tensor(&good[..10]), Err(EncodingError::Truncated { .. })));

        let mut bad = good.clone();
        bad[5] = 1;
        assert!(matches!(decode_tensor(&bad), Err(EncodingError::Dtype(1))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_tensor(&bad), Err(EncodingError::Version(2))));

        let mut bad = good;
        bad[6] = 2;
        assert!(matches!(decode_tensor(&bad), Err(EncodingError::Ndim(2))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fg.rten");
        write_tensor(&p, &sample()).unwrap();
        assert_eq!(read_tensor(&p).unwrap(), sample());
    }
}
