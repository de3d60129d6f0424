use serde::{Deserialize, Serialize};

use super::{EncodingError, Result};

/// An `H x W x C` tensor of finite `f32` values in row-major `(h, w, c)`
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(EncodingError::DataLength {
                h: height,
                w: width,
                c: channels,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(EncodingError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Channel vector at one spatial cell.
    pub fn cell(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Copies channels `[start, end)` into a new map.
    pub fn channel_slice(&self, start: usize, end: usize) -> FeatureMap {
        assert!(start <= end && end <= self.channels);
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|cell| cell[start..end].iter().copied())
            .collect();
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: end - start,
            data,
        }
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Which streams a network input was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Concat,
    Full,
    FgOnly,
    BgOnly,
}

/// Input to the embedding head. For `Concat` the first half of the channels
/// is the foreground stream and the second half the background stream.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbeddingInput {
    pub map: FeatureMap,
    pub provenance: Provenance,
}

impl JointEmbeddingInput {
    pub fn single(map: FeatureMap, provenance: Provenance) -> Self {
        Self { map, provenance }
    }
}

/// Stacks channels foreground-then-background.
pub fn concat_features(fg: &FeatureMap, bg: &FeatureMap) -> Result<JointEmbeddingInput> {
    if fg.height != bg.height || fg.width != bg.width {
        return Err(EncodingError::ShapeMismatch {
            fg: fg.shape(),
            bg: bg.shape(),
        });
    }
    let channels = fg.channels + bg.channels;
    let mut data = Vec::with_capacity(fg.height * fg.width * channels);
    for (a, b) in fg
        .data
        .chunks_exact(fg.channels)
        .zip(bg.data.chunks_exact(bg.channels))
    {
        data.extend_from_slice(a);
        data.extend_from_slice(b);
    }
    Ok(JointEmbeddingInput {
        map: FeatureMap {
            height: fg.height,
            width: fg.width,
            channels,
            data,
        },
        provenance: Provenance::Concat,
    })
}

/// Row-major flattening, used directly as the descriptor in the untrained
/// setup.
pub fn flatten_features(m: &FeatureMap) -> Vec<f32> {
    m.data.clone()
}
