use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::encoding::{flatten_features, FeatureMap};
use crate::tripletnet::{distance, ConvBlock};

/// The three evaluation setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    /// Raw flattened features, no learned head.
    #[serde(rename = "no-train")]
    NoTrain,
    /// Head trained on whole-crop features.
    #[serde(rename = "full")]
    Full,
    /// Head trained on concatenated fg/bg features.
    #[serde(rename = "concat")]
    Concat,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::NoTrain => "no-train",
            EvalMode::Full => "full",
            EvalMode::Concat => "concat",
        })
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "no-train" => Ok(EvalMode::NoTrain),
            "full" => Ok(EvalMode::Full),
            "concat" => Ok(EvalMode::Concat),
            other => Err(format!("unknown mode {other:?} (expected no-train, full or concat)")),
        }
    }
}

/// Maps a feature map to the vector used for matching.
pub trait Embedder {
    fn embed(&self, map: &FeatureMap) -> Result<Vec<f64>>;
}

/// Flattened raw features.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawEmbedder;

impl Embedder for RawEmbedder {
    fn embed(&self, map: &FeatureMap) -> Result<Vec<f64>> {
        Ok(flatten_features(map).into_iter().map(f64::from).collect())
    }
}

impl Embedder for ConvBlock {
    fn embed(&self, map: &FeatureMap) -> Result<Vec<f64>> {
        Ok(ConvBlock::embed(self, map)?.0)
    }
}

/// One test view to be embedded.
#[derive(Debug, Clone)]
pub struct GalleryItem {
    pub record_id: String,
    pub instance_id: String,
    pub scene_id: String,
    pub map: FeatureMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub record_id: String,
    pub instance_id: String,
    pub scene_id: String,
    pub vector: Vec<f64>,
}

/// Embedded test views, sorted by record id.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    pub entries: Vec<GalleryEntry>,
    pub mode: EvalMode,
}

impl GalleryIndex {
    /// Validates and sorts prebuilt entries.
    pub fn from_entries(mut entries: Vec<GalleryEntry>, mode: EvalMode) -> Result<Self> {
        if entries.is_empty() {
            return Err(EvalError::EmptyGallery);
        }
        entries.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        let dim = entries[0].vector.len();
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.record_id.as_str()) {
                return Err(EvalError::DuplicateRecord(e.record_id.clone()));
            }
            if e.vector.len() != dim {
                return Err(EvalError::Dimension {
                    record: e.record_id.clone(),
                    expected: dim,
                    got: e.vector.len(),
                });
            }
        }
        Ok(Self { entries, mode })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].vector.len()
    }

    pub fn position(&self, record_id: &str) -> Option<usize> {
        self.entries
            .binary_search_by(|e| e.record_id.as_str().cmp(record_id))
            .ok()
    }
}

pub fn build_gallery(
    items: impl IntoIterator<Item = GalleryItem>,
    embedder: &dyn Embedder,
    mode: EvalMode,
) -> Result<GalleryIndex> {
    let entries = items
        .into_iter()
        .map(|it| {
            Ok(GalleryEntry {
                vector: embedder.embed(&it.map)?,
                record_id: it.record_id,
                instance_id: it.instance_id,
                scene_id: it.scene_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GalleryIndex::from_entries(entries, mode)
}

/// Ranks every other gallery entry against the probe at `probe` with a
/// caller-supplied distance. Ascending distance, ties by record id.
pub fn rank_probe_with<F>(probe: usize, gallery: &GalleryIndex, within_scene: bool, dist: F) -> Vec<(usize, f64)>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let p = &gallery.entries[probe];
    let mut ranked: Vec<(usize, f64)> = gallery
        .entries
        .iter()
        .enumerate()
        .filter(|&(i, e)| i != probe && (!within_scene || e.scene_id == p.scene_id))
        .map(|(i, e)| (i, dist(&p.vector, &e.vector)))
        .collect();
    // entries are sorted by record id, so index order breaks ties
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    ranked
}

/// Leave-one-out ranking of one probe by squared Euclidean distance.
pub fn rank_probe(probe_id: &str, gallery: &GalleryIndex) -> Result<Vec<(String, f64)>> {
    let probe = gallery
        .position(probe_id)
        .ok_or_else(|| EvalError::UnknownProbe(probe_id.to_string()))?;
    Ok(rank_probe_with(probe, gallery, false, |a, b| {
        distance(a, b).expect("gallery vectors share one length")
    })
    .into_iter()
    .map(|(i, d)| (gallery.entries[i].record_id.clone(), d))
    .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn entry(id: &str, inst: &str, v: Vec<f64>) -> GalleryEntry {
        GalleryEntry {
            record_id: id.into(),
            instance_id: inst.into(),
            scene_id: "s".into(),
            vector: v,
        }
    }

    #[test]
    fn ordering_example() {
        // distances from the probe at the origin: g1 0.3, g2 0.1, g3 0.5
        let g = GalleryIndex::from_entries(
            vec![
                entry("p", "A", vec![0.0]),
                entry("g1", "A", vec![0.3f64.sqrt()]),
                entry("g2", "B", vec![0.1f64.sqrt()]),
                entry("g3", "C", vec![0.5f64.sqrt()]),
            ],
            EvalMode::NoTrain,
        )
        .unwrap();
        let order: Vec<String> = rank_probe("p", &g).unwrap().into_iter().map(|(id, _)| id).collect();
        assert_eq!(order, vec!["g2", "g1", "g3"]);
    }

    #[test]
    fn identical_vector_comes_first_and_ties_by_id() {
        let g = GalleryIndex::from_entries(
            vec![
                entry("p", "A", vec![1.0, 2.0]),
                entry("z", "B", vec![1.0, 2.0]),
                entry("b", "C", vec![1.0, 2.5]),
                entry("a", "C", vec![1.0, 2.5]),
            ],
            EvalMode::NoTrain,
        )
        .unwrap();
        let r = rank_probe("p", &g).unwrap();
        assert_eq!(r[0], ("z".to_string(), 0.0));
        assert_eq!(r[1].0, "a");
        assert_eq!(r[2].0, "b");
    }

    #[test]
    fn gallery_validation() {
        assert!(matches!(GalleryIndex::from_entries(vec![], EvalMode::Full), Err(EvalError::EmptyGallery)));
        let dup = vec![entry("a", "A", vec![0.0]), entry("a", "B", vec![1.0])];
        assert!(matches!(GalleryIndex::from_entries(dup, EvalMode::Full), Err(EvalError::DuplicateRecord(_))));
        let dims = vec![entry("a", "A", vec![0.0]), entry("b", "B", vec![1.0, 2.0])];
        assert!(matches!(GalleryIndex::from_entries(dims, EvalMode::Full), Err(EvalError::Dimension { .. })));
    }

    #[test]
    fn raw_embedder_flattens() {
        let m = FeatureMap::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let item = |id: &str| GalleryItem {
            record_id: id.into(),
            instance_id: "A".into(),
            scene_id: "s".into(),
            map: m.clone(),
        };
        let g = build_gallery(vec![item("b"), item("a")], &RawEmbedder, EvalMode::NoTrain).unwrap();
        assert_eq!(g.entries[0].record_id, "a");
        assert_eq!(g.entries[0].vector, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.entries[0].vector, g.entries[1].vector);
    }

    #[test]
    fn mode_names() {
        for m in [EvalMode::NoTrain, EvalMode::Full, EvalMode::Concat] {
            assert_eq!(m.to_string().parse::<EvalMode>().unwrap(), m);
        }
        assert!("fused".parse::<EvalMode>().is_err());
    }
}
