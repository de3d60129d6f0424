use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelError, Result};
use crate::encoding::JointEmbeddingInput;

/// Index entry for one training view. Feature maps are loaded on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub record_id: String,
    pub instance_id: String,
    pub class_label: String,
}

/// Indices into the sampler's sample list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TripletRef {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// A triplet with its network inputs resolved.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub anchor: (Sample, JointEmbeddingInput),
    pub positive: (Sample, JointEmbeddingInput),
    pub negative: (Sample, JointEmbeddingInput),
}

/// Endless stream of valid triplets over an index of samples.
///
/// Anchors are uniform over views whose instance has at least two views; the
/// positive is a different view of the same instance; the negative is a view
/// of another instance, taken from the anchor's class with probability
/// `same_class_fraction` (when such a view exists) and from any class
/// otherwise.
#[derive(Debug, Clone)]
pub struct TripletSampler {
    samples: Vec<Sample>,
    views_of: Vec<Vec<usize>>,
    instance_of: Vec<usize>,
    class_views: HashMap<String, Vec<usize>>,
    class_has_rival: HashMap<String, bool>,
    anchors: Vec<usize>,
    same_class_fraction: f64,
    rng: ChaCha8Rng,
}

impl TripletSampler {
    pub fn new(samples: Vec<Sample>, same_class_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&same_class_fraction) {
            return Err(ModelError::Config(format!(
                "same_class_negative_fraction {same_class_fraction} outside [0, 1]"
            )));
        }
        let mut instance_index: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &samples {
            let next = instance_index.len();
            instance_index.entry(&s.instance_id).or_insert(next);
        }
        if instance_index.len() < 2 {
            return Err(ModelError::TooFewInstances(instance_index.len()));
        }
        let mut views_of = vec![Vec::new(); instance_index.len()];
        let mut instance_of = Vec::with_capacity(samples.len());
        let mut class_views: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            let inst = instance_index[s.instance_id.as_str()];
            views_of[inst].push(i);
            instance_of.push(inst);
            class_views.entry(s.class_label.clone()).or_default().push(i);
        }
        let anchors: Vec<usize> = (0..samples.len())
            .filter(|&i| views_of[instance_of[i]].len() >= 2)
            .collect();
        if anchors.is_empty() {
            return Err(ModelError::NoPositivePairs);
        }
        let class_has_rival = class_views
            .iter()
            .map(|(c, v)| {
                let first = instance_of[v[0]];
                (c.clone(), v.iter().any(|&i| instance_of[i] != first))
            })
            .collect();
        Ok(Self {
            samples,
            views_of,
            instance_of,
            class_views,
            class_has_rival,
            anchors,
            same_class_fraction,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Number of ordered (anchor, positive) pairs.
    pub fn positive_pairs(&self) -> usize {
        self.views_of.iter().map(|v| v.len() * v.len().saturating_sub(1)).sum()
    }

    /// Ordered (anchor, positive) pairs times the number of other instances a
    /// negative can come from. The trainer uses this as its epoch length.
    pub fn instance_triplets(&self) -> usize {
        self.positive_pairs() * (self.views_of.len() - 1)
    }

    pub fn is_valid(&self, t: &TripletRef) -> bool {
        let (a, p, n) = (&self.samples[t.anchor], &self.samples[t.positive], &self.samples[t.negative]);
        t.anchor != t.positive && a.instance_id == p.instance_id && n.instance_id != a.instance_id
    }

    pub fn draw(&mut self) -> TripletRef {
        let anchor = self.anchors[self.rng.gen_range(0..self.anchors.len())];
        let inst = self.instance_of[anchor];
        let views = &self.views_of[inst];
        let pos_idx = {
            let k = self.rng.gen_range(0..views.len() - 1);
            let a_pos = views.iter().position(|&v| v == anchor).unwrap();
            if k >= a_pos {
                k + 1
            } else {
                k
            }
        };
        let positive = views[pos_idx];

        let class = &self.samples[anchor].class_label;
        let same_class = self.rng.gen_bool(self.same_class_fraction) && self.class_has_rival[class];
        let negative = loop {
            let cand = if same_class {
                let pool = &self.class_views[class];
                pool[self.rng.gen_range(0..pool.len())]
            } else {
                self.rng.gen_range(0..self.samples.len())
            };
            if self.instance_of[cand] != inst {
                break cand;
            }
        };
        TripletRef {
            anchor,
            positive,
            negative,
        }
    }
}

impl Iterator for TripletSampler {
    type Item = TripletRef;

    fn next(&mut self) -> Option<TripletRef> {
        Some(self.draw())
    }
}
