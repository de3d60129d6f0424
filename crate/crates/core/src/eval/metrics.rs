use serde::{Deserialize, Serialize};

use super::{rank_probe_with, EvalMode, GalleryIndex};
use crate::tripletnet::distance;

pub const DEFAULT_KS: [usize; 4] = [1, 5, 20, 50];

/// Where the first same-instance entry landed for one leave-one-out probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeOutcome {
    pub probe: usize,
    /// 1-based rank of the first correct match; `None` when the probe's
    /// instance has no other view among its candidates.
    pub first_hit: Option<usize>,
}

/// Runs every gallery entry as a probe against all the others.
pub fn first_hit_ranks<F>(gallery: &GalleryIndex, within_scene: bool, dist: F) -> Vec<ProbeOutcome>
where
    F: Fn(&[f64], &[f64]) -> f64 + Copy,
{
    (0..gallery.len())
        .map(|probe| {
            let inst = &gallery.entries[probe].instance_id;
            let first_hit = rank_probe_with(probe, gallery, within_scene, dist)
                .iter()
                .position(|&(i, _)| gallery.entries[i].instance_id == *inst)
                .map(|p| p + 1);
            ProbeOutcome { probe, first_hit }
        })
        .collect()
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    distance(a, b).expect("gallery vectors share one length")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub ks: Vec<usize>,
    pub accuracies: Vec<f64>,
    /// Probes with at least one correct candidate.
    pub probes: usize,
    /// Probes skipped because their instance had no other view.
    pub excluded_probes: usize,
    pub gallery_size: usize,
    pub seed: u64,
    pub config_digest: String,
}

impl MetricsReport {
    pub fn from_outcomes(mode: EvalMode, outcomes: &[ProbeOutcome], ks: &[usize], gallery_size: usize) -> Self {
        let hits: Vec<usize> = outcomes.iter().filter_map(|o| o.first_hit).collect();
        let probes = hits.len();
        let accuracies = ks
            .iter()
            .map(|&k| {
                if probes == 0 {
                    0.0
                } else {
                    hits.iter().filter(|&&r| r <= k).count() as f64 / probes as f64
                }
            })
            .collect();
        Self {
            mode,
            ks: ks.to_vec(),
            accuracies,
            probes,
            excluded_probes: outcomes.len() - probes,
            gallery_size,
            seed: 0,
            config_digest: String::new(),
        }
    }

    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.accuracies[i])
    }
}

/// Fraction of eligible probes whose top-k candidates contain a view of the
/// same instance, for each `k`.
pub fn rank_k_accuracy(gallery: &GalleryIndex, ks: &[usize], within_scene: bool) -> MetricsReport {
    let outcomes = first_hit_ranks(gallery, within_scene, squared_euclidean);
    MetricsReport::from_outcomes(gallery.mode, &outcomes, ks, gallery.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub ranks: Vec<usize>,
    pub rates: Vec<f64>,
}

impl CmcCurve {
    /// Cumulative identification rate at every rank `1..=gallery_size`.
    pub fn from_outcomes(outcomes: &[ProbeOutcome], gallery_size: usize) -> Self {
        let mut counts = vec![0usize; gallery_size + 1];
        let mut probes = 0;
        for r in outcomes.iter().filter_map(|o| o.first_hit) {
            counts[r.min(gallery_size)] += 1;
            probes += 1;
        }
        let mut cum = 0;
        let mut ranks = Vec::with_capacity(gallery_size);
        let mut rates = Vec::with_capacity(gallery_size);
        for (r, &c) in counts.iter().enumerate().skip(1) {
            cum += c;
            ranks.push(r);
            rates.push(if probes == 0 { 0.0 } else { cum as f64 / probes as f64 });
        }
        Self { ranks, rates }
    }
}

pub fn cmc_curve(gallery: &GalleryIndex, within_scene: bool) -> CmcCurve {
    let outcomes = first_hit_ranks(gallery, within_scene, squared_euclidean);
    CmcCurve::from_outcomes(&outcomes, gallery.len())
}
