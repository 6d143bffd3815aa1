//! Synthetic Gaussian-cluster streams and purity evaluation over horizons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::clustermodel::{Assignment, Label};
use crate::engine::BloomStreamModel;
use crate::error::{Error, Result};

/// Ground-truth label of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Truth {
    Cluster(u32),
    Noise,
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Cluster(c) => write!(f, "{c}"),
            Truth::Noise => f.write_str("NOISE"),
        }
    }
}

impl FromStr for Truth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "NOISE" {
            return Ok(Truth::Noise);
        }
        s.parse()
            .map(Truth::Cluster)
            .map_err(|_| Error::Input(format!("unrecognized truth label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub point: Vec<f64>,
    pub truth: Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStreamConfig {
    pub dims: usize,
    pub clusters: usize,
    /// Probability that an instance is uniform noise, in `[0, 1)`.
    pub noise_fraction: f64,
    pub min_center_separation: f64,
    pub cluster_sd: f64,
    pub window_length: usize,
    pub total_instances: usize,
    pub seed: u64,
    /// Side of the cube centers are drawn from; derived from the cluster
    /// count and separation when `None`.
    pub center_domain: Option<f64>,
}

impl Default for SyntheticStreamConfig {
    fn default() -> Self {
        SyntheticStreamConfig {
            dims: 5,
            clusters: 5,
            noise_fraction: 0.1,
            min_center_separation: 4.0,
            cluster_sd: 1.0,
            window_length: 2000,
            total_instances: 10_000,
            seed: 1,
            center_domain: None,
        }
    }
}

impl SyntheticStreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::invalid("dims", "must be at least 1"));
        }
        if self.clusters == 0 {
            return Err(Error::invalid("clusters", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::invalid("noise_fraction", format!("{} is not in [0, 1)", self.noise_fraction)));
        }
        if !(self.min_center_separation >= 0.0 && self.min_center_separation.is_finite()) {
            return Err(Error::invalid("min_center_separation", "must be non-negative"));
        }
        if !(self.cluster_sd > 0.0 && self.cluster_sd.is_finite()) {
            return Err(Error::invalid("cluster_sd", "must be positive"));
        }
        if let Some(side) = self.center_domain {
            if !(side > 0.0 && side.is_finite()) {
                return Err(Error::invalid("center_domain", "must be positive"));
            }
        }
        if self.window_length == 0 {
            return Err(Error::invalid("window_length", "must be at least 1"));
        }
        Ok(())
    }

    /// Side of the cube `[0, side]^d` that cluster centers are drawn from.
    pub fn center_domain(&self) -> f64 {
        if let Some(side) = self.center_domain {
            return side;
        }
        let per_axis = (self.clusters as f64).powf(1.0 / self.dims as f64).ceil().max(1.0);
        (2.0 * self.min_center_separation * per_axis).max(1.0)
    }
}

const ATTEMPTS_PER_CENTER: usize = 10_000;

/// Reproducible synthetic stream, generated lazily.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    cfg: SyntheticStreamConfig,
    centers: Vec<Vec<f64>>,
    noise_lo: Vec<f64>,
    noise_hi: Vec<f64>,
    normal: Normal<f64>,
    rng: ChaCha8Rng,
    emitted: usize,
}

impl SyntheticStream {
    pub fn new(cfg: SyntheticStreamConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let side = cfg.center_domain();
        let sep2 = cfg.min_center_separation * cfg.min_center_separation;
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(cfg.clusters);
        let mut attempts = 0;
        while centers.len() < cfg.clusters {
            if attempts >= ATTEMPTS_PER_CENTER * cfg.clusters {
                return Err(Error::SeparationUnsatisfiable {
                    clusters: cfg.clusters,
                    separation: cfg.min_center_separation,
                    attempts,
                });
            }
            attempts += 1;
            let cand: Vec<f64> = (0..cfg.dims).map(|_| rng.random_range(0.0..side)).collect();
            let far = centers.iter().all(|c| {
                c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= sep2
            });
            if far {
                centers.push(cand);
            }
        }
        let pad = 3.0 * cfg.cluster_sd;
        let noise_lo = (0..cfg.dims)
            .map(|d| centers.iter().map(|c| c[d]).fold(f64::INFINITY, f64::min) - pad)
            .collect();
        let noise_hi = (0..cfg.dims)
            .map(|d| centers.iter().map(|c| c[d]).fold(f64::NEG_INFINITY, f64::max) + pad)
            .collect();
        let normal = Normal::new(0.0, cfg.cluster_sd).map_err(|e| Error::invalid("cluster_sd", e.to_string()))?;
        Ok(SyntheticStream {
            cfg,
            centers,
            noise_lo,
            noise_hi,
            normal,
            rng,
            emitted: 0,
        })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Bounding box of the uniform noise.
    pub fn noise_bounds(&self) -> (&[f64], &[f64]) {
        (&self.noise_lo, &self.noise_hi)
    }

    fn draw(&mut self) -> LabeledPoint {
        if self.rng.random::<f64>() < self.cfg.noise_fraction {
            let point = self
                .noise_lo
                .iter()
                .zip(&self.noise_hi)
                .map(|(&lo, &hi)| self.rng.random_range(lo..hi))
                .collect();
            LabeledPoint {
                point,
                truth: Truth::Noise,
            }
        } else {
            let c = self.rng.random_range(0..self.centers.len());
            let point = self.centers[c]
                .iter()
                .map(|&mu| mu + self.normal.sample(&mut self.rng))
                .collect();
            LabeledPoint {
                point,
                truth: Truth::Cluster(c as u32),
            }
        }
    }
}

impl Iterator for SyntheticStream {
    type Item = LabeledPoint;

    fn next(&mut self) -> Option<LabeledPoint> {
        if self.emitted >= self.cfg.total_instances {
            return None;
        }
        self.emitted += 1;
        Some(self.draw())
    }
}

/// The whole stream described by `cfg`.
pub fn generate_stream(cfg: &SyntheticStreamConfig) -> Result<Vec<LabeledPoint>> {
    Ok(SyntheticStream::new(cfg.clone())?.collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityReport {
    /// `None` when every prediction was an outlier.
    pub purity: Option<f64>,
    pub clusters: usize,
    pub assigned: usize,
    pub outliers: usize,
}

/// Mean over predicted clusters of the dominant ground-truth fraction.
/// Outlier predictions are left out of the average and counted separately.
pub fn purity(pairs: &[(Assignment, Truth)]) -> PurityReport {
    let mut table: BTreeMap<Label, BTreeMap<Truth, usize>> = BTreeMap::new();
    let mut outliers = 0;
    for &(pred, truth) in pairs {
        match pred {
            Assignment::Cluster(l) => *table.entry(l).or_default().entry(truth).or_default() += 1,
            Assignment::Outlier => outliers += 1,
        }
    }
    let purity = (!table.is_empty()).then(|| {
        table
            .values()
            .map(|row| {
                let total: usize = row.values().sum();
                *row.values().max().unwrap() as f64 / total as f64
            })
            .sum::<f64>()
            / table.len() as f64
    });
    PurityReport {
        purity,
        clusters: table.len(),
        assigned: pairs.len() - outliers,
        outliers,
    }
}

/// Metrics for one evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub window: usize,
    pub instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    pub clusters_dynamic: usize,
    pub clusters_stable: usize,
    pub dense_events: u64,
    pub outlier_fraction: f64,
}

/// Prequential evaluation: each instance is ingested, then classified at its
/// arrival time. Every `horizon` accepted instances a [`WindowMetrics`]
/// record is produced and expired clusters are swept.
#[derive(Debug)]
pub struct HorizonEvaluator {
    horizon: usize,
    window: usize,
    pairs: Vec<(Assignment, Option<Truth>)>,
    dense_at_start: u64,
    last_t: f64,
}

impl HorizonEvaluator {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        Ok(HorizonEvaluator {
            horizon,
            window: 0,
            pairs: Vec::with_capacity(horizon),
            dense_at_start: 0,
            last_t: 0.0,
        })
    }

    /// Ingests and classifies one instance. Returns its assignment and, when
    /// it completes a window, that window's metrics. Rejected instances are
    /// not part of any window.
    pub fn observe(
        &mut self,
        model: &mut BloomStreamModel,
        x: &[f64],
        t: f64,
        truth: Option<Truth>,
    ) -> Result<(Assignment, Option<WindowMetrics>)> {
        model.ingest(x, t)?;
        let pred = model.classify(x, t);
        self.pairs.push((pred, truth));
        self.last_t = t;
        let done = (self.pairs.len() == self.horizon).then(|| self.close(model));
        Ok((pred, done))
    }

    /// Metrics for a trailing partial window, if any instances are pending.
    pub fn finish(&mut self, model: &mut BloomStreamModel) -> Option<WindowMetrics> {
        (!self.pairs.is_empty()).then(|| self.close(model))
    }

    fn close(&mut self, model: &mut BloomStreamModel) -> WindowMetrics {
        let stats = model.snapshot_stats(self.last_t);
        let labeled: Option<Vec<(Assignment, Truth)>> =
            self.pairs.iter().map(|&(p, t)| t.map(|t| (p, t))).collect();
        let outliers = self.pairs.iter().filter(|(p, _)| *p == Assignment::Outlier).count();
        let metrics = WindowMetrics {
            window: self.window,
            instances: self.pairs.len(),
            purity: labeled.and_then(|pairs| purity(&pairs).purity),
            clusters_dynamic: stats.live.dynamic,
            clusters_stable: stats.live.stable,
            dense_events: stats.dense_events - self.dense_at_start,
            outlier_fraction: outliers as f64 / self.pairs.len() as f64,
        };
        model.sweep_expired(self.last_t);
        self.window += 1;
        self.dense_at_start = stats.dense_events;
        self.pairs.clear();
        metrics
    }
}

/// Runs `stream` through `model` with the instance index as the clock.
pub fn evaluate_over_horizons(
    model: &mut BloomStreamModel,
    stream: impl IntoIterator<Item = LabeledPoint>,
    horizon: usize,
) -> Result<Vec<WindowMetrics>> {
    let mut eval = HorizonEvaluator::new(horizon)?;
    let mut out = Vec::new();
    for (i, lp) in stream.into_iter().enumerate() {
        match eval.observe(model, &lp.point, i as f64, Some(lp.truth)) {
            Ok((_, Some(m))) => out.push(m),
            Ok((_, None)) => {}
            // rejected instances are counted by the model and skipped
            Err(_) => {}
        }
    }
    out.extend(eval.finish(model));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamsConfig, SketchParams};
    use rand::seq::SliceRandom;

    fn a(l: u64) -> Assignment {
        Assignment::Cluster(Label(l))
    }

    #[test]
    fn purity_perfect() {
        let pairs: Vec<_> = (0..30).map(|i| (a(i % 3), Truth::Cluster((i % 3) as u32))).collect();
        assert_eq!(purity(&pairs).purity, Some(1.0));
    }

    #[test]
    fn purity_hand_table() {
        let mut pairs = vec![(a(1), Truth::Cluster(0)); 8];
        pairs.extend(vec![(a(1), Truth::Cluster(1)); 2]);
        pairs.extend(vec![(a(2), Truth::Cluster(1)); 5]);
        let r = purity(&pairs);
        assert!((r.purity.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(r.clusters, 2);
    }

    #[test]
    fn purity_half_and_half() {
        let pairs = vec![
            (a(0), Truth::Cluster(0)),
            (a(0), Truth::Cluster(1)),
            (a(0), Truth::Noise),
            (a(0), Truth::Cluster(2)),
        ];
        assert_eq!(purity(&pairs[..2]).purity, Some(0.5));
    }

    #[test]
    fn purity_excludes_outliers() {
        let pairs = vec![
            (a(0), Truth::Cluster(0)),
            (Assignment::Outlier, Truth::Cluster(1)),
            (Assignment::Outlier, Truth::Noise),
        ];
        let r = purity(&pairs);
        assert_eq!(r.purity, Some(1.0));
        assert_eq!(r.outliers, 2);
        let r = purity(&pairs[1..]);
        assert_eq!(r.purity, None);
        assert_eq!(r.outliers, 2);
    }

    #[test]
    fn purity_splitting_mixed_cluster_never_hurts() {
        // one mixed cluster {6A, 4B} vs the same instances split by truth
        let mut mixed = vec![(a(0), Truth::Cluster(0)); 6];
        mixed.extend(vec![(a(0), Truth::Cluster(1)); 4]);
        mixed.extend(vec![(a(1), Truth::Cluster(1)); 3]);
        let mut split = mixed.clone();
        for p in split.iter_mut().filter(|p| p.1 == Truth::Cluster(1) && p.0 == a(0)) {
            p.0 = a(2);
        }
        assert!(purity(&split).purity.unwrap() >= purity(&mixed).purity.unwrap());
    }

    #[test]
    fn purity_relabeling_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pairs: Vec<_> = (0..500)
            .map(|_| (a(rng.random_range(0..6)), Truth::Cluster(rng.random_range(0..4))))
            .collect();
        let base = purity(&pairs).purity.unwrap();
        for _ in 0..100 {
            let mut perm: Vec<u64> = (100..106).collect();
            perm.shuffle(&mut rng);
            let relabeled: Vec<_> = pairs
                .iter()
                .map(|&(p, t)| (a(perm[p.label().unwrap().0 as usize]), t))
                .collect();
            assert!((purity(&relabeled).purity.unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_round_trips_through_text() {
        for t in [Truth::Noise, Truth::Cluster(0), Truth::Cluster(17)] {
            assert_eq!(t.to_string().parse::<Truth>().unwrap(), t);
        }
        assert!("x".parse::<Truth>().is_err());
    }

    #[test]
    fn generator_single_cluster_without_noise() {
        let cfg = SyntheticStreamConfig {
            clusters: 1,
            noise_fraction: 0.0,
            total_instances: 500,
            ..Default::default()
        };
        let s = generate_stream(&cfg).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().all(|p| p.truth == Truth::Cluster(0)));
    }

    #[test]
    fn generator_rejects_bad_config() {
        let cfg = SyntheticStreamConfig {
            noise_fraction: 1.0,
            ..Default::default()
        };
        assert!(generate_stream(&cfg).is_err());
        let cfg = SyntheticStreamConfig {
            dims: 0,
            ..Default::default()
        };
        assert!(generate_stream(&cfg).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SyntheticStreamConfig {
            total_instances: 300,
            ..Default::default()
        };
        assert_eq!(generate_stream(&cfg).unwrap(), generate_stream(&cfg).unwrap());
        let other = SyntheticStreamConfig { seed: 2, ..cfg.clone() };
        assert_ne!(generate_stream(&cfg).unwrap(), generate_stream(&other).unwrap());
    }

    #[test]
    fn centers_are_separated() {
        for (dims, clusters) in [(2, 20), (5, 160), (160, 5)] {
            let cfg = SyntheticStreamConfig {
                dims,
                clusters,
                total_instances: 0,
                ..Default::default()
            };
            let s = SyntheticStream::new(cfg).unwrap();
            let c = s.centers();
            assert_eq!(c.len(), clusters);
            for i in 0..c.len() {
                for j in 0..i {
                    let d2: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    assert!(d2.sqrt() >= 4.0);
                }
            }
        }
    }

    #[test]
    fn impossible_separation_is_reported() {
        let cfg = SyntheticStreamConfig {
            dims: 1,
            clusters: 5,
            center_domain: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            SyntheticStream::new(cfg),
            Err(Error::SeparationUnsatisfiable { clusters: 5, .. })
        ));
    }

    #[test]
    fn noise_fraction_matches_config() {
        let cfg = SyntheticStreamConfig {
            total_instances: 100_000,
            ..Default::default()
        };
        let s = generate_stream(&cfg).unwrap();
        let noise = s.iter().filter(|p| p.truth == Truth::Noise).count() as f64 / s.len() as f64;
        assert!((noise - 0.1).abs() <= 0.02, "noise fraction {noise}");
    }

    fn small_model() -> BloomStreamModel {
        BloomStreamModel::new(SketchParams::derive(&ParamsConfig::default()).unwrap()).unwrap()
    }

    #[test]
    fn short_stream_gives_one_partial_window() {
        let cfg = SyntheticStreamConfig {
            total_instances: 150,
            ..Default::default()
        };
        let mut m = small_model();
        let w = evaluate_over_horizons(&mut m, generate_stream(&cfg).unwrap(), 1000).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].instances, 150);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = SyntheticStreamConfig {
            total_instances: 3000,
            ..Default::default()
        };
        let run = || {
            let mut m = small_model();
            evaluate_over_horizons(&mut m, generate_stream(&cfg).unwrap(), 1000).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|w| w.instances == 1000));
    }

    #[test]
    fn horizon_zero_rejected() {
        assert!(HorizonEvaluator::new(0).is_err());
    }
}
