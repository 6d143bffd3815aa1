//! End-to-end stream clustering model.
//!
//! Per instance: discretize, hash the cell once, update the decayed
//! count-min sketch, and when the cell's density is above the threshold,
//! build the cell's fragment and run a clustering update.

use serde::Serialize;

use crate::bloom::make_fragment_tallied;
use crate::clustermodel::{Assignment, ClusterEvent, ClusterId, ClusterRegistry, Label, StateCounts};
use crate::countmin::{is_dense, DecayedCountMin};
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::hashcore::{HashFamily, HashTally, DEFAULT_SEEDS};
use crate::params::SketchParams;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub density: f64,
    pub dense: bool,
    /// Set when the instance triggered a clustering update.
    pub cluster: Option<ClusterChange>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterChange {
    pub event: ClusterEvent,
    pub id: ClusterId,
    pub label: Label,
}

impl IngestOutcome {
    pub fn event(&self) -> Option<ClusterEvent> {
        self.cluster.map(|c| c.event)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModelStats {
    pub instances_seen: u64,
    pub rejected: u64,
    pub dense_events: u64,
    pub clusters_created: u64,
    pub expansions: u64,
    pub mergers: u64,
    pub clusters_expired: u64,
    pub live: StateCounts,
    pub cm_fill_ratio: f64,
}

/// Hash and index work performed so far, by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WorkCounters {
    /// `(base, derived)` hash evaluations for arriving instances.
    pub ingest_hashes: (u64, u64),
    /// `(base, derived)` hash evaluations spent building fragments.
    pub fragment_hashes: (u64, u64),
    /// `(base, derived)` hash evaluations for classification lookups.
    pub classify_hashes: (u64, u64),
    /// `(row fetches, row ANDs)` on the flat index, all callers.
    pub index_rows: (u64, u64),
}

#[derive(Debug)]
pub struct BloomStreamModel {
    params: SketchParams,
    grid: GridConfig,
    family: HashFamily,
    cm: DecayedCountMin,
    registry: ClusterRegistry,
    stats: ModelStats,
    ingest_hashes: HashTally,
    fragment_hashes: HashTally,
    classify_hashes: HashTally,
}

impl BloomStreamModel {
    pub fn new(params: SketchParams) -> Result<Self> {
        Self::with_seeds(params, DEFAULT_SEEDS.0, DEFAULT_SEEDS.1)
    }

    pub fn with_seeds(params: SketchParams, seed1: u64, seed2: u64) -> Result<Self> {
        let grid = GridConfig::new(params.resolution, params.origin.clone())?;
        let family = HashFamily::new(params.geometry, seed1, seed2)?;
        let cm = DecayedCountMin::new(params.geometry, params.lambda)?;
        let registry = ClusterRegistry::new(params.geometry, params.time_threshold());
        Ok(BloomStreamModel {
            params,
            grid,
            family,
            cm,
            registry,
            stats: ModelStats::default(),
            ingest_hashes: HashTally::default(),
            fragment_hashes: HashTally::default(),
            classify_hashes: HashTally::default(),
        })
    }

    pub fn params(&self) -> &SketchParams {
        &self.params
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    pub fn sketch(&self) -> &DecayedCountMin {
        &self.cm
    }

    pub fn registry(&self) -> &ClusterRegistry {
        &self.registry
    }

    /// Processes one instance arriving at time `t`. Rejected instances
    /// (non-finite, wrong length, out of range, clock regression) leave the
    /// model unchanged apart from the rejection counter.
    pub fn ingest(&mut self, x: &[f64], t: f64) -> Result<IngestOutcome> {
        let res = self.try_ingest(x, t);
        if res.is_err() {
            self.stats.rejected += 1;
        }
        res
    }

    fn try_ingest(&mut self, x: &[f64], t: f64) -> Result<IngestOutcome> {
        let cell = self.grid.discretize(x)?;
        if let Some(clock) = self.cm.clock() {
            if t.is_nan() || t < clock {
                return Err(Error::ClockRegression { t, clock });
            }
        }
        let sig = self
            .family
            .cell_signature_tallied(cell.as_slice(), &self.ingest_hashes)?;
        let density = self.cm.update(&sig, t)?;
        self.stats.instances_seen += 1;

        let dense = is_dense(density, self.params.density_threshold);
        let mut cluster = None;
        if dense {
            self.stats.dense_events += 1;
            let fragment = make_fragment_tallied(&cell, &self.family, &self.fragment_hashes)?;
            let matches = self.registry.matching_clusters(&fragment);
            let out = self.registry.clustering_update(&fragment, &matches, t)?;
            self.stats.clusters_expired += out.expired_removed as u64;
            match out.event {
                ClusterEvent::Created => self.stats.clusters_created += 1,
                ClusterEvent::Expanded => self.stats.expansions += 1,
                ClusterEvent::Merged => self.stats.mergers += 1,
            }
            cluster = Some(ClusterChange {
                event: out.event,
                id: out.id,
                label: out.label,
            });
        }
        Ok(IngestOutcome {
            density,
            dense,
            cluster,
        })
    }

    /// Cluster label of `x` at time `t`. Invalid points are outliers.
    pub fn classify(&self, x: &[f64], t: f64) -> Assignment {
        let Ok(cell) = self.grid.discretize(x) else {
            return Assignment::Outlier;
        };
        match self
            .family
            .cell_signature_tallied(cell.as_slice(), &self.classify_hashes)
        {
            Ok(sig) => self.registry.classify(&sig, t),
            Err(_) => Assignment::Outlier,
        }
    }

    /// Removes clusters expired at `t`.
    pub fn sweep_expired(&mut self, t: f64) -> usize {
        let n = self.registry.sweep_expired(t);
        self.stats.clusters_expired += n as u64;
        n
    }

    /// Counters plus live clusters by state at time `t`.
    pub fn snapshot_stats(&self, t: f64) -> ModelStats {
        ModelStats {
            live: self.registry.state_counts(t),
            cm_fill_ratio: self.cm.fill_ratio(),
            ..self.stats
        }
    }

    pub fn work(&self) -> WorkCounters {
        WorkCounters {
            ingest_hashes: self.ingest_hashes.snapshot(),
            fragment_hashes: self.fragment_hashes.snapshot(),
            classify_hashes: self.classify_hashes.snapshot(),
            index_rows: self.registry.index().tally().snapshot(),
        }
    }
}
