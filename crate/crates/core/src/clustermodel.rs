//! Cluster registry.
//!
//! Clusters are bloom signatures with a creation time. A cluster is
//! *dynamic* while younger than `T/2` (it absorbs expansions and mergers),
//! *stable* until `T` (it only answers label queries and may be linked to
//! by newer clusters), and *expired* from `T` on. Linked clusters share a
//! label through [`LabelStore`].
//!
//! Signatures are also stored transposed in a [`FlatBloomIndex`]: row `i`
//! holds one bit per cluster slot, set when that cluster's signature has bit
//! `i`. Testing a `k`-index cell signature against every cluster at once is
//! then `k` row fetches and `k - 1` row ANDs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::bloom::{iter_ones, BloomSignature, ClusterFragment};
use crate::error::Result;
use crate::hashcore::{CellSignature, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClusterId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Label(pub u64);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of classifying a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assignment {
    Cluster(Label),
    Outlier,
}

impl Assignment {
    pub fn label(&self) -> Option<Label> {
        match self {
            Assignment::Cluster(l) => Some(*l),
            Assignment::Outlier => None,
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Cluster(l) => write!(f, "{l}"),
            Assignment::Outlier => f.write_str("OUTLIER"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterState {
    Dynamic,
    Stable,
    Expired,
}

/// Lifecycle state of a cluster created at `created_at`, seen at `now`.
/// The expiry boundary is closed: age exactly `time_threshold` is expired.
pub fn cluster_state(created_at: f64, now: f64, time_threshold: f64) -> ClusterState {
    let age = now - created_at;
    if age < time_threshold / 2.0 {
        ClusterState::Dynamic
    } else if age < time_threshold {
        ClusterState::Stable
    } else {
        ClusterState::Expired
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCluster {
    id: ClusterId,
    signature: BloomSignature,
    created_at: f64,
    label: Label,
    links: BTreeSet<ClusterId>,
    slot: usize,
}

impl GridCluster {
    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn signature(&self) -> &BloomSignature {
        &self.signature
    }

    pub fn created_at(&self) -> f64 {
        self.created_at
    }

    /// Label assigned at creation; resolve through the registry for the
    /// current group label.
    pub fn raw_label(&self) -> Label {
        self.label
    }

    /// Stable clusters this cluster is linked to.
    pub fn links(&self) -> &BTreeSet<ClusterId> {
        &self.links
    }

    pub fn slot(&self) -> usize {
        self.slot
    }
}

/// Union-find over labels. Each group resolves to one canonical label.
#[derive(Debug, Clone, Default)]
pub struct LabelStore {
    parent: Vec<u64>,
}

impl LabelStore {
    pub fn fresh(&mut self) -> Label {
        let l = self.parent.len() as u64;
        self.parent.push(l);
        Label(l)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Canonical label of the group containing `label`.
    pub fn resolve(&self, label: Label) -> Label {
        let mut l = label.0;
        while self.parent[l as usize] != l {
            l = self.parent[l as usize];
        }
        Label(l)
    }

    fn resolve_compress(&mut self, label: Label) -> Label {
        let root = self.resolve(label);
        let mut l = label.0;
        while self.parent[l as usize] != root.0 {
            let next = self.parent[l as usize];
            self.parent[l as usize] = root.0;
            l = next;
        }
        root
    }

    /// Folds the groups of `others` into the group of `target`, keeping
    /// `target`'s canonical label.
    pub fn merge_into(&mut self, target: Label, others: impl IntoIterator<Item = Label>) {
        let root = self.resolve_compress(target);
        for o in others {
            let r = self.resolve_compress(o);
            if r != root {
                self.parent[r.0 as usize] = root.0;
            }
        }
    }
}

/// Row operation counts of the flat index.
#[derive(Debug, Default)]
pub struct IndexTally {
    row_fetches: AtomicU64,
    row_ands: AtomicU64,
}

impl IndexTally {
    /// `(row fetches, row ANDs)` so far.
    pub fn snapshot(&self) -> (u64, u64) {
        (
            self.row_fetches.load(Ordering::Relaxed),
            self.row_ands.load(Ordering::Relaxed),
        )
    }
}

/// Transposed store of cluster signatures: `m` rows, one bit per slot.
#[derive(Debug)]
pub struct FlatBloomIndex {
    m: usize,
    /// Words per row.
    stride: usize,
    rows: Vec<u64>,
    slots: Vec<Option<ClusterId>>,
    free: BTreeSet<usize>,
    tally: IndexTally,
}

impl FlatBloomIndex {
    pub fn new(m: usize) -> Self {
        FlatBloomIndex {
            m,
            stride: 0,
            rows: Vec::new(),
            slots: Vec::new(),
            free: BTreeSet::new(),
            tally: IndexTally::default(),
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn tally(&self) -> &IndexTally {
        &self.tally
    }

    /// Slot capacity (always a multiple of 64).
    pub fn capacity(&self) -> usize {
        self.stride * 64
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn slot_owner(&self, slot: usize) -> Option<ClusterId> {
        self.slots.get(slot).copied().flatten()
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.stride..(i + 1) * self.stride]
    }

    /// Whether row `i` has slot `slot` set.
    pub fn bit(&self, row: usize, slot: usize) -> bool {
        slot < self.capacity() && self.row(row)[slot / 64] & (1 << (slot % 64)) != 0
    }

    fn grow(&mut self) {
        let new_stride = self.stride + 1;
        let mut rows = vec![0u64; self.m * new_stride];
        if self.stride > 0 {
            for (dst, src) in rows
                .chunks_exact_mut(new_stride)
                .zip(self.rows.chunks_exact(self.stride))
            {
                dst[..self.stride].copy_from_slice(src);
            }
        }
        let base = self.capacity();
        self.rows = rows;
        self.stride = new_stride;
        self.slots.resize(self.capacity(), None);
        self.free.extend(base..self.capacity());
    }

    /// Stores `signature` in the lowest free slot and returns the slot.
    pub fn insert(&mut self, id: ClusterId, signature: &BloomSignature) -> usize {
        if self.free.is_empty() {
            self.grow();
        }
        let slot = self.free.pop_first().expect("grow adds free slots");
        self.place(slot, id, signature);
        slot
    }

    fn place(&mut self, slot: usize, id: ClusterId, signature: &BloomSignature) {
        debug_assert_eq!(signature.geometry().m(), self.m);
        let (word, mask) = (slot / 64, 1u64 << (slot % 64));
        for i in signature.iter_ones() {
            self.rows[i * self.stride + word] |= mask;
        }
        self.slots[slot] = Some(id);
    }

    /// Clears `slot`'s column. `signature` must be the one stored there.
    pub fn remove(&mut self, slot: usize, signature: &BloomSignature) {
        if self.slot_owner(slot).is_none() {
            return;
        }
        let (word, mask) = (slot / 64, 1u64 << (slot % 64));
        for i in signature.iter_ones() {
            self.rows[i * self.stride + word] &= !mask;
        }
        self.slots[slot] = None;
        self.free.insert(slot);
    }

    /// Slots whose signature contains every index of `sig`, as a word bitmap.
    pub fn matching_slots(&self, sig: &CellSignature) -> Vec<u64> {
        let mut idx = sig.indices().iter();
        let Some(&first) = idx.next() else {
            return vec![0; self.stride];
        };
        let mut acc = self.row(first as usize).to_vec();
        self.tally.row_fetches.fetch_add(1, Ordering::Relaxed);
        for &i in idx {
            let row = self.row(i as usize);
            self.tally.row_fetches.fetch_add(1, Ordering::Relaxed);
            for (a, r) in acc.iter_mut().zip(row) {
                *a &= r;
            }
            self.tally.row_ands.fetch_add(1, Ordering::Relaxed);
        }
        acc
    }

    /// Bit-for-bit equality of the stored columns and slot owners, ignoring
    /// unused trailing capacity.
    pub fn same_bits(&self, other: &FlatBloomIndex) -> bool {
        if self.m != other.m {
            return false;
        }
        let cap = self.capacity().max(other.capacity());
        (0..cap).all(|s| self.slot_owner(s) == other.slot_owner(s))
            && (0..self.m).all(|r| {
                let (a, b) = (self.row_or_empty(r), other.row_or_empty(r));
                let n = a.len().max(b.len());
                (0..n).all(|w| a.get(w).unwrap_or(&0) == b.get(w).unwrap_or(&0))
            })
    }

    fn row_or_empty(&self, r: usize) -> &[u64] {
        if self.stride == 0 {
            &[]
        } else {
            self.row(r)
        }
    }
}

/// What a clustering update did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterEvent {
    /// No dynamic cluster matched (stable matches become links).
    Created,
    /// Exactly one dynamic cluster was absorbed.
    Expanded,
    /// Two or more dynamic clusters were absorbed.
    Merged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub id: ClusterId,
    pub label: Label,
    pub event: ClusterEvent,
    pub absorbed: usize,
    pub linked: usize,
    pub expired_removed: usize,
}

/// Live clusters by lifecycle state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StateCounts {
    pub dynamic: usize,
    pub stable: usize,
    pub expired: usize,
}

/// All clusters, their flat index and label groups.
#[derive(Debug)]
pub struct ClusterRegistry {
    geometry: Geometry,
    time_threshold: f64,
    clusters: BTreeMap<ClusterId, GridCluster>,
    index: FlatBloomIndex,
    labels: LabelStore,
    next_id: u64,
}

impl ClusterRegistry {
    pub fn new(geometry: Geometry, time_threshold: f64) -> Self {
        ClusterRegistry {
            geometry,
            time_threshold,
            clusters: BTreeMap::new(),
            index: FlatBloomIndex::new(geometry.m()),
            labels: LabelStore::default(),
            next_id: 0,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn time_threshold(&self) -> f64 {
        self.time_threshold
    }

    pub fn index(&self) -> &FlatBloomIndex {
        &self.index
    }

    pub fn labels(&self) -> &LabelStore {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, id: ClusterId) -> Option<&GridCluster> {
        self.clusters.get(&id)
    }

    /// Registered clusters in id order.
    pub fn clusters(&self) -> impl Iterator<Item = &GridCluster> {
        self.clusters.values()
    }

    pub fn state(&self, id: ClusterId, now: f64) -> Option<ClusterState> {
        self.clusters
            .get(&id)
            .map(|c| cluster_state(c.created_at, now, self.time_threshold))
    }

    /// Current group label of a cluster.
    pub fn label_of(&self, id: ClusterId) -> Option<Label> {
        self.clusters.get(&id).map(|c| self.labels.resolve(c.label))
    }

    pub fn state_counts(&self, now: f64) -> StateCounts {
        let mut counts = StateCounts::default();
        for c in self.clusters.values() {
            match cluster_state(c.created_at, now, self.time_threshold) {
                ClusterState::Dynamic => counts.dynamic += 1,
                ClusterState::Stable => counts.stable += 1,
                ClusterState::Expired => counts.expired += 1,
            }
        }
        counts
    }

    fn slot_ids<'a>(&'a self, words: &'a [u64]) -> impl Iterator<Item = ClusterId> + 'a {
        iter_ones(words).filter_map(|slot| self.index.slot_owner(slot))
    }

    /// Clusters whose signature contains at least one filter of the
    /// fragment, in ascending slot order. Expired clusters are included.
    pub fn matching_clusters(&self, fragment: &ClusterFragment) -> Vec<ClusterId> {
        let mut hits = vec![0u64; self.index.stride];
        for cell in fragment.cells() {
            for (h, w) in hits.iter_mut().zip(self.index.matching_slots(cell)) {
                *h |= w;
            }
        }
        self.slot_ids(&hits).collect()
    }

    /// Replaces the matched clusters with a new one built from `fragment`.
    ///
    /// Dynamic matches are unioned in and removed, stable matches are linked,
    /// expired matches are removed. The new cluster's label is a label shared
    /// by dynamic and stable matches if any, else the smallest stable label,
    /// else the smallest dynamic label, else a fresh one; all matched label
    /// groups are folded into it. Its creation time is the earliest creation
    /// time of the absorbed dynamic clusters, or `now` when none were absorbed.
    pub fn clustering_update(
        &mut self,
        fragment: &ClusterFragment,
        matches: &[ClusterId],
        now: f64,
    ) -> Result<UpdateOutcome> {
        let mut signature = fragment.to_signature(self.geometry)?;
        let mut created_at = now;
        let mut dynamic_labels = BTreeSet::new();
        let mut stable_labels = BTreeSet::new();
        let mut links = BTreeSet::new();
        let (mut absorbed, mut expired_removed) = (0, 0);

        for &id in matches {
            let Some(old) = self.clusters.get(&id) else {
                continue;
            };
            let label = self.labels.resolve(old.label);
            match cluster_state(old.created_at, now, self.time_threshold) {
                ClusterState::Dynamic => {
                    signature.union_with(&old.signature)?;
                    created_at = created_at.min(old.created_at);
                    dynamic_labels.insert(label);
                    absorbed += 1;
                    self.remove_cluster(id);
                }
                ClusterState::Stable => {
                    links.insert(id);
                    stable_labels.insert(label);
                }
                ClusterState::Expired => {
                    expired_removed += 1;
                    self.remove_cluster(id);
                }
            }
        }

        let label = match dynamic_labels.intersection(&stable_labels).next() {
            Some(&common) => common,
            None => match (stable_labels.first(), dynamic_labels.first()) {
                (Some(&s), _) => s,
                (None, Some(&d)) => d,
                (None, None) => self.labels.fresh(),
            },
        };
        self.labels
            .merge_into(label, dynamic_labels.iter().chain(&stable_labels).copied());

        let id = ClusterId(self.next_id);
        self.next_id += 1;
        let slot = self.index.insert(id, &signature);
        let linked = links.len();
        self.clusters.insert(
            id,
            GridCluster {
                id,
                signature,
                created_at,
                label,
                links,
                slot,
            },
        );

        let event = match absorbed {
            0 => ClusterEvent::Created,
            1 => ClusterEvent::Expanded,
            _ => ClusterEvent::Merged,
        };
        Ok(UpdateOutcome {
            id,
            label,
            event,
            absorbed,
            linked,
            expired_removed,
        })
    }

    /// Label of the cell `sig` at time `now`, or `Outlier` when no live
    /// cluster contains it. Among several matching clusters, stable ones win,
    /// then the most recently created, then the lowest slot.
    pub fn classify(&self, sig: &CellSignature, now: f64) -> Assignment {
        let hits = self.index.matching_slots(sig);
        let mut best: Option<(&GridCluster, bool)> = None;
        for id in self.slot_ids(&hits) {
            let c = &self.clusters[&id];
            let stable = match cluster_state(c.created_at, now, self.time_threshold) {
                ClusterState::Expired => continue,
                ClusterState::Stable => true,
                ClusterState::Dynamic => false,
            };
            let better = match best {
                None => true,
                Some((b, b_stable)) => {
                    (stable, c.created_at) > (b_stable, b.created_at)
                        || ((stable, c.created_at) == (b_stable, b.created_at) && c.slot < b.slot)
                }
            };
            if better {
                best = Some((c, stable));
            }
        }
        match best {
            Some((c, _)) => Assignment::Cluster(self.labels.resolve(c.label)),
            None => Assignment::Outlier,
        }
    }

    /// Removes a cluster, frees its index slot and dissolves links to it.
    /// Unknown ids are ignored.
    pub fn remove_cluster(&mut self, id: ClusterId) -> bool {
        let Some(c) = self.clusters.remove(&id) else {
            return false;
        };
        self.index.remove(c.slot, &c.signature);
        for other in self.clusters.values_mut() {
            other.links.remove(&id);
        }
        true
    }

    /// Removes every cluster that is expired at `now`; returns how many.
    pub fn sweep_expired(&mut self, now: f64) -> usize {
        let expired: Vec<ClusterId> = self
            .clusters
            .values()
            .filter(|c| cluster_state(c.created_at, now, self.time_threshold) == ClusterState::Expired)
            .map(|c| c.id)
            .collect();
        for id in &expired {
            self.remove_cluster(*id);
        }
        expired.len()
    }

    /// A fresh index holding every registered cluster in its current slot.
    pub fn rebuild_index(&self) -> FlatBloomIndex {
        let mut index = FlatBloomIndex::new(self.geometry.m());
        while index.capacity() < self.index.capacity() {
            index.grow();
        }
        for c in self.clusters.values() {
            index.free.remove(&c.slot);
            index.place(c.slot, c.id, &c.signature);
        }
        index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::make_fragment;
    use crate::grid::CellCoords;
    use crate::hashcore::HashFamily;

    const T: f64 = 1000.0;

    fn family() -> HashFamily {
        HashFamily::with_default_seeds(Geometry::new(7, 10009).unwrap())
    }

    fn frag(fam: &HashFamily, c: &[i64]) -> ClusterFragment {
        make_fragment(&CellCoords(c.to_vec()), fam).unwrap()
    }

    fn update(reg: &mut ClusterRegistry, f: &ClusterFragment, now: f64) -> UpdateOutcome {
        let m = reg.matching_clusters(f);
        reg.clustering_update(f, &m, now).unwrap()
    }

    #[test]
    fn state_boundaries() {
        assert_eq!(cluster_state(0.0, 0.0, T), ClusterState::Dynamic);
        assert_eq!(cluster_state(0.0, 499.999, T), ClusterState::Dynamic);
        assert_eq!(cluster_state(0.0, 500.0, T), ClusterState::Stable);
        assert_eq!(cluster_state(0.0, 999.999, T), ClusterState::Stable);
        assert_eq!(cluster_state(0.0, 1000.0, T), ClusterState::Expired);
        assert_eq!(cluster_state(10.0, 1010.0, 1.0 / 0.001), ClusterState::Expired);
    }

    #[test]
    fn label_store_merges_groups() {
        let mut ls = LabelStore::default();
        let (a, b, c) = (ls.fresh(), ls.fresh(), ls.fresh());
        ls.merge_into(b, [c]);
        assert_eq!(ls.resolve(c), b);
        ls.merge_into(a, [c]);
        assert_eq!(ls.resolve(b), a);
        assert_eq!(ls.resolve(c), a);
        assert_eq!(ls.len(), 3);
    }

    #[test]
    fn empty_registry() {
        let fam = family();
        let reg = ClusterRegistry::new(fam.geometry(), T);
        assert!(reg.matching_clusters(&frag(&fam, &[0, 0])).is_empty());
        let sig = fam.cell_signature(&[0, 0]).unwrap();
        assert_eq!(reg.classify(&sig, 0.0), Assignment::Outlier);
    }

    #[test]
    fn no_match_creates_fresh_label() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let a = update(&mut reg, &frag(&fam, &[0, 0]), 0.0);
        assert_eq!(a.event, ClusterEvent::Created);
        let b = update(&mut reg, &frag(&fam, &[100, 100]), 1.0);
        assert_eq!(b.event, ClusterEvent::Created);
        assert_ne!(a.label, b.label);
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn fragment_matches_cluster_built_from_it() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let f = frag(&fam, &[0, 0]);
        let out = update(&mut reg, &f, 0.0);
        assert_eq!(reg.matching_clusters(&f), vec![out.id]);
        for cell in f.cells() {
            assert_eq!(reg.classify(cell, 0.0), Assignment::Cluster(out.label));
        }
    }

    #[test]
    fn neighbour_only_cluster_matches() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        // cluster holding only the left neighbor of (0, 0)
        let left = fam.cell_signature(&[-1, 0]).unwrap();
        let only_left = ClusterFragment::from_signatures(vec![left]);
        let out = reg.clustering_update(&only_left, &[], 0.0).unwrap();
        assert_eq!(reg.matching_clusters(&frag(&fam, &[0, 0])), vec![out.id]);
    }

    #[test]
    fn dynamic_match_is_expanded() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let first = update(&mut reg, &frag(&fam, &[0, 0]), 0.0);
        let old_sig = reg.get(first.id).unwrap().signature().clone();
        let second = update(&mut reg, &frag(&fam, &[1, 0]), 10.0);
        assert_eq!(second.event, ClusterEvent::Expanded);
        assert_eq!(second.label, first.label);
        assert!(reg.get(first.id).is_none());
        let new = reg.get(second.id).unwrap();
        assert!(new.signature().contains_filter(&old_sig).unwrap());
        assert_eq!(new.created_at(), 0.0);
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn two_dynamic_matches_merge() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let a = update(&mut reg, &frag(&fam, &[0]), 0.0);
        let b = update(&mut reg, &frag(&fam, &[4]), 1.0);
        assert_ne!(a.label, b.label);
        let m = update(&mut reg, &frag(&fam, &[2]), 2.0);
        assert_eq!(m.event, ClusterEvent::Merged);
        assert_eq!(m.label, a.label.min(b.label));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn stable_takes_precedence_over_dynamic() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let stable = update(&mut reg, &frag(&fam, &[10]), 0.0);
        let dynamic = update(&mut reg, &frag(&fam, &[6]), 600.0);
        assert_ne!(stable.label, dynamic.label);
        assert_eq!(reg.state(stable.id, 700.0), Some(ClusterState::Stable));
        assert_eq!(reg.state(dynamic.id, 700.0), Some(ClusterState::Dynamic));
        // (8) neighbors (9) in the stable cluster and (7) in the dynamic one
        let out = update(&mut reg, &frag(&fam, &[8]), 700.0);
        assert_eq!(out.event, ClusterEvent::Expanded);
        assert_eq!(out.linked, 1);
        assert_eq!(out.label, stable.label);
        assert!(reg.get(dynamic.id).is_none());
        assert!(reg.get(stable.id).is_some());
        assert!(reg.get(out.id).unwrap().links().contains(&stable.id));
        assert_eq!(reg.label_of(out.id), reg.label_of(stable.id));
    }

    #[test]
    fn expired_matches_are_removed() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let old = update(&mut reg, &frag(&fam, &[0]), 0.0);
        let out = update(&mut reg, &frag(&fam, &[0]), 1000.0);
        assert_eq!(out.expired_removed, 1);
        assert_eq!(out.event, ClusterEvent::Created);
        assert_ne!(out.label, old.label);
        assert!(reg.get(old.id).is_none());
    }

    #[test]
    fn classify_skips_expired() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let out = update(&mut reg, &frag(&fam, &[0]), 0.0);
        let sig = fam.cell_signature(&[0]).unwrap();
        assert_eq!(reg.classify(&sig, 999.0), Assignment::Cluster(out.label));
        assert_eq!(reg.classify(&sig, 1000.0), Assignment::Outlier);
        assert_eq!(reg.sweep_expired(1000.0), 1);
        assert!(reg.is_empty());
    }

    #[test]
    fn removal_semantics() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let a = update(&mut reg, &frag(&fam, &[0]), 0.0);
        let sig = fam.cell_signature(&[0]).unwrap();
        assert!(reg.remove_cluster(a.id));
        assert_eq!(reg.classify(&sig, 1.0), Assignment::Outlier);
        assert!(!reg.remove_cluster(a.id));
        assert_eq!(reg.index().occupied(), 0);
    }

    #[test]
    fn removing_one_linked_cluster_keeps_shared_label() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let stable = update(&mut reg, &frag(&fam, &[0]), 0.0);
        let twin = update(&mut reg, &frag(&fam, &[0]), 600.0);
        assert_eq!(twin.linked, 1);
        assert_eq!(twin.label, stable.label);
        reg.remove_cluster(stable.id);
        assert!(reg.get(twin.id).unwrap().links().is_empty());
        let sig = fam.cell_signature(&[0]).unwrap();
        assert_eq!(reg.classify(&sig, 650.0), Assignment::Cluster(stable.label));
    }

    #[test]
    fn classify_prefers_stable_then_recent() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let cell = fam.cell_signature(&[0]).unwrap();
        let only = |s: &CellSignature| ClusterFragment::from_signatures(vec![s.clone()]);
        let old = reg.clustering_update(&only(&cell), &[], 0.0).unwrap();
        let newer = reg.clustering_update(&only(&cell), &[], 100.0).unwrap();
        // both dynamic: most recent wins
        assert_eq!(reg.classify(&cell, 200.0), Assignment::Cluster(newer.label));
        // old is stable at 550, newer still dynamic
        assert_eq!(reg.classify(&cell, 550.0), Assignment::Cluster(old.label));
    }

    #[test]
    fn index_grows_past_one_word() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        let mut ids = Vec::new();
        for i in 0..150 {
            ids.push(update(&mut reg, &frag(&fam, &[i * 10]), 0.0).id);
        }
        assert_eq!(reg.len(), 150);
        assert!(reg.index().capacity() >= 192);
        for (i, id) in ids.iter().enumerate() {
            let sig = fam.cell_signature(&[i as i64 * 10]).unwrap();
            assert_eq!(reg.classify(&sig, 1.0), Assignment::Cluster(reg.label_of(*id).unwrap()));
        }
        assert!(reg.rebuild_index().same_bits(reg.index()));
    }

    #[test]
    fn classify_work_is_k_fetches() {
        let fam = family();
        let mut reg = ClusterRegistry::new(fam.geometry(), T);
        for i in 0..100 {
            update(&mut reg, &frag(&fam, &[i * 10]), 0.0);
        }
        let before = reg.index().tally().snapshot();
        reg.classify(&fam.cell_signature(&[5]).unwrap(), 1.0);
        let after = reg.index().tally().snapshot();
        assert_eq!((after.0 - before.0, after.1 - before.1), (7, 6));
    }
}
