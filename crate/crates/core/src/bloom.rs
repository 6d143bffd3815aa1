//! Partitioned bloom filters over cell signatures.
//!
//! A cluster is an `m`-bit filter whose bit `i` is set when some member
//! cell's signature contains absolute index `i`. Single-cell filters have
//! exactly `k` bits set, one per partition, so they are kept as their
//! [`CellSignature`] and only expanded when unioned into a cluster.

use crate::error::Result;
use crate::grid::{neighborhood, CellCoords};
use crate::hashcore::{CellSignature, Geometry, HashFamily, HashTally};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BloomSignature {
    geometry: Geometry,
    words: Vec<u64>,
}

impl BloomSignature {
    pub fn empty(geometry: Geometry) -> Self {
        BloomSignature {
            geometry,
            words: vec![0; geometry.m().div_ceil(64)],
        }
    }

    /// The single-cell filter of `sig`: exactly its `k` indices set.
    pub fn from_signature(sig: &CellSignature) -> Self {
        let mut f = Self::empty(sig.geometry());
        f.set_indices(sig);
        f
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn insert(&mut self, sig: &CellSignature) -> Result<()> {
        self.geometry.check_same(&sig.geometry())?;
        self.set_indices(sig);
        Ok(())
    }

    fn set_indices(&mut self, sig: &CellSignature) {
        for &idx in sig.indices() {
            self.words[(idx / 64) as usize] |= 1 << (idx % 64);
        }
    }

    #[inline]
    pub fn bit(&self, idx: usize) -> bool {
        idx < self.geometry.m() && self.words[idx / 64] & (1 << (idx % 64)) != 0
    }

    /// Bitwise OR of two filters.
    pub fn union(&self, other: &BloomSignature) -> Result<BloomSignature> {
        let mut out = self.clone();
        out.union_with(other)?;
        Ok(out)
    }

    pub fn union_with(&mut self, other: &BloomSignature) -> Result<()> {
        self.geometry.check_same(&other.geometry)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// True when every index of `sig` is set. Never false for an inserted cell.
    pub fn contains(&self, sig: &CellSignature) -> Result<bool> {
        self.geometry.check_same(&sig.geometry())?;
        Ok(sig.indices().iter().all(|&idx| self.bit(idx as usize)))
    }

    /// True when every set bit of `query` is also set here.
    pub fn contains_filter(&self, query: &BloomSignature) -> Result<bool> {
        self.geometry.check_same(&query.geometry)?;
        Ok(query
            .words
            .iter()
            .zip(&self.words)
            .all(|(q, s)| q & !s == 0))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Absolute indices of the set bits in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        iter_ones(&self.words)
    }

    /// Set bits per partition.
    pub fn partition_counts(&self) -> Vec<usize> {
        let p = self.geometry.p() as usize;
        let mut counts = vec![0; self.geometry.k()];
        for idx in self.iter_ones() {
            counts[idx / p] += 1;
        }
        counts
    }
}

/// Ascending positions of set bits in a word slice.
pub(crate) fn iter_ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let bit = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(wi * 64 + bit)
        })
    })
}

/// Single-cell filters for a dense cell and its `2d` orthogonal neighbors,
/// dense cell first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterFragment {
    cells: Vec<CellSignature>,
}

impl ClusterFragment {
    pub fn from_signatures(cells: Vec<CellSignature>) -> Self {
        ClusterFragment { cells }
    }

    pub fn cells(&self) -> &[CellSignature] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Union of all single-cell filters in the fragment.
    pub fn to_signature(&self, geometry: Geometry) -> Result<BloomSignature> {
        let mut sig = BloomSignature::empty(geometry);
        for cell in &self.cells {
            sig.insert(cell)?;
        }
        Ok(sig)
    }
}

pub fn make_fragment(cell: &CellCoords, family: &HashFamily) -> Result<ClusterFragment> {
    make_fragment_tallied(cell, family, &HashTally::default())
}

pub fn make_fragment_tallied(
    cell: &CellCoords,
    family: &HashFamily,
    tally: &HashTally,
) -> Result<ClusterFragment> {
    let cells = neighborhood(cell)?
        .iter()
        .map(|c| family.cell_signature_tallied(c.as_slice(), tally))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterFragment { cells })
}
