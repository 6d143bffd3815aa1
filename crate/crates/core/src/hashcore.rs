//! Grid-coordinate encoding and the shared hash family.
//!
//! Every sketch in the engine addresses the same `m = k * p` slots. Slot
//! indices come from `k` functions derived from two seeded base hashes,
//! `g_i(x) = (h1(x) + i * h2(x)) mod p`, and function `i` owns the disjoint
//! range `[(i - 1) * p, i * p)`.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

/// Seeds used when the caller does not pick their own.
pub const DEFAULT_SEEDS: (u64, u64) = (0x9e37_79b9_7f4a_7c15, 0xc2b2_ae3d_27d4_eb4f);

/// Number of hash functions and the prime size of each function's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Geometry {
    k: usize,
    p: u64,
}

impl Geometry {
    pub fn new(k: usize, p: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "at least one hash function is required"));
        }
        if !is_prime(p) {
            return Err(Error::invalid("p", format!("{p} is not prime")));
        }
        let m = (k as u128) * (p as u128);
        if m > usize::MAX as u128 / 2 {
            return Err(Error::invalid("m", format!("table length {m} is too large")));
        }
        Ok(Geometry { k, p })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// Total table length `k * p`.
    #[inline]
    pub fn m(&self) -> usize {
        self.k * self.p as usize
    }

    pub(crate) fn check_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch {
                left_k: self.k,
                left_p: self.p,
                right_k: other.k,
                right_p: other.p,
            })
        }
    }
}

/// Canonical byte encoding of a grid-cell coordinate tuple.
///
/// Layout: the dimension count as a little-endian `u64`, followed by each
/// coordinate as a little-endian `i64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoordKey(Vec<u8>);

impl CoordKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Encodes a coordinate tuple. `i64::MIN` is rejected so that every accepted
/// coordinate has magnitude below 2^63.
pub fn encode_coords(coords: &[i64]) -> Result<CoordKey> {
    if coords.is_empty() {
        return Err(Error::EmptyCoords);
    }
    let mut bytes = Vec::with_capacity(8 * (coords.len() + 1));
    bytes.extend_from_slice(&(coords.len() as u64).to_le_bytes());
    for &c in coords {
        if c == i64::MIN {
            return Err(Error::CoordOutOfRange(c as i128));
        }
        bytes.extend_from_slice(&c.to_le_bytes());
    }
    Ok(CoordKey(bytes))
}

/// Counts hash evaluations. Shared between threads; increments are relaxed.
#[derive(Debug, Default)]
pub struct HashTally {
    base: AtomicU64,
    derived: AtomicU64,
}

impl HashTally {
    /// `(base hash evaluations, derived hash evaluations)` so far.
    pub fn snapshot(&self) -> (u64, u64) {
        (
            self.base.load(Ordering::Relaxed),
            self.derived.load(Ordering::Relaxed),
        )
    }
}

/// The `k` index functions shared by the count-min sketch and every bloom filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    geometry: Geometry,
    seed1: u64,
    seed2: u64,
}

impl HashFamily {
    pub fn new(geometry: Geometry, seed1: u64, seed2: u64) -> Result<Self> {
        if seed1 == seed2 {
            return Err(Error::invalid("seeds", "the two base hash seeds must differ"));
        }
        Ok(HashFamily {
            geometry,
            seed1,
            seed2,
        })
    }

    pub fn with_default_seeds(geometry: Geometry) -> Self {
        HashFamily {
            geometry,
            seed1: DEFAULT_SEEDS.0,
            seed2: DEFAULT_SEEDS.1,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn seeds(&self) -> (u64, u64) {
        (self.seed1, self.seed2)
    }

    /// The two base hashes of `key`, each reduced into `[0, p)`.
    pub fn base_hashes(&self, key: &CoordKey) -> (u64, u64) {
        let p = self.geometry.p;
        (
            xxh3_64_with_seed(key.as_bytes(), self.seed1) % p,
            xxh3_64_with_seed(key.as_bytes(), self.seed2) % p,
        )
    }

    /// Signature of the cell at `coords`.
    pub fn cell_signature(&self, coords: &[i64]) -> Result<CellSignature> {
        self.cell_signature_tallied(coords, &HashTally::default())
    }

    /// As [`cell_signature`](Self::cell_signature), recording hash work in `tally`.
    pub fn cell_signature_tallied(&self, coords: &[i64], tally: &HashTally) -> Result<CellSignature> {
        let key = encode_coords(coords)?;
        let (h1, h2) = self.base_hashes(&key);
        tally.base.fetch_add(2, Ordering::Relaxed);

        let p = self.geometry.p;
        let mut indices = Vec::with_capacity(self.geometry.k);
        for i in 1..=self.geometry.k {
            let g = derived_hash(i as u64, h1, h2, p);
            tally.derived.fetch_add(1, Ordering::Relaxed);
            indices.push((i as u64 - 1) * p + g);
        }
        Ok(CellSignature {
            geometry: self.geometry,
            indices,
        })
    }
}

/// `(h1 + i * h2) mod p`, computed without overflow.
#[inline]
pub fn derived_hash(i: u64, h1: u64, h2: u64, p: u64) -> u64 {
    ((h1 as u128 + (i as u128) * (h2 as u128)) % p as u128) as u64
}

/// The `k` absolute slot indices of one grid cell, one per partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellSignature {
    geometry: Geometry,
    indices: Vec<u64>,
}

impl CellSignature {
    /// Builds a signature from raw absolute indices, checking partition membership.
    pub fn from_indices(geometry: Geometry, indices: Vec<u64>) -> Result<Self> {
        if indices.len() != geometry.k() {
            return Err(Error::invalid(
                "indices",
                format!("expected {} indices, got {}", geometry.k(), indices.len()),
            ));
        }
        let p = geometry.p();
        for (i, &idx) in indices.iter().enumerate() {
            if idx / p != i as u64 {
                return Err(Error::invalid(
                    "indices",
                    format!("index {idx} is outside partition {i}"),
                ));
            }
        }
        Ok(CellSignature { geometry, indices })
    }

    #[inline]
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    #[inline]
    pub fn indices(&self) -> &[u64] {
        &self.indices
    }
}

/// Deterministic primality test for all 64-bit integers (Miller-Rabin with
/// the first twelve prime bases).
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1u64;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    acc
}

/// Smallest prime `>= lower` (`lower` below 2 is treated as 2).
///
/// Panics if no such prime fits in a `u64`.
pub fn next_prime(lower: u64) -> u64 {
    let mut n = lower.max(2);
    loop {
        if is_prime(n) {
            return n;
        }
        n = n.checked_add(1).expect("no 64-bit prime above the requested bound");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    fn family(k: usize, p: u64) -> HashFamily {
        HashFamily::with_default_seeds(Geometry::new(k, p).unwrap())
    }

    #[test]
    fn encoding_is_injective_on_examples() {
        assert_ne!(encode_coords(&[0]).unwrap(), encode_coords(&[0, 0]).unwrap());
        assert_eq!(encode_coords(&[5, -3]).unwrap(), encode_coords(&[5, -3]).unwrap());
        assert_ne!(encode_coords(&[1, 2]).unwrap(), encode_coords(&[2, 1]).unwrap());
    }

    #[test]
    fn encoding_rejects_out_of_domain() {
        assert_eq!(encode_coords(&[]), Err(Error::EmptyCoords));
        assert!(matches!(
            encode_coords(&[1, i64::MIN]),
            Err(Error::CoordOutOfRange(_))
        ));
        assert!(encode_coords(&[i64::MAX, -i64::MAX]).is_ok());
    }

    #[test]
    fn derived_hash_examples() {
        assert_eq!(derived_hash(2, 3, 4, 7), 4);
        for i in 1..10 {
            assert_eq!(derived_hash(i, 5, 0, 11), 5);
        }
        let p = 10009;
        assert_eq!(derived_hash(p - 1, 0, 1, p), p - 1);
        assert_eq!(derived_hash(u64::MAX, u64::MAX - 1, u64::MAX - 2, 1_000_000_007), {
            let v = (u64::MAX as u128 - 1) + (u64::MAX as u128) * (u64::MAX as u128 - 2);
            (v % 1_000_000_007) as u64
        });
    }

    #[test]
    fn next_prime_examples() {
        assert_eq!(next_prime(10008), 10009);
        assert_eq!(next_prime(7), 7);
        assert_eq!(next_prime(2), 2);
        assert_eq!(next_prime(145), 149);
        assert_eq!(70063 / 7, 10009);
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        for n in 0..20_000u64 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2_000 {
            let n = rng.random_range(1u64 << 20..1u64 << 34);
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
        // strong pseudoprimes to several small bases
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(3_825_123_056_546_413_051));
        assert!(is_prime(18_446_744_073_709_551_557));
    }

    #[test]
    fn geometry_requires_prime_partition() {
        assert!(Geometry::new(7, 10009).is_ok());
        assert!(Geometry::new(7, 10008).is_err());
        assert!(Geometry::new(0, 7).is_err());
        assert_eq!(Geometry::new(7, 10009).unwrap().m(), 70063);
    }

    #[test]
    fn base_hashes_are_deterministic_and_in_range() {
        let fam = family(7, 10009);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let coords: Vec<i64> = (0..3).map(|_| rng.random_range(-1_000_000..1_000_000)).collect();
            let key = encode_coords(&coords).unwrap();
            let (h1, h2) = fam.base_hashes(&key);
            assert!(h1 < 10009 && h2 < 10009);
            assert_eq!((h1, h2), fam.base_hashes(&key));
        }
    }

    #[test]
    fn reseeding_changes_base_hashes() {
        let g = Geometry::new(7, 10009).unwrap();
        let a = HashFamily::new(g, 1, 2).unwrap();
        let b = HashFamily::new(g, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let differing = (0..1000)
            .filter(|_| {
                let coords = [rng.random_range(-1000..1000), rng.random_range(-1000..1000)];
                let key = encode_coords(&coords).unwrap();
                a.base_hashes(&key) != b.base_hashes(&key)
            })
            .count();
        assert!(differing >= 999, "only {differing} of 1000 differ");
    }

    #[test]
    fn equal_seeds_rejected() {
        assert!(HashFamily::new(Geometry::new(3, 5).unwrap(), 9, 9).is_err());
    }

    #[test]
    fn signature_occupies_one_index_per_partition() {
        let fam = family(3, 5);
        let sig = fam.cell_signature(&[4, -2, 9]).unwrap();
        assert_eq!(sig.indices().len(), 3);
        for (i, &idx) in sig.indices().iter().enumerate() {
            assert!((i as u64 * 5..(i as u64 + 1) * 5).contains(&idx));
        }
        assert_eq!(sig, fam.cell_signature(&[4, -2, 9]).unwrap());
    }

    #[test]
    fn neighbouring_cells_get_distinct_signatures() {
        let fam = family(7, 10009);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut identical = 0;
        for _ in 0..10_000 {
            let a = [rng.random_range(-50_000..50_000), rng.random_range(-50_000..50_000)];
            let b = [a[0], a[1] + 1];
            if fam.cell_signature(&a).unwrap() == fam.cell_signature(&b).unwrap() {
                identical += 1;
            }
        }
        assert_eq!(identical, 0);
    }

    #[test]
    fn partitions_are_uniform_chi_square() {
        // 0.99 quantile of the chi-square distribution with 100 degrees of freedom
        const CRITICAL: f64 = 135.807;
        let (k, p) = (7usize, 101u64);
        let fam = family(k, p);
        let mut hist = vec![vec![0u64; p as usize]; k];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples = 100_000;
        for _ in 0..samples {
            let coords: Vec<i64> = (0..4).map(|_| rng.random_range(-10_000..10_000)).collect();
            let sig = fam.cell_signature(&coords).unwrap();
            for (i, &idx) in sig.indices().iter().enumerate() {
                hist[i][(idx - i as u64 * p) as usize] += 1;
            }
        }
        let expected = samples as f64 / p as f64;
        for (i, row) in hist.iter().enumerate() {
            let chi2: f64 = row
                .iter()
                .map(|&o| (o as f64 - expected).powi(2) / expected)
                .sum();
            assert!(chi2 < CRITICAL, "partition {i}: chi2 = {chi2}");
        }
    }

    #[test]
    fn tally_counts_two_base_and_k_derived() {
        let fam = family(7, 10009);
        let tally = HashTally::default();
        fam.cell_signature_tallied(&[1, 2, 3], &tally).unwrap();
        fam.cell_signature_tallied(&[1; 160], &tally).unwrap();
        assert_eq!(tally.snapshot(), (4, 14));
    }

    #[test]
    fn from_indices_validates_partitions() {
        let g = Geometry::new(3, 5).unwrap();
        assert!(CellSignature::from_indices(g, vec![0, 5, 14]).is_ok());
        assert!(CellSignature::from_indices(g, vec![0, 4, 14]).is_err());
        assert!(CellSignature::from_indices(g, vec![0, 5]).is_err());
    }

    proptest! {
        #[test]
        fn encoding_injective(a in prop::collection::vec(-i64::MAX..=i64::MAX, 1..6),
                              b in prop::collection::vec(-i64::MAX..=i64::MAX, 1..6)) {
            let (ka, kb) = (encode_coords(&a).unwrap(), encode_coords(&b).unwrap());
            prop_assert_eq!(a == b, ka == kb);
        }

        #[test]
        fn signature_partitions_disjoint(coords in prop::collection::vec(-1_000_000i64..1_000_000, 1..10),
                                          k in 1usize..12, p_lo in 2u64..5000) {
            let p = next_prime(p_lo);
            let fam = family(k, p);
            let sig = fam.cell_signature(&coords).unwrap();
            prop_assert_eq!(sig.indices().len(), k);
            for (i, &idx) in sig.indices().iter().enumerate() {
                prop_assert_eq!(idx / p, i as u64);
            }
            prop_assert_eq!(&sig, &fam.cell_signature(&coords).unwrap());
        }
    }
}
