//! Sketch sizing.
//!
//! The table geometry is taken from the optimal bloom filter for a capacity
//! `n` and false-positive target `fp`. The count-min sketch reuses that
//! geometry (depth `k`, width `p`), so its error margin and failure
//! probability follow from `(n, fp)` instead of being chosen independently.

use std::f64::consts::{E, LN_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashcore::{next_prime, Geometry};

/// Derives `(k, p)` for a partitioned bloom filter holding `n` elements at
/// false-positive rate `fp`.
///
/// The optimal length `m = -n ln(fp) / (ln 2)^2` is computed first, then
/// `k = round(log2(1/fp))` (at least 1), and the per-function range is the
/// next prime above `m / k`.
pub fn derive_geometry(n: u64, fp: f64) -> Result<Geometry> {
    if n == 0 {
        return Err(Error::invalid("n", "capacity must be at least 1"));
    }
    check_probability("fp", fp)?;
    let m_opt = -(n as f64) * fp.ln() / (LN_2 * LN_2);
    let k = ((1.0 / fp).log2().round() as usize).max(1);
    let p = next_prime((m_opt / k as f64).ceil().max(2.0) as u64);
    Geometry::new(k, p)
}

/// False-positive estimate of a partitioned filter with `n` insertions:
/// `(1 - (1 - k/m)^n)^k`.
pub fn predicted_fp(m: usize, k: usize, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let per_slot = (1.0 - k as f64 / m as f64).powf(n as f64);
    (1.0 - per_slot).powi(k as i32)
}

/// Large-table limit of [`predicted_fp`]: `(1 - e^{-kn/m})^k`.
pub fn predicted_fp_asymptotic(m: usize, k: usize, n: u64) -> f64 {
    let (m, k, n) = (m as f64, k as f64, n as f64);
    (1.0 - (-k * n / m).exp()).powf(k)
}

/// Error margin and failure probability of a count-min sketch that shares
/// the bloom geometry for `(n, fp)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountMinGuarantees {
    pub epsilon: f64,
    /// Failure probability implied by the false-positive target alone.
    pub delta_fp: f64,
    /// Effective failure probability, never below `epsilon`.
    pub delta: f64,
}

pub fn derive_cm_guarantees(n: u64, fp: f64) -> CountMinGuarantees {
    let epsilon = E * LN_2 / n as f64;
    let delta_fp = fp.powf(1.0 / LN_2);
    CountMinGuarantees {
        epsilon,
        delta_fp,
        delta: delta_fp.max(epsilon),
    }
}

/// Number of pairwise independent base hashes a count-min sketch with
/// `(epsilon, delta)` would need when deriving the rest by linear
/// combination. Informational only; the engine always uses two.
pub fn base_hash_count(epsilon: f64, delta: f64) -> u64 {
    let ratio = (1.0 / delta).ln() / (1.0 / epsilon).ln();
    // absorb rounding noise such as ln(1e4)/ln(1e2) = 2.0000000000000004
    2 * (ratio - 1e-9).ceil().max(1.0) as u64
}

/// Upper bound on the cells a single cluster may absorb while dynamic:
/// `floor(1 / (2 lambda D_th)) * (2d + 1)`.
pub fn fragment_capacity(lambda: f64, density_threshold: f64, d: usize) -> Result<u64> {
    check_open_unit("lambda", lambda)?;
    if !(density_threshold > 0.0 && density_threshold.is_finite()) {
        return Err(Error::invalid("density_threshold", "must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("d", "dimensionality must be at least 1"));
    }
    let dense_cells = (1.0 / (2.0 * lambda * density_threshold)).floor() as u64;
    if dense_cells == 0 {
        return Err(Error::invalid(
            "lambda",
            format!("decay {lambda} is too fast for density threshold {density_threshold}"),
        ));
    }
    Ok(dense_cells * (2 * d as u64 + 1))
}

fn check_probability(name: &'static str, v: f64) -> Result<()> {
    check_open_unit(name, v)
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} is not in (0, 1)")))
    }
}

/// User-facing engine configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsConfig {
    /// Bloom capacity in elements.
    pub capacity: u64,
    pub fp: f64,
    pub lambda: f64,
    pub density_threshold: f64,
    pub dims: usize,
    pub resolution: f64,
    /// Grid origin; `None` means the all-zero tuple.
    pub origin: Option<Vec<f64>>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            capacity: 6935,
            fp: 0.0078,
            lambda: 0.001,
            density_threshold: 3.0,
            dims: 5,
            resolution: 1.5,
            origin: None,
        }
    }
}

/// Validated configuration together with everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchParams {
    pub capacity: u64,
    pub fp: f64,
    pub geometry: Geometry,
    pub guarantees: CountMinGuarantees,
    pub lambda: f64,
    pub density_threshold: f64,
    pub dims: usize,
    pub resolution: f64,
    pub origin: Vec<f64>,
}

impl SketchParams {
    pub fn derive(cfg: &ParamsConfig) -> Result<Self> {
        let geometry = derive_geometry(cfg.capacity, cfg.fp)?;
        check_open_unit("lambda", cfg.lambda)?;
        if !(cfg.density_threshold > 0.0 && cfg.density_threshold.is_finite()) {
            return Err(Error::invalid("density_threshold", "must be positive"));
        }
        if cfg.dims == 0 {
            return Err(Error::invalid("dims", "dimensionality must be at least 1"));
        }
        if !(cfg.resolution > 0.0 && cfg.resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        let origin = match &cfg.origin {
            Some(o) if o.len() != cfg.dims => {
                return Err(Error::invalid(
                    "origin",
                    format!("has {} components, expected {}", o.len(), cfg.dims),
                ))
            }
            Some(o) if o.iter().any(|v| !v.is_finite()) => {
                return Err(Error::invalid("origin", "components must be finite"))
            }
            Some(o) => o.clone(),
            None => vec![0.0; cfg.dims],
        };
        Ok(SketchParams {
            capacity: cfg.capacity,
            fp: cfg.fp,
            geometry,
            guarantees: derive_cm_guarantees(cfg.capacity, cfg.fp),
            lambda: cfg.lambda,
            density_threshold: cfg.density_threshold,
            dims: cfg.dims,
            resolution: cfg.resolution,
            origin,
        })
    }

    /// Cluster age at which a cluster expires, `1 / lambda`.
    pub fn time_threshold(&self) -> f64 {
        1.0 / self.lambda
    }

    pub fn fragment_capacity(&self) -> Result<u64> {
        fragment_capacity(self.lambda, self.density_threshold, self.dims)
    }
}
