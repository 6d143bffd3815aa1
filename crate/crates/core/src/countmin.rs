//! Count-min sketch under a damped window.
//!
//! An arrival at time `t` carries weight `2^{-lambda (t_c - t)}` at the current
//! time `t_c`. Each counter keeps the time it was last touched and is decayed
//! lazily when it is next updated, so an update costs `O(k)` regardless of
//! how long the counter sat idle.

use crate::error::{Error, Result};
use crate::hashcore::{CellSignature, Geometry};

/// Decay factor for `elapsed` time units.
#[inline]
pub fn decay_factor(lambda: f64, elapsed: f64) -> f64 {
    (-lambda * elapsed).exp2()
}

/// A cell is dense when its density is strictly above the threshold.
#[inline]
pub fn is_dense(density: f64, threshold: f64) -> bool {
    density > threshold
}

#[derive(Debug, Clone)]
pub struct DecayedCountMin {
    geometry: Geometry,
    lambda: f64,
    counts: Vec<f64>,
    stamps: Vec<f64>,
    clock: f64,
    /// Decayed number of arrivals as of `clock`.
    mass: f64,
}

impl DecayedCountMin {
    pub fn new(geometry: Geometry, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid("lambda", format!("{lambda} is not in (0, 1)")));
        }
        let m = geometry.m();
        Ok(DecayedCountMin {
            geometry,
            lambda,
            counts: vec![0.0; m],
            stamps: vec![0.0; m],
            clock: f64::NEG_INFINITY,
            mass: 0.0,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Latest timestamp seen, or `None` before the first update.
    pub fn clock(&self) -> Option<f64> {
        self.clock.is_finite().then_some(self.clock)
    }

    /// Records one arrival of the cell `sig` at time `t` and returns the
    /// cell's density (the minimum of its `k` refreshed counters).
    pub fn update(&mut self, sig: &CellSignature, t: f64) -> Result<f64> {
        self.geometry.check_same(&sig.geometry())?;
        if !t.is_finite() || t < self.clock {
            return Err(Error::ClockRegression { t, clock: self.clock });
        }
        if self.clock.is_finite() {
            self.mass *= decay_factor(self.lambda, t - self.clock);
        }
        self.mass += 1.0;
        self.clock = t;

        let mut density = f64::INFINITY;
        for &idx in sig.indices() {
            let i = idx as usize;
            let prev = self.counts[i];
            let c = if prev == 0.0 {
                1.0
            } else {
                decay_factor(self.lambda, t - self.stamps[i]) * prev + 1.0
            };
            self.counts[i] = c;
            self.stamps[i] = t;
            density = density.min(c);
        }
        Ok(density)
    }

    /// Density estimate of `sig` at time `t` without modifying the sketch.
    /// Counters are decayed to `t`; reads before a counter's last update are
    /// not decayed backwards.
    pub fn query(&self, sig: &CellSignature, t: f64) -> Result<f64> {
        self.geometry.check_same(&sig.geometry())?;
        Ok(sig
            .indices()
            .iter()
            .map(|&idx| {
                let i = idx as usize;
                decay_factor(self.lambda, (t - self.stamps[i]).max(0.0)) * self.counts[i]
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Total decayed arrival mass at time `t >= clock`.
    pub fn total_mass(&self, t: f64) -> f64 {
        if self.clock.is_finite() {
            self.mass * decay_factor(self.lambda, (t - self.clock).max(0.0))
        } else {
            0.0
        }
    }

    /// Fraction of counters that have ever been touched.
    pub fn fill_ratio(&self) -> f64 {
        let used = self.counts.iter().filter(|&&c| c > 0.0).count();
        used as f64 / self.counts.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::HashFamily;

    fn setup(lambda: f64) -> (HashFamily, DecayedCountMin) {
        let g = Geometry::new(7, 10009).unwrap();
        (HashFamily::with_default_seeds(g), DecayedCountMin::new(g, lambda).unwrap())
    }

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-300)
    }

    #[test]
    fn update_examples() {
        let (fam, mut cm) = setup(0.001);
        let sig = fam.cell_signature(&[3, 4]).unwrap();
        assert_eq!(cm.update(&sig, 10.0).unwrap(), 1.0);
        assert_eq!(cm.update(&sig, 10.0).unwrap(), 2.0);

        let (_, mut cm) = setup(0.001);
        cm.update(&sig, 0.0).unwrap();
        assert!(rel_close(cm.update(&sig, 1000.0).unwrap(), 1.5));
    }

    #[test]
    fn query_examples() {
        let (fam, mut cm) = setup(0.01);
        let sig = fam.cell_signature(&[1]).unwrap();
        assert_eq!(cm.query(&sig, 0.0).unwrap(), 0.0);
        let d = cm.update(&sig, 5.0).unwrap();
        assert_eq!(cm.query(&sig, 5.0).unwrap(), d);
        assert!(rel_close(cm.query(&sig, 105.0).unwrap(), 0.5));
        // the read did not change the state
        assert_eq!(cm.query(&sig, 5.0).unwrap(), d);
    }

    #[test]
    fn clock_regression_is_rejected_without_mutation() {
        let (fam, mut cm) = setup(0.01);
        let sig = fam.cell_signature(&[1]).unwrap();
        cm.update(&sig, 5.0).unwrap();
        assert!(matches!(
            cm.update(&sig, 4.0),
            Err(Error::ClockRegression { .. })
        ));
        assert!(cm.update(&sig, f64::NAN).is_err());
        assert_eq!(cm.query(&sig, 5.0).unwrap(), 1.0);
        assert_eq!(cm.clock(), Some(5.0));
    }

    #[test]
    fn dense_is_strict() {
        assert!(!is_dense(3.0, 3.0));
        assert!(is_dense(3.01, 3.0));
        assert!(!is_dense(0.0, 0.5));
    }

    #[test]
    fn decay_regrouping() {
        let (fam, mut cm) = setup(0.003);
        let sig = fam.cell_signature(&[9, 9, 9]).unwrap();
        let (t1, t2, t3) = (2.0, 170.5, 911.25);
        cm.update(&sig, t1).unwrap();
        cm.update(&sig, t2).unwrap();
        let lazy = cm.update(&sig, t3).unwrap();
        let lambda = 0.003;
        let regrouped = decay_factor(lambda, t3 - t1)
            + decay_factor(lambda, t3 - t2)
            + 1.0;
        assert!(rel_close(lazy, regrouped));
    }

    #[test]
    fn total_mass_tracks_decayed_arrivals() {
        let (fam, mut cm) = setup(0.01);
        assert_eq!(cm.total_mass(0.0), 0.0);
        for t in 0..50 {
            let sig = fam.cell_signature(&[t]).unwrap();
            cm.update(&sig, t as f64).unwrap();
        }
        let exact: f64 = (0..50).map(|t| decay_factor(0.01, 60.0 - t as f64)).sum();
        assert!(rel_close(cm.total_mass(60.0), exact));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let (_, mut cm) = setup(0.01);
        let other = HashFamily::with_default_seeds(Geometry::new(3, 5).unwrap());
        let sig = other.cell_signature(&[1]).unwrap();
        assert!(matches!(cm.update(&sig, 0.0), Err(Error::GeometryMismatch { .. })));
        assert!(cm.query(&sig, 0.0).is_err());
    }

    #[test]
    fn fill_ratio_counts_touched_counters() {
        let (fam, mut cm) = setup(0.01);
        assert_eq!(cm.fill_ratio(), 0.0);
        cm.update(&fam.cell_signature(&[1]).unwrap(), 0.0).unwrap();
        assert!(rel_close(cm.fill_ratio(), 7.0 / 70063.0));
    }
}
