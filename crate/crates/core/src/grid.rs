//! Uniform grid discretization and orthogonal cell neighborhoods.

use crate::error::{Error, Result};

/// Floored cell coordinates must lie strictly inside `(-2^62, 2^62)`, which
/// keeps every neighbor of an accepted cell encodable.
const COORD_LIMIT: f64 = 4_611_686_018_427_387_904.0;

/// Integer coordinates of a grid cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoords(pub Vec<i64>);

impl CellCoords {
    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

/// A uniform grid of resolution `r` anchored at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    resolution: f64,
    origin: Vec<f64>,
}

impl GridConfig {
    pub fn new(resolution: f64, origin: Vec<f64>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution", format!("{resolution} must be positive")));
        }
        if origin.is_empty() {
            return Err(Error::invalid("origin", "dimensionality must be at least 1"));
        }
        if let Some(dim) = origin.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { dim });
        }
        Ok(GridConfig { resolution, origin })
    }

    /// Grid with the origin at zero.
    pub fn at_zero(resolution: f64, dims: usize) -> Result<Self> {
        Self::new(resolution, vec![0.0; dims])
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn dims(&self) -> usize {
        self.origin.len()
    }

    /// Cell containing `x`: `floor((x_i - origin_i) / r)` per component.
    pub fn discretize(&self, x: &[f64]) -> Result<CellCoords> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: x.len(),
            });
        }
        x.iter()
            .zip(&self.origin)
            .enumerate()
            .map(|(dim, (&xi, &ai))| {
                if !xi.is_finite() {
                    return Err(Error::NonFinite { dim });
                }
                let c = ((xi - ai) / self.resolution).floor();
                if c.is_finite() && c > -COORD_LIMIT && c < COORD_LIMIT {
                    Ok(c as i64)
                } else {
                    Err(Error::CoordOutOfRange(if c.is_sign_negative() {
                        i128::MIN
                    } else {
                        i128::MAX
                    }))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(CellCoords)
    }
}

/// The cell itself followed by its `2d` orthogonal neighbors, dimension-major
/// with the `-1` neighbor before the `+1` neighbor.
pub fn neighborhood(cell: &CellCoords) -> Result<Vec<CellCoords>> {
    let mut out = Vec::with_capacity(2 * cell.dims() + 1);
    out.push(cell.clone());
    for dim in 0..cell.dims() {
        for step in [-1i64, 1] {
            let c = cell.0[dim];
            let shifted = c
                .checked_add(step)
                .filter(|&v| v != i64::MIN)
                .ok_or(Error::CoordOutOfRange(c as i128 + step as i128))?;
            let mut n = cell.0.clone();
            n[dim] = shifted;
            out.push(CellCoords(n));
        }
    }
    Ok(out)
}
