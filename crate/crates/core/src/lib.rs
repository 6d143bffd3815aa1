//! Single-pass stream clustering whose whole model is probabilistic.
//!
//! A decayed count-min sketch estimates grid-cell density and partitioned
//! bloom filters hold cluster membership. Both address the same `k * p`
//! table through one hash family, so a cell's signature is computed once per
//! instance and reused for density, fragment construction and lookup.
//!
//! ```
//! use bloomstream::{BloomStreamModel, ParamsConfig, SketchParams};
//!
//! let params = SketchParams::derive(&ParamsConfig { dims: 2, ..Default::default() }).unwrap();
//! let mut model = BloomStreamModel::new(params).unwrap();
//! for t in 0..10 {
//!     model.ingest(&[0.2, 0.4], t as f64).unwrap();
//! }
//! assert!(model.classify(&[0.2, 0.4], 9.0).label().is_some());
//! ```

pub mod bench;
pub mod bloom;
pub mod clustermodel;
pub mod countmin;
pub mod engine;
pub mod error;
pub mod grid;
pub mod hashcore;
pub mod io;
pub mod params;

pub use bench::{purity, SyntheticStreamConfig, Truth};
pub use clustermodel::{Assignment, ClusterEvent, ClusterState, Label};
pub use engine::{BloomStreamModel, IngestOutcome, ModelStats};
pub use error::{Error, Result};
pub use params::{ParamsConfig, SketchParams};
