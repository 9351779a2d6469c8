//! Continuum percolation on Gilbert's disc graph.
//!
//! The crate samples marked Poisson configurations, builds the unit-distance
//! graph, and evaluates site, bond and bow-tie enhanced site percolation on
//! it. On top of that sit the pivotality estimators with their finite
//! difference cross-check, the dynamic site-in-bond coupling, an exhaustive
//! oracle for small fixtures, and critical-point estimation.

pub mod coupling;
pub mod enhancement;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod graph;
pub mod oracle;
pub mod percolation;
pub mod pivotal;
pub mod point_process;
pub mod stats;
pub mod stream;
pub mod union_find;

pub use error::{Error, Result};
pub use exec::Execution;
pub use point_process::{Marks, MarkedPointSet, Point, Region};
pub use stream::StreamSpec;
