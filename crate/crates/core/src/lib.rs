//! Structural anomaly detection for regional socio-economic indicators.
//!
//! A merged table of NUTS2 regions by indicators is standardized and scored
//! by five detectors (univariate z-scores, Mahalanobis distance, Isolation
//! Forest, Local Outlier Factor, One-Class SVM). A region flagged by at least
//! three of them is a structural anomaly.
//!
//! - [`eurostat`] fetches and parses the source indicators.
//! - [`dataset`] merges them and holds the bundled fixture.
//! - [`detectors`] and [`ensemble`] do the scoring and voting.
//! - [`viz`] renders the diagnostics as SVG.
//! - [`pipeline`] wires everything together.

pub mod dataset;
pub mod detectors;
pub mod ensemble;
pub mod eurostat;
pub mod numkit;
pub mod pipeline;
pub mod viz;
