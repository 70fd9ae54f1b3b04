//! Two-photon interference of pseudo-thermal and entangled light behind a
//! double slit: closed-form patterns, a speckle Monte Carlo, photon-event
//! sampling, coincidence counting and detector scans.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coincidence;
pub mod error;
pub mod events;
pub mod fit;
pub mod optics;
pub mod rng;
pub mod scan;
pub mod source;
pub mod speckle;

pub use coincidence::{
    build_histogram, count_pairs, count_windowed, fit_bunching_peak, BunchingFit, CoincidenceHistogram,
    HistogramConfig, WindowedCounts,
};
pub use error::{Error, Result};
pub use events::{DetectorConfig, DetectorId, EventStream};
pub use optics::{
    first_order_pattern, g2_finite_spdc, g2_finite_thermal, g2_point_spdc, g2_point_thermal, visibility,
    DetectorPair, Geometry, Slit, SpdcModel, ThermalMixture,
};
pub use scan::{fit_pattern, resolution_report, run_scan, Engine, FitResult, ResolutionReport, ScanConfig, ScanMode, ScanResult};
pub use source::{SourceKind, SourceModel, ThermalSourceConfig};
pub use speckle::{estimate_g2_spatial, CorrelationEstimate, SpeckleEnsemble};
