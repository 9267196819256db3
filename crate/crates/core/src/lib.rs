//! Lagrange-multiplier-type tests for cross-sectional independence in large
//! panel data models.
//!
//! The pipeline is: a balanced [`PanelDataset`] is fitted by one of three
//! residual estimators ([`panel`]), the residual correlation matrix and its
//! trace functionals are formed ([`corr`]), and the test battery
//! ([`cdtest`]) turns those into statistics, p-values and decisions.
//! [`dgp`] and [`mc`] generate synthetic panels and run seeded size/power
//! experiments; [`cli`] is the command-line front end and CSV layer.

pub mod cdtest;
pub mod cli;
pub mod corr;
pub mod dgp;
pub mod error;
mod linalg;
pub mod mc;
pub mod panel;
pub mod report;

pub use cdtest::{run_all, Battery, NullConstants, NullDist, Sidedness, TestConfig, TestKind, TestResult};
pub use corr::{correlation_matrix, projection_pair_moments, trace_stats, CorrelationMatrix, ProjectionPairMoments, TraceStats};
pub use dgp::{DgpConfig, DgpKind, ErrorDist, Alternative, GeneratedPanel};
pub use error::{Error, Result};
pub use mc::{derive_stream, run_experiment, run_replication, ExperimentPlan, RejectionReport, Stream};
pub use panel::{fit, fit_dynamic, fit_fixed_effects, fit_heterogeneous, validate_dataset, Basis, ModelSpec, PanelDataset, ResidualMatrix};
