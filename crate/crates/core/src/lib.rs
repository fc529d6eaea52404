//! Statistical analysis of machine-learning evaluation scores under training
//! nondeterminism.
//!
//! The crate fits linear mixed effects models to per-test-item evaluation
//! scores, tests significance of system differences with generalized
//! likelihood ratio tests (optionally conditional on data properties),
//! decomposes score variance into components, and computes a reliability
//! coefficient from the substantial-to-total variance ratio. A simulation
//! module generates datasets with known ground truth and drives the
//! Monte-Carlo calibration of the whole pipeline.

pub mod data;
pub mod design;
pub mod error;
pub mod fit;
pub mod formula;
pub mod inference;
pub mod linalg;
pub mod optim;
pub mod report;
pub mod sim;
pub mod text;
pub mod vca;

pub use data::{load_csv, load_csv_delimited, ColumnSchema, EvalDataset, Observation};
pub use error::{Error, Result};
pub use fit::{fit, predict_fixed, Criterion, FitOptions, FittedModel, VarianceParams};
pub use formula::{FixedTerm, ModelSpec};
pub use inference::{glrt, glrt_conditional, standardized_mean_difference, GlrtResult};
pub use sim::{mc_study, simulate, CovariateSpec, McSummary, SimSpec};
pub use vca::{compute_phi, vca, Interpretation, VcaReport};
