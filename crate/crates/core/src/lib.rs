//! End-to-end privacy accounting for pipelines of the form "non-private
//! data-dependent pre-processing followed by a DP mechanism".
//!
//! The crate provides:
//! - the dataset container and metrics ([`dataset`]),
//! - evaluable privacy-loss curves ([`curves`]) and the six mechanisms that
//!   produce them ([`mechanisms`]),
//! - the pre-processing algorithms and their sensitivity bounds
//!   ([`preprocessing`]),
//! - the composition accountant ([`accountant`]),
//! - a propose-test-release wrapper for rank-reduction pipelines ([`ptr`]),
//! - brute-force and Monte-Carlo reference computations ([`oracle`]),
//! - synthetic-data experiments and comparison-curve emission
//!   ([`experiments`]).

// `!(x > 0.0)` guards are deliberate: they reject NaN, `x <= 0.0` does not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod budget;
pub mod curves;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod oracle;
pub mod preprocessing;
pub mod profile;
pub mod ptr;
pub mod sampling;

pub use budget::{PrivacyBudget, Provenance, SensitivityBounds};
pub use curves::{RdpCurve, SrdpCurve};
pub use dataset::{d12_distance, hamming_distance, DatasetMatrix};
pub use error::{Error, Result};
pub use mechanisms::{MechanismKind, MechanismSpec};
pub use preprocessing::{ImputeModel, PreprocSpec};
pub use profile::CollectionProfile;
