//! Spiked sample covariance matrices and the deformed Marchenko–Pastur law.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense symmetric eigendecomposition and helpers.
//! * [`model`]: population spectra with bulk atoms and spikes.
//! * [`stieltjes`]: the limiting Stieltjes transform, its density and bulk structure.
//! * [`outliers`]: deterministic outlier locations, overlaps and bounds.
//! * [`shrinkage`]: loss-optimal eigenvalue shrinkers.
//! * [`sim`]: Monte Carlo driver checking the asymptotic statements.
//!
//! With the default `parallel` feature the hot loops fan out over rayon; every
//! entry point also accepts [`Execution::Sequential`] and produces identical output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod outliers;
pub mod shrinkage;
pub mod sim;
pub mod stieltjes;

pub use error::{Result, SpectraError};
pub use exec::Execution;
pub use model::{BulkSpectrum, ModelSpec, PopulationModel, Spike, SpikeSet, Thresholds};
pub use stieltjes::{BulkStructure, FFunction};
