//! Goodness-of-fit testing for unnormalised densities with the
//! standardisation-function kernel Stein discrepancy, including the
//! bounded-domain variant for truncated and compositional data.
//!
//! The building blocks are a [`model::DensityModel`] (unnormalised log
//! density, score and support), a smooth [`kernel::SmoothKernel`], and an
//! auxiliary function from [`auxiliary`] that reshapes the Stein operator.
//! [`stein`] turns them into a Stein kernel and [`gof`] calibrates the
//! resulting statistic with a wild bootstrap.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod gof;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub mod stein;
pub mod verify;

pub use auxiliary::{Auxiliary, DiagonalAux, MatrixAux};
pub use domain::Domain;
pub use error::{Error, Result};
pub use gof::TestResult;
pub use kernel::{Rbf, SmoothKernel};
pub use model::DensityModel;
pub use sampling::RngStream;
pub use stein::SteinKernelSpec;
