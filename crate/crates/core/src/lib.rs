//! Random normal matrix ensembles in the plane: potentials and droplets,
//! weighted orthogonal polynomial kernels, eigenvalue samplers, fluctuation
//! statistics, trace-formula cumulants and Berezin transforms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod berezin;
pub mod cumulants;
pub mod error;
pub mod htest;
pub mod kernel;
pub mod potential;
pub mod quadrature;
pub mod sampler;
pub mod statistics;
pub mod testfn;

pub use error::{Error, Result};
